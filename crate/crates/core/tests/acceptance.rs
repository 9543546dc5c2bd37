//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use eventnet::compile::{compile, CompileConfig, Scheme};
use eventnet::datagen::{gen_correlations, random_event_program, Correlation, GenConfig};
use eventnet::dataset::Dataset;
use eventnet::distributed::{max_job_count, run_distributed, DistConfig};
use eventnet::expr::{eval_all, Valuation};
use eventnet::ground::{ground, GroundedProgram};
use eventnet::interp::{interpret, IVal};
use eventnet::lang::parse_user_program;
use eventnet::network::{build_unfolded, EventNetwork};
use eventnet::oracle::{oracle_probabilities, per_world_report, world_reports, DEFAULT_CAP};
use eventnet::pipeline::{instance, prepare};
use eventnet::translate::{translate_to_event_program, Bindings};
use eventnet::{parse_event_program, Value, VarTable};

const KMEDOIDS: &str = include_str!("../../../programs/kmedoids.py");
const MEMBERS: &str = include_str!("../../../programs/kmedoids_members.py");
const EXAMPLE: &str = include_str!("../../../fixtures/four_points.json");

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Random {
    seed: u64,
    g: GroundedProgram,
    net: EventNetwork,
    truth: Vec<f64>,
}

fn random_instances() -> Vec<Random> {
    (0..200u64)
        .map(|seed| {
            let m = 6 + (seed % 11) as usize;
            let (src, vars) = random_event_program(seed, m, 12);
            let mut g = ground(&parse_event_program(&src).unwrap(), &VarTable::from_pairs(vars).unwrap()).unwrap();
            g.select_targets(&["*".to_string()]).unwrap();
            let net = build_unfolded(&g).unwrap();
            let truth = oracle_probabilities(&g, &g.targets, DEFAULT_CAP).unwrap().probs;
            Random { seed, g, net, truth }
        })
        .collect()
}

fn ac1(inst: &[Random]) -> Outcome {
    let mut targets = 0;
    for r in inst {
        let res = compile(&r.net, CompileConfig::exact()).map_err(|e| e.to_string())?;
        for (t, p) in res.targets.iter().zip(&r.truth) {
            ensure((t.lower - p).abs() <= 1e-9 && (t.upper - p).abs() <= 1e-9, || {
                format!("seed {}: {} exact [{}, {}] vs {p}", r.seed, t.eid, t.lower, t.upper)
            })?;
            targets += 1;
        }
    }
    let maxm = inst.iter().map(|r| r.g.vars.len()).max().unwrap_or(0);
    Ok(format!("{} programs, {targets} targets, up to {maxm} variables", inst.len()))
}

fn valid(r: &Random, res: &eventnet::compile::CompileResult, eps: f64) -> Result<(), String> {
    for (t, p) in res.targets.iter().zip(&r.truth) {
        ensure(t.lower <= p + 1e-9 && *p <= t.upper + 1e-9 && t.upper - t.lower <= 2.0 * eps + 1e-9, || {
            format!("seed {}: {} eps={eps} [{}, {}] vs {p}", r.seed, t.eid, t.lower, t.upper)
        })?;
    }
    Ok(())
}

fn ac3(inst: &[Random]) -> Outcome {
    let mut runs = 0;
    for r in inst {
        for scheme in [Scheme::Eager, Scheme::Lazy, Scheme::Hybrid] {
            for eps in [0.01, 0.1, 0.3] {
                let res = compile(&r.net, CompileConfig::new(scheme, eps)).map_err(|e| e.to_string())?;
                valid(r, &res, eps).map_err(|e| format!("{scheme:?} {e}"))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs, 0 violations"))
}

fn ac2() -> Outcome {
    let ds = Dataset::from_json(EXAMPLE).map_err(|e| e.to_string())?;
    let p = prepare(MEMBERS, &ds).map_err(|e| e.to_string())?;
    let vt = &p.grounded.vars;
    let world = |pairs: &[(&str, bool)]| per_world_report(&p.grounded, &Valuation::from_named(vt, pairs).unwrap()).unwrap();
    let w = world(&[("x1", true), ("x2", false), ("x3", true), ("x4", true)]);
    ensure(w.objects == [0, 2, 3] && w.clusters == [vec![0], vec![2, 3]], || format!("first world: {:?} {:?}", w.objects, w.clusters))?;
    for x4 in [false, true] {
        let w = world(&[("x1", true), ("x2", true), ("x3", true), ("x4", x4)]);
        ensure(w.clusters == [vec![0, 1], vec![2]], || format!("second world: {:?}", w.clusters))?;
    }
    let reports = world_reports(&p.grounded, DEFAULT_CAP).map_err(|e| e.to_string())?;
    let mut shown = Vec::new();
    for (a, b) in [(1usize, 2usize), (2, 3)] {
        let sum: f64 = reports
            .iter()
            .filter(|w| w.clusters.iter().any(|c| c.contains(&a) && c.contains(&b)))
            .fold(0.0, |acc, w| acc + w.probability);
        let inst = instance(MEMBERS, &ds, &[], Some((a, b)), false).map_err(|e| e.to_string())?;
        let res = compile(&inst.network, CompileConfig::exact()).map_err(|e| e.to_string())?;
        let co = res.targets.last().unwrap();
        ensure((co.lower - sum).abs() <= 1e-12 && (co.upper - sum).abs() <= 1e-12, || {
            format!("Co^{{{a},{b}}} = [{}, {}], world sum {sum}", co.lower, co.upper)
        })?;
        shown.push(format!("P(o{a},o{b} together) = {sum:.4}"));
    }
    Ok(format!("both expected clusterings reproduced; {}", shown.join(", ")))
}

fn kmedoids_branches(ds: &Dataset, cfg: CompileConfig) -> Result<u64, String> {
    let inst = instance(KMEDOIDS, ds, &[], None, false).map_err(|e| e.to_string())?;
    Ok(compile(&inst.network, cfg).map_err(|e| e.to_string())?.stats.branches)
}

fn ac4() -> Outcome {
    let gen = |scheme| gen_correlations(&GenConfig { group: 4, iter: 3, ..GenConfig::new(20, scheme) }).unwrap();
    let pos = gen(Correlation::Positive { l: 2, pool: None });
    let ex = kmedoids_branches(&pos, CompileConfig::exact())?;
    let hy = kmedoids_branches(&pos, CompileConfig::new(Scheme::Hybrid, 0.1))?;
    let lz = kmedoids_branches(&pos, CompileConfig::new(Scheme::Lazy, 0.1))?;
    ensure(hy < ex && lz < ex, || format!("positive: exact {ex}, hybrid {hy}, lazy {lz}"))?;
    let mut notes = vec![format!("positive exact {ex} hybrid {hy} lazy {lz}")];
    for (name, scheme) in [("mutex", Correlation::Mutex { m: 4 }), ("markov", Correlation::Markov)] {
        let ds = gen(scheme);
        let ex = kmedoids_branches(&ds, CompileConfig::exact())?;
        for s in [Scheme::Eager, Scheme::Lazy] {
            let b = kmedoids_branches(&ds, CompileConfig::new(s, 0.01))?;
            ensure((b as f64 - ex as f64).abs() <= 0.05 * ex as f64, || format!("{name}: {s:?} {b} vs exact {ex}"))?;
        }
        notes.push(format!("{name} exact {ex}"));
    }
    for (name, ds) in [("positive", &pos), ("markov", &gen(Correlation::Markov))] {
        let counts: Vec<u64> =
            [0.01, 0.1, 0.3].iter().map(|&e| kmedoids_branches(ds, CompileConfig::new(Scheme::Hybrid, e))).collect::<Result<_, _>>()?;
        ensure(counts.windows(2).all(|w| w[1] <= w[0]), || format!("{name}: hybrid branches over eps {counts:?}"))?;
    }
    Ok(notes.join("; "))
}

fn ac5() -> Outcome {
    let mut rows = Vec::new();
    for m in [12usize, 16, 20] {
        let ds = gen_correlations(&GenConfig { group: 4, iter: 1, ..GenConfig::new(20, Correlation::Positive { l: 4, pool: Some(m) }) }).unwrap();
        let inst = instance(KMEDOIDS, &ds, &[], None, false).map_err(|e| e.to_string())?;
        ensure(inst.prepared.grounded.vars.len() == m, || format!("expected {m} variables"))?;
        let res = compile(&inst.network, CompileConfig::exact()).map_err(|e| e.to_string())?;
        let naive = 1u64 << m;
        let slots: u64 = (0..inst.network.len() as u32).map(|n| inst.network.slots_of(n) as u64).sum();
        let units = res.stats.propagations.div_ceil(slots);
        ensure(res.stats.branches <= naive, || format!("m={m}: {} branches > {naive}", res.stats.branches))?;
        if m == 20 {
            ensure(units < naive, || format!("m=20: {units} work units >= {naive}"))?;
        }
        rows.push(format!("m={m}: branches {} units {units} naive {naive}", res.stats.branches));
    }
    Ok(rows.join("; "))
}

fn ac6(inst: &[Random]) -> Outcome {
    let mut runs = 0;
    let ds = gen_correlations(&GenConfig { group: 4, iter: 2, ..GenConfig::new(16, Correlation::Markov) }).unwrap();
    let km = instance(KMEDOIDS, &ds, &[], None, false).map_err(|e| e.to_string())?;
    let nets: Vec<&EventNetwork> = inst.iter().step_by(10).map(|r| &r.net).chain([&km.network]).collect();
    for net in &nets {
        let m = net.vars.len();
        let seq = compile(net, CompileConfig::exact()).map_err(|e| e.to_string())?;
        for workers in [2, 4, 8] {
            for d in [1, 2, 3] {
                let r = run_distributed(net, CompileConfig::exact(), DistConfig { workers, job_depth: d }).map_err(|e| e.to_string())?;
                for (a, b) in r.result.targets.iter().zip(&seq.targets) {
                    ensure((a.lower - b.lower).abs() <= 1e-9 && (a.upper - b.upper).abs() <= 1e-9, || format!("exact-d {} differs", a.eid))?;
                }
                ensure(r.jobs as u128 <= max_job_count(m.max(1), d), || format!("{} jobs > bound", r.jobs))?;
                runs += 1;
            }
        }
        let hy = compile(net, CompileConfig::new(Scheme::Hybrid, 0.1)).map_err(|e| e.to_string())?;
        let one = run_distributed(net, CompileConfig::new(Scheme::Hybrid, 0.1), DistConfig { workers: 1, job_depth: 2 }).map_err(|e| e.to_string())?;
        ensure(one.result.stats == hy.stats, || format!("workers=1: {:?} vs {:?}", one.result.stats, hy.stats))?;
    }
    for r in inst {
        for eps in [0.01, 0.1, 0.3] {
            let d = run_distributed(&r.net, CompileConfig::new(Scheme::Hybrid, eps), DistConfig { workers: 4, job_depth: 2 }).map_err(|e| e.to_string())?;
            valid(r, &d.result, eps).map_err(|e| format!("hybrid-d {e}"))?;
            ensure(d.jobs as u128 <= max_job_count(r.g.vars.len(), 2), || format!("seed {}: {} jobs > bound", r.seed, d.jobs))?;
            runs += 1;
        }
    }
    Ok(format!("{runs} distributed runs"))
}

fn ac7() -> Outcome {
    let mut sizes = Vec::new();
    for iter in [1usize, 2, 3] {
        let ds = gen_correlations(&GenConfig { group: 2, iter, ..GenConfig::new(10, Correlation::Positive { l: 2, pool: None }) }).unwrap();
        let un = instance(KMEDOIDS, &ds, &[], None, false).map_err(|e| e.to_string())?;
        let fo = instance(KMEDOIDS, &ds, &[], None, true).map_err(|e| e.to_string())?;
        let a = compile(&un.network, CompileConfig::exact()).map_err(|e| e.to_string())?;
        let b = compile(&fo.network, CompileConfig::exact()).map_err(|e| e.to_string())?;
        for (x, y) in a.targets.iter().zip(&b.targets) {
            ensure(x.eid == y.eid && (x.lower - y.lower).abs() <= 1e-9 && (x.upper - y.upper).abs() <= 1e-9, || {
                format!("iter {iter}: {} unfolded [{}, {}] folded [{}, {}]", x.eid, x.lower, x.upper, y.lower, y.upper)
            })?;
        }
        sizes.push((iter, un.network.len(), fo.network.len()));
    }
    ensure(sizes.iter().all(|s| s.2 == sizes[0].2), || format!("folded sizes vary: {sizes:?}"))?;
    Ok(sizes.iter().map(|(i, u, f)| format!("iter {i}: {u} vs {f} nodes")).collect::<Vec<_>>().join(", "))
}

fn ac8() -> Outcome {
    let mut rows = Vec::new();
    for (name, scheme) in [("positive", Correlation::Positive { l: 2, pool: Some(10) }), ("markov", Correlation::Markov)] {
        for seed in 0..3 {
            let counts: Vec<u64> = [0.0, 0.25, 0.5, 0.75]
                .iter()
                .map(|&c| {
                    let ds = gen_correlations(&GenConfig { group: 4, certain: c, seed, ..GenConfig::new(20, scheme) }).unwrap();
                    kmedoids_branches(&ds, CompileConfig::new(Scheme::Hybrid, 0.1))
                })
                .collect::<Result<_, _>>()?;
            ensure(counts.windows(2).all(|w| w[1] <= w[0]), || format!("{name} seed {seed}: {counts:?}"))?;
            rows.push(format!("{name}/{seed} {counts:?}"));
        }
    }
    Ok(format!("hybrid branches by certain fraction: {}", rows.join(" ")))
}

fn ac9() -> Outcome {
    let ast = parse_user_program(include_str!("../../../programs/versions.py")).map_err(|e| e.to_string())?;
    let ep = translate_to_event_program(&ast, &Bindings::default()).map_err(|e| e.to_string())?;
    let expected = "\
M_{0} := 7.0
M_{1} := M_{0} + 2.0
M_{1.-1} := M_{1}
forall i in 0..2:
  M_{1.(2*i)} := M_{1.(2*i-1)} + i
  M_{1.(2*i).-1} := M_{1.(2*i)}
  forall j in 0..3:
    M_{1.(2*i).j} := M_{1.(2*i).(j-1)} + 1.0
  M_{1.(2*i+1)} := M_{1.(2*i).2}
M_{2} := M_{1.3}
M_{3} := M_{2} + 1.0
";
    ensure(ep.to_string() == expected, || format!("translation differs:\n{ep}"))?;
    let g = ground(&ep, &VarTable::new()).map_err(|e| e.to_string())?;
    let vals = eval_all(&g.decls, &Valuation(vec![])).map_err(|e| e.to_string())?;
    let fin = g.lookup("M_{3}").ok_or("no M_{3}")?;
    let op = interpret(&ast, &Bindings::default(), &[]).map_err(|e| e.to_string())?;
    let want = match op.get("M") {
        Some(IVal::V(v)) => v.clone(),
        other => return Err(format!("interpreter gave {other:?}")),
    };
    ensure(vals[fin] == want && want == Value::Scalar(Some(17.0)), || format!("grounded {} vs interpreter {want}", vals[fin]))?;
    Ok(format!("{} declarations, M_{{3}} = 17", g.decls.len()))
}

fn main() -> ExitCode {
    let t = Instant::now();
    let inst = random_instances();
    let checks: Vec<(&str, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("AC1", "oracle equivalence", Box::new(|| ac1(&inst))),
        ("AC2", "worked example", Box::new(ac2)),
        ("AC3", "epsilon validity", Box::new(|| ac3(&inst))),
        ("AC4", "pruning trends", Box::new(ac4)),
        ("AC5", "naive vs exact work", Box::new(ac5)),
        ("AC6", "distributed correctness", Box::new(|| ac6(&inst))),
        ("AC7", "folded equals unfolded", Box::new(ac7)),
        ("AC8", "certain-fraction trend", Box::new(ac8)),
        ("AC9", "translation fidelity", Box::new(ac9)),
    ];
    let mut failed = 0;
    for (id, name, f) in checks {
        let s = Instant::now();
        match f() {
            Ok(detail) => println!("{id} PASS {name}: {detail} ({:.1}s)", s.elapsed().as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("{id} FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} of 9 passed in {:.1}s", 9 - failed, t.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
