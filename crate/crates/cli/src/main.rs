use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use eventnet::compile::{compile, CompileConfig, CompileResult, Scheme};
use eventnet::datagen::{gen_correlations, random_event_program, Correlation, GenConfig};
use eventnet::dataset::Dataset;
use eventnet::distributed::{max_job_count, run_distributed, DistConfig};
use eventnet::ground::ground;
use eventnet::network::build_unfolded;
use eventnet::oracle::{oracle_probabilities, world_reports, DEFAULT_CAP};
use eventnet::pipeline::{instance, prepare};
use eventnet::{parse_event_program, VarTable};

#[derive(Parser)]
#[command(name = "eventnet", version, about = "Probabilities of program outcomes over uncertain data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a program over a dataset and report target probabilities.
    Run(RunArgs),
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Compare exact compilation and the approximations against world enumeration.
    Check(CheckArgs),
    /// Counted-work sweeps.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Naive,
    Exact,
    Eager,
    Lazy,
    Hybrid,
    HybridD,
    ExactD,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Stage {
    Ast,
    EventProgram,
    Grounded,
    Network,
}

#[derive(Args)]
struct RunArgs {
    /// user program (.py)
    program: PathBuf,
    /// dataset JSON
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 3)]
    job_depth: usize,
    /// share one copy of the main loop body across iterations
    #[arg(long)]
    folded: bool,
    /// target patterns over identifiers, e.g. 'Centre_{0}^*' (default: final medoid events)
    #[arg(long, value_delimiter = ',')]
    targets: Vec<String>,
    /// also compute the probability that two objects share a final cluster
    #[arg(long, value_parser = parse_pair)]
    cooccur: Option<(String, String)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// print an intermediate stage instead of running
    #[arg(long, value_enum)]
    emit_stage: Option<Stage>,
    /// with --mode naive, print one JSON line per world
    #[arg(long)]
    worlds: bool,
    /// print JSON instead of the table
    #[arg(long)]
    json: bool,
    /// write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    let (a, b) = s.split_once(',').ok_or("expected two objects as A,B")?;
    Ok((a.trim().to_string(), b.trim().to_string()))
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Positive,
    Mutex,
    Markov,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    /// number of points
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    group: usize,
    /// literals per group (positive)
    #[arg(long, default_value_t = 2)]
    l: usize,
    /// variable pool size (positive; default n/group)
    #[arg(long)]
    pool: Option<usize>,
    /// mutex set size
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    certain: f64,
    #[arg(long, default_value_t = 0.5)]
    prob_lo: f64,
    #[arg(long, default_value_t = 0.8)]
    prob_hi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    iter: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// check this program and dataset instead of random event programs
    program: Option<PathBuf>,
    #[arg(long, requires = "program")]
    data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    targets: Vec<String>,
    #[arg(long)]
    folded: bool,
    /// number of random programs
    #[arg(long, default_value_t = 50)]
    count: u64,
    #[arg(long, default_value_t = 10)]
    vars: usize,
    #[arg(long, default_value_t = 14)]
    decls: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.1, 0.3])]
    epsilons: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sweep {
    /// growing variable pool, fixed points
    Vars,
    /// growing fraction of certain points
    Certain,
    /// growing epsilon for every scheme
    Epsilon,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "vars")]
    sweep: Sweep,
    /// program to run (default: the bundled k-medoids program)
    #[arg(long)]
    program: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![8, 12, 16])]
    vars: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

const KMEDOIDS: &str = include_str!("../../../programs/kmedoids.py");

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Bench(a) => cmd_bench(a),
    };
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_json(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn scheme_of(mode: Mode) -> Option<Scheme> {
    match mode {
        Mode::Exact | Mode::ExactD => Some(Scheme::Exact),
        Mode::Eager => Some(Scheme::Eager),
        Mode::Lazy => Some(Scheme::Lazy),
        Mode::Hybrid | Mode::HybridD => Some(Scheme::Hybrid),
        Mode::Naive => None,
    }
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let approx = matches!(a.mode, Mode::Eager | Mode::Lazy | Mode::Hybrid | Mode::HybridD);
    if a.epsilon > 0.0 && !approx {
        bail!("--epsilon > 0 needs an approximate mode (eager, lazy, hybrid, hybrid-d)");
    }
    if a.workers > 1 && !matches!(a.mode, Mode::HybridD | Mode::ExactD) {
        bail!("--workers > 1 needs hybrid-d or exact-d");
    }
    let src = read(&a.program)?;
    let ds = load_dataset(&a.data)?;
    let file = a.program.display().to_string();
    if let Some(stage) = a.emit_stage {
        let text = emit(&src, &ds, &a, stage).map_err(|e| anyhow::anyhow!("{file}: {e}"))?;
        print!("{text}");
        return Ok(ExitCode::SUCCESS);
    }
    let cooccur = match &a.cooccur {
        Some((x, y)) => {
            let ix = |k: &str| ds.point_index(k).with_context(|| format!("unknown object `{k}`"));
            Some((ix(x)?, ix(y)?))
        }
        None => None,
    };
    let start = Instant::now();
    let inst = instance(&src, &ds, &a.targets, cooccur, a.folded).map_err(|e| anyhow::anyhow!("{file}: {e}"))?;
    let g = &inst.prepared.grounded;
    let mut report = json!({ "mode": mode_name(a.mode), "epsilon": a.epsilon, "variables": g.vars.len() });
    let targets: Vec<(String, f64, f64)>;
    match scheme_of(a.mode) {
        None => {
            let r = oracle_probabilities(g, &g.targets, DEFAULT_CAP)?;
            targets = g.targets.iter().zip(&r.probs).map(|(&t, &p)| (g.decls[t].eid.clone(), p, p)).collect();
            report["stats"] = json!({ "evaluations": r.evaluations });
            if a.worlds {
                for w in world_reports(g, DEFAULT_CAP)? {
                    let values: serde_json::Map<String, serde_json::Value> =
                        g.targets.iter().map(|&t| (g.decls[t].eid.clone(), json!(w.values[t].to_string()))).collect();
                    println!(
                        "{}",
                        json!({
                            "world": w.valuation.0.iter().map(|b| b.unwrap_or(false)).collect::<Vec<_>>(),
                            "probability": w.probability,
                            "objects": w.objects,
                            "clusters": w.clusters,
                            "medoids": w.medoids,
                            "targets": values,
                        })
                    );
                }
            }
        }
        Some(scheme) => {
            let cfg = CompileConfig::new(scheme, a.epsilon);
            let res: CompileResult = if matches!(a.mode, Mode::HybridD | Mode::ExactD) {
                let d = run_distributed(&inst.network, cfg, DistConfig { workers: a.workers, job_depth: a.job_depth })?;
                report["jobs"] = json!(d.jobs);
                report["job_bound"] = json!(max_job_count(g.vars.len().max(1), a.job_depth).to_string());
                d.result
            } else {
                compile(&inst.network, cfg)?
            };
            targets = res.targets.iter().map(|t| (t.eid.clone(), t.lower, t.upper)).collect();
            report["stats"] = serde_json::to_value(res.stats)?;
            report["network_nodes"] = json!(inst.network.len());
        }
    }
    report["targets"] = targets.iter().map(|(e, l, u)| json!({ "eid": e, "lower": l, "upper": u })).collect();
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(out) = &a.out {
        fs::write(out, format!("{text}\n")).with_context(|| format!("writing {}", out.display()))?;
    }
    if a.json {
        println!("{text}");
    } else if !a.worlds {
        let mut o = std::io::stdout().lock();
        writeln!(o, "{:<28} {:>12} {:>12}", "target", "lower", "upper")?;
        for (e, l, u) in &targets {
            writeln!(o, "{e:<28} {l:>12.9} {u:>12.9}")?;
        }
        for (k, v) in report["stats"].as_object().into_iter().flatten() {
            writeln!(o, "{k}={v}")?;
        }
        if let Some(j) = report.get("jobs") {
            writeln!(o, "jobs={j} (bound {})", report["job_bound"].as_str().unwrap_or("?"))?;
        }
    }
    eprintln!("elapsed {:.3}s", start.elapsed().as_secs_f64());
    Ok(ExitCode::SUCCESS)
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Naive => "naive",
        Mode::Exact => "exact",
        Mode::Eager => "eager",
        Mode::Lazy => "lazy",
        Mode::Hybrid => "hybrid",
        Mode::HybridD => "hybrid-d",
        Mode::ExactD => "exact-d",
    }
}

fn emit(src: &str, ds: &Dataset, a: &RunArgs, stage: Stage) -> Result<String, eventnet::Error> {
    let p = prepare(src, ds)?;
    Ok(match stage {
        Stage::Ast => p.ast.to_string(),
        Stage::EventProgram => p.event_program.to_string(),
        Stage::Grounded => p.grounded.to_string(),
        Stage::Network => instance(src, ds, &a.targets, None, a.folded)?.network.dump(),
    })
}

fn cmd_gen(a: GenArgs) -> Result<ExitCode> {
    let scheme = match a.scheme {
        SchemeArg::Positive => Correlation::Positive { l: a.l, pool: a.pool },
        SchemeArg::Mutex => Correlation::Mutex { m: a.m },
        SchemeArg::Markov => Correlation::Markov,
    };
    let cfg = GenConfig {
        n: a.n,
        scheme,
        group: a.group,
        certain: a.certain,
        prob_range: (a.prob_lo, a.prob_hi),
        seed: a.seed,
        k: a.k,
        iter: a.iter,
    };
    let ds = gen_correlations(&cfg)?;
    let text = ds.to_json();
    match a.out {
        Some(p) => fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

/// Compares every scheme against enumeration; returns the number of violations.
fn check_network(net: &eventnet::network::EventNetwork, truth: &[f64], epsilons: &[f64], label: &str) -> Result<usize> {
    let mut bad = 0;
    let ex = compile(net, CompileConfig::exact())?;
    for (t, p) in ex.targets.iter().zip(truth) {
        if (t.lower - p).abs() > 1e-9 || (t.upper - p).abs() > 1e-9 {
            println!("{label}: exact {} = [{}, {}], enumeration {p}", t.eid, t.lower, t.upper);
            bad += 1;
        }
    }
    for scheme in [Scheme::Eager, Scheme::Lazy, Scheme::Hybrid] {
        for &eps in epsilons {
            let r = compile(net, CompileConfig::new(scheme, eps))?;
            for (t, p) in r.targets.iter().zip(truth) {
                if !(t.lower <= p + 1e-9 && *p <= t.upper + 1e-9 && t.upper - t.lower <= 2.0 * eps + 1e-9) {
                    println!("{label}: {scheme:?} eps={eps} {} = [{}, {}], enumeration {p}", t.eid, t.lower, t.upper);
                    bad += 1;
                }
            }
        }
    }
    Ok(bad)
}

fn cmd_check(a: CheckArgs) -> Result<ExitCode> {
    let mut bad = 0;
    let mut cases = 0;
    if let Some(path) = &a.program {
        let data = a.data.as_ref().context("--data is required with a program")?;
        let inst = instance(&read(path)?, &load_dataset(data)?, &a.targets, None, a.folded)?;
        let g = &inst.prepared.grounded;
        let truth = oracle_probabilities(g, &g.targets, DEFAULT_CAP)?.probs;
        bad += check_network(&inst.network, &truth, &a.epsilons, &path.display().to_string())?;
        cases += 1;
    } else {
        for seed in a.seed..a.seed + a.count {
            let (src, vars) = random_event_program(seed, a.vars, a.decls);
            let mut g = ground(&parse_event_program(&src)?, &VarTable::from_pairs(vars).map_err(anyhow::Error::msg)?)?;
            g.select_targets(&["*".to_string()])?;
            let net = build_unfolded(&g)?;
            let truth = oracle_probabilities(&g, &g.targets, DEFAULT_CAP)?.probs;
            bad += check_network(&net, &truth, &a.epsilons, &format!("seed {seed}"))?;
            cases += 1;
        }
    }
    println!("{cases} instances, {bad} violations");
    Ok(if bad == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_bench(a: BenchArgs) -> Result<ExitCode> {
    let src = match &a.program {
        Some(p) => read(p)?,
        None => KMEDOIDS.to_string(),
    };
    let run = |ds: &Dataset, cfg: CompileConfig| -> Result<(usize, usize, CompileResult)> {
        let inst = instance(&src, ds, &[], None, false)?;
        let slots: usize = (0..inst.network.len() as u32).map(|n| inst.network.slots_of(n) as usize).sum();
        Ok((inst.prepared.grounded.vars.len(), slots, compile(&inst.network, cfg)?))
    };
    match a.sweep {
        Sweep::Vars => {
            println!("{:>4} {:>10} {:>10} {:>12} {:>12} {:>10}", "m", "naive", "exact", "propagations", "work_units", "hybrid");
            for &m in &a.vars {
                let cfg = GenConfig { group: 4, iter: 1, seed: a.seed, ..GenConfig::new(20, Correlation::Positive { l: 4, pool: Some(m) }) };
                let ds = gen_correlations(&cfg)?;
                let (vars, slots, ex) = run(&ds, CompileConfig::exact())?;
                let (_, _, hy) = run(&ds, CompileConfig::new(Scheme::Hybrid, a.epsilon))?;
                let units = ex.stats.propagations.div_ceil(slots as u64);
                println!("{vars:>4} {:>10} {:>10} {:>12} {units:>12} {:>10}", 1u64 << vars, ex.stats.branches, ex.stats.propagations, hy.stats.branches);
            }
        }
        Sweep::Certain => {
            println!("{:>8} {:>4} {:>10} {:>10}", "certain", "m", "exact", "hybrid");
            for c in [0.0, 0.25, 0.5, 0.75] {
                let cfg = GenConfig { group: 4, certain: c, seed: a.seed, ..GenConfig::new(20, Correlation::Positive { l: 2, pool: None }) };
                let ds = gen_correlations(&cfg)?;
                let (vars, _, ex) = run(&ds, CompileConfig::exact())?;
                let (_, _, hy) = run(&ds, CompileConfig::new(Scheme::Hybrid, a.epsilon))?;
                println!("{c:>8} {vars:>4} {:>10} {:>10}", ex.stats.branches, hy.stats.branches);
            }
        }
        Sweep::Epsilon => {
            println!("{:>8} {:>8} {:>8} {:>8} {:>8}", "scheme", "0", "0.01", "0.1", "0.3");
            let cfg = GenConfig { group: 4, seed: a.seed, ..GenConfig::new(20, Correlation::Markov) };
            let ds = gen_correlations(&cfg)?;
            let (_, _, ex) = run(&ds, CompileConfig::exact())?;
            for scheme in [Scheme::Eager, Scheme::Lazy, Scheme::Hybrid] {
                let mut row = format!("{:>8} {:>8}", format!("{scheme:?}").to_lowercase(), ex.stats.branches);
                for eps in [0.01, 0.1, 0.3] {
                    row += &format!(" {:>8}", run(&ds, CompileConfig::new(scheme, eps))?.2.stats.branches);
                }
                println!("{row}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
