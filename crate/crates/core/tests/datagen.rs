use proptest::prelude::*;

use eventnet::datagen::{gen_correlations, Correlation, GenConfig};
use eventnet::dataset::Dataset;
use eventnet::ground::{ground, GroundedProgram};
use eventnet::oracle::{oracle_probabilities, world_reports, DEFAULT_CAP};
use eventnet::parse_event_program;

/// One declaration per point event, plus extra declarations.
fn lineage(ds: &Dataset, extra: &str) -> GroundedProgram {
    let mut src: String = ds.points.iter().enumerate().map(|(i, p)| format!("Phi^{{{i}}} := {}\n", p.event)).collect();
    src.push_str(extra);
    ground(&parse_event_program(&src).unwrap(), &ds.var_table().unwrap()).unwrap()
}

fn prob(g: &GroundedProgram, name: &str) -> f64 {
    let d = g.lookup(name).unwrap();
    oracle_probabilities(g, &[d], DEFAULT_CAP).unwrap().probs[0]
}

fn var_p(ds: &Dataset, id: &str) -> f64 {
    ds.vars.iter().find(|v| v.id == id).unwrap().p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mutex_sets_exclusive_and_independent(seed in 0u64..1000, m in 2usize..=3) {
        let ds = gen_correlations(&GenConfig { seed, ..GenConfig::new(2 * m, Correlation::Mutex { m }) }).unwrap();
        let (a, b, c) = (0, 1, m);
        let g = lineage(&ds, &format!("Both := Phi^{{{a}}} & Phi^{{{b}}}\nCross := Phi^{{{a}}} & Phi^{{{c}}}\n"));
        prop_assert_eq!(prob(&g, "Both"), 0.0);
        let (pa, pc) = (prob(&g, &format!("Phi^{{{a}}}")), prob(&g, &format!("Phi^{{{c}}}")));
        prop_assert!((prob(&g, "Cross") - pa * pc).abs() < 1e-12);
    }

    #[test]
    fn markov_conditionals(seed in 0u64..1000, n in 2usize..=4) {
        let ds = gen_correlations(&GenConfig { seed, ..GenConfig::new(n, Correlation::Markov) }).unwrap();
        let last = n - 1;
        let prev = last - 1;
        let g = lineage(&ds, &format!("Hit := Phi^{{{prev}}} & Phi^{{{last}}}\nMiss := !Phi^{{{prev}}} & Phi^{{{last}}}\n"));
        let pp = prob(&g, &format!("Phi^{{{prev}}}"));
        let (pt, pf) = (var_p(&ds, &format!("t{last}")), var_p(&ds, &format!("f{last}")));
        prop_assert!((prob(&g, "Hit") / pp - pt).abs() < 1e-9);
        prop_assert!((prob(&g, "Miss") / (1.0 - pp) - pf).abs() < 1e-9);
    }

    #[test]
    fn positive_events_share_variables(seed in 0u64..1000, l in 1usize..=3) {
        let cfg = GenConfig { seed, group: 2, ..GenConfig::new(8, Correlation::Positive { l, pool: Some(4) }) };
        let ds = gen_correlations(&cfg).unwrap();
        for p in &ds.points {
            prop_assert_eq!(p.event.split(" | ").count(), l);
        }
        let g = lineage(&ds, "");
        for w in world_reports(&g, DEFAULT_CAP).unwrap() {
            // points of one group are present together
            for pair in [0usize, 2, 4, 6] {
                prop_assert_eq!(w.objects.contains(&pair), w.objects.contains(&(pair + 1)));
            }
        }
    }

    #[test]
    fn certain_points_in_every_world(seed in 0u64..1000, certain in 0.0f64..=1.0) {
        let cfg = GenConfig { seed, certain, ..GenConfig::new(5, Correlation::Markov) };
        let ds = gen_correlations(&cfg).unwrap();
        let fixed = (certain * 5.0).floor() as usize;
        let g = lineage(&ds, "");
        for w in world_reports(&g, DEFAULT_CAP).unwrap() {
            prop_assert!((0..fixed).all(|i| w.objects.contains(&i)));
        }
        for v in &ds.vars {
            prop_assert!(ds.points.iter().any(|p| p.event.contains(v.id.as_str())));
            prop_assert!((0.5..=0.8).contains(&v.p));
        }
    }
}
