//! Synthetic probabilistic datasets with correlated lineage, and random event programs.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataset::{Dataset, Params, PointSpec, VarSpec};
use crate::error::DatasetError;
use crate::translate::PHI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Correlation {
    /// each group's event is a disjunction of `l` distinct variables from a shared pool
    Positive { l: usize, pool: Option<usize> },
    /// groups form sets of up to `m` pairwise exclusive events
    Mutex { m: usize },
    /// each group's event depends on the previous group's event
    Markov,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n: usize,
    pub scheme: Correlation,
    pub group: usize,
    pub certain: f64,
    pub prob_range: (f64, f64),
    pub seed: u64,
    pub k: usize,
    pub iter: usize,
}

impl GenConfig {
    pub fn new(n: usize, scheme: Correlation) -> Self {
        GenConfig { n, scheme, group: 1, certain: 0.0, prob_range: (0.5, 0.8), seed: 0, k: 2, iter: 3 }
    }

    fn check(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::Invalid(m.into()));
        if self.n == 0 || self.group == 0 {
            return bad("point count and group size must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.certain) {
            return bad("certain fraction outside [0, 1]");
        }
        let (a, b) = self.prob_range;
        if !(0.0 < a && a <= b && b < 1.0) {
            return bad("probability range must lie inside (0, 1)");
        }
        match self.scheme {
            Correlation::Positive { l: 0, .. } | Correlation::Mutex { m: 0 } => bad("l and m must be at least 1"),
            Correlation::Positive { l, pool: Some(p) } if p < l => bad("pool smaller than l"),
            _ if self.k == 0 || self.k > self.n => bad("k must lie in 1..=n"),
            _ => Ok(()),
        }
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Dataset with one lineage event per group of consecutive points.
pub fn gen_correlations(cfg: &GenConfig) -> Result<Dataset, DatasetError> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let groups = cfg.n.div_ceil(cfg.group);
    let mut vars: Vec<String> = Vec::new();
    let mut events: Vec<String> = Vec::with_capacity(groups);
    match cfg.scheme {
        Correlation::Positive { l, pool } => {
            let pool = pool.unwrap_or(cfg.n / cfg.group).max(l);
            vars = (0..pool).map(|i| format!("x{i}")).collect();
            // literals are dealt from reshuffled decks so the whole pool gets used
            let mut deck: Vec<usize> = Vec::new();
            for _ in 0..groups {
                let mut pick: Vec<usize> = Vec::with_capacity(l);
                while pick.len() < l {
                    if deck.is_empty() {
                        deck = (0..pool).collect();
                        deck.shuffle(&mut rng);
                    }
                    let v = deck.pop().unwrap();
                    if !pick.contains(&v) {
                        pick.push(v);
                    }
                }
                pick.sort_unstable();
                events.push(pick.iter().map(|&i| vars[i].clone()).collect::<Vec<_>>().join(" | "));
            }
        }
        Correlation::Mutex { m } => {
            for g in 0..groups {
                let (set, j) = (g / m, g % m);
                let v = |i: usize| format!("s{set}_{i}");
                vars.push(v(j));
                let mut lits: Vec<String> = (0..j).map(|i| format!("!{}", v(i))).collect();
                lits.push(v(j));
                events.push(lits.join(" & "));
            }
        }
        Correlation::Markov => {
            for g in 0..groups {
                let (t, f) = (format!("t{g}"), format!("f{g}"));
                if g == 0 {
                    events.push(t.clone());
                    vars.push(t);
                } else {
                    let prev = format!("{PHI}^{{{}}}", (g - 1) * cfg.group);
                    events.push(format!("({prev} & {t}) | (!{prev} & {f})"));
                    vars.push(t);
                    vars.push(f);
                }
            }
        }
    }
    let certain = (cfg.certain * cfg.n as f64).floor() as usize;
    let centres: Vec<[f64; 2]> = (0..cfg.k).map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)]).collect();
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut points = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let c = centres[i % cfg.k];
        let coords = vec![round3(c[0] + noise.sample(&mut rng)), round3(c[1] + noise.sample(&mut rng))];
        let event = if i < certain { "true".to_string() } else { events[i / cfg.group].clone() };
        points.push(PointSpec { id: format!("o{i}"), coords, event });
    }
    // variables no remaining event mentions are dropped
    let used: BTreeSet<&str> = points.iter().flat_map(|p| p.event.split(|c: char| !(c.is_alphanumeric() || c == '_'))).collect();
    let (a, b) = cfg.prob_range;
    let vars: Vec<VarSpec> = vars
        .iter()
        .map(|id| (id, round3(rng.random_range(a..=b))))
        .filter(|(id, _)| used.contains(id.as_str()))
        .map(|(id, p)| VarSpec { id: id.clone(), p })
        .collect();
    let medoids = (0..cfg.k).map(|i| i * (cfg.n / cfg.k)).collect();
    let mut values = std::collections::BTreeMap::new();
    values.insert("k".to_string(), cfg.k as f64);
    values.insert("iter".to_string(), cfg.iter as f64);
    let meta = json!({
        "scheme": cfg.scheme,
        "group": cfg.group,
        "seed": cfg.seed,
        "certain": cfg.certain,
        "prob_range": [a, b],
    });
    let ds = Dataset { vars, points, params: Params { medoids, values }, matrix: None, meta };
    // re-validate through the parser
    Dataset::from_json(&ds.to_json())
}

/// Random event program over `m` variables mixing events, guarded sums and comparisons.
/// Returns the program text and `(name, probability)` pairs.
pub fn random_event_program(seed: u64, m: usize, decls: usize) -> (String, Vec<(String, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars: Vec<(String, f64)> = (0..m).map(|i| (format!("x{i}"), round3(rng.random_range(0.1..0.9)))).collect();
    let mut src = String::new();
    let mut events: Vec<String> = Vec::new();
    let mut sums: Vec<String> = Vec::new();

    fn formula(rng: &mut ChaCha8Rng, m: usize, events: &[String], depth: u32) -> String {
        let leaf = depth == 0 || rng.random_bool(0.3);
        if leaf {
            let s = if !events.is_empty() && rng.random_bool(0.3) {
                events[rng.random_range(0..events.len())].clone()
            } else {
                format!("x{}", rng.random_range(0..m))
            };
            return if rng.random_bool(0.25) { format!("!{s}") } else { s };
        }
        let k = rng.random_range(2..=3);
        let op = if rng.random_bool(0.5) { " & " } else { " | " };
        let parts: Vec<String> = (0..k).map(|_| formula(rng, m, events, depth - 1)).collect();
        let f = format!("({})", parts.join(op));
        if rng.random_bool(0.15) {
            format!("!{f}")
        } else {
            f
        }
    }

    for d in 0..decls {
        let roll = rng.random_range(0..10);
        if roll < 5 {
            let name = format!("E{d}");
            let f = formula(&mut rng, m, &events, 3);
            let _ = writeln!(src, "{name} := {f}");
            events.push(name);
        } else if roll < 8 || sums.is_empty() {
            let name = format!("S{d}");
            let k = rng.random_range(2..=4);
            let terms: Vec<String> = (0..k)
                .map(|_| {
                    let g = formula(&mut rng, m, &events, 1);
                    let c: i32 = rng.random_range(-3..=5);
                    format!("{g} @ {c}.0")
                })
                .collect();
            let _ = writeln!(src, "{name} := {}", terms.join(" + "));
            sums.push(name);
        } else {
            let name = format!("C{d}");
            let op = ["<=", "<", ">=", ">", "="][rng.random_range(0..5)];
            let a = &sums[rng.random_range(0..sums.len())];
            let b = if sums.len() > 1 && rng.random_bool(0.4) {
                sums[rng.random_range(0..sums.len())].clone()
            } else {
                format!("{}.0", rng.random_range(-2..=6))
            };
            let _ = writeln!(src, "{name} := [{a} {op} {b}]");
            events.push(name);
        }
    }
    (src, vars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eprog::parse_event_program;
    use crate::expr::VarTable;
    use crate::ground::ground;

    #[test]
    fn deterministic_under_seed() {
        let cfg = GenConfig { group: 4, ..GenConfig::new(20, Correlation::Positive { l: 2, pool: None }) };
        assert_eq!(gen_correlations(&cfg).unwrap(), gen_correlations(&cfg).unwrap());
        let other = GenConfig { seed: 1, ..cfg.clone() };
        assert_ne!(gen_correlations(&cfg).unwrap(), gen_correlations(&other).unwrap());
    }

    #[test]
    fn groups_share_lineage() {
        let cfg = GenConfig { group: 4, ..GenConfig::new(20, Correlation::Positive { l: 2, pool: None }) };
        let ds = gen_correlations(&cfg).unwrap();
        for g in ds.points.chunks(4) {
            assert!(g.iter().all(|p| p.event == g[0].event));
        }
        assert!(ds.vars.len() <= 5);
    }

    #[test]
    fn certain_points() {
        let cfg = GenConfig { certain: 1.0, ..GenConfig::new(6, Correlation::Markov) };
        let ds = gen_correlations(&cfg).unwrap();
        assert!(ds.points.iter().all(|p| p.event == "true"));
        assert!(ds.vars.is_empty());
    }

    #[test]
    fn invalid_configs() {
        assert!(gen_correlations(&GenConfig { certain: 1.5, ..GenConfig::new(4, Correlation::Markov) }).is_err());
        assert!(gen_correlations(&GenConfig { prob_range: (0.0, 0.5), ..GenConfig::new(4, Correlation::Markov) }).is_err());
        assert!(gen_correlations(&GenConfig::new(4, Correlation::Mutex { m: 0 })).is_err());
    }

    #[test]
    fn random_programs_ground() {
        for seed in 0..30 {
            let (src, vars) = random_event_program(seed, 8, 12);
            let vt = VarTable::from_pairs(vars).unwrap();
            let ep = parse_event_program(&src).unwrap_or_else(|e| panic!("{e}\n{src}"));
            ground(&ep, &vt).unwrap_or_else(|e| panic!("{e}\n{src}"));
        }
    }
}
