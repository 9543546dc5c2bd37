//! Depth-first compilation of a network into probability bounds for its targets.

use serde::{Deserialize, Serialize};

use crate::error::CompileError;
use crate::mask::MaskState;
use crate::network::EventNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Exact,
    Eager,
    Lazy,
    Hybrid,
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Scheme::Exact),
            "eager" => Ok(Scheme::Eager),
            "lazy" => Ok(Scheme::Lazy),
            "hybrid" => Ok(Scheme::Hybrid),
            _ => Err(format!("unknown scheme `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompileConfig {
    pub scheme: Scheme,
    pub epsilon: f64,
}

impl CompileConfig {
    pub fn exact() -> Self {
        CompileConfig { scheme: Scheme::Exact, epsilon: 0.0 }
    }

    pub fn new(scheme: Scheme, epsilon: f64) -> Self {
        CompileConfig { scheme, epsilon }
    }

    pub fn check(&self) -> Result<(), CompileError> {
        if !(self.epsilon >= 0.0 && self.epsilon <= 1.0) {
            return Err(CompileError::Config(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if self.scheme == Scheme::Exact && self.epsilon != 0.0 {
            return Err(CompileError::Config("exact compilation takes epsilon = 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    /// search nodes visited, leaves included, pruned ones not
    pub branches: u64,
    /// visited nodes where the search stopped without splitting
    pub leaves: u64,
    /// subtrees cut off by the error budget
    pub pruned: u64,
    /// slot recomputations during mask propagation
    pub propagations: u64,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, o: Stats) {
        self.branches += o.branches;
        self.leaves += o.leaves;
        self.pruned += o.pruned;
        self.propagations += o.propagations;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetBound {
    pub eid: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompileResult {
    pub targets: Vec<TargetBound>,
    pub stats: Stats,
}

/// Observer of intermediate bounds, called after every credit.
pub type Observer<'a> = &'a mut dyn FnMut(&[f64], &[f64]);

/// Pre-assigns degenerate variables and credits targets decided before any branching.
pub(crate) fn init_state<'n>(net: &'n EventNetwork, lower: &mut [f64], upper: &mut [f64]) -> Result<MaskState<'n>, CompileError> {
    if net.targets.is_empty() {
        return Err(CompileError::Config("no targets".into()));
    }
    let mut ms = MaskState::new(net);
    for v in 0..net.vars.len() {
        let p = net.vars.p(v);
        if p == 0.0 || p == 1.0 {
            ms.assign(v, p == 1.0);
        }
    }
    for i in 0..net.targets.len() {
        match ms.target_value(i) {
            Some(true) => lower[i] += 1.0,
            Some(false) => upper[i] -= 1.0,
            None if !ms.target_has_vars(i) => {
                return Err(CompileError::Config(format!("target `{}` is unreachable from any variable", net.targets[i].eid)))
            }
            None => {}
        }
    }
    Ok(ms)
}

pub(crate) fn finish(net: &EventNetwork, lower: &[f64], upper: &[f64], stats: Stats) -> CompileResult {
    let targets = net
        .targets
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (mut l, mut u) = (lower[i].clamp(0.0, 1.0), upper[i].clamp(0.0, 1.0));
            if l > u {
                let m = (l + u) / 2.0;
                l = m;
                u = m;
            }
            TargetBound { eid: t.eid.clone(), lower: l, upper: u }
        })
        .collect();
    CompileResult { targets, stats }
}

struct Search<'n, 'o> {
    ms: MaskState<'n>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    eps2: f64,
    stats: Stats,
    observer: Option<Observer<'o>>,
    /// single budget of the eager scheme
    global: Vec<f64>,
}

impl Search<'_, '_> {
    fn credit(&mut self, decided: &[(usize, bool)], p: f64) {
        for &(i, b) in decided {
            if b {
                self.lower[i] += p;
            } else {
                self.upper[i] -= p;
            }
        }
        if !decided.is_empty() {
            if let Some(obs) = self.observer.as_mut() {
                obs(&self.lower, &self.upper);
            }
        }
    }

    fn undecided(&self) -> Vec<usize> {
        (0..self.lower.len()).filter(|&i| self.ms.target_value(i).is_none()).collect()
    }

    fn wide(&self, tol: f64) -> bool {
        (0..self.lower.len()).any(|i| self.upper[i] - self.lower[i] > tol)
    }

    /// Nothing left to learn below this node.
    fn done(&self, und: &[usize], tol: f64) -> bool {
        und.is_empty() || !self.wide(tol)
    }

    fn branch(&mut self, x: usize, b: bool, p: f64) -> usize {
        let mark = self.ms.mark();
        let d = self.ms.assign(x, b);
        self.credit(&d, p);
        mark
    }

    fn probs(&self, x: usize, p: f64) -> (f64, f64) {
        let px = self.ms.network().vars.p(x);
        (p * px, p * (1.0 - px))
    }

    fn hybrid(&mut self, p: f64, mut e: Vec<f64>) -> Vec<f64> {
        let und = self.undecided();
        if !und.is_empty() && und.iter().all(|&t| e[t] >= p) {
            for &t in &und {
                e[t] -= p;
            }
            self.stats.pruned += 1;
            return e;
        }
        self.stats.branches += 1;
        let Some(x) = self.ms.next_variable().filter(|_| !self.done(&und, self.eps2)) else {
            self.stats.leaves += 1;
            return e;
        };
        let (pt, pf) = self.probs(x, p);
        let half: Vec<f64> = e.iter().map(|v| v / 2.0).collect();
        let mark = self.branch(x, true, pt);
        let rl = self.hybrid(pt, half.clone());
        self.ms.undo(mark);
        let mut right: Vec<f64> = half.iter().zip(&rl).map(|(a, b)| a + b).collect();
        if self.wide(self.eps2) {
            let mark = self.branch(x, false, pf);
            right = self.hybrid(pf, right);
            self.ms.undo(mark);
        }
        right
    }

    fn eager(&mut self, p: f64) {
        let und = self.undecided();
        if !und.is_empty() && und.iter().all(|&t| self.global[t] >= p) {
            for &t in &und {
                self.global[t] -= p;
            }
            self.stats.pruned += 1;
            return;
        }
        self.stats.branches += 1;
        let Some(x) = self.ms.next_variable().filter(|_| !self.done(&und, 0.0)) else {
            self.stats.leaves += 1;
            return;
        };
        let (pt, pf) = self.probs(x, p);
        let mark = self.branch(x, true, pt);
        self.eager(pt);
        self.ms.undo(mark);
        if self.wide(0.0) {
            let mark = self.branch(x, false, pf);
            self.eager(pf);
            self.ms.undo(mark);
        }
    }

    fn lazy(&mut self, p: f64) {
        let und = self.undecided();
        self.stats.branches += 1;
        let Some(x) = self.ms.next_variable().filter(|_| !self.done(&und, self.eps2)) else {
            self.stats.leaves += 1;
            return;
        };
        let (pt, pf) = self.probs(x, p);
        let mark = self.branch(x, true, pt);
        self.lazy(pt);
        self.ms.undo(mark);
        if self.wide(self.eps2) {
            let mark = self.branch(x, false, pf);
            self.lazy(pf);
            self.ms.undo(mark);
        }
    }
}

pub fn compile(net: &EventNetwork, cfg: CompileConfig) -> Result<CompileResult, CompileError> {
    compile_observed(net, cfg, None)
}

/// Like [`compile`], reporting bounds after every improvement.
pub fn compile_observed(net: &EventNetwork, cfg: CompileConfig, observer: Option<Observer<'_>>) -> Result<CompileResult, CompileError> {
    cfg.check()?;
    let k = net.targets.len();
    let (mut lower, mut upper) = (vec![0.0; k], vec![1.0; k]);
    let ms = init_state(net, &mut lower, &mut upper)?;
    let eps2 = 2.0 * cfg.epsilon;
    let mut s = Search { ms, lower, upper, eps2, stats: Stats::default(), observer, global: vec![eps2; k] };
    if let Some(obs) = s.observer.as_mut() {
        obs(&s.lower, &s.upper);
    }
    match cfg.scheme {
        Scheme::Exact | Scheme::Hybrid => {
            s.hybrid(1.0, vec![eps2; k]);
        }
        Scheme::Eager => s.eager(1.0),
        Scheme::Lazy => s.lazy(1.0),
    }
    s.stats.propagations = s.ms.propagations;
    Ok(finish(net, &s.lower, &s.upper, s.stats))
}
