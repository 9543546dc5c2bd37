//! Parallel compilation: the decision tree is cut into jobs at depths that are multiples of `d`.
//!
//! A job is identified by its branch prefix. Workers replay the prefix on a private mask state,
//! explore the subtree with the hybrid discipline and commit bound deltas once per job id.

use std::collections::{HashSet, VecDeque};
use std::sync::{Condvar, Mutex};

use serde::Serialize;

use crate::compile::{finish, init_state, CompileConfig, CompileResult, Scheme, Stats};
use crate::error::CompileError;
use crate::mask::MaskState;
use crate::network::EventNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DistConfig {
    pub workers: usize,
    pub job_depth: usize,
}

/// Upper bound on the number of jobs for `m` variables and job depth `d`.
pub fn max_job_count(m: usize, d: usize) -> u128 {
    assert!(m >= 1 && d >= 1);
    (0..m.div_ceil(d)).map(|i| 1u128.checked_shl((i * d) as u32).unwrap_or(u128::MAX)).fold(0u128, |a, b| a.saturating_add(b))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Commit {
    pub job: String,
    pub prefix: Vec<(usize, bool)>,
    /// (lower delta, upper delta) per target
    pub deltas: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct DistResult {
    pub result: CompileResult,
    /// distinct jobs created, the root job included
    pub jobs: usize,
    pub log: Vec<Commit>,
}

#[derive(Clone, Debug)]
struct Job {
    prefix: Vec<(usize, bool)>,
    p: f64,
    budget: Vec<f64>,
    attempt: u32,
}

fn job_id(prefix: &[(usize, bool)]) -> String {
    let bits: String = prefix.iter().map(|&(_, b)| if b { '1' } else { '0' }).collect();
    format!("r{bits}")
}

struct Queue {
    jobs: VecDeque<Job>,
    active: usize,
    /// every job id ever enqueued
    registry: HashSet<String>,
}

struct Ledger {
    lower: Vec<f64>,
    upper: Vec<f64>,
    committed: HashSet<String>,
    log: Vec<Commit>,
    /// budgets returned by jobs; not redistributed
    pool: Vec<f64>,
    stats: Stats,
}

struct Shared<'a> {
    net: &'a EventNetwork,
    eps2: f64,
    cfg: DistConfig,
    queue: Mutex<Queue>,
    cv: Condvar,
    ledger: Mutex<Ledger>,
    fail: Option<&'a (dyn Fn(&str, u32) -> bool + Sync)>,
}

struct Worker<'s, 'a> {
    sh: &'s Shared<'a>,
    ms: MaskState<'a>,
    base_lower: Vec<f64>,
    base_upper: Vec<f64>,
    dl: Vec<f64>,
    du: Vec<f64>,
    stats: Stats,
    since_refresh: u32,
}

impl Worker<'_, '_> {
    fn refresh(&mut self) {
        let l = self.sh.ledger.lock().unwrap();
        self.base_lower.clone_from(&l.lower);
        self.base_upper.clone_from(&l.upper);
        self.since_refresh = 0;
    }

    fn wide(&self, tol: f64) -> bool {
        (0..self.dl.len()).any(|i| (self.base_upper[i] + self.du[i]) - (self.base_lower[i] + self.dl[i]) > tol)
    }

    fn credit(&mut self, decided: &[(usize, bool)], p: f64) {
        for &(i, b) in decided {
            if b {
                self.dl[i] += p;
            } else {
                self.du[i] -= p;
            }
        }
    }

    fn try_fork(&self, job: Job) -> Option<Job> {
        let mut q = self.sh.queue.lock().unwrap();
        let id = job_id(&job.prefix);
        if q.registry.contains(&id) {
            // an earlier attempt already handed this subtree out
            return None;
        }
        let idle = self.sh.cfg.workers - q.active;
        if idle > q.jobs.len() {
            q.registry.insert(id);
            q.jobs.push_back(job);
            self.sh.cv.notify_one();
            None
        } else {
            Some(job)
        }
    }

    fn dfs(&mut self, p: f64, mut e: Vec<f64>, prefix: &mut Vec<(usize, bool)>, root_depth: usize) -> Vec<f64> {
        let depth = prefix.len();
        let m = self.sh.net.vars.len();
        let d = self.sh.cfg.job_depth;
        if depth > root_depth && depth % d == 0 && depth < m {
            let job = Job { prefix: prefix.clone(), p, budget: e, attempt: 0 };
            match self.try_fork(job) {
                None => return vec![0.0; self.dl.len()],
                Some(job) => e = job.budget,
            }
        }
        let und: Vec<usize> = (0..self.dl.len()).filter(|&i| self.ms.target_value(i).is_none()).collect();
        if !und.is_empty() && und.iter().all(|&t| e[t] >= p) {
            for &t in &und {
                e[t] -= p;
            }
            self.stats.pruned += 1;
            return e;
        }
        self.stats.branches += 1;
        self.since_refresh += 1;
        if self.since_refresh >= 64 {
            self.refresh();
        }
        let done = und.is_empty() || !self.wide(self.sh.eps2);
        let Some(x) = self.ms.next_variable().filter(|_| !done) else {
            self.stats.leaves += 1;
            return e;
        };
        let px = self.sh.net.vars.p(x);
        let (pt, pf) = (p * px, p * (1.0 - px));
        let half: Vec<f64> = e.iter().map(|v| v / 2.0).collect();
        let mark = self.ms.mark();
        let dec = self.ms.assign(x, true);
        self.credit(&dec, pt);
        prefix.push((x, true));
        let rl = self.dfs(pt, half.clone(), prefix, root_depth);
        prefix.pop();
        self.ms.undo(mark);
        let mut right: Vec<f64> = half.iter().zip(&rl).map(|(a, b)| a + b).collect();
        if self.wide(self.sh.eps2) {
            let dec = self.ms.assign(x, false);
            self.credit(&dec, pf);
            prefix.push((x, false));
            right = self.dfs(pf, right, prefix, root_depth);
            prefix.pop();
            self.ms.undo(mark);
        }
        right
    }

    fn run_job(&mut self, job: Job) {
        let k = self.dl.len();
        self.dl = vec![0.0; k];
        self.du = vec![0.0; k];
        self.stats = Stats::default();
        self.refresh();
        let mark = self.ms.mark();
        let before = self.ms.propagations;
        // replay without crediting: the parent job already credited these decisions
        for &(x, b) in &job.prefix {
            self.ms.assign(x, b);
        }
        let mut prefix = job.prefix.clone();
        let residual = self.dfs(job.p, job.budget.clone(), &mut prefix, job.prefix.len());
        self.ms.undo(mark);
        self.stats.propagations = self.ms.propagations - before;
        let id = job_id(&job.prefix);
        if self.sh.fail.is_some_and(|f| f(&id, job.attempt)) {
            let mut q = self.sh.queue.lock().unwrap();
            q.jobs.push_back(Job { attempt: job.attempt + 1, ..job });
            self.sh.cv.notify_one();
            return;
        }
        let mut l = self.sh.ledger.lock().unwrap();
        if !l.committed.insert(id.clone()) {
            return;
        }
        for i in 0..k {
            l.lower[i] += self.dl[i];
            l.upper[i] += self.du[i];
            l.pool[i] += residual[i];
        }
        l.stats += self.stats;
        let deltas = self.dl.iter().zip(&self.du).map(|(&a, &b)| (a, b)).collect();
        l.log.push(Commit { job: id, prefix: job.prefix, deltas });
    }
}

fn worker_loop<'a>(sh: &Shared<'a>) {
    let k = sh.net.targets.len();
    let mut ms = MaskState::new(sh.net);
    for v in 0..sh.net.vars.len() {
        let p = sh.net.vars.p(v);
        if p == 0.0 || p == 1.0 {
            ms.assign(v, p == 1.0);
        }
    }
    let mut w = Worker {
        sh,
        ms,
        base_lower: vec![0.0; k],
        base_upper: vec![1.0; k],
        dl: vec![0.0; k],
        du: vec![0.0; k],
        stats: Stats::default(),
        since_refresh: 0,
    };
    loop {
        let job = {
            let mut q = sh.queue.lock().unwrap();
            loop {
                if let Some(j) = q.jobs.pop_front() {
                    q.active += 1;
                    break Some(j);
                }
                if q.active == 0 {
                    sh.cv.notify_all();
                    break None;
                }
                q = sh.cv.wait(q).unwrap();
            }
        };
        let Some(job) = job else { return };
        w.run_job(job);
        let mut q = sh.queue.lock().unwrap();
        q.active -= 1;
        sh.cv.notify_all();
    }
}

pub fn run_distributed(net: &EventNetwork, cfg: CompileConfig, dcfg: DistConfig) -> Result<DistResult, CompileError> {
    run_distributed_with_failures(net, cfg, dcfg, None)
}

/// `fail(job_id, attempt)` returning true makes that attempt fail before it commits.
pub fn run_distributed_with_failures(
    net: &EventNetwork,
    cfg: CompileConfig,
    dcfg: DistConfig,
    fail: Option<&(dyn Fn(&str, u32) -> bool + Sync)>,
) -> Result<DistResult, CompileError> {
    cfg.check()?;
    if !matches!(cfg.scheme, Scheme::Exact | Scheme::Hybrid) {
        return Err(CompileError::Config("distributed compilation supports exact and hybrid only".into()));
    }
    if dcfg.workers == 0 || dcfg.job_depth == 0 {
        return Err(CompileError::Config("workers and job depth must be at least 1".into()));
    }
    let k = net.targets.len();
    let (mut lower, mut upper) = (vec![0.0; k], vec![1.0; k]);
    let init = init_state(net, &mut lower, &mut upper)?;
    let init_props = init.propagations;
    drop(init);
    let eps2 = 2.0 * cfg.epsilon;
    let root = Job { prefix: vec![], p: 1.0, budget: vec![eps2; k], attempt: 0 };
    let sh = Shared {
        net,
        eps2,
        cfg: dcfg,
        queue: Mutex::new(Queue { jobs: VecDeque::from([root]), active: 0, registry: HashSet::from([job_id(&[])]) }),
        cv: Condvar::new(),
        ledger: Mutex::new(Ledger { lower, upper, committed: HashSet::new(), log: vec![], pool: vec![0.0; k], stats: Stats::default() }),
        fail,
    };
    std::thread::scope(|s| {
        for _ in 0..dcfg.workers {
            s.spawn(|| worker_loop(&sh));
        }
    });
    let jobs = sh.queue.into_inner().unwrap().registry.len();
    let l = sh.ledger.into_inner().unwrap();
    let mut stats = l.stats;
    stats.propagations += init_props;
    Ok(DistResult { result: finish(net, &l.lower, &l.upper, stats), jobs, log: l.log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compile::compile;
    use crate::eprog::parse_event_program;
    use crate::expr::VarTable;
    use crate::ground::ground;
    use crate::network::build_unfolded;

    #[test]
    fn job_bound_formula() {
        assert_eq!(max_job_count(4, 2), 5);
        assert_eq!(max_job_count(9, 3), 73);
        assert_eq!(max_job_count(3, 5), 1);
    }

    fn sample() -> EventNetwork {
        let src = "A := (x0 & x1) | (x2 & !x3) | (x4 & x5 & x0)\nB := x1 | x3 | x5\nC := x6 & (x7 | x2)\n";
        let ps = [0.3, 0.6, 0.7, 0.2, 0.5, 0.9, 0.4, 0.55];
        let vt = VarTable::from_pairs(ps.iter().enumerate().map(|(i, &p)| (format!("x{i}"), p))).unwrap();
        let mut g = ground(&parse_event_program(src).unwrap(), &vt).unwrap();
        g.select_targets(&["*".to_string()]).unwrap();
        build_unfolded(&g).unwrap()
    }

    #[test]
    fn single_worker_matches_sequential() {
        let net = sample();
        for cfg in [CompileConfig::exact(), CompileConfig::new(Scheme::Hybrid, 0.05)] {
            let seq = compile(&net, cfg).unwrap();
            let d = run_distributed(&net, cfg, DistConfig { workers: 1, job_depth: 2 }).unwrap();
            assert_eq!(d.result.stats, seq.stats);
            for (a, b) in d.result.targets.iter().zip(&seq.targets) {
                assert!((a.lower - b.lower).abs() < 1e-12 && (a.upper - b.upper).abs() < 1e-12);
            }
            assert_eq!(d.jobs, 1);
        }
    }

    #[test]
    fn many_workers_exact() {
        let net = sample();
        let seq = compile(&net, CompileConfig::exact()).unwrap();
        for workers in [2, 4, 8] {
            let d = run_distributed(&net, CompileConfig::exact(), DistConfig { workers, job_depth: 1 }).unwrap();
            for (a, b) in d.result.targets.iter().zip(&seq.targets) {
                assert!((a.lower - b.lower).abs() < 1e-9 && (a.upper - b.upper).abs() < 1e-9);
            }
            assert!(d.jobs as u128 <= max_job_count(8, 1));
        }
    }

    #[test]
    fn failed_jobs_are_retried() {
        let net = sample();
        let seq = compile(&net, CompileConfig::exact()).unwrap();
        let fail = |id: &str, attempt: u32| attempt == 0 && id.len() % 2 == 0;
        let d = run_distributed_with_failures(&net, CompileConfig::exact(), DistConfig { workers: 4, job_depth: 1 }, Some(&fail)).unwrap();
        for (a, b) in d.result.targets.iter().zip(&seq.targets) {
            assert!((a.lower - b.lower).abs() < 1e-9 && (a.upper - b.upper).abs() < 1e-9);
        }
    }
}
