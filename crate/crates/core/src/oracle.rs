//! Exhaustive possible-world enumeration: ground truth and the naive baseline.

use rayon::prelude::*;

use crate::eid::{eid_string, split_eid};
use crate::error::OracleError;
use crate::expr::{world_probability, Evaluator, Valuation};
use crate::ground::GroundedProgram;
use crate::translate::PHI;
use crate::value::Value;

pub const DEFAULT_CAP: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// probability per requested target, in request order
    pub probs: Vec<f64>,
    /// number of worlds evaluated (2^m)
    pub evaluations: u64,
}

fn gray(k: u64) -> u64 {
    k ^ (k >> 1)
}

/// `P[E = true]` for each target by summing over all `2^m` worlds.
pub fn oracle_probabilities(g: &GroundedProgram, targets: &[usize], cap: usize) -> Result<OracleResult, OracleError> {
    let m = g.vars.len();
    if m > cap {
        return Err(OracleError::CapExceeded { vars: m, cap });
    }
    let total: u64 = 1 << m;
    let chunk = (total / 256).max(1);
    let nchunks = total.div_ceil(chunk);
    let partial: Vec<Result<Vec<f64>, OracleError>> = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; targets.len()];
            for k in c * chunk..((c + 1) * chunk).min(total) {
                let nu = Valuation::from_bits(m, gray(k));
                let p = world_probability(&nu, &g.vars)?;
                let mut ev = Evaluator::new(&g.decls, &nu);
                for (a, &t) in acc.iter_mut().zip(targets) {
                    if ev.eval_decl(t)?.as_bool().map_err(crate::error::EvalError::from)? {
                        *a += p;
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut probs = vec![0.0; targets.len()];
    for part in partial {
        for (p, x) in probs.iter_mut().zip(part?) {
            *p += x;
        }
    }
    Ok(OracleResult { probs, evaluations: total })
}

/// Everything observable in one world.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldReport {
    pub valuation: Valuation,
    pub probability: f64,
    pub values: Vec<Value>,
    /// objects present in the world
    pub objects: Vec<usize>,
    /// members per cluster, from the final `InCl` family
    pub clusters: Vec<Vec<usize>>,
    /// selected representative per cluster, from the final `Centre` family
    pub medoids: Vec<Option<usize>>,
}

fn family_grid(g: &GroundedProgram, values: &[Value], name: &str) -> Vec<Vec<bool>> {
    let Some(fam) = g.last_family(name) else { return vec![] };
    let (n, label, _) = split_eid(&fam).expect("family");
    let mut rows = Vec::new();
    for i in 0.. {
        let mut row = Vec::new();
        for l in 0.. {
            match g.lookup(&eid_string(&n, &label, &[i, l])) {
                Some(d) => row.push(matches!(values[d], Value::Bool(true))),
                None => break,
            }
        }
        if row.is_empty() {
            break;
        }
        rows.push(row);
    }
    rows
}

pub fn per_world_report(g: &GroundedProgram, nu: &Valuation) -> Result<WorldReport, OracleError> {
    let values = crate::expr::eval_all(&g.decls, nu)?;
    let probability = world_probability(nu, &g.vars)?;
    let objects: Vec<usize> = (0..)
        .map_while(|l| g.lookup(&eid_string(PHI, &[], &[l as i64])).map(|d| (l, d)))
        .filter(|&(_, d)| matches!(values[d], Value::Bool(true)))
        .map(|(l, _)| l)
        .collect();
    let members = |grid: Vec<Vec<bool>>| -> Vec<Vec<usize>> {
        grid.into_iter().map(|row| row.into_iter().enumerate().filter(|&(l, b)| b && objects.contains(&l)).map(|(l, _)| l).collect()).collect()
    };
    let clusters = members(family_grid(g, &values, "InCl"));
    let medoids = members(family_grid(g, &values, "Centre")).into_iter().map(|v| v.first().copied()).collect();
    Ok(WorldReport { valuation: nu.clone(), probability, values, objects, clusters, medoids })
}

/// Reports for all worlds in binary order (variable 0 is the lowest bit).
pub fn world_reports(g: &GroundedProgram, cap: usize) -> Result<Vec<WorldReport>, OracleError> {
    let m = g.vars.len();
    if m > cap {
        return Err(OracleError::CapExceeded { vars: m, cap });
    }
    (0..1u64 << m).into_par_iter().map(|k| per_world_report(g, &Valuation::from_bits(m, k))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eprog::parse_event_program;
    use crate::expr::VarTable;
    use crate::ground::ground;

    #[test]
    fn disjunction_probability() {
        let vt = VarTable::from_pairs([("x1", 0.6), ("x3", 0.7)]).unwrap();
        let g = ground(&parse_event_program("E := x1 | x3\nT := true\n").unwrap(), &vt).unwrap();
        let r = oracle_probabilities(&g, &[0, 1], DEFAULT_CAP).unwrap();
        assert!((r.probs[0] - 0.88).abs() < 1e-12);
        assert_eq!(r.probs[1], 1.0);
        assert_eq!(r.evaluations, 4);
    }

    #[test]
    fn cap_is_enforced() {
        let vt = VarTable::from_pairs((0..5).map(|i| (format!("x{i}"), 0.5))).unwrap();
        let g = ground(&parse_event_program("E := x0\n").unwrap(), &vt).unwrap();
        assert_eq!(oracle_probabilities(&g, &[0], 4).unwrap_err(), OracleError::CapExceeded { vars: 5, cap: 4 });
    }
}
