//! User program + dataset -> grounded program with targets.

use crate::dataset::Dataset;
use crate::eid::{eid_string, IExpr};
use crate::eprog::{EventProgram, Item};
use crate::error::{Error, GroundError};
use crate::expr::Expr;
use crate::ground::{ground, GroundedProgram};
use crate::network::{build_folded, build_unfolded, EventNetwork};
use crate::lang::{parse_user_program, validate_user_program, UserProgram};
use crate::translate::{translate_to_event_program, Bindings, PHI};

#[derive(Clone, Debug)]
pub struct Prepared {
    pub ast: UserProgram,
    pub bindings: Bindings,
    pub event_program: EventProgram,
    pub grounded: GroundedProgram,
}

/// Parses, validates, translates and grounds. Targets are not selected yet.
pub fn prepare(src: &str, ds: &Dataset) -> Result<Prepared, Error> {
    let ast = parse_user_program(src)?;
    validate_user_program(&ast).map_err(Error::Validate)?;
    let bindings = ds.bindings()?;
    let event_program = translate_to_event_program(&ast, &bindings)?;
    let grounded = ground(&event_program, &ds.var_table()?)?;
    Ok(Prepared { ast, bindings, event_program, grounded })
}

/// Network over the selected targets of `g`. A folded network shares one copy of the main
/// loop body across iterations; its template comes from a three-iteration grounding.
pub fn build_network(ep: &EventProgram, g: &GroundedProgram, folded: bool) -> Result<EventNetwork, Error> {
    let Some(k) = g.main_item.filter(|_| folded) else {
        return Ok(build_unfolded(g)?);
    };
    let mut probe = ep.clone();
    // code after the loop names the real last iteration; the probe does not need it
    probe.items.truncate(k + 1);
    let Item::Forall(f) = &mut probe.items[k] else { unreachable!("main loop is a forall") };
    f.hi = IExpr::Add(Box::new(f.lo.clone()), Box::new(IExpr::Int(3)));
    let probe = ground(&probe, &g.vars)?;
    Ok(build_folded(g, &probe)?)
}

/// A prepared program together with its network.
#[derive(Clone, Debug)]
pub struct Instance {
    pub prepared: Prepared,
    pub network: EventNetwork,
}

/// Everything up to the network. Empty `targets` selects [`default_targets`]; `cooccur`
/// adds `Co^{a,b}` as an extra target.
pub fn instance(src: &str, ds: &Dataset, targets: &[String], cooccur: Option<(usize, usize)>, folded: bool) -> Result<Instance, Error> {
    let mut prepared = prepare(src, ds)?;
    let g = &mut prepared.grounded;
    let pats = if targets.is_empty() { default_targets(g) } else { targets.to_vec() };
    // added before selection so patterns can name it
    let co = cooccur.map(|(a, b)| add_cooccurrence(g, a, b)).transpose()?;
    g.select_targets(&pats)?;
    if let Some(co) = co.filter(|c| !g.targets.contains(c)) {
        g.targets.push(co);
    }
    let network = build_network(&prepared.event_program, &prepared.grounded, folded)?;
    Ok(Instance { prepared, network })
}

/// Final version of a variable family, e.g. `Centre_{0}`, as a target pattern over its elements.
pub fn family_pattern(g: &GroundedProgram, name: &str) -> Option<String> {
    let fam = g.last_family(name)?;
    let has_index = g.decls.iter().any(|d| d.eid.starts_with(&format!("{fam}^{{")));
    Some(if has_index { format!("{fam}^*") } else { fam })
}

/// Default targets: the final medoid-selection events if present, otherwise every event.
pub fn default_targets(g: &GroundedProgram) -> Vec<String> {
    match family_pattern(g, "Centre") {
        Some(p) => vec![p],
        None => vec!["*".to_string()],
    }
}

/// Declares `Co^{a,b}`: both objects exist and share a final cluster. Returns its index.
pub fn add_cooccurrence(g: &mut GroundedProgram, a: usize, b: usize) -> Result<usize, GroundError> {
    let fam = g.last_family("InCl").ok_or_else(|| GroundError::NoTarget("InCl".into()))?;
    let (name, label, _) = crate::eid::split_eid(&fam).expect("family name");
    let phi = |l: usize| {
        let e = eid_string(PHI, &[], &[l as i64]);
        g.lookup(&e).map(Expr::Ref).ok_or(GroundError::Unresolved { name: e, decl: "Co".into() })
    };
    let (pa, pb) = (phi(a)?, phi(b)?);
    let mut clusters = Vec::new();
    for i in 0.. {
        let at = |l: usize| g.lookup(&eid_string(&name, &label, &[i, l as i64]));
        match (at(a), at(b)) {
            (Some(x), Some(y)) => clusters.push(Expr::And(vec![Expr::Ref(x), Expr::Ref(y)])),
            _ => break,
        }
    }
    if clusters.is_empty() {
        return Err(GroundError::NoTarget(format!("{fam}^{{0,{a}}}")));
    }
    let eid = eid_string("Co", &[], &[a as i64, b as i64]);
    g.push_decl(&eid, Expr::And(vec![pa, pb, Expr::Or(clusters)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_program_grounds_with_centre_targets() {
        let ds = Dataset::from_json(include_str!("../../../fixtures/four_points.json")).unwrap();
        let mut p = prepare(include_str!("../../../programs/kmedoids_members.py"), &ds).unwrap();
        let pats = default_targets(&p.grounded);
        assert_eq!(pats, vec!["Centre_{0}^*".to_string()]);
        p.grounded.select_targets(&pats).unwrap();
        assert_eq!(p.grounded.targets.len(), 8);
        let co = add_cooccurrence(&mut p.grounded, 1, 2).unwrap();
        assert_eq!(p.grounded.decls[co].eid, "Co^{1,2}");
    }

    fn example_with_iter(iter: f64) -> Prepared {
        let mut ds = Dataset::from_json(include_str!("../../../fixtures/four_points.json")).unwrap();
        ds.params.values.insert("iter".into(), iter);
        let mut p = prepare(include_str!("../../../programs/kmedoids_members.py"), &ds).unwrap();
        let pats = default_targets(&p.grounded);
        p.grounded.select_targets(&pats).unwrap();
        p
    }

    #[test]
    fn exact_compilation_matches_enumeration() {
        use crate::compile::{compile, CompileConfig};
        use crate::oracle::{oracle_probabilities, DEFAULT_CAP};
        for iter in [1.0, 2.0, 3.0, 4.0] {
            let p = example_with_iter(iter);
            let want = oracle_probabilities(&p.grounded, &p.grounded.targets, DEFAULT_CAP).unwrap();
            for folded in [false, true] {
                let net = build_network(&p.event_program, &p.grounded, folded).unwrap();
                let got = compile(&net, CompileConfig::exact()).unwrap();
                for (t, w) in got.targets.iter().zip(&want.probs) {
                    assert!((t.lower - w).abs() < 1e-9 && (t.upper - w).abs() < 1e-9, "{} {} vs {w} (folded {folded})", t.eid, t.lower);
                }
            }
        }
    }

    #[test]
    fn folded_network_is_smaller() {
        let p = example_with_iter(4.0);
        let un = build_network(&p.event_program, &p.grounded, false).unwrap();
        let fo = build_network(&p.event_program, &p.grounded, true).unwrap();
        assert!(fo.len() < un.len(), "{} vs {}", fo.len(), un.len());
        assert_eq!(fo.iterations, 4);
    }

    #[test]
    fn example_worlds_match_expected_clusterings() {
        use crate::expr::Valuation;
        use crate::oracle::per_world_report;
        let ds = Dataset::from_json(include_str!("../../../fixtures/four_points.json")).unwrap();
        let p = prepare(include_str!("../../../programs/kmedoids_members.py"), &ds).unwrap();
        let vt = &p.grounded.vars;
        let nu = Valuation::from_named(vt, &[("x1", true), ("x2", false), ("x3", true), ("x4", true)]).unwrap();
        let r = per_world_report(&p.grounded, &nu).unwrap();
        assert_eq!(r.objects, vec![0, 2, 3]);
        assert_eq!(r.clusters, vec![vec![0], vec![2, 3]]);
        for x4 in [false, true] {
            let nu = Valuation::from_named(vt, &[("x1", true), ("x2", true), ("x3", true), ("x4", x4)]).unwrap();
            let r = per_world_report(&p.grounded, &nu).unwrap();
            assert_eq!(r.clusters, vec![vec![0, 1], vec![2]]);
        }
    }
}
