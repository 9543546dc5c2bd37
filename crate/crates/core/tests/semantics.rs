use proptest::prelude::*;

use eventnet::datagen::{gen_correlations, Correlation, GenConfig};
use eventnet::dataset::Dataset;
use eventnet::interp::{interpret, IVal};
use eventnet::oracle::{world_reports, DEFAULT_CAP};
use eventnet::pipeline::prepare;
use eventnet::Value;

const KMEDOIDS: &str = include_str!("../../../programs/kmedoids.py");

/// Cluster membership and medoid per world agree between direct execution and the grounded program.
fn agree(src: &str, ds: &Dataset) -> Result<usize, TestCaseError> {
    let p = prepare(src, ds).unwrap();
    let n = ds.points.len();
    let reports = world_reports(&p.grounded, DEFAULT_CAP).unwrap();
    for r in &reports {
        let present: Vec<bool> = (0..n).map(|l| r.objects.contains(&l)).collect();
        let out = interpret(&p.ast, &p.bindings, &present).unwrap();
        let grid = |name: &str| -> Vec<Vec<usize>> {
            let Some(IVal::Arr(rows)) = out.get(name) else { return vec![] };
            (0..rows.len())
                .map(|i| (0..n).filter(|&l| present[l] && out[name].at(&[i, l]).and_then(IVal::value) == Some(&Value::Bool(true))).collect())
                .collect()
        };
        prop_assert_eq!(&grid("InCl"), &r.clusters, "world {:?}", r.valuation);
        let medoids: Vec<Option<usize>> = grid("Centre").into_iter().map(|v| v.first().copied()).collect();
        prop_assert_eq!(&medoids, &r.medoids, "world {:?}", r.valuation);
    }
    Ok(reports.len())
}

#[test]
fn fixture_worlds_agree() {
    let ds = Dataset::from_json(include_str!("../../../fixtures/four_points.json")).unwrap();
    assert_eq!(agree(KMEDOIDS, &ds).unwrap(), 16);
}

fn scheme() -> impl Strategy<Value = Correlation> {
    prop_oneof![
        (1usize..=2).prop_map(|l| Correlation::Positive { l, pool: Some(4) }),
        (2usize..=3).prop_map(|m| Correlation::Mutex { m }),
        Just(Correlation::Markov),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_worlds_agree(seed in 0u64..500, s in scheme(), iter in 1usize..=2, certain in prop::sample::select(vec![0.0, 0.34])) {
        let cfg = GenConfig { group: 2, seed, iter, certain, ..GenConfig::new(6, s) };
        let ds = gen_correlations(&cfg).unwrap();
        agree(KMEDOIDS, &ds)?;
    }
}
