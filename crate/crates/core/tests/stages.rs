use eventnet::compile::{compile, CompileConfig};
use eventnet::datagen::{gen_correlations, Correlation, GenConfig};
use eventnet::dataset::Dataset;
use eventnet::ground::ground;
use eventnet::lang::parse_user_program;
use eventnet::network::EventNetwork;
use eventnet::parse_event_program;
use eventnet::pipeline::{instance, prepare};

fn programs() -> Vec<(&'static str, &'static str)> {
    vec![
        ("kmedoids", include_str!("../../../programs/kmedoids.py")),
        ("kmedoids_members", include_str!("../../../programs/kmedoids_members.py")),
        ("kmeans", include_str!("../../../programs/kmeans.py")),
        ("mcl", include_str!("../../../programs/mcl.py")),
        ("versions", include_str!("../../../programs/versions.py")),
    ]
}

fn small_dataset() -> Dataset {
    gen_correlations(&GenConfig { group: 2, iter: 2, ..GenConfig::new(4, Correlation::Positive { l: 1, pool: Some(2) }) }).unwrap()
}

#[test]
fn user_programs_print_and_reparse() {
    for (name, src) in programs() {
        let ast = parse_user_program(src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = ast.to_string();
        let again = parse_user_program(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert_eq!(printed, again.to_string(), "{name}");
    }
}

#[test]
fn event_programs_print_and_reparse() {
    let ds = small_dataset();
    let mut seen = 0;
    for (name, src) in programs() {
        let Ok(p) = prepare(src, &ds) else { continue };
        seen += 1;
        let printed = p.event_program.to_string();
        let again = parse_event_program(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert_eq!(p.event_program, again, "{name}");
    }
    assert!(seen >= 3, "only {seen} programs prepared");
}

#[test]
fn grounded_programs_print_and_reground() {
    let ds = Dataset::from_json(include_str!("../../../fixtures/four_points.json")).unwrap();
    let p = prepare(include_str!("../../../programs/kmedoids.py"), &ds).unwrap();
    let printed = p.grounded.to_string();
    let ep = parse_event_program(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
    let again = ground(&ep, &ds.var_table().unwrap()).unwrap();
    assert_eq!(printed, again.to_string());
    assert_eq!(p.grounded.decls.len(), again.decls.len());
    for (a, b) in p.grounded.decls.iter().zip(&again.decls) {
        assert_eq!((&a.eid, a.ty), (&b.eid, b.ty));
    }
}

#[test]
fn networks_dump_and_reload() {
    let ds = Dataset::from_json(include_str!("../../../fixtures/four_points.json")).unwrap();
    for folded in [false, true] {
        let net = instance(include_str!("../../../programs/kmedoids.py"), &ds, &[], None, folded).unwrap().network;
        let dump = net.dump();
        let back = EventNetwork::from_dump(&dump).unwrap();
        assert_eq!(net, back);
        assert_eq!(dump, back.dump());
        let (a, b) = (compile(&net, CompileConfig::exact()).unwrap(), compile(&back, CompileConfig::exact()).unwrap());
        assert_eq!(a.stats, b.stats);
    }
}
