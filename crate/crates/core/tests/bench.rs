use obda_core::bench::{Scenario, Workload};

fn report(s: Scenario, scale: usize) -> obda_core::bench::BenchReport {
    Workload::generate(s, scale, 42).unwrap().run(1, &|_| true).unwrap()
}

#[test]
fn exact_classes_collapse_the_hierarchy_union() {
    let e0 = report(Scenario::E0, 500);
    let e3 = report(Scenario::E3, 500);
    println!("{e0}\n{e3}");
    let q3 = |r: &obda_core::bench::BenchReport| r.rows.iter().find(|q| q.name == "q3").unwrap().clone();
    assert_eq!(q3(&e0).bgp_branches, 12);
    assert_eq!(q3(&e3).bgp_branches, 1);
    assert_eq!(q3(&e0).answers, q3(&e3).answers);
    for (a, b) in e0.rows.iter().zip(&e3.rows) {
        assert_eq!(a.answers, b.answers, "{}", a.name);
        assert!(b.bgp_branches <= a.bgp_branches);
    }
}

#[test]
fn views_with_vfds_need_no_self_joins() {
    let k2 = report(Scenario::K2, 500);
    let k3 = report(Scenario::K3, 500);
    println!("{k2}\n{k3}");
    for (a, b) in k2.rows.iter().zip(&k3.rows) {
        assert_eq!(a.counts.joins, 0, "{}", a.name);
        assert_eq!(b.counts.joins, b.properties, "{}", b.name);
        assert_eq!(a.answers, b.answers, "{}", a.name);
    }
}

#[test]
fn generation_is_reproducible() {
    let a = Workload::generate(Scenario::K2, 300, 9).unwrap();
    let b = Workload::generate(Scenario::K2, 300, 9).unwrap();
    for (name, rel) in &a.instance.relations {
        let other = &b.instance.relations[name];
        assert_eq!(obda_core::bench::table_digest(rel), obda_core::bench::table_digest(other), "{name}");
    }
}
