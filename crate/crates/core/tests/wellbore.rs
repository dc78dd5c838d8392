use std::path::Path;

use obda_core::project::ProjectLayout;
use obda_core::relalg::evaluate;
use obda_core::sparql::{oracle_answer, parse_query};
use obda_core::translator::{translate, CompileOptions};

fn layout() -> ProjectLayout {
    ProjectLayout::in_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../projects/wellbore"))
}

#[test]
fn every_query_matches_the_oracle_under_every_option_set() {
    let l = layout();
    let cspec = l.load_spec().unwrap();
    let inst = l.load_instance(&cspec.spec.schema).unwrap();
    for (name, text) in l.load_queries().unwrap() {
        let q = parse_query(&text).unwrap();
        let expected = oracle_answer(&q, &cspec.spec, &inst).unwrap();
        assert!(!expected.is_empty(), "{name}");
        for opts in CompileOptions::combinations() {
            let c = translate(&text, &cspec, &opts).unwrap();
            let got = evaluate(&c.expr, &inst).unwrap();
            assert_eq!(got, expected, "{name} under {opts}\n{}", c.explain(true));
        }
    }
}

#[test]
fn star_query_shapes() {
    let l = layout();
    let cspec = l.load_spec().unwrap();
    let text = std::fs::read_to_string(l.queries.join("wellbore_star.rq")).unwrap();
    let off = translate(&text, &cspec, &CompileOptions::none()).unwrap();
    println!("{}", off.explain(false));
    assert_eq!((off.counts.joins, off.counts.unions), (2, 2));
    let on = translate(&text, &cspec, &CompileOptions::all()).unwrap();
    println!("{}\n{}", on.explain(true), on.sql);
    assert_eq!((on.counts.joins, on.counts.unions), (0, 0));
}

#[test]
fn shared_optimizing_body_becomes_a_cte() {
    let l = layout();
    let cspec = l.load_spec().unwrap();
    let text = std::fs::read_to_string(l.queries.join("old_or_w3.rq")).unwrap();
    let opts = CompileOptions { cte_mode: true, ..CompileOptions::all() };
    let c = translate(&text, &cspec, &opts).unwrap();
    println!("{}", c.sql);
    assert!(c.sql.starts_with("WITH \"vfd_completionDate_isInWell\" AS ("));
    assert_eq!(c.sql.matches("FROM \"vfd_completionDate_isInWell\"").count(), 2);
    let plain = translate(&text, &cspec, &CompileOptions::all()).unwrap();
    assert!(!plain.sql.contains("WITH"));
}
