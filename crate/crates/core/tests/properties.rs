mod common;

use obda_core::mapping::{ConstrainedSpec, Constraints};
use obda_core::miner::{mine, MinerOptions};
use obda_core::relalg::{evaluate, Instance};
use obda_core::sparql::{answer, oracle_answer, parse_query, solutions_to_relation, var_attr};
use obda_core::translator::{compile, tau, CompileOptions, Prepared, Stage};
use proptest::prelude::*;

use common::*;

fn mined(seed: u64, multi: bool) -> (Case, ConstrainedSpec, String) {
    let mut r = rng(seed);
    let case = random_case(&mut r, multi);
    let text = random_query(&mut r);
    let report = mine(&case.spec, &case.inst, &MinerOptions::default()).unwrap();
    let cspec = ConstrainedSpec { spec: case.spec.clone(), constraints: report.certified };
    (case, cspec, text)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn compiled_answers_match_oracle(seed in 50_000u64..60_000, combo in 0usize..24, multi in any::<bool>()) {
        let (case, cspec, text) = mined(seed, multi);
        let q = parse_query(&text).unwrap();
        let o = CompileOptions::combinations()[combo];
        let prep = Prepared::new(&cspec, o.exact_predicates).unwrap();
        let c = compile(&q, &cspec, &prep, &o).unwrap();
        let expected = oracle_answer(&q, &cspec.spec, &case.inst).ok();
        let got = evaluate(&c.expr, &case.inst).ok();
        prop_assert_eq!(expected, got, "[{}] {}", o, text);
    }

    #[test]
    fn mined_constraints_round_trip(seed in 60_000u64..70_000) {
        let (_, cspec, _) = mined(seed, false);
        let text = cspec.constraints.to_string();
        let back = Constraints::parse(&text).unwrap();
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn sql_is_deterministic(seed in 70_000u64..80_000, combo in 0usize..24) {
        let (_, cspec, text) = mined(seed, true);
        let q = parse_query(&text).unwrap();
        let o = CompileOptions::combinations()[combo];
        let sql = || {
            let prep = Prepared::new(&cspec, o.exact_predicates).unwrap();
            compile(&q, &cspec, &prep, &o).unwrap().sql
        };
        prop_assert_eq!(sql(), sql());
    }

    #[test]
    fn optimizing_stages_never_add_operators(seed in 80_000u64..90_000) {
        let (_, cspec, text) = mined(seed, true);
        let q = parse_query(&text).unwrap();
        let o = CompileOptions::all();
        let prep = Prepared::new(&cspec, true).unwrap();
        let c = compile(&q, &cspec, &prep, &o).unwrap();
        let sizes: Vec<usize> = c
            .trace
            .iter()
            .filter(|t| matches!(t.stage, Stage::Structural | Stage::Vfd | Stage::Semantic))
            .map(|t| t.counts.joins + t.counts.unions)
            .collect();
        prop_assert!(sizes.windows(2).all(|w| w[1] <= w[0]), "{:?} {}", sizes, text);
    }

    #[test]
    fn tau_matches_graph_semantics(seed in 90_000u64..100_000) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 30);
        let text = random_graph_query(&mut r);
        let q = parse_query(&text).unwrap();
        let mut inst = Instance::default();
        inst.add_relation("triple", g.triple_relation());
        let vars = q.pattern.vars();
        let attrs: Vec<String> = vars.iter().map(|v| var_attr(v)).collect();
        let expected = answer(&q.pattern, &g).map(|s| solutions_to_relation(&vars, &s)).unwrap();
        let got = evaluate(&tau(&q.pattern), &inst).and_then(|rel| rel.project(&attrs)).unwrap();
        prop_assert_eq!(expected, got, "{}", text);
    }
}
