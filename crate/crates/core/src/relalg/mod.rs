//! Relational algebra with three-valued filters, set semantics and an in-memory evaluator.

mod eval;
mod expr;
mod fd;
mod io;
mod relation;
mod schema;
mod template;
mod value;

pub use eval::{eval_filter_on, evaluate, natural_join};
pub use expr::{FilterExpr, OpCounts, Operand, RelExpr};
pub use fd::{check_containment, check_fd, containment_witness, fd_violation};
pub use io::{load_csv_dir, read_relation_csv, write_relation_csv};
pub use relation::{Instance, Relation, Tuple};
pub use schema::{Catalog, ColumnType, InclusionDep, Schema};
pub(crate) use schema::strip_comment;
pub use template::{Segment, Shape, Template, TermKind};
pub use value::{Truth, Value};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RelError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unbound CTE `{0}`")]
    UnboundCte(String),
    #[error("plan error: {0}")]
    Plan(String),
    #[error("cannot compare {left} with {right}")]
    TypeMismatch { left: String, right: String },
    #[error("arity mismatch: expected {expected}, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("template error: {0}")]
    Template(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn int(i: i64) -> Value {
        Value::Int(i)
    }

    fn inst() -> Instance {
        let schema = Schema::parse("relation r(a int, b int)\nrelation s(b int, c int)").unwrap();
        let mut i = Instance::empty(&schema);
        i.insert("r", vec![int(1), int(10)]).unwrap();
        i.insert("r", vec![int(2), Value::Null]).unwrap();
        i.insert("s", vec![int(10), int(100)]).unwrap();
        i.insert("s", vec![Value::Null, int(200)]).unwrap();
        i
    }

    #[test]
    fn null_is_never_join_compatible() {
        let e = RelExpr::NaturalJoin(vec![RelExpr::base("r"), RelExpr::base("s")]);
        let r = evaluate(&e, &inst()).unwrap();
        assert_eq!(r, Relation::from_rows(&["a", "b", "c"], [vec![int(1), int(10), int(100)]]));
    }

    #[test]
    fn select_keeps_only_true() {
        let f = FilterExpr::Lt(Operand::attr("b"), Operand::Const(int(20)));
        let r = evaluate(&RelExpr::select(f.clone(), RelExpr::base("r")), &inst()).unwrap();
        assert_eq!(r.len(), 1);
        let neg = evaluate(&RelExpr::select(FilterExpr::not(f), RelExpr::base("r")), &inst()).unwrap();
        assert_eq!(neg.len(), 0);
        let isnull = RelExpr::select(FilterExpr::IsNull(vec!["b".into()]), RelExpr::base("r"));
        assert_eq!(evaluate(&isnull, &inst()).unwrap().len(), 1);
    }

    #[test]
    fn cross_type_order_is_unknown() {
        let f = FilterExpr::Lt(Operand::attr("b"), Operand::Const(Value::text("x")));
        assert!(evaluate(&RelExpr::select(f.clone(), RelExpr::base("r")), &inst()).unwrap().is_empty());
        assert!(evaluate(&RelExpr::select(FilterExpr::not(f), RelExpr::base("r")), &inst()).unwrap().is_empty());
    }

    #[test]
    fn unknown_names_and_unbound_cte() {
        assert!(matches!(evaluate(&RelExpr::base("zz"), &inst()), Err(RelError::UnknownRelation(_))));
        let p = RelExpr::project(&["zz"], RelExpr::base("r"));
        assert!(matches!(evaluate(&p, &inst()), Err(RelError::UnknownAttribute(_))));
        assert!(matches!(evaluate(&RelExpr::CteRef("v".into()), &inst()), Err(RelError::UnboundCte(_))));
        let w = RelExpr::WithCte {
            bindings: vec![("v".into(), RelExpr::base("r"))],
            body: Box::new(RelExpr::CteRef("v".into())),
        };
        assert_eq!(evaluate(&w, &inst()).unwrap().len(), 2);
    }

    #[test]
    fn padding_union_difference() {
        let l = RelExpr::project(&["a"], RelExpr::base("r"));
        let padded = RelExpr::padding(vec!["c".into()], l.clone());
        let u = RelExpr::Union(vec![padded.clone(), RelExpr::project(&["c", "b"], RelExpr::base("s"))
            .map_children(|c| c.clone())]);
        assert!(evaluate(&u, &inst()).is_err());
        let d = RelExpr::Difference(Box::new(l.clone()), Box::new(RelExpr::Values { attrs: vec!["a".into()], rows: vec![vec![int(1)]] }));
        assert_eq!(evaluate(&d, &inst()).unwrap(), Relation::from_rows(&["a"], [vec![int(2)]]));
        let pr = evaluate(&padded, &inst()).unwrap();
        assert!(pr.iter().all(|t| t[1].is_null()));
    }

    #[test]
    fn uri_construct_renders_templates() {
        let t = Template::parse(":R-{a}").unwrap();
        let e = RelExpr::project(&["x"], RelExpr::uri("x", t, RelExpr::base("r")));
        let r = evaluate(&e, &inst()).unwrap();
        assert!(r.contains(&[Value::iri(":R-1")]));
    }

    #[test]
    fn equi_join_requires_disjoint_inputs() {
        let e = RelExpr::EquiJoin {
            left: Box::new(RelExpr::base("r")),
            right: Box::new(RelExpr::base("s")),
            on: vec![("b".into(), "b".into())],
        };
        assert!(evaluate(&e, &inst()).is_err());
        let renamed = RelExpr::rename(vec![("sb".into(), "b".into())], RelExpr::base("s"));
        let e = RelExpr::EquiJoin { left: Box::new(RelExpr::base("r")), right: Box::new(renamed), on: vec![("b".into(), "sb".into())] };
        assert_eq!(evaluate(&e, &inst()).unwrap().len(), 1);
    }

    fn brute_join(l: &[(Option<i64>, i64)], r: &[(Option<i64>, i64)]) -> Vec<Vec<Value>> {
        let mut out = Vec::new();
        for (k1, a) in l {
            for (k2, b) in r {
                if k1.is_some() && k1 == k2 {
                    out.push(vec![int(k1.unwrap()), int(*a), int(*b)]);
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn natural_join_matches_nested_loops(
            l in prop::collection::vec((prop::option::of(0i64..4), 0i64..3), 0..10),
            r in prop::collection::vec((prop::option::of(0i64..4), 0i64..3), 0..10),
        ) {
            let mk = |rows: &[(Option<i64>, i64)], other: &str| Relation::from_rows(
                &["k", other],
                rows.iter().map(|(k, v)| vec![k.map(Value::Int).unwrap_or(Value::Null), int(*v)]),
            );
            let got = natural_join(&mk(&l, "a"), &mk(&r, "b"));
            let want = Relation::from_rows(&["k", "a", "b"], brute_join(&l, &r));
            prop_assert_eq!(got, want);
        }
    }
}
