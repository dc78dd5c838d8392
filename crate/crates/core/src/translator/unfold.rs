//! Unfolding of triple patterns over split T-mappings.

use crate::mapping::{Head, SplitMappings};
use crate::ontology::RDF_TYPE;
use crate::relalg::{FilterExpr, Operand, RelExpr, Template, Value};
use crate::sparql::{var_attr, Term, TriplePattern};

/// One alternative for a unit of a BGP: a source body and the template producing each position.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Branch {
    pub body: RelExpr,
    pub attrs: Vec<String>,
    pub positions: Vec<(Term, Template)>,
}

impl Branch {
    pub fn vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (t, _) in &self.positions {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    /// `π_vars σ_filters` over the body extended with constructed terms.
    pub fn to_relexpr(&self) -> RelExpr {
        let mut chain = self.body.clone();
        let mut filters = Vec::new();
        let mut seen: Vec<&str> = Vec::new();
        for (k, (term, t)) in self.positions.iter().enumerate() {
            match term {
                Term::Var(v) if !seen.contains(&v.as_str()) => {
                    chain = RelExpr::uri(&var_attr(v), t.clone(), chain);
                    seen.push(v);
                }
                Term::Var(v) => {
                    let tmp = format!("#{k}");
                    chain = RelExpr::uri(&tmp, t.clone(), chain);
                    filters.push(FilterExpr::eq_attrs(&var_attr(v), &tmp));
                }
                Term::Const(c) => {
                    let tmp = format!("#{k}");
                    chain = RelExpr::uri(&tmp, t.clone(), chain);
                    filters.push(FilterExpr::Eq(Operand::attr(&tmp), Operand::Const(c.clone())));
                }
            }
        }
        let vars: Vec<String> = self.vars().iter().map(|v| var_attr(v)).collect();
        RelExpr::project(&vars, RelExpr::select(FilterExpr::and(filters), chain))
    }

    /// False when some constant position can never be produced.
    pub fn satisfiable(&self) -> bool {
        self.positions.iter().all(|(term, t)| match term {
            Term::Const(c) => t.may_produce(c),
            Term::Var(_) => true,
        })
    }
}

/// A unit of a BGP (a triple pattern or a rewritten star) with its alternatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Unit {
    pub label: String,
    pub vars: Vec<String>,
    pub branches: Vec<Branch>,
}

impl Unit {
    pub fn to_relexpr(&self) -> RelExpr {
        let attrs: Vec<String> = self.vars.iter().map(|v| var_attr(v)).collect();
        RelExpr::union(self.branches.iter().map(Branch::to_relexpr).collect(), &attrs)
    }
}

fn head_positions(head: &Head, original: &str, tp: &TriplePattern) -> Vec<(Term, Template)> {
    let ty = Template::constant(&Value::iri(RDF_TYPE));
    match head {
        Head::Class { subject, .. } => {
            let mut v = vec![(tp.s.clone(), subject.clone())];
            if tp.p.var().is_some() {
                v.push((tp.p.clone(), ty));
            }
            if tp.o.var().is_some() || tp.p.var().is_some() {
                v.push((tp.o.clone(), Template::constant(&Value::iri(original))));
            }
            v
        }
        Head::Property { subject, object, .. } => {
            let mut v = vec![(tp.s.clone(), subject.clone())];
            if tp.p.var().is_some() {
                v.push((tp.p.clone(), Template::constant(&Value::iri(original))));
            }
            v.push((tp.o.clone(), object.clone()));
            v
        }
    }
}

/// Unfolds one triple pattern into the union of its mapping alternatives.
pub fn unfold_triple(tp: &TriplePattern, split: &SplitMappings, attrs_of: &dyn Fn(&RelExpr) -> Vec<String>) -> Unit {
    let type_iri = Value::iri(RDF_TYPE);
    let groups: Vec<_> = match (&tp.p, &tp.o) {
        (Term::Const(p), Term::Const(Value::Iri(c))) if *p == type_iri => split.pieces(c).into_iter().filter(|g| g.is_class()).collect(),
        (Term::Const(p), Term::Const(_)) if *p == type_iri => vec![],
        (Term::Const(p), Term::Var(_)) if *p == type_iri => split.groups.values().filter(|g| g.is_class()).collect(),
        (Term::Const(Value::Iri(p)), _) => split.pieces(p).into_iter().filter(|g| !g.is_class()).collect(),
        (Term::Const(_), _) => vec![],
        (Term::Var(_), _) => split.groups.values().collect(),
    };
    let mut branches = Vec::new();
    for g in groups {
        for m in &g.mappings {
            let b = Branch {
                body: m.body.clone(),
                attrs: attrs_of(&m.body),
                positions: head_positions(&m.head, &g.original, tp),
            };
            if b.satisfiable() {
                branches.push(b);
            }
        }
    }
    Unit { label: tp.to_string(), vars: tp.vars(), branches }
}
