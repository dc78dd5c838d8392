//! SPARQL SELECT subset: algebra, parser and a reference evaluator over explicit graphs.

mod parse;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

pub use parse::parse_query;

use crate::mapping::{virtual_assertions, MappingError, ObdaSpec};
use crate::ontology::{Assertion, RDF_TYPE};
use crate::relalg::{Instance, RelError, Relation, Truth, Value};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SparqlError {
    #[error("{line}:{col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error(transparent)]
    Rel(#[from] RelError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(Value::Iri(s)) if s.as_ref() == RDF_TYPE => write!(f, "a"),
            Term::Const(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TriplePattern {
    pub s: Term,
    pub p: Term,
    pub o: Term,
}

impl TriplePattern {
    pub fn new(s: Term, p: Term, o: Term) -> TriplePattern {
        TriplePattern { s, p, o }
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.s, &self.p, &self.o]
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in self.terms() {
            if let Term::Var(v) = t {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.s, self.p, self.o)
    }
}

/// Filter condition with three-valued semantics.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    True,
    Eq(Term, Term),
    Lt(Term, Term),
    Bound(String),
    Not(Box<Condition>),
    And(Vec<Condition>),
    Or(Vec<Condition>),
}

impl Condition {
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<String>) {
        match self {
            Condition::True => {}
            Condition::Eq(a, b) | Condition::Lt(a, b) => {
                for t in [a, b] {
                    if let Term::Var(v) = t {
                        out.insert(v.clone());
                    }
                }
            }
            Condition::Bound(v) => {
                out.insert(v.clone());
            }
            Condition::Not(c) => c.collect(out),
            Condition::And(cs) | Condition::Or(cs) => cs.iter().for_each(|c| c.collect(out)),
        }
    }

    pub fn and(parts: Vec<Condition>) -> Condition {
        let mut flat: Vec<Condition> = Vec::new();
        for p in parts {
            match p {
                Condition::True => {}
                Condition::And(xs) => flat.extend(xs),
                x => flat.push(x),
            }
        }
        match flat.len() {
            0 => Condition::True,
            1 => flat.pop().unwrap(),
            _ => Condition::And(flat),
        }
    }

    pub fn eval(&self, s: &Solution) -> Result<Truth, RelError> {
        let val = |t: &Term| -> Value {
            match t {
                Term::Var(v) => s.get(v).cloned().unwrap_or(Value::Null),
                Term::Const(c) => c.clone(),
            }
        };
        Ok(match self {
            Condition::True => Truth::True,
            Condition::Eq(a, b) => val(a).eq3(&val(b)),
            Condition::Lt(a, b) => val(a).lt3(&val(b)),
            Condition::Bound(v) => Truth::from_bool(s.contains_key(v)),
            Condition::Not(c) => c.eval(s)?.not(),
            Condition::And(cs) => {
                let mut acc = Truth::True;
                for c in cs {
                    acc = acc.and(c.eval(s)?);
                }
                acc
            }
            Condition::Or(cs) => {
                let mut acc = Truth::False;
                for c in cs {
                    acc = acc.or(c.eval(s)?);
                }
                acc
            }
        })
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::True => write!(f, "true"),
            Condition::Eq(a, b) => write!(f, "{a} = {b}"),
            Condition::Lt(a, b) => write!(f, "{a} < {b}"),
            Condition::Bound(v) => write!(f, "bound(?{v})"),
            Condition::Not(c) => write!(f, "!({c})"),
            Condition::And(cs) => {
                write!(f, "{}", cs.iter().map(|c| format!("({c})")).collect::<Vec<_>>().join(" && "))
            }
            Condition::Or(cs) => {
                write!(f, "{}", cs.iter().map(|c| format!("({c})")).collect::<Vec<_>>().join(" || "))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphPattern {
    Bgp(Vec<TriplePattern>),
    Filter(Box<GraphPattern>, Condition),
    Bind(Box<GraphPattern>, String, Value),
    Union(Box<GraphPattern>, Box<GraphPattern>),
    Join(Box<GraphPattern>, Box<GraphPattern>),
    Opt(Box<GraphPattern>, Box<GraphPattern>, Condition),
}

fn push_unique(out: &mut Vec<String>, v: &str) {
    if !out.iter().any(|x| x == v) {
        out.push(v.to_string());
    }
}

impl GraphPattern {
    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            GraphPattern::Bgp(tps) => {
                for tp in tps {
                    for v in tp.vars() {
                        push_unique(out, &v);
                    }
                }
            }
            GraphPattern::Filter(p, _) => p.collect_vars(out),
            GraphPattern::Bind(p, v, _) => {
                p.collect_vars(out);
                push_unique(out, v);
            }
            GraphPattern::Union(a, b) | GraphPattern::Join(a, b) | GraphPattern::Opt(a, b, _) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Variables bound in every answer.
    pub fn certain_vars(&self) -> BTreeSet<String> {
        match self {
            GraphPattern::Bgp(tps) => tps.iter().flat_map(|t| t.vars()).collect(),
            GraphPattern::Filter(p, _) => p.certain_vars(),
            GraphPattern::Bind(p, v, _) => {
                let mut s = p.certain_vars();
                s.insert(v.clone());
                s
            }
            GraphPattern::Union(a, b) => a.certain_vars().intersection(&b.certain_vars()).cloned().collect(),
            GraphPattern::Join(a, b) => a.certain_vars().union(&b.certain_vars()).cloned().collect(),
            GraphPattern::Opt(a, _, _) => a.certain_vars(),
        }
    }

    /// Number of non-BGP operators.
    pub fn operator_count(&self) -> usize {
        match self {
            GraphPattern::Bgp(_) => 0,
            GraphPattern::Filter(p, _) | GraphPattern::Bind(p, _, _) => 1 + p.operator_count(),
            GraphPattern::Union(a, b) | GraphPattern::Join(a, b) | GraphPattern::Opt(a, b, _) => {
                1 + a.operator_count() + b.operator_count()
            }
        }
    }

    pub fn bgps(&self) -> Vec<&Vec<TriplePattern>> {
        match self {
            GraphPattern::Bgp(t) => vec![t],
            GraphPattern::Filter(p, _) | GraphPattern::Bind(p, _, _) => p.bgps(),
            GraphPattern::Union(a, b) | GraphPattern::Join(a, b) | GraphPattern::Opt(a, b, _) => {
                let mut v = a.bgps();
                v.extend(b.bgps());
                v
            }
        }
    }

    fn fmt_group(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let pad = "  ".repeat(depth);
        match self {
            GraphPattern::Bgp(tps) => {
                for tp in tps {
                    writeln!(f, "{pad}{tp} .")?;
                }
                Ok(())
            }
            GraphPattern::Filter(p, c) => {
                p.fmt_group(f, depth)?;
                writeln!(f, "{pad}FILTER({})", sparql_condition(c))
            }
            GraphPattern::Bind(p, v, c) => {
                p.fmt_group(f, depth)?;
                writeln!(f, "{pad}BIND({} AS ?{v})", sparql_term(&Term::Const(c.clone())))
            }
            GraphPattern::Union(a, b) => {
                writeln!(f, "{pad}{{")?;
                a.fmt_group(f, depth + 1)?;
                writeln!(f, "{pad}}} UNION {{")?;
                b.fmt_group(f, depth + 1)?;
                writeln!(f, "{pad}}}")
            }
            GraphPattern::Join(a, b) => {
                writeln!(f, "{pad}{{")?;
                a.fmt_group(f, depth + 1)?;
                writeln!(f, "{pad}}}")?;
                writeln!(f, "{pad}{{")?;
                b.fmt_group(f, depth + 1)?;
                writeln!(f, "{pad}}}")
            }
            GraphPattern::Opt(a, b, c) => {
                a.fmt_group(f, depth)?;
                writeln!(f, "{pad}OPTIONAL {{")?;
                b.fmt_group(f, depth + 1)?;
                if *c != Condition::True {
                    writeln!(f, "{pad}  FILTER({})", sparql_condition(c))?;
                }
                writeln!(f, "{pad}}}")
            }
        }
    }
}

fn sparql_term(t: &Term) -> String {
    match t {
        Term::Const(Value::Int(i)) => i.to_string(),
        Term::Const(Value::Date(d)) => format!("\"{}\"^^xsd:date", d.format("%Y-%m-%d")),
        other => other.to_string(),
    }
}

fn sparql_condition(c: &Condition) -> String {
    match c {
        Condition::True => "true".into(),
        Condition::Eq(a, b) => format!("{} = {}", sparql_term(a), sparql_term(b)),
        Condition::Lt(a, b) => format!("{} < {}", sparql_term(a), sparql_term(b)),
        Condition::Bound(v) => format!("bound(?{v})"),
        Condition::Not(x) => format!("!({})", sparql_condition(x)),
        Condition::And(xs) => xs.iter().map(|x| format!("({})", sparql_condition(x))).collect::<Vec<_>>().join(" && "),
        Condition::Or(xs) => xs.iter().map(|x| format!("({})", sparql_condition(x))).collect::<Vec<_>>().join(" || "),
    }
}

/// Serialises as SPARQL group syntax; parses back to the same pattern.
impl fmt::Display for GraphPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_group(f, 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub select: Vec<String>,
    pub pattern: GraphPattern,
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vs: Vec<String> = self.select.iter().map(|v| format!("?{v}")).collect();
        writeln!(f, "SELECT {} WHERE {{", vs.join(" "))?;
        write!(f, "{}", self.pattern)?;
        writeln!(f, "}}")
    }
}

pub type Triple = (Value, Value, Value);
pub type Solution = BTreeMap<String, Value>;

/// An explicit RDF graph.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Graph {
    pub triples: BTreeSet<Triple>,
}

impl Graph {
    pub fn from_assertions(abox: &BTreeSet<Assertion>) -> Graph {
        let ty = Value::iri(RDF_TYPE);
        Graph {
            triples: abox
                .iter()
                .map(|a| match a {
                    Assertion::Class(c, i) => (i.clone(), ty.clone(), Value::iri(c)),
                    Assertion::Prop(p, i, j) => (i.clone(), Value::iri(p), j.clone()),
                })
                .collect(),
        }
    }

    /// The graph as a relation `triple(subj, pred, obj)`.
    pub fn triple_relation(&self) -> Relation {
        Relation::from_rows(&["subj", "pred", "obj"], self.triples.iter().map(|(s, p, o)| vec![s.clone(), p.clone(), o.clone()]))
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

fn compatible(a: &Solution, b: &Solution) -> bool {
    a.iter().all(|(k, v)| b.get(k).is_none_or(|w| w == v))
}

fn merge(a: &Solution, b: &Solution) -> Solution {
    let mut out = a.clone();
    out.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
    out
}

fn join(l: &BTreeSet<Solution>, r: &BTreeSet<Solution>) -> BTreeSet<Solution> {
    let mut out = BTreeSet::new();
    for a in l {
        for b in r {
            if compatible(a, b) {
                out.insert(merge(a, b));
            }
        }
    }
    out
}

fn match_term(t: &Term, v: &Value, s: &mut Solution) -> bool {
    match t {
        Term::Const(c) => c == v,
        Term::Var(x) => match s.get(x) {
            Some(w) => w == v,
            None => {
                s.insert(x.clone(), v.clone());
                true
            }
        },
    }
}

fn eval_bgp(tps: &[TriplePattern], g: &Graph, by_pred: &HashMap<&Value, Vec<&Triple>>) -> BTreeSet<Solution> {
    let all: Vec<&Triple> = g.triples.iter().collect();
    let mut cur: Vec<Solution> = vec![Solution::new()];
    for tp in tps {
        let mut next = Vec::new();
        for s in &cur {
            let pred = match &tp.p {
                Term::Const(c) => Some(c),
                Term::Var(v) => s.get(v),
            };
            let cands: &[&Triple] = match pred {
                Some(p) => by_pred.get(p).map(|v| v.as_slice()).unwrap_or(&[]),
                None => &all,
            };
            for (a, b, c) in cands {
                let mut s2 = s.clone();
                if match_term(&tp.s, a, &mut s2) && match_term(&tp.p, b, &mut s2) && match_term(&tp.o, c, &mut s2) {
                    next.push(s2);
                }
            }
        }
        next.sort();
        next.dedup();
        cur = next;
    }
    cur.into_iter().collect()
}

/// Answers of a graph pattern over an explicit graph, under set semantics.
pub fn answer(p: &GraphPattern, g: &Graph) -> Result<BTreeSet<Solution>, SparqlError> {
    let mut by_pred: HashMap<&Value, Vec<&Triple>> = HashMap::new();
    for t in &g.triples {
        by_pred.entry(&t.1).or_default().push(t);
    }
    eval_pattern(p, g, &by_pred)
}

fn eval_pattern(
    p: &GraphPattern,
    g: &Graph,
    by_pred: &HashMap<&Value, Vec<&Triple>>,
) -> Result<BTreeSet<Solution>, SparqlError> {
    Ok(match p {
        GraphPattern::Bgp(tps) => eval_bgp(tps, g, by_pred),
        GraphPattern::Filter(p, c) => {
            let mut out = BTreeSet::new();
            for s in eval_pattern(p, g, by_pred)? {
                if c.eval(&s)?.is_true() {
                    out.insert(s);
                }
            }
            out
        }
        GraphPattern::Bind(p, v, c) => eval_pattern(p, g, by_pred)?
            .into_iter()
            .map(|mut s| {
                s.insert(v.clone(), c.clone());
                s
            })
            .collect(),
        GraphPattern::Union(a, b) => {
            let mut out = eval_pattern(a, g, by_pred)?;
            out.extend(eval_pattern(b, g, by_pred)?);
            out
        }
        GraphPattern::Join(a, b) => join(&eval_pattern(a, g, by_pred)?, &eval_pattern(b, g, by_pred)?),
        GraphPattern::Opt(a, b, c) => {
            let l = eval_pattern(a, g, by_pred)?;
            let r = eval_pattern(b, g, by_pred)?;
            let mut out = BTreeSet::new();
            for s1 in &l {
                let mut extended = false;
                for s2 in &r {
                    if compatible(s1, s2) {
                        let m = merge(s1, s2);
                        if c.eval(&m)?.is_true() {
                            out.insert(m);
                            extended = true;
                        }
                    }
                }
                if !extended {
                    out.insert(s1.clone());
                }
            }
            out
        }
    })
}

/// The virtual graph of a specification: saturated virtual assertions.
pub fn virtual_graph(spec: &ObdaSpec, inst: &Instance) -> Result<Graph, SparqlError> {
    let abox = virtual_assertions(&spec.mappings, inst)?;
    Ok(Graph::from_assertions(&spec.ontology.saturate_abox(&abox)))
}

/// Reference answers: the query evaluated over the saturated virtual graph.
pub fn oracle_answer(query: &Query, spec: &ObdaSpec, inst: &Instance) -> Result<Relation, SparqlError> {
    let g = virtual_graph(spec, inst)?;
    Ok(solutions_to_relation(&query.select, &answer(&query.pattern, &g)?))
}

/// Relational form of a solution set over the answer variables; unbound becomes null.
pub fn solutions_to_relation(vars: &[String], sols: &BTreeSet<Solution>) -> Relation {
    let attrs: Vec<String> = vars.iter().map(|v| var_attr(v)).collect();
    Relation::from_rows(
        &attrs,
        sols.iter().map(|s| vars.iter().map(|v| s.get(v).cloned().unwrap_or(Value::Null)).collect()),
    )
}

/// Attribute name carrying a SPARQL variable.
pub fn var_attr(v: &str) -> String {
    format!("?{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iri(s: &str) -> Value {
        Value::iri(s)
    }

    fn graph() -> Graph {
        let mut g = Graph::default();
        g.triples.insert((iri(":a"), iri(":p"), iri(":b")));
        g.triples.insert((iri(":a"), iri(":q"), Value::Int(1)));
        g.triples.insert((iri(":c"), iri(":p"), iri(":d")));
        g
    }

    fn q(text: &str) -> Query {
        parse_query(text).unwrap()
    }

    #[test]
    fn optional_keeps_unextended() {
        let query = q("SELECT * WHERE { ?x :p ?y OPTIONAL { ?x :q ?z } }");
        let ans = answer(&query.pattern, &graph()).unwrap();
        assert_eq!(ans.len(), 2);
        assert!(ans.iter().any(|s| s.get("x") == Some(&iri(":c")) && !s.contains_key("z")));
    }

    #[test]
    fn optional_filter_semantics() {
        let query = q("SELECT * WHERE { ?x :p ?y OPTIONAL { ?x :q ?z FILTER(?z < 0) } }");
        let ans = answer(&query.pattern, &graph()).unwrap();
        assert_eq!(ans.len(), 2);
        assert!(ans.iter().all(|s| !s.contains_key("z")));
    }

    #[test]
    fn filter_unbound_is_unknown() {
        let query = q("SELECT * WHERE { ?x :p ?y OPTIONAL { ?x :q ?z } FILTER(!(?z = 1)) }");
        let ans = answer(&query.pattern, &graph()).unwrap();
        assert!(ans.is_empty());
        let query = q("SELECT * WHERE { ?x :p ?y OPTIONAL { ?x :q ?z } FILTER(!bound(?z)) }");
        assert_eq!(answer(&query.pattern, &graph()).unwrap().len(), 1);
    }

    #[test]
    fn mixed_order_filters_out() {
        let query = q("SELECT * WHERE { ?x :p ?y FILTER(?y < 3) }");
        assert!(answer(&query.pattern, &graph()).unwrap().is_empty());
    }

    #[test]
    fn union_bind_and_variable_predicates() {
        let query = q("SELECT * WHERE { { ?x :p ?y } UNION { ?x :q ?y } }");
        assert_eq!(answer(&query.pattern, &graph()).unwrap().len(), 3);
        let query = q("SELECT * WHERE { ?x ?p ?y BIND(7 AS ?k) }");
        let ans = answer(&query.pattern, &graph()).unwrap();
        assert_eq!(ans.len(), 3);
        assert!(ans.iter().all(|s| s.get("k") == Some(&Value::Int(7))));
        let query = q("SELECT * WHERE { ?x ?p ?x }");
        assert!(answer(&query.pattern, &graph()).unwrap().is_empty());
    }
}
