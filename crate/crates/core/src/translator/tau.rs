//! Inductive translation of graph patterns into relational algebra over variable attributes.

use std::collections::BTreeSet;

use crate::relalg::{FilterExpr, Operand, RelExpr, Value};
use crate::sparql::{var_attr, Condition, GraphPattern, Term, TriplePattern};

/// A translated pattern: its expression over `?v` attributes and static binding facts.
#[derive(Clone, Debug)]
pub struct Translated {
    pub expr: RelExpr,
    pub vars: Vec<String>,
    /// Variables bound in every tuple.
    pub certain: BTreeSet<String>,
    /// Variables null in every tuple.
    pub null: BTreeSet<String>,
}

fn attrs(vars: &[String]) -> Vec<String> {
    vars.iter().map(|v| var_attr(v)).collect()
}

fn operand(t: &Term, vars: &[String]) -> Operand {
    match t {
        Term::Var(v) if vars.contains(v) => Operand::Attr(var_attr(v)),
        Term::Var(_) => Operand::Const(Value::Null),
        Term::Const(c) => Operand::Const(c.clone()),
    }
}

/// Filter condition over variable attributes; variables outside `vars` are unbound.
pub fn condition_filter(c: &Condition, vars: &[String]) -> FilterExpr {
    match c {
        Condition::True => FilterExpr::True,
        Condition::Eq(a, b) => FilterExpr::Eq(operand(a, vars), operand(b, vars)),
        Condition::Lt(a, b) => FilterExpr::Lt(operand(a, vars), operand(b, vars)),
        Condition::Bound(v) if vars.contains(v) => FilterExpr::not(FilterExpr::IsNull(vec![var_attr(v)])),
        Condition::Bound(_) => FilterExpr::not(FilterExpr::True),
        Condition::Not(x) => FilterExpr::not(condition_filter(x, vars)),
        Condition::And(xs) => FilterExpr::And(xs.iter().map(|x| condition_filter(x, vars)).collect()),
        Condition::Or(xs) => FilterExpr::Or(xs.iter().map(|x| condition_filter(x, vars)).collect()),
    }
}

fn bound_facts(c: &Condition) -> (BTreeSet<String>, BTreeSet<String>) {
    let (mut pos, mut neg) = (BTreeSet::new(), BTreeSet::new());
    let parts: Vec<&Condition> = match c {
        Condition::And(xs) => xs.iter().collect(),
        x => vec![x],
    };
    for p in parts {
        match p {
            Condition::Bound(v) => {
                pos.insert(v.clone());
            }
            Condition::Not(x) => {
                if let Condition::Bound(v) = x.as_ref() {
                    neg.insert(v.clone());
                }
            }
            Condition::Eq(a, b) | Condition::Lt(a, b) => {
                for t in [a, b] {
                    if let Term::Var(v) = t {
                        pos.insert(v.clone());
                    }
                }
            }
            _ => {}
        }
    }
    (pos, neg)
}

fn union_vars(a: &[String], b: &[String]) -> Vec<String> {
    let mut out = a.to_vec();
    for v in b {
        if !out.contains(v) {
            out.push(v.clone());
        }
    }
    out
}

fn pad(t: &Translated, all: &[String]) -> RelExpr {
    let missing: Vec<String> = all.iter().filter(|v| !t.vars.contains(v)).map(|v| var_attr(v)).collect();
    RelExpr::padding(missing, t.expr.clone())
}

fn subsets(items: &[String]) -> Vec<Vec<String>> {
    let mut out = vec![vec![]];
    for it in items {
        let more: Vec<Vec<String>> = out
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.push(it.clone());
                s
            })
            .collect();
        out.extend(more);
    }
    out
}

fn null_side(t: &Translated, nulls: &[String]) -> RelExpr {
    if nulls.is_empty() {
        return t.expr.clone();
    }
    let keep: Vec<String> = t.vars.iter().filter(|v| !nulls.contains(v)).map(|v| var_attr(v)).collect();
    let cond = FilterExpr::and(nulls.iter().map(|v| FilterExpr::IsNull(vec![var_attr(v)])).collect());
    RelExpr::project(&keep, RelExpr::select(cond, t.expr.clone()))
}

/// Join with the null-case union over shared variables that may be unbound.
pub fn join(a: &Translated, b: &Translated) -> Translated {
    let vars = union_vars(&a.vars, &b.vars);
    let shared: Vec<String> = a.vars.iter().filter(|v| b.vars.contains(v)).cloned().collect();
    let mut forced_a = Vec::new();
    let mut forced_b = Vec::new();
    let mut free_a = Vec::new();
    let mut free_b = Vec::new();
    for v in &shared {
        if a.null.contains(v) {
            forced_a.push(v.clone());
        } else if b.null.contains(v) {
            forced_b.push(v.clone());
        } else {
            if !a.certain.contains(v) {
                free_a.push(v.clone());
            }
            if !b.certain.contains(v) {
                free_b.push(v.clone());
            }
        }
    }
    let mut branches = Vec::new();
    for sa in subsets(&free_a) {
        for sb in subsets(&free_b) {
            if sa.iter().any(|v| sb.contains(v)) {
                continue;
            }
            let va: Vec<String> = forced_a.iter().chain(&sa).cloned().collect();
            let vb: Vec<String> = forced_b.iter().chain(&sb).cloned().collect();
            branches.push(RelExpr::NaturalJoin(vec![null_side(a, &va), null_side(b, &vb)]));
        }
    }
    let certain: BTreeSet<String> = a.certain.union(&b.certain).cloned().collect();
    let null: BTreeSet<String> = vars
        .iter()
        .filter(|v| {
            (a.null.contains(*v) || !a.vars.contains(v)) && (b.null.contains(*v) || !b.vars.contains(v))
        })
        .cloned()
        .collect();
    Translated { expr: RelExpr::union(branches, &attrs(&vars)), vars, certain, null }
}

fn filter(t: Translated, c: &Condition) -> Translated {
    let f = condition_filter(c, &t.vars);
    let (pos, neg) = bound_facts(c);
    let mut certain = t.certain;
    certain.extend(pos.into_iter().filter(|v| t.vars.contains(v)));
    let mut null = t.null;
    null.extend(neg.into_iter().filter(|v| t.vars.contains(v)));
    Translated { expr: RelExpr::select(f, t.expr), vars: t.vars, certain, null }
}

fn union(a: &Translated, b: &Translated) -> Translated {
    let vars = union_vars(&a.vars, &b.vars);
    let expr = RelExpr::Union(vec![pad(a, &vars), pad(b, &vars)]);
    let certain = a.certain.intersection(&b.certain).cloned().collect();
    let null = vars
        .iter()
        .filter(|v| {
            (a.null.contains(*v) || !a.vars.contains(v)) && (b.null.contains(*v) || !b.vars.contains(v))
        })
        .cloned()
        .collect();
    Translated { expr, vars, certain, null }
}

fn optional(a: &Translated, b: &Translated, c: &Condition) -> Translated {
    let vars = union_vars(&a.vars, &b.vars);
    let matched = filter(join(a, b), c);
    let shared: Vec<String> = a.vars.iter().filter(|v| b.vars.contains(v)).cloned().collect();
    let open: Vec<String> = shared.iter().filter(|v| !a.certain.contains(*v)).cloned().collect();
    let mut parts = Vec::new();
    for v1 in subsets(&open) {
        if shared.iter().any(|v| !v1.contains(v) && a.null.contains(v)) {
            continue;
        }
        let cond = FilterExpr::and(
            shared
                .iter()
                .map(|v| {
                    let isnull = FilterExpr::IsNull(vec![var_attr(v)]);
                    if v1.contains(v) {
                        isnull
                    } else {
                        FilterExpr::not(isnull)
                    }
                })
                .collect(),
        );
        let mut certain = a.certain.clone();
        certain.extend(shared.iter().filter(|v| !v1.contains(v)).cloned());
        let mut null = a.null.clone();
        null.extend(v1.iter().cloned());
        let restricted = Translated { expr: RelExpr::select(cond, a.expr.clone()), vars: a.vars.clone(), certain, null };
        let j = filter(join(&restricted, b), c);
        let keep: Vec<String> = a.vars.iter().filter(|v| !v1.contains(v)).map(|v| var_attr(v)).collect();
        parts.push(RelExpr::padding(
            v1.iter().map(|v| var_attr(v)).collect(),
            RelExpr::project(&keep, j.expr),
        ));
    }
    let a_attrs = attrs(&a.vars);
    let extended = RelExpr::union(parts, &a_attrs);
    let missing: Vec<String> = vars.iter().filter(|v| !a.vars.contains(v)).map(|v| var_attr(v)).collect();
    let unmatched = RelExpr::padding(missing, RelExpr::Difference(Box::new(a.expr.clone()), Box::new(extended)));
    let null = a.null.iter().filter(|v| !b.vars.contains(v)).cloned().collect();
    Translated {
        expr: RelExpr::Union(vec![matched.expr, unmatched]),
        vars,
        certain: a.certain.clone(),
        null,
    }
}

/// Translates a pattern, compiling each BGP with `leaf`; the leaf result must range over the BGP's `?v` attributes.
pub fn translate_with<E>(
    p: &GraphPattern,
    leaf: &mut dyn FnMut(&[TriplePattern]) -> Result<RelExpr, E>,
) -> Result<Translated, E> {
    Ok(match p {
        GraphPattern::Bgp(tps) => {
            let vars = p.vars();
            let expr = if tps.is_empty() { RelExpr::unit() } else { leaf(tps)? };
            Translated { expr, certain: vars.iter().cloned().collect(), vars, null: BTreeSet::new() }
        }
        GraphPattern::Filter(q, c) => filter(translate_with(q, leaf)?, c),
        GraphPattern::Bind(q, v, c) => {
            let t = translate_with(q, leaf)?;
            let mut vars = t.vars.clone();
            vars.push(v.clone());
            let mut certain = t.certain.clone();
            certain.insert(v.clone());
            let values = RelExpr::Values { attrs: vec![var_attr(v)], rows: vec![vec![c.clone()]] };
            Translated { expr: RelExpr::NaturalJoin(vec![t.expr, values]), vars, certain, null: t.null }
        }
        GraphPattern::Union(a, b) => union(&translate_with(a, leaf)?, &translate_with(b, leaf)?),
        GraphPattern::Join(a, b) => join(&translate_with(a, leaf)?, &translate_with(b, leaf)?),
        GraphPattern::Opt(a, b, c) => optional(&translate_with(a, leaf)?, &translate_with(b, leaf)?, c),
    })
}

/// Translation of a single triple pattern over the ternary relation `triple(subj, pred, obj)`.
pub fn triple_leaf(tp: &TriplePattern) -> RelExpr {
    let cols = ["subj", "pred", "obj"];
    let mut conds = Vec::new();
    let mut first: Vec<(String, &str)> = Vec::new();
    for (t, col) in tp.terms().into_iter().zip(cols) {
        match t {
            Term::Const(c) => conds.push(FilterExpr::eq_const(col, c.clone())),
            Term::Var(v) => match first.iter().find(|(w, _)| w == v) {
                Some((_, c0)) => conds.push(FilterExpr::eq_attrs(c0, col)),
                None => first.push((v.clone(), col)),
            },
        }
    }
    let kept: Vec<&str> = first.iter().map(|(_, c)| *c).collect();
    RelExpr::rename(
        first.iter().map(|(v, c)| (var_attr(v), c.to_string())).collect(),
        RelExpr::project(&kept, RelExpr::select(FilterExpr::and(conds), RelExpr::base("triple"))),
    )
}

/// The reference translation over `triple(subj, pred, obj)`.
pub fn tau(p: &GraphPattern) -> RelExpr {
    let mut leaf = |tps: &[TriplePattern]| -> Result<RelExpr, std::convert::Infallible> {
        Ok(if tps.len() == 1 { triple_leaf(&tps[0]) } else { RelExpr::NaturalJoin(tps.iter().map(triple_leaf).collect()) })
    };
    match translate_with(p, &mut leaf) {
        Ok(t) => t.expr,
        Err(e) => match e {},
    }
}
