//! Key-based self-join elimination and inclusion-based union pruning.

use std::collections::{BTreeMap, BTreeSet};

use super::structural::{qualify, unqualify, Atom, UriLeaf};
use crate::relalg::{FilterExpr, RelExpr, Schema};

/// A single-table select-project-rename query.
#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub table: String,
    /// Conjuncts over table columns.
    pub cond: Vec<FilterExpr>,
    /// `(output name, column)`.
    pub outs: Vec<(String, String)>,
}

impl Scan {
    pub fn of(e: &RelExpr, schema: &Schema) -> Option<Scan> {
        match e {
            RelExpr::Base(t) => Some(Scan {
                table: t.clone(),
                cond: vec![],
                outs: schema.attrs(t).ok()?.iter().map(|c| (c.clone(), c.clone())).collect(),
            }),
            RelExpr::Rename(pairs, c) => {
                let mut s = Scan::of(c, schema)?;
                for (name, _) in s.outs.iter_mut() {
                    if let Some((new, _)) = pairs.iter().find(|(_, old)| old == name) {
                        *name = new.clone();
                    }
                }
                Some(s)
            }
            RelExpr::Project(attrs, c) => {
                let s = Scan::of(c, schema)?;
                let outs = attrs
                    .iter()
                    .map(|a| s.outs.iter().find(|(n, _)| n == a).cloned())
                    .collect::<Option<Vec<_>>>()?;
                Some(Scan { outs, ..s })
            }
            RelExpr::Select(f, c) => {
                let mut s = Scan::of(c, schema)?;
                let map: BTreeMap<String, String> = s.outs.iter().cloned().collect();
                if f.attrs().iter().any(|a| !map.contains_key(a)) {
                    return None;
                }
                let g = f.rename(&|a: &str| map[a].clone());
                for c in g.conjuncts() {
                    if !s.cond.contains(&c) {
                        s.cond.push(c);
                    }
                }
                Some(s)
            }
            _ => None,
        }
    }

    pub fn to_relexpr(&self) -> RelExpr {
        let cols: Vec<&str> = self.outs.iter().map(|(_, c)| c.as_str()).collect();
        RelExpr::rename(
            self.outs.iter().map(|(n, c)| (n.clone(), c.clone())).collect(),
            RelExpr::project(&cols, RelExpr::select(FilterExpr::and(self.cond.clone()), RelExpr::base(&self.table))),
        )
    }

    fn column_of(&self, out: &str) -> Option<&str> {
        self.outs.iter().find(|(n, _)| n == out).map(|(_, c)| c.as_str())
    }
}

fn rename_leaf(leaf: &UriLeaf, f: &dyn Fn(&str) -> String) -> UriLeaf {
    let on = leaf
        .on
        .iter()
        .map(|(x, y)| (f(x), f(y)))
        .filter(|(x, y)| x != y)
        .fold(Vec::new(), |mut acc: Vec<(String, String)>, p| {
            if !acc.contains(&p) && !acc.contains(&(p.1.clone(), p.0.clone())) {
                acc.push(p);
            }
            acc
        });
    UriLeaf {
        atoms: leaf.atoms.clone(),
        on,
        filter: leaf.filter.rename(&|a: &str| f(a)),
        terms: leaf.terms.iter().map(|(n, t)| (n.clone(), t.rename(|a| f(a)))).collect(),
        post: leaf.post.clone(),
        vars: leaf.vars.clone(),
    }
}

fn equated(leaf: &UriLeaf, x: &str, y: &str) -> bool {
    leaf.on.iter().any(|(a, b)| (a == x && b == y) || (a == y && b == x))
}

fn distinct_columns(s: &Scan) -> bool {
    let cols: BTreeSet<&String> = s.outs.iter().map(|(_, c)| c).collect();
    cols.len() == s.outs.len()
}

/// Merges one pair of atoms joined on a key of the same table.
fn merge_once(leaf: &UriLeaf, schema: &Schema) -> Option<UriLeaf> {
    let scans: Vec<Option<Scan>> = leaf.atoms.iter().map(|a| Scan::of(&a.body, schema).filter(distinct_columns)).collect();
    for i in 0..scans.len() {
        for j in i + 1..scans.len() {
            let (Some(si), Some(sj)) = (&scans[i], &scans[j]) else { continue };
            if si.table != sj.table {
                continue;
            }
            let key = schema.keys(&si.table).into_iter().find(|k| {
                k.iter().all(|col| {
                    let oi = si.outs.iter().find(|(_, c)| c == col);
                    let oj = sj.outs.iter().find(|(_, c)| c == col);
                    match (oi, oj) {
                        (Some((ni, _)), Some((nj, _))) => equated(leaf, &qualify(i, ni), &qualify(j, nj)),
                        _ => false,
                    }
                })
            });
            let Some(key) = key else { continue };
            let mut merged = si.clone();
            for c in sj.cond.iter().cloned().chain(key.iter().map(|k| FilterExpr::not(FilterExpr::IsNull(vec![k.clone()])))) {
                if !merged.cond.contains(&c) {
                    merged.cond.push(c);
                }
            }
            let mut map: BTreeMap<String, String> = BTreeMap::new();
            for (n, c) in &sj.outs {
                let target = match si.outs.iter().find(|(_, ci)| ci == c) {
                    Some((ni, _)) => ni.clone(),
                    None => {
                        let mut name = n.clone();
                        let mut k = 1;
                        while merged.outs.iter().any(|(m, _)| *m == name) {
                            name = format!("{n}_{k}");
                            k += 1;
                        }
                        merged.outs.push((name.clone(), c.clone()));
                        name
                    }
                };
                map.insert(n.clone(), target);
            }
            let f = |q: &str| -> String {
                match unqualify(q) {
                    Some((a, name)) if a == j => qualify(i, &map[name]),
                    Some((a, name)) if a > j => qualify(a - 1, name),
                    _ => q.to_string(),
                }
            };
            let mut out = rename_leaf(leaf, &f);
            out.atoms[i] = Atom { body: merged.to_relexpr(), attrs: merged.outs.iter().map(|(n, _)| n.clone()).collect() };
            out.atoms.remove(j);
            return Some(out);
        }
    }
    None
}

/// Removes self-joins on keys until none is left.
pub fn eliminate_self_joins(leaf: &UriLeaf, schema: &Schema) -> (UriLeaf, usize) {
    let mut cur = leaf.clone();
    let mut n = 0;
    while let Some(next) = merge_once(&cur, schema) {
        cur = next;
        n += 1;
    }
    (cur, n)
}

/// Column-level normal form of a single-scan leaf.
struct Canon {
    table: String,
    cond: Vec<FilterExpr>,
    filter: FilterExpr,
    terms: Vec<(String, crate::relalg::Template)>,
    post: FilterExpr,
    vars: Vec<String>,
}

fn canon(leaf: &UriLeaf, schema: &Schema) -> Option<Canon> {
    if leaf.atoms.len() != 1 || !leaf.on.is_empty() {
        return None;
    }
    let s = Scan::of(&leaf.atoms[0].body, schema)?;
    let col = |q: &str| -> Option<String> {
        let (_, name) = unqualify(q)?;
        s.column_of(name).map(|c| c.to_string())
    };
    let used: Vec<String> = leaf
        .filter
        .attrs()
        .into_iter()
        .chain(leaf.terms.iter().flat_map(|(_, t)| t.attrs().into_iter().map(|a| a.to_string())))
        .collect();
    if used.iter().any(|a| col(a).is_none()) {
        return None;
    }
    let f = |a: &str| col(a).unwrap();
    Some(Canon {
        table: s.table.clone(),
        cond: s.cond.clone(),
        filter: leaf.filter.rename(&f),
        terms: leaf.terms.iter().map(|(n, t)| (n.clone(), t.rename(f))).collect(),
        post: leaf.post.clone(),
        vars: leaf.vars.clone(),
    })
}

fn cond_columns(c: &FilterExpr) -> BTreeSet<String> {
    c.attrs()
}

/// Whether every answer of `a` is an answer of `b`, using equal tables or a declared inclusion.
fn subsumed(a: &Canon, b: &Canon, schema: &Schema) -> bool {
    if a.vars != b.vars || a.post != b.post || a.terms.len() != b.terms.len() {
        return false;
    }
    let mut maps: Vec<BTreeMap<String, String>> = Vec::new();
    if a.table == b.table {
        maps.push(BTreeMap::new());
    }
    for dep in &schema.inclusion_deps {
        if dep.lhs == a.table && dep.rhs == b.table {
            maps.push(dep.lhs_attrs.iter().cloned().zip(dep.rhs_attrs.iter().cloned()).collect());
        }
    }
    for m in maps {
        let identity = m.is_empty();
        let tr = |c: &str| -> Option<String> { if identity { Some(c.to_string()) } else { m.get(c).cloned() } };
        if !identity {
            let guarded = m.keys().all(|c| a.cond.contains(&FilterExpr::not(FilterExpr::IsNull(vec![c.clone()]))));
            if !guarded {
                continue;
            }
        }
        let mut used: BTreeSet<String> = cond_columns(&a.filter);
        for (_, t) in &a.terms {
            used.extend(t.attrs().into_iter().map(|s| s.to_string()));
        }
        if used.iter().any(|c| tr(c).is_none()) {
            continue;
        }
        let f = |c: &str| tr(c).unwrap();
        let terms: Vec<_> = a.terms.iter().map(|(n, t)| (n.clone(), t.rename(f))).collect();
        if terms != b.terms || a.filter.rename(&f) != b.filter {
            continue;
        }
        let back: BTreeMap<String, String> = if identity {
            BTreeMap::new()
        } else {
            m.iter().map(|(l, r)| (r.clone(), l.clone())).collect()
        };
        let implied = b.cond.iter().all(|c| {
            let cols = cond_columns(c);
            if !identity && cols.iter().any(|x| !back.contains_key(x)) {
                return false;
            }
            let g = if identity { c.clone() } else { c.rename(&|x: &str| back[x].clone()) };
            a.cond.contains(&g)
        });
        if implied {
            return true;
        }
    }
    false
}

/// Drops leaves whose answers are contained in another leaf's.
pub fn prune_subsumed(leaves: Vec<UriLeaf>, schema: &Schema) -> (Vec<UriLeaf>, usize) {
    let canons: Vec<Option<Canon>> = leaves.iter().map(|l| canon(l, schema)).collect();
    let mut dropped = vec![false; leaves.len()];
    for i in 0..leaves.len() {
        let Some(a) = &canons[i] else { continue };
        for j in 0..leaves.len() {
            if i == j || dropped[j] {
                continue;
            }
            let Some(b) = &canons[j] else { continue };
            if subsumed(a, b, schema) && !(subsumed(b, a, schema) && j > i) {
                dropped[i] = true;
                break;
            }
        }
    }
    let n = dropped.iter().filter(|d| **d).count();
    (leaves.into_iter().zip(dropped).filter(|(_, d)| !d).map(|(l, _)| l).collect(), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relalg::{evaluate, Instance, Template, Value};

    fn schema() -> Schema {
        Schema::parse("relation t(id int, a text, b text)\nkey t(id)\nrelation r(x int, y text)\ninclusion r(x) <= t(id)\n").unwrap()
    }

    fn scan(cols: &[&str], cond: Vec<FilterExpr>) -> RelExpr {
        Scan {
            table: "t".into(),
            cond,
            outs: cols.iter().map(|c| (c.to_string(), c.to_string())).collect(),
        }
        .to_relexpr()
    }

    fn instance() -> Instance {
        let s = schema();
        let mut inst = Instance::empty(&s);
        for (id, a, b) in [(1, "p", "q"), (2, "p", "r"), (3, "s", "q")] {
            inst.insert("t", vec![Value::Int(id), Value::text(a), Value::text(b)]).unwrap();
        }
        inst.insert("r", vec![Value::Int(1), Value::text("z")]).unwrap();
        inst
    }

    #[test]
    fn key_self_join_collapses() {
        let s = schema();
        let leaf = UriLeaf {
            atoms: vec![
                Atom { body: scan(&["id", "a"], vec![]), attrs: vec!["id".into(), "a".into()] },
                Atom {
                    body: scan(&["id", "b"], vec![FilterExpr::eq_const("b", Value::text("q"))]),
                    attrs: vec!["id".into(), "b".into()],
                },
            ],
            on: vec![("b0.id".into(), "b1.id".into())],
            filter: FilterExpr::True,
            terms: vec![
                ("?x".into(), Template::parse(":t-{b0.id}").unwrap()),
                ("?a".into(), Template::column("b0.a")),
                ("?b".into(), Template::column("b1.b")),
            ],
            post: FilterExpr::True,
            vars: vec!["?x".into(), "?a".into(), "?b".into()],
        };
        let (merged, n) = eliminate_self_joins(&leaf, &s);
        assert_eq!(n, 1);
        assert_eq!(merged.atoms.len(), 1);
        assert_eq!(merged.to_relexpr().op_counts().joins, 0);
        let inst = instance();
        assert_eq!(evaluate(&merged.to_relexpr(), &inst).unwrap(), evaluate(&leaf.to_relexpr(), &inst).unwrap());
    }

    #[test]
    fn inclusion_prunes_branch() {
        let s = schema();
        let mk = |table: &str, col: &str| UriLeaf {
            atoms: vec![Atom {
                body: Scan {
                    table: table.into(),
                    cond: vec![FilterExpr::not(FilterExpr::IsNull(vec![col.into()]))],
                    outs: vec![("k".into(), col.into())],
                }
                .to_relexpr(),
                attrs: vec!["k".into()],
            }],
            on: vec![],
            filter: FilterExpr::True,
            terms: vec![("?x".into(), Template::parse(":t-{b0.k}").unwrap())],
            post: FilterExpr::True,
            vars: vec!["?x".into()],
        };
        let (kept, n) = prune_subsumed(vec![mk("r", "x"), mk("t", "id")], &s);
        assert_eq!(n, 1);
        assert_eq!(kept, vec![mk("t", "id")]);
        let (kept, n) = prune_subsumed(vec![mk("t", "id"), mk("t", "id")], &s);
        assert_eq!((kept.len(), n), (1, 1));
    }
}
