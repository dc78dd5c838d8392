//! Extensional checks of branching and path VFDs over one instance.

use std::collections::{BTreeMap, BTreeSet};

use crate::mapping::{PredicateGroup, SplitMappings, Vfd, VfdKind};
use crate::relalg::{containment_witness, evaluate, fd_violation, Instance, RelError, Relation, Schema, Tuple, Value};
use crate::translator::vfd::resolve;

/// Why a candidate failed, with an offending tuple when there is one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub reason: String,
    pub witness: Option<String>,
}

impl Violation {
    fn new(reason: impl Into<String>) -> Violation {
        Violation { reason: reason.into(), witness: None }
    }
}

fn show(t: &[Value]) -> String {
    format!("({})", t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))
}

/// Evaluated merged bodies, keyed by group name.
pub struct Bodies<'a> {
    pub split: &'a SplitMappings,
    inst: &'a Instance,
    cache: BTreeMap<String, Relation>,
}

impl<'a> Bodies<'a> {
    pub fn new(split: &'a SplitMappings, inst: &'a Instance) -> Bodies<'a> {
        Bodies { split, inst, cache: BTreeMap::new() }
    }

    pub fn relation(&mut self, g: &PredicateGroup) -> Result<Relation, Violation> {
        if let Some(r) = self.cache.get(&g.name) {
            return Ok(r.clone());
        }
        let body = g.merged_body().ok_or_else(|| Violation::new(format!("mappings of {} cannot be merged", g.original)))?;
        let r = evaluate(&body, self.inst).map_err(|e| Violation::new(e.to_string()))?;
        self.cache.insert(g.name.clone(), r.clone());
        Ok(r)
    }
}

fn attrs(t: &crate::relalg::Template) -> Vec<String> {
    t.attrs().iter().map(|s| s.to_string()).collect()
}

fn rel_err(e: RelError) -> Violation {
    Violation::new(e.to_string())
}

/// Checks the dependency and its optimizing containments; returns evidence lines.
pub fn check_vfd(vfd: &Vfd, schema: &Schema, bodies: &mut Bodies) -> Result<Vec<String>, Violation> {
    let attrs_of = |e: &crate::relalg::RelExpr| e.attrs(schema).unwrap_or_default();
    let r = resolve(vfd, bodies.split, &attrs_of).map_err(Violation::new)?;
    let groups: Vec<PredicateGroup> = r.groups.iter().map(|g| (*g).clone()).collect();
    match vfd.kind {
        VfdKind::Branching => branching(&groups, bodies),
        VfdKind::Path => path(&groups, bodies),
    }
}

fn branching(groups: &[PredicateGroup], bodies: &mut Bodies) -> Result<Vec<String>, Violation> {
    let mut evidence = Vec::new();
    let r1 = bodies.relation(&groups[0])?;
    let x1 = attrs(&groups[0].subject);
    for g in groups {
        let ri = bodies.relation(g)?;
        let xi = attrs(&g.subject);
        let yi = attrs(g.object.as_ref().expect("property group"));
        if let Some((a, b)) = fd_violation(&ri, &xi, &yi).map_err(rel_err)? {
            return Err(Violation {
                reason: format!("{} is not functional: {} -> {} fails", g.original, xi.join(","), yi.join(",")),
                witness: Some(format!("{} {}", show(&a), show(&b))),
            });
        }
        evidence.push(format!("fd {} -> {} holds on {} ({} rows)", xi.join(","), yi.join(","), g.original, ri.len()));
        let same_body = g.merged_body() == groups[0].merged_body() && xi == x1;
        if same_body {
            evidence.push(format!("containment into {} is trivial (same body)", g.original));
            continue;
        }
        let map: Vec<(String, String)> = x1.iter().cloned().zip(xi.iter().cloned()).chain(yi.iter().map(|y| (y.clone(), y.clone()))).collect();
        if let Some(w) = containment_witness(&r1, &ri, &map).map_err(rel_err)? {
            return Err(Violation {
                reason: format!("optimizing body of {} is not contained in {}", groups[0].original, g.original),
                witness: Some(show(&w)),
            });
        }
        evidence.push(format!("containment {} into {} holds ({} rows)", groups[0].original, g.original, r1.len()));
    }
    Ok(evidence)
}

/// The chain join `sql_1 ⋈ sql_2 ⋈ ...` on consecutive object and subject attributes, as rows `x1, y1, .., yn`.
pub fn chain_join(groups: &[PredicateGroup], bodies: &mut Bodies) -> Result<Relation, Violation> {
    let first = bodies.relation(&groups[0])?;
    let x1 = attrs(&groups[0].subject);
    let y1 = attrs(groups[0].object.as_ref().expect("property group"));
    let idx = first.indices(&[x1.clone(), y1.clone()].concat()).map_err(rel_err)?;
    let mut rows: Vec<Tuple> = first.iter().map(|t| idx.iter().map(|&i| t[i].clone()).collect()).collect();
    let mut names: Vec<String> = x1.iter().map(|a| format!("x.{a}")).collect();
    names.extend(y1.iter().map(|a| format!("y1.{a}")));
    let mut prev_arity = y1.len();
    for (k, g) in groups.iter().enumerate().skip(1) {
        let ri = bodies.relation(g)?;
        let xi = attrs(&g.subject);
        let yi = attrs(g.object.as_ref().expect("property group"));
        let (xs, ys) = (ri.indices(&xi).map_err(rel_err)?, ri.indices(&yi).map_err(rel_err)?);
        let mut index: BTreeMap<Vec<Value>, BTreeSet<Vec<Value>>> = BTreeMap::new();
        for t in ri.iter() {
            index.entry(xs.iter().map(|&i| t[i].clone()).collect()).or_default().insert(ys.iter().map(|&i| t[i].clone()).collect());
        }
        let mut next = Vec::new();
        for r in &rows {
            let key = &r[r.len() - prev_arity..];
            if key.iter().any(Value::is_null) {
                continue;
            }
            if let Some(ext) = index.get(key) {
                for e in ext {
                    let mut t = r.clone();
                    t.extend(e.iter().cloned());
                    next.push(t);
                }
            }
        }
        rows = next;
        names.extend(yi.iter().map(|a| format!("y{}.{a}", k + 1)));
        prev_arity = yi.len();
    }
    Ok(Relation::from_rows(&names, rows))
}

fn path(groups: &[PredicateGroup], bodies: &mut Bodies) -> Result<Vec<String>, Violation> {
    let q = chain_join(groups, bodies)?;
    let x: Vec<String> = q.attrs().iter().filter(|a| a.starts_with("x.")).cloned().collect();
    let y: Vec<String> = q.attrs().iter().filter(|a| !a.starts_with("x.")).cloned().collect();
    if let Some((a, b)) = fd_violation(&q, &x, &y).map_err(rel_err)? {
        return Err(Violation {
            reason: "the chain is not functional in its first subject".into(),
            witness: Some(format!("{} {}", show(&a), show(&b))),
        });
    }
    let mut evidence = vec![format!("fd on the chain join holds ({} rows)", q.len())];
    let r1 = bodies.relation(&groups[0])?;
    let mut src: Vec<String> = attrs(&groups[0].subject);
    for g in groups {
        src.extend(attrs(g.object.as_ref().expect("property group")));
    }
    let map: Vec<(String, String)> = src.into_iter().zip(q.attrs().iter().cloned()).collect();
    if let Some(w) = containment_witness(&r1, &q, &map).map_err(rel_err)? {
        return Err(Violation {
            reason: format!("optimizing body of {} is not contained in the chain join", groups[0].original),
            witness: Some(show(&w)),
        });
    }
    evidence.push(format!("containment of {} into the chain join holds ({} rows)", groups[0].original, r1.len()));
    Ok(evidence)
}

/// Compares `π(sql_1)` with the join the dependency replaces; true when they coincide.
pub fn lemma_identity(vfd: &Vfd, schema: &Schema, bodies: &mut Bodies) -> Result<bool, Violation> {
    let attrs_of = |e: &crate::relalg::RelExpr| e.attrs(schema).unwrap_or_default();
    let r = resolve(vfd, bodies.split, &attrs_of).map_err(Violation::new)?;
    let groups: Vec<PredicateGroup> = r.groups.iter().map(|g| (*g).clone()).collect();
    let r1 = bodies.relation(&groups[0])?;
    let mut src: Vec<String> = attrs(&groups[0].subject);
    for g in &groups {
        src.extend(attrs(g.object.as_ref().expect("property group")));
    }
    let idx = r1.indices(&src).map_err(rel_err)?;
    let projected: BTreeSet<Tuple> = r1.iter().map(|t| idx.iter().map(|&i| t[i].clone()).collect()).collect();
    let joined: BTreeSet<Tuple> = match vfd.kind {
        VfdKind::Path => chain_join(&groups, bodies)?.iter().cloned().collect(),
        VfdKind::Branching => {
            let mut per: Vec<BTreeMap<Vec<Value>, BTreeSet<Vec<Value>>>> = Vec::new();
            for g in &groups {
                let ri = bodies.relation(g)?;
                let xs = ri.indices(&attrs(&g.subject)).map_err(rel_err)?;
                let ys = ri.indices(&attrs(g.object.as_ref().expect("property group"))).map_err(rel_err)?;
                let mut m: BTreeMap<Vec<Value>, BTreeSet<Vec<Value>>> = BTreeMap::new();
                for t in ri.iter() {
                    m.entry(xs.iter().map(|&i| t[i].clone()).collect()).or_default().insert(ys.iter().map(|&i| t[i].clone()).collect());
                }
                per.push(m);
            }
            let mut out = BTreeSet::new();
            for (x, ys1) in &per[0] {
                let mut acc: Vec<Tuple> = ys1.iter().map(|y| [x.clone(), y.clone()].concat()).collect();
                for m in &per[1..] {
                    let Some(ys) = m.get(x) else {
                        acc.clear();
                        break;
                    };
                    acc = acc.iter().flat_map(|t| ys.iter().map(move |y| [t.clone(), y.clone()].concat())).collect();
                }
                out.extend(acc);
            }
            out
        }
    };
    Ok(projected == joined)
}
