//! Replacement of star and chain sub-BGPs by a single optimizing body.

use std::collections::BTreeSet;

use super::unfold::{Branch, Unit};
use crate::mapping::{Constraints, OceKind, PredicateGroup, SplitMappings, Vfd, VfdKind};
use crate::ontology::RDF_TYPE;
use crate::relalg::{FilterExpr, RelExpr, Template, Value};
use crate::sparql::{Term, TriplePattern};

/// A sub-BGP answered by one body.
#[derive(Clone, Debug, PartialEq)]
pub struct StarRewrite {
    pub name: String,
    pub vfd: Vfd,
    /// Indices of the triple patterns covered, including absorbed class atoms.
    pub atoms: Vec<usize>,
    pub unit: Unit,
    pub body: RelExpr,
}

/// Groups and optimizing body resolved for a VFD, or the reason it cannot be used.
#[derive(Clone, Debug)]
pub struct ResolvedVfd<'a> {
    pub groups: Vec<&'a PredicateGroup>,
    pub body: RelExpr,
    pub attrs: Vec<String>,
}

pub fn cte_name(vfd: &Vfd) -> String {
    let clean = |s: &str| -> String { s.chars().filter(|c| c.is_ascii_alphanumeric() || *c == '_').collect() };
    let first = clean(&vfd.properties[0]);
    let last = clean(vfd.properties.last().unwrap());
    if vfd.properties.len() == 1 {
        format!("vfd_{first}")
    } else {
        format!("vfd_{first}_{last}")
    }
}

/// Checks the static preconditions of a VFD against the split T-mappings.
pub fn resolve<'a>(
    vfd: &Vfd,
    split: &'a SplitMappings,
    attrs_of: &dyn Fn(&RelExpr) -> Vec<String>,
) -> Result<ResolvedVfd<'a>, String> {
    let mut groups = Vec::new();
    for p in &vfd.properties {
        let pieces = split.pieces(p);
        match pieces.as_slice() {
            [] => return Err(format!("{p} has no mapping")),
            [g] if g.is_class() => return Err(format!("{p} is a class")),
            [g] => groups.push(*g),
            _ => return Err(format!("{p} has several template pairs")),
        }
    }
    match vfd.kind {
        VfdKind::Branching => {
            for g in &groups {
                if !g.subject.compatible(&vfd.template) {
                    return Err(format!("subject template of {} differs from {}", g.original, vfd.template));
                }
            }
        }
        VfdKind::Path => {
            if !groups[0].subject.compatible(&vfd.template) {
                return Err(format!("subject template of {} differs from {}", groups[0].original, vfd.template));
            }
            for w in groups.windows(2) {
                let r = w[0].object.as_ref().expect("property group");
                if !r.compatible(&w[1].subject) {
                    return Err(format!("range of {} does not chain into {}", w[0].original, w[1].original));
                }
            }
        }
    }
    let body = groups[0].merged_body().ok_or_else(|| format!("mappings of {} cannot be merged", groups[0].original))?;
    let attrs = attrs_of(&body);
    let mut needed: Vec<&str> = groups[0].subject.attrs();
    for g in &groups {
        needed.extend(g.object.as_ref().expect("property group").attrs());
    }
    for a in &needed {
        if !attrs.iter().any(|x| x == a) {
            return Err(format!("optimizing body of {} lacks attribute {a}", groups[0].original));
        }
    }
    if vfd.kind == VfdKind::Path {
        let set: BTreeSet<&&str> = needed.iter().collect();
        if set.len() != needed.len() {
            return Err("path attributes are not distinct".into());
        }
    }
    let body = RelExpr::select(FilterExpr::not_null(&needed), body);
    Ok(ResolvedVfd { groups, body, attrs })
}

fn is_type(t: &Term) -> bool {
    matches!(t, Term::Const(Value::Iri(p)) if p.as_ref() == RDF_TYPE)
}

fn class_of(tp: &TriplePattern) -> Option<&str> {
    match (&tp.o, is_type(&tp.p)) {
        (Term::Const(Value::Iri(c)), true) => Some(c),
        _ => None,
    }
}

fn prop_of(tp: &TriplePattern) -> Option<&str> {
    match &tp.p {
        Term::Const(Value::Iri(p)) if p.as_ref() != RDF_TYPE => Some(p),
        _ => None,
    }
}

fn covered(constraints: &Constraints, kind: OceKind, property: &str, class: &str) -> bool {
    constraints.oces.iter().any(|o| o.kind == kind && o.property == property && o.class == class)
}

/// Plans star and chain rewrites for one BGP; returns rewrites and diagnostic notes.
pub fn plan(
    tps: &[TriplePattern],
    constraints: &Constraints,
    split: &SplitMappings,
    attrs_of: &dyn Fn(&RelExpr) -> Vec<String>,
) -> (Vec<StarRewrite>, Vec<String>) {
    let mut order: Vec<usize> = (0..constraints.vfds.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(constraints.vfds[i].properties.len()), i));
    let mut claimed: BTreeSet<usize> = BTreeSet::new();
    let mut out = Vec::new();
    let mut notes = Vec::new();
    for i in order {
        let vfd = &constraints.vfds[i];
        let relevant = tps.iter().any(|tp| prop_of(tp) == Some(vfd.properties[0].as_str()));
        if !relevant {
            continue;
        }
        let resolved = match resolve(vfd, split, attrs_of) {
            Ok(r) => r,
            Err(e) => {
                notes.push(format!("{vfd}: skipped, {e}"));
                continue;
            }
        };
        let found = match vfd.kind {
            VfdKind::Branching => branching(tps, vfd, &resolved, constraints, &mut claimed, &mut notes),
            VfdKind::Path => path(tps, vfd, &resolved, constraints, &mut claimed),
        };
        out.extend(found);
    }
    (out, notes)
}

fn object_template<'a>(r: &'a ResolvedVfd, p: &str) -> &'a Template {
    let g = r.groups.iter().find(|g| g.original == p).expect("property of the VFD");
    g.object.as_ref().expect("property group")
}

fn make_rewrite(
    vfd: &Vfd,
    r: &ResolvedVfd,
    tps: &[TriplePattern],
    atoms: Vec<usize>,
    positions: Vec<(Term, Template)>,
) -> StarRewrite {
    let branch = Branch { body: r.body.clone(), attrs: r.attrs.clone(), positions };
    let vars = branch.vars();
    let label = atoms.iter().map(|&i| tps[i].to_string()).collect::<Vec<_>>().join(" . ");
    StarRewrite {
        name: cte_name(vfd),
        vfd: vfd.clone(),
        atoms,
        unit: Unit { label, vars, branches: vec![branch] },
        body: r.body.clone(),
    }
}

fn branching(
    tps: &[TriplePattern],
    vfd: &Vfd,
    r: &ResolvedVfd,
    constraints: &Constraints,
    claimed: &mut BTreeSet<usize>,
    notes: &mut Vec<String>,
) -> Vec<StarRewrite> {
    let mut subjects: Vec<&Term> = Vec::new();
    for (i, tp) in tps.iter().enumerate() {
        if !claimed.contains(&i) && prop_of(tp) == Some(vfd.properties[0].as_str()) && tp.s.var().is_some() && !subjects.contains(&&tp.s) {
            subjects.push(&tp.s);
        }
    }
    let mut out = Vec::new();
    for v in subjects {
        let free: Vec<usize> = (0..tps.len()).filter(|i| !claimed.contains(i) && tps[*i].s == *v).collect();
        let props: Vec<usize> = free.iter().copied().filter(|&i| !is_type(&tps[i].p)).collect();
        if props.iter().any(|&i| prop_of(&tps[i]).is_none_or(|p| !vfd.properties.iter().any(|q| q == p))) {
            notes.push(format!("{vfd}: star on {v} has properties outside the dependency"));
            continue;
        }
        let in_star: Vec<&str> = props.iter().filter_map(|&i| prop_of(&tps[i])).collect();
        let mut atoms = props.clone();
        let mut blocked = false;
        for &i in &free {
            if let Some(c) = class_of(&tps[i]) {
                if in_star.iter().any(|p| covered(constraints, OceKind::Domain, p, c)) {
                    atoms.push(i);
                } else {
                    notes.push(format!("{vfd}: class atom {} is not covered", tps[i]));
                    blocked = true;
                }
            } else if is_type(&tps[i].p) {
                blocked = true;
            }
        }
        if blocked {
            continue;
        }
        let objects: Vec<(&Term, &str)> = props.iter().map(|&i| (&tps[i].o, prop_of(&tps[i]).unwrap())).collect();
        for (i, tp) in tps.iter().enumerate() {
            if claimed.contains(&i) || atoms.contains(&i) {
                continue;
            }
            if let Some(c) = class_of(tp) {
                if objects.iter().any(|(o, p)| **o == tp.s && covered(constraints, OceKind::Range, p, c)) {
                    atoms.push(i);
                }
            }
        }
        let mut positions = vec![(v.clone(), r.groups[0].subject.clone())];
        for (o, p) in &objects {
            positions.push(((*o).clone(), object_template(r, p).clone()));
        }
        atoms.sort();
        claimed.extend(atoms.iter().copied());
        out.push(make_rewrite(vfd, r, tps, atoms, positions));
    }
    out
}

fn path(
    tps: &[TriplePattern],
    vfd: &Vfd,
    r: &ResolvedVfd,
    constraints: &Constraints,
    claimed: &mut BTreeSet<usize>,
) -> Vec<StarRewrite> {
    let mut out = Vec::new();
    loop {
        let mut chain: Option<Vec<usize>> = None;
        for start in 0..tps.len() {
            if claimed.contains(&start) || prop_of(&tps[start]) != Some(vfd.properties[0].as_str()) {
                continue;
            }
            let mut c = vec![start];
            for p in &vfd.properties[1..] {
                let prev = &tps[*c.last().unwrap()].o;
                let next = (0..tps.len()).find(|j| {
                    !claimed.contains(j) && !c.contains(j) && prop_of(&tps[*j]) == Some(p.as_str()) && tps[*j].s == *prev
                });
                match next {
                    Some(j) if prev.var().is_some() => c.push(j),
                    _ => break,
                }
            }
            if c.len() == vfd.properties.len() {
                chain = Some(c);
                break;
            }
        }
        let Some(c) = chain else { break };
        let mut atoms = c.clone();
        let mut positions = vec![(tps[c[0]].s.clone(), r.groups[0].subject.clone())];
        for (k, &i) in c.iter().enumerate() {
            positions.push((tps[i].o.clone(), r.groups[k].object.clone().expect("property group")));
        }
        for (j, tp) in tps.iter().enumerate() {
            if claimed.contains(&j) || atoms.contains(&j) {
                continue;
            }
            if let Some(cls) = class_of(tp) {
                let hit = c.iter().any(|&i| {
                    let p = prop_of(&tps[i]).unwrap();
                    (tps[i].s == tp.s && covered(constraints, OceKind::Domain, p, cls))
                        || (tps[i].o == tp.s && covered(constraints, OceKind::Range, p, cls))
                });
                if hit {
                    atoms.push(j);
                }
            }
        }
        atoms.sort();
        claimed.extend(atoms.iter().copied());
        out.push(make_rewrite(vfd, r, tps, atoms, positions));
    }
    out
}
