//! Union-of-joins normalization, template pruning and URI hoisting.

use std::collections::BTreeSet;

use super::unfold::{Branch, Unit};
use crate::relalg::{FilterExpr, Operand, RelExpr, Segment, Template, TermKind};
use crate::sparql::{var_attr, Term};

/// A source body joined inside a leaf under alias `b{i}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub body: RelExpr,
    pub attrs: Vec<String>,
}

pub fn qualify(i: usize, a: &str) -> String {
    format!("b{i}.{a}")
}

/// Atom index and bare attribute of a qualified name.
pub fn unqualify(q: &str) -> Option<(usize, &str)> {
    let rest = q.strip_prefix('b')?;
    let (i, a) = rest.split_once('.')?;
    Some((i.parse().ok()?, a))
}

/// A join of atoms at the attribute level with URI construction on top.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UriLeaf {
    pub atoms: Vec<Atom>,
    /// Equalities between qualified attributes.
    pub on: Vec<(String, String)>,
    /// Condition over qualified attributes.
    pub filter: FilterExpr,
    /// Constructed attributes, in order.
    pub terms: Vec<(String, Template)>,
    /// Condition over constructed attributes.
    pub post: FilterExpr,
    pub vars: Vec<String>,
}

impl UriLeaf {
    pub fn core(&self) -> RelExpr {
        let mut on: Vec<(String, String)> = self.on.clone();
        let mut same_atom = Vec::new();
        let mut core: Option<RelExpr> = None;
        for (i, atom) in self.atoms.iter().enumerate() {
            let scan = RelExpr::rename(
                atom.attrs.iter().map(|a| (qualify(i, a), a.clone())).collect(),
                atom.body.clone(),
            );
            core = Some(match core {
                None => scan,
                Some(left) => {
                    let mut pairs = Vec::new();
                    on.retain(|(x, y)| {
                        let (ix, iy) = (unqualify(x).map(|p| p.0), unqualify(y).map(|p| p.0));
                        match (ix, iy) {
                            (Some(a), Some(b)) if a == i && b < i => pairs.push((y.clone(), x.clone())),
                            (Some(a), Some(b)) if b == i && a < i => pairs.push((x.clone(), y.clone())),
                            _ => return true,
                        }
                        false
                    });
                    RelExpr::EquiJoin { left: Box::new(left), right: Box::new(scan), on: pairs }
                }
            });
        }
        for (x, y) in on {
            same_atom.push(FilterExpr::eq_attrs(&x, &y));
        }
        let mut conds = same_atom;
        conds.push(self.filter.clone());
        RelExpr::select(FilterExpr::and(conds), core.unwrap_or_else(RelExpr::unit))
    }

    pub fn to_relexpr(&self) -> RelExpr {
        let mut e = self.core();
        for (target, t) in &self.terms {
            e = RelExpr::uri(target, t.clone(), e);
        }
        RelExpr::project(&self.vars, RelExpr::select(self.post.clone(), e))
    }
}

/// Compiled form of one BGP.
#[derive(Clone, Debug, PartialEq)]
pub enum BgpPlan {
    /// Join of unions, as unfolded.
    Raw { vars: Vec<String>, units: Vec<Unit> },
    /// Union of hoisted leaves.
    Leaves { vars: Vec<String>, leaves: Vec<UriLeaf> },
}

impl BgpPlan {
    pub fn vars(&self) -> &[String] {
        match self {
            BgpPlan::Raw { vars, .. } | BgpPlan::Leaves { vars, .. } => vars,
        }
    }

    pub fn to_relexpr(&self) -> RelExpr {
        let attrs: Vec<String> = self.vars().iter().map(|v| var_attr(v)).collect();
        match self {
            BgpPlan::Raw { units, .. } => {
                let parts: Vec<RelExpr> = units.iter().map(Unit::to_relexpr).collect();
                match parts.len() {
                    0 => RelExpr::unit(),
                    1 => parts.into_iter().next().unwrap(),
                    _ => RelExpr::NaturalJoin(parts),
                }
            }
            BgpPlan::Leaves { leaves, .. } => RelExpr::union(leaves.iter().map(UriLeaf::to_relexpr).collect(), &attrs),
        }
    }
}

fn lead(t: &Template) -> &str {
    match t.segments.first() {
        Some(Segment::Lit(l)) => l,
        _ => "",
    }
}

fn trail(t: &Template) -> &str {
    match t.segments.last() {
        Some(Segment::Lit(l)) if t.segments.len() > 1 || t.is_constant() => l,
        _ => "",
    }
}

/// True when the two templates can never render the same term.
pub fn disjoint(a: &Template, b: &Template) -> bool {
    let a_iri = a.kind == TermKind::Iri;
    let b_iri = b.kind == TermKind::Iri;
    if a_iri != b_iri {
        return true;
    }
    if a.is_constant() && b.is_constant() {
        return a.render(&[]) != b.render(&[]);
    }
    if !a_iri {
        return false;
    }
    let (la, lb) = (lead(a), lead(b));
    if !la.starts_with(lb) && !lb.starts_with(la) {
        return true;
    }
    let (ta, tb) = (trail(a), trail(b));
    !ta.ends_with(tb) && !tb.ends_with(ta)
}

fn is_passthrough(t: &Template) -> bool {
    matches!(t.kind, TermKind::Literal { .. }) && t.segments.len() == 1 && matches!(t.segments[0], Segment::Attr(_))
}

/// Hoists one join combination; `None` when two positions of a variable are disjoint.
pub fn hoist(combo: &[&Branch], vars: &[String]) -> Option<UriLeaf> {
    let mut leaf = UriLeaf {
        atoms: Vec::new(),
        on: Vec::new(),
        filter: FilterExpr::True,
        terms: Vec::new(),
        post: FilterExpr::True,
        vars: vars.iter().map(|v| var_attr(v)).collect(),
    };
    let mut defs: Vec<(String, Template)> = Vec::new();
    let mut filters = Vec::new();
    let mut post = Vec::new();
    let mut tmp = 0usize;
    for (i, b) in combo.iter().enumerate() {
        leaf.atoms.push(Atom { body: b.body.clone(), attrs: b.attrs.clone() });
        for (term, t) in &b.positions {
            let t = t.rename(|a| qualify(i, a));
            match term {
                Term::Var(v) => match defs.iter().find(|(w, _)| w == v) {
                    None => {
                        leaf.terms.push((var_attr(v), t.clone()));
                        defs.push((v.clone(), t));
                    }
                    Some((_, t0)) => {
                        if t0.compatible(&t) {
                            for (x, y) in t0.attrs().into_iter().zip(t.attrs()) {
                                if x != y {
                                    leaf.on.push((x.to_string(), y.to_string()));
                                }
                            }
                        } else if disjoint(t0, &t) {
                            return None;
                        } else {
                            let name = format!("#{tmp}");
                            tmp += 1;
                            leaf.terms.push((name.clone(), t));
                            post.push(FilterExpr::eq_attrs(&var_attr(v), &name));
                        }
                    }
                },
                Term::Const(c) => {
                    if t.is_constant() {
                        continue;
                    }
                    if is_passthrough(&t) {
                        filters.push(FilterExpr::Eq(Operand::attr(t.attrs()[0]), Operand::Const(c.clone())));
                    } else {
                        let name = format!("#{tmp}");
                        tmp += 1;
                        leaf.terms.push((name.clone(), t));
                        post.push(FilterExpr::Eq(Operand::attr(&name), Operand::Const(c.clone())));
                    }
                }
            }
        }
    }
    leaf.filter = FilterExpr::and(filters);
    leaf.post = FilterExpr::and(post);
    Some(leaf)
}

/// Counters reported by the structural passes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StructuralReport {
    pub duplicates: usize,
    pub combinations: usize,
    pub pruned: usize,
    pub merged_leaves: usize,
}

/// The five structural passes over a BGP's units.
pub fn structural(
    units: &[Unit],
    vars: &[String],
    budget: usize,
) -> Result<(Vec<UriLeaf>, StructuralReport), String> {
    let mut report = StructuralReport::default();
    let mut deduped: Vec<Vec<&Branch>> = Vec::new();
    for u in units {
        let mut seen = BTreeSet::new();
        let bs: Vec<&Branch> = u.branches.iter().filter(|b| seen.insert((*b).clone())).collect();
        report.duplicates += u.branches.len() - bs.len();
        deduped.push(bs);
    }
    let total = deduped.iter().try_fold(1usize, |acc, bs| acc.checked_mul(bs.len()));
    match total {
        Some(n) if n <= budget => report.combinations = n,
        _ => return Err(format!("join distribution exceeds the branch budget of {budget}")),
    }
    let mut combos: Vec<Vec<&Branch>> = vec![vec![]];
    for bs in &deduped {
        let mut next = Vec::with_capacity(combos.len() * bs.len());
        for c in &combos {
            for b in bs {
                let mut c2 = c.clone();
                c2.push(*b);
                next.push(c2);
            }
        }
        combos = next;
    }
    let mut leaves: Vec<UriLeaf> = Vec::new();
    let mut seen = BTreeSet::new();
    for c in &combos {
        match hoist(c, vars) {
            None => report.pruned += 1,
            Some(l) => {
                if seen.insert(l.clone()) {
                    leaves.push(l);
                } else {
                    report.merged_leaves += 1;
                }
            }
        }
    }
    Ok((leaves, report))
}
