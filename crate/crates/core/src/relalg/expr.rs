use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Catalog, RelError, Template, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Attr(String),
    Const(Value),
}

impl Operand {
    pub fn attr(a: &str) -> Operand {
        Operand::Attr(a.to_string())
    }

    fn rename(&self, f: &impl Fn(&str) -> String) -> Operand {
        match self {
            Operand::Attr(a) => Operand::Attr(f(a)),
            c => c.clone(),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Attr(a) => write!(f, "{a}"),
            Operand::Const(v) => write!(f, "{v}"),
        }
    }
}

/// Selection condition with three-valued semantics.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterExpr {
    True,
    /// True iff every listed attribute is null.
    IsNull(Vec<String>),
    Eq(Operand, Operand),
    Lt(Operand, Operand),
    Not(Box<FilterExpr>),
    And(Vec<FilterExpr>),
    Or(Vec<FilterExpr>),
}

impl FilterExpr {
    pub fn and(parts: Vec<FilterExpr>) -> FilterExpr {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                FilterExpr::True => {}
                FilterExpr::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        let mut seen = BTreeSet::new();
        flat.retain(|f| seen.insert(f.clone()));
        match flat.len() {
            0 => FilterExpr::True,
            1 => flat.pop().unwrap(),
            _ => FilterExpr::And(flat),
        }
    }

    pub fn not(f: FilterExpr) -> FilterExpr {
        match f {
            FilterExpr::Not(inner) => *inner,
            other => FilterExpr::Not(Box::new(other)),
        }
    }

    pub fn eq_attrs(a: &str, b: &str) -> FilterExpr {
        FilterExpr::Eq(Operand::attr(a), Operand::attr(b))
    }

    pub fn eq_const(a: &str, v: Value) -> FilterExpr {
        FilterExpr::Eq(Operand::attr(a), Operand::Const(v))
    }

    /// Conjunction of `¬isNull({a})` over the given attributes.
    pub fn not_null<S: AsRef<str>>(attrs: &[S]) -> FilterExpr {
        FilterExpr::and(
            attrs
                .iter()
                .map(|a| FilterExpr::not(FilterExpr::IsNull(vec![a.as_ref().to_string()])))
                .collect(),
        )
    }

    pub fn conjuncts(&self) -> Vec<FilterExpr> {
        match self {
            FilterExpr::True => vec![],
            FilterExpr::And(parts) => parts.clone(),
            other => vec![other.clone()],
        }
    }

    pub fn attrs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_attrs(&mut out);
        out
    }

    fn collect_attrs(&self, out: &mut BTreeSet<String>) {
        let mut op = |o: &Operand| {
            if let Operand::Attr(a) = o {
                out.insert(a.clone());
            }
        };
        match self {
            FilterExpr::True => {}
            FilterExpr::IsNull(a) => out.extend(a.iter().cloned()),
            FilterExpr::Eq(l, r) | FilterExpr::Lt(l, r) => {
                op(l);
                op(r);
            }
            FilterExpr::Not(f) => f.collect_attrs(out),
            FilterExpr::And(fs) | FilterExpr::Or(fs) => fs.iter().for_each(|f| f.collect_attrs(out)),
        }
    }

    pub fn rename(&self, f: &impl Fn(&str) -> String) -> FilterExpr {
        match self {
            FilterExpr::True => FilterExpr::True,
            FilterExpr::IsNull(a) => FilterExpr::IsNull(a.iter().map(|x| f(x)).collect()),
            FilterExpr::Eq(l, r) => FilterExpr::Eq(l.rename(f), r.rename(f)),
            FilterExpr::Lt(l, r) => FilterExpr::Lt(l.rename(f), r.rename(f)),
            FilterExpr::Not(x) => FilterExpr::Not(Box::new(x.rename(f))),
            FilterExpr::And(xs) => FilterExpr::And(xs.iter().map(|x| x.rename(f)).collect()),
            FilterExpr::Or(xs) => FilterExpr::Or(xs.iter().map(|x| x.rename(f)).collect()),
        }
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterExpr::True => write!(f, "true"),
            FilterExpr::IsNull(a) => write!(f, "isNull({})", a.join(", ")),
            FilterExpr::Eq(l, r) => write!(f, "{l} = {r}"),
            FilterExpr::Lt(l, r) => write!(f, "{l} < {r}"),
            FilterExpr::Not(x) => write!(f, "¬({x})"),
            FilterExpr::And(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| format!("({x})")).collect();
                write!(f, "{}", parts.join(" ∧ "))
            }
            FilterExpr::Or(xs) => {
                let parts: Vec<String> = xs.iter().map(|x| format!("({x})")).collect();
                write!(f, "{}", parts.join(" ∨ "))
            }
        }
    }
}

/// Relational algebra over named attributes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelExpr {
    Base(String),
    Empty(Vec<String>),
    Values { attrs: Vec<String>, rows: Vec<Vec<Value>> },
    Select(FilterExpr, Box<RelExpr>),
    Project(Vec<String>, Box<RelExpr>),
    /// Pairs are `(new, old)`.
    Rename(Vec<(String, String)>, Box<RelExpr>),
    NaturalJoin(Vec<RelExpr>),
    /// Inputs have disjoint attributes; pairs are `(left attr, right attr)`.
    EquiJoin { left: Box<RelExpr>, right: Box<RelExpr>, on: Vec<(String, String)> },
    Union(Vec<RelExpr>),
    Difference(Box<RelExpr>, Box<RelExpr>),
    /// Joins the input with an all-null tuple over the listed attributes.
    Padding(Vec<String>, Box<RelExpr>),
    UriConstruct { target: String, template: Template, child: Box<RelExpr> },
    CteRef(String),
    WithCte { bindings: Vec<(String, RelExpr)>, body: Box<RelExpr> },
}

/// Operator counts reported in explain traces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    /// Binary joins: an n-ary natural join counts n - 1.
    pub joins: usize,
    /// Union operators: an n-ary union counts n - 1.
    pub unions: usize,
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "joins={} unions={}", self.joins, self.unions)
    }
}

impl RelExpr {
    pub fn base(name: &str) -> RelExpr {
        RelExpr::Base(name.to_string())
    }

    pub fn select(f: FilterExpr, child: RelExpr) -> RelExpr {
        match f {
            FilterExpr::True => child,
            f => RelExpr::Select(f, Box::new(child)),
        }
    }

    pub fn project<S: AsRef<str>>(attrs: &[S], child: RelExpr) -> RelExpr {
        RelExpr::Project(attrs.iter().map(|a| a.as_ref().to_string()).collect(), Box::new(child))
    }

    pub fn rename(pairs: Vec<(String, String)>, child: RelExpr) -> RelExpr {
        let pairs: Vec<_> = pairs.into_iter().filter(|(n, o)| n != o).collect();
        if pairs.is_empty() {
            child
        } else {
            RelExpr::Rename(pairs, Box::new(child))
        }
    }

    pub fn union(children: Vec<RelExpr>, attrs: &[String]) -> RelExpr {
        match children.len() {
            0 => RelExpr::Empty(attrs.to_vec()),
            1 => children.into_iter().next().unwrap(),
            _ => RelExpr::Union(children),
        }
    }

    pub fn padding(attrs: Vec<String>, child: RelExpr) -> RelExpr {
        if attrs.is_empty() {
            child
        } else {
            RelExpr::Padding(attrs, Box::new(child))
        }
    }

    pub fn uri(target: &str, template: Template, child: RelExpr) -> RelExpr {
        RelExpr::UriConstruct { target: target.to_string(), template, child: Box::new(child) }
    }

    /// The single empty tuple over no attributes.
    pub fn unit() -> RelExpr {
        RelExpr::Values { attrs: vec![], rows: vec![vec![]] }
    }

    pub fn attrs(&self, catalog: &dyn Catalog) -> Result<Vec<String>, RelError> {
        self.attrs_in(catalog, &BTreeMap::new())
    }

    pub(crate) fn attrs_in(
        &self,
        cat: &dyn Catalog,
        env: &BTreeMap<String, Vec<String>>,
    ) -> Result<Vec<String>, RelError> {
        use RelExpr::*;
        Ok(match self {
            Base(n) => cat
                .relation_attrs(n)
                .ok_or_else(|| RelError::UnknownRelation(n.clone()))?,
            Empty(a) => a.clone(),
            Values { attrs, .. } => attrs.clone(),
            Select(f, c) => {
                let a = c.attrs_in(cat, env)?;
                for x in f.attrs() {
                    if !a.contains(&x) {
                        return Err(RelError::UnknownAttribute(x));
                    }
                }
                a
            }
            Project(p, c) => {
                let a = c.attrs_in(cat, env)?;
                for x in p {
                    if !a.contains(x) {
                        return Err(RelError::UnknownAttribute(x.clone()));
                    }
                }
                p.clone()
            }
            Rename(pairs, c) => {
                let mut a = c.attrs_in(cat, env)?;
                let olds: BTreeSet<&String> = pairs.iter().map(|(_, o)| o).collect();
                for (new, old) in pairs {
                    if !a.contains(old) {
                        return Err(RelError::UnknownAttribute(old.clone()));
                    }
                    if a.contains(new) && !olds.contains(new) {
                        return Err(RelError::Plan(format!("rename target `{new}` already present")));
                    }
                }
                for x in a.iter_mut() {
                    if let Some((n, _)) = pairs.iter().find(|(_, o)| o == x) {
                        *x = n.clone();
                    }
                }
                a
            }
            NaturalJoin(cs) => {
                let mut out: Vec<String> = Vec::new();
                for c in cs {
                    for x in c.attrs_in(cat, env)? {
                        if !out.contains(&x) {
                            out.push(x);
                        }
                    }
                }
                out
            }
            EquiJoin { left, right, on } => {
                let mut l = left.attrs_in(cat, env)?;
                let r = right.attrs_in(cat, env)?;
                for (a, b) in on {
                    if !l.contains(a) {
                        return Err(RelError::UnknownAttribute(a.clone()));
                    }
                    if !r.contains(b) {
                        return Err(RelError::UnknownAttribute(b.clone()));
                    }
                }
                for x in &r {
                    if l.contains(x) {
                        return Err(RelError::Plan(format!("equi-join inputs share attribute `{x}`")));
                    }
                }
                l.extend(r);
                l
            }
            Union(cs) => {
                let first = cs
                    .first()
                    .ok_or_else(|| RelError::Plan("empty union".into()))?
                    .attrs_in(cat, env)?;
                for c in &cs[1..] {
                    same_attr_set(&first, &c.attrs_in(cat, env)?)?;
                }
                first
            }
            Difference(l, r) => {
                let a = l.attrs_in(cat, env)?;
                same_attr_set(&a, &r.attrs_in(cat, env)?)?;
                a
            }
            Padding(p, c) => {
                let mut a = c.attrs_in(cat, env)?;
                for x in p {
                    if a.contains(x) {
                        return Err(RelError::Plan(format!("padding attribute `{x}` already present")));
                    }
                    a.push(x.clone());
                }
                a
            }
            UriConstruct { target, template, child } => {
                let mut a = child.attrs_in(cat, env)?;
                for x in template.attrs() {
                    if !a.iter().any(|y| y == x) {
                        return Err(RelError::UnknownAttribute(x.to_string()));
                    }
                }
                if a.contains(target) {
                    return Err(RelError::Plan(format!("constructed attribute `{target}` already present")));
                }
                a.push(target.clone());
                a
            }
            CteRef(n) => env.get(n).cloned().ok_or_else(|| RelError::UnboundCte(n.clone()))?,
            WithCte { bindings, body } => {
                let mut env2 = env.clone();
                for (n, e) in bindings {
                    let a = e.attrs_in(cat, &env2)?;
                    env2.insert(n.clone(), a);
                }
                body.attrs_in(cat, &env2)?
            }
        })
    }

    pub fn children(&self) -> Vec<&RelExpr> {
        use RelExpr::*;
        match self {
            Base(_) | Empty(_) | Values { .. } | CteRef(_) => vec![],
            Select(_, c) | Project(_, c) | Rename(_, c) | Padding(_, c) => vec![c],
            UriConstruct { child, .. } => vec![child],
            NaturalJoin(cs) | Union(cs) => cs.iter().collect(),
            EquiJoin { left, right, .. } => vec![left, right],
            Difference(l, r) => vec![l, r],
            WithCte { bindings, body } => {
                let mut v: Vec<&RelExpr> = bindings.iter().map(|(_, e)| e).collect();
                v.push(body);
                v
            }
        }
    }

    pub fn op_counts(&self) -> OpCounts {
        let mut c = OpCounts::default();
        self.count_into(&mut c);
        c
    }

    /// Counts operators, treating subexpressions matched by `opaque` as leaves.
    pub fn op_counts_with(&self, opaque: &dyn Fn(&RelExpr) -> bool) -> OpCounts {
        let mut c = OpCounts::default();
        self.count_with(&mut c, opaque);
        c
    }

    fn count_with(&self, c: &mut OpCounts, opaque: &dyn Fn(&RelExpr) -> bool) {
        if opaque(self) {
            return;
        }
        match self {
            RelExpr::NaturalJoin(cs) => c.joins += cs.len().saturating_sub(1),
            RelExpr::EquiJoin { .. } => c.joins += 1,
            RelExpr::Union(cs) => c.unions += cs.len().saturating_sub(1),
            _ => {}
        }
        for ch in self.children() {
            ch.count_with(c, opaque);
        }
    }

    fn count_into(&self, c: &mut OpCounts) {
        match self {
            RelExpr::NaturalJoin(cs) => c.joins += cs.len().saturating_sub(1),
            RelExpr::EquiJoin { .. } => c.joins += 1,
            RelExpr::Union(cs) => c.unions += cs.len().saturating_sub(1),
            _ => {}
        }
        for ch in self.children() {
            ch.count_into(c);
        }
    }

    /// Number of top-level union branches (0 for an empty relation).
    pub fn branch_count(&self) -> usize {
        match self {
            RelExpr::Union(cs) => cs.len(),
            RelExpr::Empty(_) => 0,
            _ => 1,
        }
    }

    /// Counts occurrences of `needle` as a subexpression.
    pub fn occurrences(&self, needle: &RelExpr) -> usize {
        if self == needle {
            return 1;
        }
        self.children().iter().map(|c| c.occurrences(needle)).sum()
    }

    /// Replaces every occurrence of `needle` by `with`.
    pub fn replace(&self, needle: &RelExpr, with: &RelExpr) -> RelExpr {
        if self == needle {
            return with.clone();
        }
        self.map_children(|c| c.replace(needle, with))
    }

    pub fn map_children(&self, mut f: impl FnMut(&RelExpr) -> RelExpr) -> RelExpr {
        use RelExpr::*;
        match self {
            Base(_) | Empty(_) | Values { .. } | CteRef(_) => self.clone(),
            Select(p, c) => Select(p.clone(), Box::new(f(c))),
            Project(p, c) => Project(p.clone(), Box::new(f(c))),
            Rename(p, c) => Rename(p.clone(), Box::new(f(c))),
            Padding(p, c) => Padding(p.clone(), Box::new(f(c))),
            UriConstruct { target, template, child } => UriConstruct {
                target: target.clone(),
                template: template.clone(),
                child: Box::new(f(child)),
            },
            NaturalJoin(cs) => NaturalJoin(cs.iter().map(&mut f).collect()),
            Union(cs) => Union(cs.iter().map(&mut f).collect()),
            EquiJoin { left, right, on } => EquiJoin {
                left: Box::new(f(left)),
                right: Box::new(f(right)),
                on: on.clone(),
            },
            Difference(l, r) => Difference(Box::new(f(l)), Box::new(f(r))),
            WithCte { bindings, body } => WithCte {
                bindings: bindings.iter().map(|(n, e)| (n.clone(), f(e))).collect(),
                body: Box::new(f(body)),
            },
        }
    }

    fn fmt_tree(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        use RelExpr::*;
        let pad = "  ".repeat(depth);
        match self {
            Base(n) => return writeln!(f, "{pad}{n}"),
            Empty(a) => return writeln!(f, "{pad}∅[{}]", a.join(", ")),
            CteRef(n) => return writeln!(f, "{pad}cte {n}"),
            Values { attrs, rows } => {
                let rs: Vec<String> = rows
                    .iter()
                    .map(|r| format!("({})", r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")))
                    .collect();
                return writeln!(f, "{pad}values[{}] {}", attrs.join(", "), rs.join(" "));
            }
            Select(p, _) => writeln!(f, "{pad}σ {p}")?,
            Project(p, _) => writeln!(f, "{pad}π [{}]", p.join(", "))?,
            Rename(p, _) => {
                let ps: Vec<String> = p.iter().map(|(n, o)| format!("{n}/{o}")).collect();
                writeln!(f, "{pad}ρ [{}]", ps.join(", "))?
            }
            Padding(p, _) => writeln!(f, "{pad}μ [{}]", p.join(", "))?,
            UriConstruct { target, template, .. } => writeln!(f, "{pad}{target} ← {template}")?,
            NaturalJoin(_) => writeln!(f, "{pad}⋈")?,
            EquiJoin { on, .. } => {
                let ps: Vec<String> = on.iter().map(|(a, b)| format!("{a} = {b}")).collect();
                writeln!(f, "{pad}⋈ [{}]", ps.join(", "))?
            }
            Union(_) => writeln!(f, "{pad}∪")?,
            Difference(_, _) => writeln!(f, "{pad}∖")?,
            WithCte { bindings, body } => {
                for (n, e) in bindings {
                    writeln!(f, "{pad}with {n} =")?;
                    e.fmt_tree(f, depth + 1)?;
                }
                writeln!(f, "{pad}in")?;
                return body.fmt_tree(f, depth + 1);
            }
        }
        for c in self.children() {
            c.fmt_tree(f, depth + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for RelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_tree(f, 0)
    }
}

fn same_attr_set(a: &[String], b: &[String]) -> Result<(), RelError> {
    let sa: BTreeSet<&String> = a.iter().collect();
    let sb: BTreeSet<&String> = b.iter().collect();
    if sa != sb || a.len() != b.len() {
        return Err(RelError::Plan(format!(
            "incompatible attribute sets [{}] and [{}]",
            a.join(", "),
            b.join(", ")
        )));
    }
    Ok(())
}
