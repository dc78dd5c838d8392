//! Mapping assertions from SQL source queries to RDF triples, T-mappings and constraint declarations.

mod constraints;
mod sql;
mod tmapping;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use constraints::{Constraints, Oce, OceKind, Vfd, VfdKind};
pub use sql::{parse_sql, SpjQuery, TableRef};
pub use tmapping::{apply_exact_predicates, saturate_tmappings, split_multi_template, PredicateGroup, SplitMappings};

use crate::ontology::{Assertion, Ontology, OntologyError, RDF_TYPE};
use crate::relalg::{evaluate, FilterExpr, Instance, RelError, RelExpr, Schema, Template, Value};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MappingError {
    #[error(transparent)]
    Rel(#[from] RelError),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
    #[error("SQL error: {0}")]
    Sql(String),
    #[error("mapping `{id}`: {message}")]
    Mapping { id: String, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("exact predicate `{0}` has no original mapping")]
    ExactWithoutMapping(String),
    #[error("constraint error: {0}")]
    Constraint(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Head {
    Class { class: String, subject: Template },
    Property { property: String, subject: Template, object: Template },
}

impl Head {
    pub fn predicate(&self) -> &str {
        match self {
            Head::Class { class, .. } => class,
            Head::Property { property, .. } => property,
        }
    }

    pub fn subject(&self) -> &Template {
        match self {
            Head::Class { subject, .. } | Head::Property { subject, .. } => subject,
        }
    }

    pub fn object(&self) -> Option<&Template> {
        match self {
            Head::Class { .. } => None,
            Head::Property { object, .. } => Some(object),
        }
    }

    pub fn is_class(&self) -> bool {
        matches!(self, Head::Class { .. })
    }

    /// Placeholder attributes of the head templates.
    pub fn attrs(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let ts: Vec<&Template> = std::iter::once(self.subject()).chain(self.object()).collect();
        for t in ts {
            for a in t.attrs() {
                if !out.iter().any(|x| x == a) {
                    out.push(a.to_string());
                }
            }
        }
        out
    }

    pub fn with_predicate(&self, name: &str) -> Head {
        match self {
            Head::Class { subject, .. } => Head::Class { class: name.to_string(), subject: subject.clone() },
            Head::Property { subject, object, .. } => Head::Property {
                property: name.to_string(),
                subject: subject.clone(),
                object: object.clone(),
            },
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Head::Class { class, subject } => write!(f, "{subject} a {class}"),
            Head::Property { property, subject, object } => write!(f, "{subject} {property} {object}"),
        }
    }
}

/// `head ← source`; the body never yields nulls in head attributes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mapping {
    pub id: String,
    pub head: Head,
    pub source: SpjQuery,
    pub body: RelExpr,
}

impl Mapping {
    /// Validates head attributes against the source and adds not-null conditions on them.
    pub fn new(id: &str, head: Head, mut source: SpjQuery, schema: &Schema) -> Result<Mapping, MappingError> {
        let err = |m: String| MappingError::Mapping { id: id.to_string(), message: m };
        for a in head.attrs() {
            let src = source
                .source_of(&a)
                .ok_or_else(|| err(format!("template attribute `{a}` is not an output of the source query")))?
                .to_string();
            source.add_condition(FilterExpr::not(FilterExpr::IsNull(vec![src])));
        }
        let body = source.to_relexpr(schema)?;
        Ok(Mapping { id: id.to_string(), head, source, body })
    }

    pub fn predicate(&self) -> &str {
        self.head.predicate()
    }

    /// Qualified source columns feeding the head placeholders, in order.
    pub fn head_sources(&self) -> Vec<String> {
        let ts: Vec<&Template> = std::iter::once(self.head.subject()).chain(self.head.object()).collect();
        ts.iter()
            .flat_map(|t| t.attrs())
            .map(|a| self.source.source_of(a).unwrap_or(a).to_string())
            .collect()
    }
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "map {}: {} <- {}", self.id, self.head, self.source)
    }
}

/// Schema, ontology and mappings.
#[derive(Clone, Debug, Default)]
pub struct ObdaSpec {
    pub schema: Schema,
    pub ontology: Ontology,
    pub mappings: Vec<Mapping>,
}

#[derive(Clone, Debug, Default)]
pub struct ConstrainedSpec {
    pub spec: ObdaSpec,
    pub constraints: Constraints,
}

impl ObdaSpec {
    pub fn new(schema: Schema, ontology: Ontology, mappings: Vec<Mapping>) -> Result<ObdaSpec, MappingError> {
        let mut ids = BTreeSet::new();
        for m in &mappings {
            if !ids.insert(m.id.clone()) {
                return Err(MappingError::Mapping { id: m.id.clone(), message: "duplicate mapping id".into() });
            }
            let p = m.predicate();
            let clash = if m.head.is_class() { ontology.is_property(p) } else { ontology.is_class(p) };
            if clash || p == RDF_TYPE {
                return Err(MappingError::Mapping {
                    id: m.id.clone(),
                    message: format!("`{p}` is used with the wrong arity"),
                });
            }
        }
        let spec = ObdaSpec { schema, ontology, mappings };
        let classes = spec.classes();
        if let Some(p) = spec.properties().intersection(&classes).next() {
            return Err(MappingError::Mapping { id: String::new(), message: format!("`{p}` mapped as class and property") });
        }
        Ok(spec)
    }

    pub fn classes(&self) -> BTreeSet<String> {
        let mut out = self.ontology.classes.clone();
        out.extend(self.mappings.iter().filter(|m| m.head.is_class()).map(|m| m.predicate().to_string()));
        out
    }

    pub fn properties(&self) -> BTreeSet<String> {
        let mut out = self.ontology.properties.clone();
        out.extend(self.mappings.iter().filter(|m| !m.head.is_class()).map(|m| m.predicate().to_string()));
        out
    }

    pub fn mappings_of(&self, pred: &str) -> Vec<&Mapping> {
        self.mappings.iter().filter(|m| m.predicate() == pred).collect()
    }
}

/// Triples (as assertions) produced by a set of mappings over an instance.
pub fn virtual_assertions(mappings: &[Mapping], inst: &Instance) -> Result<BTreeSet<Assertion>, MappingError> {
    let mut out = BTreeSet::new();
    for m in mappings {
        for (s, o) in mapping_pairs(m, inst)? {
            out.insert(match o {
                None => Assertion::Class(m.predicate().to_string(), s),
                Some(o) => Assertion::Prop(m.predicate().to_string(), s, o),
            });
        }
    }
    Ok(out)
}

/// The rendered `(subject, object)` pairs of one mapping.
pub fn mapping_pairs(m: &Mapping, inst: &Instance) -> Result<Vec<(Value, Option<Value>)>, MappingError> {
    let rel = evaluate(&m.body, inst)?;
    let si = rel.indices(&m.head.subject().attrs())?;
    let oi = match m.head.object() {
        Some(t) => Some(rel.indices(&t.attrs())?),
        None => None,
    };
    let mut out = Vec::with_capacity(rel.len());
    for t in rel.iter() {
        let s = m.head.subject().render(&si.iter().map(|&i| &t[i]).collect::<Vec<_>>());
        if s.is_null() {
            continue;
        }
        let o = match (&oi, m.head.object()) {
            (Some(idx), Some(tpl)) => {
                let v = tpl.render(&idx.iter().map(|&i| &t[i]).collect::<Vec<_>>());
                if v.is_null() {
                    continue;
                }
                Some(v)
            }
            _ => None,
        };
        out.push((s, o));
    }
    Ok(out)
}

fn split_head_tokens(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    let mut in_iri = false;
    for c in s.chars() {
        match c {
            '"' => {
                in_str = !in_str;
                cur.push(c);
            }
            '<' if !in_str => {
                in_iri = true;
                cur.push(c);
            }
            '>' if !in_str => {
                in_iri = false;
                cur.push(c);
            }
            c if c.is_whitespace() && !in_str && !in_iri => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Parses a head triple pattern such as `:W-{id} a :Wellbore` or `:W-{id} :isInWell :Well-{w}`.
pub fn parse_head(text: &str) -> Result<Head, MappingError> {
    let toks = split_head_tokens(text.trim().trim_end_matches('.').trim());
    if toks.len() != 3 {
        return Err(MappingError::Sql(format!("head must be `subject predicate object`, found `{text}`")));
    }
    let subject = Template::parse(&toks[0])?;
    if toks[1] == "a" || toks[1] == RDF_TYPE {
        if toks[2].contains('{') {
            return Err(MappingError::Sql("class names cannot be templates".into()));
        }
        return Ok(Head::Class { class: toks[2].clone(), subject });
    }
    if toks[1].contains('{') {
        return Err(MappingError::Sql("predicate names cannot be templates".into()));
    }
    Ok(Head::Property { property: toks[1].clone(), subject, object: Template::parse(&toks[2])? })
}

/// Parses a mapping file. Each entry reads `map <id>: <head> <- <SQL>`; indented lines continue an entry.
pub fn parse_mappings(text: &str, schema: &Schema) -> Result<Vec<Mapping>, MappingError> {
    let mut entries: Vec<(usize, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("--") {
            continue;
        }
        if raw.starts_with(char::is_whitespace) {
            match entries.last_mut() {
                Some((_, e)) => {
                    e.push(' ');
                    e.push_str(trimmed);
                }
                None => return Err(MappingError::Syntax { line: i + 1, message: "continuation without entry".into() }),
            }
        } else {
            entries.push((i + 1, trimmed.to_string()));
        }
    }
    let mut out = Vec::new();
    for (line, e) in entries {
        let err = |m: String| MappingError::Syntax { line, message: m };
        let rest = e.strip_prefix("map ").ok_or_else(|| err("entries start with `map`".into()))?;
        let (id, rest) = rest.split_once(':').ok_or_else(|| err("expected `map <id>:`".into()))?;
        let (head, body) = rest.split_once("<-").ok_or_else(|| err("expected `<-`".into()))?;
        let head = parse_head(head).map_err(|e| err(e.to_string()))?;
        let source = parse_sql(body, schema).map_err(|e| err(e.to_string()))?;
        out.push(Mapping::new(id.trim(), head, source, schema).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

/// Mapping heads grouped by predicate, in name order.
pub fn by_predicate(mappings: &[Mapping]) -> BTreeMap<String, Vec<&Mapping>> {
    let mut out: BTreeMap<String, Vec<&Mapping>> = BTreeMap::new();
    for m in mappings {
        out.entry(m.predicate().to_string()).or_default().push(m);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SCHEMA: &str = "\
relation wellbore(wellbore_s text, well_s text, year int, month int, day int, r_existence_kd_nm text)
relation wellbore_interval(wellbore_s text, wellbore_intv_s text)
";

    #[test]
    fn parse_entries_with_continuations() {
        let s = Schema::parse(SCHEMA).unwrap();
        let text = "\
# comment
map m1: :Wellbore-{wellbore_s} a :Wellbore <- SELECT wellbore_s FROM wellbore
    WHERE r_existence_kd_nm = 'actual'
map m2: :Wellbore-{wellbore_s} :isInWell :Well-{well_s} <- SELECT wellbore_s, well_s FROM wellbore
";
        let ms = parse_mappings(text, &s).unwrap();
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[0].source.conditions.len(), 2);
        assert_eq!(ms[1].source.conditions.len(), 2);
        assert!(parse_mappings("map x: :A-{nope} a :A <- SELECT wellbore_s FROM wellbore", &s).is_err());
    }

    #[test]
    fn virtual_assertions_skip_nulls() {
        let s = Schema::parse(SCHEMA).unwrap();
        let ms = parse_mappings(
            "map m: :W-{wellbore_s} :isInWell :Well-{well_s} <- SELECT wellbore_s, well_s FROM wellbore",
            &s,
        )
        .unwrap();
        let mut inst = Instance::empty(&s);
        let row = |w: &str, well: Option<&str>| {
            vec![Value::text(w), well.map(Value::text).unwrap_or(Value::Null), Value::Null, Value::Null, Value::Null, Value::Null]
        };
        inst.insert("wellbore", row("1", Some("a"))).unwrap();
        inst.insert("wellbore", row("2", None)).unwrap();
        let va = virtual_assertions(&ms, &inst).unwrap();
        assert_eq!(va.len(), 1);
        assert!(va.contains(&Assertion::Prop(":isInWell".into(), Value::iri(":W-1"), Value::iri(":Well-a"))));
    }

    #[test]
    fn literal_heads() {
        let h = parse_head(":W-{a} :completionDate \"{y}-{m}-{d}\"^^xsd:date").unwrap();
        assert_eq!(h.attrs(), vec!["a", "y", "m", "d"]);
        let h = parse_head(":W-{a} :name {n}").unwrap();
        assert_eq!(h.object().unwrap().attrs(), vec!["n"]);
    }
}
