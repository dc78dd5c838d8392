use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::RelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColumnType {
    Int,
    Text,
    Date,
}

impl ColumnType {
    pub fn parse(s: &str) -> Option<ColumnType> {
        match s.to_ascii_lowercase().as_str() {
            "int" | "integer" | "bigint" => Some(ColumnType::Int),
            "text" | "string" | "varchar" => Some(ColumnType::Text),
            "date" => Some(ColumnType::Date),
            _ => None,
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Int => "int",
            ColumnType::Text => "text",
            ColumnType::Date => "date",
        })
    }
}

/// `lhs(lhs_attrs) ⊆ rhs(rhs_attrs)`, attributes paired positionally.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InclusionDep {
    pub lhs: String,
    pub lhs_attrs: Vec<String>,
    pub rhs: String,
    pub rhs_attrs: Vec<String>,
}

impl fmt::Display for InclusionDep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) <= {}({})", self.lhs, self.lhs_attrs.join(", "), self.rhs, self.rhs_attrs.join(", "))
    }
}

/// Anything that knows the attribute list of a named relation.
pub trait Catalog {
    fn relation_attrs(&self, name: &str) -> Option<Vec<String>>;
}

#[derive(Clone, Debug, Default)]
pub struct Schema {
    pub relations: BTreeMap<String, Vec<String>>,
    pub types: BTreeMap<String, Vec<ColumnType>>,
    pub primary_keys: BTreeMap<String, Vec<String>>,
    pub unique_constraints: BTreeMap<String, Vec<Vec<String>>>,
    pub inclusion_deps: Vec<InclusionDep>,
}

impl Catalog for Schema {
    fn relation_attrs(&self, name: &str) -> Option<Vec<String>> {
        self.relations.get(name).cloned()
    }
}

impl Schema {
    pub fn add_relation(&mut self, name: &str, columns: &[(&str, ColumnType)]) -> Result<(), RelError> {
        if self.relations.contains_key(name) {
            return Err(RelError::Schema(format!("relation `{name}` declared twice")));
        }
        check_ident(name)?;
        let mut seen = BTreeSet::new();
        for (c, _) in columns {
            check_ident(c)?;
            if !seen.insert(*c) {
                return Err(RelError::Schema(format!("duplicate attribute `{c}` in `{name}`")));
            }
        }
        self.relations
            .insert(name.to_string(), columns.iter().map(|(c, _)| c.to_string()).collect());
        self.types
            .insert(name.to_string(), columns.iter().map(|(_, t)| *t).collect());
        Ok(())
    }

    pub fn attrs(&self, rel: &str) -> Result<&[String], RelError> {
        self.relations
            .get(rel)
            .map(|v| v.as_slice())
            .ok_or_else(|| RelError::UnknownRelation(rel.to_string()))
    }

    pub fn column_type(&self, rel: &str, attr: &str) -> Result<ColumnType, RelError> {
        let attrs = self.attrs(rel)?;
        let i = attrs
            .iter()
            .position(|a| a == attr)
            .ok_or_else(|| RelError::UnknownAttribute(format!("{rel}.{attr}")))?;
        Ok(self.types[rel][i])
    }

    fn check_attrs(&self, rel: &str, attrs: &[String]) -> Result<(), RelError> {
        let known = self.attrs(rel)?;
        for a in attrs {
            if !known.contains(a) {
                return Err(RelError::UnknownAttribute(format!("{rel}.{a}")));
            }
        }
        Ok(())
    }

    pub fn set_primary_key(&mut self, rel: &str, attrs: Vec<String>) -> Result<(), RelError> {
        self.check_attrs(rel, &attrs)?;
        self.primary_keys.insert(rel.to_string(), attrs);
        Ok(())
    }

    pub fn add_unique(&mut self, rel: &str, attrs: Vec<String>) -> Result<(), RelError> {
        self.check_attrs(rel, &attrs)?;
        self.unique_constraints.entry(rel.to_string()).or_default().push(attrs);
        Ok(())
    }

    pub fn add_inclusion(&mut self, dep: InclusionDep) -> Result<(), RelError> {
        self.check_attrs(&dep.lhs, &dep.lhs_attrs)?;
        self.check_attrs(&dep.rhs, &dep.rhs_attrs)?;
        if dep.lhs_attrs.len() != dep.rhs_attrs.len() {
            return Err(RelError::Schema(format!(
                "inclusion {}({}) <= {}({}) has mismatched arity",
                dep.lhs,
                dep.lhs_attrs.join(", "),
                dep.rhs,
                dep.rhs_attrs.join(", ")
            )));
        }
        self.inclusion_deps.push(dep);
        Ok(())
    }

    /// Primary key plus unique sets of a relation.
    pub fn keys(&self, rel: &str) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = self.primary_keys.get(rel).into_iter().cloned().collect();
        if let Some(u) = self.unique_constraints.get(rel) {
            out.extend(u.iter().cloned());
        }
        out
    }

    /// Parses the declarative schema format:
    ///
    /// ```text
    /// relation wellbore(wellbore_s text, well_s text, year int)
    /// key wellbore(wellbore_s)
    /// unique wellbore(well_s, year)
    /// inclusion wellbore_interval(wellbore_s) <= wellbore(wellbore_s)
    /// ```
    pub fn parse(text: &str) -> Result<Schema, RelError> {
        let mut schema = Schema::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| RelError::Schema(format!("line {}: {m}", lineno + 1));
            let (kw, rest) = line.split_once(char::is_whitespace).ok_or_else(|| err(format!("cannot parse `{line}`")))?;
            match kw {
                "relation" => {
                    let (name, cols) = parse_call(rest).map_err(err)?;
                    let mut columns = Vec::new();
                    for c in &cols {
                        let mut parts = c.split_whitespace();
                        let col = parts.next().ok_or_else(|| err("empty column".into()))?;
                        let ty = match parts.next() {
                            Some(t) => ColumnType::parse(t).ok_or_else(|| err(format!("unknown type `{t}`")))?,
                            None => ColumnType::Text,
                        };
                        if parts.next().is_some() {
                            return Err(err(format!("cannot parse column `{c}`")));
                        }
                        columns.push((col, ty));
                    }
                    let columns: Vec<(&str, ColumnType)> = columns;
                    schema.add_relation(&name, &columns).map_err(|e| err(e.to_string()))?;
                }
                "key" => {
                    let (name, cols) = parse_call(rest).map_err(err)?;
                    schema.set_primary_key(&name, cols).map_err(|e| err(e.to_string()))?;
                }
                "unique" => {
                    let (name, cols) = parse_call(rest).map_err(err)?;
                    schema.add_unique(&name, cols).map_err(|e| err(e.to_string()))?;
                }
                "inclusion" => {
                    let (l, r) = rest.split_once("<=").ok_or_else(|| err("expected `<=`".into()))?;
                    let (lhs, lhs_attrs) = parse_call(l).map_err(err)?;
                    let (rhs, rhs_attrs) = parse_call(r).map_err(err)?;
                    schema
                        .add_inclusion(InclusionDep { lhs, lhs_attrs, rhs, rhs_attrs })
                        .map_err(|e| err(e.to_string()))?;
                }
                other => return Err(err(format!("unknown declaration `{other}`"))),
            }
        }
        Ok(schema)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, attrs) in &self.relations {
            let cols: Vec<String> = attrs
                .iter()
                .zip(&self.types[name])
                .map(|(a, t)| format!("{a} {t}"))
                .collect();
            writeln!(f, "relation {name}({})", cols.join(", "))?;
        }
        for (name, k) in &self.primary_keys {
            writeln!(f, "key {name}({})", k.join(", "))?;
        }
        for (name, us) in &self.unique_constraints {
            for u in us {
                writeln!(f, "unique {name}({})", u.join(", "))?;
            }
        }
        for d in &self.inclusion_deps {
            writeln!(
                f,
                "inclusion {}({}) <= {}({})",
                d.lhs,
                d.lhs_attrs.join(", "),
                d.rhs,
                d.rhs_attrs.join(", ")
            )?;
        }
        Ok(())
    }
}

pub(crate) fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn check_ident(s: &str) -> Result<(), RelError> {
    let ok = !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !s.starts_with(|c: char| c.is_ascii_digit());
    if ok {
        Ok(())
    } else {
        Err(RelError::Schema(format!("invalid identifier `{s}`")))
    }
}

fn parse_call(s: &str) -> Result<(String, Vec<String>), String> {
    let s = s.trim();
    let open = s.find('(').ok_or_else(|| format!("expected `(` in `{s}`"))?;
    let inner = s[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| format!("expected `)` at end of `{s}`"))?;
    let name = s[..open].trim().to_string();
    let items = inner
        .split(',')
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect();
    Ok((name, items))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_declarations() {
        let s = Schema::parse(
            "relation t(a int, b text, c)\nrelation u(x int)\nkey t(a)\nunique t(b, c)\ninclusion u(x) <= t(a)\n",
        )
        .unwrap();
        assert_eq!(s.attrs("t").unwrap(), ["a", "b", "c"]);
        assert_eq!(s.column_type("t", "c").unwrap(), ColumnType::Text);
        assert_eq!(s.keys("t").len(), 2);
        assert_eq!(s.inclusion_deps.len(), 1);
        let again = Schema::parse(&s.to_string()).unwrap();
        assert_eq!(again.relations, s.relations);
    }

    #[test]
    fn unknown_attribute_is_schema_error() {
        let e = Schema::parse("relation t(a)\nkey t(b)").unwrap_err();
        assert!(e.to_string().contains("t.b"));
    }
}
