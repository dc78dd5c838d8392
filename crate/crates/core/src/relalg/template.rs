use std::fmt;
use std::sync::Arc;

use super::{RelError, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TermKind {
    Iri,
    Literal { datatype: Option<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    Lit(String),
    Attr(String),
}

/// Literal segments interleaved with `{attr}` placeholders.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Template {
    pub kind: TermKind,
    pub segments: Vec<Segment>,
}

/// Template with placeholders erased; equal shapes are joinable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Shape {
    pub kind: TermKind,
    pub parts: Vec<Option<String>>,
}

impl Template {
    pub fn iri(segments: Vec<Segment>) -> Template {
        Template { kind: TermKind::Iri, segments }
    }

    /// A literal template that passes a single column value through unchanged.
    pub fn column(attr: &str) -> Template {
        Template {
            kind: TermKind::Literal { datatype: None },
            segments: vec![Segment::Attr(attr.to_string())],
        }
    }

    /// A template with no placeholders.
    pub fn constant(value: &Value) -> Template {
        match value {
            Value::Iri(s) => Template::iri(vec![Segment::Lit(s.to_string())]),
            other => Template {
                kind: TermKind::Literal { datatype: Some(format!("#{}", other.type_name())) },
                segments: vec![Segment::Lit(other.lexical())],
            },
        }
    }

    pub fn parse(text: &str) -> Result<Template, RelError> {
        let text = text.trim();
        let bad = |msg: &str| RelError::Template(format!("{msg}: `{text}`"));
        if text.is_empty() {
            return Err(bad("empty template"));
        }
        if let Some(rest) = text.strip_prefix('"') {
            let close = rest.rfind('"').ok_or_else(|| bad("unterminated literal"))?;
            let body = &rest[..close];
            let suffix = &rest[close + 1..];
            let datatype = if suffix.is_empty() {
                None
            } else if let Some(dt) = suffix.strip_prefix("^^") {
                Some(dt.to_string())
            } else if suffix.starts_with('@') {
                Some(suffix.to_string())
            } else {
                return Err(bad("unexpected text after literal"));
            };
            let segments = parse_segments(body).map_err(|m| bad(&m))?;
            return Ok(Template { kind: TermKind::Literal { datatype }, segments });
        }
        if text.starts_with('{') && text.ends_with('}') && text[1..].find('{').is_none() {
            let attr = &text[1..text.len() - 1];
            check_attr(attr).map_err(|m| bad(&m))?;
            return Ok(Template::column(attr));
        }
        let body = if let Some(inner) = text.strip_prefix('<') {
            inner.strip_suffix('>').ok_or_else(|| bad("unterminated IRI"))?
        } else {
            text
        };
        if body.chars().any(char::is_whitespace) {
            return Err(bad("whitespace in IRI template"));
        }
        let segments = parse_segments(body).map_err(|m| bad(&m))?;
        Ok(Template::iri(segments))
    }

    pub fn attrs(&self) -> Vec<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Attr(a) => Some(a.as_str()),
                Segment::Lit(_) => None,
            })
            .collect()
    }

    pub fn arity(&self) -> usize {
        self.attrs().len()
    }

    pub fn is_constant(&self) -> bool {
        self.arity() == 0
    }

    fn is_passthrough(&self) -> bool {
        matches!(self.kind, TermKind::Literal { .. })
            && self.segments.len() == 1
            && matches!(self.segments[0], Segment::Attr(_))
    }

    pub fn shape(&self) -> Shape {
        Shape {
            kind: self.kind.clone(),
            parts: self
                .segments
                .iter()
                .map(|s| match s {
                    Segment::Lit(l) => Some(l.clone()),
                    Segment::Attr(_) => None,
                })
                .collect(),
        }
    }

    /// Joinable iff literal segments coincide and placeholder counts match.
    pub fn compatible(&self, other: &Template) -> bool {
        self.shape() == other.shape()
    }

    pub fn rename(&self, f: impl Fn(&str) -> String) -> Template {
        Template {
            kind: self.kind.clone(),
            segments: self
                .segments
                .iter()
                .map(|s| match s {
                    Segment::Attr(a) => Segment::Attr(f(a)),
                    Segment::Lit(l) => Segment::Lit(l.clone()),
                })
                .collect(),
        }
    }

    /// Renders the term from placeholder values in order; null if any value is null.
    pub fn render(&self, values: &[&Value]) -> Value {
        if values.iter().any(|v| v.is_null()) {
            return Value::Null;
        }
        if self.is_passthrough() {
            return values[0].clone();
        }
        if let (TermKind::Literal { datatype: Some(dt) }, [Segment::Lit(l)]) =
            (&self.kind, self.segments.as_slice())
        {
            if let Some(ty) = dt.strip_prefix('#') {
                return constant_value(ty, l);
            }
        }
        let mut out = String::new();
        let mut i = 0;
        for s in &self.segments {
            match s {
                Segment::Lit(l) => out.push_str(l),
                Segment::Attr(_) => {
                    out.push_str(&values[i].lexical());
                    i += 1;
                }
            }
        }
        match self.kind {
            TermKind::Iri => Value::Iri(Arc::from(out.as_str())),
            TermKind::Literal { ref datatype } => {
                if datatype.as_deref() == Some("xsd:date") {
                    if let Ok(d) = chrono::NaiveDate::parse_from_str(&out, "%Y-%m-%d") {
                        if d.format("%Y-%m-%d").to_string() == out {
                            return Value::Date(d);
                        }
                    }
                }
                Value::Text(Arc::from(out.as_str()))
            }
        }
    }

    /// Whether some assignment of placeholders could render `value`.
    pub fn may_produce(&self, value: &Value) -> bool {
        if value.is_null() {
            return false;
        }
        if self.is_constant() {
            return self.render(&[]) == *value;
        }
        match (&self.kind, value) {
            (TermKind::Iri, Value::Iri(s)) => matches_segments(&self.segments, s),
            (TermKind::Iri, _) | (_, Value::Iri(_)) => false,
            (TermKind::Literal { .. }, _) if self.is_passthrough() => true,
            (TermKind::Literal { .. }, Value::Text(s)) => matches_segments(&self.segments, s),
            (TermKind::Literal { datatype }, Value::Date(d)) => {
                datatype.as_deref() == Some("xsd:date")
                    && matches_segments(&self.segments, &d.format("%Y-%m-%d").to_string())
            }
            _ => false,
        }
    }
}

fn constant_value(ty: &str, lexical: &str) -> Value {
    match ty {
        "int" => lexical.parse().map(Value::Int).unwrap_or(Value::Null),
        "date" => chrono::NaiveDate::parse_from_str(lexical, "%Y-%m-%d")
            .map(Value::Date)
            .unwrap_or(Value::Null),
        _ => Value::text(lexical),
    }
}

fn matches_segments(segments: &[Segment], s: &str) -> bool {
    match segments.split_first() {
        None => s.is_empty(),
        Some((Segment::Lit(l), rest)) => s.strip_prefix(l.as_str()).is_some_and(|r| matches_segments(rest, r)),
        Some((Segment::Attr(_), rest)) => (0..=s.len())
            .filter(|i| s.is_char_boundary(*i))
            .any(|i| matches_segments(rest, &s[i..])),
    }
}

fn check_attr(a: &str) -> Result<(), String> {
    if a.is_empty() || !a.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
        return Err(format!("invalid placeholder `{{{a}}}`"));
    }
    Ok(())
}

fn parse_segments(body: &str) -> Result<Vec<Segment>, String> {
    let mut segments = Vec::new();
    let mut lit = String::new();
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        match c {
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(ch) => name.push(ch),
                        None => return Err("unterminated placeholder".into()),
                    }
                }
                check_attr(&name)?;
                if !lit.is_empty() {
                    segments.push(Segment::Lit(std::mem::take(&mut lit)));
                }
                segments.push(Segment::Attr(name));
            }
            '}' => return Err("unbalanced `}`".into()),
            c => lit.push(c),
        }
    }
    if !lit.is_empty() {
        segments.push(Segment::Lit(lit));
    }
    if segments.is_empty() {
        return Err("empty template".into());
    }
    Ok(segments)
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: String = self
            .segments
            .iter()
            .map(|s| match s {
                Segment::Lit(l) => l.clone(),
                Segment::Attr(a) => format!("{{{a}}}"),
            })
            .collect();
        match &self.kind {
            TermKind::Iri if body.contains("://") => write!(f, "<{body}>"),
            TermKind::Iri => write!(f, "{body}"),
            TermKind::Literal { .. } if self.is_passthrough() => write!(f, "{body}"),
            TermKind::Literal { datatype: None } => write!(f, "\"{body}\""),
            TermKind::Literal { datatype: Some(dt) } if dt.starts_with('@') => write!(f, "\"{body}\"{dt}"),
            TermKind::Literal { datatype: Some(dt) } => write!(f, "\"{body}\"^^{dt}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render_iri() {
        let t = Template::parse(":Wellbore-{wellbore_s}").unwrap();
        assert_eq!(t.attrs(), vec!["wellbore_s"]);
        assert_eq!(t.render(&[&Value::text("002")]), Value::iri(":Wellbore-002"));
        assert_eq!(t.render(&[&Value::Null]), Value::Null);
        assert_eq!(t.to_string(), ":Wellbore-{wellbore_s}");
    }

    #[test]
    fn literal_templates() {
        let t = Template::parse("\"{year}-{month}-{day}\"^^xsd:string").unwrap();
        let v = t.render(&[&Value::Int(2009), &Value::Int(4), &Value::Int(1)]);
        assert_eq!(v, Value::text("2009-4-1"));
        let c = Template::parse("{age}").unwrap();
        assert_eq!(c.render(&[&Value::Int(7)]), Value::Int(7));
    }

    #[test]
    fn compatibility_is_shape_equality() {
        let a = Template::parse(":W-{a}").unwrap();
        let b = Template::parse(":W-{b}").unwrap();
        let c = Template::parse(":V-{a}").unwrap();
        let d = Template::parse(":W-{a}-{b}").unwrap();
        assert!(a.compatible(&b));
        assert!(!a.compatible(&c));
        assert!(!a.compatible(&d));
    }

    #[test]
    fn may_produce_checks_literal_segments() {
        let a = Template::parse(":W-{a}").unwrap();
        assert!(a.may_produce(&Value::iri(":W-17")));
        assert!(!a.may_produce(&Value::iri(":V-17")));
        assert!(!a.may_produce(&Value::Int(17)));
        let k = Template::constant(&Value::iri(":C"));
        assert!(k.may_produce(&Value::iri(":C")));
        assert_eq!(Template::constant(&Value::Int(4)).render(&[]), Value::Int(4));
    }

    #[test]
    fn rejects_malformed() {
        assert!(Template::parse(":W-{a").is_err());
        assert!(Template::parse(":W-}").is_err());
        assert!(Template::parse("").is_err());
    }
}
