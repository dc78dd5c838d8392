use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use chrono::NaiveDate;


/// Three-valued truth: true, false, unknown (ε).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    pub fn from_bool(b: bool) -> Truth {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }

    pub fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }

    pub fn and(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Unknown,
        }
    }

    pub fn or(self, other: Truth) -> Truth {
        self.not().and(other.not()).not()
    }

    pub fn is_true(self) -> bool {
        self == Truth::True
    }
}

/// A database value. IRIs are the values produced by IRI templates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Null,
    Int(i64),
    Text(Arc<str>),
    Date(NaiveDate),
    Iri(Arc<str>),
}

impl Value {
    pub fn text(s: &str) -> Value {
        Value::Text(Arc::from(s))
    }

    pub fn iri(s: &str) -> Value {
        Value::Iri(Arc::from(s))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Int(_) => "int",
            Value::Text(_) => "text",
            Value::Date(_) => "date",
            Value::Iri(_) => "iri",
        }
    }

    /// Lexical form used when the value is spliced into a template.
    pub fn lexical(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Int(i) => i.to_string(),
            Value::Text(s) | Value::Iri(s) => s.to_string(),
            Value::Date(d) => d.format("%Y-%m-%d").to_string(),
        }
    }

    /// Equality of terms: ε when a side is null, false across types.
    pub fn eq3(&self, other: &Value) -> Truth {
        if self.is_null() || other.is_null() {
            Truth::Unknown
        } else {
            Truth::from_bool(self == other)
        }
    }

    /// Strict order: ε when a side is null, across types or on IRIs.
    pub fn lt3(&self, other: &Value) -> Truth {
        let ord = match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            _ => return Truth::Unknown,
        };
        Truth::from_bool(ord == Ordering::Less)
    }

    /// SQL literal rendering.
    pub fn sql_literal(&self) -> String {
        match self {
            Value::Null => "NULL".to_string(),
            Value::Int(i) => i.to_string(),
            Value::Text(s) | Value::Iri(s) => format!("'{}'", s.replace('\'', "''")),
            Value::Date(d) => format!("DATE '{}'", d.format("%Y-%m-%d")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => write!(f, "null"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Text(s) => write!(f, "\"{}\"", s.replace('"', "\\\"")),
            Value::Date(d) => write!(f, "\"{}\"^^xsd:date", d.format("%Y-%m-%d")),
            Value::Iri(s) => {
                if s.contains("://") {
                    write!(f, "<{s}>")
                } else {
                    write!(f, "{s}")
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kleene_tables() {
        use Truth::*;
        assert_eq!(Unknown.not(), Unknown);
        assert_eq!(False.and(Unknown), False);
        assert_eq!(Unknown.and(False), False);
        assert_eq!(True.and(True), True);
        assert_eq!(True.and(Unknown), Unknown);
        assert_eq!(Unknown.or(True), True);
        assert_eq!(False.or(Unknown), Unknown);
    }

    #[test]
    fn null_comparison_is_unknown() {
        assert_eq!(Value::Null.eq3(&Value::Int(1)), Truth::Unknown);
        assert_eq!(Value::Int(1).lt3(&Value::Null), Truth::Unknown);
    }

    #[test]
    fn ordering_across_types_is_unknown() {
        assert_eq!(Value::Int(1).lt3(&Value::text("a")), Truth::Unknown);
        assert_eq!(Value::iri(":a").lt3(&Value::iri(":b")), Truth::Unknown);
        assert_eq!(Value::Int(1).eq3(&Value::text("1")), Truth::False);
    }
}
