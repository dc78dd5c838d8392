use chrono::NaiveDate;

use super::{Condition, GraphPattern, Query, SparqlError, Term, TriplePattern};
use crate::ontology::RDF_TYPE;
use crate::relalg::Value;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Var(String),
    Name(String),
    Iri(String),
    Lit(Value),
    Word(String),
    Blank(String),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMS: &[&str] = &[
    "&&", "||", "!=", "<=", ">=", "^^", "{", "}", "(", ")", ".", ";", ",", "*", "=", "<", ">", "!", "/", "|", "^", "+",
    "[", "]", "-",
];

const REJECT_AGG: &[&str] = &["COUNT", "SUM", "AVG", "MIN", "MAX", "GROUP", "HAVING", "SAMPLE", "GROUP_CONCAT"];
const REJECT_OTHER: &[&str] = &[
    "MINUS", "GRAPH", "SERVICE", "VALUES", "ORDER", "LIMIT", "OFFSET", "CONSTRUCT", "ASK", "DESCRIBE", "EXISTS", "NOT",
];

fn err(line: usize, col: usize, message: impl Into<String>) -> SparqlError {
    SparqlError::Parse { line, col, message: message.into() }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == ':'
}

fn lex(text: &str) -> Result<Vec<Spanned>, SparqlError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '@' && matches!(out.last(), Some(Spanned { tok: Tok::Lit(Value::Text(_)), .. })) {
            advance(&mut i, &mut line, &mut col, 1);
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '-') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (l0, c0) = (line, col);
        let start = i;
        let tok = if (c == '?' || c == '$') && chars.get(i + 1).is_some_and(|d| d.is_alphanumeric() || *d == '_') {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let name: String = chars[i + 1..j].iter().collect();
            advance(&mut i, &mut line, &mut col, j - start);
            Tok::Var(name)
        } else if c == '?' {
            return Err(err(l0, c0, "property paths are not supported"));
        } else if c == '<' && looks_like_iri(&chars[i..]) {
            let mut j = i + 1;
            while chars[j] != '>' {
                j += 1;
            }
            let iri: String = chars[i + 1..j].iter().collect();
            advance(&mut i, &mut line, &mut col, j + 1 - start);
            Tok::Iri(iri)
        } else if c == '"' || c == '\'' {
            let mut j = i + 1;
            let mut s = String::new();
            while j < chars.len() && chars[j] != c {
                if chars[j] == '\\' && j + 1 < chars.len() {
                    j += 1;
                }
                if chars[j] == '\n' {
                    return Err(err(l0, c0, "unterminated string literal"));
                }
                s.push(chars[j]);
                j += 1;
            }
            if j >= chars.len() {
                return Err(err(l0, c0, "unterminated string literal"));
            }
            advance(&mut i, &mut line, &mut col, j + 1 - start);
            Tok::Lit(Value::text(&s))
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j < chars.len() && chars[j] == '.' && chars.get(j + 1).is_some_and(|d| d.is_ascii_digit()) {
                return Err(err(l0, c0, "decimal literals are not supported"));
            }
            let s: String = chars[i..j].iter().collect();
            let n: i64 = s.parse().map_err(|_| err(l0, c0, "integer literal out of range"))?;
            advance(&mut i, &mut line, &mut col, j - start);
            Tok::Lit(Value::Int(n))
        } else if c == '_' && chars.get(i + 1) == Some(&':') {
            let mut j = i + 2;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let name: String = chars[i + 2..j].iter().collect();
            advance(&mut i, &mut line, &mut col, j - start);
            Tok::Blank(name)
        } else if c.is_alphabetic() || c == ':' || c == '_' {
            let mut j = i;
            while j < chars.len() && is_name_char(chars[j]) {
                j += 1;
            }
            while j > i + 1 && chars[j - 1] == '-' {
                j -= 1;
            }
            let s: String = chars[i..j].iter().collect();
            advance(&mut i, &mut line, &mut col, j - start);
            if s.contains(':') {
                Tok::Name(s)
            } else {
                Tok::Word(s)
            }
        } else if let Some(sym) = SYMS.iter().find(|s| chars[i..].starts_with(&s.chars().collect::<Vec<_>>())) {
            advance(&mut i, &mut line, &mut col, sym.len());
            Tok::Sym(sym)
        } else {
            return Err(err(l0, c0, format!("unexpected character '{c}'")));
        };
        out.push(Spanned { tok, line: l0, col: c0 });
    }
    Ok(out)
}

fn looks_like_iri(rest: &[char]) -> bool {
    for &c in &rest[1..] {
        if c == '>' {
            return true;
        }
        if c.is_whitespace() || c == '<' || c == '"' || c == '{' || c == '}' {
            return false;
        }
    }
    false
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
    blank_count: usize,
}

fn typed_literal(lex: &str, datatype: &str) -> Value {
    match datatype {
        "xsd:date" | "http://www.w3.org/2001/XMLSchema#date" => match NaiveDate::parse_from_str(lex, "%Y-%m-%d") {
            Ok(d) if d.format("%Y-%m-%d").to_string() == lex => Value::Date(d),
            _ => Value::text(lex),
        },
        "xsd:integer" | "xsd:int" | "http://www.w3.org/2001/XMLSchema#integer" => match lex.parse::<i64>() {
            Ok(n) if n.to_string() == lex => Value::Int(n),
            _ => Value::text(lex),
        },
        _ => Value::text(lex),
    }
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.col)).unwrap_or(self.end)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, SparqlError> {
        let (l, c) = self.here();
        Err(err(l, c, message))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(x)) if x.eq_ignore_ascii_case(w))
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SparqlError> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected '{s}'"))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), SparqlError> {
        if self.is_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected {w}"))
        }
    }

    fn check_rejected(&self) -> Result<(), SparqlError> {
        if let Some(Tok::Word(w)) = self.peek() {
            let up = w.to_ascii_uppercase();
            if REJECT_AGG.contains(&up.as_str()) {
                return self.fail("aggregates are not supported");
            }
            if REJECT_OTHER.contains(&up.as_str()) {
                return self.fail(format!("{up} is not supported"));
            }
        }
        Ok(())
    }

    fn query(&mut self) -> Result<Query, SparqlError> {
        while self.is_word("PREFIX") || self.is_word("BASE") {
            let base = self.is_word("BASE");
            self.pos += 1;
            if !base {
                match self.next() {
                    Some(Tok::Name(n)) if n.ends_with(':') => {}
                    _ => {
                        self.pos -= 1;
                        return self.fail("expected prefix name");
                    }
                }
            }
            match self.next() {
                Some(Tok::Iri(_)) => {}
                _ => {
                    self.pos -= 1;
                    return self.fail("expected IRI");
                }
            }
        }
        self.check_rejected()?;
        self.expect_word("SELECT")?;
        if self.is_word("DISTINCT") || self.is_word("REDUCED") {
            self.pos += 1;
        }
        let mut select = Vec::new();
        let mut star = false;
        if self.is_sym("*") {
            self.pos += 1;
            star = true;
        } else {
            loop {
                match self.peek() {
                    Some(Tok::Var(v)) => {
                        if select.contains(v) {
                            return self.fail(format!("duplicate variable ?{v}"));
                        }
                        select.push(v.clone());
                        self.pos += 1;
                    }
                    Some(Tok::Sym("(")) => return self.fail("aggregates are not supported"),
                    _ => break,
                }
            }
            if select.is_empty() {
                return self.fail("expected variables or '*'");
            }
        }
        if self.is_word("WHERE") {
            self.pos += 1;
        }
        let pattern = self.group()?;
        self.check_rejected()?;
        if self.pos < self.toks.len() {
            return self.fail("unexpected trailing input");
        }
        if star {
            select = pattern.vars().into_iter().filter(|v| !v.starts_with("_:")).collect();
        }
        Ok(Query { select, pattern })
    }

    fn group(&mut self) -> Result<GraphPattern, SparqlError> {
        self.expect_sym("{")?;
        let mut acc = GraphPattern::Bgp(vec![]);
        let mut filters = Vec::new();
        loop {
            self.check_rejected()?;
            if self.is_sym("}") {
                self.pos += 1;
                break;
            }
            if self.is_sym(".") {
                self.pos += 1;
                continue;
            }
            if self.peek().is_none() {
                return self.fail("expected '}'");
            }
            if self.is_word("SELECT") {
                return self.fail("subqueries are not supported");
            }
            if self.is_word("OPTIONAL") {
                self.pos += 1;
                let inner = self.group()?;
                let (p, f) = match inner {
                    GraphPattern::Filter(p, f) => (*p, f),
                    other => (other, Condition::True),
                };
                acc = GraphPattern::Opt(Box::new(acc), Box::new(p), f);
            } else if self.is_word("FILTER") {
                self.pos += 1;
                filters.push(self.constraint()?);
            } else if self.is_word("BIND") {
                let at = self.here();
                self.pos += 1;
                self.expect_sym("(")?;
                let c = match self.term()? {
                    Term::Const(c) => c,
                    Term::Var(_) => return self.fail("BIND supports only constants"),
                };
                self.expect_word("AS")?;
                let v = match self.next() {
                    Some(Tok::Var(v)) => v,
                    _ => {
                        self.pos -= 1;
                        return self.fail("expected variable");
                    }
                };
                self.expect_sym(")")?;
                if acc.vars().contains(&v) {
                    return Err(err(at.0, at.1, format!("BIND target ?{v} is already in scope")));
                }
                acc = GraphPattern::Bind(Box::new(acc), v, c);
            } else if self.is_sym("{") {
                let mut p = self.group()?;
                while self.is_word("UNION") {
                    self.pos += 1;
                    let q = self.group()?;
                    p = GraphPattern::Union(Box::new(p), Box::new(q));
                }
                acc = join(acc, p);
            } else {
                let tps = self.triples()?;
                acc = join(acc, GraphPattern::Bgp(tps));
            }
        }
        if filters.is_empty() {
            Ok(acc)
        } else {
            Ok(GraphPattern::Filter(Box::new(acc), Condition::and(filters)))
        }
    }

    fn triples(&mut self) -> Result<Vec<TriplePattern>, SparqlError> {
        let mut out = Vec::new();
        let s = self.node()?;
        loop {
            let p = self.verb()?;
            loop {
                let o = self.node()?;
                out.push(TriplePattern::new(s.clone(), p.clone(), o));
                if self.is_sym(",") {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            if self.is_sym(";") {
                self.pos += 1;
                if self.is_sym(".") || self.is_sym("}") {
                    break;
                }
            } else {
                break;
            }
        }
        if !(self.is_sym(".") || self.is_sym("}") || self.peek().is_none() || matches!(self.peek(), Some(Tok::Word(_)))) {
            return self.fail("expected '.' or '}'");
        }
        Ok(out)
    }

    fn verb(&mut self) -> Result<Term, SparqlError> {
        if self.is_sym("^") || self.is_sym("!") || self.is_sym("(") {
            return self.fail("property paths are not supported");
        }
        let t = if self.is_word("a") {
            self.pos += 1;
            Term::Const(Value::iri(RDF_TYPE))
        } else {
            match self.peek() {
                Some(Tok::Var(_)) | Some(Tok::Name(_)) | Some(Tok::Iri(_)) => self.term()?,
                _ => return self.fail("expected predicate"),
            }
        };
        if self.is_sym("/") || self.is_sym("|") || self.is_sym("*") || self.is_sym("+") {
            return self.fail("property paths are not supported");
        }
        Ok(t)
    }

    fn node(&mut self) -> Result<Term, SparqlError> {
        match self.peek() {
            Some(Tok::Blank(b)) => {
                let v = format!("_:{b}");
                self.pos += 1;
                Ok(Term::Var(v))
            }
            Some(Tok::Sym("[")) => {
                self.pos += 1;
                if !self.is_sym("]") {
                    return self.fail("blank node property lists are not supported");
                }
                self.pos += 1;
                self.blank_count += 1;
                Ok(Term::Var(format!("_:anon{}", self.blank_count)))
            }
            _ => self.term(),
        }
    }

    fn term(&mut self) -> Result<Term, SparqlError> {
        let neg = if self.is_sym("-") {
            self.pos += 1;
            true
        } else {
            false
        };
        let t = match self.next() {
            Some(Tok::Var(v)) if !neg => Term::Var(v),
            Some(Tok::Name(n)) if !neg => Term::Const(Value::iri(&n)),
            Some(Tok::Iri(i)) if !neg => Term::Const(Value::iri(&i)),
            Some(Tok::Lit(Value::Int(n))) => Term::Const(Value::Int(if neg { -n } else { n })),
            Some(Tok::Lit(Value::Text(s))) if !neg => {
                if self.is_sym("^^") {
                    self.pos += 1;
                    let dt = match self.next() {
                        Some(Tok::Name(n)) => n,
                        Some(Tok::Iri(i)) => i,
                        _ => {
                            self.pos -= 1;
                            return self.fail("expected datatype");
                        }
                    };
                    Term::Const(typed_literal(&s, &dt))
                } else {
                    Term::Const(Value::Text(s))
                }
            }
            Some(Tok::Word(w)) if w.eq_ignore_ascii_case("true") || w.eq_ignore_ascii_case("false") => {
                self.pos -= 1;
                return self.fail("boolean literals are not supported");
            }
            _ => {
                self.pos -= 1;
                return self.fail("expected term");
            }
        };
        Ok(t)
    }

    fn constraint(&mut self) -> Result<Condition, SparqlError> {
        if self.is_word("bound") {
            return self.primary();
        }
        self.expect_sym("(")?;
        let c = self.or_expr()?;
        self.expect_sym(")")?;
        Ok(c)
    }

    fn or_expr(&mut self) -> Result<Condition, SparqlError> {
        let mut parts = vec![self.and_expr()?];
        while self.is_sym("||") {
            self.pos += 1;
            parts.push(self.and_expr()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Condition::Or(parts) })
    }

    fn and_expr(&mut self) -> Result<Condition, SparqlError> {
        let mut parts = vec![self.unary()?];
        while self.is_sym("&&") {
            self.pos += 1;
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Condition::And(parts) })
    }

    fn unary(&mut self) -> Result<Condition, SparqlError> {
        if self.is_sym("!") {
            self.pos += 1;
            return Ok(Condition::Not(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Condition, SparqlError> {
        self.check_rejected()?;
        if self.is_sym("(") {
            self.pos += 1;
            let c = self.or_expr()?;
            self.expect_sym(")")?;
            return Ok(c);
        }
        if self.is_word("bound") {
            self.pos += 1;
            self.expect_sym("(")?;
            let v = match self.next() {
                Some(Tok::Var(v)) => v,
                _ => {
                    self.pos -= 1;
                    return self.fail("expected variable");
                }
            };
            self.expect_sym(")")?;
            return Ok(Condition::Bound(v));
        }
        if let Some(Tok::Word(w)) = self.peek() {
            let w = w.clone();
            return self.fail(format!("function {w} is not supported"));
        }
        let a = self.term()?;
        let op = match self.peek() {
            Some(Tok::Sym(s)) if ["=", "!=", "<", ">", "<=", ">="].contains(s) => *s,
            _ => return self.fail("expected comparison operator"),
        };
        self.pos += 1;
        let b = self.term()?;
        Ok(match op {
            "=" => Condition::Eq(a, b),
            "!=" => Condition::Not(Box::new(Condition::Eq(a, b))),
            "<" => Condition::Lt(a, b),
            ">" => Condition::Lt(b, a),
            "<=" => Condition::Not(Box::new(Condition::Lt(b, a))),
            _ => Condition::Not(Box::new(Condition::Lt(a, b))),
        })
    }
}

fn join(acc: GraphPattern, p: GraphPattern) -> GraphPattern {
    match (acc, p) {
        (GraphPattern::Bgp(a), p) if a.is_empty() => p,
        (GraphPattern::Bgp(mut a), GraphPattern::Bgp(b)) => {
            for t in b {
                if !a.contains(&t) {
                    a.push(t);
                }
            }
            GraphPattern::Bgp(a)
        }
        (acc, p) => GraphPattern::Join(Box::new(acc), Box::new(p)),
    }
}

/// Parses a SPARQL SELECT query of the supported fragment.
pub fn parse_query(text: &str) -> Result<Query, SparqlError> {
    let toks = lex(text)?;
    let last_line = text.lines().count().max(1);
    let last_col = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    let mut p = Parser { toks, pos: 0, end: (last_line, last_col), blank_count: 0 };
    p.query()
}
