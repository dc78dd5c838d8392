use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDate;

use crate::relalg::{ColumnType, FilterExpr, Operand, RelExpr, Schema, Value};

use super::MappingError;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TableRef {
    pub relation: String,
    pub alias: String,
}

/// A select-project-join query; attributes are qualified as `alias.column`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpjQuery {
    pub from: Vec<TableRef>,
    /// Conjuncts of the WHERE clause.
    pub conditions: Vec<FilterExpr>,
    /// `(output name, qualified source column)`.
    pub select: Vec<(String, String)>,
}

impl SpjQuery {
    pub fn source_of(&self, out: &str) -> Option<&str> {
        self.select.iter().find(|(o, _)| o == out).map(|(_, s)| s.as_str())
    }

    pub fn outputs(&self) -> Vec<String> {
        self.select.iter().map(|(o, _)| o.clone()).collect()
    }

    pub fn add_condition(&mut self, f: FilterExpr) {
        if !self.conditions.contains(&f) {
            self.conditions.push(f);
        }
    }

    /// Restricts the select list to the given outputs.
    pub fn restrict(&self, outs: &[&str]) -> SpjQuery {
        let mut q = self.clone();
        q.select.retain(|(o, _)| outs.contains(&o.as_str()));
        q
    }

    /// Aliases renamed positionally to `t0, t1, ...`.
    pub fn canonical(&self) -> SpjQuery {
        let map: Vec<(String, String)> = self
            .from
            .iter()
            .enumerate()
            .map(|(i, t)| (t.alias.clone(), format!("t{i}")))
            .collect();
        let ren = |a: &str| -> String {
            match a.split_once('.') {
                Some((al, col)) => match map.iter().find(|(o, _)| o == al) {
                    Some((_, n)) => format!("{n}.{col}"),
                    None => a.to_string(),
                },
                None => a.to_string(),
            }
        };
        SpjQuery {
            from: self
                .from
                .iter()
                .enumerate()
                .map(|(i, t)| TableRef { relation: t.relation.clone(), alias: format!("t{i}") })
                .collect(),
            conditions: self.conditions.iter().map(|c| normalize(&c.rename(&ren))).collect(),
            select: self.select.iter().map(|(o, s)| (o.clone(), ren(s))).collect(),
        }
    }

    /// Lowers to relational algebra: qualified scans, equi-joins, selection, projection.
    pub fn to_relexpr(&self, schema: &Schema) -> Result<RelExpr, MappingError> {
        let mut remaining: Vec<FilterExpr> = self.conditions.clone();
        let mut acc: Option<(RelExpr, Vec<String>)> = None;
        for t in &self.from {
            let cols = schema.attrs(&t.relation)?;
            let scan = RelExpr::rename(
                cols.iter().map(|c| (format!("{}.{c}", t.alias), c.clone())).collect(),
                RelExpr::base(&t.relation),
            );
            acc = Some(match acc {
                None => (scan, vec![t.alias.clone()]),
                Some((left, mut aliases)) => {
                    let prefix = format!("{}.", t.alias);
                    let in_left = |a: &str| aliases.iter().any(|al| a.starts_with(&format!("{al}.")));
                    let mut on = Vec::new();
                    remaining.retain(|c| {
                        if let FilterExpr::Eq(Operand::Attr(a), Operand::Attr(b)) = c {
                            if in_left(a) && b.starts_with(&prefix) {
                                on.push((a.clone(), b.clone()));
                                return false;
                            }
                            if in_left(b) && a.starts_with(&prefix) {
                                on.push((b.clone(), a.clone()));
                                return false;
                            }
                        }
                        true
                    });
                    aliases.push(t.alias.clone());
                    let joined = if on.is_empty() {
                        RelExpr::NaturalJoin(vec![left, scan])
                    } else {
                        RelExpr::EquiJoin { left: Box::new(left), right: Box::new(scan), on }
                    };
                    (joined, aliases)
                }
            });
        }
        let (joined, _) = acc.ok_or_else(|| MappingError::Sql("empty FROM clause".into()))?;
        let selected = RelExpr::select(FilterExpr::and(remaining), joined);
        let srcs: Vec<&str> = self.select.iter().map(|(_, s)| s.as_str()).collect();
        let projected = RelExpr::project(&srcs, selected);
        Ok(RelExpr::rename(self.select.iter().map(|(o, s)| (o.clone(), s.clone())).collect(), projected))
    }
}

fn normalize(f: &FilterExpr) -> FilterExpr {
    match f {
        FilterExpr::Eq(a @ Operand::Attr(x), b @ Operand::Attr(y)) if y < x => FilterExpr::Eq(b.clone(), a.clone()),
        other => other.clone(),
    }
}

impl fmt::Display for SpjQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .select
            .iter()
            .map(|(o, s)| {
                if s.rsplit('.').next() == Some(o.as_str()) {
                    s.clone()
                } else {
                    format!("{s} AS {o}")
                }
            })
            .collect();
        let from: Vec<String> = self
            .from
            .iter()
            .map(|t| if t.alias == t.relation { t.relation.clone() } else { format!("{} {}", t.relation, t.alias) })
            .collect();
        write!(f, "SELECT {} FROM {}", items.join(", "), from.join(", "))?;
        if !self.conditions.is_empty() {
            let conds: Vec<String> = self.conditions.iter().map(sql_condition).collect();
            write!(f, " WHERE {}", conds.join(" AND "))?;
        }
        Ok(())
    }
}

fn sql_operand(o: &Operand) -> String {
    match o {
        Operand::Attr(a) => a.clone(),
        Operand::Const(v) => v.sql_literal(),
    }
}

fn sql_condition(f: &FilterExpr) -> String {
    match f {
        FilterExpr::True => "1 = 1".into(),
        FilterExpr::IsNull(xs) => xs.iter().map(|x| format!("{x} IS NULL")).collect::<Vec<_>>().join(" AND "),
        FilterExpr::Not(x) => match x.as_ref() {
            FilterExpr::IsNull(xs) if xs.len() == 1 => format!("{} IS NOT NULL", xs[0]),
            FilterExpr::Eq(l, r) => format!("{} <> {}", sql_operand(l), sql_operand(r)),
            other => format!("NOT ({})", sql_condition(other)),
        },
        FilterExpr::Eq(l, r) => format!("{} = {}", sql_operand(l), sql_operand(r)),
        FilterExpr::Lt(l, r) => format!("{} < {}", sql_operand(l), sql_operand(r)),
        FilterExpr::And(xs) => format!("({})", xs.iter().map(sql_condition).collect::<Vec<_>>().join(" AND ")),
        FilterExpr::Or(xs) => format!("({})", xs.iter().map(sql_condition).collect::<Vec<_>>().join(" OR ")),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(i64),
    Sym(&'static str),
}

fn tokenize(s: &str) -> Result<Vec<Tok>, MappingError> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\'' {
            let mut lit = String::new();
            i += 1;
            loop {
                match cs.get(i) {
                    Some('\'') if cs.get(i + 1) == Some(&'\'') => {
                        lit.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(ch) => {
                        lit.push(*ch);
                        i += 1;
                    }
                    None => return Err(MappingError::Sql("unterminated string literal".into())),
                }
            }
            out.push(Tok::Str(lit));
        } else if c.is_ascii_digit() || (c == '-' && cs.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            i += 1;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = cs[start..i].iter().collect();
            out.push(Tok::Num(text.parse().map_err(|_| MappingError::Sql(format!("bad number `{text}`")))?));
        } else if c.is_alphabetic() || c == '_' || c == '"' {
            let mut id = String::new();
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_' || cs[i] == '.' || cs[i] == '"') {
                if cs[i] != '"' {
                    id.push(cs[i]);
                }
                i += 1;
            }
            out.push(Tok::Ident(id));
        } else {
            let two: String = cs[i..(i + 2).min(cs.len())].iter().collect();
            let sym = match two.as_str() {
                "<>" => Some("<>"),
                "!=" => Some("<>"),
                "<=" => Some("<="),
                ">=" => Some(">="),
                _ => None,
            };
            if let Some(s) = sym {
                out.push(Tok::Sym(s));
                i += 2;
                continue;
            }
            let sym = match c {
                '=' => "=",
                '<' => "<",
                '>' => ">",
                ',' => ",",
                '(' => "(",
                ')' => ")",
                '*' => "*",
                ';' => ";",
                _ => return Err(MappingError::Sql(format!("unexpected character `{c}`"))),
            };
            out.push(Tok::Sym(sym));
            i += 1;
        }
    }
    Ok(out)
}

enum RawOperand {
    Col(String),
    Const(Value),
}

enum RawCond {
    Cmp(RawOperand, &'static str, RawOperand),
    IsNull(RawOperand, bool),
    Not(Box<RawCond>),
    And(Vec<RawCond>),
    Or(Vec<RawCond>),
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(i)) if i.eq_ignore_ascii_case(k))
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.kw(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), MappingError> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(MappingError::Sql(format!("expected {k}")))
        }
    }

    fn sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, MappingError> {
        match self.peek().cloned() {
            Some(Tok::Ident(i)) if !is_reserved(&i) => {
                self.pos += 1;
                Ok(i)
            }
            other => Err(MappingError::Sql(format!("expected identifier, found {other:?}"))),
        }
    }

    fn operand(&mut self) -> Result<RawOperand, MappingError> {
        match self.peek().cloned() {
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(RawOperand::Const(Value::text(&s)))
            }
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(RawOperand::Const(Value::Int(n)))
            }
            Some(Tok::Ident(i)) if i.eq_ignore_ascii_case("date") => {
                self.pos += 1;
                match self.peek().cloned() {
                    Some(Tok::Str(s)) => {
                        self.pos += 1;
                        let d = NaiveDate::parse_from_str(&s, "%Y-%m-%d")
                            .map_err(|_| MappingError::Sql(format!("bad date `{s}`")))?;
                        Ok(RawOperand::Const(Value::Date(d)))
                    }
                    _ => Ok(RawOperand::Col(i)),
                }
            }
            Some(Tok::Ident(i)) if i.eq_ignore_ascii_case("null") => {
                Err(MappingError::Sql("use IS NULL to test for null".into()))
            }
            _ => Ok(RawOperand::Col(self.ident()?)),
        }
    }

    fn cond(&mut self) -> Result<RawCond, MappingError> {
        let mut parts = vec![self.conj()?];
        while self.eat_kw("or") {
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { RawCond::Or(parts) })
    }

    fn conj(&mut self) -> Result<RawCond, MappingError> {
        let mut parts = vec![self.neg()?];
        while self.eat_kw("and") {
            parts.push(self.neg()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { RawCond::And(parts) })
    }

    fn neg(&mut self) -> Result<RawCond, MappingError> {
        if self.eat_kw("not") {
            return Ok(RawCond::Not(Box::new(self.neg()?)));
        }
        if self.eat_sym("(") {
            let c = self.cond()?;
            if !self.eat_sym(")") {
                return Err(MappingError::Sql("expected `)`".into()));
            }
            return Ok(c);
        }
        let l = self.operand()?;
        if self.eat_kw("is") {
            let negated = self.eat_kw("not");
            self.expect_kw("null")?;
            return Ok(RawCond::IsNull(l, negated));
        }
        let op = match self.peek() {
            Some(Tok::Sym(s)) if ["=", "<>", "<", ">", "<=", ">="].contains(s) => *s,
            other => return Err(MappingError::Sql(format!("expected comparison, found {other:?}"))),
        };
        self.pos += 1;
        let r = self.operand()?;
        Ok(RawCond::Cmp(l, op, r))
    }
}

fn is_reserved(s: &str) -> bool {
    ["select", "from", "where", "and", "or", "not", "as", "join", "inner", "on", "is", "null", "distinct"]
        .iter()
        .any(|k| s.eq_ignore_ascii_case(k))
}

struct Scope<'a> {
    schema: &'a Schema,
    from: &'a [TableRef],
}

impl Scope<'_> {
    fn resolve(&self, col: &str) -> Result<(String, ColumnType), MappingError> {
        if let Some((al, c)) = col.split_once('.') {
            let t = self
                .from
                .iter()
                .find(|t| t.alias == al)
                .ok_or_else(|| MappingError::Sql(format!("unknown table alias `{al}`")))?;
            let ty = self.schema.column_type(&t.relation, c)?;
            return Ok((format!("{al}.{c}"), ty));
        }
        let hits: Vec<&TableRef> = self
            .from
            .iter()
            .filter(|t| self.schema.attrs(&t.relation).map(|a| a.iter().any(|x| x == col)).unwrap_or(false))
            .collect();
        match hits.as_slice() {
            [t] => Ok((format!("{}.{col}", t.alias), self.schema.column_type(&t.relation, col)?)),
            [] => Err(MappingError::Rel(crate::relalg::RelError::UnknownAttribute(col.to_string()))),
            _ => Err(MappingError::Sql(format!("ambiguous column `{col}`"))),
        }
    }

    fn operand(&self, o: &RawOperand, hint: Option<ColumnType>) -> Result<(Operand, Option<ColumnType>), MappingError> {
        Ok(match o {
            RawOperand::Col(c) => {
                let (q, ty) = self.resolve(c)?;
                (Operand::Attr(q), Some(ty))
            }
            RawOperand::Const(v) => {
                let v = match (v, hint) {
                    (Value::Text(s), Some(ColumnType::Date)) => NaiveDate::parse_from_str(s, "%Y-%m-%d")
                        .map(Value::Date)
                        .unwrap_or_else(|_| v.clone()),
                    _ => v.clone(),
                };
                (Operand::Const(v), None)
            }
        })
    }

    fn cond(&self, c: &RawCond) -> Result<FilterExpr, MappingError> {
        Ok(match c {
            RawCond::Cmp(l, op, r) => {
                let hint = |o: &RawOperand| match o {
                    RawOperand::Col(c) => self.resolve(c).ok().map(|x| x.1),
                    RawOperand::Const(_) => None,
                };
                let (lo, _) = self.operand(l, hint(r))?;
                let (ro, _) = self.operand(r, hint(l))?;
                match *op {
                    "=" => FilterExpr::Eq(lo, ro),
                    "<>" => FilterExpr::not(FilterExpr::Eq(lo, ro)),
                    "<" => FilterExpr::Lt(lo, ro),
                    ">" => FilterExpr::Lt(ro, lo),
                    "<=" => FilterExpr::not(FilterExpr::Lt(ro, lo)),
                    ">=" => FilterExpr::not(FilterExpr::Lt(lo, ro)),
                    _ => unreachable!(),
                }
            }
            RawCond::IsNull(o, negated) => {
                let (q, _) = self.operand(o, None)?;
                let Operand::Attr(a) = q else {
                    return Err(MappingError::Sql("IS NULL expects a column".into()));
                };
                let f = FilterExpr::IsNull(vec![a]);
                if *negated {
                    FilterExpr::not(f)
                } else {
                    f
                }
            }
            RawCond::Not(x) => FilterExpr::not(self.cond(x)?),
            RawCond::And(xs) => FilterExpr::and(xs.iter().map(|x| self.cond(x)).collect::<Result<_, _>>()?),
            RawCond::Or(xs) => FilterExpr::Or(xs.iter().map(|x| self.cond(x)).collect::<Result<_, _>>()?),
        })
    }
}

/// Parses `SELECT [DISTINCT] cols FROM tables [JOIN .. ON ..] [WHERE cond]`.
pub fn parse_sql(text: &str, schema: &Schema) -> Result<SpjQuery, MappingError> {
    let mut p = Parser { toks: tokenize(text)?, pos: 0 };
    p.expect_kw("select")?;
    p.eat_kw("distinct");
    let mut items: Vec<(String, Option<String>)> = Vec::new();
    let star = p.eat_sym("*");
    if !star {
        loop {
            let c = p.ident()?;
            let alias = if p.eat_kw("as") { Some(p.ident()?) } else { None };
            items.push((c, alias));
            if !p.eat_sym(",") {
                break;
            }
        }
    }
    p.expect_kw("from")?;
    let mut from = Vec::new();
    let mut raw_conds = Vec::new();
    let table = |p: &mut Parser| -> Result<TableRef, MappingError> {
        let relation = p.ident()?;
        p.eat_kw("as");
        let alias = match p.peek() {
            Some(Tok::Ident(i)) if !is_reserved(i) => p.ident()?,
            _ => relation.clone(),
        };
        Ok(TableRef { relation, alias })
    };
    from.push(table(&mut p)?);
    loop {
        if p.eat_sym(",") {
            from.push(table(&mut p)?);
        } else if p.kw("join") || p.kw("inner") {
            p.eat_kw("inner");
            p.expect_kw("join")?;
            from.push(table(&mut p)?);
            p.expect_kw("on")?;
            raw_conds.push(p.cond()?);
        } else {
            break;
        }
    }
    if p.eat_kw("where") {
        raw_conds.push(p.cond()?);
    }
    p.eat_sym(";");
    if let Some(t) = p.peek() {
        let msg = match t {
            Tok::Ident(i) if ["group", "having", "order", "limit", "union", "left", "outer"]
                .iter()
                .any(|k| i.eq_ignore_ascii_case(k)) =>
            {
                format!("unsupported SQL construct `{i}`")
            }
            other => format!("unexpected trailing token {other:?}"),
        };
        return Err(MappingError::Sql(msg));
    }
    let mut aliases = BTreeSet::new();
    for t in &from {
        schema.attrs(&t.relation)?;
        if !aliases.insert(t.alias.clone()) {
            return Err(MappingError::Sql(format!("duplicate table alias `{}`", t.alias)));
        }
    }
    let scope = Scope { schema, from: &from };
    let mut select = Vec::new();
    if star {
        for t in &from {
            for c in schema.attrs(&t.relation)? {
                select.push((c.clone(), format!("{}.{c}", t.alias)));
            }
        }
    } else {
        for (c, alias) in &items {
            let (q, _) = scope.resolve(c)?;
            let out = alias.clone().unwrap_or_else(|| c.rsplit('.').next().unwrap().to_string());
            select.push((out, q));
        }
    }
    let mut outs = BTreeSet::new();
    let mut srcs = BTreeSet::new();
    for (o, s) in &select {
        if !outs.insert(o.clone()) {
            return Err(MappingError::Sql(format!("duplicate output column `{o}`")));
        }
        if !srcs.insert(s.clone()) {
            return Err(MappingError::Sql(format!("column `{s}` selected twice")));
        }
    }
    let mut conditions = Vec::new();
    for rc in &raw_conds {
        for c in scope.cond(rc)?.conjuncts() {
            if !conditions.contains(&c) {
                conditions.push(c);
            }
        }
    }
    Ok(SpjQuery { from, conditions, select })
}
