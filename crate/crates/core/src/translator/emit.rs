//! Deterministic SQL text for relational expressions.

use std::collections::BTreeMap;

use crate::relalg::{Catalog, FilterExpr, Operand, RelError, RelExpr, Segment, Template, TermKind, Value};

pub fn quote(id: &str) -> String {
    format!("\"{}\"", id.replace('"', "\"\""))
}

fn lit(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

/// Column name to SQL expression.
type Cols = Vec<(String, String)>;

fn col<'a>(cols: &'a Cols, a: &str) -> Result<&'a str, RelError> {
    cols.iter()
        .find(|(n, _)| n == a)
        .map(|(_, e)| e.as_str())
        .ok_or_else(|| RelError::UnknownAttribute(a.to_string()))
}

fn operand(o: &Operand, cols: &Cols) -> Result<String, RelError> {
    Ok(match o {
        Operand::Attr(a) => col(cols, a)?.to_string(),
        Operand::Const(v) => v.sql_literal(),
    })
}

fn filter(f: &FilterExpr, cols: &Cols) -> Result<String, RelError> {
    let join = |xs: &[FilterExpr], sep: &str| -> Result<String, RelError> {
        let parts = xs.iter().map(|x| filter(x, cols).map(|s| format!("({s})"))).collect::<Result<Vec<_>, _>>()?;
        Ok(parts.join(sep))
    };
    Ok(match f {
        FilterExpr::True => "TRUE".into(),
        FilterExpr::IsNull(attrs) if attrs.is_empty() => "TRUE".into(),
        FilterExpr::IsNull(attrs) => attrs
            .iter()
            .map(|a| col(cols, a).map(|e| format!("{e} IS NULL")))
            .collect::<Result<Vec<_>, _>>()?
            .join(" AND "),
        FilterExpr::Not(x) => match x.as_ref() {
            FilterExpr::IsNull(a) if a.len() == 1 => format!("{} IS NOT NULL", col(cols, &a[0])?),
            _ => format!("NOT ({})", filter(x, cols)?),
        },
        FilterExpr::Eq(a, b) => format!("{} = {}", operand(a, cols)?, operand(b, cols)?),
        FilterExpr::Lt(a, b) => format!("{} < {}", operand(a, cols)?, operand(b, cols)?),
        FilterExpr::And(xs) if xs.is_empty() => "TRUE".into(),
        FilterExpr::Or(xs) if xs.is_empty() => "FALSE".into(),
        FilterExpr::And(xs) if xs.len() == 1 => filter(&xs[0], cols)?,
        FilterExpr::And(xs) => join(xs, " AND ")?,
        FilterExpr::Or(xs) => join(xs, " OR ")?,
    })
}

/// SQL expression filling the placeholders of a template; `cols` maps placeholders to expressions.
fn template_expr(t: &Template, cols: &Cols) -> Result<String, RelError> {
    if t.is_constant() {
        return Ok(t.render(&[]).sql_literal());
    }
    if let [Segment::Attr(a)] = t.segments.as_slice() {
        if t.kind == TermKind::Iri || t.kind == (TermKind::Literal { datatype: None }) {
            return Ok(col(cols, a)?.to_string());
        }
    }
    let parts: Vec<String> = t
        .segments
        .iter()
        .map(|s| match s {
            Segment::Lit(l) => Ok(lit(l)),
            Segment::Attr(a) => col(cols, a).map(|e| format!("CAST({e} AS VARCHAR)")),
        })
        .collect::<Result<_, _>>()?;
    let text = if parts.len() == 1 { parts[0].clone() } else { parts.join(" || ") };
    Ok(match &t.kind {
        TermKind::Literal { datatype: Some(dt) } if dt == "xsd:date" => format!("CAST({text} AS DATE)"),
        _ => text,
    })
}

/// SQL for a template over columns of table alias `q`.
pub fn template_sql(t: &Template, q: &str) -> String {
    let cols: Cols = t.attrs().iter().map(|a| (a.to_string(), format!("{q}{}", quote(a)))).collect();
    template_expr(t, &cols).expect("placeholders are bound")
}

/// A single `SELECT ... FROM ... WHERE ...` under construction.
#[derive(Clone)]
struct Block {
    from: String,
    cols: Cols,
    wheres: Vec<String>,
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("  {l}")).collect::<Vec<_>>().join("\n")
}

impl Block {
    fn render(&self) -> String {
        let list = if self.cols.is_empty() {
            "1 AS \"#unit\"".to_string()
        } else {
            self.cols
                .iter()
                .map(|(n, e)| if *e == format!("{}.{}", alias_of(e), quote(n)) { e.clone() } else { format!("{e} AS {}", quote(n)) })
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut s = format!("SELECT DISTINCT {list}");
        if !self.from.is_empty() {
            s.push_str(&format!("\nFROM {}", self.from));
        }
        let wheres: Vec<&String> = self.wheres.iter().filter(|w| w.as_str() != "TRUE").collect();
        if !wheres.is_empty() {
            s.push_str(&format!("\nWHERE {}", wheres.iter().map(|w| w.as_str()).collect::<Vec<_>>().join("\n  AND ")));
        }
        s
    }
}

fn alias_of(e: &str) -> &str {
    e.split_once('.').map(|(a, _)| a).unwrap_or("")
}

struct Emitter<'a> {
    cat: &'a dyn Catalog,
    next: usize,
}

impl Emitter<'_> {
    fn alias(&mut self) -> String {
        self.next += 1;
        format!("t{}", self.next)
    }

    fn table(&mut self, name: &str, attrs: &[String]) -> Block {
        let a = self.alias();
        Block {
            from: format!("{} AS {a}", quote(name)),
            cols: attrs.iter().map(|x| (x.clone(), format!("{a}.{}", quote(x)))).collect(),
            wheres: vec![],
        }
    }

    fn subquery(&mut self, text: String, attrs: &[String]) -> Block {
        let a = self.alias();
        Block {
            from: format!("(\n{}\n) AS {a}", indent(&text)),
            cols: attrs.iter().map(|x| (x.clone(), format!("{a}.{}", quote(x)))).collect(),
            wheres: vec![],
        }
    }

    fn closed(&mut self, e: &RelExpr, env: &BTreeMap<String, Vec<String>>) -> Result<String, RelError> {
        let attrs = e.attrs_in(self.cat, env)?;
        match e {
            RelExpr::Union(cs) => {
                let mut parts = Vec::new();
                for c in cs {
                    let b = self.block(c, env)?;
                    let b = Block { cols: attrs.iter().map(|a| col(&b.cols, a).map(|x| (a.clone(), x.to_string()))).collect::<Result<_, _>>()?, ..b };
                    parts.push(b.render());
                }
                Ok(parts.join("\nUNION\n"))
            }
            RelExpr::Difference(l, r) => {
                let lb = self.block(l, env)?;
                let rb = self.block(r, env)?;
                let align = |b: Block| -> Result<Block, RelError> {
                    Ok(Block { cols: attrs.iter().map(|a| col(&b.cols, a).map(|x| (a.clone(), x.to_string()))).collect::<Result<_, _>>()?, ..b })
                };
                Ok(format!("{}\nEXCEPT\n{}", align(lb)?.render(), align(rb)?.render()))
            }
            RelExpr::WithCte { bindings, body } => {
                let mut env2 = env.clone();
                let mut defs = Vec::new();
                for (n, b) in bindings {
                    defs.push(format!("{} AS (\n{}\n)", quote(n), indent(&self.closed(b, &env2)?)));
                    env2.insert(n.clone(), b.attrs_in(self.cat, &env2)?);
                }
                Ok(format!("WITH {}\n{}", defs.join(",\n"), self.closed(body, &env2)?))
            }
            _ => Ok(self.block(e, env)?.render()),
        }
    }

    fn block(&mut self, e: &RelExpr, env: &BTreeMap<String, Vec<String>>) -> Result<Block, RelError> {
        let attrs = e.attrs_in(self.cat, env)?;
        Ok(match e {
            RelExpr::Base(n) | RelExpr::CteRef(n) => self.table(n, &attrs),
            RelExpr::Empty(_) => Block {
                from: String::new(),
                cols: attrs.iter().map(|a| (a.clone(), "CAST(NULL AS VARCHAR)".to_string())).collect(),
                wheres: vec!["1 = 0".into()],
            },
            RelExpr::Values { rows, .. } if rows.len() == 1 => Block {
                from: String::new(),
                cols: attrs.iter().cloned().zip(rows[0].iter().map(Value::sql_literal)).collect(),
                wheres: vec![],
            },
            RelExpr::Values { rows, .. } if rows.is_empty() || attrs.is_empty() => {
                return self.block(&RelExpr::Empty(attrs), env);
            }
            RelExpr::Values { rows, .. } => {
                let a = self.alias();
                let body: Vec<String> = rows
                    .iter()
                    .map(|r| format!("({})", r.iter().map(Value::sql_literal).collect::<Vec<_>>().join(", ")))
                    .collect();
                let names: Vec<String> = attrs.iter().map(|x| quote(x)).collect();
                Block {
                    from: format!("(VALUES {}) AS {a}({})", body.join(", "), names.join(", ")),
                    cols: attrs.iter().map(|x| (x.clone(), format!("{a}.{}", quote(x)))).collect(),
                    wheres: vec![],
                }
            }
            RelExpr::Select(f, c) => {
                let mut b = self.block(c, env)?;
                for part in f.conjuncts() {
                    let w = filter(&part, &b.cols)?;
                    if !b.wheres.contains(&w) {
                        b.wheres.push(w);
                    }
                }
                b
            }
            RelExpr::Project(p, c) => {
                let b = self.block(c, env)?;
                let cols = p.iter().map(|a| col(&b.cols, a).map(|x| (a.clone(), x.to_string()))).collect::<Result<_, _>>()?;
                Block { cols, ..b }
            }
            RelExpr::Rename(pairs, c) => {
                let mut b = self.block(c, env)?;
                for (name, _) in b.cols.iter_mut() {
                    if let Some((new, _)) = pairs.iter().find(|(_, o)| o == name) {
                        *name = new.clone();
                    }
                }
                b
            }
            RelExpr::Padding(pad, c) => {
                let mut b = self.block(c, env)?;
                b.cols.extend(pad.iter().map(|a| (a.clone(), "CAST(NULL AS VARCHAR)".to_string())));
                b
            }
            RelExpr::UriConstruct { target, template, child } => {
                let mut b = self.block(child, env)?;
                let x = template_expr(template, &b.cols)?;
                b.cols.push((target.clone(), x));
                b
            }
            RelExpr::NaturalJoin(cs) => {
                let mut acc: Option<Block> = None;
                for c in cs {
                    let b = self.block(c, env)?;
                    acc = Some(match acc {
                        None => b,
                        Some(l) => {
                            let on: Vec<String> = b
                                .cols
                                .iter()
                                .filter_map(|(n, e)| col(&l.cols, n).ok().map(|le| format!("{le} = {e}")))
                                .collect();
                            let mut cols = l.cols.clone();
                            cols.extend(b.cols.iter().filter(|(n, _)| col(&l.cols, n).is_err()).cloned());
                            self.combine(l, b, on, cols)
                        }
                    });
                }
                acc.unwrap_or(Block { from: String::new(), cols: vec![], wheres: vec![] })
            }
            RelExpr::EquiJoin { left, right, on } => {
                let l = self.block(left, env)?;
                let r = self.block(right, env)?;
                let cond = on
                    .iter()
                    .map(|(a, b)| Ok(format!("{} = {}", col(&l.cols, a)?, col(&r.cols, b)?)))
                    .collect::<Result<Vec<_>, RelError>>()?;
                let mut cols = l.cols.clone();
                cols.extend(r.cols.iter().cloned());
                self.combine(l, r, cond, cols)
            }
            RelExpr::Union(_) | RelExpr::Difference(..) | RelExpr::WithCte { .. } => {
                let text = self.closed(e, env)?;
                self.subquery(text, &attrs)
            }
        })
    }

    fn combine(&mut self, l: Block, r: Block, on: Vec<String>, cols: Cols) -> Block {
        let (l, r) = (self.sourced(l), self.sourced(r));
        let from = if on.is_empty() {
            format!("{}\nCROSS JOIN {}", l.from, r.from)
        } else {
            format!("{}\nJOIN {} ON {}", l.from, r.from, on.join(" AND "))
        };
        let mut wheres = l.wheres;
        for w in r.wheres {
            if !wheres.contains(&w) {
                wheres.push(w);
            }
        }
        Block { from, cols, wheres }
    }

    /// A block usable as a join operand: one without a FROM clause becomes a subquery.
    fn sourced(&mut self, b: Block) -> Block {
        if !b.from.is_empty() {
            return b;
        }
        let text = b.render();
        let a = self.alias();
        Block {
            from: format!("(\n{}\n) AS {a}", indent(&text)),
            cols: b.cols.iter().map(|(n, _)| (n.clone(), format!("{a}.{}", quote(n)))).collect(),
            wheres: vec![],
        }
    }
}

/// Emits SQL; the same expression always yields the same text.
pub fn emit_sql(e: &RelExpr, cat: &dyn Catalog) -> Result<String, RelError> {
    let mut em = Emitter { cat, next: 0 };
    let mut s = em.closed(e, &BTreeMap::new())?;
    s.push('\n');
    Ok(s)
}
