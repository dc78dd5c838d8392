use std::collections::{BTreeMap, HashMap, HashSet};

use super::{FilterExpr, Instance, Operand, RelError, RelExpr, Relation, Truth, Tuple, Value};

enum COp {
    Col(usize),
    Const(Value),
}

enum CFilter {
    True,
    IsNull(Vec<usize>),
    Eq(COp, COp),
    Lt(COp, COp),
    Not(Box<CFilter>),
    And(Vec<CFilter>),
    Or(Vec<CFilter>),
}

fn compile_op(o: &Operand, attrs: &[String]) -> Result<COp, RelError> {
    Ok(match o {
        Operand::Attr(a) => COp::Col(
            attrs
                .iter()
                .position(|x| x == a)
                .ok_or_else(|| RelError::UnknownAttribute(a.clone()))?,
        ),
        Operand::Const(v) => COp::Const(v.clone()),
    })
}

fn compile_filter(f: &FilterExpr, attrs: &[String]) -> Result<CFilter, RelError> {
    Ok(match f {
        FilterExpr::True => CFilter::True,
        FilterExpr::IsNull(xs) => CFilter::IsNull(
            xs.iter()
                .map(|a| {
                    attrs
                        .iter()
                        .position(|x| x == a)
                        .ok_or_else(|| RelError::UnknownAttribute(a.clone()))
                })
                .collect::<Result<_, _>>()?,
        ),
        FilterExpr::Eq(l, r) => CFilter::Eq(compile_op(l, attrs)?, compile_op(r, attrs)?),
        FilterExpr::Lt(l, r) => CFilter::Lt(compile_op(l, attrs)?, compile_op(r, attrs)?),
        FilterExpr::Not(x) => CFilter::Not(Box::new(compile_filter(x, attrs)?)),
        FilterExpr::And(xs) => CFilter::And(xs.iter().map(|x| compile_filter(x, attrs)).collect::<Result<_, _>>()?),
        FilterExpr::Or(xs) => CFilter::Or(xs.iter().map(|x| compile_filter(x, attrs)).collect::<Result<_, _>>()?),
    })
}

fn op_val<'a>(o: &'a COp, t: &'a [Value]) -> &'a Value {
    match o {
        COp::Col(i) => &t[*i],
        COp::Const(v) => v,
    }
}

fn eval_filter(f: &CFilter, t: &[Value]) -> Result<Truth, RelError> {
    Ok(match f {
        CFilter::True => Truth::True,
        CFilter::IsNull(xs) => Truth::from_bool(xs.iter().all(|&i| t[i].is_null())),
        CFilter::Eq(l, r) => op_val(l, t).eq3(op_val(r, t)),
        CFilter::Lt(l, r) => op_val(l, t).lt3(op_val(r, t)),
        CFilter::Not(x) => eval_filter(x, t)?.not(),
        CFilter::And(xs) => {
            let mut acc = Truth::True;
            for x in xs {
                acc = acc.and(eval_filter(x, t)?);
            }
            acc
        }
        CFilter::Or(xs) => {
            let mut acc = Truth::False;
            for x in xs {
                acc = acc.or(eval_filter(x, t)?);
            }
            acc
        }
    })
}

/// Evaluates a filter on a single tuple over `attrs`.
pub fn eval_filter_on(f: &FilterExpr, attrs: &[String], t: &[Value]) -> Result<Truth, RelError> {
    eval_filter(&compile_filter(f, attrs)?, t)
}

/// Evaluates an expression under set semantics.
pub fn evaluate(expr: &RelExpr, inst: &Instance) -> Result<Relation, RelError> {
    let mut env = BTreeMap::new();
    eval(expr, inst, &mut env)
}

fn align(rel: Relation, attrs: &[String]) -> Result<HashSet<Tuple>, RelError> {
    if rel.attrs() == attrs {
        return Ok(rel.into_parts().1);
    }
    if rel.attrs().len() != attrs.len() {
        return Err(RelError::Plan("incompatible attribute sets".into()));
    }
    Ok(rel.project(attrs)?.into_parts().1)
}

fn eval(expr: &RelExpr, inst: &Instance, env: &mut BTreeMap<String, Relation>) -> Result<Relation, RelError> {
    use RelExpr::*;
    match expr {
        Base(n) => Ok(inst.get(n)?.clone()),
        Empty(a) => Ok(Relation::new(a)),
        Values { attrs, rows } => {
            let mut r = Relation::new(attrs);
            for row in rows {
                if row.len() != attrs.len() {
                    return Err(RelError::Arity { expected: attrs.len(), found: row.len() });
                }
                r.insert(row.clone());
            }
            Ok(r)
        }
        Select(f, c) => {
            let r = eval(c, inst, env)?;
            let cf = compile_filter(f, r.attrs())?;
            let (attrs, tuples) = r.into_parts();
            let mut out = HashSet::with_capacity(tuples.len());
            for t in tuples {
                if eval_filter(&cf, &t)?.is_true() {
                    out.insert(t);
                }
            }
            Ok(Relation::from_parts(attrs, out))
        }
        Project(p, c) => eval(c, inst, env)?.project(p),
        Rename(pairs, c) => {
            let r = eval(c, inst, env)?;
            let mut attrs = r.attrs().to_vec();
            for (new, old) in pairs {
                let i = r.index(old).ok_or_else(|| RelError::UnknownAttribute(old.clone()))?;
                attrs[i] = new.clone();
            }
            let mut seen = HashSet::new();
            if !attrs.iter().all(|a| seen.insert(a)) {
                return Err(RelError::Plan("rename produces duplicate attributes".into()));
            }
            Ok(Relation::from_parts(attrs, r.into_parts().1))
        }
        NaturalJoin(cs) => {
            let mut acc: Option<Relation> = None;
            for c in cs {
                let r = eval(c, inst, env)?;
                acc = Some(match acc {
                    None => r,
                    Some(l) => natural_join(&l, &r),
                });
            }
            Ok(acc.unwrap_or_else(|| Relation::from_rows::<String>(&[], [vec![]])))
        }
        EquiJoin { left, right, on } => {
            let l = eval(left, inst, env)?;
            let r = eval(right, inst, env)?;
            equi_join(&l, &r, on)
        }
        Union(cs) => {
            let mut it = cs.iter();
            let first = eval(it.next().ok_or_else(|| RelError::Plan("empty union".into()))?, inst, env)?;
            let attrs = first.attrs().to_vec();
            let mut tuples = first.into_parts().1;
            for c in it {
                tuples.extend(align(eval(c, inst, env)?, &attrs)?);
            }
            Ok(Relation::from_parts(attrs, tuples))
        }
        Difference(l, r) => {
            let lr = eval(l, inst, env)?;
            let attrs = lr.attrs().to_vec();
            let rt = align(eval(r, inst, env)?, &attrs)?;
            let tuples = lr.into_parts().1.into_iter().filter(|t| !rt.contains(t)).collect();
            Ok(Relation::from_parts(attrs, tuples))
        }
        Padding(p, c) => {
            let r = eval(c, inst, env)?;
            let (mut attrs, tuples) = r.into_parts();
            for a in p {
                if attrs.contains(a) {
                    return Err(RelError::Plan(format!("padding attribute `{a}` already present")));
                }
                attrs.push(a.clone());
            }
            let tuples = tuples
                .into_iter()
                .map(|mut t| {
                    t.extend(std::iter::repeat(Value::Null).take(p.len()));
                    t
                })
                .collect();
            Ok(Relation::from_parts(attrs, tuples))
        }
        UriConstruct { target, template, child } => {
            let r = eval(child, inst, env)?;
            if r.index(target).is_some() {
                return Err(RelError::Plan(format!("constructed attribute `{target}` already present")));
            }
            let idx = r.indices(&template.attrs())?;
            let (mut attrs, tuples) = r.into_parts();
            attrs.push(target.clone());
            let tuples = tuples
                .into_iter()
                .map(|mut t| {
                    let vals: Vec<&Value> = idx.iter().map(|&i| &t[i]).collect();
                    let v = template.render(&vals);
                    t.push(v);
                    t
                })
                .collect();
            Ok(Relation::from_parts(attrs, tuples))
        }
        CteRef(n) => env.get(n).cloned().ok_or_else(|| RelError::UnboundCte(n.clone())),
        WithCte { bindings, body } => {
            let saved = env.clone();
            for (n, e) in bindings {
                let r = eval(e, inst, env)?;
                env.insert(n.clone(), r);
            }
            let out = eval(body, inst, env);
            *env = saved;
            out
        }
    }
}

/// Natural join; tuples agree on shared attributes only when those values are non-null.
pub fn natural_join(l: &Relation, r: &Relation) -> Relation {
    let shared: Vec<String> = l.attrs().iter().filter(|a| r.index(a).is_some()).cloned().collect();
    let li: Vec<usize> = shared.iter().map(|a| l.index(a).unwrap()).collect();
    let ri: Vec<usize> = shared.iter().map(|a| r.index(a).unwrap()).collect();
    let rest: Vec<usize> = (0..r.attrs().len()).filter(|i| !ri.contains(i)).collect();
    let mut attrs = l.attrs().to_vec();
    attrs.extend(rest.iter().map(|&i| r.attrs()[i].clone()));
    let mut table: HashMap<Vec<&Value>, Vec<&Tuple>> = HashMap::new();
    for t in r.iter() {
        let k: Vec<&Value> = ri.iter().map(|&i| &t[i]).collect();
        if k.iter().any(|v| v.is_null()) {
            continue;
        }
        table.entry(k).or_default().push(t);
    }
    let mut out = HashSet::new();
    for t in l.iter() {
        let k: Vec<&Value> = li.iter().map(|&i| &t[i]).collect();
        if k.iter().any(|v| v.is_null()) {
            continue;
        }
        if let Some(ms) = table.get(&k) {
            for m in ms {
                let mut row = t.clone();
                row.extend(rest.iter().map(|&i| m[i].clone()));
                out.insert(row);
            }
        }
    }
    Relation::from_parts(attrs, out)
}

fn equi_join(l: &Relation, r: &Relation, on: &[(String, String)]) -> Result<Relation, RelError> {
    for a in r.attrs() {
        if l.index(a).is_some() {
            return Err(RelError::Plan(format!("equi-join inputs share attribute `{a}`")));
        }
    }
    let li = l.indices(&on.iter().map(|p| p.0.as_str()).collect::<Vec<_>>())?;
    let ri = r.indices(&on.iter().map(|p| p.1.as_str()).collect::<Vec<_>>())?;
    let mut attrs = l.attrs().to_vec();
    attrs.extend(r.attrs().iter().cloned());
    let mut table: HashMap<Vec<&Value>, Vec<&Tuple>> = HashMap::new();
    for t in r.iter() {
        let k: Vec<&Value> = ri.iter().map(|&i| &t[i]).collect();
        if k.iter().any(|v| v.is_null()) {
            continue;
        }
        table.entry(k).or_default().push(t);
    }
    let mut out = HashSet::new();
    for t in l.iter() {
        let k: Vec<&Value> = li.iter().map(|&i| &t[i]).collect();
        if k.iter().any(|v| v.is_null()) {
            continue;
        }
        if let Some(ms) = table.get(&k) {
            for m in ms {
                let mut row = t.clone();
                row.extend(m.iter().cloned());
                out.insert(row);
            }
        }
    }
    Ok(Relation::from_parts(attrs, out))
}
