use std::collections::{HashMap, HashSet};

use super::{RelError, Relation, Value};

/// Whether `x → y` holds after discarding tuples with a null in `x ∪ y`.
pub fn check_fd<S: AsRef<str>>(rel: &Relation, x: &[S], y: &[S]) -> Result<bool, RelError> {
    Ok(fd_violation(rel, x, y)?.is_none())
}

/// A pair of tuples violating `x → y`, if any.
pub fn fd_violation<S: AsRef<str>>(
    rel: &Relation,
    x: &[S],
    y: &[S],
) -> Result<Option<(Vec<Value>, Vec<Value>)>, RelError> {
    let xi = rel.indices(x)?;
    let yi = rel.indices(y)?;
    let mut rows: Vec<&Vec<Value>> = rel.iter().collect();
    rows.sort();
    let mut seen: HashMap<Vec<&Value>, &Vec<Value>> = HashMap::new();
    for t in rows {
        if xi.iter().chain(&yi).any(|&i| t[i].is_null()) {
            continue;
        }
        let k: Vec<&Value> = xi.iter().map(|&i| &t[i]).collect();
        match seen.get(&k) {
            Some(prev) => {
                if yi.iter().any(|&i| prev[i] != t[i]) {
                    let mut pair = [(*prev).clone(), t.clone()];
                    pair.sort();
                    let [a, b] = pair;
                    return Ok(Some((a, b)));
                }
            }
            None => {
                seen.insert(k, t);
            }
        }
    }
    Ok(None)
}

/// Whether `π_cols(a) ⊆ π_cols(b)` where `col_map` pairs an attribute of `a` with one of `b`.
pub fn check_containment(a: &Relation, b: &Relation, col_map: &[(String, String)]) -> Result<bool, RelError> {
    Ok(containment_witness(a, b, col_map)?.is_none())
}

/// A projected tuple of `a` missing from `b`, if any.
pub fn containment_witness(
    a: &Relation,
    b: &Relation,
    col_map: &[(String, String)],
) -> Result<Option<Vec<Value>>, RelError> {
    if col_map.is_empty() && a.attrs().len() != b.attrs().len() {
        return Err(RelError::Arity { expected: a.attrs().len(), found: b.attrs().len() });
    }
    let (ac, bc): (Vec<&str>, Vec<&str>) = if col_map.is_empty() {
        (a.attrs().iter().map(|s| s.as_str()).collect(), b.attrs().iter().map(|s| s.as_str()).collect())
    } else {
        col_map.iter().map(|(x, y)| (x.as_str(), y.as_str())).unzip()
    };
    let ai = a.indices(&ac)?;
    let bi = b.indices(&bc)?;
    let set: HashSet<Vec<&Value>> = b.iter().map(|t| bi.iter().map(|&i| &t[i]).collect()).collect();
    let mut missing: Vec<Vec<Value>> = a
        .iter()
        .map(|t| ai.iter().map(|&i| &t[i]).collect::<Vec<&Value>>())
        .filter(|k| !set.contains(k))
        .map(|k| k.into_iter().cloned().collect())
        .collect();
    missing.sort();
    Ok(missing.into_iter().next())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(attrs: &[&str], rows: &[&[i64]]) -> Relation {
        Relation::from_rows(attrs, rows.iter().map(|r| r.iter().map(|v| Value::Int(*v)).collect()))
    }

    #[test]
    fn fd_examples() {
        assert!(check_fd(&rel(&["x", "y", "z"], &[&[1, 2, 3]]), &["x"], &["y"]).unwrap());
        assert!(check_fd(&rel(&["x", "y"], &[]), &["x"], &["y"]).unwrap());
        assert!(!check_fd(&rel(&["x", "y"], &[&[1, 2], &[1, 3]]), &["x"], &["y"]).unwrap());
    }

    #[test]
    fn fd_ignores_nulls() {
        let r = Relation::from_rows(
            &["x", "y"],
            vec![vec![Value::Int(1), Value::Int(2)], vec![Value::Int(1), Value::Null]],
        );
        assert!(check_fd(&r, &["x"], &["y"]).unwrap());
    }

    #[test]
    fn containment_examples() {
        let a = rel(&["x", "y"], &[&[1, 2]]);
        let b = rel(&["x", "y"], &[&[1, 3]]);
        assert!(!check_containment(&a, &b, &[]).unwrap());
        assert!(check_containment(&a, &a, &[]).unwrap());
        let c = rel(&["x"], &[&[1]]);
        assert!(check_containment(&a, &c, &[]).is_err());
        assert!(check_containment(&a, &c, &[("x".into(), "x".into())]).unwrap());
    }

    fn brute_force_fd(rows: &[Vec<Option<i64>>], x: &[usize], y: &[usize]) -> bool {
        let keep: Vec<&Vec<Option<i64>>> =
            rows.iter().filter(|r| x.iter().chain(y).all(|&i| r[i].is_some())).collect();
        for a in &keep {
            for b in &keep {
                if x.iter().all(|&i| a[i] == b[i]) && !y.iter().all(|&i| a[i] == b[i]) {
                    return false;
                }
            }
        }
        true
    }

    proptest! {
        #[test]
        fn fd_agrees_with_pairwise_oracle(
            rows in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.85, 0i64..3), 3), 0..12),
            x in prop::sample::subsequence(vec![0usize, 1, 2], 1..3),
            y in prop::sample::subsequence(vec![0usize, 1, 2], 1..3),
        ) {
            let attrs = ["a", "b", "c"];
            let r = Relation::from_rows(
                &attrs,
                rows.iter().map(|row| row.iter().map(|v| v.map(Value::Int).unwrap_or(Value::Null)).collect()),
            );
            let xs: Vec<&str> = x.iter().map(|&i| attrs[i]).collect();
            let ys: Vec<&str> = y.iter().map(|&i| attrs[i]).collect();
            prop_assert_eq!(check_fd(&r, &xs, &ys).unwrap(), brute_force_fd(&rows, &x, &y));
        }
    }
}
