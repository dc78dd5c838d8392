use std::collections::{BTreeMap, HashSet};
use std::fmt;

use super::{Catalog, ColumnType, RelError, Schema, Value};

pub type Tuple = Vec<Value>;

/// A set of tuples over an ordered attribute list.
#[derive(Clone, Debug, Default)]
pub struct Relation {
    attrs: Vec<String>,
    tuples: HashSet<Tuple>,
}

impl Relation {
    pub fn new<S: AsRef<str>>(attrs: &[S]) -> Relation {
        Relation { attrs: attrs.iter().map(|a| a.as_ref().to_string()).collect(), tuples: HashSet::new() }
    }

    pub fn from_rows<S: AsRef<str>>(attrs: &[S], rows: impl IntoIterator<Item = Tuple>) -> Relation {
        let mut r = Relation::new(attrs);
        for t in rows {
            r.insert(t);
        }
        r
    }

    pub fn attrs(&self) -> &[String] {
        &self.attrs
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Inserts a tuple; panics on arity mismatch.
    pub fn insert(&mut self, t: Tuple) -> bool {
        assert_eq!(t.len(), self.attrs.len(), "tuple arity mismatch");
        self.tuples.insert(t)
    }

    pub fn contains(&self, t: &[Value]) -> bool {
        self.tuples.contains(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tuple> {
        self.tuples.iter()
    }

    pub fn index(&self, attr: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a == attr)
    }

    pub fn indices<S: AsRef<str>>(&self, attrs: &[S]) -> Result<Vec<usize>, RelError> {
        attrs
            .iter()
            .map(|a| {
                self.index(a.as_ref())
                    .ok_or_else(|| RelError::UnknownAttribute(a.as_ref().to_string()))
            })
            .collect()
    }

    pub fn project<S: AsRef<str>>(&self, attrs: &[S]) -> Result<Relation, RelError> {
        let idx = self.indices(attrs)?;
        let mut out = Relation::new(attrs);
        for t in &self.tuples {
            out.tuples.insert(idx.iter().map(|&i| t[i].clone()).collect());
        }
        Ok(out)
    }

    pub(crate) fn into_parts(self) -> (Vec<String>, HashSet<Tuple>) {
        (self.attrs, self.tuples)
    }

    pub(crate) fn from_parts(attrs: Vec<String>, tuples: HashSet<Tuple>) -> Relation {
        Relation { attrs, tuples }
    }

    /// Tuples in a deterministic order.
    pub fn sorted_rows(&self) -> Vec<Tuple> {
        let mut v: Vec<Tuple> = self.tuples.iter().cloned().collect();
        v.sort();
        v
    }

    /// Tuples present in `self` but not in `other` (after aligning attributes).
    pub fn minus(&self, other: &Relation) -> Result<Vec<Tuple>, RelError> {
        let aligned = other.project(&self.attrs)?;
        let mut v: Vec<Tuple> = self.tuples.iter().filter(|t| !aligned.contains(t)).cloned().collect();
        v.sort();
        Ok(v)
    }
}

impl PartialEq for Relation {
    fn eq(&self, other: &Relation) -> bool {
        if self.attrs.len() != other.attrs.len() || self.len() != other.len() {
            return false;
        }
        match other.project(&self.attrs) {
            Ok(o) => o.tuples == self.tuples,
            Err(_) => false,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.attrs.join("\t"))?;
        for t in self.sorted_rows() {
            let cells: Vec<String> = t.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", cells.join("\t"))?;
        }
        Ok(())
    }
}

/// A database instance: one relation per schema relation.
#[derive(Clone, Debug, Default)]
pub struct Instance {
    pub relations: BTreeMap<String, Relation>,
}

impl Catalog for Instance {
    fn relation_attrs(&self, name: &str) -> Option<Vec<String>> {
        self.relations.get(name).map(|r| r.attrs.clone())
    }
}

impl Instance {
    pub fn empty(schema: &Schema) -> Instance {
        Instance {
            relations: schema
                .relations
                .iter()
                .map(|(n, a)| (n.clone(), Relation::new(a)))
                .collect(),
        }
    }

    pub fn get(&self, rel: &str) -> Result<&Relation, RelError> {
        self.relations.get(rel).ok_or_else(|| RelError::UnknownRelation(rel.to_string()))
    }

    pub fn insert(&mut self, rel: &str, t: Tuple) -> Result<bool, RelError> {
        let r = self
            .relations
            .get_mut(rel)
            .ok_or_else(|| RelError::UnknownRelation(rel.to_string()))?;
        if t.len() != r.attrs.len() {
            return Err(RelError::Arity { expected: r.attrs.len(), found: t.len() });
        }
        Ok(r.insert(t))
    }

    pub fn add_relation(&mut self, name: &str, rel: Relation) {
        self.relations.insert(name.to_string(), rel);
    }

    pub fn total_rows(&self) -> usize {
        self.relations.values().map(|r| r.len()).sum()
    }

    /// Checks column types, keys, unique constraints and inclusion dependencies.
    pub fn validate(&self, schema: &Schema) -> Result<(), RelError> {
        for (name, attrs) in &schema.relations {
            let rel = self.get(name)?;
            if rel.attrs() != attrs.as_slice() {
                return Err(RelError::Schema(format!("relation `{name}` does not match its declared attributes")));
            }
            let types = &schema.types[name];
            for t in rel.iter() {
                for (v, ty) in t.iter().zip(types) {
                    let ok = matches!(
                        (v, ty),
                        (Value::Null, _)
                            | (Value::Int(_), ColumnType::Int)
                            | (Value::Text(_), ColumnType::Text)
                            | (Value::Date(_), ColumnType::Date)
                    );
                    if !ok {
                        return Err(RelError::TypeMismatch { left: v.type_name().into(), right: ty.to_string() });
                    }
                }
            }
            for (i, key) in schema.keys(name).iter().enumerate() {
                let idx = rel.indices(key)?;
                let mut seen = HashSet::new();
                for t in rel.iter() {
                    let k: Vec<&Value> = idx.iter().map(|&j| &t[j]).collect();
                    if k.iter().any(|v| v.is_null()) {
                        if i == 0 && schema.primary_keys.contains_key(name) {
                            return Err(RelError::Constraint(format!("null in primary key of `{name}`")));
                        }
                        continue;
                    }
                    if !seen.insert(k) {
                        return Err(RelError::Constraint(format!(
                            "duplicate key ({}) in `{name}`",
                            key.join(", ")
                        )));
                    }
                }
            }
        }
        for dep in &schema.inclusion_deps {
            let lhs = self.get(&dep.lhs)?;
            let rhs = self.get(&dep.rhs)?;
            let li = lhs.indices(&dep.lhs_attrs)?;
            let ri = rhs.indices(&dep.rhs_attrs)?;
            let targets: HashSet<Vec<&Value>> = rhs.iter().map(|t| ri.iter().map(|&j| &t[j]).collect()).collect();
            for t in lhs.iter() {
                let k: Vec<&Value> = li.iter().map(|&j| &t[j]).collect();
                if k.iter().all(|v| !v.is_null()) && !targets.contains(&k) {
                    return Err(RelError::Constraint(format!("inclusion {dep} violated")));
                }
            }
        }
        Ok(())
    }
}
