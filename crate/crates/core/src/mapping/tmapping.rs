use std::collections::{BTreeMap, BTreeSet};

use crate::ontology::Position;
use crate::relalg::{RelExpr, Schema, Shape, Template};

use super::{by_predicate, Head, Mapping, MappingError, ObdaSpec};

fn shapes(h: &Head) -> (Shape, Option<Shape>) {
    (h.subject().shape(), h.object().map(|o| o.shape()))
}

/// Syntactic containment `a ⊆ b` of two single-block mappings for the same head shape.
fn contained(a: &Mapping, b: &Mapping) -> bool {
    if a.predicate() != b.predicate() || shapes(&a.head) != shapes(&b.head) {
        return false;
    }
    let ca = a.source.canonical();
    let cb = b.source.canonical();
    if ca.from != cb.from {
        return false;
    }
    let src = |m: &Mapping, q: &super::SpjQuery| -> Vec<String> {
        let ts: Vec<&Template> = std::iter::once(m.head.subject()).chain(m.head.object()).collect();
        ts.iter()
            .flat_map(|t| t.attrs())
            .map(|x| q.source_of(x).unwrap_or(x).to_string())
            .collect()
    };
    if src(a, &ca) != src(b, &cb) {
        return false;
    }
    let conds: BTreeSet<_> = ca.conditions.iter().collect();
    cb.conditions.iter().all(|c| conds.contains(c))
}

fn drop_redundant(cands: Vec<Mapping>) -> Vec<Mapping> {
    let keep: Vec<bool> = (0..cands.len())
        .map(|i| {
            !(0..cands.len()).any(|j| {
                j != i && contained(&cands[i], &cands[j]) && (!contained(&cands[j], &cands[i]) || j < i)
            })
        })
        .collect();
    cands.into_iter().zip(keep).filter(|(_, k)| *k).map(|(m, _)| m).collect()
}

fn derive(m: &Mapping, head: Head, id: String, schema: &Schema) -> Result<Mapping, MappingError> {
    let attrs = head.attrs();
    let outs: Vec<&str> = attrs.iter().map(|s| s.as_str()).collect();
    let source = if head.is_class() && !m.head.is_class() { m.source.restrict(&outs) } else { m.source.clone() };
    Mapping::new(&id, head, source, schema)
}

/// Compiles the ontology into the mappings: for every predicate, one mapping per generator and source mapping.
/// Mappings syntactically contained in another mapping of the same predicate are dropped.
pub fn saturate_tmappings(spec: &ObdaSpec) -> Result<Vec<Mapping>, MappingError> {
    let cls = spec.ontology.classify();
    let by = by_predicate(&spec.mappings);
    let mut preds: BTreeSet<String> = spec.classes();
    preds.extend(spec.properties());
    let mut out = Vec::new();
    for x in preds {
        let mut cands: Vec<Mapping> = by.get(&x).into_iter().flatten().map(|m| (*m).clone()).collect();
        for g in cls.generators_of(&x) {
            if g.source == x && g.position == Position::Itself {
                continue;
            }
            for m in by.get(&g.source).into_iter().flatten() {
                let head = match (g.position, &m.head) {
                    (Position::Itself, h) => h.with_predicate(&x),
                    (Position::SubjectOf, Head::Property { subject, .. }) => {
                        Head::Class { class: x.clone(), subject: subject.clone() }
                    }
                    (Position::ObjectOf, Head::Property { object, .. }) => {
                        Head::Class { class: x.clone(), subject: object.clone() }
                    }
                    _ => continue,
                };
                cands.push(derive(m, head, format!("{}>{}", m.id, x), &spec.schema)?);
            }
        }
        out.extend(drop_redundant(cands));
    }
    Ok(out)
}

/// Replaces the T-mappings of each exact predicate by its original mappings.
pub fn apply_exact_predicates(
    tmaps: &[Mapping],
    exact: &BTreeSet<String>,
    originals: &[Mapping],
) -> Result<Vec<Mapping>, MappingError> {
    for a in exact {
        if !originals.iter().any(|m| m.predicate() == a) {
            return Err(MappingError::ExactWithoutMapping(a.clone()));
        }
    }
    let mut preds: Vec<String> = Vec::new();
    for m in tmaps.iter().chain(originals) {
        if !preds.contains(&m.predicate().to_string()) {
            preds.push(m.predicate().to_string());
        }
    }
    let mut out = Vec::new();
    for p in preds {
        let src = if exact.contains(&p) { originals } else { tmaps };
        out.extend(src.iter().filter(|m| m.predicate() == p).cloned());
    }
    Ok(out)
}

/// Mappings of one predicate sharing a single template pair.
#[derive(Clone, Debug)]
pub struct PredicateGroup {
    pub name: String,
    pub original: String,
    pub subject: Template,
    pub object: Option<Template>,
    pub mappings: Vec<Mapping>,
}

impl PredicateGroup {
    pub fn is_class(&self) -> bool {
        self.object.is_none()
    }

    /// A single body for the whole group, with the head templates of the first mapping.
    pub fn merged_body(&self) -> Option<RelExpr> {
        let first = &self.mappings[0];
        if self.mappings.len() == 1 {
            return Some(first.body.clone());
        }
        let same_heads = self
            .mappings
            .iter()
            .all(|m| m.head.subject() == first.head.subject() && m.head.object() == first.head.object());
        if same_heads {
            let mut common = first.source.outputs();
            for m in &self.mappings[1..] {
                let o = m.source.outputs();
                common.retain(|a| o.contains(a));
            }
            return Some(RelExpr::Union(
                self.mappings.iter().map(|m| RelExpr::project(&common, m.body.clone())).collect(),
            ));
        }
        let target = first.head.attrs();
        let mut branches = Vec::new();
        for m in &self.mappings {
            let attrs = m.head.attrs();
            let positions = |h: &Head| -> Vec<String> {
                let ts: Vec<&Template> = std::iter::once(h.subject()).chain(h.object()).collect();
                ts.iter().flat_map(|t| t.attrs()).map(|s| s.to_string()).collect()
            };
            let (pf, pm) = (positions(&first.head), positions(&m.head));
            let mut pairs: Vec<(String, String)> = Vec::new();
            for (new, old) in pf.iter().zip(&pm) {
                match pairs.iter().find(|(_, o)| o == old) {
                    Some((n, _)) if n != new => return None,
                    Some(_) => {}
                    None => {
                        if pairs.iter().any(|(n, _)| n == new) {
                            return None;
                        }
                        pairs.push((new.clone(), old.clone()));
                    }
                }
            }
            if attrs.len() != target.len() {
                return None;
            }
            branches.push(RelExpr::rename(pairs, RelExpr::project(&attrs, m.body.clone())));
        }
        Some(RelExpr::Union(branches))
    }
}

/// T-mappings split so that every predicate has one template pair.
#[derive(Clone, Debug, Default)]
pub struct SplitMappings {
    pub groups: BTreeMap<String, PredicateGroup>,
    /// Original predicate → fresh predicates, for predicates with several template pairs.
    pub table: BTreeMap<String, Vec<String>>,
}

impl SplitMappings {
    /// Groups for an original predicate.
    pub fn pieces(&self, original: &str) -> Vec<&PredicateGroup> {
        match self.table.get(original) {
            Some(names) => names.iter().filter_map(|n| self.groups.get(n)).collect(),
            None => self.groups.get(original).into_iter().collect(),
        }
    }

    pub fn group(&self, name: &str) -> Option<&PredicateGroup> {
        self.groups.get(name)
    }

    pub fn original_of<'a>(&'a self, name: &'a str) -> &'a str {
        self.groups.get(name).map(|g| g.original.as_str()).unwrap_or(name)
    }

    /// Mappings with heads renamed to their group predicate.
    pub fn mappings(&self) -> Vec<Mapping> {
        self.groups
            .values()
            .flat_map(|g| {
                g.mappings.iter().map(move |m| Mapping { head: m.head.with_predicate(&g.name), ..m.clone() })
            })
            .collect()
    }
}

/// Splits predicates with several template pairs into fresh predicates `P#1 .. P#k`.
pub fn split_multi_template(tmaps: &[Mapping]) -> SplitMappings {
    let mut out = SplitMappings::default();
    for (pred, ms) in by_predicate(tmaps) {
        let mut parts: BTreeMap<(Shape, Option<Shape>), Vec<Mapping>> = BTreeMap::new();
        for m in ms {
            parts.entry(shapes(&m.head)).or_default().push(m.clone());
        }
        let k = parts.len();
        let mut names = Vec::new();
        for (i, (_, ms)) in parts.into_iter().enumerate() {
            let name = if k == 1 { pred.clone() } else { format!("{pred}#{}", i + 1) };
            let first = &ms[0];
            out.groups.insert(
                name.clone(),
                PredicateGroup {
                    name: name.clone(),
                    original: pred.clone(),
                    subject: first.head.subject().clone(),
                    object: first.head.object().cloned(),
                    mappings: ms,
                },
            );
            names.push(name);
        }
        if k > 1 {
            out.table.insert(pred, names);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{parse_mappings, virtual_assertions};
    use crate::ontology::Ontology;
    use crate::relalg::{Instance, Value};

    const SCHEMA: &str = "\
relation wellbore(wellbore_s text, well_s text, year int, month int, day int, r_existence_kd_nm text)
relation wellbore_interval(wellbore_s text, wellbore_intv_s text)
relation facility_clsn(facility_s text, fcl_class_name text)
";
    const ONT: &str = "\
:isInWell rdfs:domain :Wellbore .
:isInWell rdfs:range :Well .
:hasInterval rdfs:domain :Wellbore .
:hasInterval rdfs:range :WellboreInterval .
:completionDate rdfs:domain :Wellbore .
:ProdWellbore rdfs:subClassOf :DevelopWellbore .
:DevelopWellbore rdfs:subClassOf :Wellbore .
";
    const MAPS: &str = "\
map wb: :Wellbore-{wellbore_s} a :Wellbore <- SELECT wellbore_s FROM wellbore WHERE r_existence_kd_nm = 'actual'
map iw: :Wellbore-{wellbore_s} :isInWell :Well-{well_s} <- SELECT wellbore_s, well_s FROM wellbore WHERE r_existence_kd_nm = 'actual'
map cd: :Wellbore-{wellbore_s} :completionDate \"{year}-{month}-{day}\"^^xsd:date <- SELECT wellbore_s, year, month, day FROM wellbore WHERE r_existence_kd_nm = 'actual'
map hi: :Wellbore-{wellbore_s} :hasInterval :WellboreInterval-{wellbore_intv_s} <- SELECT wellbore_s, wellbore_intv_s FROM wellbore_interval
map pw: :Wellbore-{wellbore_s} a :ProdWellbore <- SELECT w.wellbore_s FROM wellbore w, facility_clsn f WHERE w.well_s = f.facility_s AND f.fcl_class_name = 'production'
";

    fn spec() -> ObdaSpec {
        let schema = Schema::parse(SCHEMA).unwrap();
        let ms = parse_mappings(MAPS, &schema).unwrap();
        ObdaSpec::new(schema, Ontology::parse(ONT).unwrap(), ms).unwrap()
    }

    #[test]
    fn running_example_tmappings() {
        let s = spec();
        let t = saturate_tmappings(&s).unwrap();
        let wb: Vec<&Mapping> = t.iter().filter(|m| m.predicate() == ":Wellbore").collect();
        let ids: Vec<&str> = wb.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, vec!["wb", "pw>:Wellbore", "hi>:Wellbore"]);
        let exact = apply_exact_predicates(&t, &BTreeSet::from([":Wellbore".to_string()]), &s.mappings).unwrap();
        assert_eq!(exact.iter().filter(|m| m.predicate() == ":Wellbore").count(), 1);
        assert!(apply_exact_predicates(&t, &BTreeSet::from([":Well".to_string()]), &s.mappings).is_err());
    }

    #[test]
    fn tmappings_realize_saturation() {
        let s = spec();
        let mut inst = Instance::empty(&s.schema);
        let t = |x: &str| Value::text(x);
        inst.insert("wellbore", vec![t("1"), t("a"), Value::Int(2009), Value::Int(4), Value::Int(1), t("actual")]).unwrap();
        inst.insert("wellbore", vec![t("2"), t("b"), Value::Int(2010), Value::Null, Value::Int(1), t("actual")]).unwrap();
        inst.insert("wellbore", vec![t("3"), t("c"), Value::Int(2010), Value::Int(1), Value::Int(1), t("historic")]).unwrap();
        inst.insert("wellbore_interval", vec![t("9"), t("i9")]).unwrap();
        inst.insert("facility_clsn", vec![t("c"), t("production")]).unwrap();
        let tm = saturate_tmappings(&s).unwrap();
        let via_t = virtual_assertions(&tm, &inst).unwrap();
        let via_fix = s.ontology.saturate_abox(&virtual_assertions(&s.mappings, &inst).unwrap());
        assert_eq!(via_t, via_fix);
    }

    #[test]
    fn split_groups_by_template_pair() {
        let schema = Schema::parse("relation t(a int, b int)").unwrap();
        let ms = parse_mappings(
            "map m1: :x-{a} :P :y-{b} <- SELECT a, b FROM t\nmap m2: :x-{a} :P :z-{b} <- SELECT a, b FROM t\nmap m3: :x-{b} :P :y-{a} <- SELECT a, b FROM t",
            &schema,
        )
        .unwrap();
        let sp = split_multi_template(&ms);
        assert_eq!(sp.table[":P"].len(), 2);
        let sizes: Vec<usize> = sp.pieces(":P").iter().map(|g| g.mappings.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 3);
        assert!(sp.pieces(":P").iter().all(|g| g.merged_body().is_some()));
        assert_eq!(sp.original_of(":P#1"), ":P");
    }
}
