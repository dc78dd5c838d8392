//! Discovery and validation of exact predicates, VFDs and optimizing class expressions on an instance.

pub mod vfd;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use sha2::{Digest, Sha256};

use crate::mapping::{
    apply_exact_predicates, saturate_tmappings, split_multi_template, virtual_assertions, ConstrainedSpec, Constraints,
    MappingError, ObdaSpec, Oce, OceKind, SplitMappings, Vfd, VfdKind,
};
use crate::ontology::{Assertion, RDF_TYPE};
use crate::relalg::{write_relation_csv, Instance, Value};
use crate::sparql::virtual_graph;
use vfd::{check_vfd, Bodies, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinerOptions {
    /// Longest path VFD considered.
    pub max_path: usize,
    /// Also report single-property branching VFDs and candidates outside shared templates.
    pub exhaustive: bool,
    /// Upper bound on path candidates examined.
    pub max_candidates: usize,
}

impl Default for MinerOptions {
    fn default() -> Self {
        MinerOptions { max_path: 4, exhaustive: false, max_candidates: 2000 }
    }
}

/// Row counts and a content hash of an instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fingerprint {
    pub rows: BTreeMap<String, usize>,
    pub sha256: String,
}

impl Fingerprint {
    pub fn of(inst: &Instance) -> Fingerprint {
        let mut h = Sha256::new();
        let mut rows = BTreeMap::new();
        for (name, rel) in &inst.relations {
            rows.insert(name.clone(), rel.len());
            h.update(name.as_bytes());
            h.update(b"\n");
            h.update(write_relation_csv(rel).as_bytes());
        }
        Fingerprint { rows, sha256: hex::encode(h.finalize()) }
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let counts: Vec<String> = self.rows.iter().map(|(n, c)| format!("{n}={c}")).collect();
        write!(f, "sha256 {} rows {}", self.sha256, counts.join(" "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evidence {
    pub constraint: String,
    pub checks: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    pub constraint: String,
    pub reason: String,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MiningReport {
    pub fingerprint: Fingerprint,
    pub certified: Constraints,
    pub evidence: Vec<Evidence>,
    pub rejected: Vec<Rejection>,
}

impl MiningReport {
    /// Certified constraints in the loadable file format, headed by the fingerprint.
    pub fn constraint_file(&self) -> String {
        format!("# certified on instance {}\n{}", self.fingerprint, self.certified)
    }

    pub fn is_certified(&self, c: &str) -> bool {
        self.evidence.iter().any(|e| e.constraint == c)
    }
}

impl fmt::Display for MiningReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instance: {}", self.fingerprint)?;
        writeln!(f, "certified ({}):", self.evidence.len())?;
        for e in &self.evidence {
            writeln!(f, "  {}", e.constraint)?;
            for c in &e.checks {
                writeln!(f, "    {c}")?;
            }
        }
        writeln!(f, "rejected ({}):", self.rejected.len())?;
        for r in &self.rejected {
            writeln!(f, "  {}: {}", r.constraint, r.reason)?;
            if let Some(w) = &r.witness {
                writeln!(f, "    witness {w}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MinerError {
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Sparql(#[from] crate::sparql::SparqlError),
}

/// Extensions of each predicate, keyed by predicate name.
type Extensions = BTreeMap<String, BTreeSet<(Value, Option<Value>)>>;

fn extensions(abox: &BTreeSet<Assertion>) -> Extensions {
    let mut out: Extensions = BTreeMap::new();
    for a in abox {
        match a {
            Assertion::Class(c, s) => out.entry(c.clone()).or_default().insert((s.clone(), None)),
            Assertion::Prop(p, s, o) => out.entry(p.clone()).or_default().insert((s.clone(), Some(o.clone()))),
        };
    }
    out
}

fn graph_extensions(spec: &ObdaSpec, inst: &Instance) -> Result<Extensions, MinerError> {
    let g = virtual_graph(spec, inst)?;
    let mut out: Extensions = BTreeMap::new();
    for (s, p, o) in &g.triples {
        let Value::Iri(p) = p else { continue };
        if p.as_ref() == RDF_TYPE {
            if let Value::Iri(c) = o {
                out.entry(c.to_string()).or_default().insert((s.clone(), None));
            }
        } else {
            out.entry(p.to_string()).or_default().insert((s.clone(), Some(o.clone())));
        }
    }
    Ok(out)
}

fn show_member(pred: &str, m: &(Value, Option<Value>)) -> String {
    match &m.1 {
        None => format!("{} a {pred}", m.0),
        Some(o) => format!("{} {pred} {o}", m.0),
    }
}

struct Checker<'a> {
    cspec: &'a ConstrainedSpec,
    inst: &'a Instance,
    saturated: Extensions,
    plain: SplitMappings,
}

impl<'a> Checker<'a> {
    fn new(cspec: &'a ConstrainedSpec, inst: &'a Instance) -> Result<Checker<'a>, MinerError> {
        let tmaps = saturate_tmappings(&cspec.spec)?;
        Ok(Checker { cspec, inst, saturated: graph_extensions(&cspec.spec, inst)?, plain: split_multi_template(&tmaps) })
    }

    fn exact(&self, pred: &str, direct: &Extensions) -> Result<Vec<String>, Violation> {
        if self.cspec.spec.mappings_of(pred).is_empty() {
            return Err(Violation { reason: "no original mapping".into(), witness: None });
        }
        let empty = BTreeSet::new();
        let sat = self.saturated.get(pred).unwrap_or(&empty);
        let own = direct.get(pred).unwrap_or(&empty);
        match sat.difference(own).next() {
            Some(m) => Err(Violation { reason: "inferred members are missing from the original mappings".into(), witness: Some(show_member(pred, m)) }),
            None => Ok(vec![format!("{} members, all produced by the original mappings", sat.len())]),
        }
    }

    fn oce(&self, o: &Oce) -> Result<Vec<String>, Violation> {
        let empty = BTreeSet::new();
        let prop = self.saturated.get(&o.property).unwrap_or(&empty);
        let class: BTreeSet<&Value> = self.saturated.get(&o.class).unwrap_or(&empty).iter().map(|(s, _)| s).collect();
        let mut seen = BTreeSet::new();
        for (s, obj) in prop {
            let ind = match o.kind {
                OceKind::Domain => s,
                OceKind::Range => obj.as_ref().expect("property member"),
            };
            seen.insert(ind);
            if !class.contains(ind) {
                return Err(Violation {
                    reason: format!("an individual of {} is not a {}", o.property, o.class),
                    witness: Some(ind.to_string()),
                });
            }
        }
        Ok(vec![format!("{} {} individuals covered by {} members", seen.len(), if o.kind == OceKind::Domain { "subject" } else { "object" }, class.len())])
    }

    /// Splits to validate a VFD under: plain T-mappings and, when `exact` is non-empty, exact-pruned ones.
    fn splits(&self, exact: &BTreeSet<String>) -> Result<Vec<SplitMappings>, MinerError> {
        let mut out = vec![self.plain.clone()];
        if !exact.is_empty() {
            let tmaps = saturate_tmappings(&self.cspec.spec)?;
            out.push(split_multi_template(&apply_exact_predicates(&tmaps, exact, &self.cspec.spec.mappings)?));
        }
        Ok(out)
    }

    fn vfd(&self, v: &Vfd, splits: &[SplitMappings]) -> Result<Vec<String>, Violation> {
        let mut evidence = Vec::new();
        for (k, split) in splits.iter().enumerate() {
            let mut bodies = Bodies::new(split, self.inst);
            let ev = check_vfd(v, &self.cspec.spec.schema, &mut bodies).map_err(|mut e| {
                if k == 1 {
                    e.reason = format!("{} (with exact predicates)", e.reason);
                }
                e
            })?;
            if k == 0 {
                evidence = ev;
            }
        }
        if splits.len() > 1 {
            evidence.push("also holds with exact predicates applied".into());
        }
        Ok(evidence)
    }
}

struct Builder {
    certified: Constraints,
    evidence: Vec<Evidence>,
    rejected: Vec<Rejection>,
}

impl Builder {
    fn record(&mut self, name: String, r: Result<Vec<String>, Violation>) -> bool {
        match r {
            Ok(checks) => {
                self.evidence.push(Evidence { constraint: name, checks });
                true
            }
            Err(v) => {
                self.rejected.push(Rejection { constraint: name, reason: v.reason, witness: v.witness });
                false
            }
        }
    }

    fn finish(mut self, inst: &Instance) -> MiningReport {
        self.certified.vfds.sort_by(|a, b| (&a.properties, a.kind).cmp(&(&b.properties, b.kind)));
        self.certified.oces.sort();
        self.evidence.sort_by(|a, b| a.constraint.cmp(&b.constraint));
        self.rejected.sort_by(|a, b| a.constraint.cmp(&b.constraint));
        MiningReport { fingerprint: Fingerprint::of(inst), certified: self.certified, evidence: self.evidence, rejected: self.rejected }
    }
}

/// Re-checks every declared constraint; only those that hold are certified.
pub fn validate_constraints(cspec: &ConstrainedSpec, inst: &Instance) -> Result<MiningReport, MinerError> {
    let ck = Checker::new(cspec, inst)?;
    let direct = extensions(&virtual_assertions(&cspec.spec.mappings, inst)?);
    let mut b = Builder { certified: Constraints::default(), evidence: vec![], rejected: vec![] };
    for p in &cspec.constraints.exact {
        if b.record(format!("exact {p}"), ck.exact(p, &direct)) {
            b.certified.exact.insert(p.clone());
        }
    }
    let splits = ck.splits(&b.certified.exact)?;
    for v in &cspec.constraints.vfds {
        if b.record(v.to_string(), ck.vfd(v, &splits)) {
            b.certified.vfds.push(v.clone());
        }
    }
    for o in &cspec.constraints.oces {
        if b.record(o.to_string(), ck.oce(o)) {
            b.certified.oces.push(o.clone());
        }
    }
    Ok(b.finish(inst))
}

/// Exact predicates: those whose original mappings already yield their saturated extension.
pub fn mine_exact_predicates(spec: &ObdaSpec, inst: &Instance) -> Result<MiningReport, MinerError> {
    let cspec = ConstrainedSpec { spec: spec.clone(), constraints: Constraints::default() };
    let ck = Checker::new(&cspec, inst)?;
    let direct = extensions(&virtual_assertions(&spec.mappings, inst)?);
    let mut b = Builder { certified: Constraints::default(), evidence: vec![], rejected: vec![] };
    let preds: BTreeSet<String> = spec.mappings.iter().map(|m| m.predicate().to_string()).collect();
    for p in preds {
        if b.record(format!("exact {p}"), ck.exact(&p, &direct)) {
            b.certified.exact.insert(p);
        }
    }
    Ok(b.finish(inst))
}

/// Properties with a single template pair, by original name.
fn single_piece_properties(split: &SplitMappings) -> Vec<&crate::mapping::PredicateGroup> {
    split
        .groups
        .values()
        .filter(|g| !g.is_class() && split.pieces(&g.original).len() == 1)
        .collect()
}

fn mine_branching(ck: &Checker, splits: &[SplitMappings], opts: &MinerOptions, b: &mut Builder) {
    let props = single_piece_properties(&ck.plain);
    for p1 in &props {
        let mut list = vec![p1.original.clone()];
        let first = Vfd { kind: VfdKind::Branching, template: p1.subject.clone(), properties: list.clone() };
        let base = ck.vfd(&first, splits);
        if let Err(v) = base {
            if opts.exhaustive {
                b.record(first.to_string(), Err(v));
            }
            continue;
        }
        for q in &props {
            if q.name == p1.name || !(opts.exhaustive || q.subject.compatible(&p1.subject)) {
                continue;
            }
            let cand = Vfd { kind: VfdKind::Branching, template: p1.subject.clone(), properties: vec![p1.original.clone(), q.original.clone()] };
            if ck.vfd(&cand, splits).is_ok() {
                list.push(q.original.clone());
            }
        }
        if list.len() < 2 && !opts.exhaustive {
            continue;
        }
        let v = Vfd { kind: VfdKind::Branching, template: p1.subject.clone(), properties: list };
        if b.record(v.to_string(), ck.vfd(&v, splits)) {
            b.certified.vfds.push(v);
        }
    }
}

fn mine_paths(ck: &Checker, splits: &[SplitMappings], opts: &MinerOptions, b: &mut Builder) {
    let props = single_piece_properties(&ck.plain);
    let mut stack: Vec<Vec<usize>> = (0..props.len()).map(|i| vec![i]).collect();
    let mut examined = 0;
    while let Some(chain) = stack.pop() {
        if chain.len() >= 2 {
            examined += 1;
            if examined > opts.max_candidates {
                b.rejected.push(Rejection {
                    constraint: "vfd path".into(),
                    reason: format!("candidate limit of {} reached", opts.max_candidates),
                    witness: None,
                });
                break;
            }
            let v = Vfd {
                kind: VfdKind::Path,
                template: props[chain[0]].subject.clone(),
                properties: chain.iter().map(|&i| props[i].original.clone()).collect(),
            };
            let attrs_of = |e: &crate::relalg::RelExpr| e.attrs(&ck.cspec.spec.schema).unwrap_or_default();
            if crate::translator::vfd::resolve(&v, &ck.plain, &attrs_of).is_ok() && b.record(v.to_string(), ck.vfd(&v, splits)) {
                b.certified.vfds.push(v);
            }
        }
        if chain.len() >= opts.max_path {
            continue;
        }
        let last = props[*chain.last().unwrap()];
        let Some(range) = &last.object else { continue };
        for (j, q) in props.iter().enumerate().rev() {
            if !chain.contains(&j) && range.compatible(&q.subject) {
                let mut c = chain.clone();
                c.push(j);
                stack.push(c);
            }
        }
    }
}

fn mine_oce_candidates(ck: &Checker, b: &mut Builder) {
    let classes: Vec<_> = ck.plain.groups.values().filter(|g| g.is_class() && ck.plain.pieces(&g.original).len() == 1).collect();
    for p in single_piece_properties(&ck.plain) {
        for c in &classes {
            for (kind, t) in [(OceKind::Domain, Some(&p.subject)), (OceKind::Range, p.object.as_ref())] {
                let Some(t) = t else { continue };
                if !t.compatible(&c.subject) {
                    continue;
                }
                let o = Oce { kind, property: p.original.clone(), class: c.original.clone() };
                if b.record(o.to_string(), ck.oce(&o)) {
                    b.certified.oces.push(o);
                }
            }
        }
    }
}

/// Mines all constraint kinds; VFDs are certified under plain and exact-pruned T-mappings.
pub fn mine(spec: &ObdaSpec, inst: &Instance, opts: &MinerOptions) -> Result<MiningReport, MinerError> {
    let exact = mine_exact_predicates(spec, inst)?;
    let cspec = ConstrainedSpec { spec: spec.clone(), constraints: Constraints::default() };
    let ck = Checker::new(&cspec, inst)?;
    let splits = ck.splits(&exact.certified.exact)?;
    let mut b = Builder { certified: exact.certified.clone(), evidence: exact.evidence, rejected: exact.rejected };
    mine_branching(&ck, &splits, opts, &mut b);
    mine_paths(&ck, &splits, opts, &mut b);
    mine_oce_candidates(&ck, &mut b);
    Ok(b.finish(inst))
}

/// Branching VFDs only.
pub fn mine_branching_vfds(spec: &ObdaSpec, inst: &Instance, opts: &MinerOptions) -> Result<MiningReport, MinerError> {
    let cspec = ConstrainedSpec { spec: spec.clone(), constraints: Constraints::default() };
    let ck = Checker::new(&cspec, inst)?;
    let splits = ck.splits(&BTreeSet::new())?;
    let mut b = Builder { certified: Constraints::default(), evidence: vec![], rejected: vec![] };
    mine_branching(&ck, &splits, opts, &mut b);
    Ok(b.finish(inst))
}

/// Path VFDs only.
pub fn mine_path_vfds(spec: &ObdaSpec, inst: &Instance, opts: &MinerOptions) -> Result<MiningReport, MinerError> {
    let cspec = ConstrainedSpec { spec: spec.clone(), constraints: Constraints::default() };
    let ck = Checker::new(&cspec, inst)?;
    let splits = ck.splits(&BTreeSet::new())?;
    let mut b = Builder { certified: Constraints::default(), evidence: vec![], rejected: vec![] };
    mine_paths(&ck, &splits, opts, &mut b);
    Ok(b.finish(inst))
}

/// Optimizing class expressions only.
pub fn mine_oces(spec: &ObdaSpec, inst: &Instance) -> Result<MiningReport, MinerError> {
    let cspec = ConstrainedSpec { spec: spec.clone(), constraints: Constraints::default() };
    let ck = Checker::new(&cspec, inst)?;
    let mut b = Builder { certified: Constraints::default(), evidence: vec![], rejected: vec![] };
    mine_oce_candidates(&ck, &mut b);
    Ok(b.finish(inst))
}

/// The spec restricted to constraints certified on the instance.
pub fn trusted(cspec: &ConstrainedSpec, inst: &Instance) -> Result<(ConstrainedSpec, MiningReport), MinerError> {
    let report = validate_constraints(cspec, inst)?;
    Ok((ConstrainedSpec { spec: cspec.spec.clone(), constraints: report.certified.clone() }, report))
}
