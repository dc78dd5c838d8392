//! Lightweight ontologies: subsumption, domain and range axioms, classification and ABox saturation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::relalg::{strip_comment, Value};

pub const RDF_TYPE: &str = "rdf:type";

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("ontology line {line}: {message}")]
pub struct OntologyError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axiom {
    SubClass(String, String),
    SubProperty(String, String),
    Domain(String, String),
    Range(String, String),
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axiom::SubClass(a, b) => write!(f, "{a} rdfs:subClassOf {b} ."),
            Axiom::SubProperty(a, b) => write!(f, "{a} rdfs:subPropertyOf {b} ."),
            Axiom::Domain(p, a) => write!(f, "{p} rdfs:domain {a} ."),
            Axiom::Range(p, a) => write!(f, "{p} rdfs:range {a} ."),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Ontology {
    pub classes: BTreeSet<String>,
    pub properties: BTreeSet<String>,
    pub axioms: Vec<Axiom>,
}

/// Where a generator reads the individual from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Position {
    /// The source predicate itself (same arity as the target).
    Itself,
    SubjectOf,
    ObjectOf,
}

/// `target` is entailed by assertions of `source` at `position`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator {
    pub target: String,
    pub source: String,
    pub position: Position,
}

/// Reflexive-transitive closure of the TBox, as generators per predicate.
#[derive(Clone, Debug, Default)]
pub struct Classification {
    pub generators: BTreeMap<String, Vec<Generator>>,
}

impl Classification {
    pub fn generators_of(&self, target: &str) -> Vec<Generator> {
        self.generators.get(target).cloned().unwrap_or_else(|| {
            vec![Generator { target: target.to_string(), source: target.to_string(), position: Position::Itself }]
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Assertion {
    Class(String, Value),
    Prop(String, Value, Value),
}

impl Assertion {
    pub fn predicate(&self) -> &str {
        match self {
            Assertion::Class(c, _) => c,
            Assertion::Prop(p, _, _) => p,
        }
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assertion::Class(c, a) => write!(f, "{a} a {c} ."),
            Assertion::Prop(p, a, b) => write!(f, "{a} {p} {b} ."),
        }
    }
}

impl Ontology {
    pub fn is_class(&self, name: &str) -> bool {
        self.classes.contains(name)
    }

    pub fn is_property(&self, name: &str) -> bool {
        self.properties.contains(name)
    }

    fn declare(&mut self, name: &str, class: bool, line: usize) -> Result<(), OntologyError> {
        let clash = if class { self.properties.contains(name) } else { self.classes.contains(name) };
        if clash {
            return Err(OntologyError { line, message: format!("`{name}` is used both as a class and a property") });
        }
        if class {
            self.classes.insert(name.to_string());
        } else {
            self.properties.insert(name.to_string());
        }
        Ok(())
    }

    /// Adds an axiom, declaring the names it mentions.
    pub fn add_axiom(&mut self, ax: Axiom) -> Result<(), OntologyError> {
        self.add_axiom_at(ax, 0)
    }

    fn add_axiom_at(&mut self, ax: Axiom, line: usize) -> Result<(), OntologyError> {
        match &ax {
            Axiom::SubClass(a, b) => {
                self.declare(a, true, line)?;
                self.declare(b, true, line)?;
            }
            Axiom::SubProperty(p, q) => {
                self.declare(p, false, line)?;
                self.declare(q, false, line)?;
            }
            Axiom::Domain(p, a) | Axiom::Range(p, a) => {
                self.declare(p, false, line)?;
                self.declare(a, true, line)?;
            }
        }
        if !self.axioms.contains(&ax) {
            self.axioms.push(ax);
        }
        Ok(())
    }

    /// Parses a line-oriented Turtle subset, one statement per line.
    pub fn parse(text: &str) -> Result<Ontology, OntologyError> {
        let mut ont = Ontology::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stmt = strip_comment(raw).trim();
            if stmt.is_empty() {
                continue;
            }
            let err = |m: &str| OntologyError { line, message: m.to_string() };
            let lower = stmt.to_ascii_lowercase();
            if lower.starts_with("@prefix") || lower.starts_with("prefix") || lower.starts_with("@base") {
                continue;
            }
            if stmt.contains('[') || stmt.contains("owl:someValuesFrom") || stmt.contains("owl:Restriction") {
                return Err(err("existential restrictions are not supported"));
            }
            if stmt.contains("owl:inverseOf") {
                return Err(err("inverse properties are not supported"));
            }
            let stmt = stmt.strip_suffix('.').unwrap_or(stmt).trim();
            let toks: Vec<&str> = stmt.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(err(&format!("expected `subject predicate object .`, found `{stmt}`")));
            }
            let (s, p, o) = (toks[0], toks[1], toks[2]);
            match p {
                "a" | "rdf:type" => match o {
                    "owl:Class" | "rdfs:Class" => ont.declare(s, true, line)?,
                    "owl:ObjectProperty" | "owl:DatatypeProperty" | "rdf:Property" => ont.declare(s, false, line)?,
                    _ => return Err(err(&format!("unsupported declaration `{o}`"))),
                },
                "rdfs:subClassOf" => ont.add_axiom_at(Axiom::SubClass(s.into(), o.into()), line)?,
                "owl:equivalentClass" => {
                    ont.add_axiom_at(Axiom::SubClass(s.into(), o.into()), line)?;
                    ont.add_axiom_at(Axiom::SubClass(o.into(), s.into()), line)?;
                }
                "rdfs:subPropertyOf" => ont.add_axiom_at(Axiom::SubProperty(s.into(), o.into()), line)?,
                "owl:equivalentProperty" => {
                    ont.add_axiom_at(Axiom::SubProperty(s.into(), o.into()), line)?;
                    ont.add_axiom_at(Axiom::SubProperty(o.into(), s.into()), line)?;
                }
                "rdfs:domain" => ont.add_axiom_at(Axiom::Domain(s.into(), o.into()), line)?,
                "rdfs:range" => {
                    if o.starts_with("xsd:") || o == "rdfs:Literal" {
                        ont.declare(s, false, line)?;
                    } else {
                        ont.add_axiom_at(Axiom::Range(s.into(), o.into()), line)?;
                    }
                }
                "rdfs:label" | "rdfs:comment" => {}
                other => return Err(err(&format!("unsupported axiom predicate `{other}`"))),
            }
        }
        Ok(ont)
    }

    /// Computes the generators of every declared predicate.
    pub fn classify(&self) -> Classification {
        let mut sub_classes: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        let mut sub_props: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        let mut domains: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        let mut ranges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for ax in &self.axioms {
            match ax {
                Axiom::SubClass(a, b) => sub_classes.entry(b).or_default().push(a),
                Axiom::SubProperty(p, q) => sub_props.entry(q).or_default().push(p),
                Axiom::Domain(p, a) => domains.entry(a).or_default().push(p),
                Axiom::Range(p, a) => ranges.entry(a).or_default().push(p),
            }
        }
        let below = |start: &str, edges: &BTreeMap<&str, Vec<&str>>| -> BTreeSet<String> {
            let mut seen = BTreeSet::from([start.to_string()]);
            let mut queue = VecDeque::from([start.to_string()]);
            while let Some(x) = queue.pop_front() {
                for y in edges.get(x.as_str()).into_iter().flatten() {
                    if seen.insert(y.to_string()) {
                        queue.push_back(y.to_string());
                    }
                }
            }
            seen
        };
        let mut generators = BTreeMap::new();
        for c in &self.classes {
            let mut gs = BTreeSet::new();
            for b in below(c, &sub_classes) {
                gs.insert(Generator { target: c.clone(), source: b.clone(), position: Position::Itself });
                for (edges, pos) in [(&domains, Position::SubjectOf), (&ranges, Position::ObjectOf)] {
                    for p in edges.get(b.as_str()).into_iter().flatten() {
                        for q in below(p, &sub_props) {
                            gs.insert(Generator { target: c.clone(), source: q, position: pos });
                        }
                    }
                }
            }
            generators.insert(c.clone(), gs.into_iter().collect());
        }
        for p in &self.properties {
            let gs = below(p, &sub_props)
                .into_iter()
                .map(|q| Generator { target: p.clone(), source: q, position: Position::Itself })
                .collect();
            generators.insert(p.clone(), gs);
        }
        Classification { generators }
    }

    /// Least fixpoint of the axioms over an ABox; no individuals are invented.
    pub fn saturate_abox(&self, abox: &BTreeSet<Assertion>) -> BTreeSet<Assertion> {
        let mut out = abox.clone();
        let mut queue: VecDeque<Assertion> = abox.iter().cloned().collect();
        while let Some(a) = queue.pop_front() {
            let mut derived = Vec::new();
            for ax in &self.axioms {
                match (ax, &a) {
                    (Axiom::SubClass(b, c), Assertion::Class(x, i)) if b == x => {
                        derived.push(Assertion::Class(c.clone(), i.clone()))
                    }
                    (Axiom::SubProperty(p, q), Assertion::Prop(x, i, j)) if p == x => {
                        derived.push(Assertion::Prop(q.clone(), i.clone(), j.clone()))
                    }
                    (Axiom::Domain(p, c), Assertion::Prop(x, i, _)) if p == x => {
                        derived.push(Assertion::Class(c.clone(), i.clone()))
                    }
                    (Axiom::Range(p, c), Assertion::Prop(x, _, j)) if p == x => {
                        derived.push(Assertion::Class(c.clone(), j.clone()))
                    }
                    _ => {}
                }
            }
            for d in derived {
                if out.insert(d.clone()) {
                    queue.push_back(d);
                }
            }
        }
        out
    }
}

impl fmt::Display for Ontology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.classes {
            writeln!(f, "{c} a owl:Class .")?;
        }
        for p in &self.properties {
            writeln!(f, "{p} a owl:ObjectProperty .")?;
        }
        for ax in &self.axioms {
            writeln!(f, "{ax}")?;
        }
        Ok(())
    }
}
