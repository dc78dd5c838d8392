#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use obda_core::mapping::{parse_mappings, ObdaSpec};
use obda_core::ontology::{Ontology, RDF_TYPE};
use obda_core::relalg::{Instance, Relation, Schema, Value};
use obda_core::sparql::Graph;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const CLASSES: [&str; 3] = [":C0", ":C1", ":C2"];
pub const OBJECT_PROPS: [&str; 2] = [":P0", ":P1"];
pub const DATA_PROPS: [&str; 2] = [":D0", ":D1"];

/// A generated specification with its instance and the source texts.
pub struct Case {
    pub spec: ObdaSpec,
    pub inst: Instance,
    pub schema_text: String,
    pub ontology_text: String,
    pub mapping_text: String,
}

impl std::fmt::Debug for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}\n{}\n{}", self.schema_text, self.ontology_text, self.mapping_text)?;
        for (n, r) in &self.inst.relations {
            writeln!(f, "{n}:\n{r}")?;
        }
        Ok(())
    }
}

fn cond(rng: &mut ChaCha8Rng, prefix: &str) -> String {
    match rng.gen_range(0..8) {
        0 => format!(" WHERE {prefix}a = 1"),
        1 => format!(" WHERE {prefix}b < 3"),
        2 => format!(" WHERE {prefix}c = 'x'"),
        3 => format!(" WHERE {prefix}a = {prefix}b"),
        _ => String::new(),
    }
}

fn template(rng: &mut ChaCha8Rng, col: &str, force: Option<&str>) -> String {
    let p = force.unwrap_or_else(|| *["e", "e", "e", "g"].choose(rng).unwrap());
    format!(":{p}-{{{col}}}")
}

fn body(rng: &mut ChaCha8Rng, rels: usize, cols: &[&str]) -> String {
    let r = rng.gen_range(0..rels);
    let mut sel: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
    if rng.gen_bool(0.5) {
        for c in ["k", "a", "b", "c"] {
            if !cols.contains(&c) {
                sel.push(c.into());
            }
        }
    }
    format!("SELECT {} FROM r{r}{}", sel.join(", "), cond(rng, ""))
}

/// Mapping text for one predicate; `second` forces a different subject template prefix.
fn mapping(rng: &mut ChaCha8Rng, id: &str, pred: &str, kind: u8, rels: usize, prefix: Option<&str>) -> String {
    let subj_col = *["k", "k", "a"].choose(rng).unwrap();
    let join = rels > 1 && kind != 0 && rng.gen_bool(0.15);
    match kind {
        0 => {
            let s = template(rng, subj_col, prefix);
            format!("map {id}: {s} a {pred}\n  <- {}\n", body(rng, rels, &[subj_col]))
        }
        _ => {
            let choices: Vec<&str> = if kind == 1 { vec!["k", "a", "b"] } else { vec!["a", "b", "c"] };
            let choices: Vec<&str> = choices.into_iter().filter(|c| *c != subj_col).collect();
            let obj_col = *choices.choose(rng).unwrap();
            if join {
                let s = template(rng, "s", prefix);
                let o = if kind == 1 { template(rng, "o", None) } else { "{o}".to_string() };
                let l = rng.gen_range(0..rels);
                let r = rng.gen_range(0..rels);
                let t = if l == r { "v" } else { "u" };
                return format!(
                    "map {id}: {s} {pred} {o}\n  <- SELECT t.{subj_col} AS s, {t}.{obj_col} AS o FROM r{l} t, r{r} {t} WHERE t.a = {t}.k\n"
                );
            }
            let s = template(rng, subj_col, prefix);
            let o = if kind == 1 { template(rng, obj_col, None) } else { format!("{{{obj_col}}}") };
            format!("map {id}: {s} {pred} {o}\n  <- {}\n", body(rng, rels, &[subj_col, obj_col]))
        }
    }
}

fn value(rng: &mut ChaCha8Rng, col: &str, null_rate: f64) -> Value {
    if rng.gen_bool(null_rate) {
        return Value::Null;
    }
    match col {
        "c" => Value::text(["x", "y", "z"].choose(rng).unwrap()),
        _ => Value::Int(rng.gen_range(0..5)),
    }
}

/// A random specification; with `multi` at least one predicate is mapped under two subject templates.
pub fn random_case(rng: &mut ChaCha8Rng, multi: bool) -> Case {
    let rels = rng.gen_range(1..=3);
    let mut schema_text = String::new();
    let mut keyed = Vec::new();
    for r in 0..rels {
        schema_text.push_str(&format!("relation r{r}(k int, a int, b int, c text)\n"));
        let key = rng.gen_bool(0.5);
        if key {
            schema_text.push_str(&format!("key r{r}(k)\n"));
        }
        keyed.push(key);
    }
    let mut onto = String::new();
    for c in CLASSES {
        onto.push_str(&format!("{c} a owl:Class .\n"));
    }
    for p in OBJECT_PROPS {
        onto.push_str(&format!("{p} a owl:ObjectProperty .\n"));
    }
    for p in DATA_PROPS {
        onto.push_str(&format!("{p} a owl:DatatypeProperty .\n"));
    }
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        if rng.gen_bool(0.35) {
            onto.push_str(&format!("{} rdfs:subClassOf {} .\n", CLASSES[i], CLASSES[j]));
        }
    }
    if rng.gen_bool(0.3) {
        onto.push_str(":P0 rdfs:subPropertyOf :P1 .\n");
    }
    if rng.gen_bool(0.3) {
        onto.push_str(":D0 rdfs:subPropertyOf :D1 .\n");
    }
    for p in OBJECT_PROPS.iter().chain(DATA_PROPS.iter()) {
        if rng.gen_bool(0.3) {
            onto.push_str(&format!("{p} rdfs:domain {} .\n", CLASSES.choose(rng).unwrap()));
        }
    }
    for p in OBJECT_PROPS {
        if rng.gen_bool(0.2) {
            onto.push_str(&format!("{p} rdfs:range {} .\n", CLASSES.choose(rng).unwrap()));
        }
    }

    let mut maps = String::new();
    let mut n = 0;
    let preds: Vec<(&str, u8)> = CLASSES
        .iter()
        .map(|c| (*c, 0))
        .chain(OBJECT_PROPS.iter().map(|p| (*p, 1)))
        .chain(DATA_PROPS.iter().map(|p| (*p, 2)))
        .collect();
    let forced = if multi { Some(rng.gen_range(0..preds.len())) } else { None };
    for (i, (pred, kind)) in preds.iter().enumerate() {
        let count = if forced == Some(i) { 2 } else { rng.gen_range(0..=2) };
        for m in 0..count {
            let prefix = match (forced == Some(i), m) {
                (true, 0) => Some("e"),
                (true, _) => Some("g"),
                _ => None,
            };
            maps.push_str(&mapping(rng, &format!("m{n}"), pred, *kind, rels, prefix));
            n += 1;
        }
    }
    if maps.is_empty() {
        maps.push_str(&mapping(rng, "m0", ":C0", 0, rels, None));
    }

    let schema = Schema::parse(&schema_text).expect("generated schema");
    let ontology = Ontology::parse(&onto).expect("generated ontology");
    let mappings = parse_mappings(&maps, &schema).unwrap_or_else(|e| panic!("{e}\n{maps}"));
    let spec = ObdaSpec::new(schema.clone(), ontology, mappings).unwrap_or_else(|e| panic!("{e}\n{maps}"));

    let mut inst = Instance::default();
    let budget = 200 / rels;
    for (r, &key) in keyed.iter().enumerate() {
        let rows = rng.gen_range(0..=budget.min(14));
        let mut used = BTreeSet::new();
        let mut tuples = Vec::new();
        for _ in 0..rows {
            let k = if key {
                let k = rng.gen_range(0..16);
                if !used.insert(k) {
                    continue;
                }
                Value::Int(k)
            } else {
                value(rng, "k", 0.05)
            };
            tuples.push(vec![k, value(rng, "a", 0.1), value(rng, "b", 0.1), value(rng, "c", 0.1)]);
        }
        inst.add_relation(&format!("r{r}"), Relation::from_rows(&["k", "a", "b", "c"], tuples));
    }
    Case { spec, inst, schema_text, ontology_text: onto, mapping_text: maps }
}

fn atom(rng: &mut ChaCha8Rng, subj: &str, fresh: &mut usize) -> (String, Option<String>) {
    match rng.gen_range(0..3) {
        0 => (format!("{subj} a {} .", CLASSES.choose(rng).unwrap()), None),
        1 => {
            *fresh += 1;
            let v = format!("?v{fresh}");
            (format!("{subj} {} {v} .", OBJECT_PROPS.choose(rng).unwrap()), Some(v))
        }
        _ => {
            *fresh += 1;
            let v = format!("?v{fresh}");
            (format!("{subj} {} {v} .", DATA_PROPS.choose(rng).unwrap()), Some(v))
        }
    }
}

fn bgp(rng: &mut ChaCha8Rng, fresh: &mut usize) -> (Vec<String>, Vec<String>) {
    let mut atoms = Vec::new();
    let mut vars = vec!["?x".to_string()];
    let n = rng.gen_range(1..=3);
    for _ in 0..n {
        let subj = if rng.gen_bool(0.25) && vars.len() > 1 { vars.choose(rng).unwrap().clone() } else { "?x".to_string() };
        let (a, v) = atom(rng, &subj, fresh);
        atoms.push(a);
        if let Some(v) = v {
            vars.push(v);
        }
    }
    (atoms, vars)
}

fn condition(rng: &mut ChaCha8Rng, vars: &[String]) -> String {
    let v = vars.choose(rng).unwrap();
    match rng.gen_range(0..6) {
        0 => format!("{v} < 2"),
        1 => format!("{v} = 1"),
        2 => format!("{v} = \"x\""),
        3 => format!("bound({v})"),
        4 => format!("!({v} = 3)"),
        _ => format!("{v} = :e-1"),
    }
}

/// A random query over the generated vocabulary with at most three algebra operators.
pub fn random_query(rng: &mut ChaCha8Rng) -> String {
    let mut fresh = 0;
    let (atoms, mut vars) = bgp(rng, &mut fresh);
    let mut body = atoms.join(" ");
    let ops = rng.gen_range(0..=3);
    for _ in 0..ops {
        match rng.gen_range(0..3) {
            0 => body = format!("{body} FILTER({})", condition(rng, &vars)),
            1 => {
                let subj = vars.choose(rng).unwrap().clone();
                let (a, v) = atom(rng, &subj, &mut fresh);
                if let Some(v) = v {
                    vars.push(v);
                }
                body = format!("{body} OPTIONAL {{ {a} }}");
            }
            _ => {
                let (other, ovars) = bgp(rng, &mut fresh);
                vars.extend(ovars.into_iter().filter(|v| v != "?x"));
                body = format!("{{ {body} }} UNION {{ {} }}", other.join(" "));
            }
        }
    }
    format!("PREFIX : <http://example.org/>\nSELECT * WHERE {{ {body} }}\n")
}

/// A random RDF graph of at most `max` triples over a small vocabulary.
pub fn random_graph(rng: &mut ChaCha8Rng, max: usize) -> Graph {
    let n = rng.gen_range(0..=max);
    let mut triples = BTreeSet::new();
    for _ in 0..n {
        let s = Value::iri(&format!(":n{}", rng.gen_range(0..6)));
        let (p, o) = match rng.gen_range(0..4) {
            0 => (Value::iri(RDF_TYPE), Value::iri(CLASSES.choose(rng).unwrap())),
            1 => (Value::iri(":p0"), Value::iri(&format!(":n{}", rng.gen_range(0..6)))),
            2 => (Value::iri(":p1"), Value::iri(&format!(":n{}", rng.gen_range(0..6)))),
            _ => (Value::iri(":d0"), Value::Int(rng.gen_range(0..4))),
        };
        triples.insert((s, p, o));
    }
    Graph { triples }
}

fn graph_term(rng: &mut ChaCha8Rng, vars: &[&str], iri: bool) -> String {
    if rng.gen_bool(0.75) {
        vars.choose(rng).unwrap().to_string()
    } else if iri {
        format!(":n{}", rng.gen_range(0..6))
    } else {
        rng.gen_range(0..4).to_string()
    }
}

fn graph_bgp(rng: &mut ChaCha8Rng) -> String {
    let vars = ["?a", "?b", "?c", "?d"];
    let n = rng.gen_range(1..=2);
    let mut out = Vec::new();
    for _ in 0..n {
        let s = graph_term(rng, &vars, true);
        let t = match rng.gen_range(0..4) {
            0 => format!("{s} a {} .", CLASSES.choose(rng).unwrap()),
            1 => format!("{s} :p0 {} .", graph_term(rng, &vars, true)),
            2 => format!("{s} :p1 {} .", graph_term(rng, &vars, true)),
            _ => format!("{s} :d0 {} .", graph_term(rng, &vars, false)),
        };
        out.push(t);
    }
    out.join(" ")
}

fn graph_group(rng: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.3) {
        return graph_bgp(rng);
    }
    let vars = ["?a", "?b", "?c", "?d"];
    match rng.gen_range(0..4) {
        0 => format!("{{ {} }} UNION {{ {} }}", graph_group(rng, depth - 1), graph_group(rng, depth - 1)),
        1 => format!("{} OPTIONAL {{ {} }}", graph_group(rng, depth - 1), graph_group(rng, depth - 1)),
        2 => format!("{{ {} }} {{ {} }}", graph_group(rng, depth - 1), graph_group(rng, depth - 1)),
        _ => {
            let v = vars.choose(rng).unwrap();
            let c = match rng.gen_range(0..3) {
                0 => format!("bound({v})"),
                1 => format!("{v} < 2"),
                _ => format!("!({v} = :n1)"),
            };
            format!("{} FILTER({c})", graph_group(rng, depth - 1))
        }
    }
}

/// A random pattern over the graph vocabulary.
pub fn random_graph_query(rng: &mut ChaCha8Rng) -> String {
    format!("SELECT * WHERE {{ {} }}\n", graph_group(rng, 3))
}
