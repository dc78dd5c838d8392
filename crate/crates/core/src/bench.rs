//! Wisconsin-style data generator and benchmark scenarios.
//!
//! Every table follows the 16-column Wisconsin layout. For `n` rows:
//! `unique1` runs 0..n in row order, `unique2` (the key) is a seeded random
//! permutation of 0..n, and the remaining columns are derived from `unique1`
//! as in the original benchmark: `two`, `four`, `ten`, `twenty` are residues,
//! `onePercent`/`tenPercent`/`twentyPercent`/`fiftyPercent` are residues modulo
//! 100/10/5/2, `unique3` equals `unique1`, `evenOnePercent` and
//! `oddOnePercent` are `2 * onePercent` and `2 * onePercent + 1`. The string
//! columns are 52 characters: `stringu1`/`stringu2` encode `unique1`/`unique2`
//! in seven letters padded with `x`, and `string4` cycles through `AAAA`,
//! `HHHH`, `OOOO`, `VVVV`.
//!
//! Scenarios K1, K2 and K3 populate a class and three properties per join
//! width `n` (1..=4), either from joins of the base tables (K1) or from views
//! materializing those joins (K2 with VFDs, K3 without). Scenarios E0..E3 use a
//! four-class hierarchy whose classes become exact one group at a time.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mapping::{parse_mappings, ConstrainedSpec, Constraints, ObdaSpec};
use crate::ontology::Ontology;
use crate::relalg::{evaluate, Instance, OpCounts, RelExpr, Relation, Schema, Tuple, Value};
use crate::sparql::{parse_query, GraphPattern, Query};
use crate::translator::{compile, CompileOptions, Prepared};

pub const WISCONSIN_COLUMNS: [&str; 16] = [
    "unique1",
    "unique2",
    "two",
    "four",
    "ten",
    "twenty",
    "onePercent",
    "tenPercent",
    "twentyPercent",
    "fiftyPercent",
    "unique3",
    "evenOnePercent",
    "oddOnePercent",
    "stringu1",
    "stringu2",
    "string4",
];

pub const DEFAULT_SCALE: usize = 100_000;
/// Largest row count generated; the K scenarios hold eight tables of this size in memory.
pub const MAX_SCALE: usize = 2_000_000;

const PREFIX: &str = "PREFIX : <http://example.org/wisconsin#>\n";

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("scale {0} exceeds the in-memory limit of {MAX_SCALE} rows; pick a smaller --scale")]
    TooLarge(usize),
    #[error("scale must be at least 10 rows")]
    TooSmall,
    #[error("unknown scenario `{0}`; expected one of K1 K2 K3 E0 E1 E2 E3")]
    Unknown(String),
    #[error("{0}")]
    Pipeline(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    K1,
    K2,
    K3,
    E0,
    E1,
    E2,
    E3,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [Scenario::K1, Scenario::K2, Scenario::K3, Scenario::E0, Scenario::E1, Scenario::E2, Scenario::E3];

    pub fn parse(s: &str) -> Result<Scenario, BenchError> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| BenchError::Unknown(s.to_string()))
    }

    pub fn is_exact_family(self) -> bool {
        matches!(self, Scenario::E0 | Scenario::E1 | Scenario::E2 | Scenario::E3)
    }

    /// Compile options of the scenario.
    pub fn options(self) -> CompileOptions {
        match self {
            Scenario::K3 => CompileOptions { vfd: false, ..CompileOptions::all() },
            _ => CompileOptions::all(),
        }
    }

    /// Classes declared exact.
    pub fn exact_classes(self) -> &'static [&'static str] {
        match self {
            Scenario::E1 => &[":A1", ":A2"],
            Scenario::E2 => &[":A1", ":A2", ":A3"],
            Scenario::E3 => &[":A1", ":A2", ":A3", ":A4"],
            _ => &[],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

fn letters(mut v: i64) -> String {
    let mut s = vec![b'A'; 7];
    for i in (0..7).rev() {
        s[i] = b'A' + (v % 26) as u8;
        v /= 26;
    }
    let mut out = String::from_utf8(s).expect("ascii");
    out.push_str(&"x".repeat(45));
    out
}

/// One Wisconsin table of `n` rows, reproducible from `seed`.
pub fn wisconsin_table(n: usize, seed: u64) -> Relation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<i64> = (0..n as i64).collect();
    perm.shuffle(&mut rng);
    let string4: Vec<Value> = ["AAAA", "HHHH", "OOOO", "VVVV"]
        .iter()
        .map(|s| Value::Text(Arc::from(format!("{s}{}", "x".repeat(48)).as_str())))
        .collect();
    let rows = (0..n).map(|i| {
        let u1 = i as i64;
        let u2 = perm[i];
        let one = u1 % 100;
        vec![
            Value::Int(u1),
            Value::Int(u2),
            Value::Int(u1 % 2),
            Value::Int(u1 % 4),
            Value::Int(u1 % 10),
            Value::Int(u1 % 20),
            Value::Int(one),
            Value::Int(u1 % 10),
            Value::Int(u1 % 5),
            Value::Int(u1 % 2),
            Value::Int(u1),
            Value::Int(one * 2),
            Value::Int(one * 2 + 1),
            Value::text(&letters(u1)),
            Value::text(&letters(u2)),
            string4[i % 4].clone(),
        ]
    });
    Relation::from_rows(&WISCONSIN_COLUMNS, rows)
}

fn table_decl(name: &str) -> String {
    let cols: Vec<String> = WISCONSIN_COLUMNS
        .iter()
        .map(|c| format!("{c} {}", if c.starts_with("string") { "text" } else { "int" }))
        .collect();
    format!("relation {name}({})\nkey {name}(unique2)\n", cols.join(", "))
}

/// Source of view column `u_i` for join width `n`: `unique1` of `tab_i` when `i <= n`, else another column of `tab_n`.
fn u_col(i: usize, n: usize) -> (usize, &'static str) {
    match (i, n) {
        (i, n) if i <= n => (i, "unique1"),
        (2, _) => (n, "onePercent"),
        _ => (n, "unique3"),
    }
}

/// View `view_n` materializes the join of `tab1..tabn` on `unique2` with columns `u1..u3`.
fn view_rows(tables: &[Relation], n: usize) -> Relation {
    let maps: Vec<std::collections::HashMap<i64, &Tuple>> = tables[..n]
        .iter()
        .map(|t| {
            let k = t.index("unique2").expect("wisconsin column");
            t.iter().map(|r| (if let Value::Int(a) = r[k] { a } else { unreachable!("integer key") }, r)).collect()
        })
        .collect();
    let cols: Vec<(usize, usize)> = (1..=3)
        .map(|i| {
            let (j, c) = u_col(i, n);
            (j - 1, tables[j - 1].index(c).expect("wisconsin column"))
        })
        .collect();
    let mut keys: Vec<i64> = maps[0].keys().copied().collect();
    keys.sort_unstable();
    let rows = keys.into_iter().filter(|k| maps.iter().all(|m| m.contains_key(k))).map(|k| {
        let mut row = vec![Value::Int(k)];
        row.extend(cols.iter().map(|&(j, c)| maps[j][&k][c].clone()));
        row
    });
    Relation::from_rows(&["unique2", "u1", "u2", "u3"], rows)
}

fn u_source(i: usize, n: usize) -> String {
    let (j, c) = u_col(i, n);
    format!("t{j}.{c} AS u{i}")
}

fn join_from(n: usize) -> String {
    let tabs: Vec<String> = (1..=n).map(|j| format!("tab{j} t{j}")).collect();
    let conds: Vec<String> = (2..=n).map(|j| format!("t1.unique2 = t{j}.unique2")).collect();
    let mut s = format!("FROM {}", tabs.join(", "));
    if !conds.is_empty() {
        s.push_str(&format!(" WHERE {}", conds.join(" AND ")));
    }
    s
}

/// A generated specification, instance and query family.
pub struct Workload {
    pub scenario: Scenario,
    pub scale: usize,
    pub seed: u64,
    pub cspec: ConstrainedSpec,
    pub instance: Instance,
    pub queries: Vec<BenchQuery>,
}

#[derive(Clone, Debug)]
pub struct BenchQuery {
    pub name: String,
    pub text: String,
    /// Number of property atoms for the K family, 0 otherwise.
    pub properties: usize,
    /// Join width of the mapping sources for the K family, 0 otherwise.
    pub width: usize,
}

fn k_spec(scenario: Scenario) -> (String, String, String, String) {
    let mut schema = String::new();
    for j in 1..=4 {
        schema.push_str(&table_decl(&format!("tab{j}")));
    }
    for n in 1..=4 {
        schema.push_str(&format!("relation view{n}(unique2 int, u1 int, u2 int, u3 int)\n"));
    }
    let mut onto = String::from("@prefix : <http://example.org/wisconsin#> .\n");
    let mut maps = String::new();
    let mut cons = String::new();
    for n in 1..=4 {
        onto.push_str(&format!(":Class_{n} a owl:Class .\n"));
        let all_u: Vec<String> = (1..=3).map(|i| u_source(i, n)).collect();
        if scenario == Scenario::K1 {
            maps.push_str(&format!("map c{n}: :t-{{unique2}} a :Class_{n}\n  <- SELECT t1.unique2 {}\n", join_from(n)));
            for i in 1..=3 {
                let cols = if i == 1 { all_u.join(", ") } else { u_source(i, n) };
                maps.push_str(&format!(
                    "map p{i}_{n}: :t-{{unique2}} :Property_{i}_{n} {{u{i}}}\n  <- SELECT t1.unique2, {cols} {}\n",
                    join_from(n)
                ));
            }
        } else {
            maps.push_str(&format!("map c{n}: :t-{{unique2}} a :Class_{n}\n  <- SELECT unique2 FROM view{n}\n"));
            for i in 1..=3 {
                let cols = if i == 1 { "u1, u2, u3".to_string() } else { format!("u{i}") };
                maps.push_str(&format!(
                    "map p{i}_{n}: :t-{{unique2}} :Property_{i}_{n} {{u{i}}}\n  <- SELECT unique2, {cols} FROM view{n}\n"
                ));
            }
            cons.push_str(&format!(
                "vfd branching :t-{{unique2}} : :Property_1_{n} :Property_2_{n} :Property_3_{n}\noce domain :Property_1_{n} :Class_{n}\n"
            ));
        }
    }
    (schema, onto, maps, cons)
}

fn e_spec(scenario: Scenario, scale: usize) -> (String, String, String, String) {
    let mut schema = String::new();
    for j in 1..=5 {
        schema.push_str(&table_decl(&format!("tab{j}")));
    }
    let mut onto = String::from("@prefix : <http://example.org/wisconsin#> .\n");
    for i in 1..=4 {
        onto.push_str(&format!(":A{i} a owl:Class .\n"));
    }
    for i in 1..4 {
        onto.push_str(&format!(":A{i} rdfs:subClassOf :A{} .\n", i + 1));
    }
    let mut maps = String::new();
    for i in 1..=4 {
        maps.push_str(&format!(
            "map a{i}: :t-{{unique2}} a :A{i}\n  <- SELECT unique2 FROM tab{i} WHERE unique2 < {}\n",
            scale * i / 5
        ));
    }
    maps.push_str("map r: :t-{unique2} :R :t-{unique1}\n  <- SELECT unique2, unique1 FROM tab5\n");
    maps.push_str("map s: :t-{unique2} :S {unique1}\n  <- SELECT unique2, unique1 FROM tab5 WHERE unique1 < ");
    maps.push_str(&format!("{}\n", scale / 2));
    let cons: String = scenario.exact_classes().iter().map(|c| format!("exact {c}\n")).collect();
    (schema, onto, maps, cons)
}

fn k_queries(scale: usize) -> Vec<BenchQuery> {
    let mut out = Vec::new();
    for m in 1..=3 {
        for n in 1..=4 {
            for (label, k) in [("s", (scale / 1000).max(1)), ("m", (scale / 100).max(1)), ("l", (scale / 10).max(1))] {
                let vars: Vec<String> = (1..=m).map(|i| format!("?y{i}")).collect();
                let atoms: Vec<String> = (1..=m).map(|i| format!("?x :Property_{i}_{n} ?y{i} .")).collect();
                let text = format!(
                    "{PREFIX}SELECT ?x {} WHERE {{\n  ?x a :Class_{n} .\n  {}\n  FILTER(?y{m} < {k})\n}}\n",
                    vars.join(" "),
                    atoms.join("\n  ")
                );
                out.push(BenchQuery { name: format!("q{m}_{n}{label}"), text, properties: m, width: n });
            }
        }
    }
    out
}

fn e_queries() -> Vec<BenchQuery> {
    let bodies = [
        "SELECT ?x WHERE { ?x a :A2 . }",
        "SELECT ?x ?y WHERE { ?x a :A3 . ?x :R ?y . }",
        "SELECT * WHERE { ?x a :A3 . ?x :R ?y . ?y a :A4 .\n  OPTIONAL { ?x :S ?u . } OPTIONAL { ?y :S ?v . } }",
        "SELECT ?x ?y WHERE { ?x a :A4 . ?x :R ?y . ?y a :A4 . }",
        "SELECT ?x ?y ?z WHERE { ?x a :A4 . ?x :R ?y . ?y a :A4 . ?y :R ?z . ?z a :A3 . }",
        "SELECT * WHERE { ?x a :A4 . ?x :R ?y . ?y a :A4 . ?y :R ?z . ?z a :A4 .\n  OPTIONAL { ?x :S ?u . } OPTIONAL { ?z :S ?v . } }",
    ];
    bodies
        .iter()
        .enumerate()
        .map(|(i, b)| BenchQuery { name: format!("q{}", i + 1), text: format!("{PREFIX}{b}\n"), properties: 0, width: 0 })
        .collect()
}

impl Workload {
    pub fn generate(scenario: Scenario, scale: usize, seed: u64) -> Result<Workload, BenchError> {
        if scale > MAX_SCALE {
            return Err(BenchError::TooLarge(scale));
        }
        if scale < 10 {
            return Err(BenchError::TooSmall);
        }
        let (schema_text, onto_text, map_text, cons_text) =
            if scenario.is_exact_family() { e_spec(scenario, scale) } else { k_spec(scenario) };
        let perr = |e: String| BenchError::Pipeline(e);
        let schema = Schema::parse(&schema_text).map_err(|e| perr(e.to_string()))?;
        let ontology = Ontology::parse(&onto_text).map_err(|e| perr(e.to_string()))?;
        let mappings = parse_mappings(&map_text, &schema).map_err(|e| perr(e.to_string()))?;
        let constraints = Constraints::parse(&cons_text).map_err(|e| perr(e.to_string()))?;
        let spec = ObdaSpec::new(schema, ontology, mappings).map_err(|e| perr(e.to_string()))?;

        let tables = if scenario.is_exact_family() { 5 } else { 4 };
        let mut instance = Instance::default();
        let mut generated = Vec::new();
        for j in 1..=tables {
            let t = wisconsin_table(scale, seed.wrapping_mul(31).wrapping_add(j as u64));
            generated.push(t);
        }
        if !scenario.is_exact_family() {
            for n in 1..=4 {
                instance.add_relation(&format!("view{n}"), view_rows(&generated, n));
            }
        }
        for (j, t) in generated.into_iter().enumerate() {
            instance.add_relation(&format!("tab{}", j + 1), t);
        }
        let queries = if scenario.is_exact_family() { e_queries() } else { k_queries(scale) };
        Ok(Workload { scenario, scale, seed, cspec: ConstrainedSpec { spec, constraints }, instance, queries })
    }

    /// The same data and queries under another scenario of the same family.
    pub fn with_scenario(&self, scenario: Scenario) -> Result<Workload, BenchError> {
        if scenario.is_exact_family() != self.scenario.is_exact_family() || scenario == Scenario::K1 || self.scenario == Scenario::K1 {
            return Workload::generate(scenario, self.scale, self.seed);
        }
        let (_, _, _, cons_text) =
            if scenario.is_exact_family() { e_spec(scenario, self.scale) } else { k_spec(scenario) };
        let constraints = Constraints::parse(&cons_text).map_err(|e| BenchError::Pipeline(e.to_string()))?;
        Ok(Workload {
            scenario,
            scale: self.scale,
            seed: self.seed,
            cspec: ConstrainedSpec { spec: self.cspec.spec.clone(), constraints },
            instance: self.instance.clone(),
            queries: self.queries.clone(),
        })
    }

    /// Compiles and runs each selected query `runs` times in sequence.
    pub fn run(&self, runs: usize, keep: &dyn Fn(&BenchQuery) -> bool) -> Result<BenchReport, BenchError> {
        let opts = self.scenario.options();
        let prep = Prepared::new(&self.cspec, opts.exact_predicates).map_err(|e| BenchError::Pipeline(e.to_string()))?;
        let mut rows = Vec::new();
        for q in self.queries.iter().filter(|q| keep(q)) {
            let parsed = parse_query(&q.text).map_err(|e| BenchError::Pipeline(format!("{}: {e}", q.name)))?;
            let c = compile(&parsed, &self.cspec, &prep, &opts).map_err(|e| BenchError::Pipeline(format!("{}: {e}", q.name)))?;
            let mut times = Vec::new();
            let mut answers = 0;
            for _ in 0..runs.max(1) {
                let t = Instant::now();
                let r = evaluate(&c.expr, &self.instance).map_err(|e| BenchError::Pipeline(format!("{}: {e}", q.name)))?;
                times.push(t.elapsed().as_secs_f64() * 1000.0);
                answers = r.len();
            }
            rows.push(QueryRun {
                name: q.name.clone(),
                counts: c.counts,
                widest_union: widest_union(&c.expr),
                bgp_branches: bgp_branches(&parsed, &self.cspec, &prep, &opts)?,
                answers,
                mean_ms: times.iter().sum::<f64>() / times.len() as f64,
                properties: q.properties,
                width: q.width,
            });
        }
        Ok(BenchReport { scenario: self.scenario, scale: self.scale, seed: self.seed, runs: runs.max(1), rows })
    }
}

/// Largest union of mapping alternatives over the basic graph patterns of `q`, each compiled alone.
pub fn bgp_branches(q: &Query, cspec: &ConstrainedSpec, prep: &Prepared, opts: &CompileOptions) -> Result<usize, BenchError> {
    let mut widest = 0;
    for tps in q.pattern.bgps() {
        let pattern = GraphPattern::Bgp(tps.clone());
        let part = Query { select: pattern.vars(), pattern };
        let c = compile(&part, cspec, prep, opts).map_err(|e| BenchError::Pipeline(e.to_string()))?;
        widest = widest.max(widest_union(&c.expr));
    }
    Ok(widest)
}

/// Largest number of branches of a single union in `e`, at least 1.
pub fn widest_union(e: &RelExpr) -> usize {
    let own = match e {
        RelExpr::Union(cs) => cs.len(),
        _ => 1,
    };
    e.children().iter().map(|c| widest_union(c)).fold(own, usize::max)
}

#[derive(Clone, Debug)]
pub struct QueryRun {
    pub name: String,
    pub counts: OpCounts,
    pub widest_union: usize,
    pub bgp_branches: usize,
    pub answers: usize,
    pub mean_ms: f64,
    pub properties: usize,
    pub width: usize,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub scenario: Scenario,
    pub scale: usize,
    pub seed: u64,
    pub runs: usize,
    pub rows: Vec<QueryRun>,
}

impl BenchReport {
    pub fn mean_ms(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|r| r.mean_ms).sum::<f64>() / self.rows.len() as f64
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# scenario {} scale {} seed {} runs {}", self.scenario, self.scale, self.seed, self.runs)?;
        writeln!(f, "# timings come from the embedded evaluator and are indicative only; operator counts are the stable signal")?;
        writeln!(f, "{:<10} {:>6} {:>7} {:>7} {:>9} {:>9} {:>12}", "query", "joins", "unions", "widest", "bgp_union", "answers", "mean_ms")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10} {:>6} {:>7} {:>7} {:>9} {:>9} {:>12.3}",
                r.name, r.counts.joins, r.counts.unions, r.widest_union, r.bgp_branches, r.answers, r.mean_ms
            )?;
        }
        writeln!(f, "mean {:.3} ms over {} queries", self.mean_ms(), self.rows.len())
    }
}

/// Rows of one generated table, for determinism checks.
pub fn table_digest(rel: &Relation) -> String {
    use sha2::{Digest, Sha256};
    let mut rows: Vec<&Tuple> = rel.iter().collect();
    rows.sort();
    let mut h = Sha256::new();
    for r in rows {
        for v in r {
            h.update(v.lexical().as_bytes());
            h.update([0x1f]);
        }
        h.update([b'\n']);
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparql::oracle_answer;

    #[test]
    fn table_columns_follow_the_layout() {
        let t = wisconsin_table(100, 7);
        assert_eq!(t.attrs().len(), 16);
        let u2 = t.index("unique2").unwrap();
        let mut keys: Vec<i64> = t.iter().map(|r| if let Value::Int(v) = r[u2] { v } else { -1 }).collect();
        keys.sort_unstable();
        assert_eq!(keys, (0..100).collect::<Vec<_>>());
        let row = t.iter().find(|r| r[0] == Value::Int(57)).unwrap();
        assert_eq!(row[t.index("onePercent").unwrap()], Value::Int(57));
        assert_eq!(row[t.index("oddOnePercent").unwrap()], Value::Int(115));
        assert_eq!(row[t.index("stringu1").unwrap()].lexical().len(), 52);
        assert_eq!(&row[t.index("stringu1").unwrap()].lexical()[..7], "AAAAACF");
        assert_eq!(table_digest(&t), table_digest(&wisconsin_table(100, 7)));
        assert_ne!(table_digest(&t), table_digest(&wisconsin_table(100, 8)));
    }

    #[test]
    fn scale_limits() {
        assert!(matches!(Workload::generate(Scenario::K2, MAX_SCALE + 1, 0), Err(BenchError::TooLarge(_))));
        assert!(Scenario::parse("k2").is_ok());
        assert!(Scenario::parse("K9").is_err());
    }

    #[test]
    fn small_workloads_agree_with_the_oracle() {
        for s in Scenario::ALL {
            let w = Workload::generate(s, 60, 3).unwrap();
            let opts = s.options();
            let prep = Prepared::new(&w.cspec, opts.exact_predicates).unwrap();
            for q in &w.queries {
                let parsed = parse_query(&q.text).unwrap();
                let c = compile(&parsed, &w.cspec, &prep, &opts).unwrap();
                let got = evaluate(&c.expr, &w.instance).unwrap();
                let want = oracle_answer(&parsed, &w.cspec.spec, &w.instance).unwrap();
                assert_eq!(got, want, "{s} {}", q.name);
            }
        }
    }
}
