mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use obda_core::bench::{self, BenchQuery, Scenario, Workload};
use obda_core::mapping::{ConstrainedSpec, Constraints, VfdKind};
use obda_core::miner::vfd::{lemma_identity, Bodies};
use obda_core::miner::{mine, MinerOptions};
use obda_core::project::ProjectLayout;
use obda_core::relalg::{evaluate, Instance};
use obda_core::sparql::{answer, oracle_answer, parse_query, solutions_to_relation, var_attr, Query};
use obda_core::translator::{compile, tau, CompileOptions, Prepared};

use common::*;

struct Verdict {
    criterion: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn wellbore() -> ProjectLayout {
    ProjectLayout::in_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../projects/wellbore"))
}

/// Compiled answers against the oracle for every option set; returns the first disagreement.
fn check_all_options(q: &Query, cspec: &ConstrainedSpec, inst: &Instance, preps: &[Prepared; 2]) -> Result<usize, String> {
    let expected = oracle_answer(q, &cspec.spec, inst);
    let mut checks = 0;
    for o in CompileOptions::combinations() {
        let c = compile(q, cspec, &preps[o.exact_predicates as usize], &o).map_err(|e| format!("[{o}] compile: {e}"))?;
        let got = evaluate(&c.expr, inst);
        match (&expected, &got) {
            (Ok(a), Ok(b)) if a == b => {}
            (Err(_), Err(_)) => {}
            (a, b) => return Err(format!("[{o}] expected {a:?}\ngot {b:?}\n{}", c.explain(true))),
        }
        checks += 1;
    }
    Ok(checks)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut with_constraints = 0;
    for seed in 0..500u64 {
        let mut r = rng(seed);
        let case = random_case(&mut r, false);
        let text = random_query(&mut r);
        let q = parse_query(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert!(q.pattern.operator_count() <= 3);
        let report = mine(&case.spec, &case.inst, &MinerOptions::default()).expect("mining");
        if !report.certified.vfds.is_empty() {
            with_constraints += 1;
        }
        let cspec = ConstrainedSpec { spec: case.spec.clone(), constraints: report.certified };
        let preps = [Prepared::new(&cspec, false).unwrap(), Prepared::new(&cspec, true).unwrap()];
        match check_all_options(&q, &cspec, &case.inst, &preps) {
            Ok(n) => checks += n,
            Err(e) => failures.push(format!("seed {seed}: {text}{e}\n{case:?}")),
        }
    }
    let elapsed = start.elapsed();
    if let Some(f) = failures.first() {
        eprintln!("{f}");
    }
    Verdict {
        criterion: 1,
        name: "soundness over 500 random cases, every option set",
        pass: failures.is_empty() && elapsed < Duration::from_secs(120),
        detail: format!(
            "{checks} comparisons, {} failing cases, {with_constraints} cases with certified VFDs, {:.1}s (limit 120s)",
            failures.len(),
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut failures = 0;
    let mut checks = 0;
    for seed in 0..200u64 {
        let mut r = rng(10_000 + seed);
        let g = random_graph(&mut r, 50);
        let mut inst = Instance::default();
        inst.add_relation("triple", g.triple_relation());
        for _ in 0..5 {
            let text = random_graph_query(&mut r);
            let q = parse_query(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
            let vars = q.pattern.vars();
            let expected = answer(&q.pattern, &g).map(|s| solutions_to_relation(&vars, &s));
            let attrs: Vec<String> = vars.iter().map(|v| var_attr(v)).collect();
            let got = evaluate(&tau(&q.pattern), &inst).and_then(|r| r.project(&attrs));
            checks += 1;
            match (expected, got) {
                (Ok(a), Ok(b)) if a == b => {}
                (a, b) => {
                    failures += 1;
                    if failures == 1 {
                        eprintln!("graph seed {seed}: {text}\nexpected {a:?}\ngot {b:?}");
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    Verdict {
        criterion: 2,
        name: "tau translation over 200 random graphs",
        pass: failures == 0 && elapsed < Duration::from_secs(60),
        detail: format!("{checks} patterns, {failures} mismatches, {:.1}s (limit 60s)", elapsed.as_secs_f64()),
    }
}

fn criterion_3() -> Verdict {
    let l = wellbore();
    let cspec = l.load_spec().unwrap();
    let text = std::fs::read_to_string(l.queries.join("wellbore_star.rq")).unwrap();
    let q = parse_query(&text).unwrap();
    let counts = |o: &CompileOptions| {
        let prep = Prepared::new(&cspec, o.exact_predicates).unwrap();
        let c = compile(&q, &cspec, &prep, o).unwrap();
        let branches = bench::widest_union(&c.trace[0].expr);
        (c.counts.joins, c.counts.unions, branches)
    };
    let off = counts(&CompileOptions::none());
    let on = counts(&CompileOptions::all());
    Verdict {
        criterion: 3,
        name: "wellbore star: redundant joins removed",
        pass: (off.0, off.2) == (2, 3) && (on.0, on.1) == (0, 0),
        detail: format!(
            "optimizations off: {} joins over a {}-branch union; exact+vfd: {} joins, {} unions (expected 2/3 and 0/0)",
            off.0, off.2, on.0, on.1
        ),
    }
}

fn criterion_4() -> Verdict {
    let run = |s: Scenario| {
        let w = Workload::generate(s, 1000, 7).unwrap();
        w.run(1, &|q: &BenchQuery| q.name == "q3").unwrap().rows.remove(0)
    };
    let e0 = run(Scenario::E0);
    let e3 = run(Scenario::E3);
    Verdict {
        criterion: 4,
        name: "exact classes: q3 union branches",
        pass: e0.bgp_branches == 12 && e3.bgp_branches == 1 && e0.answers == e3.answers,
        detail: format!(
            "E0 {} branches, E3 {} branches (expected 12 and 1), answers {} / {}",
            e0.bgp_branches, e3.bgp_branches, e0.answers, e3.answers
        ),
    }
}

fn lemma_checks(cspec: &ConstrainedSpec, inst: &Instance, tally: &mut (usize, usize, usize, Vec<String>)) {
    let report = mine(&cspec.spec, inst, &MinerOptions::default()).expect("mining");
    if report.certified.vfds.is_empty() {
        return;
    }
    let plain = ConstrainedSpec { spec: cspec.spec.clone(), constraints: Constraints::default() };
    let exact = ConstrainedSpec {
        spec: cspec.spec.clone(),
        constraints: Constraints { exact: report.certified.exact.clone(), ..Constraints::default() },
    };
    let preps = [Prepared::new(&plain, false).unwrap(), Prepared::new(&exact, true).unwrap()];
    for v in &report.certified.vfds {
        match v.kind {
            VfdKind::Branching => tally.0 += 1,
            VfdKind::Path => tally.1 += 1,
        }
        for p in &preps {
            let mut bodies = Bodies::new(&p.split, inst);
            match lemma_identity(v, &cspec.spec.schema, &mut bodies) {
                Ok(true) => {}
                other => {
                    tally.2 += 1;
                    tally.3.push(format!("{v}: {other:?}"));
                }
            }
        }
    }
}

fn criterion_5() -> Verdict {
    let mut tally = (0, 0, 0, Vec::new());
    let l = wellbore();
    let cspec = l.load_spec().unwrap();
    let inst = l.load_instance(&cspec.spec.schema).unwrap();
    lemma_checks(&cspec, &inst, &mut tally);
    let w = Workload::generate(Scenario::K2, 200, 5).unwrap();
    lemma_checks(&w.cspec, &w.instance, &mut tally);
    let mut seed = 20_000u64;
    while tally.0 + tally.1 < 100 || tally.1 < 10 {
        let mut r = rng(seed);
        let case = random_case(&mut r, false);
        lemma_checks(&ConstrainedSpec { spec: case.spec, constraints: Constraints::default() }, &case.inst, &mut tally);
        seed += 1;
        if seed > 40_000 {
            break;
        }
    }
    if let Some(f) = tally.3.first() {
        eprintln!("{f}");
    }
    let total = tally.0 + tally.1;
    Verdict {
        criterion: 5,
        name: "extensional identity for certified VFDs",
        pass: total >= 100 && tally.2 == 0,
        detail: format!("{total} certified ({} branching, {} path), {} violations", tally.0, tally.1, tally.2),
    }
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let k2 = Workload::generate(Scenario::K2, 100_000, 42).unwrap();
    let k3 = k2.with_scenario(Scenario::K3).unwrap();
    let family = |q: &BenchQuery| q.properties == 3;
    let a = k2.run(3, &family).unwrap();
    let b = k3.run(3, &family).unwrap();
    let ratio = a.mean_ms() / b.mean_ms();
    let joins_ok = a.rows.iter().all(|r| r.counts.joins == 0) && b.rows.iter().all(|r| r.counts.joins == r.properties);
    let answers_ok = a.rows.iter().zip(&b.rows).all(|(x, y)| x.answers == y.answers);
    let elapsed = start.elapsed();
    Verdict {
        criterion: 6,
        name: "views with VFDs vs views without, 100k rows",
        pass: ratio <= 0.6 && joins_ok && answers_ok && elapsed < Duration::from_secs(600),
        detail: format!(
            "K2 mean {:.1} ms, K3 mean {:.1} ms, ratio {ratio:.2} (limit 0.60); joins K2=0 and K3=m: {joins_ok}; answers equal: {answers_ok}; {:.0}s (limit 600s)",
            a.mean_ms(),
            b.mean_ms(),
            elapsed.as_secs_f64()
        ),
    }
}

fn criterion_7() -> Verdict {
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut multi = 0;
    for seed in 0..100u64 {
        let mut r = rng(30_000 + seed);
        let case = random_case(&mut r, true);
        let cspec = ConstrainedSpec { spec: case.spec.clone(), constraints: Constraints::default() };
        let preps = [Prepared::new(&cspec, false).unwrap(), Prepared::new(&cspec, true).unwrap()];
        if preps[0].split.groups.len() > preps[0].split.groups.values().map(|g| &g.original).collect::<std::collections::BTreeSet<_>>().len() {
            multi += 1;
        }
        for _ in 0..3 {
            let text = random_query(&mut r);
            let q = parse_query(&text).unwrap();
            match check_all_options(&q, &cspec, &case.inst, &preps) {
                Ok(n) => checks += n,
                Err(e) => failures.push(format!("seed {seed}: {text}{e}\n{case:?}")),
            }
        }
    }
    if let Some(f) = failures.first() {
        eprintln!("{f}");
    }
    Verdict {
        criterion: 7,
        name: "multi-template predicates split without changing answers",
        pass: failures.is_empty() && multi == 100,
        detail: format!("{checks} comparisons over 100 specs ({multi} with split predicates), {} failing", failures.len()),
    }
}

fn criterion_8() -> Verdict {
    let mut corpus: Vec<(String, ConstrainedSpec, Vec<(String, String)>)> = Vec::new();
    let l = wellbore();
    corpus.push(("wellbore".into(), l.load_spec().unwrap(), l.load_queries().unwrap()));
    for s in [Scenario::K1, Scenario::K2, Scenario::E0, Scenario::E3] {
        let w = Workload::generate(s, 50, 1).unwrap();
        let qs = w.queries.iter().map(|q| (q.name.clone(), q.text.clone())).collect();
        corpus.push((s.to_string(), w.cspec, qs));
    }
    let mut compiled = 0;
    let mut unstable = Vec::new();
    for (name, cspec, queries) in &corpus {
        for o in CompileOptions::combinations() {
            for (qn, text) in queries {
                let q = parse_query(text).unwrap();
                let runs: Vec<String> = (0..3)
                    .map(|_| {
                        let prep = Prepared::new(cspec, o.exact_predicates).unwrap();
                        compile(&q, cspec, &prep, &o).unwrap().sql
                    })
                    .collect();
                compiled += 1;
                if runs.iter().any(|s| s != &runs[0]) {
                    unstable.push(format!("{name}/{qn} [{o}]"));
                }
            }
        }
    }
    Verdict {
        criterion: 8,
        name: "SQL text is byte-identical across runs",
        pass: unstable.is_empty(),
        detail: match unstable.first() {
            None => format!("{compiled} query/option pairs compiled 3 times, 0 unstable"),
            Some(u) => format!("{compiled} query/option pairs compiled 3 times, {} unstable, first {u}", unstable.len()),
        },
    }
}

#[test]
fn acceptance() {
    let criteria: [fn() -> Verdict; 8] =
        [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8];
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut verdicts = Vec::new();
    for (i, c) in criteria.into_iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let v = c();
        println!("criterion {}: {} ... {} ({})", v.criterion, v.name, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        verdicts.push(v);
    }
    let failed: Vec<usize> = verdicts.iter().filter(|v| !v.pass).map(|v| v.criterion).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

