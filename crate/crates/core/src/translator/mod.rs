//! SPARQL to relational algebra and SQL compilation.

pub mod emit;
pub mod semantic;
pub mod structural;
pub mod tau;
pub mod unfold;
pub mod vfd;

use std::collections::BTreeSet;
use std::fmt;

use crate::mapping::{apply_exact_predicates, saturate_tmappings, split_multi_template, ConstrainedSpec, MappingError, SplitMappings};
use crate::relalg::{OpCounts, RelError, RelExpr, Schema};
use crate::sparql::{parse_query, var_attr, GraphPattern, Query, SparqlError, TriplePattern};

pub use emit::emit_sql;
pub use structural::{BgpPlan, UriLeaf};
pub use tau::{tau, translate_with, Translated};

pub const DEFAULT_BUDGET: usize = 512;

/// Optimization toggles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CompileOptions {
    pub structural: bool,
    pub semantic_keys: bool,
    pub exact_predicates: bool,
    pub vfd: bool,
    pub cte_mode: bool,
    pub explain: bool,
    pub budget: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions::all()
    }
}

impl CompileOptions {
    pub fn all() -> CompileOptions {
        CompileOptions {
            structural: true,
            semantic_keys: true,
            exact_predicates: true,
            vfd: true,
            cte_mode: false,
            explain: false,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn none() -> CompileOptions {
        CompileOptions { structural: false, semantic_keys: false, exact_predicates: false, vfd: false, ..CompileOptions::all() }
    }

    /// The 24 valid toggle combinations.
    pub fn combinations() -> Vec<CompileOptions> {
        let mut out = Vec::new();
        for bits in 0..8u8 {
            for level in 0..3u8 {
                out.push(CompileOptions {
                    structural: bits & 1 != 0,
                    semantic_keys: bits & 2 != 0,
                    exact_predicates: bits & 4 != 0,
                    vfd: level >= 1,
                    cte_mode: level == 2,
                    ..CompileOptions::none()
                });
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), TranslateError> {
        if self.cte_mode && !self.vfd {
            return Err(TranslateError::new(Stage::Options, "CTE mode requires VFD optimization"));
        }
        Ok(())
    }
}

impl fmt::Display for CompileOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |b: bool, s: &'static str| if b { s } else { "-" };
        write!(
            f,
            "{}{}{}{}{}",
            flag(self.structural, "S"),
            flag(self.semantic_keys, "K"),
            flag(self.exact_predicates, "E"),
            flag(self.vfd, "V"),
            flag(self.cte_mode, "C")
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Options,
    Parse,
    Mappings,
    Unfold,
    Structural,
    Vfd,
    Semantic,
    Cte,
    Emit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Options => "options",
            Stage::Parse => "parse",
            Stage::Mappings => "mappings",
            Stage::Unfold => "unfold",
            Stage::Structural => "structural",
            Stage::Vfd => "vfd",
            Stage::Semantic => "semantic",
            Stage::Cte => "cte",
            Stage::Emit => "emit",
        })
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{stage}: {message}")]
pub struct TranslateError {
    pub stage: Stage,
    pub message: String,
}

impl TranslateError {
    fn new(stage: Stage, message: impl Into<String>) -> TranslateError {
        TranslateError { stage, message: message.into() }
    }
}

impl From<SparqlError> for TranslateError {
    fn from(e: SparqlError) -> Self {
        TranslateError::new(Stage::Parse, e.to_string())
    }
}

/// Expression size after one stage.
#[derive(Clone, Debug)]
pub struct StageTrace {
    pub stage: Stage,
    pub counts: OpCounts,
    pub branches: usize,
    pub expr: RelExpr,
}

/// Output of a compilation.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub query: Query,
    pub expr: RelExpr,
    pub sql: String,
    pub trace: Vec<StageTrace>,
    pub notes: Vec<String>,
    /// Operator counts of the final expression, mapping bodies excluded.
    pub counts: OpCounts,
}

impl Compiled {
    /// Human-readable stage table, optionally with expression trees.
    pub fn explain(&self, trees: bool) -> String {
        let mut s = String::new();
        for t in &self.trace {
            s.push_str(&format!("{:<11} unions={:<4} joins={:<4} branches={}\n", t.stage.to_string(), t.counts.unions, t.counts.joins, t.branches));
            if trees {
                for line in t.expr.to_string().lines() {
                    s.push_str(&format!("    {line}\n"));
                }
            }
        }
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}

/// T-mappings ready for unfolding under one exactness setting.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub split: SplitMappings,
    bodies: BTreeSet<RelExpr>,
}

impl Prepared {
    pub fn new(cspec: &ConstrainedSpec, exact: bool) -> Result<Prepared, TranslateError> {
        let err = |e: MappingError| TranslateError::new(Stage::Mappings, e.to_string());
        let mut tmaps = saturate_tmappings(&cspec.spec).map_err(err)?;
        if exact {
            tmaps = apply_exact_predicates(&tmaps, &cspec.constraints.exact, &cspec.spec.mappings).map_err(err)?;
        }
        let split = split_multi_template(&tmaps);
        let mut bodies: BTreeSet<RelExpr> = BTreeSet::new();
        for g in split.groups.values() {
            bodies.extend(g.mappings.iter().map(|m| m.body.clone()));
            bodies.extend(g.merged_body());
        }
        Ok(Prepared { split, bodies })
    }

    /// Operator counts with mapping bodies treated as opaque scans.
    pub fn counts(&self, e: &RelExpr) -> OpCounts {
        e.op_counts_with(&|x| self.bodies.contains(x))
    }
}

struct Snapshots {
    unfold: RelExpr,
    structural: RelExpr,
    vfd: RelExpr,
    semantic: RelExpr,
}

fn attrs_fn(schema: &Schema) -> impl Fn(&RelExpr) -> Vec<String> + '_ {
    move |e: &RelExpr| e.attrs(schema).unwrap_or_default()
}

fn structural_plan(
    units: Vec<unfold::Unit>,
    vars: Vec<String>,
    opts: &CompileOptions,
    notes: &mut Vec<String>,
) -> BgpPlan {
    if !opts.structural {
        return BgpPlan::Raw { vars, units };
    }
    match structural::structural(&units, &vars, opts.budget) {
        Ok((leaves, _)) => BgpPlan::Leaves { vars, leaves },
        Err(e) => {
            notes.push(e);
            BgpPlan::Raw { vars, units }
        }
    }
}

fn compile_bgp(
    tps: &[TriplePattern],
    cspec: &ConstrainedSpec,
    prep: &Prepared,
    opts: &CompileOptions,
    notes: &mut Vec<String>,
    stars: &mut Vec<vfd::StarRewrite>,
) -> Snapshots {
    let schema = &cspec.spec.schema;
    let attrs_of = attrs_fn(schema);
    let vars: Vec<String> = GraphPattern::Bgp(tps.to_vec()).vars();
    let units: Vec<unfold::Unit> = tps.iter().map(|tp| unfold::unfold_triple(tp, &prep.split, &attrs_of)).collect();
    let raw = BgpPlan::Raw { vars: vars.clone(), units: units.clone() };
    let unfold = raw.to_relexpr();
    let mut plan = structural_plan(units, vars.clone(), opts, notes);
    let structural = plan.to_relexpr();
    if opts.vfd {
        let (rewrites, vnotes) = vfd::plan(tps, &cspec.constraints, &prep.split, &attrs_of);
        notes.extend(vnotes);
        if !rewrites.is_empty() {
            let covered: BTreeSet<usize> = rewrites.iter().flat_map(|r| r.atoms.iter().copied()).collect();
            let mut units: Vec<unfold::Unit> = rewrites.iter().map(|r| r.unit.clone()).collect();
            for (i, tp) in tps.iter().enumerate() {
                if !covered.contains(&i) {
                    units.push(unfold::unfold_triple(tp, &prep.split, &attrs_of));
                }
            }
            for r in &rewrites {
                notes.push(format!("{} rewritten by {}", r.unit.label, r.vfd));
            }
            stars.extend(rewrites);
            plan = structural_plan(units, vars.clone(), opts, notes);
        }
    }
    let vfd = plan.to_relexpr();
    if opts.semantic_keys {
        if let BgpPlan::Leaves { vars, leaves } = plan {
            let merged: Vec<UriLeaf> = leaves.iter().map(|l| semantic::eliminate_self_joins(l, schema).0).collect();
            let mut seen = BTreeSet::new();
            let merged: Vec<UriLeaf> = merged.into_iter().filter(|l| seen.insert(l.clone())).collect();
            let (kept, _) = semantic::prune_subsumed(merged, schema);
            plan = BgpPlan::Leaves { vars, leaves: kept };
        }
    }
    let semantic = plan.to_relexpr();
    Snapshots { unfold, structural, vfd, semantic }
}

fn finish(t: Translated, select: &[String]) -> RelExpr {
    let missing: Vec<String> = select.iter().filter(|v| !t.vars.contains(v)).map(|v| var_attr(v)).collect();
    let attrs: Vec<String> = select.iter().map(|v| var_attr(v)).collect();
    let body = if missing.is_empty() { t.expr } else { RelExpr::padding(missing, t.expr) };
    RelExpr::project(&attrs, body)
}

/// Hoists optimizing bodies used at least twice into named bindings.
pub fn hoist_ctes(e: &RelExpr, stars: &[vfd::StarRewrite]) -> RelExpr {
    let mut bindings: Vec<(String, RelExpr)> = Vec::new();
    let mut body = e.clone();
    for s in stars {
        if bindings.iter().any(|(_, b)| *b == s.body) || body.occurrences(&s.body) < 2 {
            continue;
        }
        let mut name = s.name.clone();
        let mut k = 2;
        while bindings.iter().any(|(n, _)| *n == name) {
            name = format!("{}_{k}", s.name);
            k += 1;
        }
        body = body.replace(&s.body, &RelExpr::CteRef(name.clone()));
        bindings.push((name, s.body.clone()));
    }
    if bindings.is_empty() {
        body
    } else {
        RelExpr::WithCte { bindings, body: Box::new(body) }
    }
}

/// Compiles a parsed query against prepared T-mappings.
pub fn compile(query: &Query, cspec: &ConstrainedSpec, prep: &Prepared, opts: &CompileOptions) -> Result<Compiled, TranslateError> {
    opts.validate()?;
    let mut notes = Vec::new();
    let mut stars = Vec::new();
    let mut snaps: Vec<Snapshots> = Vec::new();
    translate_with::<TranslateError>(&query.pattern, &mut |tps| {
        let s = compile_bgp(tps, cspec, prep, opts, &mut notes, &mut stars);
        let e = s.semantic.clone();
        snaps.push(s);
        Ok(e)
    })?;
    let stage_expr = |pick: fn(&Snapshots) -> &RelExpr| -> RelExpr {
        let mut k = 0;
        let t = translate_with::<TranslateError>(&query.pattern, &mut |_| {
            k += 1;
            Ok(pick(&snaps[k - 1]).clone())
        })
        .expect("replay of compiled leaves");
        finish(t, &query.select)
    };
    let mut trace = Vec::new();
    let mut push = |stage: Stage, expr: RelExpr| {
        trace.push(StageTrace { stage, counts: prep.counts(&expr), branches: expr.branch_count(), expr });
    };
    push(Stage::Unfold, stage_expr(|s| &s.unfold));
    push(Stage::Structural, stage_expr(|s| &s.structural));
    push(Stage::Vfd, stage_expr(|s| &s.vfd));
    let mut expr = stage_expr(|s| &s.semantic);
    push(Stage::Semantic, expr.clone());
    if opts.cte_mode {
        expr = hoist_ctes(&expr, &stars);
        push(Stage::Cte, expr.clone());
    }
    let sql = emit_sql(&expr, &cspec.spec.schema).map_err(|e: RelError| TranslateError::new(Stage::Emit, e.to_string()))?;
    let counts = prep.counts(&expr);
    Ok(Compiled { query: query.clone(), expr, sql, trace, notes, counts })
}

/// Parses and compiles a query text.
pub fn translate(text: &str, cspec: &ConstrainedSpec, opts: &CompileOptions) -> Result<Compiled, TranslateError> {
    let query = parse_query(text)?;
    let prep = Prepared::new(cspec, opts.exact_predicates)?;
    compile(&query, cspec, &prep, opts)
}
