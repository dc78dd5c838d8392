use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use obda_core::bench::{BenchQuery, Scenario, Workload, DEFAULT_SCALE};
use obda_core::mapping::ConstrainedSpec;
use obda_core::miner::{mine, trusted, MinerOptions};
use obda_core::project::ProjectLayout;
use obda_core::relalg::{evaluate, Instance, Relation};
use obda_core::sparql::{oracle_answer, parse_query};
use obda_core::translator::{compile, translate, CompileOptions, Prepared};

#[derive(Parser)]
#[command(name = "obdac", version, about = "Compile SPARQL over ontology mappings into SQL")]
struct Cli {
    #[command(flatten)]
    paths: Paths,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Paths {
    /// Project directory with schema.txt, ontology.ttl, mappings.txt, constraints.txt, data/ and queries/.
    #[arg(long, global = true)]
    project: Option<PathBuf>,
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    #[arg(long, global = true)]
    ontology: Option<PathBuf>,
    #[arg(long, global = true)]
    mappings: Option<PathBuf>,
    #[arg(long, global = true)]
    constraints: Option<PathBuf>,
    /// Directory holding one CSV file per relation.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
}

#[derive(Args, Clone, Copy, Default)]
struct OptFlags {
    #[arg(long)]
    no_structural: bool,
    #[arg(long)]
    no_semantic: bool,
    #[arg(long)]
    no_exact: bool,
    #[arg(long)]
    no_vfd: bool,
    /// Share optimizing subqueries through WITH clauses.
    #[arg(long)]
    cte: bool,
}

impl OptFlags {
    fn options(&self, explain: bool) -> Result<CompileOptions> {
        let o = CompileOptions {
            structural: !self.no_structural,
            semantic_keys: !self.no_semantic,
            exact_predicates: !self.no_exact,
            vfd: !self.no_vfd,
            cte_mode: self.cte,
            explain,
            ..CompileOptions::all()
        };
        o.validate()?;
        Ok(o)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the SQL for a query.
    Translate {
        /// A .rq file or a directory of them.
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        opts: OptFlags,
        /// Also print per-stage operator counts.
        #[arg(long)]
        explain: bool,
    },
    /// Print the per-stage trace with expression trees, then the SQL.
    Explain {
        #[arg(long)]
        query: PathBuf,
        #[command(flatten)]
        opts: OptFlags,
    },
    /// Discover constraints that hold on the data.
    Mine {
        /// Write the certified constraints here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        max_path: usize,
        #[arg(long)]
        exhaustive: bool,
    },
    /// Compare compiled queries with the reference SPARQL evaluation.
    Verify {
        /// A .rq file or a directory of them; defaults to the project's queries.
        #[arg(long)]
        query: Option<PathBuf>,
        #[command(flatten)]
        opts: OptFlags,
        /// Only check the option set given by the flags instead of every combination.
        #[arg(long)]
        only: bool,
        /// Use declared constraints even when the data does not certify them.
        #[arg(long)]
        trust_constraints: bool,
    },
    /// Run a generated Wisconsin workload.
    Bench {
        /// Comma-separated scenario ids: K1 K2 K3 E0 E1 E2 E3.
        #[arg(long, default_value = "K2,K3")]
        scenario: String,
        #[arg(long, default_value_t = DEFAULT_SCALE)]
        scale: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        /// Restrict K scenarios to queries with this many property atoms.
        #[arg(long)]
        properties: Option<usize>,
    },
}

impl Paths {
    fn layout(&self) -> Result<ProjectLayout> {
        let base = match &self.project {
            Some(d) => ProjectLayout::in_dir(d),
            None => ProjectLayout::in_dir(Path::new(".")),
        };
        let pick = |o: &Option<PathBuf>, d: PathBuf| o.clone().unwrap_or(d);
        let layout = ProjectLayout {
            schema: pick(&self.schema, base.schema),
            ontology: pick(&self.ontology, base.ontology),
            mappings: pick(&self.mappings, base.mappings),
            constraints: self.constraints.clone().or(base.constraints),
            data: pick(&self.data, base.data),
            queries: base.queries,
        };
        for p in [&layout.schema, &layout.ontology, &layout.mappings] {
            if !p.exists() {
                bail!("{}: file not found (use --project or the individual path flags)", p.display());
            }
        }
        Ok(layout)
    }

    fn spec(&self) -> Result<(ProjectLayout, ConstrainedSpec)> {
        let layout = self.layout()?;
        let cspec = layout.load_spec()?;
        Ok((layout, cspec))
    }
}

fn load_instance(layout: &ProjectLayout, cspec: &ConstrainedSpec) -> Result<Instance> {
    Ok(layout.load_instance(&cspec.spec.schema)?)
}

fn read_queries(path: &Path) -> Result<Vec<(String, String)>> {
    if path.is_dir() {
        let layout = ProjectLayout { queries: path.to_path_buf(), ..ProjectLayout::in_dir(path) };
        return Ok(layout.load_queries()?);
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("query").to_string();
    Ok(vec![(name, text)])
}

fn show_rows(rows: &[Vec<obda_core::relalg::Value>], limit: usize) -> String {
    let mut out = String::new();
    for r in rows.iter().take(limit) {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("      ({})\n", cells.join(", ")));
    }
    if rows.len() > limit {
        out.push_str(&format!("      ... {} more\n", rows.len() - limit));
    }
    out
}

fn diff(expected: &Relation, got: &Relation) -> Result<String> {
    let missing = expected.minus(got)?;
    let extra = got.minus(expected)?;
    let mut out = String::new();
    if !missing.is_empty() {
        out.push_str(&format!("    missing {} rows:\n{}", missing.len(), show_rows(&missing, 5)));
    }
    if !extra.is_empty() {
        out.push_str(&format!("    unexpected {} rows:\n{}", extra.len(), show_rows(&extra, 5)));
    }
    Ok(out)
}

struct Outcome {
    lines: Vec<String>,
    failures: usize,
}

fn verify_query(
    name: &str,
    text: &str,
    cspec: &ConstrainedSpec,
    inst: &Instance,
    combos: &[CompileOptions],
    preps: &[Prepared; 2],
) -> Result<Outcome> {
    let q = parse_query(text).with_context(|| name.to_string())?;
    let expected = oracle_answer(&q, &cspec.spec, inst).with_context(|| name.to_string())?;
    let mut lines = Vec::new();
    let mut failures = 0;
    for o in combos {
        let prep = &preps[o.exact_predicates as usize];
        let c = compile(&q, cspec, prep, o).with_context(|| format!("{name} [{o}]"))?;
        let got = evaluate(&c.expr, inst).with_context(|| format!("{name} [{o}]"))?;
        if got == expected {
            lines.push(format!("{name:<20} {o}  PASS  {} rows", expected.len()));
        } else {
            failures += 1;
            lines.push(format!("{name:<20} {o}  FAIL  expected {} rows, got {}\n{}", expected.len(), got.len(), diff(&expected, &got)?.trim_end()));
        }
    }
    Ok(Outcome { lines, failures })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Translate { query, opts, explain } => {
            let (_, cspec) = cli.paths.spec()?;
            let o = opts.options(explain)?;
            for (name, text) in read_queries(&query)? {
                let c = translate(&text, &cspec, &o).with_context(|| name.clone())?;
                if explain {
                    println!("-- {name}\n{}", c.explain(false));
                }
                println!("{}", c.sql);
            }
        }
        Command::Explain { query, opts } => {
            let (_, cspec) = cli.paths.spec()?;
            let o = opts.options(true)?;
            for (name, text) in read_queries(&query)? {
                let c = translate(&text, &cspec, &o).with_context(|| name.clone())?;
                println!("-- {name} [{o}]\n{}\n{}", c.explain(true), c.sql);
            }
        }
        Command::Mine { output, max_path, exhaustive } => {
            let (layout, cspec) = cli.paths.spec()?;
            let inst = load_instance(&layout, &cspec)?;
            let opts = MinerOptions { max_path, exhaustive, ..MinerOptions::default() };
            let report = mine(&cspec.spec, &inst, &opts)?;
            match output {
                Some(p) => {
                    std::fs::write(&p, report.constraint_file()).with_context(|| format!("{}", p.display()))?;
                    print!("{report}");
                }
                None => {
                    eprint!("{report}");
                    print!("{}", report.constraint_file());
                }
            }
        }
        Command::Verify { query, opts, only, trust_constraints } => {
            let (layout, declared) = cli.paths.spec()?;
            let inst = load_instance(&layout, &declared)?;
            let queries = match &query {
                Some(p) => read_queries(p)?,
                None if layout.queries.exists() => layout.load_queries()?,
                None => Vec::new(),
            };
            let cspec = if trust_constraints {
                declared
            } else {
                let (cs, report) = trusted(&declared, &inst)?;
                for r in &report.rejected {
                    println!("not enabled: {} ({})", r.constraint, r.reason);
                    if let Some(w) = &r.witness {
                        println!("    witness {w}");
                    }
                }
                cs
            };
            let combos = if only { vec![opts.options(false)?] } else { CompileOptions::combinations() };
            let preps = [Prepared::new(&cspec, false)?, Prepared::new(&cspec, true)?];
            let outcomes: Vec<Result<Outcome>> = std::thread::scope(|s| {
                let handles: Vec<_> = queries
                    .iter()
                    .map(|(n, t)| s.spawn(|| verify_query(n, t, &cspec, &inst, &combos, &preps)))
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(anyhow!("verification thread panicked")))).collect()
            });
            let mut failures = 0;
            let mut checks = 0;
            for o in outcomes {
                let o = o?;
                failures += o.failures;
                checks += o.lines.len();
                for l in o.lines {
                    println!("{l}");
                }
            }
            println!("{checks} checks, {failures} failed");
            if failures > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Bench { scenario, scale, seed, runs, properties } => {
            let ids: Vec<Scenario> = scenario.split(',').map(|s| Scenario::parse(s.trim())).collect::<Result<_, _>>()?;
            let keep = |q: &BenchQuery| properties.is_none_or(|p| q.properties == p || q.properties == 0);
            let mut current: Option<Workload> = None;
            for id in ids {
                let w = match current.take() {
                    Some(w) => w.with_scenario(id)?,
                    None => Workload::generate(id, scale, seed)?,
                };
                println!("{}", w.run(runs, &keep)?);
                current = Some(w);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
