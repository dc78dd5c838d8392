use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn project() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../projects/wellbore")
}

fn obdac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obdac")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn copy_project(to: &Path) {
    let from = project();
    for sub in ["", "data", "queries"] {
        std::fs::create_dir_all(to.join(sub)).unwrap();
        for e in std::fs::read_dir(from.join(sub)).unwrap().flatten() {
            if e.path().is_file() {
                std::fs::copy(e.path(), to.join(sub).join(e.file_name())).unwrap();
            }
        }
    }
}

#[test]
fn translate_all_optimizations_gives_join_free_sql() {
    let p = project();
    let q = p.join("queries/wellbore_star.rq");
    let o = obdac(&["--project", p.to_str().unwrap(), "translate", "--query", q.to_str().unwrap()]);
    assert!(o.status.success());
    let sql = stdout(&o);
    assert!(sql.starts_with("SELECT DISTINCT"), "{sql}");
    assert!(!sql.contains("JOIN") && !sql.contains("UNION"), "{sql}");

    let o = obdac(&[
        "--project", p.to_str().unwrap(), "translate", "--query", q.to_str().unwrap(),
        "--no-structural", "--no-semantic", "--no-exact", "--no-vfd", "--explain",
    ]);
    let text = stdout(&o);
    assert!(text.contains("UNION") && text.contains("JOIN"), "{text}");
    assert!(text.contains("unfold"), "{text}");
}

#[test]
fn cte_flag_prefixes_with_clause() {
    let p = project();
    let q = p.join("queries/old_or_w3.rq");
    let o = obdac(&["--project", p.to_str().unwrap(), "translate", "--query", q.to_str().unwrap(), "--cte"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("WITH "), "{}", stdout(&o));
}

#[test]
fn explain_prints_trees() {
    let p = project();
    let q = p.join("queries/wellbore_star.rq");
    let o = obdac(&["--project", p.to_str().unwrap(), "explain", "--query", q.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("semantic") && text.contains("SELECT"), "{text}");
}

#[test]
fn verify_passes_on_the_sample_project() {
    let p = project();
    let o = obdac(&["--project", p.to_str().unwrap(), "verify"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.ends_with(" 0 failed\n"), "{text}");
    assert!(!text.contains("FAIL "), "{text}");
}

#[test]
fn wrong_vfd_is_refused_or_caught() {
    let dir = tempfile::tempdir().unwrap();
    copy_project(dir.path());
    let maps = dir.path().join("mappings.txt");
    let text = std::fs::read_to_string(&maps).unwrap();
    let broken = text.replace(
        "SELECT wellbore_s, well_s, year, month, day FROM wellbore WHERE r_existence_kd_nm = 'actual'",
        "SELECT wellbore_s, well_s, year, month, day FROM wellbore",
    );
    assert_ne!(text, broken);
    std::fs::write(&maps, broken).unwrap();
    let d = dir.path().to_str().unwrap();
    let q = dir.path().join("queries/wellbore_star.rq");

    let o = obdac(&["--project", d, "verify", "--query", q.to_str().unwrap()]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}");
    assert!(out.contains("not enabled: vfd branching"), "{out}");
    assert!(out.contains("witness"), "{out}");

    let o = obdac(&["--project", d, "verify", "--query", q.to_str().unwrap(), "--trust-constraints"]);
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(1), "{out}");
    assert!(out.contains("FAIL") && out.contains("unexpected"), "{out}");
    assert!(out.contains(":Well-W2"), "{out}");
}

#[test]
fn empty_query_set_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let p = project();
    let o = obdac(&["--project", p.to_str().unwrap(), "verify", "--query", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0 checks, 0 failed\n");
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = obdac(&["--project", dir.path().to_str().unwrap(), "mine"]);
    assert_eq!(o.status.code(), Some(2));
    let p = project();
    let q = p.join("queries/wellbore_star.rq");
    let o = obdac(&["--project", p.to_str().unwrap(), "translate", "--query", q.to_str().unwrap(), "--cte", "--no-vfd"]);
    assert_eq!(o.status.code(), Some(2));
    let o = obdac(&["bench", "--scenario", "K7"]);
    assert_eq!(o.status.code(), Some(2));
    let o = obdac(&["bench", "--scenario", "K2", "--scale", "5000000"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--scale"));
}

#[test]
fn mined_constraints_load_back() {
    let dir = tempfile::tempdir().unwrap();
    copy_project(dir.path());
    let out = dir.path().join("mined.txt");
    let d = dir.path().to_str().unwrap();
    let o = obdac(&["--project", d, "mine", "--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("certified"));
    let o = obdac(&["--project", d, "--constraints", out.to_str().unwrap(), "verify"]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(!text.contains("not enabled"), "{text}");
}

#[test]
fn bench_reports_counts() {
    let o = obdac(&["bench", "--scenario", "E0,E3", "--scale", "200", "--runs", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("# scenario E0") && text.contains("# scenario E3"), "{text}");
    assert!(text.contains("indicative"), "{text}");
    let q3: Vec<&str> = text.lines().filter(|l| l.starts_with("q3 ")).collect();
    assert_eq!(q3.len(), 2);
    let bgp = |l: &str| l.split_whitespace().nth(4).unwrap().to_string();
    assert_eq!(bgp(q3[0]), "12");
    assert_eq!(bgp(q3[1]), "1");
}
