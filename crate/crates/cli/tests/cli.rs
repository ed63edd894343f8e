use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use stein_index::simlab::{gen_sim_data, gen_sparse_beta, gen_lowrank_beta, LinkFunction};
use stein_index::ScoreModel;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stein-index"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sparse_dataset(dir: &TempDir, link: LinkFunction, n: usize) -> PathBuf {
    let g = ScoreModel::standard_gaussian();
    let truth = gen_sparse_beta(8, 2, 3).unwrap();
    let data = gen_sim_data(&g, &truth, &link, 0.5, n, 4).unwrap();
    let path = dir.path().join("data.csv");
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    fs::write(&path, buf).unwrap();
    path
}

fn diag(out: &Path) -> String {
    fs::read_to_string(format!("{}.diag", out.display())).unwrap()
}

#[test]
fn fit_sim1_writes_estimate_and_diagnostics() {
    let dir = TempDir::new().unwrap();
    let data = sparse_dataset(&dir, LinkFunction::F1, 2000);
    let out = dir.path().join("est.csv");
    let o = run(&["fit-sim1", "--data", p(&data), "--dist", "gaussian:0,1", "--lambda", "paper-default", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let est = fs::read_to_string(&out).unwrap();
    assert!(est.starts_with("#dims=8\n"));
    assert_eq!(est.lines().count(), 9);
    let d = diag(&out);
    assert!(d.contains("estimator: sim1-sparse"));
    assert!(d.contains("schedule_source: experiment-default"), "{d}");
    assert!(d.contains("degenerate: false"));
}

#[test]
fn fit_sim1_on_matrix_data_is_lowrank() {
    let dir = TempDir::new().unwrap();
    let g = ScoreModel::standard_gaussian();
    let truth = gen_lowrank_beta(4, 3, 1, 5).unwrap();
    let data = gen_sim_data(&g, &truth, &LinkFunction::F1, 0.5, 1000, 6).unwrap();
    let path = dir.path().join("m.csv");
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    fs::write(&path, buf).unwrap();
    let out = dir.path().join("est.csv");
    let o = run(&["fit-sim1", "--data", p(&path), "--lambda", "0.01", "--kappa", "1e-6", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(&out).unwrap().starts_with("#dims=4,3\n"));
    assert!(diag(&out).contains("estimator: sim1-lowrank"));
    assert!(diag(&out).contains("schedule_source: manual"));
    let o = run(&["fit-sim1", "--data", p(&path), "--kappa", "inf", "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("kappa must be finite"));
}

#[test]
fn input_errors_exit_one_with_distinct_messages() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("est.csv");
    let missing = run(&["fit-sim1", "--data", "/nonexistent/data.csv", "--out", p(&out)]);
    assert_eq!(code(&missing), 1);
    assert!(stderr(&missing).contains("cannot read"));

    let bad_header = dir.path().join("bad.csv");
    fs::write(&bad_header, "dims 3\n1,2,3,4\n").unwrap();
    let o = run(&["fit-sim1", "--data", p(&bad_header), "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("malformed header"));

    let mismatch = dir.path().join("mismatch.csv");
    fs::write(&mismatch, "#dims=3\n1,2,3\n").unwrap();
    let o = run(&["fit-sim1", "--data", p(&mismatch), "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("expected 4 columns"));

    let o = run(&["fit-sim1", "--data", p(&mismatch), "--dist", "cauchy:1", "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    let o = run(&["fit-sim1", "--bogus"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn forced_nonconvergence_exits_two_and_still_writes() {
    let dir = TempDir::new().unwrap();
    let data = sparse_dataset(&dir, LinkFunction::F3, 500);
    let out = dir.path().join("est.csv");
    let o = run(&["fit-sim2", "--data", p(&data), "--tau", "paper-default", "--lambda", "paper-default", "--max-iter", "1", "--out", p(&out)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(out.exists());
    assert!(diag(&out).contains("converged: false"));

    let o = run(&["fit-sim2", "--data", p(&data), "--tau", "paper-default", "--lambda", "paper-default", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(diag(&out).contains("converged: true"));
}

#[test]
fn fit_mim_and_spca_write_k_columns() {
    let dir = TempDir::new().unwrap();
    let data = sparse_dataset(&dir, LinkFunction::F3, 500);
    let out = dir.path().join("mim.csv");
    let o = run(&["fit-mim", "--data", p(&data), "--k", "2", "--tau", "20", "--lambda", "0.05", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(&out).unwrap().starts_with("#dims=8,2\n"));

    // drop the response column for sparse PCA
    let text = fs::read_to_string(&data).unwrap();
    let stripped: Vec<String> = text
        .lines()
        .map(|l| if l.starts_with('#') { l.to_string() } else { l.split_once(',').unwrap().1.to_string() })
        .collect();
    let xs = dir.path().join("x.csv");
    fs::write(&xs, stripped.join("\n")).unwrap();
    let out = dir.path().join("pca.csv");
    let o = run(&["fit-spca", "--data", p(&xs), "--tau", "inf", "--lambda", "0.01", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(&out).unwrap().starts_with("#dims=8\n"));
    assert!(diag(&out).contains("estimator: spca-heavy"));
}

const ONE_CELL: &str = r#"
seed = 11
[model]
dist = "gamma:5,1"
[truth]
d = 20
level = 3
[estimator]
kind = "sim1-sparse"
link = "f1"
lambda = "paper-default"
[grid]
n = [400]
trials = 1
"#;

#[test]
fn sweep_one_cell_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, ONE_CELL).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(code(&run(&["sweep", "--config", p(&cfg), "--out", p(&a)])), 0);
    assert_eq!(code(&run(&["sweep", "--config", p(&cfg), "--out", p(&b), "--jobs", "3"])), 0);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("seed,n,d,s_or_r,link,dist,estimator,signal_strength,cosine_distance,wall_time_ms\n"));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = dir.path().join("c.csv");
    assert_eq!(code(&run(&["sweep", "--config", p(&cfg), "--out", p(&c), "--seed", "12"])), 0);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    assert_eq!(code(&run(&["sweep", "--config", p(&cfg)])), 1);
}

#[test]
fn sweep_trend_decreases_with_n() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, ONE_CELL.replace("n = [400]", "n = [300, 3000]").replace("trials = 1", "trials = 15")).unwrap();
    let out = dir.path().join("s.csv");
    assert_eq!(code(&run(&["sweep", "--config", p(&cfg), "--out", p(&out)])), 0);
    let rows = stein_index::simlab::read_sweep_csv(fs::read(&out).unwrap().as_slice()).unwrap();
    let cells = stein_index::simlab::summarize(&rows);
    assert_eq!(cells.len(), 2);
    let by_n = |n: usize| cells.iter().find(|c| c.n == n).unwrap().median;
    assert!(by_n(3000) < by_n(300));
}

/// Minimal well-formedness check: balanced, properly nested tags and quoted
/// attribute values.
fn well_formed(xml: &str) -> Result<(), String> {
    let mut stack: Vec<String> = Vec::new();
    let mut rest = xml;
    while let Some(start) = rest.find('<') {
        let end = rest[start..].find('>').ok_or("unterminated tag")? + start;
        let tag = &rest[start + 1..end];
        rest = &rest[end + 1..];
        if tag.starts_with('?') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            match stack.pop() {
                Some(open) if open == name.trim() => {}
                other => return Err(format!("closing {name} but open {other:?}")),
            }
            continue;
        }
        if !tag.matches('"').count().is_multiple_of(2) {
            return Err(format!("unbalanced quotes in <{tag}>"));
        }
        if !tag.ends_with('/') {
            stack.push(tag.split_whitespace().next().unwrap_or("").to_string());
        }
    }
    if stack.is_empty() {
        Ok(())
    } else {
        Err(format!("unclosed {stack:?}"))
    }
}

#[test]
fn plot_renders_one_polyline_per_series() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, ONE_CELL.replace("n = [400]", "n = [200, 400, 800, 1600]").replace("trials = 1", "trials = 3")).unwrap();
    let csv = dir.path().join("s.csv");
    assert_eq!(code(&run(&["sweep", "--config", p(&cfg), "--out", p(&csv)])), 0);
    let svg = dir.path().join("s.svg");
    let o = run(&["plot", "--input", p(&csv), "--out", p(&svg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 1);
    assert_eq!(text.matches("<circle").count(), 4);
    well_formed(&text).unwrap();
}

#[test]
fn plot_rejects_empty_and_malformed_csv() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "seed,n,d,s_or_r,link,dist,estimator,signal_strength,cosine_distance,wall_time_ms\n").unwrap();
    let svg = dir.path().join("x.svg");
    assert_eq!(code(&run(&["plot", "--input", p(&empty), "--out", p(&svg)])), 1);
    let missing = dir.path().join("missing.csv");
    fs::write(&missing, "seed,n\n1,2\n").unwrap();
    let o = run(&["plot", "--input", p(&missing), "--out", p(&svg)]);
    assert_eq!(code(&o), 1);
    assert!(!svg.exists());
}

#[test]
fn stein_check_prints_two_column_table() {
    let o = run(&["stein-check", "--dist", "gamma:5,1", "--link", "f1", "--d", "3", "--n", "20000"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split_whitespace().collect()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.len() == 2));
    let res: f64 = rows[1][1].parse().unwrap();
    let se: f64 = rows[2][1].parse().unwrap();
    assert!(res < 5.0 * se);
    assert_eq!(code(&run(&["stein-check", "--order", "2", "--link", "f4"])), 1);
}

#[test]
fn help_lists_shared_flags() {
    for sub in ["fit-sim1", "fit-sim2", "fit-mim", "fit-spca", "sweep", "plot", "stein-check"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(code(&o), 0);
        let text = String::from_utf8(o.stdout).unwrap();
        for flag in ["--dist", "--link", "--lambda", "--tau", "--kappa", "--moment-bound", "--seed", "--jobs", "--out"] {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = fs::read_to_string(&path).unwrap();
            stein_index::simlab::SweepConfig::from_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
