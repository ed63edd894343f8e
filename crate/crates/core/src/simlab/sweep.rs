use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Deserialize;
use statrs::statistics::{Data, OrderStatistics};

use super::data::{gen_mim_data, gen_sim_data, gen_spiked_data};
use super::links::LinkFunction;
use super::metrics::{cosine_distance, subspace_cosine_distance};
use super::truth::{gen_cp_tensor_beta, gen_lowrank_beta, gen_sparse_beta, gen_sparse_subspace};
use crate::dataset::CovariateShape;
use crate::error::{Error, Result};
use crate::estimators::{
    fit_mim2, fit_sim1_lowrank, fit_sim1_sparse, fit_sim1_tensor, fit_sim2_sparse, fit_spca_heavy, AdmmOptions,
    EstimatorKind, SimEstimate,
};
use crate::exec::map_indexed;
use crate::robusttrunc::ParamSetting;
use crate::scoremodel::{MomentBound, ScoreModel};
use crate::seed::derive_seed;

pub const SWEEP_HEADER: &str =
    "seed,n,d,s_or_r,link,dist,estimator,signal_strength,cosine_distance,wall_time_ms";

/// Sweep configuration, read from TOML:
///
/// ```toml
/// seed = 0
/// [model]
/// dist = "gamma:5,1"
/// [truth]
/// d = 200
/// level = 5
/// [estimator]
/// kind = "sim1-sparse"
/// link = "f1"
/// lambda = "paper-default"
/// [grid]
/// n = [500, 1000, 2000, 4000]
/// trials = 50
/// ```
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    pub truth: TruthSection,
    pub estimator: EstimatorSection,
    pub grid: GridSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Covariate distribution, e.g. `gaussian:0,1`, `gamma:5,1`, `t:5`, `rayleigh:2`.
    pub dist: String,
    #[serde(default = "one")]
    pub noise: f64,
    /// Spike strength `θ` for `spca-heavy`.
    #[serde(default = "five")]
    pub spike: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    /// `d`, or `d1` for matrices.
    pub d: usize,
    /// Second matrix dimension; defaults to `d`.
    pub d2: Option<usize>,
    /// `s*` or `r*`.
    pub level: usize,
    /// Number of indices for `mim2` and `spca-heavy`.
    #[serde(default = "one_usize")]
    pub k: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub kind: String,
    /// Not used by `spca-heavy`.
    pub link: Option<String>,
    #[serde(default)]
    pub lambda: ParamSetting,
    #[serde(default)]
    pub tau: ParamSetting,
    #[serde(default)]
    pub kappa: ParamSetting,
    #[serde(default = "one")]
    pub moment_bound: f64,
    pub rho: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub adaptive_rho: Option<bool>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: Vec<usize>,
    pub trials: usize,
    /// Records wall time per trial. Off by default so output is reproducible.
    #[serde(default)]
    pub record_time: bool,
}

fn one() -> f64 {
    1.0
}

fn five() -> f64 {
    5.0
}

fn one_usize() -> usize {
    1
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub seed: u64,
    pub n: usize,
    pub d: String,
    pub s_or_r: usize,
    pub link: String,
    pub dist: String,
    pub estimator: String,
    pub signal_strength: f64,
    /// `Err` holds the message of a failed trial.
    pub cosine_distance: std::result::Result<f64, String>,
    pub wall_time_ms: f64,
}

struct Plan {
    kind: EstimatorKind,
    model: ScoreModel,
    link: Option<LinkFunction>,
    shape: CovariateShape,
    moment: MomentBound,
    admm: AdmmOptions,
}

fn plan(cfg: &SweepConfig) -> Result<Plan> {
    let kind: EstimatorKind = cfg.estimator.kind.parse()?;
    let model: ScoreModel = cfg.model.dist.parse()?;
    let link = match (&cfg.estimator.link, kind) {
        (_, EstimatorKind::SpcaHeavy) => None,
        (Some(l), _) => Some(l.parse::<LinkFunction>()?),
        (None, _) => return Err(Error::Config(format!("estimator {kind} needs `estimator.link`"))),
    };
    let t = &cfg.truth;
    let shape = match kind {
        EstimatorKind::Sim1Lowrank => CovariateShape::Matrix(t.d, t.d2.unwrap_or(t.d)),
        EstimatorKind::Sim1Tensor => CovariateShape::Tensor4(t.d),
        _ => CovariateShape::Vector(t.d),
    };
    if kind == EstimatorKind::SpcaHeavy && t.k != 1 {
        return Err(Error::Config("spca-heavy sweeps use a single spike (k = 1)".into()));
    }
    if let Some(link) = &link {
        let k = if kind == EstimatorKind::Mim2 { t.k } else { 1 };
        link.check_arity(k)?;
    }
    if cfg.grid.n.is_empty() || cfg.grid.trials == 0 {
        return Err(Error::Config("grid needs at least one n and one trial".into()));
    }
    if cfg.grid.n.iter().any(|&n| n < 2) {
        return Err(Error::Config("every n in the grid must be at least 2".into()));
    }
    let defaults = AdmmOptions::default();
    let admm = AdmmOptions {
        rho: cfg.estimator.rho.unwrap_or(defaults.rho),
        tol: cfg.estimator.tol.unwrap_or(defaults.tol),
        max_iter: cfg.estimator.max_iter.unwrap_or(defaults.max_iter),
        adaptive_rho: cfg.estimator.adaptive_rho.unwrap_or(defaults.adaptive_rho),
    };
    let moment = MomentBound::new(cfg.estimator.moment_bound)?;
    // surface schedule errors once rather than in every row
    for &n in &cfg.grid.n {
        kind.schedule(moment, n, shape, cfg.estimator.lambda, cfg.estimator.tau, cfg.estimator.kappa)?;
    }
    Ok(Plan {
        kind,
        model,
        link,
        shape,
        moment,
        admm,
    })
}

fn dims_label(shape: CovariateShape) -> String {
    let dims: Vec<String> = shape.dims().iter().map(|d| d.to_string()).collect();
    dims.join("x")
}

fn signal_strength(kind: EstimatorKind, shape: CovariateShape, level: usize, n: usize) -> f64 {
    let (l, nf) = (level as f64, n as f64);
    match (kind, shape) {
        (EstimatorKind::Sim1Sparse, CovariateShape::Vector(d)) => (l * (d as f64).ln() / nf).sqrt(),
        (EstimatorKind::Sim1Lowrank, CovariateShape::Matrix(d1, d2)) => {
            let s = (d1 + d2) as f64;
            (l * s * s.ln() / nf).sqrt()
        }
        (EstimatorKind::Sim1Tensor, CovariateShape::Tensor4(d)) => {
            let s = 2.0 * (d * d) as f64;
            (l * s * s.ln() / nf).sqrt()
        }
        (_, shape) => {
            let d = shape.len() as f64;
            l * (d.ln() / nf).sqrt()
        }
    }
}

fn first_order_distance(est: &SimEstimate, truth: &DMatrix<f64>) -> Result<f64> {
    // everything thresholded away carries no direction information
    match &est.direction {
        Some(dir) => cosine_distance(dir, truth),
        None => Ok(1.0),
    }
}

fn trial(cfg: &SweepConfig, plan: &Plan, cell_seed: u64, n: usize) -> Result<f64> {
    let truth_seed = derive_seed(cell_seed, &[1]);
    let data_seed = derive_seed(cell_seed, &[2]);
    let t = &cfg.truth;
    let e = &cfg.estimator;
    let schedule = plan.kind.schedule(plan.moment, n, plan.shape, e.lambda, e.tau, e.kappa)?;
    let noise = cfg.model.noise;
    let link = || plan.link.as_ref().expect("checked in plan");
    match plan.kind {
        EstimatorKind::Sim1Sparse | EstimatorKind::Sim1Lowrank | EstimatorKind::Sim1Tensor | EstimatorKind::Sim2Sparse => {
            let truth = match plan.shape {
                CovariateShape::Vector(d) => gen_sparse_beta(d, t.level, truth_seed)?,
                CovariateShape::Matrix(d1, d2) => gen_lowrank_beta(d1, d2, t.level, truth_seed)?,
                CovariateShape::Tensor4(d) => gen_cp_tensor_beta(d, t.level, truth_seed)?,
            };
            let data = gen_sim_data(&plan.model, &truth, link(), noise, n, data_seed)?;
            let est = match plan.kind {
                EstimatorKind::Sim1Sparse => fit_sim1_sparse(&data, &plan.model, schedule)?,
                EstimatorKind::Sim1Lowrank => fit_sim1_lowrank(&data, &plan.model, schedule)?,
                EstimatorKind::Sim1Tensor => fit_sim1_tensor(&data, &plan.model, schedule)?,
                _ => fit_sim2_sparse(&data, &plan.model, schedule, plan.admm)?.0,
            };
            first_order_distance(&est, &truth.as_matrix())
        }
        EstimatorKind::Mim2 => {
            let (b, _) = gen_sparse_subspace(t.d, t.level, t.k, truth_seed)?;
            let data = gen_mim_data(&plan.model, &b, link(), noise, n, data_seed)?;
            let (b_hat, _) = fit_mim2(&data, &plan.model, schedule, t.k, plan.admm)?;
            subspace_cosine_distance(&b_hat, &b)
        }
        EstimatorKind::SpcaHeavy => {
            let truth = gen_sparse_beta(t.d, t.level, truth_seed)?;
            let data = gen_spiked_data(&plan.model, &truth.flat, cfg.model.spike, n, data_seed)?;
            let (v_hat, _) = fit_spca_heavy(&data, schedule, 1, plan.admm)?;
            cosine_distance(&v_hat, &truth.as_matrix())
        }
    }
}

/// Runs every `(n, trial)` cell. Cells run concurrently; rows come back
/// ordered by grid position then trial. The cell seed is
/// `derive_seed(seed, [n, trial])`, so adding cells never changes existing
/// ones. Configuration errors abort; per-trial failures become error rows.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let plan = plan(cfg)?;
    let trials = cfg.grid.trials;
    let cells = cfg.grid.n.len() * trials;
    let link_name = plan.link.as_ref().map_or_else(|| "none".to_string(), |l| l.to_string());
    let dist = plan.model.to_string();
    let rows = map_indexed(cells, |c| {
        let n = cfg.grid.n[c / trials];
        let t = c % trials;
        let cell_seed = derive_seed(cfg.seed, &[n as u64, t as u64]);
        let start = Instant::now();
        let result = trial(cfg, &plan, cell_seed, n).map_err(|e| e.to_string());
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        SweepRow {
            seed: cell_seed,
            n,
            d: dims_label(plan.shape),
            s_or_r: cfg.truth.level,
            link: link_name.clone(),
            dist: dist.clone(),
            estimator: plan.kind.to_string(),
            signal_strength: signal_strength(plan.kind, plan.shape, cfg.truth.level, n),
            cosine_distance: result,
            wall_time_ms: if cfg.grid.record_time { elapsed } else { 0.0 },
        }
    });
    Ok(rows)
}

/// CSV fields must not contain separators; distribution specs do.
fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    let mut line = String::new();
    for r in rows {
        line.clear();
        let dist = match &r.cosine_distance {
            Ok(v) => v.to_string(),
            Err(_) => "error".to_string(),
        };
        write!(
            line,
            "{},{},{},{},{},{},{},{},{},{:.3}",
            r.seed,
            r.n,
            quote(&r.d),
            r.s_or_r,
            quote(&r.link),
            quote(&r.dist),
            quote(&r.estimator),
            r.signal_strength,
            dist,
            r.wall_time_ms
        )
        .expect("writing to a String");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => out.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out
}

/// Reads a sweep CSV. Columns are located by header name, so extra columns
/// and reordering are tolerated; missing required columns are an error.
pub fn read_sweep_csv<R: BufRead>(r: R) -> Result<Vec<SweepRow>> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(h) => split_csv_line(h?.trim()),
        None => return Err(Error::Dataset("empty sweep file".into())),
    };
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Dataset(format!("sweep CSV is missing column `{name}`")))
    };
    let idx: Vec<usize> = SWEEP_HEADER.split(',').map(col).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f = split_csv_line(line.trim());
        let get = |i: usize| -> Result<&str> {
            f.get(idx[i])
                .map(String::as_str)
                .ok_or_else(|| Error::Dataset(format!("line {}: too few columns", lineno + 2)))
        };
        let num = |i: usize| -> Result<f64> {
            get(i)?
                .parse::<f64>()
                .map_err(|e| Error::Dataset(format!("line {}: {e}", lineno + 2)))
        };
        let int = |i: usize| -> Result<u64> {
            get(i)?
                .parse::<u64>()
                .map_err(|e| Error::Dataset(format!("line {}: {e}", lineno + 2)))
        };
        let cosine = match get(8)? {
            "error" => Err("error".to_string()),
            _ => Ok(num(8)?),
        };
        rows.push(SweepRow {
            seed: int(0)?,
            n: int(1)? as usize,
            d: get(2)?.to_string(),
            s_or_r: int(3)? as usize,
            link: get(4)?.to_string(),
            dist: get(5)?.to_string(),
            estimator: get(6)?.to_string(),
            signal_strength: num(7)?,
            cosine_distance: cosine,
            wall_time_ms: num(9)?,
        });
    }
    Ok(rows)
}

/// Median and quartiles of the cosine distance for one `n` of one series.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSummary {
    pub estimator: String,
    pub link: String,
    pub dist: String,
    pub n: usize,
    pub signal_strength: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub count: usize,
    pub errors: usize,
}

/// Groups rows by `(estimator, link, dist, n)`; error rows are counted but
/// excluded from the statistics. Groups with no successful trial are dropped.
/// Output is sorted by series, then by increasing `n`.
pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    type Key = (String, String, String, usize);
    let mut groups: BTreeMap<Key, (Vec<f64>, usize, f64)> = BTreeMap::new();
    for r in rows {
        let entry = groups
            .entry((r.estimator.clone(), r.link.clone(), r.dist.clone(), r.n))
            .or_insert((Vec::new(), 0, r.signal_strength));
        match r.cosine_distance {
            Ok(v) => entry.0.push(v),
            Err(_) => entry.1 += 1,
        }
    }
    groups
        .into_iter()
        .filter(|(_, (v, _, _))| !v.is_empty())
        .map(|((estimator, link, dist, n), (values, errors, signal_strength))| {
            let count = values.len();
            let mut data = Data::new(values);
            CellSummary {
                estimator,
                link,
                dist,
                n,
                signal_strength,
                median: data.median(),
                q1: data.lower_quartile(),
                q3: data.upper_quartile(),
                count,
                errors,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra_grid: &str) -> SweepConfig {
        SweepConfig::from_toml(&format!(
            r#"
seed = 3
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
{extra_grid}
"#
        ))
        .unwrap()
    }

    #[test]
    fn one_cell_one_row() {
        let rows = run_sweep(&config("n = [200]\ntrials = 1")).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.n, r.s_or_r, r.d.as_str(), r.link.as_str()), (200, 3, "20", "f1"));
        assert_eq!(r.wall_time_ms, 0.0);
        let v = *r.cosine_distance.as_ref().unwrap();
        assert!((0.0..=1.0).contains(&v));
        assert!(r.signal_strength > 0.0);
    }

    #[test]
    fn csv_is_reproducible_and_readable() {
        let cfg = config("n = [100, 300]\ntrials = 3");
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_sweep_csv(&run_sweep(&cfg).unwrap(), &mut a).unwrap();
        write_sweep_csv(&run_sweep(&cfg).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.starts_with(SWEEP_HEADER));
        assert!(text.contains("\"gamma:5,1\""));
        let back = read_sweep_csv(a.as_slice()).unwrap();
        assert_eq!(back, run_sweep(&cfg).unwrap());
    }

    #[test]
    fn cell_seeds_do_not_depend_on_grid() {
        let small = run_sweep(&config("n = [100]\ntrials = 2")).unwrap();
        let big = run_sweep(&config("n = [50, 100]\ntrials = 3")).unwrap();
        assert_eq!(small[0], big[3]);
        assert_eq!(small[1], big[4]);
    }

    #[test]
    fn failed_trials_become_error_rows() {
        let mut cfg = config("n = [100]\ntrials = 2");
        // gamma covariates are positive; a Gaussian-tailed score is fine, but
        // asking for more support than dimensions fails inside each trial
        cfg.truth.level = 50;
        let rows = run_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.cosine_distance.is_err()));
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().nth(1).unwrap().contains(",error,"));
    }

    #[test]
    fn config_errors() {
        assert!(SweepConfig::from_toml("seed = 1").is_err());
        let mut cfg = config("n = [100]\ntrials = 1");
        cfg.estimator.kind = "lasso".into();
        assert!(run_sweep(&cfg).is_err());
        let mut cfg = config("n = []\ntrials = 1");
        assert!(run_sweep(&cfg).is_err());
        cfg.grid.n = vec![100];
        cfg.estimator.link = None;
        assert!(run_sweep(&cfg).is_err());
    }

    #[test]
    fn missing_columns_rejected() {
        let err = read_sweep_csv("seed,n\n1,2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("missing column"));
        assert!(read_sweep_csv("".as_bytes()).is_err());
    }

    #[test]
    fn summary_statistics() {
        let mut rows = run_sweep(&config("n = [100, 400]\ntrials = 4")).unwrap();
        rows[0].cosine_distance = Err("boom".into());
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].n, s[0].count, s[0].errors), (100, 3, 1));
        assert!(s[0].q1 <= s[0].median && s[0].median <= s[0].q3);
    }
}
