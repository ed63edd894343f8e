//! End-to-end estimator checks on synthetic data against independent oracles.

mod common;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::statistics::{Data, Median};

use stein_index::estimators::{
    admm_fantope, fit_mim2, fit_sim1_lowrank, fit_sim1_sparse, fit_sim1_tensor, fit_sim2_sparse, fit_spca_heavy,
    prox_gradient_lowrank, sparse_objective, AdmmOptions, EstimatorKind,
};
use stein_index::robusttrunc::{truncated_first_moment, truncated_mean_matrix, ParamSetting};
use stein_index::seed::{derive_seed, rng_from_seed};
use stein_index::simlab::{
    cosine_distance, gen_cp_tensor_beta, gen_lowrank_beta, gen_mim_data, gen_sim_data, gen_sparse_beta,
    gen_sparse_subspace, gen_spiked_data, subspace_distance, LinkFunction,
};
use stein_index::{MomentBound, ScoreModel};

const AUTO: ParamSetting = ParamSetting::Auto;
const PAPER: ParamSetting = ParamSetting::PaperDefault;

fn median(v: Vec<f64>) -> f64 {
    Data::new(v).median()
}

#[test]
fn sim1_sparse_recovers_direction_with_theorem_schedule() {
    let g = ScoreModel::standard_gaussian();
    let truth = gen_sparse_beta(10, 1, 1).unwrap();
    let data = gen_sim_data(&g, &truth, &LinkFunction::F1, 1.0, 50_000, 2).unwrap();
    let sched = EstimatorKind::Sim1Sparse
        .schedule(MomentBound::default(), data.n(), data.shape(), AUTO, AUTO, AUTO)
        .unwrap();
    let est = fit_sim1_sparse(&data, &g, sched).unwrap();
    let dist = cosine_distance(est.direction.as_ref().unwrap(), &truth.as_matrix()).unwrap();
    assert!(dist < 0.05, "{dist}");
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn sim1_sparse_output_beats_search_and_coordinate_descent() {
    let g = ScoreModel::standard_gaussian();
    let truth = gen_sparse_beta(20, 4, 5).unwrap();
    let data = gen_sim_data(&g, &truth, &LinkFunction::F1, 1.0, 5000, 6).unwrap();
    let sched = EstimatorKind::Sim1Sparse
        .schedule(MomentBound::default(), data.n(), data.shape(), PAPER, AUTO, AUTO)
        .unwrap();
    let est = fit_sim1_sparse(&data, &g, sched).unwrap();
    let m = truncated_first_moment(&data, &g, sched.tau.unwrap()).unwrap().value;
    let obj = |b: &DMatrix<f64>| sparse_objective(b, &m, sched.lambda);
    let f0 = obj(&est.raw);

    let mut rng = rng_from_seed(7);
    let scale = m.amax() * 2.0;
    for _ in 0..10_000 {
        let b = DMatrix::from_fn(20, 1, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * scale);
        assert!(obj(&b) >= f0 - 1e-12);
    }

    // coordinate descent treating the objective as a black box
    let mut b = DMatrix::zeros(20, 1);
    for _sweep in 0..3 {
        for j in 0..20 {
            let best = golden(
                |t| {
                    let mut c = b.clone();
                    c[j] = t;
                    obj(&c)
                },
                -scale,
                scale,
            );
            b[j] = best;
        }
    }
    assert!(f0 <= obj(&b) + 1e-9, "closed form {f0} vs coordinate descent {}", obj(&b));
    assert!((est.raw.clone() - b).amax() < 1e-6);
}

#[test]
fn lowrank_closed_form_matches_prox_gradient() {
    let g = ScoreModel::standard_gaussian();
    let truth = gen_lowrank_beta(10, 10, 2, 8).unwrap();
    let data = gen_sim_data(&g, &truth, &LinkFunction::F1, 1.0, 10_000, 9).unwrap();
    let sched = EstimatorKind::Sim1Lowrank
        .schedule(MomentBound::default(), data.n(), data.shape(), PAPER, AUTO, AUTO)
        .unwrap();
    let est = fit_sim1_lowrank(&data, &g, sched).unwrap();
    let mean = truncated_mean_matrix(&data, &g, sched.kappa.unwrap()).unwrap().value;
    let iter = prox_gradient_lowrank(&mean, sched.lambda, 0.05, 2000).unwrap();
    assert!((iter - &est.raw).norm() <= 1e-6);
}

#[test]
fn tensor_error_shrinks_as_n_quadruples() {
    let g = ScoreModel::standard_gaussian();
    let truth = gen_cp_tensor_beta(3, 1, 10).unwrap();
    let target = truth.as_matrix();
    let med = |n: usize| {
        median(
            (0..10u64)
                .map(|s| {
                    let data = gen_sim_data(&g, &truth, &LinkFunction::F1, 1.0, n, derive_seed(11, &[n as u64, s])).unwrap();
                    let sched = EstimatorKind::Sim1Tensor
                        .schedule(MomentBound::default(), n, data.shape(), PAPER, AUTO, PAPER)
                        .unwrap();
                    let est = fit_sim1_tensor(&data, &g, sched).unwrap();
                    est.direction.map_or(1.0, |d| cosine_distance(&d, &target).unwrap())
                })
                .collect(),
        )
    };
    let (a, b, c) = (med(1000), med(4000), med(16_000));
    assert!(b <= 0.5 * a && c <= 0.5 * b, "{a} {b} {c}");
}

fn sim2_median(link: LinkFunction) -> f64 {
    let g = ScoreModel::standard_gaussian();
    median(
        (0..20u64)
            .map(|s| {
                let truth = gen_sparse_beta(30, 3, derive_seed(12, &[s])).unwrap();
                let data = gen_sim_data(&g, &truth, &link, 1.0, 20_000, derive_seed(13, &[s])).unwrap();
                let sched = EstimatorKind::Sim2Sparse
                    .schedule(MomentBound::default(), data.n(), data.shape(), PAPER, PAPER, AUTO)
                    .unwrap();
                let (est, sol) = fit_sim2_sparse(&data, &g, sched, AdmmOptions::default()).unwrap();
                assert!(sol.converged);
                cosine_distance(est.direction.as_ref().unwrap(), &truth.as_matrix()).unwrap()
            })
            .collect(),
    )
}

#[test]
fn sim2_phase_retrieval_median_error() {
    let m = sim2_median(LinkFunction::F3);
    assert!(m < 0.1, "{m}");
}

#[test]
fn sim2_absolute_value_link_median_error() {
    let m = sim2_median(LinkFunction::F4);
    assert!(m < 0.15, "{m}");
}

#[test]
fn mim_recovers_two_dimensional_subspace() {
    let g = ScoreModel::standard_gaussian();
    let dists: Vec<f64> = (0..20u64)
        .map(|s| {
            let (b, _) = gen_sparse_subspace(30, 4, 2, derive_seed(14, &[s])).unwrap();
            let data = gen_mim_data(&g, &b, &LinkFunction::SumSquares, 1.0, 40_000, derive_seed(15, &[s])).unwrap();
            let sched = EstimatorKind::Mim2
                .schedule(MomentBound::default(), data.n(), data.shape(), PAPER, PAPER, AUTO)
                .unwrap();
            let (bhat, _) = fit_mim2(&data, &g, sched, 2, AdmmOptions::default()).unwrap();
            subspace_distance(&bhat, &b).unwrap()
        })
        .collect();
    let m = median(dists);
    assert!(m < 0.2, "{m}");
}

#[test]
fn light_tailed_spike_without_truncation_is_classical_sparse_pca() {
    let g = ScoreModel::standard_gaussian();
    let mut v = vec![0.0; 50];
    v[0] = 1.0;
    let data = gen_spiked_data(&g, &v, 5.0, 10_000, 16).unwrap();
    let sched = EstimatorKind::SpcaHeavy
        .schedule(MomentBound::default(), data.n(), data.shape(), AUTO, ParamSetting::Value(1e18), AUTO)
        .unwrap();
    let (vhat, sol) = fit_spca_heavy(&data, sched, 1, AdmmOptions::default()).unwrap();
    assert!(sol.converged);
    let dist = cosine_distance(&vhat, &DMatrix::from_column_slice(50, 1, &v)).unwrap();
    assert!(dist < 0.05, "{dist}");
}

#[test]
fn admm_matches_certified_oracle_on_small_instance() {
    let mut rng = rng_from_seed(17);
    let a = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sigma = (&a + a.transpose()) * 0.5;
    let sol = admm_fantope(&sigma, 0.3, 2, AdmmOptions::default()).unwrap();
    let oracle = common::fantope_oracle(&sigma, 0.3, 2, 1_000_000, 1e-6);
    assert!(oracle.dual - oracle.primal <= 1e-5);
    assert!((sol.objective - oracle.primal).abs() <= 1e-4, "{} vs {}", sol.objective, oracle.primal);
}
