use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use stein_index::robusttrunc::truncated_first_moment;
use stein_index::seed::{derive_seed, rng_from_seed};
use stein_index::simlab::{cosine_distance, gen_sim_data, gen_sparse_beta, subspace_distance, LinkFunction};
use stein_index::ScoreModel;

#[test]
fn sparse_support_is_uniform() {
    let (d, s, draws) = (2000usize, 5usize, 1000u64);
    let mut counts = vec![0u64; d];
    for t in 0..draws {
        for &j in &gen_sparse_beta(d, s, derive_seed(1, &[t])).unwrap().support {
            counts[j] += 1;
        }
    }
    let p = s as f64 / d as f64;
    let mean = draws as f64 * p;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    // per-coordinate 3-sigma band; a binomial(1000, 1/400) exceeds it with
    // probability ~0.4%, so allow a few percent of coordinates outside
    let outside = counts.iter().filter(|&&c| (c as f64 - mean).abs() > 3.0 * sd).count();
    assert!(outside <= d / 50, "{outside} coordinates outside the band");
    // aggregate goodness of fit
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2) / mean).sum();
    let pval = 1.0 - ChiSquared::new((d - 1) as f64).unwrap().cdf(chi2);
    assert!(pval > 1e-3, "chi-square {chi2}, p = {pval}");
}

fn orthonormal(d: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    let g = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q().columns(0, k).into_owned()
}

#[test]
fn procrustes_distance_matches_rotation_search() {
    for seed in 0..3u64 {
        let a = orthonormal(6, 2, derive_seed(2, &[seed]));
        let b = orthonormal(6, 2, derive_seed(3, &[seed]));
        let exact = subspace_distance(&a, &b).unwrap();
        let mut best = f64::INFINITY;
        let steps = 50_000;
        for i in 0..steps {
            let t = i as f64 / steps as f64 * std::f64::consts::TAU;
            let (c, s) = (t.cos(), t.sin());
            for o in [DMatrix::from_row_slice(2, 2, &[c, -s, s, c]), DMatrix::from_row_slice(2, 2, &[c, s, s, -c])] {
                best = best.min((&a - &b * o).norm());
            }
        }
        assert!(exact <= best + 1e-12);
        assert!((best - exact).abs() <= 1e-3, "{exact} vs {best}");
    }
}

#[test]
fn gaussian_stein_mean_points_along_beta() {
    let g = ScoreModel::standard_gaussian();
    let truth = gen_sparse_beta(20, 4, 4).unwrap();
    let data = gen_sim_data(&g, &truth, &LinkFunction::F1, 1.0, 100_000, 5).unwrap();
    let m = truncated_first_moment(&data, &g, f64::INFINITY).unwrap().value;
    let dist = cosine_distance(&m, &truth.as_matrix()).unwrap();
    assert!(dist < 0.05, "{dist}");
}
