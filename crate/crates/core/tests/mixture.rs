use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use semipar::eval::partition_metrics;
use semipar::mixture::{gmm_em, hard_labels, kmeans, select_k, CovFamily, GmmConfig, GmmInit};
use semipar::rng::seeded;

fn blobs(centres: &[[f64; 2]], per: usize, sd: f64, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
    let mut rng = seeded(seed);
    let n = centres.len() * per;
    let labels: Vec<usize> = (0..n).map(|i| i / per).collect();
    let x = DMatrix::from_fn(n, 2, |i, c| centres[labels[i]][c] + sd * rng.sample::<f64, _>(StandardNormal));
    (x, labels)
}

#[test]
fn far_apart_clusters_are_recovered_exactly() {
    let (x, truth) = blobs(&[[0.0, 0.0], [20.0, 0.0]], 100, 1.0, 3);
    for family in [CovFamily::Full, CovFamily::Spherical] {
        let fit = gmm_em(&x, 2, family, GmmInit::KMeansPlusPlus, 0, &GmmConfig::default()).unwrap();
        let ari = partition_metrics(hard_labels(&fit).labels(), &truth).unwrap().ari;
        assert!((ari - 1.0).abs() < 1e-12, "{family:?}: {ari}");
    }
    let km = kmeans(&x, 2, 0, 5).unwrap();
    assert!((partition_metrics(km.partition.labels(), &truth).unwrap().ari - 1.0).abs() < 1e-12);
}

#[test]
fn em_log_likelihood_never_decreases() {
    let (x, _) = blobs(&[[0.0, 0.0], [2.0, 1.0], [1.0, 3.0]], 80, 1.0, 5);
    for seed in 0..4 {
        for init in [GmmInit::KMeansPlusPlus, GmmInit::Random] {
            let fit = gmm_em(&x, 3, CovFamily::Full, init, seed, &GmmConfig::default()).unwrap();
            for w in fit.loglik_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8 * w[0].abs(), "{} then {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn kmeans_objective_never_increases() {
    let (x, _) = blobs(&[[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]], 50, 1.0, 8);
    let fit = kmeans(&x, 3, 2, 1).unwrap();
    for w in fit.wcss_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-9);
    }
}

#[test]
fn bic_selects_three_separated_clusters() {
    let (x, truth) = blobs(&[[0.0, 0.0], [10.0, 0.0], [5.0, 9.0]], 100, 1.0, 13);
    let ks: Vec<usize> = (1..=6).collect();
    let (fit, table) =
        select_k(&x, &ks, &[CovFamily::Full, CovFamily::Spherical], 0, 3, &GmmConfig::default()).unwrap();
    assert_eq!(fit.k(), 3);
    assert_eq!(table.len(), 12);
    assert!((partition_metrics(hard_labels(&fit).labels(), &truth).unwrap().ari - 1.0).abs() < 1e-12);
}

#[test]
fn fit_is_invariant_to_row_order() {
    let (x, _) = blobs(&[[0.0, 0.0], [6.0, 0.0]], 60, 1.0, 21);
    let n = x.nrows();
    let rev = DMatrix::from_fn(n, 2, |i, c| x[(n - 1 - i, c)]);
    let a = gmm_em(&x, 2, CovFamily::Full, GmmInit::KMeansPlusPlus, 0, &GmmConfig::default()).unwrap();
    let b = gmm_em(&rev, 2, CovFamily::Full, GmmInit::KMeansPlusPlus, 0, &GmmConfig::default()).unwrap();
    assert!((a.means - b.means).abs().max() < 1e-6);
    assert!((a.loglik - b.loglik).abs() < 1e-6 * a.loglik.abs());
}
