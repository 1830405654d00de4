//! Small dense helpers shared by the mixture and curve code.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows().max(1) as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n))
}

/// Maximum-likelihood (divide by n) covariance of the rows of `x`.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mean = column_means(x);
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let n = x.nrows().max(1) as f64;
    (centered.transpose() * centered) / n
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetric square-root factor `L` with `L Lᵀ = cov`. Negative eigenvalues
/// from round-off are treated as zero, so singular (point-mass) covariances
/// are allowed.
pub fn psd_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = cov.clone().symmetric_eigen();
    let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
}

pub fn sample_gaussian<R: Rng + ?Sized>(mean: &DVector<f64>, factor: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    mean + factor * z
}

/// Orthogonal `W` minimizing `‖source W − target‖_F`.
pub fn procrustes(source: &DMatrix<f64>, target: &DMatrix<f64>) -> DMatrix<f64> {
    let m = source.transpose() * target;
    let svd = m.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v requested");
    u * v_t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive() {
        let v = [0.1, -2.0, 3.5];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 2]), f64::NEG_INFINITY);
    }

    #[test]
    fn psd_factor_reproduces_covariance() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let l = psd_factor(&c);
        assert!((&l * l.transpose() - &c).norm() < 1e-12);
        let zero = DMatrix::zeros(3, 3);
        assert_eq!(psd_factor(&zero).norm(), 0.0);
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 2.0, -1.0, 0.5, 0.3, -0.7]);
        let (s, c) = 0.3f64.sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let w = procrustes(&x, &(&x * &r));
        assert!((w - r).norm() < 1e-12);
    }
}
