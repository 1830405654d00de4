//! Singular value decompositions with a deterministic sign convention.

use faer::Mat;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::rng::seeded;

/// Inputs up to this size use the dense decomposition.
pub const DENSE_LIMIT: usize = 5000;

/// Thin SVD `A ≈ U diag(s) Vᵀ` with `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn truncate(mut self, r: usize) -> Self {
        let r = r.min(self.s.len());
        self.s.truncate(r);
        self.u = self.u.columns(0, r).into_owned();
        self.v = self.v.columns(0, r).into_owned();
        self
    }

    /// Flips each singular pair so the largest-magnitude entry of the left
    /// vector is positive (first such entry on ties).
    fn canonicalize_signs(mut self) -> Self {
        for k in 0..self.s.len() {
            let col = self.u.column(k);
            let mut idx = 0;
            for i in 0..col.len() {
                if col[i].abs() > col[idx].abs() {
                    idx = i;
                }
            }
            if col.len() > 0 && col[idx] < 0.0 {
                self.u.column_mut(k).neg_mut();
                self.v.column_mut(k).neg_mut();
            }
        }
        self
    }
}

/// Full thin SVD through faer.
pub fn dense_svd(a: &DMatrix<f64>) -> Result<Svd> {
    let (n, m) = a.shape();
    if n == 0 || m == 0 {
        return invalid("cannot decompose an empty matrix");
    }
    if a.iter().any(|v| !v.is_finite()) {
        return invalid("matrix contains non-finite entries");
    }
    let fa = Mat::<f64>::from_fn(n, m, |i, j| a[(i, j)]);
    let svd = fa.thin_svd().map_err(|e| Error::Numeric(format!("SVD did not converge: {e:?}")))?;
    let r = n.min(m);
    let s_diag = svd.S().column_vector();
    let mut order: Vec<usize> = (0..r).collect();
    let s_raw: Vec<f64> = (0..r).map(|k| s_diag[k]).collect();
    order.sort_by(|&x, &y| s_raw[y].total_cmp(&s_raw[x]).then(x.cmp(&y)));
    let fu = svd.U();
    let fv = svd.V();
    let u = DMatrix::from_fn(n, r, |i, k| fu[(i, order[k])]);
    let v = DMatrix::from_fn(m, r, |i, k| fv[(i, order[k])]);
    let s = order.iter().map(|&k| s_raw[k].max(0.0)).collect();
    Ok(Svd { u, s, v }.canonicalize_signs())
}

fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Randomized range-finder SVD of rank `rank` with `oversample` extra
/// columns and `power_iters` subspace iterations.
pub fn randomized_svd(a: &DMatrix<f64>, rank: usize, seed: u64, oversample: usize, power_iters: usize) -> Result<Svd> {
    let (n, m) = a.shape();
    if rank == 0 || rank > n.min(m) {
        return invalid(format!("rank {rank} out of range for a {n}x{m} matrix"));
    }
    let l = (rank + oversample).min(n.min(m));
    let mut rng = seeded(seed);
    let omega = DMatrix::from_fn(m, l, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = orthonormalize(a * omega);
    for _ in 0..power_iters {
        let z = orthonormalize(a.transpose() * &q);
        q = orthonormalize(a * z);
    }
    let b = q.transpose() * a;
    let small = b.svd(true, true);
    let ub = small.u.ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let vt = small.v_t.ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..small.singular_values.len()).collect();
    let sv = &small.singular_values;
    order.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]).then(x.cmp(&y)));
    order.truncate(rank);
    let u_full = q * ub;
    let u = DMatrix::from_fn(n, rank, |i, k| u_full[(i, order[k])]);
    let v = DMatrix::from_fn(m, rank, |i, k| vt[(order[k], i)]);
    let s = order.iter().map(|&k| sv[k]).collect();
    Ok(Svd { u, s, v }.canonicalize_signs())
}

/// Top-`rank` SVD: dense for inputs up to [`DENSE_LIMIT`], randomized
/// (seed 0, oversampling 10, two power iterations) beyond.
pub fn truncated_svd(a: &DMatrix<f64>, rank: usize) -> Result<Svd> {
    if a.nrows().max(a.ncols()) <= DENSE_LIMIT {
        Ok(dense_svd(a)?.truncate(rank))
    } else {
        randomized_svd(a, rank, 0, 10, 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_matrix() {
        let a = DMatrix::from_element(4, 4, 1.0);
        let svd = dense_svd(&a).unwrap();
        assert!((svd.s[0] - 4.0).abs() < 1e-12);
        assert!(svd.s[1..].iter().all(|&s| s.abs() < 1e-12));
        for i in 0..4 {
            assert!((svd.u[(i, 0)] - 0.5).abs() < 1e-12);
            assert!((svd.v[(i, 0)] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_and_order() {
        let mut rng = seeded(1);
        let a = DMatrix::from_fn(30, 30, |_, _| rng.gen::<f64>());
        let svd = dense_svd(&a).unwrap();
        for w in svd.s.windows(2) {
            assert!(w[0] >= w[1]);
        }
        let rebuilt = &svd.u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(svd.s.clone())) * svd.v.transpose();
        assert!((rebuilt - a).norm() < 1e-10);
    }

    #[test]
    fn randomized_matches_dense_on_low_rank_plus_noise() {
        let mut rng = seeded(2);
        let n = 1000;
        let b = [[0.8, 0.1, 0.1], [0.1, 0.5, 0.1], [0.1, 0.1, 0.3]];
        let a = DMatrix::from_fn(n, n, |i, j| {
            let (bi, bj) = (i * 3 / n, j * 3 / n);
            if rng.gen::<f64>() < b[bi][bj] {
                1.0
            } else {
                0.0
            }
        });
        let dense = dense_svd(&a).unwrap().truncate(3);
        let rand = randomized_svd(&a, 3, 0, 10, 2).unwrap();
        for k in 0..3 {
            assert!((dense.s[k] - rand.s[k]).abs() / dense.s[k] < 1e-2, "{k}: {} vs {}", dense.s[k], rand.s[k]);
        }
        let proj_d = &dense.u * dense.u.transpose();
        let proj_r = &rand.u * rand.u.transpose();
        assert!((proj_d - proj_r).norm() < 0.1);
    }
}
