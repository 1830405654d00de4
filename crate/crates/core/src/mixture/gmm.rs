use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::kmeans::kmeanspp_indices;
use super::Partition;
use crate::error::{invalid, Error, Result};
use crate::linalg::{covariance, log_sum_exp, LN_2PI};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovFamily {
    /// Unconstrained ellipsoids: varying volume, shape and orientation.
    Full,
    /// `σ_k² I` per component.
    Spherical,
}

impl CovFamily {
    /// Free parameters of a `k`-component mixture in `R^p`.
    pub fn free_parameters(self, k: usize, p: usize) -> usize {
        let cov = match self {
            CovFamily::Full => k * p * (p + 1) / 2,
            CovFamily::Spherical => k,
        };
        (k - 1) + k * p + cov
    }
}

impl fmt::Display for CovFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovFamily::Full => "full",
            CovFamily::Spherical => "spherical",
        })
    }
}

impl std::str::FromStr for CovFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(CovFamily::Full),
            "spherical" => Ok(CovFamily::Spherical),
            other => Err(format!("unknown covariance family `{other}` (expected full or spherical)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GmmInit {
    KMeansPlusPlus,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmConfig {
    pub max_iter: usize,
    /// Relative log-likelihood tolerance.
    pub tol: f64,
    /// Eigenvalue floor as a fraction of the data's mean per-coordinate
    /// variance.
    pub floor_scale: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-8, floor_scale: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub weights: Vec<f64>,
    /// `K × p`.
    pub means: DMatrix<f64>,
    pub covariances: Vec<DMatrix<f64>>,
    /// `n × K`, rows sum to one.
    pub responsibilities: DMatrix<f64>,
    pub loglik: f64,
    /// `2·loglik − params·ln n`; larger is better.
    pub bic: f64,
    pub cov_family: CovFamily,
    pub converged: bool,
    pub iterations: usize,
    pub loglik_trace: Vec<f64>,
    /// Covariance eigenvalue floor used for this fit.
    pub floor: f64,
}

impl GmmFit {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }
}

/// Label of the most responsible component per row; ties go to the smallest
/// component index.
pub fn hard_labels(fit: &GmmFit) -> Partition {
    Partition(argmax_rows(&fit.responsibilities))
}

pub(crate) fn argmax_rows(r: &DMatrix<f64>) -> Vec<usize> {
    r.row_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Precomputed Gaussian log-density pieces for one component.
struct Component {
    mean: DVector<f64>,
    inv_chol: DMatrix<f64>,
    log_norm: f64,
}

impl Component {
    fn new(index: usize, mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numeric(format!("covariance of component {index} is singular")))?;
        let l = chol.l();
        let logdet = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !logdet.is_finite() {
            return Err(Error::Numeric(format!("covariance of component {index} is singular")));
        }
        let inv_chol = l
            .solve_lower_triangular(&DMatrix::identity(p, p))
            .ok_or_else(|| Error::Numeric(format!("covariance of component {index} is singular")))?;
        Ok(Self { mean, inv_chol, log_norm: -0.5 * (p as f64 * LN_2PI + logdet) })
    }

    fn log_pdf(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let p = x.len();
        for (c, s) in scratch.iter_mut().enumerate() {
            *s = x[c] - self.mean[c];
        }
        let mut maha = 0.0;
        for r in 0..p {
            let mut acc = 0.0;
            for c in 0..=r {
                acc += self.inv_chol[(r, c)] * scratch[c];
            }
            maha += acc * acc;
        }
        self.log_norm - 0.5 * maha
    }
}

fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

struct Params {
    weights: Vec<f64>,
    means: DMatrix<f64>,
    covs: Vec<DMatrix<f64>>,
}

fn estep(data: &[Vec<f64>], params: &Params, resp: &mut DMatrix<f64>) -> Result<f64> {
    let k = params.weights.len();
    let p = params.means.ncols();
    let comps = (0..k)
        .map(|j| Component::new(j, params.means.row(j).transpose(), &params.covs[j]))
        .collect::<Result<Vec<_>>>()?;
    let log_w: Vec<f64> = params.weights.iter().map(|w| w.ln()).collect();
    let mut terms = vec![0.0; k];
    let mut scratch = vec![0.0; p];
    let mut loglik = 0.0;
    for (i, x) in data.iter().enumerate() {
        for j in 0..k {
            terms[j] = log_w[j] + comps[j].log_pdf(x, &mut scratch);
        }
        let lse = log_sum_exp(&terms);
        loglik += lse;
        for j in 0..k {
            resp[(i, j)] = (terms[j] - lse).exp();
        }
    }
    Ok(loglik)
}

/// Maximizes the expected complete log-likelihood subject to every
/// covariance eigenvalue being at least `floor`.
fn mstep(
    data: &[Vec<f64>],
    resp: &DMatrix<f64>,
    family: CovFamily,
    floor: f64,
    previous: &Params,
) -> Params {
    let n = data.len();
    let k = resp.ncols();
    let p = data[0].len();
    let mut weights = vec![0.0; k];
    let mut means = DMatrix::zeros(k, p);
    let mut covs = Vec::with_capacity(k);
    for j in 0..k {
        let nk: f64 = resp.column(j).sum();
        weights[j] = nk / n as f64;
        if nk <= 1e-12 * n as f64 {
            // An emptied component keeps its last location.
            means.set_row(j, &previous.means.row(j));
            covs.push(previous.covs[j].clone());
            continue;
        }
        let mut mean = vec![0.0; p];
        for (i, x) in data.iter().enumerate() {
            let w = resp[(i, j)];
            for c in 0..p {
                mean[c] += w * x[c];
            }
        }
        mean.iter_mut().for_each(|m| *m /= nk);
        let mut scatter = DMatrix::zeros(p, p);
        let mut d = vec![0.0; p];
        for (i, x) in data.iter().enumerate() {
            let w = resp[(i, j)];
            if w == 0.0 {
                continue;
            }
            for c in 0..p {
                d[c] = x[c] - mean[c];
            }
            for r in 0..p {
                for c in 0..=r {
                    scatter[(r, c)] += w * d[r] * d[c];
                }
            }
        }
        for r in 0..p {
            for c in 0..r {
                scatter[(c, r)] = scatter[(r, c)];
            }
        }
        scatter /= nk;
        let cov = match family {
            CovFamily::Spherical => DMatrix::identity(p, p) * (scatter.trace() / p as f64).max(floor),
            CovFamily::Full => clip_eigenvalues(scatter, floor),
        };
        means.set_row(j, &DVector::from_vec(mean).transpose());
        covs.push(cov);
    }
    Params { weights, means, covs }
}

fn clip_eigenvalues(s: DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = s.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&v| v >= floor) {
        return s;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(floor));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// Fits a `k`-component Gaussian mixture by EM.
///
/// Initialization picks `k` centres (k-means++ or uniformly at random) and
/// starts from the hard assignment to them. Iteration stops when the
/// relative log-likelihood change drops below `cfg.tol` or after
/// `cfg.max_iter` iterations. Components are returned sorted
/// lexicographically by mean so the output does not depend on row order.
pub fn gmm_em(
    x: &DMatrix<f64>,
    k: usize,
    family: CovFamily,
    init: GmmInit,
    seed: u64,
    cfg: &GmmConfig,
) -> Result<GmmFit> {
    let (n, p) = x.shape();
    if k == 0 {
        return invalid("number of components must be at least 1");
    }
    if k >= n {
        return invalid(format!("need more points ({n}) than components ({k})"));
    }
    if p == 0 {
        return invalid("data have zero columns");
    }
    if !(cfg.tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {}", cfg.tol));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("data contain non-finite values");
    }
    let data = rows(x);
    let global = covariance(x);
    let floor = (cfg.floor_scale * global.trace() / p as f64).max(1e-12);
    let fallback = clip_eigenvalues(global, floor);

    let mut rng = seeded(seed);
    let centres: Vec<usize> = match init {
        GmmInit::KMeansPlusPlus => kmeanspp_indices(&data, k, &mut rng),
        GmmInit::Random => sample(&mut rng, n, k).into_vec(),
    };
    let mut resp = DMatrix::zeros(n, k);
    for (i, xi) in data.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, &c) in centres.iter().enumerate() {
            let d = crate::linalg::squared_distance(xi, &data[c]);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        resp[(i, best)] = 1.0;
    }

    // Components that win no point (possible with tied rows) start at
    // their seed row instead of the origin.
    let seeds = Params {
        weights: vec![1.0 / k as f64; k],
        means: DMatrix::from_fn(k, p, |j, c| data[centres[j]][c]),
        covs: vec![fallback.clone(); k],
    };
    let mut params = mstep(&data, &resp, family, floor, &seeds);
    let mut loglik = estep(&data, &params, &mut resp)?;
    let mut trace = vec![loglik];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        iterations += 1;
        let next_params = mstep(&data, &resp, family, floor, &params);
        let mut next_resp = resp.clone();
        let next = estep(&data, &next_params, &mut next_resp)?;
        trace.push(next);
        let change = (next - loglik).abs();
        let scale = loglik.abs().max(1.0);
        params = next_params;
        resp = next_resp;
        loglik = next;
        if change <= cfg.tol * scale {
            converged = true;
            break;
        }
    }

    // Canonical component order.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        params
            .means
            .row(a)
            .iter()
            .zip(params.means.row(b).iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let weights = order.iter().map(|&j| params.weights[j]).collect();
    let means = DMatrix::from_fn(k, p, |r, c| params.means[(order[r], c)]);
    let covariances = order.iter().map(|&j| params.covs[j].clone()).collect();
    let responsibilities = DMatrix::from_fn(n, k, |i, c| resp[(i, order[c])]);
    let bic = 2.0 * loglik - family.free_parameters(k, p) as f64 * (n as f64).ln();

    Ok(GmmFit {
        weights,
        means,
        covariances,
        responsibilities,
        loglik,
        bic,
        cov_family: family,
        converged,
        iterations,
        loglik_trace: trace,
        floor,
    })
}
