//! Constrained semiparametric Gaussian mixtures whose component means lie on
//! a Bézier curve.
//!
//! A curve of degree `q` in `R^p` is given by `q + 1` control points. The
//! mixture places `K` isotropic Gaussian components at the equally spaced
//! parameters `t_j = j / (K - 1)`, with mean `μ(t_j)` and variance
//! `(1 - t_j) σ1² + t_j σ2²`. Only the grid weights `π` are free per node.

mod em;
mod lrt;
mod project;
mod semipar;

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{log_sum_exp, LN_2PI};

pub use em::{
    fit_curve, initial_curve, lsm_em, mstep_curve, mstep_curve_from, select_curve_k, CurveFit, CurveFitConfig,
    CurveKRow, MStep,
};
pub use lrt::{curve_degree_lrt, LrtConfig, LrtResult};
pub use project::{project_all, project_to_curve, CurveProjection};
pub use semipar::{assemble_semipar, AtomDesignation, AtomJson, SemiparAtom, SemiparJson, SemiparModel};

/// Bernstein basis of the given degree evaluated at `t`.
pub fn bernstein(degree: usize, t: f64) -> Vec<f64> {
    let mut b = vec![0.0; degree + 1];
    b[0] = 1.0;
    // Build row by row: B_{i,n} = (1-t) B_{i,n-1} + t B_{i-1,n-1}.
    for n in 1..=degree {
        for i in (0..=n).rev() {
            let left = if i > 0 { b[i - 1] } else { 0.0 };
            b[i] = (1.0 - t) * b[i] + t * left;
        }
    }
    b
}

/// Equally spaced grid `0, 1/(K-1), ..., 1`.
pub fn grid_nodes(k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.0];
    }
    (0..k).map(|j| j as f64 / (k - 1) as f64).collect()
}

/// `K × (degree+1)` matrix of Bernstein weights at the grid nodes.
pub fn bernstein_design(k: usize, degree: usize) -> DMatrix<f64> {
    let nodes = grid_nodes(k);
    DMatrix::from_fn(k, degree + 1, |j, c| bernstein(degree, nodes[j])[c])
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveParams {
    /// `(degree + 1) × p`; row `c` is control point `c`.
    pub control_points: DMatrix<f64>,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    /// Grid weights; `K = pi.len()`.
    pub pi: Vec<f64>,
}

impl CurveParams {
    pub fn new(control_points: DMatrix<f64>, sigma1_sq: f64, sigma2_sq: f64, pi: Vec<f64>) -> Result<Self> {
        let c = Self { control_points, sigma1_sq, sigma2_sq, pi };
        c.validate()?;
        Ok(c)
    }

    /// Uniform grid weights over `k` nodes.
    pub fn uniform(control_points: DMatrix<f64>, sigma1_sq: f64, sigma2_sq: f64, k: usize) -> Result<Self> {
        Self::new(control_points, sigma1_sq, sigma2_sq, vec![1.0 / k as f64; k])
    }

    pub fn validate(&self) -> Result<()> {
        let degree = self.degree();
        if !(1..=3).contains(&degree) {
            return invalid(format!("curve degree must be 1, 2 or 3; got {degree}"));
        }
        if self.dim() == 0 {
            return invalid("curve control points have zero dimension");
        }
        if self.control_points.iter().any(|v| !v.is_finite()) {
            return invalid("curve control points must be finite");
        }
        for (name, v) in [("sigma1_sq", self.sigma1_sq), ("sigma2_sq", self.sigma2_sq)] {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if self.pi.len() < 2 {
            return invalid(format!("grid needs at least 2 nodes, got {}", self.pi.len()));
        }
        if self.pi.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return invalid("grid weights must be non-negative");
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("grid weights sum to {total}, expected 1"));
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.control_points.nrows().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.control_points.ncols()
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    pub fn mean_at(&self, t: f64) -> DVector<f64> {
        let b = bernstein(self.degree(), t);
        let row = RowDVector::from_vec(b) * &self.control_points;
        row.transpose()
    }

    pub fn variance_at(&self, t: f64) -> f64 {
        (1.0 - t) * self.sigma1_sq + t * self.sigma2_sq
    }

    pub fn nodes(&self) -> Vec<f64> {
        grid_nodes(self.k())
    }

    /// `K × p` matrix of component means.
    pub fn node_means(&self) -> DMatrix<f64> {
        bernstein_design(self.k(), self.degree()) * &self.control_points
    }

    pub fn node_variances(&self) -> Vec<f64> {
        self.nodes().iter().map(|&t| self.variance_at(t)).collect()
    }

    /// The same curve expressed with one more control point.
    pub fn elevate(&self) -> Self {
        let q = self.degree();
        let p = self.dim();
        let cp = &self.control_points;
        let mut out = DMatrix::zeros(q + 2, p);
        out.set_row(0, &cp.row(0));
        out.set_row(q + 1, &cp.row(q));
        for i in 1..=q {
            let a = i as f64 / (q + 1) as f64;
            let row = cp.row(i - 1) * a + cp.row(i) * (1.0 - a);
            out.set_row(i, &row);
        }
        Self { control_points: out, ..self.clone() }
    }

    /// Per-point mixture log-density `log Σ_j π_j φ(x; μ_j, s_j I)`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let means = self.node_means();
        let vars = self.node_variances();
        let p = self.dim() as f64;
        let terms: Vec<f64> = (0..self.k())
            .map(|j| {
                let d2: f64 = means.row(j).iter().zip(x).map(|(m, v)| (v - m) * (v - m)).sum();
                self.pi[j].ln() - 0.5 * p * (LN_2PI + vars[j].ln()) - 0.5 * d2 / vars[j]
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Draws `n` points from the grid mixture; returns the points and the
    /// node index of each draw.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (DMatrix<f64>, Vec<usize>) {
        let means = self.node_means();
        let vars = self.node_variances();
        let p = self.dim();
        let mut x = DMatrix::zeros(n, p);
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let j = draw_index(&self.pi, rng);
            let sd = vars[j].sqrt();
            for c in 0..p {
                x[(i, c)] = means[(j, c)] + sd * rng.sample::<f64, _>(StandardNormal);
            }
            nodes.push(j);
        }
        (x, nodes)
    }

    pub fn to_json(&self, loglik: Option<f64>) -> CurveJson {
        CurveJson {
            degree: self.degree(),
            control_points: self.control_points.row_iter().map(|r| r.iter().copied().collect()).collect(),
            sigma1_sq: self.sigma1_sq,
            sigma2_sq: self.sigma2_sq,
            k: self.k(),
            pi: self.pi.clone(),
            loglik,
        }
    }
}

pub(crate) fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// On-disk form `{degree, control_points, sigma1_sq, sigma2_sq, K, pi, loglik}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveJson {
    pub degree: usize,
    pub control_points: Vec<Vec<f64>>,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub pi: Vec<f64>,
    pub loglik: Option<f64>,
}

impl CurveJson {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn into_params(self) -> Result<CurveParams> {
        if self.control_points.len() != self.degree + 1 {
            return invalid(format!(
                "degree {} needs {} control points, found {}",
                self.degree,
                self.degree + 1,
                self.control_points.len()
            ));
        }
        if self.pi.len() != self.k {
            return invalid(format!("K = {} but pi has {} entries", self.k, self.pi.len()));
        }
        let p = self.control_points.first().map_or(0, Vec::len);
        if self.control_points.iter().any(|r| r.len() != p) {
            return invalid("control points have inconsistent dimensions");
        }
        let flat: Vec<f64> = self.control_points.into_iter().flatten().collect();
        let cp = DMatrix::from_row_slice(self.degree + 1, p, &flat);
        CurveParams::new(cp, self.sigma1_sq, self.sigma2_sq, self.pi)
    }
}
