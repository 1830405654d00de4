//! The assembled semiparametric mixture: Gaussian atoms plus one curve.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{draw_index, CurveJson, CurveParams};
use crate::error::{invalid, Error, Result};
use crate::linalg::{log_sum_exp, psd_factor, sample_gaussian, LN_2PI};
use crate::mixture::GmmFit;

#[derive(Debug, Clone, PartialEq)]
pub struct SemiparAtom {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiparModel {
    pub atoms: Vec<SemiparAtom>,
    pub curve_weight: f64,
    pub curve: CurveParams,
    /// Half-dimension: points are `[out (d) | in (d)]`.
    pub d: usize,
}

/// Which mixture component becomes an atom, and how many vertices it stands
/// for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AtomDesignation {
    pub component: usize,
    pub count: usize,
}

/// Builds the atoms-plus-curve model from a Gaussian mixture fit. Weights are
/// proportional to the supplied counts.
pub fn assemble_semipar(
    fit: &GmmFit,
    atoms: &[AtomDesignation],
    curve: CurveParams,
    curve_count: usize,
) -> Result<SemiparModel> {
    let p = fit.means.ncols();
    if curve.dim() != p {
        return invalid(format!("curve lives in R^{} but the mixture in R^{p}", curve.dim()));
    }
    if p % 2 != 0 {
        return invalid(format!("embedding dimension {p} is not even"));
    }
    let mut seen = vec![false; fit.k()];
    for a in atoms {
        if a.component >= fit.k() {
            return invalid(format!("component {} out of range for a {}-component fit", a.component, fit.k()));
        }
        if std::mem::replace(&mut seen[a.component], true) {
            return invalid(format!("component {} designated twice", a.component));
        }
    }
    let total = atoms.iter().map(|a| a.count).sum::<usize>() + curve_count;
    if total == 0 {
        return invalid("atom and curve counts are all zero");
    }
    let atoms = atoms
        .iter()
        .map(|a| SemiparAtom {
            weight: a.count as f64 / total as f64,
            mean: fit.means.row(a.component).transpose(),
            cov: fit.covariances[a.component].clone(),
        })
        .collect();
    let model = SemiparModel { atoms, curve_weight: curve_count as f64 / total as f64, curve, d: p / 2 };
    model.validate()?;
    Ok(model)
}

impl SemiparModel {
    pub fn validate(&self) -> Result<()> {
        self.curve.validate()?;
        let p = 2 * self.d;
        if self.curve.dim() != p {
            return invalid(format!("curve dimension {} does not equal 2d = {p}", self.curve.dim()));
        }
        let mut total = self.curve_weight;
        for (i, a) in self.atoms.iter().enumerate() {
            if a.mean.len() != p || a.cov.shape() != (p, p) {
                return invalid(format!("atom {i} has the wrong dimension"));
            }
            if !(a.weight >= 0.0) {
                return invalid(format!("atom {i} has negative weight"));
            }
            total += a.weight;
        }
        if !(self.curve_weight >= 0.0) || (total - 1.0).abs() > 1e-9 {
            return invalid(format!("atom and curve weights sum to {total}, expected 1"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.d
    }

    /// Mixture density at `x`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let p = self.dim();
        if x.len() != p {
            return invalid(format!("point has dimension {}, expected {p}", x.len()));
        }
        let xv = DVector::from_column_slice(x);
        let mut terms = Vec::with_capacity(self.atoms.len() + 1);
        for (i, a) in self.atoms.iter().enumerate() {
            if a.weight == 0.0 {
                continue;
            }
            let chol = a
                .cov
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Numeric(format!("atom {i} covariance is not positive definite")))?;
            let diff = &xv - &a.mean;
            let sol = chol.l().solve_lower_triangular(&diff).expect("triangular factor is invertible");
            let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            terms.push(a.weight.ln() - 0.5 * (p as f64 * LN_2PI + logdet + sol.norm_squared()));
        }
        if self.curve_weight > 0.0 {
            terms.push(self.curve_weight.ln() + self.curve.log_density(x));
        }
        Ok(log_sum_exp(&terms))
    }

    /// Draws `n` points from the model. Labels are atom indices, with the
    /// curve labelled `atoms.len()`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (DMatrix<f64>, Vec<usize>) {
        let p = self.dim();
        let factors: Vec<DMatrix<f64>> = self.atoms.iter().map(|a| psd_factor(&a.cov)).collect();
        let mut weights: Vec<f64> = self.atoms.iter().map(|a| a.weight).collect();
        weights.push(self.curve_weight);
        let mut x = DMatrix::zeros(n, p);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = draw_index(&weights, rng);
            let row = if c < self.atoms.len() {
                sample_gaussian(&self.atoms[c].mean, &factors[c], rng)
            } else {
                let (pt, _) = self.curve.sample(1, rng);
                pt.row(0).transpose()
            };
            x.set_row(i, &row.transpose());
            labels.push(c);
        }
        (x, labels)
    }

    pub fn to_json(&self) -> SemiparJson {
        SemiparJson {
            d: self.d,
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomJson {
                    weight: a.weight,
                    mean: a.mean.iter().copied().collect(),
                    cov: a.cov.row_iter().map(|r| r.iter().copied().collect()).collect(),
                })
                .collect(),
            curve_weight: self.curve_weight,
            curve: self.curve.to_json(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomJson {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

/// On-disk form of [`SemiparModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiparJson {
    pub d: usize,
    pub atoms: Vec<AtomJson>,
    pub curve_weight: f64,
    pub curve: CurveJson,
}

impl SemiparJson {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_model(self) -> Result<SemiparModel> {
        let p = 2 * self.d;
        let mut atoms = Vec::with_capacity(self.atoms.len());
        for (i, a) in self.atoms.into_iter().enumerate() {
            if a.mean.len() != p || a.cov.len() != p || a.cov.iter().any(|r| r.len() != p) {
                return invalid(format!("atom {i} does not have dimension {p}"));
            }
            let flat: Vec<f64> = a.cov.into_iter().flatten().collect();
            atoms.push(SemiparAtom {
                weight: a.weight,
                mean: DVector::from_vec(a.mean),
                cov: DMatrix::from_row_slice(p, p, &flat),
            });
        }
        let model = SemiparModel { atoms, curve_weight: self.curve_weight, curve: self.curve.into_params()?, d: self.d };
        model.validate()?;
        Ok(model)
    }
}
