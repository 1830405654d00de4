//! Profile-likelihood elbow selection on a scree of singular values.
//!
//! For each split `q` the leading `q` values and the remaining ones are
//! modelled as two Gaussian samples with their own means; the split with the
//! largest profile log-likelihood wins, ties going to the smaller `q`.

use std::io::Write;

use crate::error::{invalid, Result};
use crate::linalg::LN_2PI;

const VARIANCE_FLOOR: f64 = 1e-12;

/// How the two groups share variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceModel {
    /// Each group has its own variance.
    #[default]
    Separate,
    /// One pooled variance for both groups.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeResult {
    pub singular_values: Vec<f64>,
    /// Number of leading singular values retained (at least 1).
    pub chosen_q: usize,
    /// Entry `q - 1` is the profile log-likelihood of split `q`.
    pub profile_loglik: Vec<f64>,
}

impl ScreeResult {
    /// Scree CSV: `rank,singular_value,profile_loglik` (empty for the last
    /// rank, which is not a valid split).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "rank,singular_value,profile_loglik")?;
        for (i, s) in self.singular_values.iter().enumerate() {
            match self.profile_loglik.get(i) {
                Some(ll) => writeln!(out, "{},{},{}", i + 1, s, ll)?,
                None => writeln!(out, "{},{},", i + 1, s)?,
            }
        }
        Ok(())
    }
}

/// Number of singular values fed to SVT by default: `⌈n/4⌉`, at least 3
/// and at most `n`.
pub fn default_scree_count(n: usize) -> usize {
    n.div_ceil(4).max(3).min(n)
}

fn sum_sq_dev(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum()
}

fn split_loglik(values: &[f64], q: usize, model: VarianceModel) -> f64 {
    let (head, tail) = values.split_at(q);
    let (ss1, ss2) = (sum_sq_dev(head), sum_sq_dev(tail));
    let gauss = |m: f64, ss: f64, var: f64| -0.5 * m * (LN_2PI + var.ln()) - 0.5 * ss / var;
    match model {
        VarianceModel::Separate => {
            let v1 = (ss1 / head.len() as f64).max(VARIANCE_FLOOR);
            let v2 = (ss2 / tail.len() as f64).max(VARIANCE_FLOOR);
            gauss(head.len() as f64, ss1, v1) + gauss(tail.len() as f64, ss2, v2)
        }
        VarianceModel::Pooled => {
            let p = values.len() as f64;
            let v = ((ss1 + ss2) / p).max(VARIANCE_FLOOR);
            gauss(p, ss1 + ss2, v)
        }
    }
}

/// Chooses the number of leading singular values to keep. With `q_max` the
/// argmax is restricted to `q <= q_max`; the returned profile always covers
/// every split.
pub fn svt_profile_likelihood(values: &[f64], q_max: Option<usize>, model: VarianceModel) -> Result<ScreeResult> {
    if values.len() < 3 {
        return invalid(format!("profile likelihood needs at least 3 singular values, got {}", values.len()));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return invalid("singular values must be finite and non-negative");
    }
    if values.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12) + 1e-300) {
        return invalid("singular values must be in descending order");
    }
    if q_max == Some(0) {
        return invalid("q_max must be at least 1");
    }
    let p = values.len();
    let profile: Vec<f64> = (1..p).map(|q| split_loglik(values, q, model)).collect();
    let limit = q_max.unwrap_or(p - 1).min(p - 1);
    let mut chosen = 1;
    for q in 2..=limit {
        if profile[q - 1] > profile[chosen - 1] {
            chosen = q;
        }
    }
    Ok(ScreeResult { singular_values: values.to_vec(), chosen_q: chosen, profile_loglik: profile })
}
