use rand::seq::SliceRandom;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{invalid, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
    Kendall,
}

impl CorrelationMethod {
    pub const ALL: [CorrelationMethod; 3] = [Self::Pearson, Self::Spearman, Self::Kendall];
}

impl std::fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pearson => "pearson",
            Self::Spearman => "spearman",
            Self::Kendall => "kendall",
        })
    }
}

/// How the two-sided p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMode {
    /// t distribution (Pearson, Spearman) or tie-corrected normal (Kendall).
    Analytic,
    /// Shuffles of `y`; the count is the number of shuffles.
    Permutation(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub method: CorrelationMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Ranks starting at 1, ties sharing the average of their positions.
pub fn rank_average(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

fn tie_groups(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        if j > i {
            out.push((j - i + 1) as f64);
        }
        i = j + 1;
    }
    out
}

/// Kendall's tau-b and the tie-corrected z score of its numerator.
fn kendall(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            s += (dx * dy).signum() * f64::from(dx != 0.0 && dy != 0.0);
        }
    }
    let nf = n as f64;
    let n0 = nf * (nf - 1.0) / 2.0;
    let tx = tie_groups(x);
    let ty = tie_groups(y);
    let n1: f64 = tx.iter().map(|t| t * (t - 1.0) / 2.0).sum();
    let n2: f64 = ty.iter().map(|t| t * (t - 1.0) / 2.0).sum();
    let tau = (s / ((n0 - n1) * (n0 - n2)).sqrt()).clamp(-1.0, 1.0);

    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt: f64 = tx.iter().map(|t| t * (t - 1.0) * (2.0 * t + 5.0)).sum();
    let vu: f64 = ty.iter().map(|t| t * (t - 1.0) * (2.0 * t + 5.0)).sum();
    let t2: f64 = tx.iter().map(|t| t * (t - 1.0)).sum();
    let u2: f64 = ty.iter().map(|t| t * (t - 1.0)).sum();
    let t3: f64 = tx.iter().map(|t| t * (t - 1.0) * (t - 2.0)).sum();
    let u3: f64 = ty.iter().map(|t| t * (t - 1.0) * (t - 2.0)).sum();
    let var = (v0 - vt - vu) / 18.0
        + t3 * u3 / (9.0 * nf * (nf - 1.0) * (nf - 2.0))
        + t2 * u2 / (2.0 * nf * (nf - 1.0));
    (tau, s / var.sqrt())
}

fn statistic(x: &[f64], y: &[f64], method: CorrelationMethod) -> f64 {
    match method {
        CorrelationMethod::Pearson => pearson(x, y),
        CorrelationMethod::Spearman => pearson(&rank_average(x), &rank_average(y)),
        CorrelationMethod::Kendall => kendall(x, y).0,
    }
}

fn t_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return f64::MIN_POSITIVE;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Two-sided correlation test between paired samples.
pub fn correlation_test(
    x: &[f64],
    y: &[f64],
    method: CorrelationMethod,
    mode: PValueMode,
    seed: u64,
) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return invalid(format!("samples have lengths {} and {}", x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return invalid("correlation tests need at least 3 pairs");
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return invalid("samples must be finite");
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return invalid("a sample has zero variance");
    }
    let stat = statistic(x, y, method);
    let p_value = match mode {
        PValueMode::Analytic => match method {
            CorrelationMethod::Pearson | CorrelationMethod::Spearman => t_p_value(stat, n),
            CorrelationMethod::Kendall => {
                let z = kendall(x, y).1;
                let normal = Normal::new(0.0, 1.0).expect("standard normal");
                (2.0 * normal.sf(z.abs())).clamp(f64::MIN_POSITIVE, 1.0)
            }
        },
        PValueMode::Permutation(n_perm) => {
            if n_perm == 0 {
                return invalid("permutation count must be positive");
            }
            let mut rng = seeded(seed);
            let mut shuffled = y.to_vec();
            let threshold = stat.abs() * (1.0 - 1e-12);
            let mut hits = 0usize;
            for _ in 0..n_perm {
                shuffled.shuffle(&mut rng);
                if statistic(x, &shuffled, method).abs() >= threshold {
                    hits += 1;
                }
            }
            (1 + hits) as f64 / (n_perm + 1) as f64
        }
    };
    Ok(CorrelationResult { method, statistic: stat, p_value, n })
}
