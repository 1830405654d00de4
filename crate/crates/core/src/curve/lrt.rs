//! Parametric-bootstrap likelihood-ratio test between curve degrees.

use nalgebra::DMatrix;

use super::em::{fit_curve, CurveFit, CurveFitConfig};
use super::CurveParams;
use crate::error::{invalid, Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone)]
pub struct LrtConfig {
    /// Shared EM settings; `degree` is overridden per model.
    pub fit: CurveFitConfig,
    pub n_boot: usize,
    /// Random restarts for each bootstrap refit (warm starts are always
    /// added on top).
    pub boot_restarts: usize,
    /// Minimum fraction of bootstrap replicates that must fit successfully.
    pub min_success: f64,
}

impl Default for LrtConfig {
    fn default() -> Self {
        Self { fit: CurveFitConfig::default(), n_boot: 99, boot_restarts: 3, min_success: 0.8 }
    }
}

#[derive(Debug, Clone)]
pub struct LrtResult {
    pub statistic: f64,
    pub p_value: f64,
    pub null_fit: CurveFit,
    pub alt_fit: CurveFit,
    pub boot_statistics: Vec<f64>,
    pub boot_failures: usize,
}

/// Raises `curve` to `degree` by repeated degree elevation.
fn elevate_to(curve: &CurveParams, degree: usize) -> CurveParams {
    let mut c = curve.clone();
    while c.degree() < degree {
        c = c.elevate();
    }
    c
}

fn fit_pair(
    x: &DMatrix<f64>,
    cfg: &CurveFitConfig,
    null_degree: usize,
    alt_degree: usize,
    seed: u64,
    null_warm: &[CurveParams],
) -> Result<(CurveFit, CurveFit)> {
    let null_cfg = CurveFitConfig { degree: null_degree, ..cfg.clone() };
    let null = fit_curve(x, &null_cfg, seed, null_warm)?;
    // The elevated null fit is a valid starting point for the alternative,
    // so the alternative's likelihood can never fall below the null's.
    let alt_cfg = CurveFitConfig { degree: alt_degree, ..cfg.clone() };
    let warm = [elevate_to(&null.params, alt_degree)];
    let alt = fit_curve(x, &alt_cfg, seed, &warm)?;
    Ok((null, alt))
}

/// Tests `null_degree` against `alt_degree` with statistic
/// `2 (loglik_alt − loglik_null)` and bootstrap p-value
/// `(1 + #{boot ≥ observed}) / (n_boot + 1)` computed over the successful
/// replicates.
pub fn curve_degree_lrt(
    x: &DMatrix<f64>,
    null_degree: usize,
    alt_degree: usize,
    cfg: &LrtConfig,
    seed: u64,
) -> Result<LrtResult> {
    if null_degree >= alt_degree {
        return invalid(format!("null degree {null_degree} must be below alternative degree {alt_degree}"));
    }
    if cfg.n_boot < 99 {
        return invalid(format!("n_boot must be at least 99, got {}", cfg.n_boot));
    }
    let (null_fit, alt_fit) = fit_pair(x, &cfg.fit, null_degree, alt_degree, seed, &[])?;
    let statistic = 2.0 * (alt_fit.loglik - null_fit.loglik);
    if statistic < -1e-6 * null_fit.loglik.abs().max(1.0) {
        return Err(Error::Numeric(format!(
            "likelihood-ratio statistic {statistic} is negative: the alternative fit did not reach the null optimum"
        )));
    }
    let statistic = statistic.max(0.0);

    let n = x.nrows();
    let boot_cfg = CurveFitConfig { restarts: cfg.boot_restarts, ..cfg.fit.clone() };
    let mut boot = Vec::with_capacity(cfg.n_boot);
    let mut failures = 0;
    for b in 0..cfg.n_boot {
        let replicate_seed = seed.wrapping_add(1_000_003).wrapping_mul(31).wrapping_add(b as u64);
        let mut rng = seeded(replicate_seed);
        let (xb, _) = null_fit.params.sample(n, &mut rng);
        match fit_pair(&xb, &boot_cfg, null_degree, alt_degree, replicate_seed, &[null_fit.params.clone()]) {
            Ok((nb, ab)) => boot.push((2.0 * (ab.loglik - nb.loglik)).max(0.0)),
            Err(_) => failures += 1,
        }
    }
    let success = boot.len() as f64 / cfg.n_boot as f64;
    if success < cfg.min_success {
        return Err(Error::Numeric(format!(
            "only {} of {} bootstrap replicates fitted successfully",
            boot.len(),
            cfg.n_boot
        )));
    }
    let exceed = boot.iter().filter(|&&s| s >= statistic).count();
    let p_value = (1 + exceed) as f64 / (boot.len() + 1) as f64;
    Ok(LrtResult { statistic, p_value, null_fit, alt_fit, boot_statistics: boot, boot_failures: failures })
}
