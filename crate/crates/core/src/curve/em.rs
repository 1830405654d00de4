//! EM for the curve-constrained Gaussian mixture.
//!
//! The E step is the usual posterior over grid nodes. The M step sets
//! `π_j = N_j / n` and maximizes the complete log-likelihood over the control
//! points and the two endpoint variances by block coordinate ascent: the
//! control points have a closed form given the variances (weighted Bernstein
//! least squares through the node means), and each variance is a 1-D
//! maximization with everything else held fixed. Every block is an exact
//! maximization, so the observed log-likelihood never decreases.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{bernstein, bernstein_design, grid_nodes, CurveParams};
use crate::error::{invalid, Error, Result};
use crate::linalg::{covariance, log_sum_exp, LN_2PI};
use crate::mixture::{gmm_em, CovFamily, GmmConfig, GmmInit};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveFitConfig {
    /// Grid size `K` (at least 3).
    pub k: usize,
    pub degree: usize,
    pub max_iter: usize,
    /// Relative log-likelihood tolerance.
    pub tol: f64,
    pub var_floor: f64,
    pub restarts: usize,
    /// Control-point jitter for restarts after the first, as a fraction of
    /// the data's per-coordinate standard deviation.
    pub jitter: f64,
    /// Constrain `σ1² = σ2²`.
    pub tie_variances: bool,
    /// Among restarts, rank fits whose variances stay above the floor ahead
    /// of fits with a collapsed variance, whatever their likelihood. A
    /// collapsed endpoint variance lets one grid node sit on a single point
    /// and inflate the likelihood without bound.
    pub prefer_nondegenerate: bool,
}

impl Default for CurveFitConfig {
    fn default() -> Self {
        Self {
            k: 7,
            degree: 2,
            max_iter: 500,
            tol: 1e-8,
            var_floor: 1e-8,
            restarts: 10,
            jitter: 0.05,
            tie_variances: false,
            prefer_nondegenerate: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurveFit {
    pub params: CurveParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood at the initial parameters followed by one entry per
    /// iteration.
    pub loglik_trace: Vec<f64>,
    /// Iterations in which a variance was held at the floor.
    pub variance_floor_hits: usize,
    /// Iterations in which the Bernstein design was rank-deficient and the
    /// control points were left unchanged.
    pub rank_deficient_steps: usize,
}

#[derive(Debug, Clone)]
pub struct MStep {
    pub control_points: DMatrix<f64>,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    /// A variance ended at the floor.
    pub floored: bool,
}

/// Per-node sufficient statistics of a responsibility matrix.
struct NodeStats {
    mass: Vec<f64>,
    means: DMatrix<f64>,
    scatter: Vec<f64>,
    dim: usize,
}

impl NodeStats {
    fn new(x: &DMatrix<f64>, z: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let k = z.ncols();
        let mass: Vec<f64> = (0..k).map(|j| z.column(j).sum()).collect();
        let mut means = z.transpose() * x;
        for j in 0..k {
            if mass[j] > 0.0 {
                means.row_mut(j).scale_mut(1.0 / mass[j]);
            }
        }
        let mut scatter = vec![0.0; k];
        for i in 0..n {
            for j in 0..k {
                let w = z[(i, j)];
                if w > 0.0 {
                    let mut d2 = 0.0;
                    for c in 0..p {
                        let d = x[(i, c)] - means[(j, c)];
                        d2 += d * d;
                    }
                    scatter[j] += w * d2;
                }
            }
        }
        Self { mass, means, scatter, dim: p }
    }

    /// `Σ_i z_ij ‖x_i − μ_j‖²` for every node, given node means `mu`.
    fn residuals(&self, mu: &DMatrix<f64>) -> Vec<f64> {
        (0..self.mass.len())
            .map(|j| {
                let d2 = (self.means.row(j) - mu.row(j)).norm_squared();
                self.scatter[j] + self.mass[j] * d2
            })
            .collect()
    }
}

fn node_vars(nodes: &[f64], a: f64, b: f64) -> Vec<f64> {
    nodes.iter().map(|&t| (1.0 - t) * a + t * b).collect()
}

/// Curve-dependent part of the complete log-likelihood.
fn complete_loglik(stats: &NodeStats, residuals: &[f64], vars: &[f64]) -> f64 {
    let p = stats.dim as f64;
    stats
        .mass
        .iter()
        .zip(residuals)
        .zip(vars)
        .filter(|((&m, &r), _)| m > 0.0 || r > 0.0)
        .map(|((&m, &r), &s)| -0.5 * p * m * (LN_2PI + s.ln()) - 0.5 * r / s)
        .sum()
}

/// Weighted Bernstein least squares: control points minimizing
/// `Σ_j (N_j / s_j) ‖x̄_j − Σ_c B_c(t_j) m_c‖²`.
fn solve_control_points(stats: &NodeStats, design: &DMatrix<f64>, vars: &[f64]) -> Result<DMatrix<f64>> {
    let m = design.ncols();
    let mut gram = DMatrix::zeros(m, m);
    let mut rhs = DMatrix::zeros(m, stats.dim);
    for j in 0..design.nrows() {
        let w = stats.mass[j] / vars[j];
        if w <= 0.0 {
            continue;
        }
        let b = design.row(j).transpose();
        gram += &b * b.transpose() * w;
        rhs += &b * stats.means.row(j) * w;
    }
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::Validation(
            "rank-deficient Bernstein design: responsibility mass covers too few grid nodes".into(),
        ));
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("Bernstein normal equations not positive definite".into()))?;
    Ok(chol.solve(&rhs))
}

/// Maximizes the complete log-likelihood over one endpoint variance with the
/// other fixed. `which = 0` updates σ1², `which = 1` updates σ2².
fn update_variance(
    stats: &NodeStats,
    residuals: &[f64],
    nodes: &[f64],
    a: f64,
    b: f64,
    which: usize,
    floor: f64,
) -> f64 {
    let p = stats.dim as f64;
    let current = if which == 0 { a } else { b };
    let vars_with = |v: f64| if which == 0 { node_vars(nodes, v, b) } else { node_vars(nodes, a, v) };
    let coef = |t: f64| if which == 0 { 1.0 - t } else { t };
    let relevant_mass: f64 = nodes.iter().zip(&stats.mass).map(|(&t, &m)| coef(t) * m).sum();
    if relevant_mass <= 0.0 {
        return current;
    }
    let grad = |v: f64| -> f64 {
        let vars = vars_with(v);
        nodes
            .iter()
            .enumerate()
            .map(|(j, &t)| coef(t) * (residuals[j] - p * stats.mass[j] * vars[j]) / (2.0 * vars[j] * vars[j]))
            .sum()
    };
    let objective = |v: f64| complete_loglik(stats, residuals, &vars_with(v));

    let candidate = if grad(floor) <= 0.0 {
        floor
    } else {
        let mut lo = floor;
        let mut hi = current.max(floor) * 2.0;
        let mut expansions = 0;
        while grad(hi) > 0.0 && expansions < 2000 {
            lo = hi;
            hi *= 2.0;
            expansions += 1;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if grad(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    if objective(candidate) >= objective(current) {
        candidate
    } else {
        current
    }
}

fn block_ascent(
    stats: &NodeStats,
    degree: usize,
    start_points: Option<DMatrix<f64>>,
    start: (f64, f64),
    var_floor: f64,
    tie_variances: bool,
) -> Result<MStep> {
    let k = stats.mass.len();
    let nodes = grid_nodes(k);
    let design = bernstein_design(k, degree);
    let solve = start_points.is_none();
    let (mut a, mut b) = (start.0.max(var_floor), start.1.max(var_floor));
    if tie_variances {
        let s = 0.5 * (a + b);
        a = s;
        b = s;
    }
    let mut cp = match start_points {
        Some(cp) => cp,
        None => solve_control_points(stats, &design, &node_vars(&nodes, a, b))?,
    };

    if tie_variances {
        // Equal variances decouple: the control points do not depend on the
        // common variance, which then has a closed form.
        let resid = stats.residuals(&(&design * &cp));
        let total_mass: f64 = stats.mass.iter().sum();
        let s = if total_mass > 0.0 {
            (resid.iter().sum::<f64>() / (stats.dim as f64 * total_mass)).max(var_floor)
        } else {
            a
        };
        return Ok(MStep { control_points: cp, sigma1_sq: s, sigma2_sq: s, floored: s <= var_floor });
    }

    let mut resid = stats.residuals(&(&design * &cp));
    let mut prev = complete_loglik(stats, &resid, &node_vars(&nodes, a, b));
    for _ in 0..500 {
        a = update_variance(stats, &resid, &nodes, a, b, 0, var_floor);
        b = update_variance(stats, &resid, &nodes, a, b, 1, var_floor);
        if solve {
            cp = solve_control_points(stats, &design, &node_vars(&nodes, a, b))?;
            resid = stats.residuals(&(&design * &cp));
        }
        let cur = complete_loglik(stats, &resid, &node_vars(&nodes, a, b));
        if (cur - prev).abs() <= 1e-10 * prev.abs().max(1.0) {
            break;
        }
        prev = cur;
    }
    Ok(MStep { control_points: cp, sigma1_sq: a, sigma2_sq: b, floored: a <= var_floor || b <= var_floor })
}

fn check_responsibilities(x: &DMatrix<f64>, z: &DMatrix<f64>, degree: usize) -> Result<()> {
    if !(1..=3).contains(&degree) {
        return invalid(format!("curve degree must be 1, 2 or 3; got {degree}"));
    }
    if z.nrows() != x.nrows() {
        return invalid("responsibilities and data have different row counts");
    }
    if z.ncols() < 2 {
        return invalid("responsibilities need at least two grid nodes");
    }
    for (i, row) in z.row_iter().enumerate() {
        let s: f64 = row.sum();
        if row.iter().any(|&v| !(v >= 0.0)) || (s - 1.0).abs() > 1e-8 {
            return invalid(format!("responsibility row {i} is not a probability vector"));
        }
    }
    Ok(())
}

/// Curve M step from scratch: starts from the homoscedastic solution.
pub fn mstep_curve(x: &DMatrix<f64>, z: &DMatrix<f64>, degree: usize) -> Result<MStep> {
    check_responsibilities(x, z, degree)?;
    let stats = NodeStats::new(x, z);
    let tied = block_ascent(&stats, degree, None, (1.0, 1.0), 1e-8, true)?;
    block_ascent(&stats, degree, None, (tied.sigma1_sq, tied.sigma2_sq), 1e-8, false)
}

/// Curve M step starting from the given endpoint variances.
pub fn mstep_curve_from(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    degree: usize,
    start: (f64, f64),
    var_floor: f64,
    tie_variances: bool,
) -> Result<MStep> {
    check_responsibilities(x, z, degree)?;
    block_ascent(&NodeStats::new(x, z), degree, None, start, var_floor, tie_variances)
}

/// Log-likelihood of `x` under the curve mixture and the posterior over nodes.
pub(crate) fn estep(x: &DMatrix<f64>, curve: &CurveParams) -> (f64, DMatrix<f64>) {
    let (n, p) = x.shape();
    let k = curve.k();
    let means = curve.node_means();
    let vars = curve.node_variances();
    let consts: Vec<f64> = (0..k)
        .map(|j| curve.pi[j].ln() - 0.5 * p as f64 * (LN_2PI + vars[j].ln()))
        .collect();
    let mut z = DMatrix::zeros(n, k);
    let mut loglik = 0.0;
    let mut terms = vec![0.0; k];
    for i in 0..n {
        for j in 0..k {
            let mut d2 = 0.0;
            for c in 0..p {
                let d = x[(i, c)] - means[(j, c)];
                d2 += d * d;
            }
            terms[j] = consts[j] - 0.5 * d2 / vars[j];
        }
        let lse = log_sum_exp(&terms);
        loglik += lse;
        for j in 0..k {
            z[(i, j)] = (terms[j] - lse).exp();
        }
    }
    (loglik, z)
}

/// Runs EM from `init` until the relative log-likelihood change drops below
/// `cfg.tol` or `cfg.max_iter` iterations.
pub fn lsm_em(x: &DMatrix<f64>, init: &CurveParams, cfg: &CurveFitConfig) -> Result<CurveFit> {
    let n = x.nrows();
    if cfg.k < 3 {
        return invalid(format!("grid size K must be at least 3, got {}", cfg.k));
    }
    if !(1..=3).contains(&cfg.degree) {
        return invalid(format!("curve degree must be 1, 2 or 3; got {}", cfg.degree));
    }
    if n <= cfg.k {
        return invalid(format!("need more points ({n}) than grid nodes ({})", cfg.k));
    }
    init.validate()?;
    if init.k() != cfg.k || init.degree() != cfg.degree || init.dim() != x.ncols() {
        return invalid("initial curve does not match the requested grid size, degree or dimension");
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("data contain non-finite values");
    }

    let mut params = init.clone();
    params.sigma1_sq = params.sigma1_sq.max(cfg.var_floor);
    params.sigma2_sq = params.sigma2_sq.max(cfg.var_floor);
    let (mut loglik, mut z) = estep(x, &params);
    let mut trace = vec![loglik];
    let mut floor_hits = 0;
    let mut rank_deficient = 0;
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        iterations += 1;
        let stats = NodeStats::new(x, &z);
        let pi: Vec<f64> = stats.mass.iter().map(|m| m / n as f64).collect();
        let start = (params.sigma1_sq, params.sigma2_sq);
        let step = match block_ascent(&stats, cfg.degree, None, start, cfg.var_floor, cfg.tie_variances) {
            Ok(step) => step,
            Err(Error::Validation(_)) => {
                rank_deficient += 1;
                block_ascent(
                    &stats,
                    cfg.degree,
                    Some(params.control_points.clone()),
                    start,
                    cfg.var_floor,
                    cfg.tie_variances,
                )?
            }
            Err(e) => return Err(e),
        };
        if step.floored {
            floor_hits += 1;
        }
        params = CurveParams {
            control_points: step.control_points,
            sigma1_sq: step.sigma1_sq,
            sigma2_sq: step.sigma2_sq,
            pi,
        };
        let (next, next_z) = estep(x, &params);
        trace.push(next);
        let change = (next - loglik).abs();
        let scale = loglik.abs().max(1.0);
        loglik = next;
        z = next_z;
        if change <= cfg.tol * scale {
            converged = true;
            break;
        }
    }
    // Renormalize to guard the simplex invariant against round-off.
    let total: f64 = params.pi.iter().sum();
    params.pi.iter_mut().for_each(|w| *w /= total);

    Ok(CurveFit {
        params,
        loglik,
        iterations,
        converged,
        loglik_trace: trace,
        variance_floor_hits: floor_hits,
        rank_deficient_steps: rank_deficient,
    })
}

/// Starting curve: a `(degree+1)`-component spherical GMM, its means ordered
/// along their first principal axis and interpolated by a Bézier curve at
/// `t = 0, 1/degree, ..., 1`; both variances start at the pooled
/// within-component variance and `π` is uniform. With `jitter > 0` the
/// control points are perturbed by Gaussian noise of that relative scale.
pub fn initial_curve(
    x: &DMatrix<f64>,
    k: usize,
    degree: usize,
    seed: u64,
    jitter: f64,
    var_floor: f64,
) -> Result<CurveParams> {
    let (n, p) = x.shape();
    let m = degree + 1;
    if !(1..=3).contains(&degree) {
        return invalid(format!("curve degree must be 1, 2 or 3; got {degree}"));
    }
    if n <= m {
        return invalid(format!("need more than {m} points to initialize a degree-{degree} curve"));
    }
    let gmm_cfg = GmmConfig { max_iter: 200, tol: 1e-6, ..GmmConfig::default() };
    let gmm = gmm_em(x, m, CovFamily::Spherical, GmmInit::KMeansPlusPlus, seed, &gmm_cfg)?;

    let centre = crate::linalg::column_means(&gmm.means);
    let mut centred = gmm.means.clone();
    for mut row in centred.row_iter_mut() {
        row -= centre.transpose();
    }
    let axis = centred.clone().svd(false, true).v_t.map(|v| v.row(0).transpose().into_owned());
    let mut order: Vec<usize> = (0..m).collect();
    if let Some(axis) = axis {
        let proj: Vec<f64> = (0..m).map(|c| centred.row(c).dot(&axis.transpose())).collect();
        order.sort_by(|&i, &j| proj[i].total_cmp(&proj[j]).then(i.cmp(&j)));
    }
    let ordered = DMatrix::from_fn(m, p, |r, c| gmm.means[(order[r], c)]);
    let interp = DMatrix::from_fn(m, m, |r, c| bernstein(degree, r as f64 / degree as f64)[c]);
    let mut cp = interp
        .lu()
        .solve(&ordered)
        .ok_or_else(|| Error::Numeric("Bernstein interpolation matrix is singular".into()))?;

    let mut pooled = 0.0;
    for i in 0..n {
        for c in 0..m {
            let w = gmm.responsibilities[(i, c)];
            if w > 0.0 {
                pooled += w * (x.row(i) - gmm.means.row(c)).norm_squared();
            }
        }
    }
    let s = (pooled / (n * p) as f64).max(var_floor);

    if jitter > 0.0 {
        let cov = covariance(x);
        let scale = (cov.trace() / p as f64).max(0.0).sqrt();
        let mut rng = seeded(seed ^ 0x9E37_79B9_7F4A_7C15);
        for v in cp.iter_mut() {
            *v += jitter * scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
    CurveParams::uniform(cp, s, s, k)
}

/// Best-of-restarts fit. Restart `r` initializes from [`initial_curve`] with
/// seed `seed + r` (no jitter on the first); `warm_starts` are tried as
/// additional starting points. Ties keep the earliest candidate.
pub fn fit_curve(
    x: &DMatrix<f64>,
    cfg: &CurveFitConfig,
    seed: u64,
    warm_starts: &[CurveParams],
) -> Result<CurveFit> {
    if cfg.k < 3 {
        return invalid(format!("grid size K must be at least 3, got {}", cfg.k));
    }
    let mut best: Option<CurveFit> = None;
    let mut first_err = None;
    let collapsed = |f: &CurveFit| {
        cfg.prefer_nondegenerate && f.params.sigma1_sq.min(f.params.sigma2_sq) <= cfg.var_floor * (1.0 + 1e-9)
    };
    let mut consider = |fit: Result<CurveFit>| match fit {
        Ok(f) => {
            let better = match &best {
                None => true,
                Some(b) => match (collapsed(&f), collapsed(b)) {
                    (false, true) => true,
                    (true, false) => false,
                    _ => f.loglik > b.loglik,
                },
            };
            if better {
                best = Some(f);
            }
        }
        Err(e) => {
            first_err.get_or_insert(e);
        }
    };
    for r in 0..cfg.restarts.max(1) {
        let jitter = if r == 0 { 0.0 } else { cfg.jitter };
        let fit = initial_curve(x, cfg.k, cfg.degree, seed.wrapping_add(r as u64), jitter, cfg.var_floor)
            .and_then(|init| lsm_em(x, &init, cfg));
        consider(fit);
    }
    for init in warm_starts {
        consider(lsm_em(x, init, cfg));
    }
    match best {
        Some(b) => Ok(b),
        None => Err(first_err.unwrap_or_else(|| Error::Numeric("no curve fit succeeded".into()))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveKRow {
    pub k: usize,
    pub loglik: f64,
    pub bic: f64,
    pub params: usize,
}

/// Chooses the grid size by BIC (`2·loglik − params·ln n`, larger is better)
/// with `params = (K − 1) + p (degree + 1) + 2`. Ties go to the smaller K.
pub fn select_curve_k(
    x: &DMatrix<f64>,
    k_range: &[usize],
    cfg: &CurveFitConfig,
    seed: u64,
) -> Result<(usize, Vec<CurveKRow>)> {
    if k_range.is_empty() {
        return invalid("k_range is empty");
    }
    if let Some(&bad) = k_range.iter().find(|&&k| k < 3) {
        return invalid(format!("grid size K must be at least 3, got {bad}"));
    }
    let (n, p) = x.shape();
    let mut rows = Vec::with_capacity(k_range.len());
    for &k in k_range {
        let fit = fit_curve(x, &CurveFitConfig { k, ..cfg.clone() }, seed, &[])?;
        let params = (k - 1) + p * (cfg.degree + 1) + 2;
        let bic = 2.0 * fit.loglik - params as f64 * (n as f64).ln();
        rows.push(CurveKRow { k, loglik: fit.loglik, bic, params });
    }
    let best = rows
        .iter()
        .fold(None::<&CurveKRow>, |acc, r| match acc {
            Some(b) if b.bic >= r.bic => Some(b),
            _ => Some(r),
        })
        .map(|r| r.k)
        .expect("k_range is non-empty");
    Ok((best, rows))
}
