use nalgebra::DMatrix;
use serde::Serialize;

use super::{bernstein, CurveParams};

const GRID: usize = 1000;
const GOLDEN_TOL: f64 = 1e-8;
/// Margin, relative to the squared size of the point and curve, below which
/// two squared distances count as tied. A curve that is constant up to
/// rounding then still projects to `t = 0`.
const TIE_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveProjection {
    pub t: f64,
    pub distance: f64,
}

fn distance_sq(cp: &DMatrix<f64>, degree: usize, x: &[f64], t: f64) -> f64 {
    let b = bernstein(degree, t);
    let mut d2 = 0.0;
    for (c, &xc) in x.iter().enumerate() {
        let mu: f64 = b.iter().enumerate().map(|(r, w)| w * cp[(r, c)]).sum();
        d2 += (xc - mu) * (xc - mu);
    }
    d2
}

/// Closest point on the curve mean `μ(t)`, `t ∈ [0, 1]`: a 1000-node scan
/// followed by golden-section refinement around the best node. Ties resolve
/// to the smallest `t`, treating distances equal to about 1e-12 of
/// the problem's squared scale as tied.
pub fn project_to_curve(x: &[f64], curve: &CurveParams) -> CurveProjection {
    let cp = &curve.control_points;
    let degree = curve.degree();
    let f = |t: f64| distance_sq(cp, degree, x, t);
    let size = x.iter().map(|v| v * v).sum::<f64>() + cp.norm_squared() / cp.nrows() as f64;
    let improves = |candidate: f64, best: f64| candidate < best - TIE_REL * (best + size);

    let mut best_i = 0;
    let mut best = f(0.0);
    for i in 1..GRID {
        let d = f(i as f64 / (GRID - 1) as f64);
        if improves(d, best) {
            best = d;
            best_i = i;
        }
    }
    let step = 1.0 / (GRID - 1) as f64;
    let mut lo = (best_i as f64 - 1.0).max(0.0) * step;
    let mut hi = ((best_i + 1) as f64 * step).min(1.0);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > GOLDEN_TOL {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    let t_ref = 0.5 * (lo + hi);
    let d_ref = f(t_ref);
    let (t, d2) = if improves(d_ref, best) { (t_ref, d_ref) } else { (best_i as f64 * step, best) };
    CurveProjection { t, distance: d2.max(0.0).sqrt() }
}

/// Projects every row of `x`.
pub fn project_all(x: &DMatrix<f64>, curve: &CurveParams) -> Vec<CurveProjection> {
    x.row_iter()
        .map(|row| {
            let v: Vec<f64> = row.iter().copied().collect();
            project_to_curve(&v, curve)
        })
        .collect()
}
