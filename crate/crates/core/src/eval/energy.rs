use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{invalid, Result};
use crate::rng::seeded;

fn row_distance(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    (0..a.ncols()).map(|c| (a[(i, c)] - b[(j, c)]).powi(2)).sum::<f64>().sqrt()
}

fn check(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<()> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return invalid("energy distance needs two non-empty samples");
    }
    if x.ncols() != y.ncols() {
        return invalid(format!("samples have dimensions {} and {}", x.ncols(), y.ncols()));
    }
    Ok(())
}

/// Energy distance `2E|X−Y| − E|X−X'| − E|Y−Y'|` between the rows of `x`
/// and `y` (V-statistic form, always non-negative).
pub fn energy_distance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    check(x, y)?;
    let mean = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..a.nrows() {
            for j in 0..b.nrows() {
                s += row_distance(a, i, b, j);
            }
        }
        s / (a.nrows() * b.nrows()) as f64
    };
    Ok((2.0 * mean(x, y) - mean(x, x) - mean(y, y)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTest {
    pub distance: f64,
    pub p_value: f64,
}

/// Permutation two-sample test on the energy distance.
pub fn energy_test(x: &DMatrix<f64>, y: &DMatrix<f64>, n_perm: usize, seed: u64) -> Result<EnergyTest> {
    check(x, y)?;
    if n_perm == 0 {
        return invalid("permutation count must be positive");
    }
    let (n, m) = (x.nrows(), y.nrows());
    let pooled = DMatrix::from_fn(n + m, x.ncols(), |i, c| if i < n { x[(i, c)] } else { y[(i - n, c)] });
    let total = n + m;
    let mut dist = vec![0f32; total * total];
    for i in 0..total {
        for j in i + 1..total {
            let d = row_distance(&pooled, i, &pooled, j) as f32;
            dist[i * total + j] = d;
            dist[j * total + i] = d;
        }
    }
    let all: f64 = dist.iter().map(|&d| d as f64).sum::<f64>() / 2.0;
    let stat = |in_x: &[bool]| {
        let (mut sxx, mut syy) = (0.0f64, 0.0f64);
        for i in 0..total {
            let row = &dist[i * total..(i + 1) * total];
            for j in i + 1..total {
                match (in_x[i], in_x[j]) {
                    (true, true) => sxx += row[j] as f64,
                    (false, false) => syy += row[j] as f64,
                    _ => {}
                }
            }
        }
        let sxy = all - sxx - syy;
        2.0 * sxy / (n * m) as f64 - 2.0 * sxx / (n * n) as f64 - 2.0 * syy / (m * m) as f64
    };
    let mut membership: Vec<bool> = (0..total).map(|i| i < n).collect();
    let observed = stat(&membership);
    let mut rng = seeded(seed);
    let mut hits = 0usize;
    for _ in 0..n_perm {
        membership.shuffle(&mut rng);
        if stat(&membership) >= observed * (1.0 - 1e-9) {
            hits += 1;
        }
    }
    Ok(EnergyTest { distance: observed.max(0.0), p_value: (1 + hits) as f64 / (n_perm + 1) as f64 })
}
