//! Random directed graphs from block models and latent structure models.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::DirectedGraph;
use crate::curve::{CurveParams, SemiparModel};
use crate::error::{invalid, Result};
use crate::linalg::{psd_factor, sample_gaussian};
use crate::rng::seeded;

/// Block-model parameters. `block_sizes`, when present, fixes the exact
/// number of vertices per block (contiguous, in block order) instead of
/// drawing labels from `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmParams {
    pub rho: Vec<f64>,
    pub b: DMatrix<f64>,
    pub block_sizes: Option<Vec<usize>>,
}

/// Block connectivity estimated from the right-hemisphere mushroom body,
/// blocks ordered KC, MBIN, MBON, PN.
#[rustfmt::skip]
const B_OBSERVED: [f64; 16] = [
    0.362_020_20, 0.445_714_29, 0.494_482_76, 0.0,
    0.383_333_33, 0.0,          0.119_868_64, 0.0,
    0.0,          0.093_596_06, 0.208_128_08, 0.0,
    0.075_873_02, 0.0,          0.0,          0.0,
];

/// Observed block sizes matching [`SbmParams::b_observed`].
pub const MB_BLOCK_SIZES: [usize; 4] = [100, 21, 29, 63];

impl SbmParams {
    pub fn new(rho: Vec<f64>, b: DMatrix<f64>) -> Result<Self> {
        let p = Self { rho, b, block_sizes: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_block_sizes(mut self, sizes: Vec<usize>) -> Result<Self> {
        self.block_sizes = Some(sizes);
        self.validate()?;
        Ok(self)
    }

    /// The four-block mushroom body model with `rho` set to the observed
    /// block proportions.
    pub fn b_observed() -> Self {
        let total: usize = MB_BLOCK_SIZES.iter().sum();
        Self {
            rho: MB_BLOCK_SIZES.iter().map(|&s| s as f64 / total as f64).collect(),
            b: DMatrix::from_row_slice(4, 4, &B_OBSERVED),
            block_sizes: None,
        }
    }

    /// The four-block mushroom body model with `n` vertices split as evenly
    /// as possible among the blocks.
    pub fn synth_mb(n: usize) -> Self {
        let mut p = Self::b_observed();
        p.rho = vec![0.25; 4];
        p.block_sizes = Some(balanced_sizes(n, 4));
        p
    }

    pub fn k(&self) -> usize {
        self.rho.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.rho.len();
        if k == 0 {
            return invalid("block model needs at least one block");
        }
        if self.b.nrows() != k || self.b.ncols() != k {
            return invalid(format!("B is {}x{} but rho has {k} entries", self.b.nrows(), self.b.ncols()));
        }
        if self.rho.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return invalid("rho entries must be non-negative");
        }
        if (self.rho.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return invalid("rho must sum to 1");
        }
        if self.b.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return invalid("B entries must lie in [0, 1]");
        }
        if let Some(sizes) = &self.block_sizes {
            if sizes.len() != k {
                return invalid(format!("{} block sizes given for {k} blocks", sizes.len()));
            }
        }
        Ok(())
    }

    /// `Σ_kl n_k n_l B_kl − Σ_k n_k B_kk` for the given block sizes.
    pub fn expected_edges(&self, sizes: &[usize]) -> f64 {
        let mut total = 0.0;
        for (k, &nk) in sizes.iter().enumerate() {
            for (l, &nl) in sizes.iter().enumerate() {
                total += nk as f64 * nl as f64 * self.b[(k, l)];
            }
            total -= nk as f64 * self.b[(k, k)];
        }
        total
    }

    /// Variance of the edge count, a sum of independent Bernoullis.
    pub fn edge_count_variance(&self, sizes: &[usize]) -> f64 {
        let mut total = 0.0;
        for (k, &nk) in sizes.iter().enumerate() {
            for (l, &nl) in sizes.iter().enumerate() {
                let pairs = if k == l { nk * nk.saturating_sub(1) } else { nk * nl };
                let b = self.b[(k, l)];
                total += pairs as f64 * b * (1.0 - b);
            }
        }
        total
    }

    /// Latent positions reproducing `B` as inner products: row `k` is
    /// `[y_k | z_k]` with `y_k · z_l = B_kl`, built from the SVD of `B` and
    /// truncated at its numerical rank.
    pub fn latent_positions(&self) -> DMatrix<f64> {
        let svd = self.b.clone().svd(true, true);
        let u = svd.u.expect("left vectors requested");
        let vt = svd.v_t.expect("right vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let top = svd.singular_values.max();
        let kept: Vec<usize> = order.into_iter().filter(|&i| svd.singular_values[i] > 1e-12 * top.max(1e-300)).collect();
        let r = kept.len();
        let k = self.k();
        let mut x = DMatrix::zeros(k, 2 * r.max(1));
        let r_out = r.max(1);
        for (c, &i) in kept.iter().enumerate() {
            let s = svd.singular_values[i].sqrt();
            for row in 0..k {
                x[(row, c)] = u[(row, i)] * s;
                x[(row, r_out + c)] = vt[(i, row)] * s;
            }
        }
        x
    }

    /// The equivalent latent structure model: one point mass per block.
    pub fn to_lsm(&self) -> LsmSpec {
        let x = self.latent_positions();
        let p = x.ncols();
        LsmSpec {
            atoms: (0..self.k())
                .map(|k| LsmAtom { weight: self.rho[k], mean: x.row(k).transpose(), cov: DMatrix::zeros(p, p) })
                .collect(),
            curve: None,
            d: p / 2,
        }
    }
}

/// `n` split into `k` near-equal parts, larger parts first.
pub fn balanced_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
}

#[derive(Debug, Clone)]
pub struct SbmSample {
    pub graph: DirectedGraph,
    pub labels: Vec<usize>,
}

fn bernoulli_graph<R, F>(n: usize, rng: &mut R, prob: F) -> Result<DirectedGraph>
where
    R: Rng + ?Sized,
    F: Fn(usize, usize) -> f64,
{
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = prob(i, j);
            if p >= 1.0 || (p > 0.0 && rng.gen::<f64>() < p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    DirectedGraph::from_edges(n, edges)
}

/// Samples a directed SBM. With fixed block sizes the labels are contiguous
/// runs `0..n_0`, `n_0..n_0+n_1`, and so on.
pub fn sample_sbm(params: &SbmParams, n: usize, seed: u64) -> Result<SbmSample> {
    params.validate()?;
    let mut rng = seeded(seed);
    let labels = match &params.block_sizes {
        Some(sizes) => {
            if sizes.iter().sum::<usize>() != n {
                return invalid(format!("block sizes sum to {} but n = {n}", sizes.iter().sum::<usize>()));
            }
            sizes.iter().enumerate().flat_map(|(k, &s)| std::iter::repeat(k).take(s)).collect()
        }
        None => (0..n).map(|_| crate::curve::draw_index(&params.rho, &mut rng)).collect::<Vec<_>>(),
    };
    let graph = bernoulli_graph(n, &mut rng, |i, j| params.b[(labels[i], labels[j])])?;
    Ok(SbmSample { graph, labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsmAtom {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Latent positions drawn from Gaussian atoms (possibly point masses with a
/// zero covariance) plus an optional weighted curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LsmSpec {
    pub atoms: Vec<LsmAtom>,
    pub curve: Option<(f64, CurveParams)>,
    pub d: usize,
}

impl LsmSpec {
    pub fn validate(&self) -> Result<()> {
        let p = 2 * self.d;
        if self.d == 0 {
            return invalid("half-dimension d must be positive");
        }
        let mut total = 0.0;
        for (k, a) in self.atoms.iter().enumerate() {
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return invalid(format!("atom {k} has invalid weight {}", a.weight));
            }
            if a.mean.len() != p || a.cov.nrows() != p || a.cov.ncols() != p {
                return invalid(format!("atom {k} does not live in R^{p}"));
            }
            total += a.weight;
        }
        if let Some((w, c)) = &self.curve {
            if !(w.is_finite() && *w >= 0.0) {
                return invalid(format!("curve weight {w} is invalid"));
            }
            if c.dim() != p {
                return invalid(format!("curve lives in R^{} but the spec in R^{p}", c.dim()));
            }
            c.validate()?;
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("component weights sum to {total}, not 1"));
        }
        Ok(())
    }

    /// Draws `n` latent positions; labels are atom indices with the curve
    /// labelled `atoms.len()`.
    pub fn sample_positions<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (DMatrix<f64>, Vec<usize>) {
        let p = 2 * self.d;
        let factors: Vec<DMatrix<f64>> = self.atoms.iter().map(|a| psd_factor(&a.cov)).collect();
        let mut weights: Vec<f64> = self.atoms.iter().map(|a| a.weight).collect();
        weights.push(self.curve.as_ref().map_or(0.0, |c| c.0));
        let mut x = DMatrix::zeros(n, p);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let c = crate::curve::draw_index(&weights, rng);
            if c < self.atoms.len() {
                let row = sample_gaussian(&self.atoms[c].mean, &factors[c], rng);
                x.set_row(i, &row.transpose());
            } else {
                let (pt, _) = self.curve.as_ref().expect("curve has positive weight").1.sample(1, rng);
                x.set_row(i, &pt.row(0));
            }
            labels.push(c);
        }
        (x, labels)
    }
}

impl From<&SemiparModel> for LsmSpec {
    fn from(m: &SemiparModel) -> Self {
        Self {
            atoms: m
                .atoms
                .iter()
                .map(|a| LsmAtom { weight: a.weight, mean: a.mean.clone(), cov: a.cov.clone() })
                .collect(),
            curve: Some((m.curve_weight, m.curve.clone())),
            d: m.d,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LsmSample {
    pub graph: DirectedGraph,
    /// `n × 2d`, row `i` is `[y_i | z_i]`.
    pub positions: DMatrix<f64>,
    pub labels: Vec<usize>,
}

fn rdpg_with<R: Rng + ?Sized>(positions: &DMatrix<f64>, rng: &mut R) -> Result<DirectedGraph> {
    if positions.ncols() % 2 != 0 || positions.ncols() == 0 {
        return invalid(format!("latent positions have {} columns, expected a positive even count", positions.ncols()));
    }
    let d = positions.ncols() / 2;
    let n = positions.nrows();
    let y: Vec<Vec<f64>> = (0..n).map(|i| (0..d).map(|c| positions[(i, c)]).collect()).collect();
    let z: Vec<Vec<f64>> = (0..n).map(|i| (d..2 * d).map(|c| positions[(i, c)]).collect()).collect();
    bernoulli_graph(n, rng, |i, j| y[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum::<f64>().clamp(0.0, 1.0))
}

/// Samples a graph from fixed latent positions (rows `[y_i | z_i]`). Edge
/// `(i, j)` appears with probability `⟨y_i, z_j⟩` clamped to `[0, 1]`.
pub fn sample_rdpg(positions: &DMatrix<f64>, seed: u64) -> Result<DirectedGraph> {
    rdpg_with(positions, &mut seeded(seed))
}

/// Samples a directed latent structure model graph: positions are drawn
/// from the spec, then edges as in [`sample_rdpg`].
pub fn sample_lsm(spec: &LsmSpec, n: usize, seed: u64) -> Result<LsmSample> {
    spec.validate()?;
    let mut rng = seeded(seed);
    let (positions, labels) = spec.sample_positions(n, &mut rng);
    let graph = rdpg_with(&positions, &mut rng)?;
    Ok(LsmSample { graph, positions, labels })
}

/// Block model fitted to a labelled graph: `B_kl` is the observed edge
/// density from block `k` to block `l` (binarized), `rho` the block
/// proportions and `block_sizes` the observed counts. Labels must be
/// `0..K` with every block non-empty.
pub fn estimate_sbm(g: &DirectedGraph, labels: &[usize]) -> Result<SbmParams> {
    if labels.len() != g.n() {
        return invalid(format!("{} labels for {} vertices", labels.len(), g.n()));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().any(|&s| s == 0) {
        return invalid("block labels must be contiguous from 0");
    }
    let mut counts = DMatrix::<f64>::zeros(k, k);
    for e in g.edges() {
        counts[(labels[e.source], labels[e.target])] += 1.0;
    }
    let b = DMatrix::from_fn(k, k, |a, c| {
        let pairs = if a == c { sizes[a] * (sizes[a] - 1) } else { sizes[a] * sizes[c] };
        if pairs == 0 {
            0.0
        } else {
            counts[(a, c)] / pairs as f64
        }
    });
    let n = g.n() as f64;
    let mut rho: Vec<f64> = sizes.iter().map(|&s| s as f64 / n).collect();
    let drift = 1.0 - rho.iter().sum::<f64>();
    rho[0] += drift;
    Ok(SbmParams { rho, b, block_sizes: Some(sizes) })
}
