use nalgebra::DMatrix;
use rand::Rng;

use super::Partition;
use crate::error::{invalid, Result};
use crate::linalg::squared_distance;
use crate::rng::seeded;

const MAX_ITER: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub partition: Partition,
    /// `K × p`.
    pub centers: DMatrix<f64>,
    /// Within-cluster sum of squares at the returned centers.
    pub wcss: f64,
    pub iterations: usize,
    /// WCSS after each assignment step of the winning restart.
    pub wcss_trace: Vec<f64>,
}

/// k-means++ seeding: indices of `k` distinct rows.
pub(crate) fn kmeanspp_indices<R: Rng + ?Sized>(data: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<usize> {
    let n = data.len();
    let mut chosen = Vec::with_capacity(k);
    let mut is_chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen.push(first);
    is_chosen[first] = true;
    let mut d2: Vec<f64> = data.iter().map(|x| squared_distance(x, &data[first])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().enumerate().filter(|(i, _)| !is_chosen[*i]).map(|(_, d)| d).sum();
        let next = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if is_chosen[i] || d <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if u < d {
                    break;
                }
                u -= d;
            }
            pick.expect("positive total implies a candidate")
        } else {
            // Every remaining point coincides with a centre.
            let remaining: Vec<usize> = (0..n).filter(|&i| !is_chosen[i]).collect();
            remaining[rng.gen_range(0..remaining.len())]
        };
        chosen.push(next);
        is_chosen[next] = true;
        for (i, x) in data.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(x, &data[next]));
        }
    }
    chosen
}

fn nearest(x: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = squared_distance(x, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    (best, best_d)
}

fn lloyd(data: &[Vec<f64>], k: usize, seed: u64) -> (Vec<usize>, Vec<Vec<f64>>, f64, usize, Vec<f64>) {
    let p = data[0].len();
    let mut rng = seeded(seed);
    let mut centers: Vec<Vec<f64>> = kmeanspp_indices(data, k, &mut rng).into_iter().map(|i| data[i].clone()).collect();
    let mut labels = vec![usize::MAX; data.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut changed = false;
        let mut wcss = 0.0;
        let mut dist = vec![0.0; data.len()];
        for (i, x) in data.iter().enumerate() {
            let (j, d) = nearest(x, &centers);
            changed |= labels[i] != j;
            labels[i] = j;
            dist[i] = d;
            wcss += d;
        }
        trace.push(wcss);
        if !changed || iterations >= MAX_ITER {
            break;
        }
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (x, &l) in data.iter().zip(&labels) {
            counts[l] += 1;
            for c in 0..p {
                sums[l][c] += x[c];
            }
        }
        let mut taken = vec![false; data.len()];
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            } else {
                // Re-seed an empty cluster at the point farthest from its centre.
                let far = (0..data.len())
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                    .expect("k <= n leaves a free point");
                taken[far] = true;
                centers[j] = data[far].clone();
            }
        }
    }
    let wcss = *trace.last().expect("at least one assignment step");
    (labels, centers, wcss, iterations, trace)
}

/// Lloyd's algorithm from k-means++ seeds; best of `restarts` runs (seeds
/// `seed + r`) by within-cluster sum of squares, ties to the earliest.
pub fn kmeans(x: &DMatrix<f64>, k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    let (n, p) = x.shape();
    if k == 0 || k > n {
        return invalid(format!("k-means needs 1 <= K <= n, got K={k}, n={n}"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return invalid("data contain non-finite values");
    }
    let data: Vec<Vec<f64>> = x.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut best: Option<KMeansFit> = None;
    for r in 0..restarts.max(1) {
        let (labels, centers, wcss, iterations, wcss_trace) = lloyd(&data, k, seed.wrapping_add(r as u64));
        if best.as_ref().map_or(true, |b| wcss < b.wcss) {
            let centers = DMatrix::from_fn(k, p, |j, c| centers[j][c]);
            best = Some(KMeansFit { partition: Partition(labels), centers, wcss, iterations, wcss_trace });
        }
    }
    Ok(best.expect("at least one restart"))
}
