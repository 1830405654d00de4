//! Acceptance harness. One line per criterion; exits non-zero if any fails.
//!
//! `ACCEPT_ONLY=1,3` restricts the run. The real-data check reads
//! `edges.csv` and `vertices.csv` from `$SEMIPAR_MB_DIR` (default
//! `data/mb` under the workspace root) and is skipped when they are absent.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use semipar::curve::{curve_degree_lrt, fit_curve, CurveFitConfig, CurveParams, LrtConfig};
use semipar::eval::{correlation_test, partition_metrics, CorrelationMethod, PValueMode};
use semipar::graph::{sample_rdpg, sample_sbm, write_edge_csv, write_vertex_csv, SbmParams, VertexMeta};
use semipar::mixture::{hard_labels, select_k, CovFamily, GmmConfig};
use semipar::rng::seeded;
use semipar::spectral::{default_scree_count, embed_auto, VarianceModel};
use semipar_cli::commands::{fitted_positions, pipeline, resampled_energy};
use semipar_cli::{Choice, PipelineConfig, Scheme, Session, Subset};

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn judge(ok: bool, detail: String) -> Outcome {
    Outcome { verdict: if ok { Verdict::Pass } else { Verdict::Fail }, detail }
}

// --- 1 and 2 share the synthMB samples -------------------------------------

struct SbmRun {
    ari: f64,
    q: usize,
    secs: f64,
}

fn synth_mb_runs() -> Vec<SbmRun> {
    let n = 2000;
    let params = SbmParams::synth_mb(n);
    (0..20u64)
        .map(|seed| {
            let start = Instant::now();
            let s = sample_sbm(&params, n, seed).expect("sampling synthMB");
            let (emb, scree) =
                embed_auto(&s.graph, true, default_scree_count(n), Some(3), VarianceModel::Separate).expect("embedding");
            let (fit, _) = select_k(&emb.x_hat, &[4], &[CovFamily::Full, CovFamily::Spherical], seed, 10, &GmmConfig::default())
                .expect("mixture fit");
            let ari = partition_metrics(hard_labels(&fit).labels(), &s.labels).expect("metrics").ari;
            SbmRun { ari, q: scree.chosen_q, secs: start.elapsed().as_secs_f64() }
        })
        .collect()
}

fn sbm_recovery(runs: &[SbmRun]) -> Outcome {
    let good = runs.iter().filter(|r| r.ari >= 0.95).count();
    let worst = runs.iter().map(|r| r.secs).fold(0.0, f64::max);
    let min_ari = runs.iter().map(|r| r.ari).fold(1.0, f64::min);
    judge(
        good >= 18 && worst < 60.0,
        format!("ARI >= 0.95 in {good}/20 seeds (min {min_ari:.3}), slowest seed {worst:.1} s"),
    )
}

fn dimension_selection(runs: &[SbmRun]) -> Outcome {
    let b = SbmParams::b_observed().b;
    let sv = b.clone().svd(false, false).singular_values;
    let tol = sv.max() * 4.0 * f64::EPSILON;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    let hits = runs.iter().filter(|r| r.q == 3).count();
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for r in runs {
        *counts.entry(r.q).or_default() += 1;
    }
    let mut counts: Vec<_> = counts.into_iter().collect();
    counts.sort();
    judge(
        rank == 3 && hits >= 18,
        format!("rank(B) = {rank}; SVT chose q = 3 in {hits}/20 seeds, counts {counts:?}"),
    )
}

// --- 3 -----------------------------------------------------------------------

fn curve_recovery() -> Outcome {
    let start = Instant::now();
    let cp = DMatrix::from_row_slice(
        3,
        6,
        &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.5, 1.5, 0.0, 1.0, 2.0, 0.0, 1.0, 0.5, 1.0, 2.0],
    );
    let truth = CurveParams::uniform(cp, 0.01, 0.01, 7).expect("valid curve");
    let (x, _) = truth.sample(1000, &mut seeded(3));
    let cfg = CurveFitConfig { k: 7, degree: 2, restarts: 5, ..CurveFitConfig::default() };
    let fit = fit_curve(&x, &cfg, 0, &[]).expect("curve fit");
    let err = |flip: bool| {
        (0..3)
            .map(|r| {
                let src = if flip { 2 - r } else { r };
                (fit.params.control_points.row(src) - truth.control_points.row(r)).norm()
            })
            .fold(0.0, f64::max)
    };
    let worst = err(false).min(err(true));
    let monotone = fit.loglik_trace.windows(2).all(|w| w[1] - w[0] >= -1e-9 * w[0].abs().max(1.0));
    let secs = start.elapsed().as_secs_f64();
    judge(
        worst <= 0.1 && monotone && secs < 30.0,
        format!(
            "max control point error {worst:.4}, log-likelihood monotone: {monotone} over {} iterations, {secs:.1} s",
            fit.iterations
        ),
    )
}

// --- 4 -----------------------------------------------------------------------

fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for l in 0..=next {
            prefix.push(l);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

/// ARI, NMI, VI and Jaccard by pair counting and label entropies.
fn brute_metrics(a: &[usize], b: &[usize]) -> [f64; 4] {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    let ari = if denom == 0.0 { 1.0 } else { 2.0 * (both * neither - only_a * only_b) / denom };
    let union = both + only_a + only_b;
    let jaccard = if union == 0.0 { 1.0 } else { both / union };
    let entropy = |keys: Vec<(usize, usize)>| {
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for k in keys {
            *counts.entry(k).or_default() += 1;
        }
        counts.values().map(|&c| -(c as f64 / n as f64) * (c as f64 / n as f64).ln()).sum::<f64>()
    };
    let ha = entropy(a.iter().map(|&x| (x, 0)).collect());
    let hb = entropy(b.iter().map(|&x| (x, 0)).collect());
    let hab = entropy(a.iter().zip(b).map(|(&x, &y)| (x, y)).collect());
    let nmi = if ha == 0.0 && hb == 0.0 { 1.0 } else { (ha + hb - hab) / (0.5 * (ha + hb)) };
    [ari, nmi, 2.0 * hab - ha - hb, jaccard]
}

fn metric_oracle() -> Outcome {
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        let parts = set_partitions(n);
        for a in &parts {
            for b in &parts {
                if n < 2 {
                    continue;
                }
                let m = partition_metrics(a, b).expect("metrics");
                let o = brute_metrics(a, b);
                for (x, y) in [m.ari, m.nmi, m.vi, m.jaccard].iter().zip(o) {
                    worst = worst.max((x - y).abs());
                }
                pairs += 1;
            }
        }
    }
    judge(worst <= 1e-12, format!("{pairs} partition pairs, max deviation {worst:.2e}"))
}

// --- 5 -----------------------------------------------------------------------

fn correlation_calibration() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for seed in 0..10u64 {
        let mut rng = seeded(100 + seed);
        let x: Vec<f64> = (0..50).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|&v| 0.25 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        for method in CorrelationMethod::ALL {
            let a = correlation_test(&x, &y, method, PValueMode::Analytic, seed).expect("analytic");
            let p = correlation_test(&x, &y, method, PValueMode::Permutation(9999), seed).expect("permutation");
            worst = worst.max((a.p_value - p.p_value).abs());
            checks += 1;
        }
    }
    judge(worst <= 0.02, format!("{checks} seed/method pairs, max |analytic - permutation| = {worst:.4}"))
}

// --- 6 -----------------------------------------------------------------------

fn lrt_calibration() -> Outcome {
    let line = DMatrix::from_row_slice(2, 6, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.5, 0.5, 1.0, 0.0]);
    let bend = DMatrix::from_row_slice(
        3,
        6,
        &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 0.0, 0.5, 0.5, 0.5, 1.0, 0.0, 0.5, 0.5, 1.0, 0.0],
    );
    let cfg = LrtConfig {
        fit: CurveFitConfig { k: 7, degree: 1, restarts: 3, ..CurveFitConfig::default() },
        n_boot: 99,
        boot_restarts: 1,
        min_success: 0.8,
    };
    let mut p_line = Vec::new();
    let mut p_bend = Vec::new();
    for rep in 0..20u64 {
        for (cp, out) in [(&line, &mut p_line), (&bend, &mut p_bend)] {
            let planted = CurveParams::uniform(cp.clone(), 0.01, 0.01, 7).expect("valid curve");
            let (x, _) = planted.sample(200, &mut seeded(500 + rep));
            let r = curve_degree_lrt(&x, 1, 2, &cfg, rep).expect("likelihood-ratio test");
            out.push(r.p_value);
        }
    }
    let keep = p_line.iter().filter(|&&p| p > 0.05).count();
    let reject = p_bend.iter().filter(|&&p| p < 0.05).count();
    judge(
        keep >= 16 && reject >= 16,
        format!("linear data p > 0.05 in {keep}/20, quadratic data p < 0.05 in {reject}/20"),
    )
}

// --- 7 -----------------------------------------------------------------------

struct Planted {
    edges: String,
    vertices: String,
}

/// Three point-mass types plus a KC type spread along a quadratic curve in
/// the d = 3 latent space.
fn planted_graph(seed: u64) -> Planted {
    let atoms = [
        ("MBIN", [0.8, 0.1, 0.1, 0.7, 0.1, 0.1]),
        ("MBON", [0.1, 0.8, 0.1, 0.1, 0.1, 0.7]),
        ("PN", [0.2, 0.1, 0.7, 0.3, 0.6, 0.1]),
    ];
    let cp = DMatrix::from_row_slice(
        3,
        6,
        &[0.6, 0.3, 0.1, 0.5, 0.3, 0.2, 0.3, 0.7, 0.3, 0.2, 0.6, 0.5, 0.1, 0.3, 0.6, 0.1, 0.2, 0.7],
    );
    let curve = CurveParams::uniform(cp, 1e-4, 1e-4, 7).expect("valid curve");
    let n_kc = 240;
    let per_atom = 80;
    let n = n_kc + 3 * per_atom;
    let mut rng = seeded(seed);
    let mut pos = DMatrix::zeros(n, 6);
    let mut meta = Vec::with_capacity(n);
    for i in 0..n_kc {
        let t: f64 = rng.gen();
        let mu = curve.mean_at(t);
        let noise = DVector::from_fn(6, |_, _| 0.01 * rng.sample::<f64, _>(StandardNormal));
        pos.set_row(i, &(mu + noise).transpose());
        meta.push(VertexMeta { id: i, type_label: "KC".into(), claws: None, distance: None });
    }
    for (a, (name, mean)) in atoms.iter().enumerate() {
        for j in 0..per_atom {
            let i = n_kc + a * per_atom + j;
            pos.set_row(i, &DVector::from_column_slice(mean).transpose());
            meta.push(VertexMeta { id: i, type_label: (*name).into(), claws: None, distance: None });
        }
    }
    let g = sample_rdpg(&pos, seed.wrapping_add(77)).expect("planted graph");
    let mut edges = Vec::new();
    write_edge_csv(&g, &mut edges).expect("edge csv");
    let mut vertices = Vec::new();
    write_vertex_csv(&meta, &mut vertices).expect("vertex csv");
    Planted { edges: String::from_utf8(edges).unwrap(), vertices: String::from_utf8(vertices).unwrap() }
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("semipar-accept-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

fn scheme_energies(seed: u64, dir: &Path) -> anyhow::Result<[f64; 3]> {
    let p = planted_graph(seed);
    let edges = dir.join("edges.csv");
    let vertices = dir.join("vertices.csv");
    std::fs::write(&edges, &p.edges)?;
    std::fs::write(&vertices, &p.vertices)?;
    let cfg = PipelineConfig {
        input: Some(edges),
        meta: Some(vertices),
        out_dir: dir.join("out"),
        seed,
        d: Choice::Fixed(6),
        k_max: 8,
        restarts: 3,
        curve_restarts: 3,
        n_boot: 0,
        subset: Some(Subset::Label("KC".into())),
        ..PipelineConfig::default()
    };
    let mut session = Session::new(cfg)?;
    let mut out = [0.0; 3];
    for (slot, scheme) in [Scheme::FittedLsm, Scheme::ClusterSbm, Scheme::TypeSbm].into_iter().enumerate() {
        let (positions, _) = fitted_positions(&mut session, scheme)?;
        let resampled = sample_rdpg(&positions, seed.wrapping_mul(1_000).wrapping_add(slot as u64))?;
        out[slot] = resampled_energy(&mut session, &resampled)?;
    }
    Ok(out)
}

fn validation_ordering() -> Outcome {
    let dir = scratch_dir("planted");
    let mut ordered = 0;
    let mut lines = Vec::new();
    for seed in 0..20u64 {
        match scheme_energies(seed, &dir) {
            Ok([lsm, ksbm, four]) => {
                if lsm < ksbm && ksbm < four {
                    ordered += 1;
                }
                lines.push(format!("{lsm:.4}/{ksbm:.4}/{four:.4}"));
            }
            Err(e) => lines.push(format!("error: {e}")),
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    if std::env::var_os("ACCEPT_VERBOSE").is_some() {
        eprintln!("lsm/k-sbm/4-sbm energies: {}", lines.join(", "));
    }
    judge(ordered >= 16, format!("fitted-LSM < K-hat-SBM < 4-block-SBM in {ordered}/20 seeds"))
}

// --- 8 -----------------------------------------------------------------------

fn mb_dir() -> PathBuf {
    std::env::var_os("SEMIPAR_MB_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mb"))
}

fn real_data() -> Outcome {
    let dir = mb_dir();
    let (edges, vertices) = (dir.join("edges.csv"), dir.join("vertices.csv"));
    if !edges.exists() || !vertices.exists() {
        return Outcome { verdict: Verdict::Skip, detail: format!("no dataset at {}", dir.display()) };
    }
    match real_data_checks(edges, vertices) {
        Ok(o) => o,
        Err(e) => judge(false, format!("pipeline error: {e}")),
    }
}

fn real_data_checks(edges: PathBuf, vertices: PathBuf) -> anyhow::Result<Outcome> {
    let out = scratch_dir("mb");
    let cfg = PipelineConfig {
        input: Some(edges),
        meta: Some(vertices),
        out_dir: out.clone(),
        n_boot: 0,
        ..PipelineConfig::default()
    };
    let mut session = Session::new(cfg)?;
    let g = session.raw_graph()?.clone();
    let s = pipeline(&mut session)?;
    let _ = std::fs::remove_dir_all(&out);
    let mut failed = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failed.push(what);
        }
    };
    check(g.n() == 213 && g.edge_count() == 7536, format!("graph {} / {}", g.n(), g.edge_count()));
    check(s.embed.d_hat == 6, format!("d_hat {}", s.embed.d_hat));
    let c = &s.cluster;
    check(c.k_hat == 6 && c.family == CovFamily::Full, format!("K_hat {} {:?}", c.k_hat, c.family));
    let m = c.metrics.expect("metadata present");
    check((m.ari - 0.63).abs() <= 0.03, format!("ARI {:.3}", m.ari));
    check((m.nmi - 0.75).abs() <= 0.03, format!("NMI {:.3}", m.nmi));
    let (truth, names) = session.truth()?.expect("metadata present");
    let _ = truth;
    if let (Some(conf), Some(kc)) = (&c.confusion, names.iter().position(|n| n == "KC")) {
        let mut row = conf[kc].clone();
        row.sort_unstable();
        let mut want = vec![25usize, 57, 0, 16, 2, 0];
        want.sort_unstable();
        let close = row.len() == want.len() && row.iter().zip(&want).all(|(a, b)| a.abs_diff(*b) <= 2);
        check(close, format!("KC row {:?}", conf[kc]));
    } else {
        check(false, "no KC row".into());
    }
    let spearman = s
        .curve
        .as_ref()
        .and_then(|cv| cv.correlations.iter().find(|r| r.method == CorrelationMethod::Spearman).cloned());
    match spearman {
        // The curve orientation is arbitrary, so the sign of t is too.
        Some(r) => check(
            r.p_value < 0.01 && (r.statistic.abs() - 0.271).abs() <= 0.05,
            format!("Spearman {:.3} (p {:.2e})", r.statistic, r.p_value),
        ),
        None => check(false, "no Spearman result".into()),
    }
    let base = |name: &str| c.baselines.iter().find(|b| b.method == name).map(|b| b.metrics.ari);
    match base("kmeans") {
        Some(a) => check((a - 0.42).abs() <= 0.05, format!("k-means ARI {a:.3}")),
        None => check(false, "no k-means baseline".into()),
    }
    match base("gmm_no_augment") {
        Some(a) => check((a - 0.36).abs() <= 0.05, format!("no-augmentation ARI {a:.3}")),
        None => check(false, "no no-augmentation baseline".into()),
    }
    let detail = format!("ARI {:.3}, NMI {:.3}, K_hat {}", m.ari, m.nmi, c.k_hat);
    Ok(if failed.is_empty() { judge(true, detail) } else { judge(false, format!("{detail}; off: {}", failed.join(", "))) })
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPT_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |c: usize| only.as_ref().map_or(true, |o| o.contains(&c));

    let runs = if wanted(1) || wanted(2) { synth_mb_runs() } else { Vec::new() };
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "SBM recovery on synthMB", Box::new(|| sbm_recovery(&runs))),
        (2, "SVT dimension selection", Box::new(|| dimension_selection(&runs))),
        (3, "planted curve recovery", Box::new(curve_recovery)),
        (4, "partition metrics vs brute force", Box::new(metric_oracle)),
        (5, "correlation p-values vs permutation", Box::new(correlation_calibration)),
        (6, "curve degree LRT calibration", Box::new(lrt_calibration)),
        (7, "resampled KC energy ordering", Box::new(validation_ordering)),
        (8, "MB dataset reproduction", Box::new(real_data)),
    ];
    let mut failures = 0;
    for (id, name, run) in criteria {
        if !wanted(id) {
            continue;
        }
        let o = run();
        let tag = match o.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failures += 1;
                "FAIL"
            }
            Verdict::Skip => "SKIP",
        };
        println!("criterion {id} {tag}: {name}: {}", o.detail);
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
