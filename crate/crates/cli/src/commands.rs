//! The CLI verbs. Each writes its files plus `manifest.<verb>.json` into the
//! output directory and returns an in-memory summary.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use semipar::curve::{
    assemble_semipar, curve_degree_lrt, project_all, AtomDesignation, CurveJson, LrtConfig, SemiparAtom,
    SemiparJson, SemiparModel,
};
use semipar::eval::{
    confusion_matrix, correlation_test, energy_distance, partition_metrics, write_metrics_csv, CorrelationMethod,
    CorrelationResult, MetricReport, PValueMode,
};
use semipar::graph::{
    estimate_sbm, sample_lsm, sample_rdpg, sample_sbm, write_edge_csv, DirectedGraph, LsmSpec, SbmParams,
    WeightMode, MB_BLOCK_SIZES,
};
use semipar::linalg::{column_means, procrustes};
use semipar::mixture::{kmeans, write_bic_table, CovFamily, Partition};
use semipar::spectral::{align_signs, dense_svd, embedding_from_svd};

use crate::config::{Choice, Scheme, Subset};
use crate::output::{write_labels, write_positions, Manifest, OutDir};
use crate::session::{group_means, regularized_covariance, Clustering, Session};

#[derive(Debug, Clone)]
pub struct EmbedSummary {
    pub d_hat: usize,
    pub q_hat: Option<usize>,
}

pub fn embed(session: &mut Session) -> Result<EmbedSummary> {
    let mut out = OutDir::create(&session.cfg.out_dir)?;
    let (e, scree) = session.embedding()?;
    let (e, scree) = (e.clone(), scree.cloned());
    out.write("embedding.csv", |w| Ok(e.write_csv(w)?))?;
    if let Some(s) = &scree {
        out.write("scree.csv", |w| Ok(s.write_csv(w)?))?;
    }
    let summary = EmbedSummary { d_hat: 2 * e.d, q_hat: scree.as_ref().map(|s| s.chosen_q) };
    let mut m = Manifest::new("embed", &session.cfg);
    m.d_hat = Some(summary.d_hat);
    m.q_hat = summary.q_hat;
    m.summary = json!({ "n": e.n(), "augmented": e.augmented, "singular_values": &e.singular_values[..e.singular_values.len().min(10)] });
    m.finish(&mut out)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineRow {
    pub method: String,
    pub k: usize,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone)]
pub struct ClusterSummary {
    pub k_hat: usize,
    pub family: CovFamily,
    pub labels: Vec<usize>,
    pub metrics: Option<MetricReport>,
    pub confusion: Option<Vec<Vec<usize>>>,
    pub baselines: Vec<BaselineRow>,
}

pub fn cluster(session: &mut Session) -> Result<ClusterSummary> {
    let mut out = OutDir::create(&session.cfg.out_dir)?;
    let d_hat = 2 * session.embedding()?.0.d;
    let c: Clustering = session.clustering()?.clone();
    let truth = session.truth()?;
    let labels = c.labels.labels().to_vec();
    out.write("bic_table.csv", |w| Ok(write_bic_table(&c.bic, w)?))?;
    out.write("labels.csv", |w| write_labels("cluster", &labels, w))?;

    let mut summary = ClusterSummary {
        k_hat: c.fit.k(),
        family: c.fit.cov_family,
        labels: labels.clone(),
        metrics: None,
        confusion: None,
        baselines: Vec::new(),
    };
    let mut warnings = Vec::new();
    if let Some((truth, names)) = &truth {
        if truth.len() != labels.len() {
            bail!("metadata has {} vertices but the embedding {}", truth.len(), labels.len());
        }
        let confusion = confusion_matrix(truth.labels(), &labels)?;
        out.write("confusion.csv", |w| Ok(confusion.write_csv(Some(names), w)?))?;
        let report = partition_metrics(truth.labels(), &labels)?;
        out.write("metrics.csv", |w| Ok(write_metrics_csv("K", &[(c.fit.k(), report)], w)?))?;
        let by_k = c
            .per_k
            .iter()
            .map(|f| Ok((f.k(), partition_metrics(truth.labels(), semipar::mixture::hard_labels(f).labels())?)))
            .collect::<Result<Vec<_>>>()?;
        out.write("metrics_by_k.csv", |w| Ok(write_metrics_csv("K", &by_k, w)?))?;
        summary.metrics = Some(report);
        summary.confusion = Some(expand_confusion(&confusion, names.len(), c.fit.k()));

        if session.cfg.baselines {
            summary.baselines.push(BaselineRow { method: "gmm".into(), k: c.fit.k(), metrics: report });
            let x = session.embedding()?.0.x_hat.clone();
            let km = kmeans(&x, c.fit.k(), session.cfg.seed, session.cfg.restarts)?;
            summary.baselines.push(BaselineRow {
                method: "kmeans".into(),
                k: c.fit.k(),
                metrics: partition_metrics(truth.labels(), km.partition.labels())?,
            });
            if session.cfg.input.is_some() {
                let g = session.graph()?;
                let q = session.embedding()?.0.d;
                let no_aug = semipar::spectral::ase(&g, q, false).map_err(anyhow::Error::from).and_then(|e| {
                    let mut fixed = session.cfg.clone();
                    fixed.k = Choice::Fixed(c.fit.k());
                    Session::new(fixed)?.cluster_matrix(&e.x_hat)
                });
                match no_aug {
                    Ok(no_aug) => summary.baselines.push(BaselineRow {
                        method: "gmm_no_augment".into(),
                        k: c.fit.k(),
                        metrics: partition_metrics(truth.labels(), no_aug.labels.labels())?,
                    }),
                    Err(e) => warnings.push(format!("no-augmentation baseline failed: {e}")),
                }
            } else {
                warnings.push("no-augmentation baseline skipped: clustering a saved embedding".into());
            }
            let rows = summary.baselines.clone();
            out.write("baselines.csv", |w| {
                writeln!(w, "method,K,ari,nmi,inv_vi,jaccard")?;
                for r in &rows {
                    let m = r.metrics;
                    writeln!(w, "{},{},{},{},{},{}", r.method, r.k, m.ari, m.nmi, m.inv_vi, m.jaccard)?;
                }
                Ok(())
            })?;
        }
    }
    let mut m = Manifest::new("cluster", &session.cfg);
    m.d_hat = Some(d_hat);
    m.k_hat = Some(summary.k_hat);
    m.warnings = warnings;
    m.summary = json!({
        "family": summary.family,
        "loglik": c.fit.loglik,
        "bic": c.fit.bic,
        "metrics": summary.metrics,
        "baselines": summary.baselines,
    });
    m.finish(&mut out)?;
    Ok(summary)
}

/// Confusion counts indexed by class id and cluster id (0..K), filling
/// clusters that received no vertices with zeros.
fn expand_confusion(c: &semipar::eval::Confusion, rows: usize, cols: usize) -> Vec<Vec<usize>> {
    let mut full = vec![vec![0; cols]; rows];
    for (i, &r) in c.row_labels.iter().enumerate() {
        for (j, &col) in c.col_labels.iter().enumerate() {
            if r < rows && col < cols {
                full[r][col] = c.counts[i][j];
            }
        }
    }
    full
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeTest {
    pub null_degree: usize,
    pub alt_degree: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub n_boot: usize,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct CurveSummary {
    pub subset: Vec<usize>,
    pub curve: semipar::curve::CurveParams,
    pub loglik: f64,
    pub t: Vec<f64>,
    pub degree_tests: Vec<DegreeTest>,
    pub correlations: Vec<CorrelationResult>,
    pub warnings: Vec<String>,
}

/// Gaussian atoms for everything outside the curve subset: one per metadata
/// type for a label subset, one per remaining mixture component otherwise.
fn semipar_model(session: &mut Session) -> Result<SemiparModel> {
    let stage = session.curve()?.clone();
    let e = session.embedding()?.0.clone();
    let n = e.n();
    match session.subset_rule()? {
        Subset::Label(label) => {
            let (truth, names) = session.truth()?.context("label subsets need metadata")?;
            let mut atoms = Vec::new();
            for (class, name) in names.iter().enumerate() {
                if *name == label {
                    continue;
                }
                let rows: Vec<usize> = (0..n).filter(|&i| truth.labels()[i] == class).collect();
                let x = e.select_rows(&rows);
                atoms.push(SemiparAtom {
                    weight: rows.len() as f64 / n as f64,
                    mean: column_means(&x),
                    cov: regularized_covariance(&x),
                });
            }
            let model = SemiparModel {
                atoms,
                curve_weight: stage.subset.len() as f64 / n as f64,
                curve: stage.fit.params.clone(),
                d: e.d,
            };
            model.validate()?;
            Ok(model)
        }
        Subset::Clusters(ids) => {
            let c = session.clustering()?;
            let sizes = c.labels.sizes();
            let atoms: Vec<AtomDesignation> = (0..c.fit.k())
                .filter(|k| !ids.contains(k))
                .map(|k| AtomDesignation { component: k, count: sizes.get(k).copied().unwrap_or(0) })
                .collect();
            Ok(assemble_semipar(&c.fit, &atoms, stage.fit.params.clone(), stage.subset.len())?)
        }
    }
}

/// Centroid of each metadata type in the embedding.
fn type_centroids(session: &mut Session) -> Result<Option<BTreeMap<String, Vec<f64>>>> {
    let Some((truth, names)) = session.truth()? else { return Ok(None) };
    let x = session.embedding()?.0.x_hat.clone();
    let means = group_means(&x, truth.labels(), names.len());
    Ok(Some(names.into_iter().zip(means.into_iter().map(|m| m.iter().copied().collect())).collect()))
}

pub fn curve(session: &mut Session) -> Result<CurveSummary> {
    let mut out = OutDir::create(&session.cfg.out_dir)?;
    let stage = session.curve()?.clone();
    let mut warnings = Vec::new();
    if stage.fit.variance_floor_hits > 0 {
        warnings.push(format!(
            "curve variance held at the floor in {} of {} iterations",
            stage.fit.variance_floor_hits, stage.fit.iterations
        ));
    }
    if stage.fit.rank_deficient_steps > 0 {
        warnings.push(format!(
            "rank-deficient Bernstein design in {} iterations; control points held",
            stage.fit.rank_deficient_steps
        ));
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let curve_json = stage.fit.params.to_json(Some(stage.fit.loglik));
    out.write("curve.json", |w| {
        w.write_all(curve_json.to_json()?.as_bytes())?;
        writeln!(w)?;
        Ok(())
    })?;
    out.write("projections.csv", |w| {
        writeln!(w, "vertex_id,t,distance")?;
        for (v, p) in stage.subset.iter().zip(&stage.projections) {
            writeln!(w, "{v},{},{}", p.t, p.distance)?;
        }
        Ok(())
    })?;

    let x = session.embedding()?.0.select_rows(&stage.subset);
    let mut degree_tests = Vec::new();
    if session.cfg.n_boot > 0 {
        let degree = session.cfg.curve_degree;
        let mut pairs = Vec::new();
        if degree > 1 {
            pairs.push((degree - 1, degree));
        }
        if degree < 3 {
            pairs.push((degree, degree + 1));
        }
        let lrt_cfg = LrtConfig { fit: session.curve_config(), n_boot: session.cfg.n_boot, ..Default::default() };
        for (null, alt) in pairs {
            let r = curve_degree_lrt(&x, null, alt, &lrt_cfg, session.cfg.seed)?;
            degree_tests.push(DegreeTest {
                null_degree: null,
                alt_degree: alt,
                statistic: r.statistic,
                p_value: r.p_value,
                n_boot: r.boot_statistics.len(),
                failures: r.boot_failures,
            });
        }
        let rows = degree_tests.clone();
        out.write("degree_tests.csv", |w| {
            writeln!(w, "null_degree,alt_degree,statistic,p_value,n_boot,failures")?;
            for r in &rows {
                writeln!(w, "{},{},{},{},{},{}", r.null_degree, r.alt_degree, r.statistic, r.p_value, r.n_boot, r.failures)?;
            }
            Ok(())
        })?;
    }

    let t: Vec<f64> = stage.projections.iter().map(|p| p.t).collect();
    let mut correlations = Vec::new();
    let distances: Option<Vec<f64>> = session
        .meta()?
        .and_then(|m| stage.subset.iter().map(|&v| m.get(v).and_then(|r| r.distance)).collect());
    if let Some(delta) = distances {
        for method in CorrelationMethod::ALL {
            match correlation_test(&t, &delta, method, PValueMode::Analytic, session.cfg.seed) {
                Ok(r) => correlations.push(r),
                Err(e) => warnings.push(format!("{method} correlation skipped: {e}")),
            }
        }
        let rows = correlations.clone();
        out.write("correlation.csv", |w| {
            writeln!(w, "method,statistic,p_value,n")?;
            for r in &rows {
                writeln!(w, "{},{},{},{}", r.method, r.statistic, r.p_value, r.n)?;
            }
            Ok(())
        })?;
    }

    match semipar_model(session) {
        Ok(model) => {
            let json = model.to_json();
            out.write_json("semipar.json", &json)?;
        }
        Err(e) => warnings.push(format!("semiparametric model not assembled: {e}")),
    }
    if let Some(centroids) = type_centroids(session)? {
        out.write_json("type_centroids.json", &centroids)?;
        if let (Some(rc), Some(rt)) = (session.cfg.reference_curve.clone(), session.cfg.reference_centroids.clone()) {
            let text = fs::read_to_string(&rc).with_context(|| format!("reading {}", rc.display()))?;
            let reference = CurveJson::from_json(&text)?.into_params()?;
            let text = fs::read_to_string(&rt).with_context(|| format!("reading {}", rt.display()))?;
            let ref_centroids: BTreeMap<String, Vec<f64>> = serde_json::from_str(&text)?;
            let shared: Vec<&String> = centroids.keys().filter(|k| ref_centroids.contains_key(*k)).collect();
            if shared.is_empty() {
                bail!("no metadata types shared with the reference centroids");
            }
            let p = x.ncols();
            let src = DMatrix::from_fn(shared.len(), p, |i, j| centroids[shared[i]][j]);
            let dst = DMatrix::from_fn(shared.len(), p, |i, j| ref_centroids[shared[i]].get(j).copied().unwrap_or(f64::NAN));
            if dst.iter().any(|v| v.is_nan()) || reference.dim() != p {
                bail!("reference curve and centroids must live in R^{p}");
            }
            let w_rot = procrustes(&src, &dst);
            let aligned = &x * w_rot;
            let proj = project_all(&aligned, &reference);
            out.write("projections_reference.csv", |w| {
                writeln!(w, "vertex_id,t,distance")?;
                for (v, pr) in stage.subset.iter().zip(&proj) {
                    writeln!(w, "{v},{},{}", pr.t, pr.distance)?;
                }
                Ok(())
            })?;
        }
    }

    let summary = CurveSummary {
        subset: stage.subset.clone(),
        curve: stage.fit.params.clone(),
        loglik: stage.fit.loglik,
        t,
        degree_tests,
        correlations,
        warnings: warnings.clone(),
    };
    let mut m = Manifest::new("curve", &session.cfg);
    m.d_hat = Some(x.ncols());
    m.warnings = warnings;
    m.summary = json!({
        "subset_size": summary.subset.len(),
        "loglik": summary.loglik,
        "iterations": stage.fit.iterations,
        "converged": stage.fit.converged,
        "degree_tests": summary.degree_tests,
        "correlations": summary.correlations,
    });
    m.finish(&mut out)?;
    Ok(summary)
}

/// JSON form of a block model: `{rho, b, block_sizes}` with `b` row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmJson {
    pub rho: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    #[serde(default)]
    pub block_sizes: Option<Vec<usize>>,
}

impl SbmJson {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_params(self) -> Result<SbmParams> {
        let k = self.b.len();
        if self.b.iter().any(|r| r.len() != k) {
            bail!("invalid input: B must be square");
        }
        let flat: Vec<f64> = self.b.into_iter().flatten().collect();
        let p = SbmParams { rho: self.rho, b: DMatrix::from_row_slice(k, k, &flat), block_sizes: self.block_sizes };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub graph: DirectedGraph,
    pub labels: Vec<usize>,
    pub positions: Option<DMatrix<f64>>,
    /// Energy distance between the re-embedded subset and the original
    /// subset embedding, for schemes fitted to the input.
    pub energy: Option<f64>,
}

/// Latent positions for a block model fitted to `labels`, one row per vertex.
fn block_positions(g: &DirectedGraph, labels: &[usize]) -> Result<DMatrix<f64>> {
    let compact = Partition::from_names(&labels.iter().map(|l| l.to_string()).collect::<Vec<_>>()).0;
    let params = estimate_sbm(g, compact.labels())?;
    let x = params.latent_positions();
    Ok(x.select_rows(compact.labels()))
}

/// Latent positions for each scheme fitted to the input, indexed by vertex.
pub fn fitted_positions(session: &mut Session, scheme: Scheme) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let g = session.graph()?;
    match scheme {
        Scheme::TypeSbm => {
            let (truth, _) = session.truth()?.context("type-sbm needs vertex metadata")?;
            Ok((block_positions(&g, truth.labels())?, truth.labels().to_vec()))
        }
        Scheme::ClusterSbm => {
            let labels = session.clustering()?.labels.labels().to_vec();
            Ok((block_positions(&g, &labels)?, labels))
        }
        Scheme::FittedLsm => {
            let stage = session.curve()?.clone();
            let x = session.embedding()?.0.x_hat.clone();
            let groups: Vec<usize> = match session.subset_rule()? {
                Subset::Label(_) => session.truth()?.context("label subsets need metadata")?.0.labels().to_vec(),
                Subset::Clusters(_) => session.clustering()?.labels.labels().to_vec(),
            };
            let k = groups.iter().max().map_or(0, |m| m + 1);
            let means = group_means(&x, &groups, k);
            let mut pos = DMatrix::zeros(x.nrows(), x.ncols());
            for i in 0..x.nrows() {
                pos.set_row(i, &means[groups[i]].transpose());
            }
            for (v, p) in stage.subset.iter().zip(&stage.projections) {
                pos.set_row(*v, &stage.fit.params.mean_at(p.t).transpose());
            }
            Ok((pos, groups))
        }
        _ => bail!("scheme {scheme:?} is not fitted to the input"),
    }
}

pub fn simulate(session: &mut Session) -> Result<SimulateSummary> {
    let mut out = OutDir::create(&session.cfg.out_dir)?;
    let cfg = session.cfg.clone();
    let load_model = || -> Result<String> {
        let path = cfg.model.as_ref().context("this scheme needs --model PATH")?;
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    };
    let mut summary = match cfg.scheme {
        Scheme::BObserved => {
            let n = cfg.n.unwrap_or(MB_BLOCK_SIZES.iter().sum());
            let params = if n == MB_BLOCK_SIZES.iter().sum::<usize>() {
                SbmParams::b_observed().with_block_sizes(MB_BLOCK_SIZES.to_vec())?
            } else {
                SbmParams::synth_mb(n)
            };
            let s = sample_sbm(&params, n, cfg.seed)?;
            SimulateSummary { graph: s.graph, labels: s.labels, positions: None, energy: None }
        }
        Scheme::Sbm => {
            let params = SbmJson::from_json(&load_model()?)?.into_params()?;
            let n = match (cfg.n, &params.block_sizes) {
                (Some(n), _) => n,
                (None, Some(s)) => s.iter().sum(),
                (None, None) => bail!("--n is required when the block model has no block sizes"),
            };
            let s = sample_sbm(&params, n, cfg.seed)?;
            SimulateSummary { graph: s.graph, labels: s.labels, positions: None, energy: None }
        }
        Scheme::Semipar => {
            let model = SemiparJson::from_json(&load_model()?)?.into_model()?;
            let n = cfg.n.context("--n is required for the semipar scheme")?;
            let s = sample_lsm(&LsmSpec::from(&model), n, cfg.seed)?;
            SimulateSummary { graph: s.graph, labels: s.labels, positions: Some(s.positions), energy: None }
        }
        scheme => {
            let (positions, labels) = fitted_positions(session, scheme)?;
            let graph = sample_rdpg(&positions, cfg.seed)?;
            SimulateSummary { graph, labels, positions: Some(positions), energy: None }
        }
    };
    if matches!(cfg.scheme, Scheme::TypeSbm | Scheme::ClusterSbm | Scheme::FittedLsm) {
        match resampled_energy(session, &summary.graph) {
            Ok(e) => summary.energy = Some(e),
            Err(e) => eprintln!("warning: energy comparison skipped: {e}"),
        }
    }
    out.write("graph.csv", |w| Ok(write_edge_csv(&summary.graph, w)?))?;
    out.write("labels.csv", |w| write_labels("label", &summary.labels, w))?;
    if let Some(p) = &summary.positions {
        out.write("positions.csv", |w| write_positions(p, w))?;
    }
    let mut m = Manifest::new("simulate", &session.cfg);
    m.summary = json!({
        "scheme": cfg.scheme,
        "n": summary.graph.n(),
        "edges": summary.graph.edge_count(),
        "subset_energy_distance": summary.energy,
    });
    m.finish(&mut out)?;
    Ok(summary)
}

/// Embeds `resampled` like the input, aligns it to the input embedding and
/// returns the energy distance between the two subset point clouds.
pub fn resampled_energy(session: &mut Session, resampled: &DirectedGraph) -> Result<f64> {
    let subset = session.subset()?;
    let original = session.embedding()?.0.clone();
    let new = semipar::spectral::ase(resampled, original.d, session.cfg.augment)?;
    let aligned = align_signs(&new.x_hat, &original.x_hat)?;
    Ok(energy_distance(&aligned.select_rows(&subset), &original.x_hat.select_rows(&subset))?)
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: &'static str,
    pub weight_mode: WeightMode,
    pub d: usize,
    pub ari: f64,
}

pub fn ablate(session: &mut Session) -> Result<Vec<AblationRow>> {
    let mut out = OutDir::create(&session.cfg.out_dir)?;
    let (truth, names) = session.truth()?.context("ablate needs vertex metadata (--meta)")?;
    let raw = session.raw_graph()?.clone();
    let n = raw.n();
    let q_max = session.cfg.ablate_max.min(n - 1);
    let mut fixed = session.cfg.clone();
    fixed.k = Choice::Fixed(names.len());
    let fitter = Session::new(fixed)?;
    let mut rows = Vec::new();
    for mode in WeightMode::ALL {
        let g = raw.weight_transform(mode);
        let directed = dense_svd(&semipar::graph::augment_diagonal(&g, session.cfg.augment)?)?;
        let sym = dense_svd(&semipar::graph::augment_diagonal(&g.symmetrize(), session.cfg.augment)?)?;
        for q in 1..=q_max {
            let e = embedding_from_svd(&directed, q, session.cfg.augment)?;
            let es = embedding_from_svd(&sym, q, session.cfg.augment)?;
            let variants: [(&'static str, DMatrix<f64>); 4] = [
                ("both", e.x_hat.clone()),
                ("out", e.out_block()),
                ("in", e.in_block()),
                ("symmetrized", es.x_hat.clone()),
            ];
            for (variant, x) in variants {
                let ari = match fitter.cluster_matrix(&x) {
                    Ok(c) => partition_metrics(truth.labels(), c.labels.labels())?.ari,
                    Err(_) => f64::NAN,
                };
                rows.push(AblationRow { variant, weight_mode: mode, d: q, ari });
            }
        }
    }
    let table = rows.clone();
    out.write("ablation.csv", |w| {
        writeln!(w, "variant,weight_mode,d,ari")?;
        for r in &table {
            writeln!(w, "{},{},{},{}", r.variant, r.weight_mode, r.d, r.ari)?;
        }
        Ok(())
    })?;
    let mut m = Manifest::new("ablate", &session.cfg);
    m.k_hat = Some(names.len());
    m.summary = json!({ "rows": rows.len(), "max_singular_values": q_max });
    m.finish(&mut out)?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub embed: EmbedSummary,
    pub cluster: ClusterSummary,
    pub curve: Option<CurveSummary>,
    pub ablation: Option<Vec<AblationRow>>,
}

/// embed, cluster, then curve and ablate when the inputs allow it.
pub fn pipeline(session: &mut Session) -> Result<PipelineSummary> {
    let embed_s = embed(session)?;
    let cluster_s = cluster(session)?;
    let has_meta = session.truth()?.is_some();
    let curve_s = if session.cfg.subset.is_some() || has_meta { Some(curve(session)?) } else { None };
    let ablation = if has_meta && session.cfg.input.is_some() { Some(ablate(session)?) } else { None };
    let mut out = OutDir::create(&session.cfg.out_dir)?;
    let mut m = Manifest::new("pipeline", &session.cfg);
    m.d_hat = Some(embed_s.d_hat);
    m.q_hat = embed_s.q_hat;
    m.k_hat = Some(cluster_s.k_hat);
    m.summary = json!({
        "ari": cluster_s.metrics.map(|r| r.ari),
        "nmi": cluster_s.metrics.map(|r| r.nmi),
        "curve_subset": curve_s.as_ref().map(|c| c.subset.len()),
    });
    m.finish(&mut out)?;
    Ok(PipelineSummary { embed: embed_s, cluster: cluster_s, curve: curve_s, ablation })
}
