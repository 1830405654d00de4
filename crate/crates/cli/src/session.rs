//! Lazily computed state shared by the commands of one invocation, so the
//! pipeline embeds and clusters once.

use std::fs;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};

use semipar::curve::{fit_curve, project_all, CurveFit, CurveFitConfig, CurveProjection};
use semipar::graph::{parse_vertex_csv, read_graph, DirectedGraph, VertexMeta};
use semipar::linalg::{column_means, covariance};
use semipar::mixture::{hard_labels, select_k, BicRow, GmmConfig, GmmFit, Partition};
use semipar::spectral::{default_scree_count, embed_auto, Embedding, ScreeResult, VarianceModel};

use crate::config::{Choice, PipelineConfig, Subset};

#[derive(Debug, Clone)]
pub struct Clustering {
    pub fit: GmmFit,
    pub labels: Partition,
    pub bic: Vec<BicRow>,
    /// Best fit for every K tried, in increasing K.
    pub per_k: Vec<GmmFit>,
}

#[derive(Debug, Clone)]
pub struct CurveStage {
    /// Vertex ids carrying the curve, ascending.
    pub subset: Vec<usize>,
    pub fit: CurveFit,
    pub projections: Vec<CurveProjection>,
}

pub struct Session {
    pub cfg: PipelineConfig,
    raw: Option<DirectedGraph>,
    meta: Option<Vec<VertexMeta>>,
    embedding: Option<(Embedding, Option<ScreeResult>)>,
    clustering: Option<Clustering>,
    curve: Option<CurveStage>,
}

/// Eigenvalue-clipped sample covariance, matching the mixture fits' floor.
pub fn regularized_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let cov = covariance(x);
    let p = cov.nrows();
    let floor = (1e-6 * cov.trace() / p as f64).max(1e-12);
    let eig = cov.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Mean of the rows with each label; labels must be `0..k`.
pub fn group_means(x: &DMatrix<f64>, labels: &[usize], k: usize) -> Vec<DVector<f64>> {
    (0..k)
        .map(|g| {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == g).collect();
            column_means(&x.select_rows(&rows))
        })
        .collect()
}

impl Session {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, raw: None, meta: None, embedding: None, clustering: None, curve: None })
    }

    /// The input graph before any weight transform.
    pub fn raw_graph(&mut self) -> Result<&DirectedGraph> {
        if self.raw.is_none() {
            let input = self.cfg.input.as_ref().context("an input edge list (--input) is required")?;
            let edges = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            let vertices = match &self.cfg.meta {
                Some(m) => Some(fs::read_to_string(m).with_context(|| format!("reading {}", m.display()))?),
                None => None,
            };
            let g = read_graph(&edges, vertices.as_deref())?;
            if g.edge_count() == 0 {
                bail!("invalid input: graph {} has no edges", input.display());
            }
            self.raw = Some(g);
        }
        Ok(self.raw.as_ref().expect("loaded above"))
    }

    /// The analysed graph: the input with the configured weight transform.
    pub fn graph(&mut self) -> Result<DirectedGraph> {
        let mode = self.cfg.weights;
        Ok(self.raw_graph()?.weight_transform(mode))
    }

    pub fn meta(&mut self) -> Result<Option<&[VertexMeta]>> {
        if self.meta.is_none() {
            if self.cfg.input.is_some() {
                self.meta = self.raw_graph()?.meta().map(|m| m.to_vec());
            } else if let Some(path) = &self.cfg.meta {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                self.meta = Some(parse_vertex_csv(&text)?);
            }
        }
        Ok(self.meta.as_deref())
    }

    /// Ground-truth partition from the metadata types, with class names.
    pub fn truth(&mut self) -> Result<Option<(Partition, Vec<String>)>> {
        Ok(self.meta()?.map(|m| {
            let names: Vec<&str> = m.iter().map(|v| v.type_label.as_str()).collect();
            Partition::from_names(&names)
        }))
    }

    /// Embeds a graph with the configured dimension rule.
    pub fn embed_graph(&self, g: &DirectedGraph, augment: bool) -> Result<(Embedding, ScreeResult)> {
        let n = g.n();
        if n < 3 {
            bail!("invalid input: embedding needs at least 3 vertices, got {n}");
        }
        let p = self.cfg.scree_count.unwrap_or_else(|| default_scree_count(n)).clamp(3, n);
        Ok(embed_auto(g, augment, p, self.cfg.fixed_q(), VarianceModel::Separate)?)
    }

    pub fn embedding(&mut self) -> Result<(&Embedding, Option<&ScreeResult>)> {
        if self.embedding.is_none() {
            let computed = match &self.cfg.embedding {
                Some(path) => {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    (Embedding::read_csv(&text, self.cfg.augment)?, None)
                }
                None => {
                    let g = self.graph()?;
                    let (e, s) = self.embed_graph(&g, self.cfg.augment)?;
                    (e, Some(s))
                }
            };
            self.embedding = Some(computed);
        }
        let (e, s) = self.embedding.as_ref().expect("computed above");
        Ok((e, s.as_ref()))
    }

    /// Mixture model selection on `x`: one sweep over the covariance
    /// families per K, best BIC overall (ties to the smaller K).
    pub fn cluster_matrix(&self, x: &DMatrix<f64>) -> Result<Clustering> {
        let n = x.nrows();
        let ks: Vec<usize> = match self.cfg.k {
            Choice::Fixed(k) => vec![k],
            Choice::Auto => (1..=self.cfg.k_max.min(n.saturating_sub(1)).max(1)).collect(),
        };
        let mut bic = Vec::new();
        let mut per_k = Vec::new();
        let mut first_err = None;
        for &k in &ks {
            match select_k(x, &[k], &self.cfg.families, self.cfg.seed, self.cfg.restarts, &GmmConfig::default()) {
                Ok((fit, rows)) => {
                    bic.extend(rows);
                    per_k.push(fit);
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        let best = per_k
            .iter()
            .fold(None::<&GmmFit>, |acc, f| match acc {
                Some(b) if b.bic >= f.bic => Some(b),
                _ => Some(f),
            })
            .cloned();
        let fit = match (best, first_err) {
            (Some(f), _) => f,
            (None, Some(e)) => return Err(e.into()),
            (None, None) => bail!("no mixture model was fitted"),
        };
        let labels = hard_labels(&fit);
        Ok(Clustering { fit, labels, bic, per_k })
    }

    pub fn clustering(&mut self) -> Result<&Clustering> {
        if self.clustering.is_none() {
            let x = self.embedding()?.0.x_hat.clone();
            self.clustering = Some(self.cluster_matrix(&x)?);
        }
        Ok(self.clustering.as_ref().expect("computed above"))
    }

    /// The configured subset, or `label=KC` when metadata is present.
    pub fn subset_rule(&mut self) -> Result<Subset> {
        if let Some(s) = &self.cfg.subset {
            return Ok(s.clone());
        }
        if self.meta()?.is_some() {
            return Ok(Subset::Label("KC".into()));
        }
        bail!("no curve subset: pass --subset label=NAME or --subset clusters=I,J,...")
    }

    pub fn subset(&mut self) -> Result<Vec<usize>> {
        let ids = match self.subset_rule()? {
            Subset::Label(label) => {
                let meta = self.meta()?.context("--subset label=... needs vertex metadata (--meta)")?;
                meta.iter().filter(|m| m.type_label == label).map(|m| m.id).collect::<Vec<_>>()
            }
            Subset::Clusters(ids) => {
                let labels = self.clustering()?.labels.labels().to_vec();
                (0..labels.len()).filter(|&i| ids.contains(&labels[i])).collect()
            }
        };
        Ok(ids)
    }

    pub fn curve_config(&self) -> CurveFitConfig {
        CurveFitConfig {
            k: self.cfg.curve_k,
            degree: self.cfg.curve_degree,
            restarts: self.cfg.curve_restarts,
            ..Default::default()
        }
    }

    pub fn curve(&mut self) -> Result<&CurveStage> {
        if self.curve.is_none() {
            let subset = self.subset()?;
            let k = self.cfg.curve_k;
            if subset.len() < k {
                bail!("invalid input: curve subset has {} vertices, fewer than the grid size K = {k}", subset.len());
            }
            let x = self.embedding()?.0.select_rows(&subset);
            let fit = fit_curve(&x, &self.curve_config(), self.cfg.seed, &[])?;
            let projections = project_all(&x, &fit.params);
            self.curve = Some(CurveStage { subset, fit, projections });
        }
        Ok(self.curve.as_ref().expect("computed above"))
    }
}
