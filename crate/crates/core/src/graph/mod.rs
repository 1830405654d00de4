//! Directed graph representation, weight transforms and diagonal augmentation.
//!
//! Graphs are hollow (no self-loops) and simple: at most one weighted edge
//! record per ordered pair. Edges are kept sorted by `(source, target)` so
//! that serialization is canonical.

mod io;
mod sample;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use io::{parse_edge_csv, parse_vertex_csv, read_graph, write_edge_csv, write_vertex_csv, GraphJson};
pub use sample::{
    balanced_sizes, estimate_sbm, sample_lsm, sample_rdpg, sample_sbm, LsmAtom, LsmSample, LsmSpec, SbmParams, SbmSample, MB_BLOCK_SIZES,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Optional per-vertex annotations. None of these are used for estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexMeta {
    pub id: usize,
    #[serde(rename = "type")]
    pub type_label: String,
    pub claws: Option<u32>,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<Edge>,
    meta: Option<Vec<VertexMeta>>,
}

/// How edge weights enter the adjacency matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WeightMode {
    /// Every present edge becomes 1.
    #[default]
    #[serde(rename = "binary", alias = "binarize")]
    Binarize,
    /// Raw weights.
    #[serde(rename = "raw", alias = "identity")]
    Identity,
    /// `w' = ln(1 + w)`.
    #[serde(rename = "log1p")]
    Log1p,
}

impl WeightMode {
    pub const ALL: [WeightMode; 3] = [WeightMode::Binarize, WeightMode::Identity, WeightMode::Log1p];
}

impl std::fmt::Display for WeightMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightMode::Binarize => "binary",
            WeightMode::Identity => "raw",
            WeightMode::Log1p => "log1p",
        })
    }
}

impl WeightMode {
    pub fn apply(self, w: f64) -> f64 {
        match self {
            WeightMode::Binarize => {
                if w > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            WeightMode::Identity => w,
            WeightMode::Log1p => w.ln_1p(),
        }
    }
}

impl std::str::FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "binary" | "binarize" => Ok(WeightMode::Binarize),
            "raw" | "identity" => Ok(WeightMode::Identity),
            "log1p" => Ok(WeightMode::Log1p),
            other => Err(format!("unknown weight mode `{other}` (expected binary, raw or log1p)")),
        }
    }
}

impl DirectedGraph {
    /// Builds a graph from `(source, target, weight)` triples.
    ///
    /// Repeated ordered pairs have their weights summed. Pairs whose summed
    /// weight is zero are dropped. Self-loops, out-of-range endpoints and
    /// negative or non-finite weights are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut rows: Vec<(usize, usize, f64)> = Vec::new();
        for (s, t, w) in edges {
            if s >= n || t >= n {
                return invalid(format!("edge ({s},{t}) references a vertex outside 0..{n}"));
            }
            if s == t {
                return invalid(format!("self-loop on vertex {s}"));
            }
            if !w.is_finite() || w < 0.0 {
                return invalid(format!("edge ({s},{t}) has invalid weight {w}"));
            }
            rows.push((s, t, w));
        }
        // Stable sort keeps duplicate rows in input order, so their sum is
        // accumulated deterministically.
        rows.sort_by_key(|&(s, t, _)| (s, t));
        let mut edges: Vec<Edge> = Vec::with_capacity(rows.len());
        for (source, target, weight) in rows {
            match edges.last_mut() {
                Some(e) if e.source == source && e.target == target => e.weight += weight,
                _ => edges.push(Edge { source, target, weight }),
            }
        }
        if let Some(e) = edges.iter().find(|e| !e.weight.is_finite()) {
            return invalid(format!("summed weight of edge ({},{}) overflows", e.source, e.target));
        }
        edges.retain(|e| e.weight > 0.0);
        Ok(Self { n, edges, meta: None })
    }

    /// Builds an unweighted graph from a dense 0/1 (or weighted) matrix; the
    /// diagonal is ignored.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return invalid("adjacency matrix must be square");
        }
        let n = a.nrows();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && a[(i, j)] != 0.0 {
                    edges.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_edges(n, edges)
    }

    pub fn with_meta(mut self, meta: Vec<VertexMeta>) -> Result<Self> {
        if meta.len() != self.n {
            return invalid(format!(
                "vertex metadata has {} rows but the graph has {} vertices",
                meta.len(),
                self.n
            ));
        }
        for (i, m) in meta.iter().enumerate() {
            if m.id != i {
                return invalid(format!("vertex metadata row {i} carries id {}", m.id));
            }
        }
        self.meta = Some(meta);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn meta(&self) -> Option<&[VertexMeta]> {
        self.meta.as_deref()
    }

    pub fn weight(&self, source: usize, target: usize) -> f64 {
        self.edges
            .binary_search_by(|e| (e.source, e.target).cmp(&(source, target)))
            .map(|i| self.edges[i].weight)
            .unwrap_or(0.0)
    }

    /// Maps every edge weight through `mode`; edges mapped to zero vanish.
    pub fn weight_transform(&self, mode: WeightMode) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge { weight: mode.apply(e.weight), ..*e })
            .filter(|e| e.weight > 0.0)
            .collect();
        Self { n: self.n, edges, meta: self.meta.clone() }
    }

    /// Entrywise `max(A, Aᵀ)`.
    pub fn symmetrize(&self) -> Self {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in &self.edges {
            for key in [(e.source, e.target), (e.target, e.source)] {
                let w = acc.entry(key).or_insert(0.0);
                *w = w.max(e.weight);
            }
        }
        let edges = acc
            .into_iter()
            .map(|((source, target), weight)| Edge { source, target, weight })
            .collect();
        Self { n: self.n, edges, meta: self.meta.clone() }
    }

    /// Weighted out-degree (row sums).
    pub fn out_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            d[e.source] += e.weight;
        }
        d
    }

    /// Weighted in-degree (column sums).
    pub fn in_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for e in &self.edges {
            d[e.target] += e.weight;
        }
        d
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.source, e.target)] = e.weight;
        }
        a
    }

    /// Indices of vertices whose metadata type equals `label`.
    pub fn vertices_with_type(&self, label: &str) -> Vec<usize> {
        self.meta
            .iter()
            .flatten()
            .filter(|m| m.type_label == label)
            .map(|m| m.id)
            .collect()
    }
}

/// Dense adjacency with the diagonal optionally replaced by
/// `(out_degree + in_degree) / (2 (n - 1))`.
pub fn augment_diagonal(g: &DirectedGraph, enabled: bool) -> Result<DMatrix<f64>> {
    let n = g.n();
    if n < 2 {
        return invalid(format!("diagonal augmentation needs at least 2 vertices, got {n}"));
    }
    let mut a = g.adjacency();
    if enabled {
        let out = g.out_degrees();
        let inn = g.in_degrees();
        let denom = 2.0 * (n as f64 - 1.0);
        for i in 0..n {
            a[(i, i)] = (out[i] + inn[i]) / denom;
        }
    }
    Ok(a)
}
