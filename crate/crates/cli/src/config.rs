//! Run configuration shared by every command. A JSON file supplies the base
//! values and command-line flags override individual fields.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use semipar::graph::WeightMode;
use semipar::mixture::CovFamily;

/// `auto` or a fixed count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Choice {
    #[default]
    Auto,
    Fixed(usize),
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Choice::Auto),
            n => n.parse().map(Choice::Fixed).map_err(|_| format!("expected `auto` or a count, got `{n}`")),
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Auto => f.write_str("auto"),
            Choice::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl Serialize for Choice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Choice::Auto => s.serialize_str("auto"),
            Choice::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Choice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(Choice::Fixed(n)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Which vertices carry the curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subset {
    /// Vertices whose metadata type equals the label.
    Label(String),
    /// Vertices assigned to any of these mixture components.
    Clusters(Vec<usize>),
}

impl FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (key, value) = s.split_once('=').ok_or_else(|| format!("expected label=NAME or clusters=I,J,..., got `{s}`"))?;
        match key.trim() {
            "label" if !value.trim().is_empty() => Ok(Subset::Label(value.trim().to_string())),
            "clusters" => {
                let ids = value
                    .split(',')
                    .map(|v| v.trim().parse::<usize>().map_err(|_| format!("bad cluster id `{v}`")))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                if ids.is_empty() {
                    return Err("no cluster ids given".into());
                }
                Ok(Subset::Clusters(ids))
            }
            _ => Err(format!("expected label=NAME or clusters=I,J,..., got `{s}`")),
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subset::Label(l) => write!(f, "label={l}"),
            Subset::Clusters(ids) => {
                let ids: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                write!(f, "clusters={}", ids.join(","))
            }
        }
    }
}

impl Serialize for Subset {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Subset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Generative model for `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// The four-block mushroom body matrix.
    #[default]
    BObserved,
    /// Block model read from `model` (JSON `{rho, b, block_sizes}`).
    Sbm,
    /// Atoms plus curve read from `model`.
    Semipar,
    /// Block model estimated from the metadata types of the input graph.
    TypeSbm,
    /// Block model estimated from the mixture clusters of the input graph.
    ClusterSbm,
    /// Latent positions from the fitted curve (subset) and type or cluster
    /// centroids (everything else).
    FittedLsm,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            format!("unknown scheme `{s}` (expected b-observed, sbm, semipar, type-sbm, cluster-sbm or fitted-lsm)")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    /// Saved embedding CSV; when set, clustering and curve fitting use it
    /// instead of embedding `input`.
    pub embedding: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Total embedding dimension (twice the number of singular values).
    pub d: Choice,
    pub k: Choice,
    pub k_max: usize,
    pub families: Vec<CovFamily>,
    pub restarts: usize,
    pub augment: bool,
    pub weights: WeightMode,
    /// Singular values fed to the elbow search; `⌈n/4⌉` when absent.
    pub scree_count: Option<usize>,
    pub subset: Option<Subset>,
    pub curve_degree: usize,
    pub curve_k: usize,
    pub curve_restarts: usize,
    /// Bootstrap replicates for the curve-degree tests; 0 skips them.
    pub n_boot: usize,
    pub baselines: bool,
    pub scheme: Scheme,
    pub model: Option<PathBuf>,
    pub n: Option<usize>,
    /// Largest number of singular values swept by `ablate`.
    pub ablate_max: usize,
    /// Curve JSON and type-centroid JSON from another run; projections onto
    /// that curve are written after aligning on shared type centroids.
    pub reference_curve: Option<PathBuf>,
    pub reference_centroids: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            meta: None,
            embedding: None,
            out_dir: PathBuf::from("out"),
            seed: 0,
            d: Choice::Auto,
            k: Choice::Auto,
            k_max: 10,
            families: vec![CovFamily::Full, CovFamily::Spherical],
            restarts: 10,
            augment: true,
            weights: WeightMode::Binarize,
            scree_count: None,
            subset: None,
            curve_degree: 2,
            curve_k: 7,
            curve_restarts: 10,
            n_boot: 99,
            baselines: true,
            scheme: Scheme::BObserved,
            model: None,
            n: None,
            ablate_max: 8,
            reference_curve: None,
            reference_centroids: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).context("invalid configuration JSON")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Choice::Fixed(d) = self.d {
            if d == 0 || d % 2 != 0 {
                bail!("--d must be a positive even number (out and in halves), got {d}");
            }
        }
        if self.k == Choice::Fixed(0) {
            bail!("--k must be positive");
        }
        if self.k_max == 0 {
            bail!("k_max must be positive");
        }
        if self.families.is_empty() {
            bail!("at least one covariance family is required");
        }
        if !(1..=3).contains(&self.curve_degree) {
            bail!("--curve-degree must be 1, 2 or 3, got {}", self.curve_degree);
        }
        if self.curve_k < 3 {
            bail!("--curve-k must be at least 3, got {}", self.curve_k);
        }
        if self.n_boot > 0 && self.n_boot < 99 {
            bail!("n_boot must be 0 (skip) or at least 99, got {}", self.n_boot);
        }
        Ok(())
    }

    /// Number of singular values implied by a fixed `d`.
    pub fn fixed_q(&self) -> Option<usize> {
        match self.d {
            Choice::Auto => None,
            Choice::Fixed(d) => Some(d / 2),
        }
    }
}
