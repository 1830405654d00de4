use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use semipar::graph::WeightMode;
use semipar_cli::commands;
use semipar_cli::{Choice, PipelineConfig, Scheme, Session, Subset};

#[derive(Parser)]
#[command(name = "semipar", version, about = "Spectral modeling of directed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adjacency spectral embedding with elbow-selected dimension.
    Embed(Common),
    /// Gaussian mixture clustering of the embedding with BIC selection.
    Cluster(Common),
    /// Curve fit, projections and degree tests on a vertex subset.
    Curve(Common),
    /// Sample a graph from a block model, a fitted model or a saved model.
    Simulate(Common),
    /// Clustering accuracy across embedding variants and weightings.
    Ablate(Common),
    /// embed, cluster, curve and ablate in one run.
    Pipeline(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Edge list CSV (`source,target[,weight]`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Vertex table CSV (`id,type[,claws][,distance]`).
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Saved embedding CSV to use instead of embedding the input.
    #[arg(long)]
    embedding: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total embedding dimension (even) or `auto`.
    #[arg(long)]
    d: Option<Choice>,
    /// Mixture components or `auto`.
    #[arg(long)]
    k: Option<Choice>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long, overrides_with = "no_augment")]
    augment: bool,
    #[arg(long, overrides_with = "augment")]
    no_augment: bool,
    /// binary, raw or log1p.
    #[arg(long)]
    weights: Option<WeightMode>,
    #[arg(long)]
    scree_count: Option<usize>,
    #[arg(long)]
    curve_degree: Option<usize>,
    #[arg(long)]
    curve_k: Option<usize>,
    /// `label=NAME` or `clusters=I,J,...`.
    #[arg(long)]
    subset: Option<Subset>,
    /// Bootstrap replicates for degree tests (0 skips them).
    #[arg(long)]
    n_boot: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// b-observed, sbm, semipar, type-sbm, cluster-sbm or fitted-lsm.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Model JSON for the sbm and semipar schemes.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Vertex count for simulation.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reference_curve: Option<PathBuf>,
    #[arg(long)]
    reference_centroids: Option<PathBuf>,
    /// Skip the k-means and no-augmentation baselines.
    #[arg(long)]
    no_baselines: bool,
}

impl Common {
    fn into_config(self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v.into(); })*
            };
        }
        set!(out_dir, seed, d, k, k_max, weights, curve_degree, curve_k, n_boot, restarts, scheme);
        macro_rules! set_opt {
            ($($field:ident),*) => {
                $(if self.$field.is_some() { cfg.$field = self.$field; })*
            };
        }
        set_opt!(input, meta, embedding, scree_count, subset, model, n, reference_curve, reference_centroids);
        if self.augment {
            cfg.augment = true;
        }
        if self.no_augment {
            cfg.augment = false;
        }
        if self.no_baselines {
            cfg.baselines = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    let (common, verb) = match cli.command {
        Command::Embed(c) => (c, "embed"),
        Command::Cluster(c) => (c, "cluster"),
        Command::Curve(c) => (c, "curve"),
        Command::Simulate(c) => (c, "simulate"),
        Command::Ablate(c) => (c, "ablate"),
        Command::Pipeline(c) => (c, "pipeline"),
    };
    let mut session = Session::new(common.into_config()?)?;
    match verb {
        "embed" => {
            let s = commands::embed(&mut session)?;
            println!("d_hat={}", s.d_hat);
        }
        "cluster" => {
            let s = commands::cluster(&mut session)?;
            println!("K_hat={} family={}", s.k_hat, s.family);
            if let Some(m) = s.metrics {
                println!("ari={:.4} nmi={:.4} vi={:.4} jaccard={:.4}", m.ari, m.nmi, m.vi, m.jaccard);
            }
        }
        "curve" => {
            let s = commands::curve(&mut session)?;
            println!("subset={} loglik={:.4}", s.subset.len(), s.loglik);
            for r in &s.correlations {
                println!("{} {:.4} p={:.3e}", r.method, r.statistic, r.p_value);
            }
        }
        "simulate" => {
            let s = commands::simulate(&mut session)?;
            println!("n={} edges={}", s.graph.n(), s.graph.edge_count());
        }
        "ablate" => {
            let rows = commands::ablate(&mut session)?;
            println!("rows={}", rows.len());
        }
        _ => {
            let s = commands::pipeline(&mut session)?;
            println!("d_hat={} K_hat={}", s.embed.d_hat, s.cluster.k_hat);
        }
    }
    println!("outputs written to {}", session.cfg.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
