use std::io::Write;

use nalgebra::DMatrix;

use super::gmm::{gmm_em, CovFamily, GmmConfig, GmmFit, GmmInit};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BicRow {
    pub k: usize,
    pub family: CovFamily,
    pub loglik: f64,
    pub bic: f64,
    pub converged: bool,
    /// Set when every restart of this cell failed.
    pub error: Option<String>,
}

/// Best of `restarts` fits (seeds `seed + r`), ties to the lowest seed.
fn best_of(
    x: &DMatrix<f64>,
    k: usize,
    family: CovFamily,
    seed: u64,
    restarts: usize,
    cfg: &GmmConfig,
) -> Result<GmmFit> {
    let mut best: Option<GmmFit> = None;
    let mut err = None;
    for r in 0..restarts.max(1) {
        match gmm_em(x, k, family, GmmInit::KMeansPlusPlus, seed.wrapping_add(r as u64), cfg) {
            Ok(fit) => {
                if best.as_ref().map_or(true, |b| fit.loglik > b.loglik) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| err.unwrap_or_else(|| Error::Numeric("no restart ran".into())))
}

/// Fits every `(K, family)` cell and returns the BIC-maximizing fit together
/// with the full table. Failed cells are recorded, not fatal; the sweep only
/// fails when no cell succeeds. Ties keep the earlier cell.
pub fn select_k(
    x: &DMatrix<f64>,
    k_range: &[usize],
    families: &[CovFamily],
    seed: u64,
    restarts: usize,
    cfg: &GmmConfig,
) -> Result<(GmmFit, Vec<BicRow>)> {
    if k_range.is_empty() || families.is_empty() {
        return invalid("k_range and covariance families must be non-empty");
    }
    let mut table = Vec::new();
    let mut best: Option<GmmFit> = None;
    let mut last_err = None;
    for &k in k_range {
        for &family in families {
            match best_of(x, k, family, seed, restarts, cfg) {
                Ok(fit) => {
                    table.push(BicRow {
                        k,
                        family,
                        loglik: fit.loglik,
                        bic: fit.bic,
                        converged: fit.converged,
                        error: None,
                    });
                    if best.as_ref().map_or(true, |b| fit.bic > b.bic) {
                        best = Some(fit);
                    }
                }
                Err(e) => {
                    table.push(BicRow {
                        k,
                        family,
                        loglik: f64::NAN,
                        bic: f64::NAN,
                        converged: false,
                        error: Some(e.to_string()),
                    });
                    last_err = Some(e);
                }
            }
        }
    }
    match best {
        Some(b) => Ok((b, table)),
        None => Err(last_err.unwrap_or_else(|| Error::Numeric("model selection produced no fit".into()))),
    }
}

/// `K,family,loglik,bic,converged`
pub fn write_bic_table<W: Write>(rows: &[BicRow], mut out: W) -> Result<()> {
    writeln!(out, "K,family,loglik,bic,converged")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.k, r.family, r.loglik, r.bic, r.converged)?;
    }
    Ok(())
}
