//! Adjacency spectral embedding of directed graphs and scree-based
//! dimension selection.
//!
//! The embedding of a vertex is `[out | in]`: the row of `U_d S_d^{1/2}`
//! followed by the row of `V_d S_d^{1/2}`. Singular vectors are sign-fixed
//! (largest-magnitude entry of each left vector positive) so the dense path
//! is deterministic; comparisons across graphs still need sign or rotation
//! alignment.

mod svd;
mod svt;

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::graph::{augment_diagonal, DirectedGraph};

pub use svd::{dense_svd, randomized_svd, truncated_svd, Svd, DENSE_LIMIT};
pub use svt::{default_scree_count, svt_profile_likelihood, ScreeResult, VarianceModel};

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `n × 2d`, row `i` is `[out_i | in_i]`.
    pub x_hat: DMatrix<f64>,
    pub d: usize,
    /// Every singular value that was computed, descending.
    pub singular_values: Vec<f64>,
    pub augmented: bool,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.x_hat.nrows()
    }

    pub fn out_block(&self) -> DMatrix<f64> {
        self.x_hat.columns(0, self.d).into_owned()
    }

    pub fn in_block(&self) -> DMatrix<f64> {
        self.x_hat.columns(self.d, self.d).into_owned()
    }

    /// `out · inᵀ`, the rank-`d` reconstruction.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.out_block() * self.in_block().transpose()
    }

    /// Rows restricted to `rows`.
    pub fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        self.x_hat.select_rows(rows)
    }

    /// Embedding CSV: `vertex_id,out_1..out_d,in_1..in_d`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["vertex_id".to_string()];
        header.extend((1..=self.d).map(|k| format!("out_{k}")));
        header.extend((1..=self.d).map(|k| format!("in_{k}")));
        writeln!(out, "{}", header.join(","))?;
        for (i, row) in self.x_hat.row_iter().enumerate() {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{i},{}", vals.join(","))?;
        }
        Ok(())
    }

    /// Parses the CSV written by [`Embedding::write_csv`]. Singular values
    /// are not stored in that format and come back empty.
    pub fn read_csv(text: &str, augmented: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| crate::Error::Parse { line: 1, message: e.to_string() })?.clone();
        let width = headers.len();
        if width < 3 || (width - 1) % 2 != 0 || &headers[0] != "vertex_id" {
            return invalid("embedding CSV header must be vertex_id,out_1..out_d,in_1..in_d");
        }
        let d = (width - 1) / 2;
        let mut values = Vec::new();
        let mut n = 0;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| crate::Error::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let id: usize = rec[0]
                .parse()
                .map_err(|_| crate::Error::Parse { line, message: format!("bad vertex id `{}`", &rec[0]) })?;
            if id != n {
                return Err(crate::Error::Parse { line, message: format!("expected vertex id {n}, found {id}") });
            }
            for f in rec.iter().skip(1) {
                let v: f64 = f
                    .parse()
                    .map_err(|_| crate::Error::Parse { line, message: format!("bad value `{f}`") })?;
                values.push(v);
            }
            n += 1;
        }
        Ok(Self { x_hat: DMatrix::from_row_slice(n, 2 * d, &values), d, singular_values: Vec::new(), augmented })
    }
}

/// Builds the embedding from a decomposition of the (augmented) matrix.
pub fn embedding_from_svd(svd: &Svd, d: usize, augmented: bool) -> Result<Embedding> {
    if d == 0 || d > svd.rank() {
        return invalid(format!("embedding dimension {d} out of range 1..={}", svd.rank()));
    }
    let n = svd.u.nrows();
    let mut x_hat = DMatrix::zeros(n, 2 * d);
    for k in 0..d {
        let scale = svd.s[k].sqrt();
        for i in 0..n {
            x_hat[(i, k)] = svd.u[(i, k)] * scale;
            x_hat[(i, d + k)] = svd.v[(i, k)] * scale;
        }
    }
    Ok(Embedding { x_hat, d, singular_values: svd.s.clone(), augmented })
}

/// ASE of an arbitrary square matrix.
pub fn ase_matrix(a: &DMatrix<f64>, d: usize, augmented: bool) -> Result<Embedding> {
    let n = a.nrows();
    if d == 0 || d + 1 > n {
        return invalid(format!("embedding dimension {d} must lie in 1..={}", n.saturating_sub(1)));
    }
    let svd = if n <= DENSE_LIMIT { dense_svd(a)? } else { randomized_svd(a, d, 0, 10, 2)? };
    embedding_from_svd(&svd, d, augmented)
}

/// Adjacency spectral embedding with `d` singular values (so `2d` columns).
pub fn ase(g: &DirectedGraph, d: usize, augment: bool) -> Result<Embedding> {
    let a = augment_diagonal(g, augment)?;
    ase_matrix(&a, d, augment)
}

/// Top-`p` singular values of the (augmented) adjacency matrix.
pub fn scree(g: &DirectedGraph, augment: bool, p: usize) -> Result<Vec<f64>> {
    let n = g.n();
    if p == 0 || p > n {
        return invalid(format!("scree count {p} must lie in 1..={n}"));
    }
    let a = augment_diagonal(g, augment)?;
    Ok(truncated_svd(&a, p)?.s)
}

/// One decomposition serving both dimension selection and the embedding:
/// SVT over the top `p` singular values chooses `q`, and the embedding uses
/// `d_override` if given, else `q`.
pub fn embed_auto(
    g: &DirectedGraph,
    augment: bool,
    p: usize,
    d_override: Option<usize>,
    model: VarianceModel,
) -> Result<(Embedding, ScreeResult)> {
    let n = g.n();
    if p < 3 || p > n {
        return invalid(format!("scree count {p} must lie in 3..={n}"));
    }
    let a = augment_diagonal(g, augment)?;
    let svd = if n <= DENSE_LIMIT { dense_svd(&a)? } else { randomized_svd(&a, p, 0, 10, 2)? };
    let values: Vec<f64> = svd.s.iter().take(p).copied().collect();
    let scree = svt_profile_likelihood(&values, None, model)?;
    let d = d_override.unwrap_or(scree.chosen_q);
    if d == 0 || d + 1 > n {
        return invalid(format!("embedding dimension {d} must lie in 1..={}", n - 1));
    }
    Ok((embedding_from_svd(&svd, d, augment)?, scree))
}

/// Flips each singular dimension of `x` (columns `k` and `d + k` together,
/// which leaves every out/in inner product unchanged) to best agree with
/// `reference`, matching rows by index.
pub fn align_signs(x: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.shape() != reference.shape() {
        return invalid(format!("cannot align a {:?} embedding to a {:?} one", x.shape(), reference.shape()));
    }
    if x.ncols() % 2 != 0 {
        return invalid("embedding must have an even number of columns");
    }
    let d = x.ncols() / 2;
    let mut out = x.clone();
    for k in 0..d {
        let dot = x.column(k).dot(&reference.column(k)) + x.column(d + k).dot(&reference.column(d + k));
        if dot < 0.0 {
            out.column_mut(k).neg_mut();
            out.column_mut(d + k).neg_mut();
        }
    }
    Ok(out)
}
