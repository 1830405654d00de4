use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};

/// Denominator used to normalize mutual information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmiNormalization {
    /// `(H(a) + H(b)) / 2`.
    #[default]
    Arithmetic,
    /// `sqrt(H(a) H(b))`.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub ari: f64,
    pub nmi: f64,
    /// Variation of information in nats.
    pub vi: f64,
    /// `1 / vi`; infinite for identical partitions.
    pub inv_vi: f64,
    pub jaccard: f64,
}

/// Maps labels to `0..k` by ascending label value.
fn compact(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let sorted: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<usize, usize> = sorted.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    (labels.iter().map(|l| index[l]).collect(), sorted)
}

/// Contingency table between two labelings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    /// Distinct labels of the first partition, ascending; one per row.
    pub row_labels: Vec<usize>,
    /// Distinct labels of the second partition, ascending; one per column.
    pub col_labels: Vec<usize>,
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        (0..self.col_labels.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// CSV with one row per first-partition label. `row_names`, when given,
    /// replaces the numeric row labels (e.g. neuron type names).
    pub fn write_csv<W: Write>(&self, row_names: Option<&[String]>, mut out: W) -> Result<()> {
        let header: Vec<String> = self.col_labels.iter().map(|c| format!("cluster_{c}")).collect();
        writeln!(out, "label,{}", header.join(","))?;
        for (i, row) in self.counts.iter().enumerate() {
            let name = match row_names.and_then(|n| n.get(self.row_labels[i])) {
                Some(s) => s.clone(),
                None => self.row_labels[i].to_string(),
            };
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            writeln!(out, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub fn confusion_matrix(a: &[usize], b: &[usize]) -> Result<Confusion> {
    if a.len() != b.len() {
        return invalid(format!("partitions have lengths {} and {}", a.len(), b.len()));
    }
    let (ca, row_labels) = compact(a);
    let (cb, col_labels) = compact(b);
    let mut counts = vec![vec![0usize; col_labels.len()]; row_labels.len()];
    for (&i, &j) in ca.iter().zip(&cb) {
        counts[i][j] += 1;
    }
    Ok(Confusion { row_labels, col_labels, counts })
}

fn pairs(m: usize) -> f64 {
    (m * m.saturating_sub(1) / 2) as f64
}

fn entropy(sizes: &[usize], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn partition_metrics(a: &[usize], b: &[usize]) -> Result<MetricReport> {
    partition_metrics_with(a, b, NmiNormalization::Arithmetic)
}

pub fn partition_metrics_with(a: &[usize], b: &[usize], norm: NmiNormalization) -> Result<MetricReport> {
    if a.len() < 2 {
        return invalid("partitions need at least two elements");
    }
    let table = confusion_matrix(a, b)?;
    let n = a.len() as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();

    let together_both: f64 = table.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let together_a: f64 = rows.iter().map(|&c| pairs(c)).sum();
    let together_b: f64 = cols.iter().map(|&c| pairs(c)).sum();
    let expected = together_a * together_b / pairs(a.len());
    let max = 0.5 * (together_a + together_b);
    let ari = if max == expected { 1.0 } else { (together_both - expected) / (max - expected) };

    let ha = entropy(&rows, n);
    let hb = entropy(&cols, n);
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (c * n / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    let mi = mi.max(0.0);
    let nmi = match norm {
        _ if ha == 0.0 && hb == 0.0 => 1.0,
        NmiNormalization::Arithmetic => mi / (0.5 * (ha + hb)),
        NmiNormalization::Geometric if ha == 0.0 || hb == 0.0 => 0.0,
        NmiNormalization::Geometric => mi / (ha * hb).sqrt(),
    }
    .clamp(0.0, 1.0);
    let vi = (ha + hb - 2.0 * mi).max(0.0);

    let union = together_a + together_b - together_both;
    let jaccard = if union == 0.0 { 1.0 } else { together_both / union };

    Ok(MetricReport { ari, nmi, vi, inv_vi: 1.0 / vi, jaccard })
}

/// Writes `key,ari,nmi,inv_vi,jaccard` rows; `key` is usually `K` or `d`.
pub fn write_metrics_csv<W: Write>(key: &str, rows: &[(usize, MetricReport)], mut out: W) -> Result<()> {
    writeln!(out, "{key},ari,nmi,inv_vi,jaccard")?;
    for (k, m) in rows {
        writeln!(out, "{k},{},{},{},{}", m.ari, m.nmi, m.inv_vi, m.jaccard)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical() {
        let m = partition_metrics(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap();
        assert_eq!((m.ari, m.nmi, m.vi, m.jaccard), (1.0, 1.0, 0.0, 1.0));
        assert!(m.inv_vi.is_infinite());
    }

    #[test]
    fn swapped_labels() {
        let m = partition_metrics(&[1, 1, 2, 2], &[2, 2, 1, 1]).unwrap();
        assert!((m.ari - 1.0).abs() < 1e-15);
    }

    #[test]
    fn crossed_halves() {
        let m = partition_metrics(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap();
        assert!((m.ari + 0.5).abs() < 1e-15);
        assert!((m.vi - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(m.nmi, 0.0);
        assert_eq!(m.jaccard, 0.0);
    }

    #[test]
    fn geometric_normalization() {
        let a = [0, 0, 0, 1, 1, 2];
        let b = [0, 0, 1, 1, 1, 1];
        let ar = partition_metrics_with(&a, &b, NmiNormalization::Arithmetic).unwrap().nmi;
        let ge = partition_metrics_with(&a, &b, NmiNormalization::Geometric).unwrap().nmi;
        assert!(ge >= ar - 1e-15);
        let single = partition_metrics_with(&a, &[0; 6], NmiNormalization::Geometric).unwrap();
        assert_eq!(single.nmi, 0.0);
    }

    #[test]
    fn confusion_marginals() {
        let a = [0, 0, 1, 1, 1, 2];
        let b = [5, 5, 5, 7, 7, 7];
        let c = confusion_matrix(&a, &b).unwrap();
        assert_eq!(c.counts, vec![vec![2, 0], vec![1, 2], vec![0, 1]]);
        assert_eq!(c.row_sums(), vec![2, 3, 1]);
        assert_eq!(c.col_sums(), vec![3, 3]);
        assert_eq!(c.col_labels, vec![5, 7]);
        let mut buf = Vec::new();
        c.write_csv(Some(&["KC".into(), "PN".into(), "MBON".into()]), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "label,cluster_5,cluster_7\nKC,2,0\nPN,1,2\nMBON,0,1\n");
    }

    #[test]
    fn errors() {
        assert!(partition_metrics(&[0, 1], &[0]).is_err());
        assert!(partition_metrics(&[0], &[0]).is_err());
        assert!(confusion_matrix(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn metrics_csv() {
        let m = partition_metrics(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap();
        let mut buf = Vec::new();
        write_metrics_csv("K", &[(2, m)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "K,ari,nmi,inv_vi,jaccard\n2,1,1,inf,1\n");
    }
}
