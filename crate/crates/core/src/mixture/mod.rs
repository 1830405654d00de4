//! Gaussian mixture EM, BIC model selection and a k-means baseline.

mod gmm;
mod kmeans;
mod select;

use serde::{Deserialize, Serialize};

pub use gmm::{gmm_em, hard_labels, CovFamily, GmmConfig, GmmFit, GmmInit};
pub use kmeans::{kmeans, KMeansFit};
pub use select::{select_k, write_bic_table, BicRow};

/// Hard cluster assignment; labels are `0..K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition(pub Vec<usize>);

impl Partition {
    pub fn new(labels: Vec<usize>) -> Self {
        Self(labels)
    }

    pub fn labels(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One more than the largest label.
    pub fn k(&self) -> usize {
        self.0.iter().max().map_or(0, |m| m + 1)
    }

    /// Sizes of each label `0..k()`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k()];
        for &l in &self.0 {
            s[l] += 1;
        }
        s
    }

    /// Relabels arbitrary string classes to `0..K` in order of first
    /// appearance; returns the partition and the class names.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> (Self, Vec<String>) {
        let mut classes: Vec<String> = Vec::new();
        let labels = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                match classes.iter().position(|c| c == n) {
                    Some(i) => i,
                    None => {
                        classes.push(n.to_string());
                        classes.len() - 1
                    }
                }
            })
            .collect();
        (Self(labels), classes)
    }
}
