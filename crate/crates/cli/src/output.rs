//! Output directory handling and the per-command run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::PipelineConfig;

pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Runs `f` against a buffered file `name` and records it.
    pub fn write<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

/// `vertex_id,<name>` rows.
pub fn write_labels<W: Write>(name: &str, labels: &[usize], mut out: W) -> Result<()> {
    writeln!(out, "vertex_id,{name}")?;
    for (i, l) in labels.iter().enumerate() {
        writeln!(out, "{i},{l}")?;
    }
    Ok(())
}

/// `vertex_id,y_1..y_d,z_1..z_d` rows.
pub fn write_positions<W: Write>(x: &DMatrix<f64>, mut out: W) -> Result<()> {
    let d = x.ncols() / 2;
    let mut header = vec!["vertex_id".to_string()];
    header.extend((1..=d).map(|k| format!("y_{k}")));
    header.extend((1..=d).map(|k| format!("z_{k}")));
    writeln!(out, "{}", header.join(","))?;
    for (i, row) in x.row_iter().enumerate() {
        let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{i},{}", vals.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'static str,
    pub config: &'a PipelineConfig,
    pub seed: u64,
    pub d_hat: Option<usize>,
    pub q_hat: Option<usize>,
    pub k_hat: Option<usize>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, config: &'a PipelineConfig) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config,
            seed: config.seed,
            d_hat: None,
            q_hat: None,
            k_hat: None,
            outputs: Vec::new(),
            warnings: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    /// Writes `manifest.<command>.json` listing every file `out` produced.
    pub fn finish(mut self, out: &mut OutDir) -> Result<()> {
        self.outputs = out.written().to_vec();
        let name = format!("manifest.{}.json", self.command);
        self.outputs.push(name.clone());
        out.write_json(&name, &self)
    }
}
