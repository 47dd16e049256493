//! Append-only store of pre-solved instances and standardized KNN lookup.
//!
//! Records hold the 17-dim parameter vector Θ, the solved program point
//! (poses, rotation entries, vertices, planes, modes — the base variable
//! layout), optional grid cell indices, and bookkeeping. The file format
//! is JSON-lines with a versioned header.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported dataset version {0}")]
    Version(u32),
    #[error("record theta dimension {got} does not match dataset dimension {want}")]
    ThetaDim { got: usize, want: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: usize,
    pub theta: Vec<f64>,
    /// Solved point in the base program layout.
    pub point: Vec<f64>,
    /// Grid cell index per slot when the solve produced them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<usize>>,
    /// Active inequality indices of the compiled program, when extracted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_set: Option<Vec<usize>>,
    pub objective: f64,
    pub method: String,
    pub solve_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    theta_dim: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    theta_index: HashMap<Vec<u64>, usize>,
}

fn theta_key(theta: &[f64]) -> Vec<u64> {
    theta.iter().map(|v| v.to_bits()).collect()
}

impl Dataset {
    pub fn new() -> Self {
        Dataset::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn theta_dim(&self) -> Option<usize> {
        self.records.first().map(|r| r.theta.len())
    }

    /// Appends a record, or replaces the stored solution for the same Θ
    /// when the new objective is strictly lower. Returns the record id.
    pub fn insert_or_improve(&mut self, mut record: DatasetRecord) -> usize {
        let key = theta_key(&record.theta);
        match self.theta_index.get(&key) {
            Some(&pos) => {
                let id = self.records[pos].id;
                if record.objective < self.records[pos].objective {
                    record.id = id;
                    self.records[pos] = record;
                }
                id
            }
            None => {
                let id = self.records.len();
                record.id = id;
                self.theta_index.insert(key, id);
                self.records.push(record);
                id
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let dim = self.theta_dim().unwrap_or(0);
        serde_json::to_writer(&mut f, &Header { version: 1, theta_dim: dim })?;
        writeln!(f)?;
        for r in &self.records {
            serde_json::to_writer(&mut f, r)?;
            writeln!(f)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        let header: Header = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Ok(Dataset::new()),
        };
        if header.version != 1 {
            return Err(DatasetError::Version(header.version));
        }
        let mut ds = Dataset::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: DatasetRecord = serde_json::from_str(&line)?;
            if r.theta.len() != header.theta_dim {
                return Err(DatasetError::ThetaDim { got: r.theta.len(), want: header.theta_dim });
            }
            ds.insert_or_improve(r);
        }
        Ok(ds)
    }
}

/// Per-feature z-score standardization fit on a dataset.
#[derive(Clone, Debug)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[&[f64]]) -> Self {
        assert!(!rows.is_empty());
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut std = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                let dv = r[j] - mean[j];
                std[j] += dv * dv;
            }
        }
        for s in std.iter_mut() {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0; // constant feature: pass through
            }
        }
        Standardizer { mean, std }
    }

    pub fn distance2(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut d2 = 0.0;
        for j in 0..a.len() {
            let d = (a[j] - b[j]) / self.std[j];
            d2 += d * d;
        }
        d2
    }

    pub fn transform(&self, a: &[f64]) -> Vec<f64> {
        a.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.std[j]).collect()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KnnOrder {
    Nearest,
    /// Ablation mode: descending distance ("worst-k" retrieval).
    Farthest,
}

/// Returns up to k records ordered by standardized Euclidean distance on
/// Θ, ties broken by record id.
pub fn knn_query<'a>(
    dataset: &'a Dataset,
    theta: &[f64],
    k: usize,
    order: KnnOrder,
) -> Result<Vec<&'a DatasetRecord>, DatasetError> {
    if dataset.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    assert!(k >= 1);
    let rows: Vec<&[f64]> = dataset.records.iter().map(|r| r.theta.as_slice()).collect();
    let standardizer = Standardizer::fit(&rows);
    let mut scored: Vec<(f64, usize)> = dataset
        .records
        .iter()
        .map(|r| (standardizer.distance2(theta, &r.theta), r.id))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if order == KnnOrder::Farthest {
        scored.reverse();
    }
    Ok(scored.iter().take(k).map(|&(_, id)| &dataset.records[id]).collect())
}
