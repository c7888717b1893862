//! Node2Vec: second-order biased random walks and skip-gram training with
//! negative sampling.

mod sgns;
mod walk;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub use sgns::{sgns_loss_grad, train_sgns, SgnsConfig, SgnsGradient, TrainMode};
pub use walk::{generate_walks, transition_probabilities, write_walks, WalkConfig};

/// Row-major `rows × dim` matrix; row `i` embeds node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::Validation(format!("{} values for a {rows}x{dim} matrix", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite entry at row {}", i / dim.max(1))));
        }
        Ok(EmbeddingMatrix { rows, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::Validation(format!("row {i} has {} entries, expected {dim}", rows[i].len())));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim.max(1)).take(self.rows)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.dim);
        for row in self.iter_rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse("embeddings", 0, "missing `n d` header"))?;
        let h: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse("embeddings", 1, "header must be `n d`"))?;
        let [rows, dim] = h[..] else {
            return Err(Error::parse("embeddings", 1, "header must be `n d`"));
        };
        let mut values = Vec::with_capacity(rows * dim);
        let mut seen = 0;
        for (line_no, line) in lines {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse("embeddings", line_no + 1, format!("row {seen} has a malformed number")))?;
            if row.len() != dim {
                return Err(Error::parse(
                    "embeddings",
                    line_no + 1,
                    format!("row {seen} has {} values, expected {dim}", row.len()),
                ));
            }
            values.extend(row);
            seen += 1;
        }
        if seen != rows {
            return Err(Error::parse("embeddings", 0, format!("header promises {rows} rows, found {seen}")));
        }
        Self::new(rows, dim, values)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }
}
