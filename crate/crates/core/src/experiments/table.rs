//! Result rows, CSV output and per-grid-point summaries.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// One repetition at one grid point. Parameters that do not apply to an
/// experiment are `None` and print as empty fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    /// Estimator or division label, e.g. `ki`, `dki`, `saj`, `dkrr`.
    pub method: String,
    pub repetition: usize,
    pub delta: f64,
    pub t: Option<usize>,
    pub copies: Option<usize>,
    pub c0: Option<f64>,
    pub lambda: Option<f64>,
    pub s_star: Option<usize>,
    pub sigma: Option<f64>,
    pub n_train: usize,
    pub m: usize,
    /// `max − min` block size.
    pub size_spread: usize,
    pub rmse: f64,
    pub mean_block_cond: f64,
    pub full_cond: f64,
    /// Blocks whose solve fell back to the eigen pseudo-inverse.
    pub fallback_blocks: usize,
    pub wall_time: f64,
}

pub const HEADER: [&str; 18] = [
    "experiment",
    "method",
    "repetition",
    "delta",
    "t",
    "copies",
    "c0",
    "lambda",
    "s_star",
    "sigma",
    "n_train",
    "m",
    "size_spread",
    "rmse",
    "mean_block_cond",
    "full_cond",
    "fallback_blocks",
    "wall_time",
];

fn real(v: f64) -> String {
    format!("{v:.15e}")
}

fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

fn opt_int(v: Option<usize>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl ResultRow {
    fn record(&self) -> [String; 18] {
        [
            self.experiment.clone(),
            self.method.clone(),
            self.repetition.to_string(),
            real(self.delta),
            opt_int(self.t),
            opt_int(self.copies),
            opt_real(self.c0),
            opt_real(self.lambda),
            opt_int(self.s_star),
            opt_real(self.sigma),
            self.n_train.to_string(),
            self.m.to_string(),
            self.size_spread.to_string(),
            real(self.rmse),
            real(self.mean_block_cond),
            real(self.full_cond),
            self.fallback_blocks.to_string(),
            real(self.wall_time),
        ]
    }

    /// Everything identifying the grid point, as printed in the CSV. The
    /// block count is an outcome rather than a parameter when the division
    /// is driven by `c0`.
    fn grid_key(&self) -> Vec<String> {
        let mut r = self.record().to_vec();
        r.truncate(10);
        r.remove(2);
        if self.c0.is_none() {
            r.push(self.m.to_string());
        }
        r
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Mean over repetitions at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// First row of the group; its `rmse` and `repetition` are not meaningful.
    pub params: ResultRow,
    pub mean_rmse: f64,
    pub repetitions: usize,
}

impl ResultTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADER)?;
        for row in &self.rows {
            out.write_record(row.record())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Mean RMSE per grid point, in order of first appearance.
    pub fn summarize(&self) -> Vec<SummaryRow> {
        let mut order: Vec<Vec<String>> = Vec::new();
        let mut groups: BTreeMap<Vec<String>, (usize, f64, usize)> = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            let key = row.grid_key();
            let e = groups.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (i, 0.0, 0)
            });
            e.1 += row.rmse;
            e.2 += 1;
        }
        order
            .into_iter()
            .map(|k| {
                let (first, sum, n) = groups[&k];
                SummaryRow {
                    params: self.rows[first].clone(),
                    mean_rmse: sum / n as f64,
                    repetitions: n,
                }
            })
            .collect()
    }

    /// For every `(method, δ)`, the summary row with the smallest mean RMSE
    /// (first one on ties).
    pub fn best_by_method(&self) -> Vec<SummaryRow> {
        let mut best: Vec<SummaryRow> = Vec::new();
        for s in self.summarize() {
            match best
                .iter_mut()
                .find(|b| b.params.method == s.params.method && b.params.delta == s.params.delta)
            {
                Some(b) if s.mean_rmse < b.mean_rmse => *b = s,
                Some(_) => {}
                None => best.push(s),
            }
        }
        best
    }
}
