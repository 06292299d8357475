//! Long-format result tables and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::stats::{MeanCi, Proportion};
use crate::Result;

/// Rows of `grid columns…, metric, mean, ci95`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTable {
    pub grid_columns: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub grid: Vec<String>,
    pub metric: String,
    pub mean: f64,
    pub ci95: f64,
}

impl LongTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { grid_columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, grid: &[String], metric: &str, mean: f64, ci95: f64) {
        debug_assert_eq!(grid.len(), self.grid_columns.len());
        self.rows.push(Row { grid: grid.to_vec(), metric: metric.to_string(), mean, ci95 });
    }

    pub fn push_mean(&mut self, grid: &[String], metric: &str, m: MeanCi) {
        self.push(grid, metric, m.mean, m.ci95);
    }

    pub fn push_proportion(&mut self, grid: &[String], metric: &str, p: Proportion) {
        self.push(grid, metric, p.estimate, p.half_width);
    }

    /// Looks up the first row matching `metric` and every `(column, value)` pair.
    pub fn find(&self, metric: &str, filters: &[(&str, &str)]) -> Option<&Row> {
        let idx: Vec<(usize, &str)> = filters
            .iter()
            .map(|(c, v)| self.grid_columns.iter().position(|g| g == c).map(|i| (i, *v)))
            .collect::<Option<_>>()?;
        self.rows
            .iter()
            .find(|r| r.metric == metric && idx.iter().all(|(i, v)| r.grid[*i] == *v))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = self.grid_columns.clone();
        header.extend(["metric", "mean", "ci95"].map(String::from));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = r.grid.clone();
            rec.push(r.metric.clone());
            rec.push(r.mean.to_string());
            rec.push(r.ci95.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        self.write_csv(BufWriter::new(File::create(path)?))
    }
}

/// Plain-text `key=value` manifest, one entry per line.
pub fn write_manifest(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (k, v) in entries {
        writeln!(w, "{k}={v}")?;
    }
    w.flush()?;
    Ok(())
}
