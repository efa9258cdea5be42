use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sgfs_core::eval::SelectionMetrics;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const CLOCK: &str = "std::time::Instant (monotonic, nanosecond resolution)";

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub method: String,
    pub p: usize,
    pub rep: usize,
    pub seed: u64,
    pub time_seconds: f64,
    pub objective: Option<f64>,
    pub distance_to_reference: Option<f64>,
    pub metrics: Option<SelectionMetrics>,
    pub converged: bool,
    pub error: Option<String>,
}

impl Row {
    pub fn new(method: &str, p: usize, rep: usize, seed: u64) -> Self {
        Self {
            method: method.to_string(),
            p,
            rep,
            seed,
            time_seconds: 0.0,
            objective: None,
            distance_to_reference: None,
            metrics: None,
            converged: false,
            error: None,
        }
    }

    pub fn failed(mut self, err: impl std::fmt::Display) -> Self {
        self.error = Some(err.to_string());
        self.converged = false;
        self
    }
}

#[derive(Serialize)]
struct Header<'a, C: Serialize> {
    kind: &'static str,
    command: &'a str,
    version: &'a str,
    seed: u64,
    clock: &'a str,
    config: &'a C,
}

#[derive(Serialize)]
struct Line<'a> {
    kind: &'static str,
    command: &'a str,
    version: &'a str,
    #[serde(flatten)]
    row: &'a Row,
}

/// Collects per-run rows; written as JSON lines (a header echoing the
/// configuration, then one line per row).
pub struct Report<C: Serialize> {
    pub command: &'static str,
    pub seed: u64,
    pub config: C,
    pub rows: Vec<Row>,
}

impl<C: Serialize> Report<C> {
    pub fn new(command: &'static str, seed: u64, config: C) -> Self {
        Self {
            command,
            seed,
            config,
            rows: Vec::new(),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header {
            kind: "header",
            command: self.command,
            version: VERSION,
            seed: self.seed,
            clock: CLOCK,
            config: &self.config,
        };
        serde_json::to_writer(&mut out, &header)?;
        writeln!(out)?;
        for row in &self.rows {
            let line = Line {
                kind: "row",
                command: self.command,
                version: VERSION,
                row,
            };
            serde_json::to_writer(&mut out, &line)?;
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).with_context(|| format!("creating report {}", path.display()))?;
        self.write_jsonl(BufWriter::new(file))
    }

    /// Rows that errored or did not converge.
    pub fn failures(&self) -> Vec<&Row> {
        self.rows.iter().filter(|r| !r.converged).collect()
    }
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Fixed-width text table.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = vec![0; cols];
    for line in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (w, cell) in width.iter_mut().zip(line) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let fmt = |line: &[String]| {
        line.iter()
            .zip(&width)
            .enumerate()
            .map(|(i, (cell, w))| {
                if i == 0 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = fmt(header);
    out.push('\n');
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&fmt(row));
        out.push('\n');
    }
    out
}
