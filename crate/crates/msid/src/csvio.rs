//! CSV emission and ingestion: UTF-8, `\n` line endings, `.` decimals,
//! always a header row.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => bail!("{}: empty file", path.display()),
    };
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .with_context(|| format!("{}: row {}, cell {c:?}", path.display(), idx + 2))
            })
            .collect::<Result<_>>()?;
        if row.len() != names.len() {
            bail!("{}: row {} has {} cells, expected {}", path.display(), idx + 2, row.len(), names.len());
        }
        rows.push(row);
    }
    Ok((names, rows))
}

/// Equal-width histogram.
#[derive(Debug, Clone)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    /// Normalized density per bin.
    pub fn densities(&self) -> Vec<f64> {
        let w = self.bin_width();
        self.counts
            .iter()
            .map(|&c| c as f64 / (self.total as f64 * w))
            .collect()
    }
}

/// Histogram with the Freedman-Diaconis bin width, falling back to
/// `fallback_bins` equal bins when the rule degenerates.
pub fn histogram_fd(values: &[f64], fallback_bins: usize) -> Histogram {
    assert!(!values.is_empty(), "histogram of nothing");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0];
    let hi = *sorted.last().unwrap();
    let n = sorted.len();
    let q = |p: f64| sorted[((p * n as f64) as usize).min(n - 1)];
    let iqr = q(0.75) - q(0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    let span = hi - lo;
    let bins = if width.is_finite() && width > 0.0 && span > 0.0 {
        let b = (span / width).ceil() as usize;
        if b == 0 || b > 4000 {
            fallback_bins
        } else {
            b
        }
    } else {
        fallback_bins
    };
    let bins = bins.max(1);
    let width = if span > 0.0 { span / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
    Histogram {
        edges,
        counts,
        total: n,
    }
}

/// Empirical `p`-quantile as the `ceil(p n)`-th order statistic.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}
