use std::fmt::Write as _;
use std::path::Path;

use super::{ErrorBuffer, QuantError};
use crate::error::Error;

/// One histogram bin: `log10_edge` is the lower edge in log10 units, `-inf` for the bin of
/// exact zeros.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramRow {
    pub log10_edge: f64,
    pub count: u64,
}

/// Log-scale histogram of accumulated errors over `bins` equal-width bins spanning whole
/// decades from the smallest to the largest positive value. Zeros get their own leading bin.
pub fn histogram(buffer: &ErrorBuffer, bins: usize) -> Result<Vec<HistogramRow>, QuantError> {
    if bins < 2 {
        return Err(QuantError::BinCount(bins));
    }
    let zeros = buffer.delta_se.iter().filter(|&&v| v <= 0.0).count() as u64;
    let mut rows = vec![HistogramRow {
        log10_edge: f64::NEG_INFINITY,
        count: zeros,
    }];
    let logs: Vec<f64> = buffer
        .delta_se
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|v| v.log10())
        .collect();
    if logs.is_empty() {
        return Ok(rows);
    }
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max).floor() + 1.0;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for l in logs {
        let i = (((l - lo) / width).floor() as usize).min(bins - 1);
        counts[i] += 1;
    }
    rows.extend(counts.into_iter().enumerate().map(|(i, count)| HistogramRow {
        log10_edge: lo + i as f64 * width,
        count,
    }));
    Ok(rows)
}

pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut out = String::from("log10_edge,count\n");
    for r in rows {
        let _ = writeln!(out, "{},{}", r.log10_edge, r.count);
    }
    out
}

pub fn write_histogram(rows: &[HistogramRow], path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    std::fs::write(path, histogram_csv(rows)).map_err(|e| Error::io(path, e))
}
