//! Percentile bootstrap over small sets of subcondition values.
//!
//! Resample draws are keyed by (seed, cell, resample, position), so a fixed
//! seed gives identical intervals regardless of evaluation order.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::percentile_sorted;
use crate::rng;

fn resampled_mean(values: &[f64], seed: u64, cell: u64, resample: u64) -> f64 {
    let n = values.len();
    let sum: f64 = (0..n)
        .map(|j| values[rng::below(&[seed, cell, resample, j as u64], n)])
        .sum();
    sum / n as f64
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn interval(mut samples: Vec<f64>, level: f64) -> (f64, f64) {
    samples.sort_by(f64::total_cmp);
    let tail = (100.0 - level) / 2.0;
    (
        percentile_sorted(&samples, tail),
        percentile_sorted(&samples, 100.0 - tail),
    )
}

/// Percentile interval of the bootstrap distribution of the mean.
pub fn mean_interval(values: &[f64], resamples: usize, seed: u64, level: f64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("bootstrap of no values"));
    }
    if resamples == 0 {
        return Err(Error::Empty("zero bootstrap resamples"));
    }
    let samples = (0..resamples as u64)
        .map(|r| resampled_mean(values, seed, 0, r))
        .collect();
    Ok(interval(samples, level))
}

/// A within-backend contrast between two packages on one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub backend: String,
    /// e.g. `MCLR vs MJ`.
    pub pair: String,
    pub metric: String,
    pub delta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// `mean(a) - mean(b)` with a 95% percentile interval from resampling each
/// cell independently with replacement.
pub fn bootstrap_contrast(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<(f64, f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("contrast cell"));
    }
    if a.len() != b.len() {
        return Err(Error::Dimension(alloc::format!(
            "contrast cells have {} and {} values",
            a.len(),
            b.len()
        )));
    }
    if resamples == 0 {
        return Err(Error::Empty("zero bootstrap resamples"));
    }
    let delta = mean(a) - mean(b);
    let samples = (0..resamples as u64)
        .map(|r| resampled_mean(a, seed, 1, r) - resampled_mean(b, seed, 2, r))
        .collect();
    let (lo, hi) = interval(samples, 95.0);
    Ok((delta, lo, hi))
}
