//! Metric aggregation over outcome rows.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::outcome::RequestOutcome;
use crate::record::{FailureClass, RouteLabel};
use crate::stats::bootstrap;

/// Linear-interpolation quantile: sort, take position `(n - 1) * q / 100`
/// and interpolate between its neighbours.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile of no values"));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::OutOfRange(format!("quantile {q}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

/// [`percentile`] on data that is already sorted ascending.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = crate::math::floor(h) as usize;
    let hi = crate::math::ceil(h) as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Workflow lower-bound completion: the Fréchet lower bound on the joint
/// event of a valid, correctly routed (and, when applicable, state-safe)
/// record. All inputs are percentages.
pub fn wlc(fc_pct: f64, ra_pct: f64, sr_pct: Option<f64>) -> Result<f64> {
    let check = |name: &str, v: f64| {
        if (0.0..=100.0).contains(&v) {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!("{name}={v}")))
        }
    };
    check("fc", fc_pct)?;
    check("ra", ra_pct)?;
    let bound = match sr_pct {
        Some(sr) => {
            check("sr", sr)?;
            fc_pct + ra_pct + sr - 200.0
        }
        None => fc_pct + ra_pct - 100.0,
    };
    Ok(bound.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub rows: usize,
    pub fc_pct: f64,
    pub ra_pct: f64,
    /// Absent when the rows contain no state-sensitive prompts.
    pub sr_pct: Option<f64>,
    pub p50_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub total_tokens: u64,
    pub wlc_pct: f64,
    pub tail_amp: Option<f64>,
    pub per_route_accuracy: BTreeMap<RouteLabel, f64>,
    pub per_route_count: BTreeMap<RouteLabel, usize>,
    pub taxonomy_counts: BTreeMap<FailureClass, usize>,
}

/// Aggregates a non-empty set of rows. Failed rows count as incorrectly
/// routed and, on state-sensitive prompts, as state not retained.
pub fn compute_metrics<'a, I>(rows: I) -> Result<MetricSummary>
where
    I: IntoIterator<Item = &'a RequestOutcome>,
{
    let mut n = 0usize;
    let mut ok = 0usize;
    let mut correct = 0usize;
    let mut state_rows = 0usize;
    let mut retained = 0usize;
    let mut tokens = 0u64;
    let mut latencies = Vec::new();
    let mut route_n: BTreeMap<RouteLabel, usize> = BTreeMap::new();
    let mut route_ok: BTreeMap<RouteLabel, usize> = BTreeMap::new();
    let mut taxonomy: BTreeMap<FailureClass, usize> = FailureClass::ALL.into_iter().map(|c| (c, 0)).collect();

    for row in rows {
        n += 1;
        *taxonomy.entry(row.failure_class).or_default() += 1;
        if row.failure_class == FailureClass::Ok {
            ok += 1;
        }
        let is_correct = row.route_correct == Some(true);
        if is_correct {
            correct += 1;
        }
        *route_n.entry(row.ground_truth_route).or_default() += 1;
        *route_ok.entry(row.ground_truth_route).or_default() += usize::from(is_correct);
        if row.state_sensitive {
            state_rows += 1;
            if row.state_retained == Some(true) {
                retained += 1;
            }
        }
        tokens += row.total_tokens();
        if let Some(l) = row.latency_ms {
            latencies.push(l);
        }
    }
    if n == 0 {
        return Err(Error::Empty("metric subset"));
    }

    let pct = |num: usize, den: usize| 100.0 * num as f64 / den as f64;
    let fc_pct = pct(ok, n);
    let ra_pct = pct(correct, n);
    let sr_pct = (state_rows > 0).then(|| pct(retained, state_rows));
    latencies.sort_by(f64::total_cmp);
    let (p50, p95) = if latencies.is_empty() {
        (None, None)
    } else {
        (
            Some(percentile_sorted(&latencies, 50.0)),
            Some(percentile_sorted(&latencies, 95.0)),
        )
    };
    let tail_amp = match (p50, p95) {
        (Some(a), Some(b)) if a > 0.0 => Some(b / a),
        _ => None,
    };
    let per_route_accuracy = route_n.iter().map(|(r, &cnt)| (*r, pct(route_ok[r], cnt))).collect();

    Ok(MetricSummary {
        rows: n,
        fc_pct,
        ra_pct,
        sr_pct,
        p50_ms: p50,
        p95_ms: p95,
        total_tokens: tokens,
        wlc_pct: wlc(fc_pct, ra_pct, sr_pct)?,
        tail_amp,
        per_route_accuracy,
        per_route_count: route_n,
        taxonomy_counts: taxonomy,
    })
}

/// Mean of subcondition values plus the half-width of the percentile
/// bootstrap interval of that mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStat {
    pub mean: f64,
    pub bound: f64,
}

pub const DEFAULT_RESAMPLES: usize = 10_000;

pub fn mean_with_bound(values: &[f64], resamples: usize, seed: u64) -> Result<CellStat> {
    if values.is_empty() {
        return Err(Error::Empty("cell with no combos"));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() == 1 || values.iter().all(|v| *v == values[0]) {
        return Ok(CellStat { mean, bound: 0.0 });
    }
    let (lo, hi) = bootstrap::mean_interval(values, resamples, seed, 95.0)?;
    Ok(CellStat {
        mean,
        bound: (hi - lo) / 2.0,
    })
}
