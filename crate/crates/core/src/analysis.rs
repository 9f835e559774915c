//! Combo-level analysis: cell means with bounds, Type-II ANOVA per metric,
//! targeted contrasts, WLC, route slices, taxonomy and tail amplification.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, mean_with_bound, wlc, CellStat, DEFAULT_RESAMPLES};
use crate::outcome::RequestOutcome;
use crate::profile::{ComboKey, Constraint, Mode, Transport};
use crate::recommend::CellMetrics;
use crate::record::{FailureClass, RouteLabel};
use crate::rng;
use crate::stats::anova::{anova_type2, AnovaTable};
use crate::stats::bootstrap::{bootstrap_contrast, ContrastRow};
use crate::stats::design::{Factor, FactorialModel, Term};

/// Metrics of one combo, the unit of analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboRow {
    pub key: ComboKey,
    pub rows: usize,
    pub fc_pct: f64,
    pub ra_pct: f64,
    pub sr_pct: Option<f64>,
    pub p50_ms: Option<f64>,
    pub p95_ms: Option<f64>,
    pub tokens: f64,
    pub wlc_pct: f64,
    pub tail_amp: Option<f64>,
    #[serde(default)]
    pub aborted: bool,
    #[serde(default)]
    pub per_route_accuracy: BTreeMap<RouteLabel, f64>,
    #[serde(default)]
    pub taxonomy_counts: BTreeMap<FailureClass, usize>,
}

/// Groups log rows by combo (in order of first appearance) and summarizes
/// each group.
pub fn combo_rows(outcomes: &[RequestOutcome]) -> Result<Vec<ComboRow>> {
    let mut order: Vec<ComboKey> = Vec::new();
    let mut groups: BTreeMap<ComboKey, Vec<&RequestOutcome>> = BTreeMap::new();
    for o in outcomes {
        let g = groups.entry(o.combo.clone()).or_default();
        if g.is_empty() {
            order.push(o.combo.clone());
        }
        g.push(o);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let m = compute_metrics(rows.iter().copied())?;
            Ok(ComboRow {
                aborted: rows.iter().any(|r| r.aborted),
                key,
                rows: m.rows,
                fc_pct: m.fc_pct,
                ra_pct: m.ra_pct,
                sr_pct: m.sr_pct,
                p50_ms: m.p50_ms,
                p95_ms: m.p95_ms,
                tokens: m.total_tokens as f64,
                wlc_pct: m.wlc_pct,
                tail_amp: m.tail_amp,
                per_route_accuracy: m.per_route_accuracy,
                taxonomy_counts: m.taxonomy_counts,
            })
        })
        .collect()
}

/// Backend x mode cell: means over its subcondition combos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub backend: String,
    pub mode: Mode,
    pub combos: usize,
    pub fc: CellStat,
    pub ra: CellStat,
    pub sr: Option<CellStat>,
    pub p50_ms: Option<CellStat>,
    pub p95_ms: Option<f64>,
    pub tokens: CellStat,
    /// From the cell-mean margins.
    pub wlc_pct: f64,
    pub tail_amp: Option<f64>,
    pub per_route_accuracy: BTreeMap<RouteLabel, f64>,
    pub transport_p50_ms: BTreeMap<Transport, f64>,
    pub taxonomy_counts: BTreeMap<FailureClass, usize>,
}

impl CellRow {
    pub fn to_metrics(&self) -> CellMetrics {
        CellMetrics {
            backend: self.backend.clone(),
            mode: self.mode,
            fc_pct: self.fc.mean,
            ra_pct: self.ra.mean,
            sr_pct: self.sr.map(|s| s.mean),
            wlc_pct: self.wlc_pct,
            p50_ms: self.p50_ms.map(|s| s.mean),
            tokens: Some(self.tokens.mean),
            per_route_accuracy: self.per_route_accuracy.clone(),
            transport_p50_ms: self.transport_p50_ms.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            seed: 20_240_601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAnova {
    pub metric: String,
    pub table: AnovaTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub schema_version: String,
    pub options: AnalysisOptions,
    pub combos: Vec<ComboRow>,
    pub cells: Vec<CellRow>,
    pub anova: Vec<MetricAnova>,
    /// Why an ANOVA was skipped or reduced, one line per event.
    pub notes: Vec<String>,
    pub contrasts: Vec<ContrastRow>,
    pub taxonomy_totals: BTreeMap<FailureClass, usize>,
    pub total_rows: usize,
}

impl Analysis {
    pub fn cell(&self, backend: &str, mode: Mode) -> Option<&CellRow> {
        self.cells.iter().find(|c| c.backend == backend && c.mode == mode)
    }

    pub fn anova_for(&self, metric: &str) -> Option<&AnovaTable> {
        self.anova.iter().find(|a| a.metric == metric).map(|a| &a.table)
    }

    pub fn contrast(&self, backend: &str, pair: &str, metric: &str) -> Option<&ContrastRow> {
        self.contrasts
            .iter()
            .find(|c| c.backend == backend && c.pair == pair && c.metric == metric)
    }

    pub fn cell_metrics(&self) -> Vec<CellMetrics> {
        self.cells.iter().map(CellRow::to_metrics).collect()
    }
}

/// Metrics analysed with ANOVA and contrasts, with their accessor.
pub const METRICS: [&str; 5] = ["ra", "sr", "fc", "p50_ms", "tokens"];
const CONTRAST_METRICS: [&str; 4] = ["ra", "sr", "p50_ms", "tokens"];
const CONTRAST_PAIRS: [(Mode, Mode); 2] = [(Mode::Mclr, Mode::Mj), (Mode::Mclr, Mode::Sj)];

fn metric_of(row: &ComboRow, metric: &str) -> Option<f64> {
    match metric {
        "ra" => Some(row.ra_pct),
        "sr" => row.sr_pct,
        "fc" => Some(row.fc_pct),
        "p50_ms" => row.p50_ms,
        "tokens" => Some(row.tokens),
        _ => None,
    }
}

fn str_key(s: &str) -> u64 {
    rng::hash_keys(&s.bytes().map(u64::from).collect::<Vec<_>>())
}

fn backends_in_order(combos: &[ComboRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in combos {
        if !out.contains(&c.key.backend) {
            out.push(c.key.backend.clone());
        }
    }
    out
}

fn sorted_levels<T: Ord + Copy>(values: impl Iterator<Item = T>) -> Vec<T> {
    let mut v: Vec<T> = values.collect();
    v.sort();
    v.dedup();
    v
}

fn cells_of(combos: &[ComboRow], opts: &AnalysisOptions) -> Result<Vec<CellRow>> {
    let mut out = Vec::new();
    let modes = sorted_levels(combos.iter().map(|c| c.key.mode));
    for backend in backends_in_order(combos) {
        for &mode in &modes {
            let members: Vec<&ComboRow> = combos
                .iter()
                .filter(|c| c.key.mode == mode && c.key.backend == backend)
                .collect();
            if members.is_empty() {
                continue;
            }
            let seed = rng::hash_keys(&[opts.seed, str_key(&backend), mode as u64]);
            let stat = |values: Vec<f64>, tag: u64| -> Result<CellStat> {
                mean_with_bound(&values, opts.resamples, rng::hash_keys(&[seed, tag]))
            };
            let fc = stat(members.iter().map(|c| c.fc_pct).collect(), 1)?;
            let ra = stat(members.iter().map(|c| c.ra_pct).collect(), 2)?;
            let srs: Vec<f64> = members.iter().filter_map(|c| c.sr_pct).collect();
            let sr = if srs.len() == members.len() {
                Some(stat(srs, 3)?)
            } else {
                None
            };
            let p50s: Vec<f64> = members.iter().filter_map(|c| c.p50_ms).collect();
            let p50 = if p50s.len() == members.len() {
                Some(stat(p50s, 4)?)
            } else {
                None
            };
            let p95s: Vec<f64> = members.iter().filter_map(|c| c.p95_ms).collect();
            let p95 = (p95s.len() == members.len()).then(|| p95s.iter().sum::<f64>() / p95s.len() as f64);
            let tokens = stat(members.iter().map(|c| c.tokens).collect(), 5)?;
            let amps: Vec<f64> = members.iter().filter_map(|c| c.tail_amp).collect();
            let tail_amp = (amps.len() == members.len()).then(|| amps.iter().sum::<f64>() / amps.len() as f64);

            let mut per_route = BTreeMap::new();
            for route in RouteLabel::ALL {
                let vals: Vec<f64> = members
                    .iter()
                    .filter_map(|c| c.per_route_accuracy.get(&route).copied())
                    .collect();
                if vals.len() == members.len() {
                    per_route.insert(route, vals.iter().sum::<f64>() / vals.len() as f64);
                }
            }
            let mut transport_p50 = BTreeMap::new();
            for t in Transport::ALL {
                let vals: Vec<f64> = members
                    .iter()
                    .filter(|c| c.key.transport == t)
                    .filter_map(|c| c.p50_ms)
                    .collect();
                if !vals.is_empty() {
                    transport_p50.insert(t, vals.iter().sum::<f64>() / vals.len() as f64);
                }
            }
            let mut taxonomy: BTreeMap<FailureClass, usize> = BTreeMap::new();
            for c in &members {
                for (k, v) in &c.taxonomy_counts {
                    *taxonomy.entry(*k).or_default() += v;
                }
            }
            out.push(CellRow {
                wlc_pct: wlc(
                    fc.mean.clamp(0.0, 100.0),
                    ra.mean.clamp(0.0, 100.0),
                    sr.map(|s| s.mean.clamp(0.0, 100.0)),
                )?,
                backend: backend.clone(),
                mode,
                combos: members.len(),
                fc,
                ra,
                sr,
                p50_ms: p50,
                p95_ms: p95,
                tokens,
                tail_amp,
                per_route_accuracy: per_route,
                transport_p50_ms: transport_p50,
                taxonomy_counts: taxonomy,
            });
        }
    }
    Ok(out)
}

/// Builds the routing model from the levels present in `combos`, dropping
/// factors that have a single level.
fn routing_model(combos: &[ComboRow]) -> (FactorialModel, Vec<Vec<usize>>, Vec<String>) {
    let backends = backends_in_order(combos);
    let modes = sorted_levels(combos.iter().map(|c| c.key.mode));
    let constraints = sorted_levels(combos.iter().map(|c| c.key.constraint));
    let transports = sorted_levels(combos.iter().map(|c| c.key.transport));

    let level_names: [Vec<String>; 4] = [
        backends.clone(),
        modes.iter().map(|m| m.as_str().to_string()).collect(),
        constraints.iter().map(|c| c.as_str().to_string()).collect(),
        transports.iter().map(|t| t.as_str().to_string()).collect(),
    ];
    let names = ["backend", "mode", "constraint", "transport"];
    let mut notes = Vec::new();
    let mut keep = [false; 4];
    let mut factor_index = [usize::MAX; 4];
    let mut factors = Vec::new();
    for f in 0..4 {
        if level_names[f].len() > 1 {
            keep[f] = true;
            factor_index[f] = factors.len();
            factors.push(Factor {
                name: names[f].into(),
                levels: level_names[f].clone(),
            });
        } else {
            notes.push(format!(
                "factor `{}` has a single level and is dropped from the model",
                names[f]
            ));
        }
    }
    let mut terms = Vec::new();
    if keep[0] {
        terms.push(Term::main(factor_index[0]));
    }
    if keep[1] {
        terms.push(Term::main(factor_index[1]));
    }
    if keep[0] && keep[1] {
        terms.push(Term::interaction(&[factor_index[0], factor_index[1]]));
    }
    if keep[2] {
        terms.push(Term::main(factor_index[2]));
    }
    if keep[3] {
        terms.push(Term::main(factor_index[3]));
    }
    let rows = combos
        .iter()
        .map(|c| {
            let levels = [
                backends.iter().position(|b| *b == c.key.backend).unwrap_or(0),
                modes.iter().position(|m| *m == c.key.mode).unwrap_or(0),
                constraints.iter().position(|x| *x == c.key.constraint).unwrap_or(0),
                transports.iter().position(|x| *x == c.key.transport).unwrap_or(0),
            ];
            (0..4).filter(|&f| keep[f]).map(|f| levels[f]).collect()
        })
        .collect();
    (FactorialModel { factors, terms }, rows, notes)
}

fn contrasts_of(combos: &[ComboRow], opts: &AnalysisOptions) -> Result<Vec<ContrastRow>> {
    let mut out = Vec::new();
    for backend in backends_in_order(combos) {
        for (treat, base) in CONTRAST_PAIRS {
            let cell = |mode: Mode| -> Vec<&ComboRow> {
                let mut v: Vec<&ComboRow> = combos
                    .iter()
                    .filter(|c| c.key.backend == backend && c.key.mode == mode)
                    .collect();
                v.sort_by_key(|c| (c.key.constraint, c.key.transport));
                v
            };
            let (a, b) = (cell(treat), cell(base));
            if a.is_empty() || b.is_empty() || a.len() != b.len() {
                continue;
            }
            let pair = format!("{treat} vs {base}");
            for metric in CONTRAST_METRICS {
                let av: Vec<f64> = a.iter().filter_map(|c| metric_of(c, metric)).collect();
                let bv: Vec<f64> = b.iter().filter_map(|c| metric_of(c, metric)).collect();
                if av.len() != a.len() || bv.len() != b.len() {
                    continue;
                }
                let seed = rng::hash_keys(&[opts.seed, str_key(&backend), str_key(&pair), str_key(metric)]);
                let (delta, lo, hi) = bootstrap_contrast(&av, &bv, opts.resamples, seed)?;
                out.push(ContrastRow {
                    backend: backend.clone(),
                    pair: pair.clone(),
                    metric: metric.into(),
                    delta,
                    ci_low: lo,
                    ci_high: hi,
                });
            }
        }
    }
    Ok(out)
}

/// Runs every analysis over combo-level rows.
pub fn analyze(combos: &[ComboRow], opts: AnalysisOptions) -> Result<Analysis> {
    if combos.is_empty() {
        return Err(Error::MissingInput("combo metrics"));
    }
    let cells = cells_of(combos, &opts)?;
    let (model, design_rows, mut notes) = routing_model(combos);

    let mut anova = Vec::new();
    if model.terms.is_empty() {
        notes.push("no factor has more than one level; ANOVA skipped".into());
    } else if combos.len() <= model.rank() {
        notes.push(format!(
            "{} combos cannot support a {}-parameter model; ANOVA skipped",
            combos.len(),
            model.rank()
        ));
    } else {
        for metric in METRICS {
            let y: Vec<f64> = combos.iter().filter_map(|c| metric_of(c, metric)).collect();
            if y.len() != combos.len() {
                notes.push(format!("metric `{metric}` missing on some combos; ANOVA skipped"));
                continue;
            }
            match anova_type2(&model, &design_rows, &y) {
                Ok(table) => anova.push(MetricAnova {
                    metric: metric.into(),
                    table,
                }),
                Err(e) => notes.push(format!("ANOVA for `{metric}` failed: {e}")),
            }
        }
    }

    let contrasts = contrasts_of(combos, &opts)?;
    let mut taxonomy_totals: BTreeMap<FailureClass, usize> = BTreeMap::new();
    for c in combos {
        for (k, v) in &c.taxonomy_counts {
            *taxonomy_totals.entry(*k).or_default() += v;
        }
    }
    Ok(Analysis {
        schema_version: crate::schema_versions::METRIC_TABLES.into(),
        options: opts,
        total_rows: combos.iter().map(|c| c.rows).sum(),
        combos: combos.to_vec(),
        cells,
        anova,
        notes,
        contrasts,
        taxonomy_totals,
    })
}

/// Reported backend x mode values, e.g. a published cell-means table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellValues {
    pub backend: String,
    pub mode: Mode,
    pub fc_pct: f64,
    pub ra_pct: f64,
    pub sr_pct: Option<f64>,
    pub p50_ms: Option<f64>,
    pub tokens: f64,
    #[serde(default)]
    pub per_route_accuracy: BTreeMap<RouteLabel, f64>,
}

/// Expands cell values into identical combo rows, one per
/// constraint x transport subcondition.
pub fn expand_cells(cells: &[CellValues]) -> Result<Vec<ComboRow>> {
    let mut out = Vec::with_capacity(cells.len() * 4);
    for cell in cells {
        for constraint in Constraint::ALL {
            for transport in Transport::ALL {
                out.push(ComboRow {
                    key: ComboKey {
                        mode: cell.mode,
                        backend: cell.backend.clone(),
                        constraint,
                        transport,
                    },
                    rows: 0,
                    fc_pct: cell.fc_pct,
                    ra_pct: cell.ra_pct,
                    sr_pct: cell.sr_pct,
                    p50_ms: cell.p50_ms,
                    p95_ms: None,
                    tokens: cell.tokens,
                    wlc_pct: wlc(cell.fc_pct, cell.ra_pct, cell.sr_pct)?,
                    tail_amp: None,
                    aborted: false,
                    per_route_accuracy: cell.per_route_accuracy.clone(),
                    taxonomy_counts: BTreeMap::new(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(backend: &str, mode: Mode, fc: f64, ra: f64, sr: f64, p50: f64, tokens: f64) -> CellValues {
        CellValues {
            backend: backend.into(),
            mode,
            fc_pct: fc,
            ra_pct: ra,
            sr_pct: Some(sr),
            p50_ms: Some(p50),
            tokens,
            per_route_accuracy: BTreeMap::new(),
        }
    }

    fn fixture() -> Vec<CellValues> {
        alloc::vec![
            values("gemini", Mode::Mj, 100.0, 86.11, 75.0, 1153.28, 126_098.0),
            values("gemini", Mode::Sj, 100.0, 86.11, 75.0, 1161.81, 126_098.0),
            values("gemini", Mode::Mjs, 99.92, 61.03, 56.08, 1190.01, 60_133.0),
            values("gemini", Mode::Mclr, 100.0, 62.96, 68.75, 1014.09, 45_771.0),
        ]
    }

    #[test]
    fn invariant_cells_recompose_wlc() {
        let combos = expand_cells(&fixture()).unwrap();
        let a = analyze(
            &combos,
            AnalysisOptions {
                resamples: 500,
                seed: 1,
            },
        )
        .unwrap();
        for cell in &a.cells {
            let members: Vec<&ComboRow> = combos
                .iter()
                .filter(|c| c.key.backend == cell.backend && c.key.mode == cell.mode)
                .collect();
            let mean_wlc = members.iter().map(|c| c.wlc_pct).sum::<f64>() / members.len() as f64;
            assert!((mean_wlc - cell.wlc_pct).abs() < 1e-9);
            assert_eq!(cell.ra.bound, 0.0);
        }
        assert!((a.cell("gemini", Mode::Mj).unwrap().wlc_pct - 61.11).abs() < 1e-9);
    }

    #[test]
    fn single_backend_drops_backend_terms() {
        let combos = expand_cells(&fixture()).unwrap();
        let a = analyze(
            &combos,
            AnalysisOptions {
                resamples: 100,
                seed: 1,
            },
        )
        .unwrap();
        let ra = a.anova_for("ra").unwrap();
        let terms: Vec<&str> = ra.rows.iter().map(|r| r.term.as_str()).collect();
        assert_eq!(terms, ["mode", "constraint", "transport"]);
        assert!(a.notes.iter().any(|n| n.contains("backend")));
    }

    #[test]
    fn contrasts_from_fixture() {
        let combos = expand_cells(&fixture()).unwrap();
        let a = analyze(
            &combos,
            AnalysisOptions {
                resamples: 1000,
                seed: 1,
            },
        )
        .unwrap();
        let c = a.contrast("gemini", "MCLR vs MJ", "tokens").unwrap();
        assert_eq!(c.delta, -80_327.0);
        assert_eq!((c.ci_low, c.ci_high), (c.delta, c.delta));
    }

    #[test]
    fn empty_input() {
        assert!(analyze(&[], AnalysisOptions::default()).is_err());
    }
}
