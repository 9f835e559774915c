//! Analysis inputs and outputs on disk.

use std::collections::BTreeMap;
use std::path::Path;

use routebench_core::analysis::{analyze, combo_rows, expand_cells, Analysis, AnalysisOptions, CellValues};
use routebench_core::recommend::{recommend, CellMetrics, DeploymentPolicy, Recommendation};
use routebench_core::report::{render_markdown, tables};
use routebench_core::{schema_versions, Mode, RouteLabel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::log_file::read_log;

/// File the recommender reads from an analysis directory.
pub const CELLS_FILE: &str = "cells.json";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const REPORT_FILE: &str = "report.md";
pub const RECOMMENDATION_FILE: &str = "recommendation.json";

fn parse_opt(s: &str) -> std::result::Result<Option<f64>, std::num::ParseFloatError> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("n/a") {
        Ok(None)
    } else {
        s.parse().map(Some)
    }
}

#[derive(Debug, Deserialize)]
struct CellCsvRow {
    backend: String,
    mode: String,
    fc_pct: String,
    ra_pct: String,
    sr_pct: String,
    p50_ms: String,
    tokens: String,
}

/// Reads backend x mode cell values from CSV with columns
/// `backend,mode,fc_pct,ra_pct,sr_pct,p50_ms,tokens`; `sr_pct` and
/// `p50_ms` may be empty. Extra columns are ignored.
pub fn load_cells_csv(path: &Path) -> Result<Vec<CellValues>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Malformed {
        path: path.into(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<CellCsvRow>().enumerate() {
        let line = i + 2;
        let bad = |message: String| Error::Malformed {
            path: path.into(),
            line,
            message,
        };
        let r = rec.map_err(|e| bad(e.to_string()))?;
        let num = |name: &str, v: &str| -> Result<f64> {
            v.trim()
                .parse()
                .map_err(|_| bad(format!("{name} `{v}` is not a number")))
        };
        out.push(CellValues {
            mode: r.mode.parse::<Mode>().map_err(bad)?,
            fc_pct: num("fc_pct", &r.fc_pct)?,
            ra_pct: num("ra_pct", &r.ra_pct)?,
            sr_pct: parse_opt(&r.sr_pct).map_err(|_| bad(format!("sr_pct `{}` is not a number", r.sr_pct)))?,
            p50_ms: parse_opt(&r.p50_ms).map_err(|_| bad(format!("p50_ms `{}` is not a number", r.p50_ms)))?,
            tokens: num("tokens", &r.tokens)?,
            backend: r.backend,
            per_route_accuracy: BTreeMap::new(),
        });
    }
    if out.is_empty() {
        return Err(Error::Malformed {
            path: path.into(),
            line: 1,
            message: "no cells".into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct SliceCsvRow {
    backend: String,
    mode: String,
    route: String,
    accuracy_pct: f64,
}

/// Merges route-slice accuracies (`backend,mode,route,accuracy_pct`) into
/// cell values.
pub fn load_route_slices(path: &Path, cells: &mut [CellValues]) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Malformed {
        path: path.into(),
        line: 0,
        message: e.to_string(),
    })?;
    for (i, rec) in rdr.deserialize::<SliceCsvRow>().enumerate() {
        let bad = |message: String| Error::Malformed {
            path: path.into(),
            line: i + 2,
            message,
        };
        let r = rec.map_err(|e| bad(e.to_string()))?;
        let mode: Mode = r.mode.parse().map_err(bad)?;
        let route: RouteLabel = r
            .route
            .parse()
            .map_err(|_| bad(format!("unknown route `{}`", r.route)))?;
        let cell = cells
            .iter_mut()
            .find(|c| c.backend == r.backend && c.mode == mode)
            .ok_or_else(|| bad(format!("no cell {}/{mode}", r.backend)))?;
        cell.per_route_accuracy.insert(route, r.accuracy_pct);
    }
    Ok(())
}

pub fn analyze_log(path: &Path, opts: AnalysisOptions) -> Result<Analysis> {
    let (_, rows) = read_log(path)?;
    let combos = combo_rows(&rows)?;
    Ok(analyze(&combos, opts)?)
}

pub fn analyze_cells(cells: &[CellValues], opts: AnalysisOptions) -> Result<Analysis> {
    Ok(analyze(&expand_cells(cells)?, opts)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct CellsDocument {
    schema_version: String,
    cells: Vec<CellMetrics>,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the Markdown report, one CSV per table, the full analysis as JSON
/// and the cell metrics the recommender consumes.
pub fn write_outputs(dir: &Path, a: &Analysis) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: String, contents: String| -> Result<()> {
        write(&dir.join(&name), contents)?;
        written.push(name);
        Ok(())
    };
    put(REPORT_FILE.into(), render_markdown(a)?)?;
    for t in tables(a)? {
        put(format!("{}.csv", t.name), t.to_csv())?;
    }
    put(ANALYSIS_FILE.into(), serde_json::to_string_pretty(a)?)?;
    let doc = CellsDocument {
        schema_version: schema_versions::METRIC_TABLES.into(),
        cells: a.cell_metrics(),
    };
    put(CELLS_FILE.into(), serde_json::to_string_pretty(&doc)?)?;
    Ok(written)
}

pub fn load_cell_metrics(dir: &Path) -> Result<Vec<CellMetrics>> {
    let path = dir.join(CELLS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let doc: CellsDocument = serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if doc.schema_version != schema_versions::METRIC_TABLES {
        return Err(Error::Malformed {
            path,
            line: 1,
            message: format!(
                "schema `{}` is not {}",
                doc.schema_version,
                schema_versions::METRIC_TABLES
            ),
        });
    }
    Ok(doc.cells)
}

/// Reads a policy document; `schema_version` is optional but must match
/// when present, and unknown keys are rejected.
pub fn load_policy(path: &Path) -> Result<DeploymentPolicy> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read policy {}: {e}", path.display())))?;
    let invalid = |e: String| Error::Usage(format!("invalid policy {}: {e}", path.display()));
    let mut doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
    if let Some(obj) = doc.as_object_mut() {
        if let Some(v) = obj.remove("schema_version") {
            if v != schema_versions::POLICY {
                return Err(invalid(format!("schema {v} is not {}", schema_versions::POLICY)));
            }
        }
    }
    let policy: DeploymentPolicy = serde_json::from_value(doc).map_err(|e| invalid(e.to_string()))?;
    policy.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(policy)
}

pub fn recommend_dir(dir: &Path, policy: &DeploymentPolicy) -> Result<Recommendation> {
    let cells = load_cell_metrics(dir)?;
    Ok(recommend(&cells, policy)?)
}
