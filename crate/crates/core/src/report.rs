//! Markdown and CSV rendering of an [`Analysis`].
//!
//! Percentages and latencies are shown to two decimals, tokens as integers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::analysis::Analysis;
use crate::error::{Error, Result};
use crate::math;
use crate::metrics::CellStat;
use crate::record::{FailureClass, RouteLabel};

fn fix2(v: f64) -> String {
    let r = math::round_to(v, 2);
    format!("{:.2}", if r == 0.0 { 0.0 } else { r })
}

fn int(v: f64) -> String {
    let r = math::round(v);
    format!("{:.0}", if r == 0.0 { 0.0 } else { r })
}

fn stat2(s: &CellStat) -> String {
    format!("{} ± {}", fix2(s.mean), fix2(s.bound))
}

fn stat_int(s: &CellStat) -> String {
    format!("{} ± {}", int(s.mean), int(s.bound))
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_else(|| "n/a".into())
}

fn p_value(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{:.3}", math::round_to(p, 3))
    }
}

fn f_value(f: f64) -> String {
    if f.is_infinite() {
        "inf".into()
    } else {
        fix2(f)
    }
}

fn metric_label(metric: &str) -> &str {
    match metric {
        "ra" => "RA%",
        "sr" => "SR%",
        "fc" => "FC%",
        "p50_ms" => "p50 latency (ms)",
        "tokens" => "Tokens",
        other => other,
    }
}

/// A rendered table: a header plus string cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: &'static str,
    pub title: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, title: &'static str, header: &[&str]) -> Self {
        Self {
            name,
            title,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| {} |", self.header.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(self.header.len()));
        for r in &self.rows {
            let _ = writeln!(s, "| {} |", r.join(" | "));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let line = |cells: &[String]| cells.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(",");
        let mut s = line(&self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&line(r));
            s.push('\n');
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.into()
    }
}

fn cells_table(a: &Analysis) -> Table {
    let mut t = Table::new(
        "cells",
        "Backend x mode means",
        &["Backend", "Mode", "FC%", "RA%", "SR%", "p50 latency (ms)", "Tokens"],
    );
    for c in &a.cells {
        t.rows.push(alloc::vec![
            c.backend.clone(),
            c.mode.to_string(),
            stat2(&c.fc),
            stat2(&c.ra),
            opt(c.sr.as_ref(), stat2),
            opt(c.p50_ms.as_ref(), stat2),
            stat_int(&c.tokens),
        ]);
    }
    t
}

fn anova_table(a: &Analysis) -> Table {
    let mut t = Table::new(
        "anova",
        "Factorial effects (Type-II ANOVA)",
        &["Metric", "Effect", "df", "F", "p", "Partial eta squared"],
    );
    for m in &a.anova {
        for r in &m.table.rows {
            t.rows.push(alloc::vec![
                metric_label(&m.metric).into(),
                r.term.clone(),
                r.df.to_string(),
                f_value(r.f),
                p_value(r.p),
                format!("{:.3}", math::round_to(r.partial_eta_sq, 3)),
            ]);
        }
    }
    t
}

fn contrast_table(a: &Analysis) -> Table {
    let mut t = Table::new(
        "contrasts",
        "Targeted contrasts (delta [95% CI])",
        &["Backend", "Contrast", "RA%", "SR%", "p50 latency (ms)", "Tokens"],
    );
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for c in &a.contrasts {
        if !keys.contains(&(c.backend.as_str(), c.pair.as_str())) {
            keys.push((c.backend.as_str(), c.pair.as_str()));
        }
    }
    for (backend, pair) in keys {
        let cell = |metric: &str| match a.contrast(backend, pair, metric) {
            Some(c) if metric == "tokens" => format!("{} [{}, {}]", int(c.delta), int(c.ci_low), int(c.ci_high)),
            Some(c) => format!("{} [{}, {}]", fix2(c.delta), fix2(c.ci_low), fix2(c.ci_high)),
            None => "n/a".into(),
        };
        t.rows.push(alloc::vec![
            backend.into(),
            pair.into(),
            cell("ra"),
            cell("sr"),
            cell("p50_ms"),
            cell("tokens"),
        ]);
    }
    t
}

fn wlc_table(a: &Analysis) -> Table {
    let mut t = Table::new("wlc", "Workflow lower-bound completion", &["Backend", "Mode", "WLC%"]);
    for c in &a.cells {
        t.rows
            .push(alloc::vec![c.backend.clone(), c.mode.to_string(), fix2(c.wlc_pct)]);
    }
    t
}

fn route_table(a: &Analysis) -> Table {
    let mut t = Table::new(
        "route_slices",
        "Route-slice accuracy",
        &["Backend", "Mode", "chat", "task", "dev", "doc"],
    );
    for c in &a.cells {
        let mut row = alloc::vec![c.backend.clone(), c.mode.to_string()];
        for r in RouteLabel::ALL {
            row.push(opt(c.per_route_accuracy.get(&r).copied(), fix2));
        }
        t.rows.push(row);
    }
    t
}

fn taxonomy_table(a: &Analysis) -> Table {
    let mut header = alloc::vec!["Backend", "Mode"];
    header.extend(FailureClass::ALL.iter().map(|c| c.as_str()));
    let mut t = Table::new("taxonomy", "Failure taxonomy", &header);
    for c in &a.cells {
        let mut row = alloc::vec![c.backend.clone(), c.mode.to_string()];
        for class in FailureClass::ALL {
            row.push(c.taxonomy_counts.get(&class).copied().unwrap_or(0).to_string());
        }
        t.rows.push(row);
    }
    let mut total = alloc::vec!["all".to_string(), "all".to_string()];
    for class in FailureClass::ALL {
        total.push(a.taxonomy_totals.get(&class).copied().unwrap_or(0).to_string());
    }
    t.rows.push(total);
    t
}

fn tail_table(a: &Analysis) -> Table {
    let mut t = Table::new(
        "tail_amplification",
        "Tail amplification (p95 / p50)",
        &["Backend", "Mode", "p50 (ms)", "p95 (ms)", "p95/p50"],
    );
    for c in &a.cells {
        t.rows.push(alloc::vec![
            c.backend.clone(),
            c.mode.to_string(),
            opt(c.p50_ms.map(|s| s.mean), fix2),
            opt(c.p95_ms, fix2),
            opt(c.tail_amp, fix2),
        ]);
    }
    t
}

/// Every table of the report, in display order.
pub fn tables(a: &Analysis) -> Result<Vec<Table>> {
    if a.cells.is_empty() {
        return Err(Error::MissingInput("cells"));
    }
    Ok(alloc::vec![
        cells_table(a),
        anova_table(a),
        contrast_table(a),
        wlc_table(a),
        route_table(a),
        taxonomy_table(a),
        tail_table(a),
    ])
}

pub fn render_markdown(a: &Analysis) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "# Routing benchmark report\n");
    let _ = writeln!(
        s,
        "{} combos, {} rows, {} bootstrap resamples, seed {}.\n",
        a.combos.len(),
        a.total_rows,
        a.options.resamples,
        a.options.seed
    );
    for t in tables(a)? {
        let _ = writeln!(s, "## {}\n", t.title);
        let _ = writeln!(s, "{}", t.to_markdown());
    }
    if !a.notes.is_empty() {
        let _ = writeln!(s, "## Notes\n");
        for n in &a.notes {
            let _ = writeln!(s, "- {n}");
        }
    }
    Ok(s)
}
