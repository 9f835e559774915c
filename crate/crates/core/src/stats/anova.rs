//! Type-II ANOVA by model comparison.
//!
//! For a term `T`, the reference model holds every term that does not
//! contain `T`; the sum of squares is the drop in RSS when `T` is added to
//! it. With `backend * mode`, the backend main effect is therefore tested
//! with mode present and the interaction absent, and the interaction is
//! tested against the main-effects model. F uses the full-model residual.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::design::{FactorialModel, Term};
use crate::stats::linalg::fit_ols;
use crate::stats::special::f_upper_tail;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaRow {
    pub term: String,
    pub sum_sq: f64,
    pub df: usize,
    /// Infinite when the residual is exactly zero and the term is not.
    #[serde(rename = "F")]
    pub f: f64,
    pub p: f64,
    pub partial_eta_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub rows: Vec<AnovaRow>,
    pub residual_ss: f64,
    pub residual_df: usize,
}

impl AnovaTable {
    pub fn row(&self, term: &str) -> Option<&AnovaRow> {
        self.rows.iter().find(|r| r.term == term)
    }
}

fn rss_of(model: &FactorialModel, rows: &[Vec<usize>], y: &[f64], terms: &[&Term]) -> Result<f64> {
    let x = model.design(rows, terms)?;
    Ok(fit_ols(&x, y)?.rss)
}

pub fn anova_type2(model: &FactorialModel, rows: &[Vec<usize>], y: &[f64]) -> Result<AnovaTable> {
    if rows.len() != y.len() {
        return Err(Error::Dimension(alloc::format!(
            "{} observations but {} responses",
            rows.len(),
            y.len()
        )));
    }
    for term in &model.terms {
        if model.term_df(term) == 0 {
            return Err(Error::NonEstimable(model.term_name(term)));
        }
    }
    let p = model.rank();
    if rows.len() <= p {
        return Err(Error::Dimension(alloc::format!(
            "{} observations leave no residual degrees of freedom for {p} parameters",
            rows.len()
        )));
    }
    let residual_df = rows.len() - p;
    let all: Vec<&Term> = model.terms.iter().collect();
    let rss_full = rss_of(model, rows, y, &all)?;

    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let tol = 1e-12 * tss;

    let mut out = Vec::with_capacity(model.terms.len());
    for term in &model.terms {
        let reduced: Vec<&Term> = model.terms.iter().filter(|t| !t.contains(term)).collect();
        let mut augmented = reduced.clone();
        augmented.push(term);
        let ss = (rss_of(model, rows, y, &reduced)? - rss_of(model, rows, y, &augmented)?).max(0.0);
        let df = model.term_df(term);
        let (f, pval, eta) = if rss_full <= tol {
            if ss <= tol {
                (0.0, 1.0, 0.0)
            } else {
                (f64::INFINITY, 0.0, 1.0)
            }
        } else {
            let f = (ss / df as f64) / (rss_full / residual_df as f64);
            (f, f_upper_tail(f, df as f64, residual_df as f64), ss / (ss + rss_full))
        };
        out.push(AnovaRow {
            term: model.term_name(term),
            sum_sq: ss,
            df,
            f,
            p: pval,
            partial_eta_sq: eta,
        });
    }
    Ok(AnovaTable {
        rows: out,
        residual_ss: rss_full,
        residual_df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn model() -> FactorialModel {
        FactorialModel::routing(
            &["gemini", "llama", "openai"],
            &["MJ", "SJ", "MJS", "MCLR"],
            &["limited", "unlimited"],
            &["non_stream", "stream"],
        )
    }

    fn full_rows() -> Vec<Vec<usize>> {
        let mut rows = Vec::new();
        for m in 0..4 {
            for b in 0..3 {
                for c in 0..2 {
                    for t in 0..2 {
                        rows.push(alloc::vec![b, m, c, t]);
                    }
                }
            }
        }
        rows
    }

    #[test]
    fn residual_df_is_34() {
        let rows = full_rows();
        let y: Vec<f64> = (0..48).map(|i| rng::uniform(&[1, i])).collect();
        let table = anova_type2(&model(), &rows, &y).unwrap();
        assert_eq!(table.residual_df, 34);
        let dfs: Vec<usize> = table.rows.iter().map(|r| r.df).collect();
        assert_eq!(dfs, [2, 3, 6, 1, 1]);
    }

    #[test]
    fn constant_response_has_no_effects() {
        let rows = full_rows();
        let table = anova_type2(&model(), &rows, &[42.0; 48]).unwrap();
        for r in &table.rows {
            assert_eq!((r.f, r.p, r.partial_eta_sq), (0.0, 1.0, 0.0));
        }
    }

    #[test]
    fn pure_backend_effect() {
        let rows = full_rows();
        let y: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| [10.0, 30.0, 55.0][r[0]] + 1e-3 * rng::standard_normal(&[5, i as u64]))
            .collect();
        let table = anova_type2(&model(), &rows, &y).unwrap();
        let backend = table.row("backend").unwrap();
        assert!(backend.partial_eta_sq > 0.99);
        assert!(backend.p < 1e-10);
        for other in ["mode", "backend:mode", "constraint", "transport"] {
            let r = table.row(other).unwrap();
            assert!(r.sum_sq < 1e-3, "{other}: {}", r.sum_sq);
        }
    }

    #[test]
    fn scale_equivariance() {
        let rows = full_rows();
        let y: Vec<f64> = (0..48).map(|i| rng::standard_normal(&[3, i])).collect();
        let c = 7.5;
        let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
        let a = anova_type2(&model(), &rows, &y).unwrap();
        let b = anova_type2(&model(), &rows, &scaled).unwrap();
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert!((rb.sum_sq - c * c * ra.sum_sq).abs() <= 1e-9 * rb.sum_sq.max(1.0));
            assert!((rb.f - ra.f).abs() <= 1e-9 * ra.f.max(1.0));
            assert!((rb.p - ra.p).abs() < 1e-10);
            assert!((rb.partial_eta_sq - ra.partial_eta_sq).abs() < 1e-12);
        }
    }

    #[test]
    fn single_level_factor_is_not_estimable() {
        let m = FactorialModel::routing(
            &["gemini"],
            &["MJ", "SJ"],
            &["limited", "unlimited"],
            &["non_stream", "stream"],
        );
        let rows: Vec<Vec<usize>> = (0..8).map(|i| alloc::vec![0, i % 2, (i / 2) % 2, i / 4]).collect();
        let err = anova_type2(&m, &rows, &[0.0; 8]).unwrap_err();
        assert_eq!(err, Error::NonEstimable("backend".into()));
    }

    #[test]
    fn eta_in_unit_interval() {
        let rows = full_rows();
        for s in 0..20 {
            let y: Vec<f64> = (0..48)
                .map(|i| rng::standard_normal(&[s, i]) * (1 + i % 5) as f64)
                .collect();
            for r in anova_type2(&model(), &rows, &y).unwrap().rows {
                assert!((0.0..=1.0).contains(&r.partial_eta_sq));
                assert!((0.0..=1.0).contains(&r.p));
            }
        }
    }
}
