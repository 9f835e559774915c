//! Least squares by Householder QR.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Dense row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(rows: usize, names: Vec<String>) -> Self {
        let cols = names.len();
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            names,
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub rss: f64,
    pub rank: usize,
    pub fitted: Vec<f64>,
}

/// Relative threshold below which a column is treated as dependent on the
/// columns before it.
const RANK_TOL: f64 = 1e-10;

/// Fits `y ~ X` by least squares.
///
/// The residual sum of squares is read off the tail of `Q'y`, so it is
/// non-negative by construction. A column that lies in the span of the
/// columns before it makes the fit fail with [`Error::RankDeficient`],
/// naming every such column.
pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<OlsFit> {
    let (n, p) = (x.rows, x.cols);
    if y.len() != n {
        return Err(Error::Dimension(alloc::format!(
            "{n} design rows but {} responses",
            y.len()
        )));
    }
    if p > n {
        return Err(Error::RankDeficient {
            columns: x.names[n..].to_vec(),
        });
    }

    // Column-major working copy.
    let mut a: Vec<Vec<f64>> = (0..p).map(|c| (0..n).map(|r| x.get(r, c)).collect()).collect();
    let mut qty = y.to_vec();
    let scale = a
        .iter()
        .map(|col| math::sqrt(col.iter().map(|v| v * v).sum()))
        .fold(0.0f64, f64::max)
        .max(1.0);

    let mut pivots: Vec<usize> = Vec::with_capacity(p);
    let mut dependent: Vec<String> = Vec::new();
    let mut r = 0usize;
    for k in 0..p {
        let norm = math::sqrt(a[k][r..].iter().map(|v| v * v).sum());
        if norm <= RANK_TOL * scale {
            dependent.push(x.names[k].clone());
            continue;
        }
        let alpha = if a[k][r] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][r..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k) {
                let dot: f64 = v.iter().zip(&col[r..]).map(|(vi, ci)| vi * ci).sum();
                let f = 2.0 * dot / vnorm2;
                for (ci, vi) in col[r..].iter_mut().zip(&v) {
                    *ci -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&qty[r..]).map(|(vi, yi)| vi * yi).sum();
            let f = 2.0 * dot / vnorm2;
            for (yi, vi) in qty[r..].iter_mut().zip(&v) {
                *yi -= f * vi;
            }
        }
        pivots.push(k);
        r += 1;
    }
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }

    // Back substitution on the p x p upper triangle.
    let mut beta = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for j in i + 1..p {
            s -= a[j][i] * beta[j];
        }
        beta[i] = s / a[i][i];
    }
    let rss: f64 = qty[p..].iter().map(|v| v * v).sum();
    let fitted = (0..n)
        .map(|row| x.row(row).iter().zip(&beta).map(|(xi, bi)| xi * bi).sum())
        .collect();
    Ok(OlsFit {
        coefficients: beta,
        rss,
        rank: pivots.len(),
        fitted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;

    fn matrix(rows: &[&[f64]]) -> DesignMatrix {
        let cols = rows[0].len();
        let mut m = DesignMatrix::new(rows.len(), (0..cols).map(|c| format!("x{c}")).collect());
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m.set(r, c, *v);
            }
        }
        m
    }

    #[test]
    fn intercept_only() {
        let x = matrix(&[&[1.0], &[1.0], &[1.0]]);
        let fit = fit_ols(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.rss - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_has_zero_rss() {
        let x = matrix(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0], &[1.0, 3.0]]);
        let fit = fit_ols(&x, &[3.0, 5.0, 7.0, 9.0]).unwrap();
        assert!(fit.rss.abs() < 1e-10);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn reports_dependent_columns() {
        let x = matrix(&[&[1.0, 2.0, 0.0], &[1.0, 2.0, 1.0], &[1.0, 2.0, 5.0]]);
        let err = fit_ols(&x, &[1.0, 2.0, 3.0]).unwrap_err();
        assert_eq!(
            err,
            Error::RankDeficient {
                columns: alloc::vec!["x1".to_string()]
            }
        );
    }

    #[test]
    fn length_mismatch() {
        let x = matrix(&[&[1.0], &[1.0]]);
        assert!(matches!(fit_ols(&x, &[1.0]), Err(Error::Dimension(_))));
    }
}
