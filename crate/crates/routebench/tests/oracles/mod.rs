//! Reference computations for the statistics layer. Nothing here calls
//! into the library's numerics.

#![allow(dead_code)]

/// Solves `(X'X) b = X'y` by Gauss-Jordan elimination with partial pivoting.
/// `x` is row-major with `cols` columns.
pub fn normal_equations(x: &[f64], cols: usize, y: &[f64]) -> Vec<f64> {
    let rows = y.len();
    let mut a = vec![0.0; cols * (cols + 1)];
    let w = cols + 1;
    for i in 0..cols {
        for j in 0..cols {
            a[i * w + j] = (0..rows).map(|r| x[r * cols + i] * x[r * cols + j]).sum();
        }
        a[i * w + cols] = (0..rows).map(|r| x[r * cols + i] * y[r]).sum();
    }
    for k in 0..cols {
        let p = (k..cols)
            .max_by(|&i, &j| a[i * w + k].abs().total_cmp(&a[j * w + k].abs()))
            .unwrap();
        for j in 0..w {
            a.swap(k * w + j, p * w + j);
        }
        let pivot = a[k * w + k];
        assert!(pivot.abs() > 1e-12, "singular normal equations");
        for j in 0..w {
            a[k * w + j] /= pivot;
        }
        for i in 0..cols {
            if i != k {
                let f = a[i * w + k];
                for j in 0..w {
                    a[i * w + j] -= f * a[k * w + j];
                }
            }
        }
    }
    (0..cols).map(|i| a[i * w + cols]).collect()
}

pub fn rss(x: &[f64], cols: usize, y: &[f64]) -> f64 {
    let b = normal_equations(x, cols, y);
    y.iter()
        .enumerate()
        .map(|(r, v)| {
            let fit: f64 = (0..cols).map(|c| x[r * cols + c] * b[c]).sum();
            (v - fit) * (v - fit)
        })
        .sum()
}

/// Level indices of one observation: backend, mode, constraint, transport.
pub type Cell = [usize; 4];

/// The full 3 x 4 x 2 x 2 factorial, one row per combination.
pub fn full_factorial() -> Vec<Cell> {
    let mut out = Vec::new();
    for m in 0..4 {
        for b in 0..3 {
            for c in 0..2 {
                for t in 0..2 {
                    out.push([b, m, c, t]);
                }
            }
        }
    }
    out
}

fn dummies(level: usize, n: usize) -> Vec<f64> {
    (1..n).map(|l| if level == l { 1.0 } else { 0.0 }).collect()
}

/// Design columns of a term block: 0 backend, 1 mode, 2 backend:mode,
/// 3 constraint, 4 transport.
fn block(cell: &Cell, term: usize) -> Vec<f64> {
    match term {
        0 => dummies(cell[0], 3),
        1 => dummies(cell[1], 4),
        2 => {
            let b = dummies(cell[0], 3);
            let m = dummies(cell[1], 4);
            b.iter().flat_map(|x| m.iter().map(move |y| x * y)).collect()
        }
        3 => dummies(cell[2], 2),
        4 => dummies(cell[3], 2),
        _ => unreachable!(),
    }
}

fn matrix(cells: &[Cell], terms: &[usize]) -> (Vec<f64>, usize) {
    let mut data = Vec::new();
    let mut cols = 0;
    for cell in cells {
        let mut row = vec![1.0];
        for &t in terms {
            row.extend(block(cell, t));
        }
        cols = row.len();
        data.extend(row);
    }
    (data, cols)
}

/// Sequential (Type I) sums of squares for the terms in order backend,
/// mode, backend:mode, constraint, transport.
pub fn sequential_ss(cells: &[Cell], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev = {
        let (x, c) = matrix(cells, &[]);
        rss(&x, c, y)
    };
    for k in 0..5 {
        let terms: Vec<usize> = (0..=k).collect();
        let (x, c) = matrix(cells, &terms);
        let r = rss(&x, c, y);
        out.push(prev - r);
        prev = r;
    }
    out
}

fn ln_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// `∫_0^c t^(a-1) (1-t)^(b-1) dt` by tanh-sinh quadrature.
pub fn beta_integral(a: f64, b: f64, c: f64) -> f64 {
    let h = 1.0 / 64.0;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    let n = (6.0 / h) as i64;
    for k in -n..=n {
        let u = k as f64 * h;
        let z = 2.0 * half_pi * u.sinh();
        // t = c * sigmoid(z); dt/du = c * pi cosh(u) sigmoid(z) sigmoid(-z).
        let ln_t = c.ln() + ln_sigmoid(z);
        let ln_1mt = if c == 1.0 {
            ln_sigmoid(-z)
        } else {
            (-(ln_t.exp())).ln_1p()
        };
        let ln_jac = c.ln() + (2.0 * half_pi * u.cosh()).ln() + ln_sigmoid(z) + ln_sigmoid(-z);
        let term = ((a - 1.0) * ln_t + (b - 1.0) * ln_1mt + ln_jac).exp();
        if term.is_finite() {
            sum += term;
        }
    }
    sum * h
}

/// `P(F > f)` for the F(df1, df2) distribution, from the Beta form
/// `I_x(df2/2, df1/2)` with `x = df2/(df2 + df1 f)`, both integrals by
/// quadrature.
pub fn f_tail_quadrature(f: f64, df1: f64, df2: f64) -> f64 {
    let (a, b) = (df2 / 2.0, df1 / 2.0);
    let x = df2 / (df2 + df1 * f);
    // Integrate the smaller side for accuracy.
    let full = beta_integral(a, b, 1.0);
    if x <= 0.5 {
        beta_integral(a, b, x) / full
    } else {
        1.0 - beta_integral(b, a, 1.0 - x) / full
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    (centre - half, centre + half)
}
