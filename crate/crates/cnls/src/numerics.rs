//! Small numerical utilities shared by the solver modules: fixed-step RK4 for
//! two-state radial ODEs, composite Simpson quadrature, linear least squares
//! with a condition gate, and a tridiagonal solve.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// One classic RK4 step for y' = f(x, y) with y = (u, v).
pub fn rk4_step<F>(f: &F, x: f64, y: [f64; 2], h: f64) -> [f64; 2]
where
    F: Fn(f64, [f64; 2]) -> [f64; 2],
{
    let k1 = f(x, y);
    let k2 = f(x + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = f(x + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = f(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Advance from x over a span of `h_total` using `substeps` RK4 steps.
pub fn rk4_advance<F>(f: &F, x: f64, y: [f64; 2], h_total: f64, substeps: usize) -> [f64; 2]
where
    F: Fn(f64, [f64; 2]) -> [f64; 2],
{
    let h = h_total / substeps as f64;
    let mut yy = y;
    let mut xx = x;
    for _ in 0..substeps {
        yy = rk4_step(f, xx, yy, h);
        xx += h;
    }
    yy
}

/// Composite Simpson rule over uniformly spaced samples.
///
/// Requires at least 3 samples. An even sample count (odd interval count) is
/// handled by a trapezoid correction on the final interval.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    assert!(n >= 3, "simpson needs at least 3 samples");
    let m = if n % 2 == 1 { n } else { n - 1 };
    let mut acc = values[0] + values[m - 1];
    let mut i = 1;
    while i < m - 1 {
        acc += 4.0 * values[i];
        i += 2;
    }
    let mut j = 2;
    while j < m - 1 {
        acc += 2.0 * values[j];
        j += 2;
    }
    let mut total = acc * h / 3.0;
    if n % 2 == 0 {
        total += 0.5 * h * (values[n - 2] + values[n - 1]);
    }
    total
}

/// Result of a linear least-squares fit.
#[derive(Debug, Clone)]
pub struct LlsFit {
    pub coeffs: Vec<f64>,
    /// Root-mean-square residual of the fit.
    pub rms_residual: f64,
    /// 2-norm condition number of the design matrix.
    pub condition: f64,
}

/// Solve min ||A c - b||_2 by SVD, rejecting design matrices with condition
/// number above `cond_limit` (pass `f64::INFINITY` to disable the gate).
pub fn least_squares(rows: &[Vec<f64>], rhs: &[f64], cond_limit: f64) -> Result<LlsFit> {
    let m = rows.len();
    assert!(m >= 1 && m == rhs.len());
    let p = rows[0].len();
    let a = DMatrix::from_fn(m, p, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(rhs);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > cond_limit {
        return Err(Error::IllConditionedFit { cond: condition });
    }
    let c = svd
        .solve(&b, 1e-14 * smax)
        .map_err(|e| Error::Nonconvergence(format!("svd solve: {e}")))?;
    let resid = &a * &c - &b;
    let rms = (resid.norm_squared() / m as f64).sqrt();
    Ok(LlsFit {
        coeffs: c.iter().copied().collect(),
        rms_residual: rms,
        condition,
    })
}

/// Thomas algorithm for a tridiagonal system (sub, diag, sup), overwriting
/// nothing; returns the solution. `sub[0]` and `sup[n-1]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Coefficient of determination of a fit y ~ yhat.
pub fn r_squared(y: &[f64], yhat: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(yhat).map(|(v, w)| (v - w).powi(2)).sum();
    1.0 - ss_res / ss_tot
}
