//! Radial ground states of -Δw + λw = μw³ in dimension N, their tail
//! constants, energies and the principal coupling eigenvalue.
//!
//! The solver shoots on the center value w(0): trajectories below the ground
//! state turn around and grow, trajectories above it cross zero, and bisection
//! pins the separatrix. The forward pass is only trusted while the solution is
//! large compared to the amplified shooting error, so the far field is rebuilt
//! by integrating the linearized equation inward from beyond r_max (the
//! decaying solution is stable in that direction) and gluing at the switch
//! radius.

use crate::error::{Error, Result};
use crate::numerics::{least_squares, rk4_advance, simpson, solve_tridiagonal};
use serde::{Deserialize, Serialize};

/// Parameters of the scalar field equation. N = 1 is accepted only because it
/// has closed-form solutions useful as oracles; production systems use N = 2, 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarParams {
    pub lambda: f64,
    pub mu: f64,
    pub dim: usize,
}

impl ScalarParams {
    pub fn new(lambda: f64, mu: f64, dim: usize) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParam(format!("lambda must be positive, got {lambda}")));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::InvalidParam(format!("mu must be positive, got {mu}")));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::BadDimension(dim));
        }
        Ok(Self { lambda, mu, dim })
    }

    /// Default truncation radius, 25/√λ.
    pub fn default_r_max(&self) -> f64 {
        25.0 / self.lambda.sqrt()
    }
}

/// Surface measure of the unit sphere in R^N (N = 1 counts both half-lines).
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => unreachable!(),
    }
}

/// A solved radial ground state on a uniform grid, with fitted tail data and
/// the integrals entering the energy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialProfile {
    pub params: ScalarParams,
    pub r_max: f64,
    pub dr: f64,
    /// w(r_i) on r_i = i * dr.
    pub w: Vec<f64>,
    /// w'(r_i).
    pub dw: Vec<f64>,
    /// Tail amplitude from the least-squares window fit.
    pub tail_constant: f64,
    /// Fitted exponential decay rate (target √λ).
    pub decay_rate: f64,
    /// Residual of the tail fit (log scale).
    pub tail_fit_residual: f64,
    pub energy: f64,
    pub int_w2: f64,
    pub int_w4: f64,
    pub int_grad2: f64,
    /// Sup-norm of the ODE residual of the stored samples, relative to w(0).
    pub residual_sup: f64,
    /// Tail amplitude matched at the last sample so evaluation is continuous
    /// across r_max.
    seam_constant: f64,
}

const SUBSTEPS: usize = 16;

/// Sample density: keeps dr·√λ ≈ 1/160 so the stored profile resolves the
/// core curvature uniformly across parameter scales.
fn interval_count(r_max: f64, sqrt_lambda: f64) -> usize {
    let n = (160.0 * r_max * sqrt_lambda).ceil() as usize;
    (n.max(3200) + 1) & !1
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shot {
    Crossing,
    Blowup,
    Undecided,
}

fn rhs(params: &ScalarParams) -> impl Fn(f64, [f64; 2]) -> [f64; 2] + '_ {
    let (lam, mu, n) = (params.lambda, params.mu, params.dim as f64);
    move |r: f64, y: [f64; 2]| {
        let friction = if r > 0.0 { (n - 1.0) / r * y[1] } else { 0.0 };
        [y[1], lam * y[0] - mu * y[0] * y[0] * y[0] - friction]
    }
}

/// Series start near the origin: w ≈ a + b r² + c r⁴ + d r⁶ with the
/// coefficients forced by the equation (w'(0) = 0).
fn series_start(params: &ScalarParams, a: f64, r: f64) -> [f64; 2] {
    let n = params.dim as f64;
    let (lam, mu) = (params.lambda, params.mu);
    let b = (lam * a - mu * a * a * a) / (2.0 * n);
    let c = b * (lam - 3.0 * mu * a * a) / (4.0 * n + 8.0);
    let d = (c * (lam - 3.0 * mu * a * a) - 3.0 * mu * a * b * b) / (6.0 * n + 24.0);
    [
        a + b * r * r + c * r.powi(4) + d * r.powi(6),
        2.0 * b * r + 4.0 * c * r.powi(3) + 6.0 * d * r.powi(5),
    ]
}

fn classify(params: &ScalarParams, a: f64, r_max: f64, dr: f64) -> Shot {
    let f = rhs(params);
    let mut r = dr;
    let mut y = series_start(params, a, r);
    let n = (r_max / dr) as usize;
    for _ in 1..n {
        if y[0] <= 0.0 {
            return Shot::Crossing;
        }
        if y[1] > 0.0 || y[0] > 1.5 * a {
            return Shot::Blowup;
        }
        y = rk4_advance(&f, r, y, dr, SUBSTEPS);
        r += dr;
    }
    if y[0] <= 0.0 {
        Shot::Crossing
    } else if y[1] > 0.0 {
        Shot::Blowup
    } else {
        Shot::Undecided
    }
}

/// Solve the ground state by bisection shooting.
///
/// `tol` bounds the sup-norm of the ODE residual of the returned samples,
/// relative to w(0); it must lie in (0, 1e-6].
pub fn solve_ground_state(params: ScalarParams, r_max: f64, tol: f64) -> Result<RadialProfile> {
    if !(tol > 0.0 && tol <= 1e-6) {
        return Err(Error::InvalidParam(format!("tol must be in (0, 1e-6], got {tol}")));
    }
    let sl = params.lambda.sqrt();
    if r_max * sl < 20.0 {
        return Err(Error::InvalidParam(format!(
            "r_max too small: r_max*sqrt(lambda) = {:.2} < 20",
            r_max * sl
        )));
    }

    let scale = (params.lambda / params.mu).sqrt();
    let intervals = interval_count(r_max, sl);
    let dr = r_max / intervals as f64;

    // Bracket: just above sqrt(lambda/mu) the trajectory turns and grows;
    // scan upward for a crossing trajectory.
    let mut a_lo = 1.05 * scale;
    if classify(&params, a_lo, r_max, dr) != Shot::Blowup {
        return Err(Error::BracketFailure { iters: 0, lo: a_lo, hi: a_lo });
    }
    let mut a_hi = 0.0;
    for k in 2..=8 {
        let cand = k as f64 * scale;
        if classify(&params, cand, r_max, dr) == Shot::Crossing {
            a_hi = cand;
            break;
        }
        a_lo = cand;
    }
    if a_hi == 0.0 {
        return Err(Error::BracketFailure { iters: 0, lo: a_lo, hi: 8.0 * scale });
    }

    let mut iters = 0usize;
    loop {
        let mid = 0.5 * (a_lo + a_hi);
        if mid <= a_lo || mid >= a_hi {
            break; // interval at floating-point resolution
        }
        iters += 1;
        if iters > 200 {
            if a_hi - a_lo > 1e-12 * a_hi {
                return Err(Error::BracketFailure { iters, lo: a_lo, hi: a_hi });
            }
            break;
        }
        match classify(&params, mid, r_max, dr) {
            Shot::Crossing => a_hi = mid,
            Shot::Blowup => a_lo = mid,
            Shot::Undecided => break,
        }
    }
    let a = 0.5 * (a_lo + a_hi);

    build_profile(params, a, r_max, dr, intervals, tol)
}

fn build_profile(
    params: ScalarParams,
    a: f64,
    r_max: f64,
    dr: f64,
    intervals: usize,
    tol: f64,
) -> Result<RadialProfile> {
    let n_nodes = intervals + 1;
    let sl = params.lambda.sqrt();
    let n_dim = params.dim as f64;
    let f = rhs(&params);

    // Forward pass. The shooting error is amplified like e^{√λ r}, so the
    // forward trajectory is only kept up to an anchor radius where w is still
    // a sizable fraction of the center value.
    let anchor_level = 0.2 * a;
    let mut w = vec![0.0; n_nodes];
    let mut dw = vec![0.0; n_nodes];
    w[0] = a;
    dw[0] = 0.0;
    let mut y = series_start(&params, a, dr);
    w[1] = y[0];
    dw[1] = y[1];
    let mut i_anchor = 0usize;
    let mut rough_tail = 0.0;
    {
        let mut i = 1usize;
        while i + 1 < n_nodes {
            y = rk4_advance(&f, i as f64 * dr, y, dr, SUBSTEPS);
            i += 1;
            if y[1] > 0.0 || y[0] <= 0.0 {
                return Err(Error::Nonconvergence(format!(
                    "forward trajectory left the monotone regime at r = {:.3}",
                    i as f64 * dr
                )));
            }
            if i_anchor == 0 {
                w[i] = y[0];
                dw[i] = y[1];
                if y[0] <= anchor_level {
                    i_anchor = i;
                }
            } else if y[0] <= 1e-3 * a {
                // rough tail amplitude to seed the inward pass
                let r = i as f64 * dr;
                rough_tail = y[0] * r.powf((n_dim - 1.0) / 2.0) * (sl * r).exp();
                break;
            }
        }
    }
    if i_anchor == 0 || rough_tail == 0.0 {
        return Err(Error::Nonconvergence(
            "solution never reached the tail regime before r_max".into(),
        ));
    }

    // Far field from a single inward integration of the full equation. The
    // decaying branch is stable inward, so only the seed amplitude matters;
    // a secant iteration matches it to the forward value at the anchor.
    let pad = (12.0 / sl / dr).ceil() as usize;
    let i_seed = intervals + pad;
    let r_seed = i_seed as f64 * dr;
    let shape = |r: f64| r.powf((1.0 - n_dim) / 2.0) * (-sl * r).exp();
    let dshape_over_shape = |r: f64| (1.0 - n_dim) / (2.0 * r) - sl;

    let run_inward = |amp: f64, v: &mut [f64], dv: &mut [f64]| -> f64 {
        let mut yy = [amp * shape(r_seed), amp * shape(r_seed) * dshape_over_shape(r_seed)];
        let mut idx = i_seed;
        while idx > i_anchor {
            yy = rk4_advance(&f, idx as f64 * dr, yy, -dr, SUBSTEPS);
            idx -= 1;
            if idx < v.len() {
                v[idx] = yy[0];
                dv[idx] = yy[1];
            }
        }
        yy[0]
    };

    let mut v = vec![0.0; n_nodes];
    let mut dv = vec![0.0; n_nodes];
    let target = w[i_anchor];
    let mut a0 = rough_tail;
    let mut f0 = run_inward(a0, &mut v, &mut dv) - target;
    let mut a1 = rough_tail * if f0 > 0.0 { 0.99 } else { 1.01 };
    let mut f1 = run_inward(a1, &mut v, &mut dv) - target;
    let mut converged = false;
    for _ in 0..40 {
        if (f1 - f0).abs() < 1e-300 {
            break;
        }
        let a2 = a1 - f1 * (a1 - a0) / (f1 - f0);
        a0 = a1;
        f0 = f1;
        a1 = a2;
        f1 = run_inward(a1, &mut v, &mut dv) - target;
        if f1.abs() <= 1e-14 * target {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Nonconvergence(format!(
            "tail amplitude match stalled (defect {:.3e})",
            f1 / target
        )));
    }
    let deriv_mismatch = (dw[i_anchor] - dv[i_anchor]).abs() / dw[i_anchor].abs();
    if deriv_mismatch > 1e-6 {
        return Err(Error::Nonconvergence(format!(
            "glue derivative mismatch {deriv_mismatch:.3e} at anchor radius"
        )));
    }
    for i in (i_anchor + 1)..n_nodes {
        w[i] = v[i];
        dw[i] = dv[i];
    }
    let n_lin = n_dim;

    // Tail fit over [0.5, 0.9] r_max.
    let (tail_constant, decay_rate, tail_fit_residual) =
        fit_tail_window(&w, dr, params.dim, 0.5 * r_max, 0.9 * r_max)?;

    let seam_constant = w[n_nodes - 1] * r_max.powf((n_lin - 1.0) / 2.0) * (sl * r_max).exp();

    // Radial quadrature with analytic tail extensions.
    let omega = sphere_measure(params.dim);
    let weight = |i: usize| (i as f64 * dr).powf(n_lin - 1.0);
    let vals2: Vec<f64> = (0..n_nodes).map(|i| w[i] * w[i] * weight(i)).collect();
    let vals4: Vec<f64> = (0..n_nodes).map(|i| w[i].powi(4) * weight(i)).collect();
    let valsg: Vec<f64> = (0..n_nodes).map(|i| dw[i] * dw[i] * weight(i)).collect();
    // Beyond r_max: w² r^{N-1} ≈ A² e^{-2√λ r}, so the tail integrals collapse
    // to elementary exponentials.
    let tail2 = seam_constant * seam_constant * (-2.0 * sl * r_max).exp() / (2.0 * sl);
    let tail4 = seam_constant.powi(4)
        * r_max.powf(1.0 - n_lin)
        * (-4.0 * sl * r_max).exp()
        / (4.0 * sl);
    let int_w2 = omega * (simpson(&vals2, dr) + tail2);
    let int_w4 = omega * (simpson(&vals4, dr) + tail4);
    let int_grad2 = omega * (simpson(&valsg, dr) + params.lambda * tail2);
    let energy = 0.5 * (int_grad2 + params.lambda * int_w2) - 0.25 * params.mu * int_w4;

    // Residual of the stored samples against the ODE, via a 6th-order
    // difference of w'.
    let mut residual_sup = 0.0f64;
    let mut residual_at = 0.0f64;
    for i in 3..n_nodes - 3 {
        let wpp = (dw[i + 3] - 9.0 * dw[i + 2] + 45.0 * dw[i + 1] - 45.0 * dw[i - 1]
            + 9.0 * dw[i - 2]
            - dw[i - 3])
            / (60.0 * dr);
        let r = i as f64 * dr;
        let res = wpp + (n_lin - 1.0) / r * dw[i] - params.lambda * w[i]
            + params.mu * w[i].powi(3);
        if res.abs() > residual_sup {
            residual_sup = res.abs();
            residual_at = r;
        }
    }
    residual_sup /= a;
    if residual_sup > tol {
        return Err(Error::Nonconvergence(format!(
            "ODE residual {residual_sup:.3e} at r = {residual_at:.4} exceeds tol {tol:.1e}"
        )));
    }
    for i in 1..n_nodes {
        if dw[i] >= 0.0 {
            return Err(Error::Nonconvergence(format!(
                "profile not strictly decreasing at r = {:.3}",
                i as f64 * dr
            )));
        }
    }

    Ok(RadialProfile {
        params,
        r_max,
        dr,
        w,
        dw,
        tail_constant,
        decay_rate,
        tail_fit_residual,
        energy,
        int_w2,
        int_w4,
        int_grad2,
        residual_sup,
        seam_constant,
    })
}

/// Least-squares fit of log w(r) - (1-N)/2 log r against log A - rate * r
/// over [r_lo, r_hi]. Returns (A, rate, rms residual).
pub fn fit_tail_window(
    w: &[f64],
    dr: f64,
    dim: usize,
    r_lo: f64,
    r_hi: f64,
) -> Result<(f64, f64, f64)> {
    let i_lo = (r_lo / dr).ceil() as usize;
    let i_hi = ((r_hi / dr).floor() as usize).min(w.len() - 1);
    let p = (1.0 - dim as f64) / 2.0;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in i_lo..=i_hi {
        let r = i as f64 * dr;
        if w[i] <= 0.0 {
            continue;
        }
        rows.push(vec![1.0, -r]);
        rhs.push(w[i].ln() - p * r.ln());
    }
    let fit = least_squares(&rows, &rhs, f64::INFINITY)?;
    if fit.rms_residual > 1e-3 {
        return Err(Error::WindowTooNoisy { residual: fit.rms_residual, limit: 1e-3 });
    }
    Ok((fit.coeffs[0].exp(), fit.coeffs[1], fit.rms_residual))
}

/// Re-fit the stored samples of a profile (the op form of the tail fit).
pub fn tail_constant(profile: &RadialProfile) -> Result<(f64, f64)> {
    if profile.r_max * profile.params.lambda.sqrt() < 20.0 {
        return Err(Error::InvalidParam("profile solved with r_max*sqrt(lambda) < 20".into()));
    }
    let (a, rate, _) = fit_tail_window(
        &profile.w,
        profile.dr,
        profile.params.dim,
        0.5 * profile.r_max,
        0.9 * profile.r_max,
    )?;
    Ok((a, rate))
}

impl RadialProfile {
    pub fn w0(&self) -> f64 {
        self.w[0]
    }

    /// Rebuild a profile from stored samples and sidecar metadata. The seam
    /// amplitude is rematched to the last sample and the gradient integral is
    /// recovered from the quadratic identity; residual diagnostics are not
    /// recomputed.
    #[allow(clippy::too_many_arguments)]
    pub fn from_samples(
        params: ScalarParams,
        r_max: f64,
        dr: f64,
        w: Vec<f64>,
        dw: Vec<f64>,
        tail_constant: f64,
        decay_rate: f64,
        energy: f64,
        int_w2: f64,
        int_w4: f64,
    ) -> Self {
        let n_dim = params.dim as f64;
        let sl = params.lambda.sqrt();
        let seam_constant =
            w[w.len() - 1] * r_max.powf((n_dim - 1.0) / 2.0) * (sl * r_max).exp();
        let int_grad2 = params.mu * int_w4 - params.lambda * int_w2;
        RadialProfile {
            params,
            r_max,
            dr,
            w,
            dw,
            tail_constant,
            decay_rate,
            tail_fit_residual: 0.0,
            energy,
            int_w2,
            int_w4,
            int_grad2,
            residual_sup: 0.0,
            seam_constant,
        }
    }

    /// Evaluate by cubic Hermite interpolation for r ≤ r_max, and by the
    /// power-exponential tail (scaled to match the last sample) beyond.
    pub fn evaluate(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        if r > self.r_max {
            return self.tail_value(r);
        }
        let (i, t) = self.locate(r);
        let h = self.dr;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.w[i]
            + (t3 - 2.0 * t2 + t) * h * self.dw[i]
            + (-2.0 * t3 + 3.0 * t2) * self.w[i + 1]
            + (t3 - t2) * h * self.dw[i + 1]
    }

    /// d/dr of `evaluate`.
    pub fn evaluate_deriv(&self, r: f64) -> f64 {
        if r > self.r_max {
            let n = self.params.dim as f64;
            let sl = self.params.lambda.sqrt();
            return self.tail_value(r) * ((1.0 - n) / (2.0 * r) - sl);
        }
        let (i, t) = self.locate(r);
        let h = self.dr;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.w[i]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.dw[i]
            + (-6.0 * t2 + 6.0 * t) * self.w[i + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.dw[i + 1])
            / h
    }

    fn tail_value(&self, r: f64) -> f64 {
        let n = self.params.dim as f64;
        let sl = self.params.lambda.sqrt();
        self.seam_constant * r.powf((1.0 - n) / 2.0) * (-sl * r).exp()
    }

    fn locate(&self, r: f64) -> (usize, f64) {
        let x = (r / self.dr).floor();
        let i = (x as usize).min(self.w.len() - 2);
        (i, r / self.dr - i as f64)
    }
}

/// Energy of a solved profile: m = ½∫(|∇w|² + λw²) − (μ/4)∫w⁴.
pub fn energy(profile: &RadialProfile) -> f64 {
    profile.energy
}

/// Principal eigenvalue β of -Δv + λ_target v = β w² v on the radial line,
/// with a zero far-field condition at the weight's truncation radius.
///
/// Central differences with the r^{N-1} weight in the inner product; solved by
/// inverse power iteration on the tridiagonal pencil, verified on a refined
/// grid.
pub fn coupling_eigenvalue(lambda_target: f64, weight: &RadialProfile) -> Result<f64> {
    if !(lambda_target > 0.0) {
        return Err(Error::InvalidParam("lambda_target must be positive".into()));
    }
    let coarse = eigen_on_grid(lambda_target, weight, 1500)?;
    let fine = eigen_on_grid(lambda_target, weight, 3000)?;
    let rel = (coarse - fine).abs() / fine.abs().max(1e-300);
    if rel > 1e-2 {
        return Err(Error::DiscretizationUnresolved { rel });
    }
    Ok(fine)
}

fn eigen_on_grid(lambda_target: f64, weight: &RadialProfile, m: usize) -> Result<f64> {
    let n = weight.params.dim as f64;
    let r_max = weight.r_max;
    let h = r_max / m as f64;
    // Unknowns at r_0 = 0 .. r_{m-1}; Dirichlet at r_m.
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    diag[0] = 2.0 * n / (h * h) + lambda_target;
    sup[0] = -2.0 * n / (h * h);
    for i in 1..m {
        let r = i as f64 * h;
        diag[i] = 2.0 / (h * h) + lambda_target;
        sub[i] = -1.0 / (h * h) + (n - 1.0) / (2.0 * h * r);
        sup[i] = -1.0 / (h * h) - (n - 1.0) / (2.0 * h * r);
    }
    let wsq: Vec<f64> = (0..m).map(|i| weight.evaluate(i as f64 * h).powi(2)).collect();
    // Measure r^{N-1} for the weighted Rayleigh quotient.
    let meas: Vec<f64> = (0..m).map(|i| (i as f64 * h).powf(n - 1.0)).collect();

    let mut v: Vec<f64> = (0..m).map(|i| weight.evaluate(i as f64 * h)).collect();
    let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm0);

    let apply_a = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; m];
        for i in 0..m {
            let mut acc = diag[i] * v[i];
            if i > 0 {
                acc += sub[i] * v[i - 1];
            }
            if i + 1 < m {
                acc += sup[i] * v[i + 1];
            }
            out[i] = acc;
        }
        out
    };

    let mut beta_prev = f64::INFINITY;
    for iter in 0..500 {
        let bv: Vec<f64> = (0..m).map(|i| wsq[i] * v[i]).collect();
        let mut x = solve_tridiagonal(&sub, &diag, &sup, &bv);
        let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Nonconvergence("inverse iteration collapsed".into()));
        }
        x.iter_mut().for_each(|t| *t /= norm);
        let ax = apply_a(&x);
        let num: f64 = (0..m).map(|i| meas[i] * ax[i] * x[i]).sum();
        let den: f64 = (0..m).map(|i| meas[i] * wsq[i] * x[i] * x[i]).sum();
        let beta = num / den;
        v = x;
        if (beta - beta_prev).abs() <= 1e-12 * beta.abs() && iter > 3 {
            return Ok(beta);
        }
        beta_prev = beta;
    }
    Ok(beta_prev)
}
