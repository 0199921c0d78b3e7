//! Symmetric-indefinite iterative solver and the bordered linear problem for
//! the projected correction.
//!
//! The correction Q solves the linearized operator equation against the
//! coupling error, with the multipliers of the placement-derivative fields as
//! extra unknowns and the discrete orthogonality constraints as extra rows
//! (a symmetric saddle system). MINRES with a positive diagonal
//! preconditioner handles the indefiniteness.

use crate::error::{Error, Result};
use crate::geometry::{SpikeConfiguration, SystemParams};
use crate::ground_state::RadialProfile;
use crate::par;
use super::{derivative_fields, jacobian_matvec, Fields, Grid};

/// Preconditioned MINRES for symmetric systems. `apply` computes A x,
/// `precond` applies an SPD approximation of A⁻¹. Returns the iteration
/// count; `x` holds the solution.
pub fn minres<A, M>(
    apply: A,
    precond: M,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize>
where
    A: Fn(&[f64], &mut [f64]),
    M: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let dot = |a: &[f64], b: &[f64]| par::indexed_sum(n, |i| a[i] * b[i]);

    let mut r1 = b.to_vec();
    let mut r2 = r1.clone();
    let mut y = vec![0.0; n];
    precond(&r1, &mut y);
    let beta1 = dot(&r1, &y);
    if beta1 < 0.0 {
        return Err(Error::Nonconvergence("preconditioner not positive definite".into()));
    }
    let beta1 = beta1.sqrt();
    if beta1 == 0.0 {
        return Ok(0);
    }

    let mut oldb = 0.0f64;
    let mut beta = beta1;
    let mut dbar = 0.0f64;
    let mut epsln = 0.0f64;
    let mut phibar = beta1;
    let mut cs = -1.0f64;
    let mut sn = 0.0f64;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut work = vec![0.0; n];

    for iter in 1..=max_iter {
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        apply(&v, &mut work);
        if iter >= 2 {
            let c = beta / oldb;
            for i in 0..n {
                work[i] -= c * r1[i];
            }
        }
        let alfa = dot(&v, &work);
        let c = alfa / beta;
        for i in 0..n {
            work[i] -= c * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        std::mem::swap(&mut r2, &mut work);
        precond(&r2, &mut y);
        oldb = beta;
        let betasq = dot(&r2, &y);
        if betasq < 0.0 {
            return Err(Error::Nonconvergence("preconditioner lost definiteness".into()));
        }
        beta = betasq.sqrt();

        // Givens rotation
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1i = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1i - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }

        if phibar <= rel_tol * beta1 {
            return Ok(iter);
        }
    }
    Err(Error::NearSingularOperator { residual: phibar / beta1 })
}

/// Output of the bordered correction solve.
pub struct Correction {
    pub q: Fields,
    pub gamma_theta: Vec<f64>,
    pub gamma_rho: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solve the bordered system
///   L q + Σ_j (γ_θj Φθ_j + γ_ρj Φρ_j) = E₃,   ⟨q_j, Φθ_j⟩ = ⟨q_j, Φρ_j⟩ = 0,
/// where L is the linearization at the ansatz and Φ are the placement
/// derivative fields (normalized internally for conditioning).
pub fn linear_correction(
    system: &SystemParams,
    config: &SpikeConfiguration,
    profiles: &[RadialProfile],
    grid: &Grid,
    w: &Fields,
    e3: &Fields,
) -> Result<Correction> {
    let d = system.d;
    let n = grid.n;
    let cells = n * n;
    let field_len = d * cells;
    let h2 = grid.h * grid.h;

    // normalized derivative fields, one (θ, ρ) pair per component
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(2 * d);
    let mut norms: Vec<f64> = Vec::with_capacity(2 * d);
    for j in 0..d {
        let (drho, dtheta) = derivative_fields(config, &profiles[j], j, grid);
        for f in [dtheta, drho] {
            let nrm = (h2 * par::indexed_sum(cells, |i| f[i] * f[i])).sqrt();
            let scaled: Vec<f64> = f.iter().map(|v| v / nrm).collect();
            basis.push(scaled);
            norms.push(nrm);
        }
    }

    let total = field_len + 2 * d;
    let mut rhs = vec![0.0; total];
    rhs[..field_len].copy_from_slice(&e3.data);

    let apply = |z: &[f64], out: &mut [f64]| {
        let vf = Fields { d, n, data: z[..field_len].to_vec() };
        let mut lv = Fields::zeros(d, grid);
        jacobian_matvec(system, grid, w, &vf, &mut lv);
        out[..field_len].copy_from_slice(&lv.data);
        for j in 0..d {
            let off = j * cells;
            for (slot, b) in basis[2 * j..2 * j + 2].iter().enumerate() {
                let gamma = z[field_len + 2 * j + slot];
                for i in 0..cells {
                    out[off + i] += gamma * b[i];
                }
                // constraint row mirrors the border column (plain pairing so
                // the saddle matrix stays exactly symmetric)
                out[field_len + 2 * j + slot] =
                    par::indexed_sum(cells, |i| z[off + i] * b[i]);
            }
        }
    };
    let lam_min = system.lambda.iter().cloned().fold(f64::INFINITY, f64::min);
    let precond = |z: &[f64], out: &mut [f64]| {
        let diag = 4.0 / h2 + lam_min;
        for i in 0..field_len {
            out[i] = z[i] / diag;
        }
        for i in field_len..total {
            out[i] = z[i];
        }
    };

    let mut sol = vec![0.0; total];
    let iterations = minres(apply, precond, &rhs, &mut sol, 1e-10, 200 * n)?;

    // true relative residual
    let mut ax = vec![0.0; total];
    apply(&sol, &mut ax);
    let num = (0..total).map(|i| (ax[i] - rhs[i]).powi(2)).sum::<f64>().sqrt();
    let den = (0..total).map(|i| rhs[i].powi(2)).sum::<f64>().sqrt().max(1e-300);
    let relative_residual = num / den;
    if relative_residual > 1e-8 {
        return Err(Error::NearSingularOperator { residual: relative_residual });
    }

    let mut q = Fields { d, n, data: sol[..field_len].to_vec() };
    q.enforce_boundary();
    let gamma_theta: Vec<f64> = (0..d).map(|j| sol[field_len + 2 * j] / norms[2 * j]).collect();
    let gamma_rho: Vec<f64> =
        (0..d).map(|j| sol[field_len + 2 * j + 1] / norms[2 * j + 1]).collect();
    Ok(Correction { q, gamma_theta, gamma_rho, iterations, relative_residual })
}

/// Explicit 2×2 Gram solve for the projection multipliers of the coupling
/// error onto (∂θ W_j, ∂ρ W_j), per component.
pub fn gamma_projections(
    config: &SpikeConfiguration,
    profiles: &[RadialProfile],
    grid: &Grid,
    e3: &Fields,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = e3.d;
    let cells = grid.n * grid.n;
    let h2 = grid.h * grid.h;
    let mut gamma_theta = Vec::with_capacity(d);
    let mut gamma_rho = Vec::with_capacity(d);
    for j in 0..d {
        let (drho, dtheta) = derivative_fields(config, &profiles[j], j, grid);
        let e = e3.comp(j);
        let tt = h2 * par::indexed_sum(cells, |i| dtheta[i] * dtheta[i]);
        let rr = h2 * par::indexed_sum(cells, |i| drho[i] * drho[i]);
        let tr = h2 * par::indexed_sum(cells, |i| dtheta[i] * drho[i]);
        let et = h2 * par::indexed_sum(cells, |i| e[i] * dtheta[i]);
        let er = h2 * par::indexed_sum(cells, |i| e[i] * drho[i]);
        let det = tt * rr - tr * tr;
        if det.abs() < 1e-14 * tt * rr {
            return Err(Error::GramSingular { det });
        }
        gamma_theta.push((rr * et - tr * er) / det);
        gamma_rho.push((tt * er - tr * et) / det);
    }
    Ok((gamma_theta, gamma_rho))
}
