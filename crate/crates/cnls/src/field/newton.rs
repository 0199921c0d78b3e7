//! Damped Newton iteration on the discrete coupled system, with positivity
//! and symmetry diagnostics.

use crate::error::{Error, Result};
use crate::geometry::{SpikeConfiguration, SystemParams};
use crate::numerics::least_squares;
use crate::par;
use serde::{Deserialize, Serialize};
use super::linear::minres;
use super::{jacobian_matvec, residual, rotation_symmetry_defect, Fields, Grid};

/// Outcome of a Newton run. Positivity failure is reported, not raised: a
/// converged limit with a sign change is a meaningful diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual_sup: f64,
    pub min_per_component: Vec<f64>,
    pub max_per_component: Vec<f64>,
    pub symmetry_defect: f64,
    pub damping_history: Vec<f64>,
    pub all_positive: bool,
}

/// Damped Newton on F(u) = 0 with zero Dirichlet boundary.
///
/// Linear solves use MINRES with a diagonal preconditioner; damping is
/// backtracking halving on the residual sup-norm with floor 2⁻¹⁰.
pub fn newton_solve(
    system: &SystemParams,
    initial: &Fields,
    grid: &Grid,
    theta_count: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Fields, NewtonReport)> {
    if !(1e-12..=1e-6).contains(&tol) {
        return Err(Error::InvalidParam(format!("tol {tol} outside [1e-12, 1e-6]")));
    }
    if initial.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("initial fields must be finite".into()));
    }
    let d = system.d;
    let mut u = initial.clone();
    u.enforce_boundary();
    let mut f = Fields::zeros(d, grid);
    residual(system, grid, &u, &mut f);
    let mut res = f.sup_norm();
    let mut damping_history = Vec::new();
    let mut iterations = 0usize;
    let mut growth_streak = 0usize;
    let mut res_floor = res;

    let h2 = grid.h * grid.h;
    let lam_min = system.lambda.iter().cloned().fold(f64::INFINITY, f64::min);

    while res >= tol && iterations < max_iter {
        // solve J delta = F
        let apply = |z: &[f64], out: &mut [f64]| {
            let v = Fields { d, n: grid.n, data: z.to_vec() };
            let mut jv = Fields::zeros(d, grid);
            jacobian_matvec(system, grid, &u, &v, &mut jv);
            out.copy_from_slice(&jv.data);
        };
        let precond = |z: &[f64], out: &mut [f64]| {
            let diag = 4.0 / h2 + lam_min;
            for i in 0..z.len() {
                out[i] = z[i] / diag;
            }
        };
        let mut delta = vec![0.0; u.data.len()];
        let lin_tol = (1e-10f64).min(0.01 * tol / res.max(tol));
        minres(apply, precond, &f.data, &mut delta, lin_tol, 300 * grid.n)?;

        // backtracking halving on the residual sup-norm
        let mut step = 1.0f64;
        let mut accepted = false;
        let mut cand = Fields::zeros(d, grid);
        let mut fc = Fields::zeros(d, grid);
        while step >= 2.0f64.powi(-10) {
            for i in 0..u.data.len() {
                cand.data[i] = u.data[i] - step * delta[i];
            }
            cand.enforce_boundary();
            residual(system, grid, &cand, &mut fc);
            let res_c = fc.sup_norm();
            if res_c < res {
                u = cand.clone();
                std::mem::swap(&mut f, &mut fc);
                res = res_c;
                damping_history.push(step);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // forced floor step, tracking divergence
            for i in 0..u.data.len() {
                cand.data[i] = u.data[i] - 2.0f64.powi(-10) * delta[i];
            }
            cand.enforce_boundary();
            residual(system, grid, &cand, &mut fc);
            let res_c = fc.sup_norm();
            u = cand.clone();
            std::mem::swap(&mut f, &mut fc);
            res = res_c;
            damping_history.push(2.0f64.powi(-10));
            if res > res_floor {
                growth_streak += 1;
                if growth_streak >= 5 && res > 10.0 * res_floor {
                    return Err(Error::Diverged { factor: res / res_floor, steps: growth_streak });
                }
            } else {
                growth_streak = 0;
                res_floor = res;
            }
        } else {
            growth_streak = 0;
            res_floor = res_floor.min(res);
        }
    }

    let converged = res < tol;
    if !converged && iterations >= max_iter {
        return Err(Error::MaxIterExceeded(max_iter));
    }
    let min_per_component = u.min_per_component();
    let max_per_component = u.max_per_component();
    let all_positive = {
        // positivity up to solver tolerance, checked away from the boundary
        // ring (the Dirichlet ring itself is exactly zero)
        let n = grid.n;
        let mut ok = true;
        for j in 0..d {
            let c = u.comp(j);
            for iy in 1..n - 1 {
                for ix in 1..n - 1 {
                    if c[iy * n + ix] < -10.0 * tol {
                        ok = false;
                    }
                }
            }
        }
        ok
    };
    let symmetry_defect = rotation_symmetry_defect(grid, &u, theta_count);
    let report = NewtonReport {
        converged,
        iterations,
        residual_sup: res,
        min_per_component,
        max_per_component,
        symmetry_defect,
        damping_history,
        all_positive,
    };
    Ok((u, report))
}

/// Post-solve diagnostics: extrema, residual norms, rotation symmetry and
/// radial decay rates along outward rays through the spike centers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldDiagnostics {
    pub min_per_component: Vec<f64>,
    pub max_per_component: Vec<f64>,
    pub residual_sup: f64,
    pub symmetry_defect: f64,
    /// Fitted exponential decay rate along an outward ray per component
    /// (power-law prefactor removed before the fit).
    pub ray_decay_rates: Vec<f64>,
}

pub fn diagnostics(
    system: &SystemParams,
    config: &SpikeConfiguration,
    grid: &Grid,
    u: &Fields,
) -> Result<FieldDiagnostics> {
    let mut f = Fields::zeros(u.d, grid);
    residual(system, grid, u, &mut f);
    let mut rates = Vec::with_capacity(u.d);
    for j in 0..u.d {
        let center = config.centers[j][0];
        let norm = (center[0] * center[0] + center[1] * center[1]).sqrt();
        let dir = if norm > 1e-9 {
            [center[0] / norm, center[1] / norm]
        } else {
            [1.0, 0.0]
        };
        let sl = system.lambda[j].sqrt();
        let lo = 2.0 / sl;
        let hi = 6.0 / sl;
        let steps = 40;
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for m in 0..=steps {
            let s = lo + (hi - lo) * m as f64 / steps as f64;
            let x = center[0] + s * dir[0];
            let y = center[1] + s * dir[1];
            let v = u.sample(grid, j, x, y);
            if v > 0.0 {
                rows.push(vec![1.0, -s]);
                // remove the planar power prefactor before the rate fit
                rhs.push(v.ln() + 0.5 * s.ln());
            }
        }
        if rows.len() < 10 {
            return Err(Error::Nonconvergence("ray fit has too few positive samples".into()));
        }
        let fit = least_squares(&rows, &rhs, f64::INFINITY)?;
        rates.push(fit.coeffs[1]);
    }
    let _ = par::indexed_sum(1, |_| 0.0);
    Ok(FieldDiagnostics {
        min_per_component: u.min_per_component(),
        max_per_component: u.max_per_component(),
        residual_sup: f.sup_norm(),
        symmetry_defect: rotation_symmetry_defect(grid, u, config.theta_count),
        ray_decay_rates: rates,
    })
}
