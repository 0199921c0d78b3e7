//! Discrete 2-D fields on a square grid with zero Dirichlet boundary, the
//! multi-spike ansatz and its error fields, a bordered linear solve for the
//! projected correction, and a damped Newton iteration on the full system.

pub mod linear;
pub mod newton;

use crate::error::{Error, Result};
use crate::geometry::{SpikeConfiguration, SystemParams};
use crate::ground_state::RadialProfile;
use crate::par;
use serde::{Deserialize, Serialize};

/// Square grid [-L, L]² with odd point count per side (a node at the origin)
/// and zero values on the boundary ring.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Grid {
    pub l: f64,
    pub h: f64,
    /// points per side (odd)
    pub n: usize,
}

impl Grid {
    /// Build a grid of half-width `l` with spacing at most `h_max`, checking
    /// the solvability margins for the given configuration.
    pub fn new(l: f64, h_max: f64, system: &SystemParams, config: &SpikeConfiguration) -> Result<Self> {
        let lam_min = system.lambda.iter().cloned().fold(f64::INFINITY, f64::min);
        let lam_max = system.lambda.iter().cloned().fold(0.0f64, f64::max);
        let rho_max = config.rho.iter().cloned().fold(0.0f64, f64::max);
        if l < rho_max + 12.0 / lam_min.sqrt() {
            return Err(Error::GridTooSmall(format!(
                "half-width {l} below rho_max + 12/sqrt(lambda_min) = {}",
                rho_max + 12.0 / lam_min.sqrt()
            )));
        }
        if h_max > 0.25 / lam_max.sqrt() {
            return Err(Error::GridTooSmall(format!(
                "spacing {h_max} exceeds 0.25/sqrt(lambda_max) = {}",
                0.25 / lam_max.sqrt()
            )));
        }
        Ok(Self::raw(l, h_max))
    }

    /// Grid without the configuration margins (single-profile checks, tests).
    pub fn raw(l: f64, h_max: f64) -> Self {
        let half = (l / h_max).ceil() as usize;
        let n = 2 * half + 1;
        let h = 2.0 * l / (n - 1) as f64;
        Grid { l, h, n }
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + i as f64 * self.h
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }
}

/// d-component scalar fields on a grid, stored per component in row-major
/// order. The boundary ring is kept at zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fields {
    pub d: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

impl Fields {
    pub fn zeros(d: usize, grid: &Grid) -> Self {
        Fields { d, n: grid.n, data: vec![0.0; d * grid.n * grid.n] }
    }

    #[inline]
    pub fn comp(&self, j: usize) -> &[f64] {
        &self.data[j * self.n * self.n..(j + 1) * self.n * self.n]
    }

    #[inline]
    pub fn comp_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n * self.n..(j + 1) * self.n * self.n]
    }

    #[inline]
    pub fn at(&self, j: usize, iy: usize, ix: usize) -> f64 {
        self.data[j * self.n * self.n + iy * self.n + ix]
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_per_component(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| self.comp(j).iter().cloned().fold(f64::INFINITY, f64::min))
            .collect()
    }

    pub fn max_per_component(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| self.comp(j).iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Discrete L² inner product h² Σ a b.
    pub fn dot(&self, other: &Fields, h: f64) -> f64 {
        h * h * par::indexed_sum(self.data.len(), |i| self.data[i] * other.data[i])
    }

    /// Zero the boundary ring of every component.
    pub fn enforce_boundary(&mut self) {
        let n = self.n;
        for j in 0..self.d {
            let c = self.comp_mut(j);
            for ix in 0..n {
                c[ix] = 0.0;
                c[(n - 1) * n + ix] = 0.0;
                c[ix * n] = 0.0;
                c[ix * n + n - 1] = 0.0;
            }
        }
    }

    /// Bilinear sample of component j at (x, y); zero outside the grid.
    pub fn sample(&self, grid: &Grid, j: usize, x: f64, y: f64) -> f64 {
        let fx = (x + grid.l) / grid.h;
        let fy = (y + grid.l) / grid.h;
        if fx < 0.0 || fy < 0.0 || fx > (grid.n - 1) as f64 || fy > (grid.n - 1) as f64 {
            return 0.0;
        }
        let ix = (fx as usize).min(grid.n - 2);
        let iy = (fy as usize).min(grid.n - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let v00 = self.at(j, iy, ix);
        let v01 = self.at(j, iy, ix + 1);
        let v10 = self.at(j, iy + 1, ix);
        let v11 = self.at(j, iy + 1, ix + 1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v01) + ty * ((1.0 - tx) * v10 + tx * v11)
    }
}

/// Sum of translated ground-state profiles per component.
///
/// Fails if a spike center sits within 8/√λ_j of the boundary.
pub fn assemble_ansatz(
    system: &SystemParams,
    config: &SpikeConfiguration,
    profiles: &[RadialProfile],
    grid: &Grid,
) -> Result<Fields> {
    let d = system.d;
    for j in 0..d {
        let margin = 8.0 / system.lambda[j].sqrt();
        for c in &config.centers[j] {
            if c[0].abs() > grid.l - margin || c[1].abs() > grid.l - margin {
                return Err(Error::GridTooSmall(format!(
                    "spike center ({:.2}, {:.2}) within {margin:.2} of the boundary",
                    c[0], c[1]
                )));
            }
        }
    }
    let mut w = Fields::zeros(d, grid);
    let n = grid.n;
    for j in 0..d {
        let prof = &profiles[j];
        let centers = &config.centers[j];
        let comp = w.comp_mut(j);
        par::for_each_chunk_mut(comp, n, |iy, row| {
            let y = -grid.l + iy as f64 * grid.h;
            for (ix, cell) in row.iter_mut().enumerate() {
                let x = -grid.l + ix as f64 * grid.h;
                let mut acc = 0.0;
                for c in centers {
                    let r = ((x - c[0]).powi(2) + (y - c[1]).powi(2)).sqrt();
                    acc += prof.evaluate(r);
                }
                *cell = acc;
            }
        });
    }
    w.enforce_boundary();
    Ok(w)
}

/// Placement-derivative fields ∂_{ρ_j} W_j and ∂_{θ_j} W_j (single-component
/// fields; the other components are identically zero, so only the j-slice is
/// returned).
pub fn derivative_fields(
    config: &SpikeConfiguration,
    profile: &RadialProfile,
    j: usize,
    grid: &Grid,
) -> (Vec<f64>, Vec<f64>) {
    let n = grid.n;
    let theta = config.theta_count;
    let mut drho = vec![0.0; n * n];
    let mut dtheta = vec![0.0; n * n];
    let centers = &config.centers[j];
    let rho_j = config.rho[j];
    // unit radial and tangential directions per spike
    let dirs: Vec<([f64; 2], [f64; 2])> = (0..theta)
        .map(|t| {
            let ang = config.offsets[j] + 2.0 * std::f64::consts::PI * t as f64 / theta as f64;
            ([ang.cos(), ang.sin()], [-ang.sin(), ang.cos()])
        })
        .collect();
    par::for_each_chunk_mut(&mut drho, n, |iy, row| {
        let y = -grid.l + iy as f64 * grid.h;
        for (ix, cell) in row.iter_mut().enumerate() {
            let x = -grid.l + ix as f64 * grid.h;
            let mut acc = 0.0;
            for (t, c) in centers.iter().enumerate() {
                let dx = x - c[0];
                let dy = y - c[1];
                let r = (dx * dx + dy * dy).sqrt();
                if r > 1e-12 {
                    let (xi, _) = dirs[t];
                    acc -= profile.evaluate_deriv(r) * (xi[0] * dx + xi[1] * dy) / r;
                }
            }
            *cell = acc;
        }
    });
    par::for_each_chunk_mut(&mut dtheta, n, |iy, row| {
        let y = -grid.l + iy as f64 * grid.h;
        for (ix, cell) in row.iter_mut().enumerate() {
            let x = -grid.l + ix as f64 * grid.h;
            let mut acc = 0.0;
            for (t, c) in centers.iter().enumerate() {
                let dx = x - c[0];
                let dy = y - c[1];
                let r = (dx * dx + dy * dy).sqrt();
                if r > 1e-12 {
                    let (_, perp) = dirs[t];
                    acc -= profile.evaluate_deriv(r) * rho_j * (perp[0] * dx + perp[1] * dy) / r;
                }
            }
            *cell = acc;
        }
    });
    // boundary ring
    for ix in 0..n {
        for idx in [ix, (n - 1) * n + ix, ix * n, ix * n + n - 1] {
            drho[idx] = 0.0;
            dtheta[idx] = 0.0;
        }
    }
    (drho, dtheta)
}

/// The three error fields of the ansatz: potential mismatch, same-component
/// cubic cross terms, and the coupling term.
pub struct ErrorFields {
    pub e1: Fields,
    pub e2: Fields,
    pub e3: Fields,
}

pub fn error_fields(
    system: &SystemParams,
    config: &SpikeConfiguration,
    profiles: &[RadialProfile],
    grid: &Grid,
    w: &Fields,
) -> ErrorFields {
    let d = system.d;
    let n = grid.n;
    let mut e1 = Fields::zeros(d, grid);
    let mut e2 = Fields::zeros(d, grid);
    let mut e3 = Fields::zeros(d, grid);
    for j in 0..d {
        let prof = &profiles[j];
        let centers = &config.centers[j];
        let wj: Vec<f64> = w.comp(j).to_vec();
        // E1 = (λ - V) W
        {
            let c1 = e1.comp_mut(j);
            par::for_each_chunk_mut(c1, n, |iy, row| {
                let y = -grid.l + iy as f64 * grid.h;
                for (ix, cell) in row.iter_mut().enumerate() {
                    let x = -grid.l + ix as f64 * grid.h;
                    let r = (x * x + y * y).sqrt();
                    *cell = (system.lambda[j] - system.potential(j, r)) * wj[iy * n + ix];
                }
            });
        }
        // E2 = μ (W³ − Σ_t w̃_t³)
        {
            let c2 = e2.comp_mut(j);
            par::for_each_chunk_mut(c2, n, |iy, row| {
                let y = -grid.l + iy as f64 * grid.h;
                for (ix, cell) in row.iter_mut().enumerate() {
                    let x = -grid.l + ix as f64 * grid.h;
                    let mut cubes = 0.0;
                    for c in centers {
                        let r = ((x - c[0]).powi(2) + (y - c[1]).powi(2)).sqrt();
                        cubes += prof.evaluate(r).powi(3);
                    }
                    let wv = wj[iy * n + ix];
                    *cell = system.mu[j] * (wv * wv * wv - cubes);
                }
            });
        }
        // E3 = Σ_{i≠j} β_{i,j} W_i² W_j
        {
            let wi: Vec<Vec<f64>> = (0..d).map(|i| w.comp(i).to_vec()).collect();
            let c3 = e3.comp_mut(j);
            par::for_each_chunk_mut(c3, n, |iy, row| {
                for (ix, cell) in row.iter_mut().enumerate() {
                    let idx = iy * n + ix;
                    let mut acc = 0.0;
                    for (i, wii) in wi.iter().enumerate() {
                        if i != j {
                            acc += system.beta[i][j] * wii[idx] * wii[idx];
                        }
                    }
                    *cell = acc * wj[idx];
                }
            });
        }
    }
    for e in [&mut e1, &mut e2, &mut e3] {
        e.enforce_boundary();
    }
    ErrorFields { e1, e2, e3 }
}

/// Residual of the full system: F_j(u) = −Δ u_j + V_j u_j − μ_j u_j³
/// − Σ_{i≠j} β_{i,j} u_i² u_j, zero on the boundary ring.
pub fn residual(system: &SystemParams, grid: &Grid, u: &Fields, out: &mut Fields) {
    let n = grid.n;
    let h2 = grid.h * grid.h;
    let d = system.d;
    let data = &u.data;
    for j in 0..d {
        let base = j * n * n;
        let lam = system.lambda[j];
        let mu = system.mu[j];
        let beta_row: Vec<f64> = (0..d).map(|i| system.beta[i][j]).collect();
        let out_j = out.comp_mut(j);
        par::for_each_chunk_mut(out_j, n, |iy, row| {
            if iy == 0 || iy == n - 1 {
                row.iter_mut().for_each(|c| *c = 0.0);
                return;
            }
            let y = -grid.l + iy as f64 * grid.h;
            for (ix, cell) in row.iter_mut().enumerate() {
                if ix == 0 || ix == n - 1 {
                    *cell = 0.0;
                    continue;
                }
                let idx = base + iy * n + ix;
                let x = -grid.l + ix as f64 * grid.h;
                let r = (x * x + y * y).sqrt();
                let uv = data[idx];
                let lap = (4.0 * uv
                    - data[idx - 1]
                    - data[idx + 1]
                    - data[idx - n]
                    - data[idx + n])
                    / h2;
                let mut coupling = 0.0;
                for (i, &b) in beta_row.iter().enumerate() {
                    if i != j {
                        let ui = data[i * n * n + iy * n + ix];
                        coupling += b * ui * ui;
                    }
                }
                let v = system.potential(j, r) - lam;
                *cell = lap + (lam + v) * uv - mu * uv * uv * uv - coupling * uv;
            }
        });
    }
}

/// Jacobian action of the residual at u:
/// (J v)_j = −Δ v_j + V_j v_j − 3 μ_j u_j² v_j − Σ_{i≠j} β_{i,j} (u_i² v_j + 2 u_i u_j v_i).
pub fn jacobian_matvec(
    system: &SystemParams,
    grid: &Grid,
    u: &Fields,
    v: &Fields,
    out: &mut Fields,
) {
    let n = grid.n;
    let h2 = grid.h * grid.h;
    let d = system.d;
    let udata = &u.data;
    let vdata = &v.data;
    for j in 0..d {
        let base = j * n * n;
        let mu = system.mu[j];
        let beta_row: Vec<f64> = (0..d).map(|i| system.beta[i][j]).collect();
        let out_j = out.comp_mut(j);
        par::for_each_chunk_mut(out_j, n, |iy, row| {
            if iy == 0 || iy == n - 1 {
                row.iter_mut().for_each(|c| *c = 0.0);
                return;
            }
            let y = -grid.l + iy as f64 * grid.h;
            for (ix, cell) in row.iter_mut().enumerate() {
                if ix == 0 || ix == n - 1 {
                    *cell = 0.0;
                    continue;
                }
                let idx = base + iy * n + ix;
                let x = -grid.l + ix as f64 * grid.h;
                let r = (x * x + y * y).sqrt();
                let vv = vdata[idx];
                let uc = udata[idx];
                let lap = (4.0 * vv
                    - vdata[idx - 1]
                    - vdata[idx + 1]
                    - vdata[idx - n]
                    - vdata[idx + n])
                    / h2;
                let mut coupling = 0.0;
                for (i, &b) in beta_row.iter().enumerate() {
                    if i != j {
                        let cell_i = i * n * n + iy * n + ix;
                        let ui = udata[cell_i];
                        let vi = vdata[cell_i];
                        coupling += b * (ui * ui * vv + 2.0 * ui * uc * vi);
                    }
                }
                *cell = lap + system.potential(j, r) * vv - 3.0 * mu * uc * uc * vv - coupling;
            }
        });
    }
}

/// Sup-norm defect under rotation by the fundamental angle 2π/θ, measured by
/// bilinear resampling (exact for θ = 4 on the square lattice).
pub fn rotation_symmetry_defect(grid: &Grid, fields: &Fields, theta_count: usize) -> f64 {
    let ang = 2.0 * std::f64::consts::PI / theta_count as f64;
    let (c, s) = (ang.cos(), ang.sin());
    let n = grid.n;
    let mut defect = 0.0f64;
    let interior_margin = grid.l - 2.0 * grid.h;
    for j in 0..fields.d {
        for iy in 1..n - 1 {
            let y = grid.coord(iy);
            for ix in 1..n - 1 {
                let x = grid.coord(ix);
                // rotate backwards and compare
                let xr = c * x + s * y;
                let yr = -s * x + c * y;
                if xr.abs() > interior_margin || yr.abs() > interior_margin {
                    continue;
                }
                let diff = (fields.at(j, iy, ix) - fields.sample(grid, j, xr, yr)).abs();
                defect = defect.max(diff);
            }
        }
    }
    defect
}
