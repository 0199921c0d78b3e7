//! Leading-order reduced energy in the placement parameters (ρ*, α⃗*), its
//! closed-form balanced angles, radial optimum and critical-point search for
//! the four construction regimes.
//!
//! Scaling convention: ring radii are ρ_j = ρ* θ log θ and tangential gaps
//! α_j = α*_j / θ with Σ α*_j = 2π. The functional is the displayed
//! leading-order expansion evaluated term by term: per-spike energies, the
//! potential moment, the same-component attraction through the exact chord
//! gap, and one coupling channel per adjacent component pair around the ring.

use crate::error::{Error, Result};
use crate::geometry::{build_configuration, CaseLabel, GroupStructure, SpikeConfiguration, SystemParams};
use crate::interaction::InteractionConstants;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Lower bound for the scaled radius.
pub const RHO_STAR_FLOOR: f64 = 1e-2;

/// What kind of coupling law a ring gap carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelKind {
    /// Same-frequency pair: D_τ law.
    InGroup { group: usize },
    /// Adjacent-group boundary pair: dressed D''_τ law.
    Boundary { group: usize },
    /// Wrap pair (last component, first component) across groups.
    Wrap,
}

/// Static description of the coupling channel on gap `g` (between component
/// g and component (g+1) mod d).
#[derive(Debug, Clone, Copy)]
pub struct Channel {
    pub kind: ChannelKind,
    /// Fitted amplitude for the law (already dressed for boundary/wrap).
    pub amplitude: f64,
    /// Coupling β of the pair.
    pub beta: f64,
    /// √λ entering the exponential rate (the smaller frequency of the pair).
    pub sqrt_lambda: f64,
    /// Whether the same-frequency (log-corrected at N = 3) law applies.
    pub same_group: bool,
}

/// One coupling channel per gap around the ring.
pub fn channel_layout(
    system: &SystemParams,
    groups: &GroupStructure,
    constants: &InteractionConstants,
) -> Vec<Channel> {
    let d = system.d;
    let k = groups.k;
    (0..d)
        .map(|g| {
            let i = g;
            let j = (g + 1) % d;
            let beta = system.beta[i][j];
            if g == d - 1 {
                // wrap pair
                if k == 1 {
                    Channel {
                        kind: ChannelKind::InGroup { group: 0 },
                        amplitude: constants.d[0],
                        beta,
                        sqrt_lambda: groups.level[0].sqrt(),
                        same_group: true,
                    }
                } else {
                    Channel {
                        kind: ChannelKind::Wrap,
                        amplitude: constants.dressed_dprime(k - 1),
                        beta,
                        sqrt_lambda: groups.level[0].sqrt(),
                        same_group: false,
                    }
                }
            } else {
                let ti = groups.group_of(i);
                let tj = groups.group_of(j);
                if ti == tj {
                    Channel {
                        kind: ChannelKind::InGroup { group: ti },
                        amplitude: constants.d[ti],
                        beta,
                        sqrt_lambda: groups.level[ti].sqrt(),
                        same_group: true,
                    }
                } else {
                    Channel {
                        kind: ChannelKind::Boundary { group: ti },
                        amplitude: constants.dressed_dprime(ti),
                        beta,
                        sqrt_lambda: groups.level[ti].sqrt(),
                        same_group: false,
                    }
                }
            }
        })
        .collect()
}

/// Law value g(s) for a channel at gap separation s, and its derivative.
fn channel_law(ch: &Channel, dim: usize, s: f64) -> (f64, f64) {
    let k2 = 2.0 * ch.sqrt_lambda;
    let e = (-k2 * s).exp();
    if ch.same_group {
        if dim == 2 {
            let g = s.powf(-0.5) * e;
            (g, g * (-0.5 / s - k2))
        } else {
            let ln = s.ln();
            let g = s.powf(-2.0) * e * ln;
            (g, g * (-2.0 / s - k2) + s.powf(-3.0) * e)
        }
    } else if dim == 2 {
        let g = e / s;
        (g, g * (-1.0 / s - k2))
    } else {
        let g = e / (s * s);
        (g, g * (-2.0 / s - k2))
    }
}

/// Same-component attraction law through the chord gap.
fn self_law(dim: usize, sqrt_lambda: f64, eta: f64) -> (f64, f64) {
    let p = (1.0 - dim as f64) / 2.0;
    let g = eta.powf(p) * (-sqrt_lambda * eta).exp();
    (g, g * (p / eta - sqrt_lambda))
}

/// Term-by-term value of the reduced energy at a configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedEnergyBreakdown {
    pub total: f64,
    /// θ m_j per component.
    pub base: Vec<f64>,
    /// θ B_j δ_j ρ_j^{-ν_j} per component.
    pub potential: Vec<f64>,
    /// -θ C_j g(η̃_j) per component (η̃_j the exact chord gap).
    pub self_attraction: Vec<f64>,
    /// -θ β_g K_g g(ρ_g α_g) per ring gap, in gap order.
    pub coupling: Vec<f64>,
    pub coupling_kind: Vec<ChannelKind>,
    /// Combined gap-channel coefficient 2C_1 + π^{-1/2} D_1 β for the planar
    /// symmetric two-component regime (present only there).
    pub sym_gap_coefficient: Option<f64>,
}

/// Evaluate the displayed leading-order expansion on a configuration.
///
/// `energies[j]` are the per-spike energies m_j.
pub fn evaluate_reduced_energy(
    system: &SystemParams,
    groups: &GroupStructure,
    constants: &InteractionConstants,
    energies: &[f64],
    config: &SpikeConfiguration,
) -> ReducedEnergyBreakdown {
    let d = system.d;
    let theta = config.theta_count as f64;
    let channels = channel_layout(system, groups, constants);

    let base: Vec<f64> = (0..d).map(|j| theta * energies[j]).collect();
    let potential: Vec<f64> = (0..d)
        .map(|j| theta * constants.b[j] * system.delta[j] * config.rho[j].powf(-system.nu[j]))
        .collect();
    let self_attraction: Vec<f64> = (0..d)
        .map(|j| {
            let eta = 2.0 * config.rho[j] * (PI / theta).sin();
            let (g, _) = self_law(system.dim, system.lambda[j].sqrt(), eta);
            -theta * constants.c[j] * g
        })
        .collect();
    let coupling: Vec<f64> = (0..d)
        .map(|g| {
            let ch = &channels[g];
            let s = config.rho[g] * config.alpha[g];
            let (law, _) = channel_law(ch, system.dim, s);
            -theta * ch.beta * ch.amplitude * law
        })
        .collect();

    let planar_pair = system.dim == 2 && d == 2 && groups.k == 1;
    let sym_gap_coefficient =
        planar_pair.then(|| 2.0 * constants.c[0] + constants.d[0] * system.beta[0][1] / PI.sqrt());

    let total = base.iter().sum::<f64>()
        + potential.iter().sum::<f64>()
        + self_attraction.iter().sum::<f64>()
        + coupling.iter().sum::<f64>();
    ReducedEnergyBreakdown {
        total,
        base,
        potential,
        self_attraction,
        coupling,
        coupling_kind: channels.iter().map(|c| c.kind).collect(),
        sym_gap_coefficient,
    }
}

/// Scaled-coordinate evaluation: builds the configuration and evaluates.
pub fn evaluate_scaled(
    system: &SystemParams,
    groups: &GroupStructure,
    constants: &InteractionConstants,
    energies: &[f64],
    theta: usize,
    rho_star: f64,
    alpha_star: &[f64],
) -> Result<ReducedEnergyBreakdown> {
    let cfg = build_configuration(system, theta, rho_star, alpha_star, None)?;
    Ok(evaluate_reduced_energy(system, groups, constants, energies, &cfg))
}

/// Analytic gradient of the total in (ρ*, α*_1..α*_{d-1}); the last gap is
/// eliminated by the closure constraint Σ α*_j = 2π, so iterates satisfy it
/// exactly.
pub fn gradient_scaled(
    system: &SystemParams,
    groups: &GroupStructure,
    constants: &InteractionConstants,
    theta: usize,
    rho_star: f64,
    alpha_star: &[f64],
) -> Vec<f64> {
    let d = system.d;
    let theta_f = theta as f64;
    let scale = theta_f * theta_f.ln(); // dρ_j / dρ*
    let channels = channel_layout(system, groups, constants);

    let mut grad = vec![0.0; d]; // [dρ*, dα*_1 .. dα*_{d-1}]
    let sin_t = (PI / theta_f).sin();
    for j in 0..d {
        let rho_j = rho_star * scale;
        // potential term
        let dpot = theta_f
            * constants.b[j]
            * system.delta[j]
            * (-system.nu[j])
            * rho_j.powf(-system.nu[j] - 1.0)
            * scale;
        // chord attraction
        let eta = 2.0 * rho_j * sin_t;
        let (_, dg) = self_law(system.dim, system.lambda[j].sqrt(), eta);
        let dself = -theta_f * constants.c[j] * dg * 2.0 * sin_t * scale;
        grad[0] += dpot + dself;
    }
    for g in 0..d {
        let ch = &channels[g];
        let alpha_g = if g == d - 1 {
            (2.0 * PI - alpha_star[..d - 1].iter().sum::<f64>()) / theta_f
        } else {
            alpha_star[g] / theta_f
        };
        let rho_g = rho_star * scale;
        let s = rho_g * alpha_g;
        let (_, dlaw) = channel_law(ch, system.dim, s);
        let factor = -theta_f * ch.beta * ch.amplitude * dlaw;
        grad[0] += factor * scale * alpha_g;
        if g == d - 1 {
            for m in 0..d - 1 {
                grad[1 + m] += factor * (-rho_g / theta_f);
            }
        } else {
            grad[1 + g] += factor * (rho_g / theta_f);
        }
    }
    grad
}

/// Closed-form balanced tangential gaps, expanded to one angle per component.
///
/// Per group τ < k the gap is 2π / (√λ_τ S) with
/// S = (n_k - n_{k-1})/√λ_1 + Σ_{s<k} (n_s - n_{s-1})/√λ_s, and the last
/// group reuses the first group's gap; the closure Σ = 2π holds exactly.
pub fn balanced_angles(groups: &GroupStructure) -> Vec<f64> {
    let k = groups.k;
    let size = |tau: usize| groups.group_size(tau) as f64;
    let mut s = size(k - 1) / groups.level[0].sqrt();
    for tau in 0..k - 1 {
        s += size(tau) / groups.level[tau].sqrt();
    }
    let group_angle: Vec<f64> = (0..k)
        .map(|tau| {
            if tau == k - 1 {
                2.0 * PI / (groups.level[0].sqrt() * s)
            } else {
                2.0 * PI / (groups.level[tau].sqrt() * s)
            }
        })
        .collect();
    let d = groups.ends[k - 1];
    (0..d).map(|j| group_angle[groups.group_of(j)]).collect()
}

/// Find an interior critical point of a smooth 1-D function's derivative by
/// scan plus bisection. `want_max` selects the curvature of the bracketed
/// extremum.
pub fn interior_extremum<F>(df: F, lo: f64, hi: f64, want_max: bool) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let n = 400;
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut x_prev = lo;
    let mut f_prev = df(lo);
    let mut x = lo;
    for _ in 1..n {
        x *= ratio;
        let f = df(x);
        let matches = if want_max {
            f_prev > 0.0 && f <= 0.0
        } else {
            f_prev < 0.0 && f >= 0.0
        };
        if matches {
            let (mut a, mut b) = (x_prev, x);
            let mut fa = f_prev;
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = df(m);
                if (fa > 0.0) == (fm > 0.0) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
                if (b - a) <= 1e-14 * b {
                    break;
                }
            }
            return Ok(0.5 * (a + b));
        }
        x_prev = x;
        f_prev = f;
    }
    Err(Error::NoInteriorCriticalPoint { lo, hi })
}

/// Critical point of ρ* ↦ J(ρ*, α⃗*) at fixed angles, together with the
/// dominant decay rate λ_* (smallest θ-exponent coefficient among the
/// exponential channels at these angles).
pub fn optimal_radius(
    system: &SystemParams,
    groups: &GroupStructure,
    constants: &InteractionConstants,
    energies: &[f64],
    theta: usize,
    alpha_star: &[f64],
    want_max: bool,
) -> Result<(f64, f64)> {
    let lambda_star = dominant_rate(system, groups, theta, alpha_star);
    let (nu_star, _) = system.nu_star();
    let hi = (10.0 * nu_star / lambda_star).max(1.0);
    let df = |r: f64| {
        gradient_scaled(system, groups, constants, theta, r, alpha_star)[0]
    };
    let rho = interior_extremum(df, RHO_STAR_FLOOR, hi, want_max)?;
    let _ = energies;
    Ok((rho, lambda_star))
}

/// Smallest θ-exponent coefficient among the exponential channels: the
/// chord-attraction channels contribute 2√λ_j θ sin(π/θ) and each coupling
/// channel 2√λ_ch α*_g.
pub fn dominant_rate(
    system: &SystemParams,
    groups: &GroupStructure,
    theta: usize,
    alpha_star: &[f64],
) -> f64 {
    let theta_f = theta as f64;
    let mut rate = f64::INFINITY;
    for j in 0..system.d {
        rate = rate.min(2.0 * system.lambda[j].sqrt() * theta_f * (PI / theta_f).sin());
    }
    let d = system.d;
    for g in 0..d {
        let i = g;
        let j = (g + 1) % d;
        let sl = system.lambda[i].min(system.lambda[j]).sqrt();
        let a = if g == d - 1 {
            2.0 * PI - alpha_star[..d - 1].iter().sum::<f64>()
        } else {
            alpha_star[g]
        };
        rate = rate.min(2.0 * sl * a);
    }
    let _ = groups;
    rate
}

/// Report of a located critical point of the reduced energy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub case: CaseLabel,
    pub rho_star: f64,
    /// All d scaled gaps (closure holds exactly).
    pub alpha_star: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    /// (positive, negative, zero) inertia of the Hessian on the free
    /// coordinates (ρ*, α*_1..α*_{d-1}).
    pub hessian_signature: (usize, usize, usize),
    pub iterations: usize,
    /// Distance of the solution from the admissible boundary.
    pub interior_margin: f64,
}

struct Objective<'a> {
    system: &'a SystemParams,
    groups: &'a GroupStructure,
    constants: &'a InteractionConstants,
    energies: &'a [f64],
    theta: usize,
}

impl Objective<'_> {
    fn value(&self, z: &[f64]) -> f64 {
        let alpha = self.full_alpha(z);
        evaluate_scaled(
            self.system,
            self.groups,
            self.constants,
            self.energies,
            self.theta,
            z[0],
            &alpha,
        )
        .map(|b| b.total)
        .unwrap_or(f64::NEG_INFINITY)
    }

    fn grad(&self, z: &[f64]) -> Vec<f64> {
        gradient_scaled(
            self.system,
            self.groups,
            self.constants,
            self.theta,
            z[0],
            &self.full_alpha(z),
        )
    }

    fn full_alpha(&self, z: &[f64]) -> Vec<f64> {
        let d = self.system.d;
        let mut alpha = vec![0.0; d];
        alpha[..d - 1].copy_from_slice(&z[1..d]);
        alpha[d - 1] = 2.0 * PI - z[1..d].iter().sum::<f64>();
        alpha
    }

    fn feasible(&self, z: &[f64]) -> bool {
        let d = self.system.d;
        if z[0] < RHO_STAR_FLOOR {
            return false;
        }
        let last = 2.0 * PI - z[1..d].iter().sum::<f64>();
        z[1..d].iter().all(|&a| a > 1e-3) && last > 1e-3
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = z.len();
        let mut h = DMatrix::zeros(n, n);
        for m in 0..n {
            let step = 1e-5 * z[m].abs().max(1e-2);
            let mut zp = z.to_vec();
            zp[m] += step;
            let mut zm = z.to_vec();
            zm[m] -= step;
            let gp = self.grad(&zp);
            let gm = self.grad(&zm);
            for r in 0..n {
                h[(r, m)] = (gp[r] - gm[r]) / (2.0 * step);
            }
        }
        // symmetrize
        let ht = h.transpose();
        0.5 * (h + ht)
    }
}

fn newton_polish(obj: &Objective, z0: &[f64]) -> Result<(Vec<f64>, f64, usize)> {
    let mut z = z0.to_vec();
    let mut gnorm = norm(&obj.grad(&z));
    let mut iters = 0usize;
    for _ in 0..80 {
        if gnorm < 1e-11 {
            break;
        }
        let g = obj.grad(&z);
        let h = obj.hessian(&z);
        let rhs = DVector::from_column_slice(&g);
        let step = h
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Nonconvergence("singular Hessian in polish".into()))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = (0..z.len()).map(|m| z[m] - t * step[m]).collect();
            if obj.feasible(&cand) {
                let cnorm = norm(&obj.grad(&cand));
                if cnorm < gnorm {
                    z = cand;
                    gnorm = cnorm;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        iters += 1;
        if !accepted {
            break;
        }
    }
    Ok((z, gnorm, iters))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Locate a critical point of the reduced energy for the given case.
///
/// Cases (a), (b), (d) run a simplex grid over the gaps (31 nodes per free
/// angle) with a 1-D radial solve per node, then a full Newton polish.
/// Case (c) runs golden-section on ρ* of the inner angle optimum and
/// polishes the saddle the same way.
pub fn find_critical_point(
    system: &SystemParams,
    groups: &GroupStructure,
    constants: &InteractionConstants,
    energies: &[f64],
    theta: usize,
    case: CaseLabel,
    seed: u64,
) -> Result<CriticalPointReport> {
    let obj = Objective { system, groups, constants, energies, theta };
    let want_max = matches!(case, CaseLabel::A | CaseLabel::C);

    let start = match case {
        CaseLabel::A | CaseLabel::B | CaseLabel::D => {
            grid_stage(&obj, system, groups, constants, energies, theta, want_max, case)?
        }
        CaseLabel::C => saddle_stage(&obj, system, groups, constants, energies, theta)?,
        CaseLabel::None => {
            return Err(Error::InvalidParam(
                "instance classified outside the four construction regimes".into(),
            ))
        }
    };

    let (mut z, mut gnorm, mut iters) = newton_polish(&obj, &start)?;
    // Seeded jitter restarts if the polish stalled away from a root.
    if gnorm > 1e-9 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let jiggled: Vec<f64> = z
                .iter()
                .map(|&v| v * (1.0 + 1e-3 * (rng.gen::<f64>() - 0.5)))
                .collect();
            if let Ok((z2, g2, it2)) = newton_polish(&obj, &jiggled) {
                if g2 < gnorm {
                    z = z2;
                    gnorm = g2;
                    iters += it2;
                    if gnorm <= 1e-9 {
                        break;
                    }
                }
            }
        }
    }

    let alpha = obj.full_alpha(&z);
    let margin = alpha
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .min(z[0] - RHO_STAR_FLOOR);
    if margin < 5e-2 {
        return Err(Error::BoundaryAttained(format!(
            "interior margin {margin:.3e} at rho* = {:.4}, alpha* = {alpha:?}",
            z[0]
        )));
    }

    let h = obj.hessian(&z);
    let eig = h.symmetric_eigenvalues();
    let scale = eig.iter().map(|e| e.abs()).fold(0.0f64, f64::max).max(1e-300);
    let mut signature = (0usize, 0usize, 0usize);
    for e in eig.iter() {
        if e.abs() < 1e-9 * scale {
            signature.2 += 1;
        } else if *e > 0.0 {
            signature.0 += 1;
        } else {
            signature.1 += 1;
        }
    }

    let value = obj.value(&z);
    Ok(CriticalPointReport {
        case,
        rho_star: z[0],
        alpha_star: alpha,
        value,
        gradient_norm: gnorm,
        hessian_signature: signature,
        iterations: iters,
        interior_margin: margin,
    })
}

#[allow(clippy::too_many_arguments)]
fn grid_stage(
    obj: &Objective,
    system: &SystemParams,
    groups: &GroupStructure,
    constants: &InteractionConstants,
    energies: &[f64],
    theta: usize,
    want_max: bool,
    case: CaseLabel,
) -> Result<Vec<f64>> {
    let d = system.d;
    let free = d - 1;
    let nodes = 31usize;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx = vec![1usize; free];
    loop {
        // map multi-index to gaps in (0, 2π) on the open simplex
        let alpha_free: Vec<f64> =
            idx.iter().map(|&i| 2.0 * PI * i as f64 / (nodes + 1) as f64).collect();
        let rest = 2.0 * PI - alpha_free.iter().sum::<f64>();
        if rest > 0.05 {
            let mut alpha = alpha_free.clone();
            alpha.push(rest);
            if let Ok((rho, _)) = optimal_radius(
                system, groups, constants, energies, theta, &alpha, want_max,
            ) {
                let mut z = vec![rho];
                z.extend_from_slice(&alpha_free);
                let v = obj.value(&z);
                let better = match &best {
                    None => true,
                    Some((bv, bz)) => {
                        if want_max {
                            v > *bv + 1e-15 * bv.abs()
                                || ((v - bv).abs() <= 1e-15 * bv.abs() && z < *bz)
                        } else {
                            v < *bv - 1e-15 * bv.abs()
                                || ((v - bv).abs() <= 1e-15 * bv.abs() && z < *bz)
                        }
                    }
                };
                if better {
                    best = Some((v, z));
                }
            }
        }
        // advance multi-index
        let mut m = 0;
        loop {
            idx[m] += 1;
            if idx[m] <= nodes {
                break;
            }
            idx[m] = 1;
            m += 1;
            if m == free {
                let (_, z) = best.ok_or(Error::NoInteriorCriticalPoint {
                    lo: RHO_STAR_FLOOR,
                    hi: f64::INFINITY,
                })?;
                let _ = case;
                return Ok(z);
            }
        }
    }
}

fn saddle_stage(
    obj: &Objective,
    system: &SystemParams,
    groups: &GroupStructure,
    constants: &InteractionConstants,
    energies: &[f64],
    theta: usize,
) -> Result<Vec<f64>> {
    let d = system.d;
    // Inner stage: minimize J over the gaps at fixed ρ* (the case-(c)
    // tangential channels are repulsive, so -J is maximized there).
    let inner = |rho: f64| -> (f64, Vec<f64>) {
        let free = d - 1;
        let nodes = 31usize;
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut idx = vec![1usize; free];
        loop {
            let alpha_free: Vec<f64> =
                idx.iter().map(|&i| 2.0 * PI * i as f64 / (nodes + 1) as f64).collect();
            let rest = 2.0 * PI - alpha_free.iter().sum::<f64>();
            if rest > 0.05 {
                let mut z = vec![rho];
                z.extend_from_slice(&alpha_free);
                let v = obj.value(&z);
                if best.as_ref().map_or(true, |(bv, _)| v < *bv) {
                    best = Some((v, z));
                }
            }
            let mut m = 0;
            loop {
                idx[m] += 1;
                if idx[m] <= nodes {
                    break;
                }
                idx[m] = 1;
                m += 1;
                if m == free {
                    let (v, z) = best.unwrap();
                    return (v, z);
                }
            }
        }
    };

    // Outer stage: maximize the inner minimum over ρ* (golden section).
    let (nu_star, _) = system.nu_star();
    let lam = dominant_rate(system, groups, theta, &balanced_angles(groups));
    let (mut a, mut b) = (RHO_STAR_FLOOR, (8.0 * nu_star / lam).max(1.0));
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = inner(x1).0;
    let mut f2 = inner(x2).0;
    for _ in 0..60 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = inner(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = inner(x2).0;
        }
        if (b - a) < 1e-10 * b {
            break;
        }
    }
    let rho = 0.5 * (a + b);
    let (_, z) = inner(rho);
    let _ = (constants, energies);
    Ok(z)
}

/// Where a component sits in the group structure, for the projection
/// formulas: interior (1), group start (2), first (3), group end (4),
/// last (5).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionCase {
    Interior,
    GroupStart,
    First,
    GroupEnd,
    Last,
}

/// Leading-order tangential and radial projections of the coupling error
/// onto the placement derivatives of component j (scaled by 1/θ).
///
/// Both are assembled from the two adjacent coupling channels: the
/// tangential projection is the difference of the channel pulls (zero at
/// balanced gaps), the radial one their weighted sum.
pub fn projection_asymptotics(
    system: &SystemParams,
    groups: &GroupStructure,
    constants: &InteractionConstants,
    config: &SpikeConfiguration,
    j: usize,
) -> Result<(f64, f64, ProjectionCase)> {
    let d = system.d;
    if j >= d {
        return Err(Error::UnsupportedCase(format!("component {j} out of range")));
    }
    let channels = channel_layout(system, groups, constants);
    let right = j;
    let left = (j + d - 1) % d;

    let term = |g: usize| -> f64 {
        let ch = &channels[g];
        let s = config.rho[g] * config.alpha[g];
        let (_, dlaw) = channel_law(ch, system.dim, s);
        // d/ds of the J channel term per θ
        -ch.beta * ch.amplitude * dlaw
    };
    let tr = term(right);
    let tl = term(left);
    let rho_j = config.rho[j];
    let alpha_r = config.alpha[right];
    let alpha_l = config.alpha[left];
    let proj_theta = 0.5 * rho_j * (tr - tl);
    let proj_rho = -0.5 * (tr * alpha_r + tl * alpha_l);

    let case = if groups.k == 1 {
        ProjectionCase::Interior
    } else if j == 0 {
        ProjectionCase::First
    } else if j == d - 1 {
        ProjectionCase::Last
    } else {
        let tau = groups.group_of(j);
        let r = groups.members(tau);
        if j == r.start {
            ProjectionCase::GroupStart
        } else if j == r.end - 1 {
            ProjectionCase::GroupEnd
        } else {
            ProjectionCase::Interior
        }
    };
    Ok((proj_theta, proj_rho, case))
}

/// The coupling value where the combined planar symmetric-pair gap channel
/// changes sign, in both printed forms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JumpingThreshold {
    /// Root of 2C_1 + π^{-1/2} D_1 β (the coefficient form): −2√π C_1 / D_1.
    pub coefficient_root: f64,
    /// The constant as printed in the existence statement: −2 C_1/(√π D_1).
    pub statement_form: f64,
}

pub fn jumping_threshold(c1: f64, d1: f64) -> JumpingThreshold {
    JumpingThreshold {
        coefficient_root: -2.0 * PI.sqrt() * c1 / d1,
        statement_form: -2.0 / PI.sqrt() * c1 / d1,
    }
}

/// Combined gap-channel coefficient 2C_1 + π^{-1/2} D_1 β.
pub fn gap_channel_coefficient(c1: f64, d1: f64, beta: f64) -> f64 {
    2.0 * c1 + d1 * beta / PI.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_constants(d: usize, k: usize) -> InteractionConstants {
        InteractionConstants {
            b: vec![10.0; d],
            c: vec![60.0; d],
            d: vec![500.0; k],
            dprime: if k >= 2 { vec![300.0; k] } else { vec![] },
            dprime_dressing: 1.0,
            fit_residuals: vec![],
        }
    }

    fn three_component_system() -> (SystemParams, GroupStructure) {
        let mut beta = vec![vec![0.2; 3]; 3];
        for j in 0..3 {
            beta[j][j] = 0.0;
        }
        beta[0][2] = 0.1;
        beta[2][0] = 0.1;
        let sys = SystemParams {
            dim: 2,
            d: 3,
            lambda: vec![1.0, 2.0, 3.0],
            mu: vec![1.0; 3],
            beta,
            delta: vec![0.5; 3],
            nu: vec![1.5; 3],
        };
        let groups = crate::geometry::group_components(&sys.lambda).unwrap();
        (sys, groups)
    }

    fn planar_pair_system(beta12: f64, delta: f64) -> (SystemParams, GroupStructure) {
        let sys = SystemParams {
            dim: 2,
            d: 2,
            lambda: vec![1.0, 1.0],
            mu: vec![1.0, 1.0],
            beta: vec![vec![0.0, beta12], vec![beta12, 0.0]],
            delta: vec![delta, delta],
            nu: vec![1.5, 1.5],
        };
        let groups = crate::geometry::group_components(&sys.lambda).unwrap();
        (sys, groups)
    }

    #[test]
    fn breakdown_sums_to_total_and_coupling_vanishes_without_interactions() {
        // delta = 0 and beta -> 0 limit: only base and chord attraction remain.
        let (mut sys, groups) = planar_pair_system(1e-300, 0.0);
        sys.delta = vec![0.0, 0.0];
        let consts = toy_constants(2, 1);
        let energies = [1.3, 1.3];
        let theta = 12;
        let b = evaluate_scaled(&sys, &groups, &consts, &energies, theta, 0.8, &[PI, PI])
            .unwrap();
        let parts: f64 = b.base.iter().sum::<f64>()
            + b.potential.iter().sum::<f64>()
            + b.self_attraction.iter().sum::<f64>()
            + b.coupling.iter().sum::<f64>();
        assert_relative_eq!(b.total, parts, max_relative = 1e-12);
        for v in &b.coupling {
            assert!(v.abs() < 1e-250);
        }
        for v in &b.potential {
            assert_eq!(*v, 0.0);
        }
        // exact expected structure: θ Σ m_j − θ Σ C_j η̃^{-1/2} e^{-η̃}
        let theta_f = theta as f64;
        let rho = 0.8 * theta_f * theta_f.ln();
        let eta = 2.0 * rho * (PI / theta_f).sin();
        let expected = theta_f * (2.0 * 1.3)
            - theta_f * 2.0 * 60.0 * eta.powf(-0.5) * (-eta).exp();
        assert_relative_eq!(b.total, expected, max_relative = 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let (sys, groups) = three_component_system();
        let consts = toy_constants(3, 3);
        let energies = [1.0, 1.1, 1.2];
        let theta = 20;
        // 20 deterministic pseudo-random interior points
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let rho = 0.2 + 0.8 * rng.gen::<f64>();
            let a1 = 1.0 + 1.5 * rng.gen::<f64>();
            let a2 = 1.0 + 1.5 * rng.gen::<f64>();
            let alpha = [a1, a2, 2.0 * PI - a1 - a2];
            if alpha[2] < 0.3 {
                continue;
            }
            let g = gradient_scaled(&sys, &groups, &consts, theta, rho, &alpha);
            let f = |r: f64, x1: f64, x2: f64| {
                let al = [x1, x2, 2.0 * PI - x1 - x2];
                evaluate_scaled(&sys, &groups, &consts, &energies, theta, r, &al)
                    .unwrap()
                    .total
            };
            let h = 1e-5;
            let fd = [
                (f(rho + h, a1, a2) - f(rho - h, a1, a2)) / (2.0 * h),
                (f(rho, a1 + h, a2) - f(rho, a1 - h, a2)) / (2.0 * h),
                (f(rho, a1, a2 + h) - f(rho, a1, a2 - h)) / (2.0 * h),
            ];
            let scale = norm(&g).max(norm(&fd)).max(1e-9);
            for m in 0..3 {
                assert!(
                    (g[m] - fd[m]).abs() <= 1e-6 * scale,
                    "component {m}: analytic {} vs fd {}",
                    g[m],
                    fd[m]
                );
            }
        }
    }

    #[test]
    fn balanced_angles_closed_form() {
        // d = 3, λ = (1, 2, 3): S = 2 + 1/√2, gaps (2π/S, 2π/(√2 S), 2π/S)
        let (_, groups) = three_component_system();
        let angles = balanced_angles(&groups);
        let s = 2.0 + 1.0 / 2.0f64.sqrt();
        assert_relative_eq!(angles[0], 2.0 * PI / s, max_relative = 1e-14);
        assert_relative_eq!(angles[1], 2.0 * PI / (2.0f64.sqrt() * s), max_relative = 1e-14);
        assert_relative_eq!(angles[2], angles[0], max_relative = 1e-15);
        assert_relative_eq!(angles[0], 2.32100, max_relative = 1e-5);
        assert_relative_eq!(angles[1], 1.64119, max_relative = 1e-5);
        let total: f64 = angles.iter().sum();
        assert_relative_eq!(total, 2.0 * PI, epsilon = 1e-12);

        // all frequencies equal: uniform gaps
        let g1 = crate::geometry::group_components(&[2.0, 2.0, 2.0, 2.0]).unwrap();
        for a in balanced_angles(&g1) {
            assert_relative_eq!(a, PI / 2.0, epsilon = 1e-14);
        }

        // two components, any frequencies: both gaps π
        let g2 = crate::geometry::group_components(&[1.0, 3.5]).unwrap();
        for a in balanced_angles(&g2) {
            assert_relative_eq!(a, PI, epsilon = 1e-14);
        }
    }

    #[test]
    fn synthetic_radius_model_approaches_crossover() {
        // Two-term model: B ρ^{-ν} (θ log θ)^{-ν} − K θ^{-λρ}; the maximizer
        // approaches ν/λ as θ grows. Oracle: dense 1-D scan.
        let (nu, lam, big_b, big_k) = (1.5, 2.0, 30.0, 1.0);
        let model_d = |theta: f64| {
            move |rho: f64| {
                let tl = theta * theta.ln();
                -nu * big_b * rho.powf(-nu - 1.0) * tl.powf(-nu)
                    + big_k * lam * theta.ln() * theta.powf(-lam * rho)
            }
        };
        // dense scan for the interior local maximum (the potential term
        // diverges toward the left end, so the boundary is excluded)
        let scan_oracle = |theta: f64| {
            let f = |rho: f64| {
                big_b * rho.powf(-nu) * (theta * theta.ln()).powf(-nu)
                    - big_k * theta.powf(-lam * rho)
            };
            let n = 200_000;
            let step = (3.0 - 0.01) / (n - 1) as f64;
            let mut best: Option<(f64, f64)> = None;
            for i in 1..n - 1 {
                let rho = 0.01 + i as f64 * step;
                let v = f(rho);
                if v >= f(rho - step)
                    && v >= f(rho + step)
                    && best.map_or(true, |(bv, _)| v > bv)
                {
                    best = Some((v, rho));
                }
            }
            best.unwrap().1
        };
        let mut errors = Vec::new();
        for theta in [40.0, 80.0] {
            let rho = interior_extremum(model_d(theta), 0.01, 3.0, true).unwrap();
            let oracle = scan_oracle(theta);
            assert_relative_eq!(rho, oracle, max_relative = 1e-4);
            errors.push((rho - nu / lam).abs() / (nu / lam));
        }
        assert!(errors[1] < 0.05, "error at theta=80: {}", errors[1]);
        assert!(errors[1] < errors[0], "{errors:?}");

        // doubling the potential amplitude only shifts the maximizer by
        // O(1/log θ)
        let theta: f64 = 80.0;
        let shifted = {
            let f = move |rho: f64| {
                -nu * 2.0 * big_b * rho.powf(-nu - 1.0) * (theta * theta.ln()).powf(-nu)
                    + big_k * lam * theta.ln() * theta.powf(-lam * rho)
            };
            interior_extremum(f, 0.01, 3.0, true).unwrap()
        };
        let base = interior_extremum(model_d(theta), 0.01, 3.0, true).unwrap();
        // O(1/log θ) argmax stability: the first-order shift is
        // ln2/(λ lnθ), amplified by the curvature feedback of the power term
        let unit = 2.0f64.ln() / (lam * theta.ln());
        assert!((shifted - base).abs() < 3.0 * unit, "shift {}", shifted - base);
        assert!((shifted - base).abs() > 0.2 * unit, "shift {}", shifted - base);

        // flipped sign: both terms decrease, no interior maximum
        let flipped = move |rho: f64| {
            nu * big_b * rho.powf(-nu - 1.0) * (theta * theta.ln()).powf(-nu)
                + big_k * lam * theta.ln() * theta.powf(-lam * rho)
        };
        assert!(matches!(
            interior_extremum(flipped, 0.01, 3.0, true),
            Err(Error::NoInteriorCriticalPoint { .. })
        ));
    }

    #[test]
    fn projection_cancels_at_symmetric_balance_and_flips_sign() {
        let (sys, groups) = planar_pair_system(0.3, 0.5);
        let consts = toy_constants(2, 1);
        let theta = 12;
        let balanced = build_configuration(&sys, theta, 0.8, &[PI, PI], None).unwrap();
        let (pt, _, case) =
            projection_asymptotics(&sys, &groups, &consts, &balanced, 0).unwrap();
        assert_eq!(case, ProjectionCase::Interior);
        assert!(pt.abs() < 1e-18, "balanced tangential projection {pt}");

        let below = build_configuration(&sys, theta, 0.8, &[PI - 0.2, PI + 0.2], None).unwrap();
        let above = build_configuration(&sys, theta, 0.8, &[PI + 0.2, PI - 0.2], None).unwrap();
        let (pb, _, _) = projection_asymptotics(&sys, &groups, &consts, &below, 0).unwrap();
        let (pa, _, _) = projection_asymptotics(&sys, &groups, &consts, &above, 0).unwrap();
        assert!(pb * pa < 0.0, "no sign change across balance: {pb} vs {pa}");
    }

    #[test]
    fn three_dimensional_projection_carries_log_factor() {
        // Interior same-group channel at N = 3: value scales like
        // s^{-2} e^{-2√λ s} log s; doubling s must track the law including
        // the log factor (plainly visible against the log-free form).
        let mut sys = SystemParams {
            dim: 3,
            d: 2,
            lambda: vec![1.0, 1.0],
            mu: vec![1.0, 1.0],
            beta: vec![vec![0.0, 0.3], vec![0.3, 0.0]],
            delta: vec![0.5, 0.5],
            nu: vec![1.5, 1.5],
        };
        sys.validate().unwrap();
        let groups = crate::geometry::group_components(&sys.lambda).unwrap();
        let consts = toy_constants(2, 1);
        let theta = 12;
        let off = [PI - 0.4, PI + 0.4];
        let c1 = build_configuration(&sys, theta, 0.6, &off, None).unwrap();
        let c2 = build_configuration(&sys, theta, 1.2, &off, None).unwrap();
        let (p1, _, _) = projection_asymptotics(&sys, &groups, &consts, &c1, 0).unwrap();
        let (p2, _, _) = projection_asymptotics(&sys, &groups, &consts, &c2, 0).unwrap();
        // reproduce the ratio from the displayed law with and without log
        let s = |cfg: &SpikeConfiguration, g: usize| cfg.rho[g] * cfg.alpha[g];
        let lawlog = |s: f64| -> f64 {
            // derivative magnitude of s^{-2} e^{-2s} log s dominates at 2 log s
            (2.0 + 2.0 / s) * s.powf(-2.0) * (-2.0 * s).exp() * s.ln()
                - s.powf(-3.0) * (-2.0 * s).exp()
        };
        let lawplain = |s: f64| -> f64 { (2.0 + 2.0 / s) * s.powf(-2.0) * (-2.0 * s).exp() };
        let measured = p2 / p1;
        let with_log = (c2.rho[0] * (lawlog(s(&c2, 0)) - lawlog(s(&c2, 1))))
            / (c1.rho[0] * (lawlog(s(&c1, 0)) - lawlog(s(&c1, 1))));
        let without_log = (c2.rho[0] * (lawplain(s(&c2, 0)) - lawplain(s(&c2, 1))))
            / (c1.rho[0] * (lawplain(s(&c1, 0)) - lawplain(s(&c1, 1))));
        assert_relative_eq!(measured, with_log, max_relative = 1e-10);
        assert!((measured - without_log).abs() > 0.02 * measured.abs());
    }

    #[test]
    fn jumping_threshold_forms() {
        let t = jumping_threshold(1.0, 1.0);
        assert_relative_eq!(t.coefficient_root, -2.0 * PI.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(t.coefficient_root, -3.5449077018, max_relative = 1e-9);
        assert_relative_eq!(t.statement_form, -1.1283791671, max_relative = 1e-9);
        // coefficient changes sign exactly at the root
        let root = t.coefficient_root;
        assert!(gap_channel_coefficient(1.0, 1.0, root + 1e-6) > 0.0);
        assert!(gap_channel_coefficient(1.0, 1.0, root - 1e-6) < 0.0);
        assert_relative_eq!(gap_channel_coefficient(1.0, 1.0, root), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn case_a_critical_point_is_interior_maximum() {
        let (sys, groups) = three_component_system();
        let consts = toy_constants(3, 3);
        let energies = [1.0, 1.1, 1.2];
        let report = find_critical_point(
            &sys,
            &groups,
            &consts,
            &energies,
            40,
            CaseLabel::A,
            0,
        )
        .unwrap();
        assert!(report.gradient_norm < 1e-8 * report.value.abs().min(1.0).max(1e-8));
        // maximum: all negative directions
        assert_eq!(report.hessian_signature.1, 3);
        assert_eq!(report.hessian_signature.0, 0);
        let total: f64 = report.alpha_star.iter().sum();
        assert_relative_eq!(total, 2.0 * PI, epsilon = 1e-10);
    }

    #[test]
    fn case_b_mirror_is_interior_minimum() {
        let (mut sys, groups) = three_component_system();
        for j in 0..3 {
            sys.delta[j] = -0.5;
            for i in 0..3 {
                if i != j {
                    sys.beta[i][j] = -sys.beta[i][j].abs();
                }
            }
        }
        let consts = toy_constants(3, 3);
        let energies = [1.0, 1.1, 1.2];
        let report =
            find_critical_point(&sys, &groups, &consts, &energies, 40, CaseLabel::B, 0).unwrap();
        assert_eq!(report.hessian_signature.0, 3);
        assert_eq!(report.hessian_signature.1, 0);
    }

    #[test]
    fn case_a_and_b_settle_near_balanced_angles() {
        // The tangential optimum equalizes the √λ-weighted gaps as θ grows;
        // at finite θ the prefactors shift it, so this asserts the weighted
        // spread shrinks from θ=40 to θ=160.
        let (sys, groups) = three_component_system();
        let consts = toy_constants(3, 3);
        let energies = [1.0, 1.1, 1.2];
        let spread = |theta: usize| {
            let report = find_critical_point(
                &sys, &groups, &consts, &energies, theta, CaseLabel::A, 0,
            )
            .unwrap();
            let weighted: Vec<f64> = (0..3)
                .map(|g| {
                    let sl = sys.lambda[g].min(sys.lambda[(g + 1) % 3]).sqrt();
                    sl * report.alpha_star[g]
                })
                .collect();
            let mean = weighted.iter().sum::<f64>() / 3.0;
            weighted.iter().map(|w| (w - mean).abs()).fold(0.0f64, f64::max) / mean
        };
        let s40 = spread(40);
        let s160 = spread(160);
        assert!(s160 < s40, "spread did not shrink: {s40} -> {s160}");
    }
}
