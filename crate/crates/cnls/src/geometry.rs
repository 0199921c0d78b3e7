//! Problem instances, frequency-group structure, hypothesis validation and
//! the ring-of-spikes configuration with its gap distances.

use crate::error::{Error, Result};
use crate::interaction::InteractionConstants;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A full coupled-system instance: frequencies, self/cross couplings and the
/// potential tail data per component. The potential remainder beyond the
/// leading tail is identically zero by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemParams {
    /// Ambient dimension, 2 or 3.
    pub dim: usize,
    /// Component count d >= 2.
    pub d: usize,
    /// Limit frequencies λ_j, nondecreasing after grouping.
    pub lambda: Vec<f64>,
    /// Self-interaction strengths μ_j.
    pub mu: Vec<f64>,
    /// Symmetric coupling matrix with zero diagonal.
    pub beta: Vec<Vec<f64>>,
    /// Potential tail amplitudes δ_j.
    pub delta: Vec<f64>,
    /// Potential tail exponents ν_j (< dim for integrable moments).
    pub nu: Vec<f64>,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::BadDimension(self.dim));
        }
        if self.d < 2 {
            return Err(Error::InvalidParam("need at least two components".into()));
        }
        let d = self.d;
        if self.lambda.len() != d
            || self.mu.len() != d
            || self.delta.len() != d
            || self.nu.len() != d
            || self.beta.len() != d
        {
            return Err(Error::InvalidParam("parameter vectors must have length d".into()));
        }
        for j in 0..d {
            if self.beta[j].len() != d {
                return Err(Error::InvalidParam("beta must be a d x d matrix".into()));
            }
            if !(self.lambda[j] > 0.0) || !(self.mu[j] > 0.0) {
                return Err(Error::InvalidParam("lambda and mu must be positive".into()));
            }
            if !(self.nu[j] > 0.0) || self.nu[j] >= self.dim as f64 {
                return Err(Error::InvalidParam(format!(
                    "nu[{j}] = {} must lie in (0, N)",
                    self.nu[j]
                )));
            }
            if self.beta[j][j] != 0.0 {
                return Err(Error::InvalidParam("beta diagonal must be zero".into()));
            }
            for i in 0..d {
                if i != j && self.beta[i][j] == 0.0 {
                    return Err(Error::InvalidParam(format!("beta[{i}][{j}] must be nonzero")));
                }
                if (self.beta[i][j] - self.beta[j][i]).abs() > 1e-14 {
                    return Err(Error::InvalidParam("beta must be symmetric".into()));
                }
            }
        }
        Ok(())
    }

    /// Smallest potential exponent ν_* and its attaining set.
    pub fn nu_star(&self) -> (f64, Vec<usize>) {
        let nu_star = self.nu.iter().cloned().fold(f64::INFINITY, f64::min);
        let set = (0..self.d).filter(|&j| self.nu[j] <= nu_star + 1e-12).collect();
        (nu_star, set)
    }

    /// Potential V_j(x) = λ_j + δ_j s(|x|) with s(r) = r^{-ν} for r >= 1 and a
    /// C¹ even cap inside the unit ball (the tail is exact, the remainder
    /// vanishes identically).
    pub fn potential(&self, j: usize, r: f64) -> f64 {
        let nu = self.nu[j];
        let s = if r >= 1.0 {
            r.powf(-nu)
        } else {
            1.0 + 0.5 * nu - 0.5 * nu * r * r
        };
        self.lambda[j] + self.delta[j] * s
    }
}

/// Partition of the components by equal limit frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupStructure {
    /// Number of distinct frequency levels.
    pub k: usize,
    /// Group ends n_1 < ... < n_k = d (counts, 1-based).
    pub ends: Vec<usize>,
    /// Permutation applied to sort the components (identity when already
    /// sorted): `perm[new_index] = old_index`.
    pub perm: Vec<usize>,
    /// Sorted frequency of each group.
    pub level: Vec<f64>,
}

impl GroupStructure {
    /// Group index (0-based) of component j (0-based).
    pub fn group_of(&self, j: usize) -> usize {
        self.ends.iter().position(|&e| j < e).expect("component index in range")
    }

    /// Half-open component range of group tau (0-based).
    pub fn members(&self, tau: usize) -> std::ops::Range<usize> {
        let start = if tau == 0 { 0 } else { self.ends[tau - 1] };
        start..self.ends[tau]
    }

    pub fn group_size(&self, tau: usize) -> usize {
        self.members(tau).len()
    }
}

/// Group equal frequencies (tolerance 1e-12 relative) in ascending order.
pub fn group_components(lambda: &[f64]) -> Result<GroupStructure> {
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidParam("all frequencies must be positive".into()));
    }
    let d = lambda.len();
    let mut perm: Vec<usize> = (0..d).collect();
    perm.sort_by(|&a, &b| lambda[a].partial_cmp(&lambda[b]).unwrap());
    let sorted: Vec<f64> = perm.iter().map(|&i| lambda[i]).collect();
    let mut ends = Vec::new();
    let mut level = vec![sorted[0]];
    for j in 1..d {
        if (sorted[j] - sorted[j - 1]).abs() > 1e-12 * sorted[j].max(1.0) {
            ends.push(j);
            level.push(sorted[j]);
        }
    }
    ends.push(d);
    Ok(GroupStructure { k: level.len(), ends, perm, level })
}

/// Ring-of-spikes placement: θ spikes per component on circles of radius
/// ρ_j, the component rings offset by the tangential gaps α_j.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeConfiguration {
    /// Spikes per component (θ >= 3).
    pub theta_count: usize,
    /// Ring radii ρ_j.
    pub rho: Vec<f64>,
    /// Unscaled gaps α_1..α_d with Σ α_j = 2π/θ exactly (α_0, the global
    /// phase, is fixed to zero).
    pub alpha: Vec<f64>,
    /// Angular offsets θ_j = Σ_{i<j} α_i (θ_1 = 0).
    pub offsets: Vec<f64>,
    /// Spike centers η_{t,j}, first two coordinates (third is 0 for N = 3):
    /// centers[j][t].
    pub centers: Vec<Vec<[f64; 2]>>,
    /// Scaled parameters the configuration was built from.
    pub rho_star: f64,
    pub alpha_star: Vec<f64>,
}

/// Build a configuration from the scaled parameters: ρ_j = ρ* θ log θ
/// (plus optional per-component offsets) and α_j = α*_j / θ.
pub fn build_configuration(
    system: &SystemParams,
    theta_count: usize,
    rho_star: f64,
    alpha_star: &[f64],
    rho_offsets: Option<&[f64]>,
) -> Result<SpikeConfiguration> {
    if theta_count < 3 {
        return Err(Error::DegenerateConfig(format!("theta = {theta_count} < 3")));
    }
    if !(rho_star > 0.0) {
        return Err(Error::DegenerateConfig("rho_star must be positive".into()));
    }
    if alpha_star.len() != system.d {
        return Err(Error::DegenerateConfig("alpha_star must have one entry per component".into()));
    }
    let sum: f64 = alpha_star.iter().sum();
    if (sum - 2.0 * PI).abs() > 1e-9 {
        return Err(Error::DegenerateConfig(format!(
            "alpha_star must sum to 2*pi, got {sum}"
        )));
    }
    if alpha_star.iter().any(|&a| a <= 0.0) {
        return Err(Error::DegenerateConfig("alpha_star entries must be positive".into()));
    }

    let theta_f = theta_count as f64;
    let scale = theta_f * theta_f.ln();
    let rho: Vec<f64> = (0..system.d)
        .map(|j| rho_star * scale + rho_offsets.map_or(0.0, |o| o[j]))
        .collect();
    if rho.iter().any(|&r| r <= 0.0) {
        return Err(Error::DegenerateConfig("negative ring radius".into()));
    }
    // exact closure: alpha_d absorbs the rounding of the partial sums
    let mut alpha: Vec<f64> = alpha_star.iter().map(|a| a / theta_f).collect();
    let partial: f64 = alpha[..system.d - 1].iter().sum();
    alpha[system.d - 1] = 2.0 * PI / theta_f - partial;

    let mut offsets = vec![0.0; system.d];
    for j in 1..system.d {
        offsets[j] = offsets[j - 1] + alpha[j - 1];
    }
    let centers = (0..system.d)
        .map(|j| {
            (0..theta_count)
                .map(|t| {
                    let ang = offsets[j] + 2.0 * PI * t as f64 / theta_f;
                    [rho[j] * ang.cos(), rho[j] * ang.sin()]
                })
                .collect()
        })
        .collect();
    Ok(SpikeConfiguration {
        theta_count,
        rho,
        alpha,
        offsets,
        centers,
        rho_star,
        alpha_star: alpha_star.to_vec(),
    })
}

/// Exact and asymptotic gap distances of a configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapDistances {
    /// Minimal same-component gap per component (exact scan).
    pub eta_tilde: Vec<f64>,
    /// Chord formula 2 ρ_j sin(π/θ) for comparison.
    pub eta_tilde_formula: Vec<f64>,
    /// Minimal gap within each group (exact scan; same-component pairs
    /// included for singleton groups).
    pub eta_hat_group: Vec<f64>,
    /// Asymptotic prediction ρ α̂_τ per group.
    pub eta_hat_group_formula: Vec<f64>,
    /// Global minimal gap over all distinct spikes (exact scan).
    pub eta_hat: f64,
    /// Asymptotic prediction ρ · min_j α_j.
    pub eta_hat_formula: f64,
}

/// Exact pairwise minima by scan, with the asymptotic predictions alongside.
pub fn gap_distances(groups: &GroupStructure, config: &SpikeConfiguration) -> GapDistances {
    let d = config.centers.len();
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();

    let eta_tilde: Vec<f64> = (0..d)
        .map(|j| {
            let c = &config.centers[j];
            let mut best = f64::INFINITY;
            for t in 0..c.len() {
                for s in (t + 1)..c.len() {
                    best = best.min(dist(c[t], c[s]));
                }
            }
            best
        })
        .collect();
    let eta_tilde_formula: Vec<f64> = (0..d)
        .map(|j| 2.0 * config.rho[j] * (PI / config.theta_count as f64).sin())
        .collect();

    let mut eta_hat_group = Vec::with_capacity(groups.k);
    let mut eta_hat_group_formula = Vec::with_capacity(groups.k);
    for tau in 0..groups.k {
        let members: Vec<usize> = groups.members(tau).collect();
        let mut best = f64::INFINITY;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a..] {
                for t in 0..config.theta_count {
                    for s in 0..config.theta_count {
                        if i == j && t == s {
                            continue;
                        }
                        best = best.min(dist(config.centers[i][t], config.centers[j][s]));
                    }
                }
            }
        }
        eta_hat_group.push(best);
        // α̂_τ: smallest in-group gap, including the return gap around the
        // group's angular span.
        let theta_f = config.theta_count as f64;
        let span: f64 = members[..members.len() - 1].iter().map(|&j| config.alpha[j]).sum();
        let mut ahat = 2.0 * PI / theta_f - span;
        for &j in &members[..members.len() - 1] {
            ahat = ahat.min(config.alpha[j]);
        }
        let rho_bar = config.rho[members[0]];
        eta_hat_group_formula.push(rho_bar * ahat.min(2.0 * (PI / theta_f).sin() * 2.0));
    }

    let mut eta_hat = f64::INFINITY;
    for i in 0..d {
        for j in i..d {
            for t in 0..config.theta_count {
                for s in 0..config.theta_count {
                    if i == j && t == s {
                        continue;
                    }
                    eta_hat = eta_hat.min(dist(config.centers[i][t], config.centers[j][s]));
                }
            }
        }
    }
    let alpha_min = config.alpha.iter().cloned().fold(f64::INFINITY, f64::min);
    let eta_hat_formula = config.rho[0] * alpha_min;

    GapDistances {
        eta_tilde,
        eta_tilde_formula,
        eta_hat_group,
        eta_hat_group_formula,
        eta_hat,
        eta_hat_formula,
    }
}

/// Which of the four construction regimes an instance falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    A,
    B,
    C,
    D,
    None,
}

/// Outcome of checking the structural hypotheses on an instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    /// λ_{n_k} < 4 λ_{n_1}.
    pub pinching: bool,
    /// ν_* > 1.
    pub nu_star_above_one: bool,
    /// Every β_{i,j} at least 1e-2 away from the computed principal coupling
    /// eigenvalue β_{i,j,*}.
    pub beta_away_from_eigenvalues: bool,
    /// β_{j,j+1} < β_{j,j+1,*} for all adjacent pairs.
    pub beta_below_principal: bool,
    /// Σ_{j : ν_j = ν_*} B_j δ_j.
    pub potential_weight: f64,
    /// Coupling threshold −2√π C_1/D_1 (coefficient-root form) for the
    /// two-component equal-frequency planar regime, when applicable.
    pub jumping_threshold: Option<f64>,
    /// Same threshold in the form printed in the existence statement
    /// (differs by a factor π; reported for comparison).
    pub jumping_threshold_statement_form: Option<f64>,
    pub case: CaseLabel,
    /// Principal eigenvalues β_{i,j,*} indexed [i][j] (weight i, frequency j).
    pub coupling_eigenvalues: Vec<Vec<f64>>,
    /// Human-readable reasons for any failed clause.
    pub failures: Vec<String>,
    /// The tangential ordering constraint holds in the form α_{n_{τ+1}} <
    /// α_{n_τ} over τ = 1..k-2, and over τ = 2..k-1 (both off-by-one readings
    /// are reported rather than silently enforcing one).
    pub alpha_ordering_first_form: Option<bool>,
    pub alpha_ordering_second_form: Option<bool>,
}

/// Check the structural hypotheses and classify the instance.
///
/// `eigenvalues[i][j]` must hold the principal eigenvalue of the frequency-j
/// operator against the weight w_i² (from `coupling_eigenvalue`).
pub fn validate_hypotheses(
    system: &SystemParams,
    groups: &GroupStructure,
    eigenvalues: &[Vec<f64>],
    constants: &InteractionConstants,
    config: Option<&SpikeConfiguration>,
) -> ValidationReport {
    let d = system.d;
    let k = groups.k;
    let mut failures = Vec::new();

    let pinching = groups.level[k - 1] < 4.0 * groups.level[0];
    if !pinching {
        failures.push(format!(
            "PINCHING: lambda_max = {} !< 4 lambda_min = {}",
            groups.level[k - 1],
            4.0 * groups.level[0]
        ));
    }

    let (nu_star, m_star) = system.nu_star();
    let nu_star_above_one = nu_star > 1.0;
    if !nu_star_above_one {
        failures.push(format!("NU_STAR: nu_* = {nu_star} must exceed 1"));
    }

    let margin = 1e-2;
    let mut beta_away_from_eigenvalues = true;
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            if (system.beta[i][j] - eigenvalues[i][j]).abs() <= margin {
                beta_away_from_eigenvalues = false;
                failures.push(format!(
                    "EIGENVALUE_MARGIN: beta[{i}][{j}] = {} within {margin} of beta_* = {}",
                    system.beta[i][j], eigenvalues[i][j]
                ));
            }
        }
    }

    let mut beta_below_principal = true;
    for j in 0..d - 1 {
        if system.beta[j][j + 1] >= eigenvalues[j + 1][j] {
            beta_below_principal = false;
            failures.push(format!(
                "BETA_BELOW_STAR: beta[{j}][{}] = {} !< beta_* = {}",
                j + 1,
                system.beta[j][j + 1],
                eigenvalues[j + 1][j]
            ));
        }
    }

    let potential_weight: f64 = m_star.iter().map(|&j| constants.b[j] * system.delta[j]).sum();

    // Tangential sign sums per group boundary.
    let in_group_sum = |tau: usize| -> f64 {
        let r = groups.members(tau);
        (r.start..r.end.saturating_sub(1)).map(|j| system.beta[j][j + 1]).sum()
    };
    let all_boundaries_positive = (0..k.saturating_sub(1)).all(|tau| {
        let r = groups.members(tau);
        let boundary = system.beta[r.end - 1][r.end];
        let interior_ok = groups.group_size(tau) <= 1 || in_group_sum(tau) > 0.0;
        interior_ok && boundary > 0.0
    });
    let all_boundaries_negative = (0..k.saturating_sub(1)).all(|tau| {
        let r = groups.members(tau);
        let boundary = system.beta[r.end - 1][r.end];
        let interior_ok = groups.group_size(tau) <= 1 || in_group_sum(tau) < 0.0;
        interior_ok && boundary < 0.0
    });

    // Two-component equal-frequency planar regime: the coupling threshold
    // where the combined gap-channel coefficient 2C_1 + π^{-1/2} D_1 β
    // changes sign.
    let planar_pair = system.dim == 2 && d == 2 && k == 1;
    let jumping_threshold =
        planar_pair.then(|| -2.0 * PI.sqrt() * constants.c[0] / constants.d[0]);
    let jumping_threshold_statement_form =
        planar_pair.then(|| -2.0 / PI.sqrt() * constants.c[0] / constants.d[0]);

    let case = if potential_weight > 0.0 && all_boundaries_positive && !planar_pair {
        // attractive tangential couplings throughout
        if k == 1 && system.beta[d - 1][0] <= 0.0 {
            CaseLabel::None
        } else {
            CaseLabel::A
        }
    } else if potential_weight < 0.0 && all_boundaries_negative && d >= 3 && !planar_pair {
        CaseLabel::B
    } else if planar_pair {
        let beta = system.beta[0][1];
        let thr = jumping_threshold.unwrap();
        if potential_weight > 0.0 && beta > thr && beta < 0.0 {
            CaseLabel::C
        } else if potential_weight < 0.0 && beta < thr {
            CaseLabel::D
        } else if potential_weight > 0.0 && beta > 0.0 {
            CaseLabel::A
        } else {
            CaseLabel::None
        }
    } else if d == 2 && potential_weight > 0.0 && system.beta[0][1] < 0.0 {
        // two components with distinct frequencies (or N = 3): repulsive
        // coupling still admits the saddle construction
        CaseLabel::C
    } else {
        CaseLabel::None
    };

    let (first, second) = match config {
        Some(cfg) if k >= 2 => {
            let at = |tau: usize| cfg.alpha[groups.ends[tau] - 1];
            let first = (0..k.saturating_sub(2)).all(|tau| at(tau + 1) < at(tau));
            let second = (1..k.saturating_sub(1)).all(|tau| at(tau + 1) < at(tau));
            (Some(first), Some(second))
        }
        _ => (None, None),
    };

    ValidationReport {
        pinching,
        nu_star_above_one,
        beta_away_from_eigenvalues,
        beta_below_principal,
        potential_weight,
        jumping_threshold,
        jumping_threshold_statement_form,
        case,
        coupling_eigenvalues: eigenvalues.to_vec(),
        failures,
        alpha_ordering_first_form: first,
        alpha_ordering_second_form: second,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn simple_system(dim: usize, lambda: Vec<f64>, beta12: f64) -> SystemParams {
        let d = lambda.len();
        let mut beta = vec![vec![0.1; d]; d];
        for j in 0..d {
            beta[j][j] = 0.0;
        }
        if d >= 2 {
            beta[0][1] = beta12;
            beta[1][0] = beta12;
        }
        SystemParams {
            dim,
            d,
            lambda,
            mu: vec![1.0; d],
            beta,
            delta: vec![0.5; d],
            nu: vec![1.5; d],
        }
    }

    #[test]
    fn grouping_collects_equal_frequencies() {
        let g = group_components(&[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.k, 2);
        assert_eq!(g.ends, vec![2, 3]);

        let g = group_components(&[3.0, 1.0, 1.0]).unwrap();
        assert_eq!(g.k, 2);
        assert_eq!(g.ends, vec![2, 3]);
        assert_eq!(g.perm, vec![1, 2, 0]);

        let g = group_components(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.k, 3);
        assert_eq!(g.ends, vec![1, 2, 3]);
    }

    #[test]
    fn chord_gap_for_square_ring() {
        let sys = simple_system(2, vec![1.0, 1.0], 0.3);
        let theta = 4;
        // rho_star chosen so rho = 10
        let scale = 4.0 * 4.0f64.ln();
        let cfg =
            build_configuration(&sys, theta, 10.0 / scale, &[PI, PI], None).unwrap();
        let groups = group_components(&sys.lambda).unwrap();
        let gaps = gap_distances(&groups, &cfg);
        assert_relative_eq!(
            gaps.eta_tilde[0],
            2.0 * 10.0 * (PI / 4.0).sin(),
            max_relative = 1e-12
        );
        assert_relative_eq!(gaps.eta_tilde[0], 14.142135623730951, max_relative = 1e-6);
    }

    #[test]
    fn rotation_by_fundamental_angle_permutes_centers() {
        let sys = simple_system(2, vec![1.0, 2.0, 3.0].into(), 0.3);
        let cfg = build_configuration(&sys, 5, 0.8, &[2.0, 2.1, 2.0 * PI - 4.1], None).unwrap();
        let ang = 2.0 * PI / 5.0;
        let (c, s) = (ang.cos(), ang.sin());
        for j in 0..3 {
            for t in 0..5 {
                let p = cfg.centers[j][t];
                let rotated = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
                let q = cfg.centers[j][(t + 1) % 5];
                assert_relative_eq!(rotated[0], q[0], epsilon = 1e-9);
                assert_relative_eq!(rotated[1], q[1], epsilon = 1e-9);
            }
        }
        // closure is exact
        let total: f64 = cfg.alpha.iter().sum();
        assert_relative_eq!(total, 2.0 * PI / 5.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_minimum_gap_close_to_alpha_formula_at_large_theta() {
        let sys = simple_system(2, vec![1.0, 2.0, 3.0].into(), 0.3);
        let alpha_star = [2.321, 1.641, 2.0 * PI - 2.321 - 1.641];
        let cfg = build_configuration(&sys, 40, 0.5, &alpha_star, None).unwrap();
        let groups = group_components(&sys.lambda).unwrap();
        let gaps = gap_distances(&groups, &cfg);
        assert_relative_eq!(gaps.eta_hat, gaps.eta_hat_formula, max_relative = 5e-3);
        // exact distance never exceeds the asymptotic chord at theta >= 8
        assert!(gaps.eta_hat <= gaps.eta_hat_formula * (1.0 + 1e-12));
        // ordering eta_hat <= eta_hat_group <= eta_tilde
        for tau in 0..groups.k {
            assert!(gaps.eta_hat <= gaps.eta_hat_group[tau] + 1e-12);
            for j in groups.members(tau) {
                assert!(gaps.eta_hat_group[tau] <= gaps.eta_tilde[j] + 1e-12);
            }
        }
    }

    #[test]
    fn nearest_neighbors_are_adjacent_components() {
        let sys = simple_system(2, vec![1.0, 1.0], 0.3);
        let cfg = build_configuration(&sys, 8, 0.6, &[2.5, 2.0 * PI - 2.5], None).unwrap();
        let groups = group_components(&sys.lambda).unwrap();
        let gaps = gap_distances(&groups, &cfg);
        let d01 = {
            let a = cfg.centers[0][0];
            let b = cfg.centers[1][0];
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
        };
        assert_relative_eq!(gaps.eta_hat, d01, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_configurations_are_rejected() {
        let sys = simple_system(2, vec![1.0, 1.0], 0.3);
        assert!(build_configuration(&sys, 2, 0.5, &[PI, PI], None).is_err());
        assert!(build_configuration(&sys, 4, -0.5, &[PI, PI], None).is_err());
        assert!(build_configuration(&sys, 4, 0.5, &[PI, PI / 2.0], None).is_err());
        assert!(build_configuration(&sys, 4, 0.5, &[2.0 * PI, 0.0], None).is_err());
    }

    #[test]
    fn potential_has_exact_tail_and_smooth_cap() {
        let sys = simple_system(2, vec![1.0, 1.0], 0.3);
        assert_relative_eq!(sys.potential(0, 2.0), 1.0 + 0.5 * 2.0f64.powf(-1.5));
        // C1 join at r = 1
        let eps = 1e-6;
        let left = (sys.potential(0, 1.0) - sys.potential(0, 1.0 - eps)) / eps;
        let right = (sys.potential(0, 1.0 + eps) - sys.potential(0, 1.0)) / eps;
        assert_relative_eq!(left, right, max_relative = 1e-4);
        // cap is even and finite at the origin
        assert!(sys.potential(0, 0.0).is_finite());
    }

    #[test]
    fn validation_flags_pinching() {
        use crate::interaction::InteractionConstants;
        let consts = InteractionConstants {
            b: vec![1.0, 1.0],
            c: vec![1.0, 1.0],
            d: vec![1.0, 1.0],
            dprime: vec![1.0, 1.0],
            dprime_dressing: 1.0,
            fit_residuals: vec![],
        };
        let eig = vec![vec![5.0; 2]; 2];
        for (lam2, expect) in [(3.9, true), (4.1, false)] {
            let sys = simple_system(2, vec![1.0, lam2], 0.3);
            let groups = group_components(&sys.lambda).unwrap();
            let report = validate_hypotheses(&sys, &groups, &eig, &consts, None);
            assert_eq!(report.pinching, expect, "lambda2 = {lam2}");
            if !expect {
                assert!(report.failures.iter().any(|f| f.contains("PINCHING")));
            }
        }
    }

    #[test]
    fn case_classification_examples() {
        use crate::interaction::InteractionConstants;
        // d = 3, distinct frequencies, positive deltas and adjacent couplings
        let mut sys = simple_system(2, vec![1.0, 2.0, 3.0], 0.2);
        sys.beta[1][2] = 0.2;
        sys.beta[2][1] = 0.2;
        let groups = group_components(&sys.lambda).unwrap();
        let consts = InteractionConstants {
            b: vec![1.0; 3],
            c: vec![1.0; 3],
            d: vec![1.0; 3],
            dprime: vec![1.0; 3],
            dprime_dressing: 1.0,
            fit_residuals: vec![],
        };
        let eig = vec![vec![5.0; 3]; 3];
        let report = validate_hypotheses(&sys, &groups, &eig, &consts, None);
        assert_eq!(report.case, CaseLabel::A);

        // planar two-component equal-frequency pair in the window between the
        // threshold and zero
        let sys = simple_system(2, vec![1.0, 1.0], -0.5);
        let groups = group_components(&sys.lambda).unwrap();
        let consts2 = InteractionConstants {
            b: vec![1.0; 2],
            c: vec![1.0; 2],
            d: vec![1.0; 2],
            dprime: vec![],
            dprime_dressing: 1.0,
            fit_residuals: vec![],
        };
        let eig2 = vec![vec![5.0; 2]; 2];
        let report = validate_hypotheses(&sys, &groups, &eig2, &consts2, None);
        let thr = report.jumping_threshold.unwrap();
        assert_relative_eq!(thr, -2.0 * PI.sqrt(), max_relative = 1e-12);
        assert!(thr < -0.5 && -0.5 < 0.0);
        assert_eq!(report.case, CaseLabel::C);

        // below the threshold with negative potential weight: the minimizing
        // regime
        let mut sys = simple_system(2, vec![1.0, 1.0], -4.0);
        sys.delta = vec![-0.5, -0.5];
        let report = validate_hypotheses(&sys, &groups, &eig2, &consts2, None);
        assert_eq!(report.case, CaseLabel::D);
    }

    #[test]
    fn spike_configuration_round_trips_through_json() {
        let sys = simple_system(2, vec![1.0, 2.0], 0.3);
        let cfg = build_configuration(&sys, 6, 0.7, &[3.0, 2.0 * PI - 3.0], None).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: SpikeConfiguration = serde_json::from_str(&text).unwrap();
        assert_eq!(back.theta_count, cfg.theta_count);
        assert_eq!(back.alpha, cfg.alpha);
        assert_eq!(back.centers, cfg.centers);
    }
}
