//! Translated overlap integrals between ground-state profiles and the
//! asymptotic constants of their decay laws.
//!
//! Four integral families drive the reduced energy: the potential moment
//! ∫|x|^{-ν} w²(x-ξ), the same-component attraction ∫w³ w(x-ξ), the
//! same-frequency cross term ∫w² w²(x-ξ) and the cross-frequency boundary
//! term. Each follows a power-times-exponential law in the separation; the
//! constants are extracted by fixing the known exponents and fitting only the
//! amplitude.

use crate::error::{Error, Result};
use crate::ground_state::RadialProfile;
use crate::numerics::least_squares;
use crate::par;
use serde::{Deserialize, Serialize};

/// Which overlap integral family a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OverlapKind {
    /// ∫ |x|^{-nu} w_b²(x - ξ) dx
    PotentialB { nu: f64 },
    /// ∫ w_a³(x) w_b(x - ξ) dx
    CrossC,
    /// ∫ w_a²(x) w_b²(x - ξ) dx, both profiles sharing the same frequency
    SameGroupD,
    /// ∫ w_a²(x) w_b²(x - ξ) dx across adjacent frequency groups
    CrossGroupDprime,
}

/// One measured overlap value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapSample {
    pub kind: OverlapKind,
    pub separation: f64,
    pub value: f64,
}

/// Decay-law model fitted to overlap samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel {
    /// v = K ξ^p e^{-c ξ}
    PowerExp,
    /// v = K ξ^p e^{-c ξ} log ξ
    PowerExpLog,
}

/// Fitted (K, p, c) triple with the fit residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub constant: f64,
    pub power: f64,
    pub rate: f64,
    pub rms_residual: f64,
}

/// Asymptotic constants for a full system, one entry per component/group as
/// appropriate, with the residuals of the amplitude fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionConstants {
    /// Potential-moment constants B_j (per component).
    pub b: Vec<f64>,
    /// Same-component attraction constants C_j (per component).
    pub c: Vec<f64>,
    /// Same-frequency cross constants D_τ (per group).
    pub d: Vec<f64>,
    /// Cross-frequency boundary constants D'_τ (k-1 adjacent boundaries, then
    /// the wrap pair). Empty when there is a single group.
    pub dprime: Vec<f64>,
    /// Scale factor applied to D' for the correction-dressed boundary
    /// constants in the reduced energy (configurable, default 1).
    pub dprime_dressing: f64,
    /// RMS log-residuals of the amplitude fits, in the order b, c, d, dprime.
    pub fit_residuals: Vec<f64>,
}

/// Overlap integral of two profiles at separation `xi`.
///
/// The integral is reduced to two dimensions: directly in the plane for
/// N = 2, and by rotational symmetry about the separation axis (weight 2πs)
/// for N = 3. Composite Simpson is applied at spacing h and h/2; the op
/// fails if the two disagree beyond 0.5%.
pub fn overlap_integral(
    profile_a: &RadialProfile,
    profile_b: &RadialProfile,
    xi: f64,
    kind: OverlapKind,
) -> Result<f64> {
    if xi < 0.0 {
        return Err(Error::InvalidParam("separation must be >= 0".into()));
    }
    let dim = profile_a.params.dim;
    if dim != profile_b.params.dim {
        return Err(Error::InvalidParam("profiles must share the dimension".into()));
    }
    if !(2..=3).contains(&dim) {
        return Err(Error::BadDimension(dim));
    }
    if let OverlapKind::PotentialB { nu } = kind {
        if nu >= dim as f64 {
            return Err(Error::InvalidParam(format!(
                "potential exponent nu = {nu} must be < N = {dim} for an integrable moment"
            )));
        }
    }
    let lam_max = profile_a.params.lambda.max(profile_b.params.lambda);
    let h = (0.1 / lam_max.sqrt()).min(0.2);
    let coarse = overlap_at_resolution(profile_a, profile_b, xi, kind, h);
    let fine = overlap_at_resolution(profile_a, profile_b, xi, kind, 0.5 * h);
    let rel = (coarse - fine).abs() / fine.abs().max(1e-300);
    if rel > 5e-3 {
        return Err(Error::ResolutionUnresolved { rel, limit: 5e-3 });
    }
    Ok(fine)
}

fn overlap_at_resolution(
    pa: &RadialProfile,
    pb: &RadialProfile,
    xi: f64,
    kind: OverlapKind,
    h: f64,
) -> f64 {
    let dim = pa.params.dim;
    let reach_a = 14.0 / pa.params.lambda.sqrt();
    let reach_b = 14.0 / pb.params.lambda.sqrt();
    let u_lo = -reach_a;
    let u_hi = xi + reach_b;
    let s_hi = reach_a.max(reach_b);
    let nu_pts = (((u_hi - u_lo) / h).ceil() as usize + 1) | 1;
    let ns_pts = ((s_hi / h).ceil() as usize + 1) | 1;
    let du = (u_hi - u_lo) / (nu_pts - 1) as f64;
    let ds = s_hi / (ns_pts - 1) as f64;

    let exclusion = h; // ball around the |x|^{-nu} singularity
    let row_integral = |iu: usize| -> f64 {
        let u = u_lo + iu as f64 * du;
        let mut acc = 0.0;
        for is in 0..ns_pts {
            let s = is as f64 * ds;
            let ra = (u * u + s * s).sqrt();
            let rb = ((u - xi) * (u - xi) + s * s).sqrt();
            let f = match kind {
                OverlapKind::PotentialB { nu } => {
                    if ra <= exclusion {
                        0.0
                    } else {
                        ra.powf(-nu) * pb.evaluate(rb).powi(2)
                    }
                }
                OverlapKind::CrossC => pa.evaluate(ra).powi(3) * pb.evaluate(rb),
                OverlapKind::SameGroupD | OverlapKind::CrossGroupDprime => {
                    pa.evaluate(ra).powi(2) * pb.evaluate(rb).powi(2)
                }
            };
            // Rotational weight: 2πs for N = 3; mirror symmetry in s for N = 2.
            let weight = if dim == 3 {
                2.0 * std::f64::consts::PI * s
            } else {
                2.0
            };
            let simpson_c = if is == 0 || is == ns_pts - 1 {
                1.0
            } else if is % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += simpson_c * weight * f;
        }
        acc * ds / 3.0
    };

    let rows = par::indexed_map(nu_pts, row_integral);
    crate::numerics::simpson(&rows, du)
}

/// Least squares of log v = log K + p log ξ − c ξ (+ log log ξ for the
/// log-corrected model) over a sample family.
pub fn fit_decay_law(samples: &[OverlapSample], model: DecayModel) -> Result<DecayFit> {
    if samples.len() < 6 {
        return Err(Error::InvalidParam(format!(
            "need at least 6 samples for a decay fit, got {}",
            samples.len()
        )));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.separation), hi.max(s.separation)));
    if hi / lo < 1.8 {
        return Err(Error::InvalidParam(format!(
            "separation span ratio {:.2} below 1.8",
            hi / lo
        )));
    }
    let mut rows = Vec::with_capacity(samples.len());
    let mut rhs = Vec::with_capacity(samples.len());
    for s in samples {
        if s.value <= 0.0 || s.separation <= 1.0 {
            return Err(Error::InvalidParam("samples must have positive value and separation > 1".into()));
        }
        rows.push(vec![1.0, s.separation.ln(), -s.separation]);
        let mut y = s.value.ln();
        if model == DecayModel::PowerExpLog {
            y -= s.separation.ln().ln();
        }
        rhs.push(y);
    }
    let fit = least_squares(&rows, &rhs, 1e8)?;
    Ok(DecayFit {
        constant: fit.coeffs[0].exp(),
        power: fit.coeffs[1],
        rate: fit.coeffs[2],
        rms_residual: fit.rms_residual,
    })
}

/// Amplitude-only fit: exponent pair (p, c) fixed to the asymptotic law,
/// optional log factor, K = exp(mean log-residual). Returns (K, rms).
pub fn fit_amplitude(
    samples: &[OverlapSample],
    power: f64,
    rate: f64,
    log_factor: bool,
) -> (f64, f64) {
    let logs: Vec<f64> = samples
        .iter()
        .map(|s| {
            let mut y = s.value.ln() - power * s.separation.ln() + rate * s.separation;
            if log_factor {
                y -= s.separation.ln().ln();
            }
            y
        })
        .collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let rms = (logs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
    (mean.exp(), rms)
}

/// Sample an overlap family on the standard window ξ√λ ∈ [lo, hi].
pub fn sample_family(
    pa: &RadialProfile,
    pb: &RadialProfile,
    kind: OverlapKind,
    rate_scale: f64,
    window: (f64, f64),
    count: usize,
) -> Result<Vec<OverlapSample>> {
    let (lo, hi) = window;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let xi = (lo + (hi - lo) * i as f64 / (count - 1) as f64) / rate_scale;
        let value = overlap_integral(pa, pb, xi, kind)?;
        out.push(OverlapSample { kind, separation: xi, value });
    }
    Ok(out)
}

/// Group/frequency data the constants extraction needs, decoupled from the
/// full system description.
pub struct FamilyLayout<'a> {
    /// Per-component solved profiles, in component order.
    pub profiles: &'a [RadialProfile],
    /// Per-component potential exponents ν_j.
    pub nu: &'a [f64],
    /// Group boundaries n_1 < ... < n_k = d (1-based component counts).
    pub group_ends: &'a [usize],
}

pub const FIT_WINDOW: (f64, f64) = (8.0, 16.0);
pub const FIT_POINTS: usize = 6;

/// Extract all named interaction constants for a system.
///
/// Exponents are pinned to the asymptotic laws; only amplitudes are fitted.
/// B_j is cross-checked against ∫w_j² (its ξ→∞ limit by concentration of the
/// translated mass).
pub fn constants_from_system(layout: &FamilyLayout) -> Result<InteractionConstants> {
    let d = layout.profiles.len();
    let k = layout.group_ends.len();
    let dim = layout.profiles[0].params.dim;
    let n_dim = dim as f64;
    let mut fit_residuals = Vec::new();

    // B_j: power -nu_j, no exponential.
    let mut b = Vec::with_capacity(d);
    for j in 0..d {
        let pj = &layout.profiles[j];
        let sl = pj.params.lambda.sqrt();
        let samples = sample_family(
            pj,
            pj,
            OverlapKind::PotentialB { nu: layout.nu[j] },
            sl,
            FIT_WINDOW,
            FIT_POINTS,
        )?;
        let (kconst, rms) = fit_amplitude(&samples, -layout.nu[j], 0.0, false);
        let rel = (kconst - pj.int_w2).abs() / pj.int_w2;
        if rel > 2e-2 {
            return Err(Error::Nonconvergence(format!(
                "B_{j} = {kconst:.6e} deviates {rel:.2e} from its mass limit {:.6e}",
                pj.int_w2
            )));
        }
        b.push(kconst);
        fit_residuals.push(rms);
    }

    // C_j: power (1-N)/2, rate sqrt(lambda_j).
    let mut c = Vec::with_capacity(d);
    for j in 0..d {
        let pj = &layout.profiles[j];
        let sl = pj.params.lambda.sqrt();
        let samples = sample_family(pj, pj, OverlapKind::CrossC, sl, FIT_WINDOW, FIT_POINTS)?;
        let (kconst, rms) = fit_amplitude(&samples, (1.0 - n_dim) / 2.0, sl, false);
        c.push(kconst);
        fit_residuals.push(rms);
    }

    // D_τ: same-frequency pair in each group; power -1/2 (N=2) or -2 with a
    // log factor (N=3), rate 2 sqrt(lambda_group).
    let mut dconsts = Vec::with_capacity(k);
    for tau in 0..k {
        let start = if tau == 0 { 0 } else { layout.group_ends[tau - 1] };
        let end = layout.group_ends[tau];
        let i = start;
        let j = if end - start > 1 { start + 1 } else { start };
        let pi = &layout.profiles[i];
        let pj = &layout.profiles[j];
        let sl = pi.params.lambda.sqrt();
        let samples = sample_family(pi, pj, OverlapKind::SameGroupD, sl, FIT_WINDOW, FIT_POINTS)?;
        let (power, log_factor) = if dim == 2 { (-0.5, false) } else { (-2.0, true) };
        let (kconst, rms) = fit_amplitude(&samples, power, 2.0 * sl, log_factor);
        dconsts.push(kconst);
        fit_residuals.push(rms);
    }

    // D'_τ: adjacent-group boundary pairs, then the wrap pair; the rate is
    // twice the root of the smaller frequency. Only defined for k >= 2.
    let mut dprime = Vec::new();
    if k >= 2 {
        for tau in 0..k {
            let (i, j, rate_lambda) = if tau + 1 < k {
                let i = layout.group_ends[tau] - 1; // last of group tau (0-based)
                (i, i + 1, layout.profiles[i].params.lambda)
            } else {
                // wrap pair (last component, first component); first group is lower
                (d - 1, 0, layout.profiles[0].params.lambda)
            };
            let sl = rate_lambda.sqrt();
            let samples = sample_family(
                &layout.profiles[i],
                &layout.profiles[j],
                OverlapKind::CrossGroupDprime,
                sl,
                FIT_WINDOW,
                FIT_POINTS,
            )?;
            let (kconst, rms) = fit_amplitude(&samples, 1.0 - n_dim, 2.0 * sl, false);
            dprime.push(kconst);
            fit_residuals.push(rms);
        }
    }

    let consts = InteractionConstants {
        b,
        c,
        d: dconsts,
        dprime,
        dprime_dressing: 1.0,
        fit_residuals,
    };
    for v in consts.b.iter().chain(&consts.c).chain(&consts.d).chain(&consts.dprime) {
        if !(*v > 0.0) {
            return Err(Error::Nonconvergence(format!("non-positive fitted constant {v}")));
        }
    }
    Ok(consts)
}

impl InteractionConstants {
    /// Boundary constants dressed by the correction contribution: D'' = κ D'.
    pub fn dressed_dprime(&self, idx: usize) -> f64 {
        self.dprime_dressing * self.dprime[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::{solve_ground_state, ScalarParams};
    use approx::assert_relative_eq;
    use std::sync::OnceLock;

    fn profile(lambda: f64, mu: f64, dim: usize) -> RadialProfile {
        let p = ScalarParams::new(lambda, mu, dim).unwrap();
        solve_ground_state(p, p.default_r_max(), 1e-8).unwrap()
    }

    fn p2_11() -> &'static RadialProfile {
        static CELL: OnceLock<RadialProfile> = OnceLock::new();
        CELL.get_or_init(|| profile(1.0, 1.0, 2))
    }

    fn p3_11() -> &'static RadialProfile {
        static CELL: OnceLock<RadialProfile> = OnceLock::new();
        CELL.get_or_init(|| profile(1.0, 1.0, 3))
    }

    #[test]
    fn coincident_cross_term_reduces_to_fourth_moment() {
        let p = p2_11();
        let v = overlap_integral(p, p, 0.0, OverlapKind::CrossC).unwrap();
        assert_relative_eq!(v, p.int_w4, max_relative = 1e-6);
        let vd = overlap_integral(p, p, 0.0, OverlapKind::SameGroupD).unwrap();
        assert_relative_eq!(vd, p.int_w4, max_relative = 1e-6);
    }

    #[test]
    fn cross_term_matches_polar_oracle() {
        // Oracle: independent quadrature in polar coordinates centered on the
        // translated profile, at 4x the default resolution.
        let p = p2_11();
        let xi = 10.0;
        let v = overlap_integral(p, p, xi, OverlapKind::CrossC).unwrap();

        let h = 0.025; // 4x finer than the default 0.1
        let r_hi = 14.0f64;
        let nr = (r_hi / h) as usize + 1;
        let ntheta = 721;
        let dtheta = 2.0 * std::f64::consts::PI / (ntheta - 1) as f64;
        let mut ring = Vec::with_capacity(nr);
        for ir in 0..nr {
            let r = ir as f64 * h;
            let mut acc = Vec::with_capacity(ntheta);
            for it in 0..ntheta {
                let th = it as f64 * dtheta;
                // x = translated center + polar offset; distance to origin:
                let x0 = xi + r * th.cos();
                let x1 = r * th.sin();
                let ra = (x0 * x0 + x1 * x1).sqrt();
                acc.push(p.evaluate(ra).powi(3) * p.evaluate(r));
            }
            ring.push(crate::numerics::simpson(&acc, dtheta) * r);
        }
        let oracle = crate::numerics::simpson(&ring, h);
        assert_relative_eq!(v, oracle, max_relative = 5e-3);
    }

    #[test]
    fn noiseless_regression_recovers_exact_triple() {
        let (kc, p, c) = (3.0, -0.5, 2.0);
        let samples: Vec<OverlapSample> = (0..8)
            .map(|i| {
                let xi = 8.0 + i as f64;
                OverlapSample {
                    kind: OverlapKind::CrossC,
                    separation: xi,
                    value: kc * xi.powf(p) * (-c * xi).exp(),
                }
            })
            .collect();
        let fit = fit_decay_law(&samples, DecayModel::PowerExp).unwrap();
        assert_relative_eq!(fit.constant, kc, max_relative = 1e-6);
        assert_relative_eq!(fit.power, p, epsilon = 1e-6);
        assert_relative_eq!(fit.rate, c, epsilon = 1e-6);
        assert!(fit.rms_residual < 1e-10);
    }

    #[test]
    fn cross_attraction_rate_and_power_follow_the_law() {
        let p = p2_11();
        let samples =
            sample_family(p, p, OverlapKind::CrossC, 1.0, FIT_WINDOW, FIT_POINTS).unwrap();
        // monotone decreasing family
        for w in samples.windows(2) {
            assert!(w[1].value < w[0].value);
        }
        let fit = fit_decay_law(&samples, DecayModel::PowerExp).unwrap();
        assert_relative_eq!(fit.rate, 1.0, max_relative = 2e-2);
        assert!((fit.power - (-0.5)).abs() <= 0.05 * 0.5, "power {}", fit.power);
    }

    #[test]
    fn same_group_rate_is_twice_sqrt_lambda() {
        let p = p2_11();
        let samples =
            sample_family(p, p, OverlapKind::SameGroupD, 1.0, FIT_WINDOW, FIT_POINTS).unwrap();
        let fit = fit_decay_law(&samples, DecayModel::PowerExp).unwrap();
        assert_relative_eq!(fit.rate, 2.0, max_relative = 2e-2);
    }

    #[test]
    fn log_corrected_model_preferred_in_three_dimensions() {
        let p = p3_11();
        let samples =
            sample_family(p, p, OverlapKind::SameGroupD, 1.0, (8.0, 20.0), 10).unwrap();
        let plain = fit_decay_law(&samples, DecayModel::PowerExp).unwrap();
        let logged = fit_decay_law(&samples, DecayModel::PowerExpLog).unwrap();
        assert!(
            plain.rms_residual >= 2.0 * logged.rms_residual,
            "plain {:.3e} vs logged {:.3e}",
            plain.rms_residual,
            logged.rms_residual
        );
    }

    #[test]
    fn potential_moment_approaches_mass() {
        for dim in [2usize, 3] {
            let p = if dim == 2 { p2_11() } else { p3_11() };
            for nu in [1.5, 1.9] {
                let samples = sample_family(
                    p,
                    p,
                    OverlapKind::PotentialB { nu },
                    1.0,
                    FIT_WINDOW,
                    FIT_POINTS,
                )
                .unwrap();
                let (kconst, _) = fit_amplitude(&samples, -nu, 0.0, false);
                assert_relative_eq!(kconst, p.int_w2, max_relative = 2e-2);
            }
        }
    }

    #[test]
    fn symmetric_two_component_constants_coincide() {
        let p = p2_11();
        let profiles = vec![p.clone(), p.clone()];
        let layout = FamilyLayout {
            profiles: &profiles,
            nu: &[1.5, 1.5],
            group_ends: &[2],
        };
        let consts = constants_from_system(&layout).unwrap();
        assert_eq!(consts.c.len(), 2);
        assert_relative_eq!(consts.c[0], consts.c[1], max_relative = 1e-10);
        assert_eq!(consts.d.len(), 1);
        assert!(consts.dprime.is_empty());
        // B and C amplitude fits are tight; the same-frequency family keeps a
        // slowly decaying core correction at this window (ridge term plus a
        // log-weighted core term of comparable size), so its residual is only
        // bounded loosely.
        for r in &consts.fit_residuals[..4] {
            assert!(*r < 1e-2, "fit residual {r:.3e}");
        }
        assert!(consts.fit_residuals[4] < 7e-2);
    }

    #[test]
    fn boundary_rate_uses_smaller_frequency() {
        // two groups: lambda = (1, 2); the boundary and wrap pairs decay at
        // 2*sqrt(lambda_min)
        let pa = p2_11();
        let pb = profile(2.0, 1.0, 2);
        let samples =
            sample_family(pa, &pb, OverlapKind::CrossGroupDprime, 1.0, (12.0, 24.0), 8).unwrap();
        let fit = fit_decay_law(&samples, DecayModel::PowerExp).unwrap();
        assert_relative_eq!(fit.rate, 2.0, max_relative = 2e-2);
        assert!((fit.power - (-1.0)).abs() <= 0.05, "power {}", fit.power);
    }

    #[test]
    fn nu_at_least_dimension_is_rejected() {
        let p = p2_11();
        assert!(overlap_integral(p, p, 5.0, OverlapKind::PotentialB { nu: 2.0 }).is_err());
    }
}
