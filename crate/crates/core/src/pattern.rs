//! Beam-pattern analytics for a far-field codeword illuminating a near-field
//! user: focusing parameters, discrete and closed-form gains, normalized
//! gain, threshold mapping, beamwidth and the modified Rayleigh distance.
//!
//! Closed forms assume half-wavelength spacing; the discrete gain does not.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dft_vector, grid_projection, steering_vector, ArrayConfig, PolarPosition};
use crate::specfun::erf_unchecked;

/// e^{j3π/4}
pub(crate) fn ray() -> Complex64 {
    Complex64::new(-std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
}

fn erf_on_ray(t: f64) -> Complex64 {
    erf_unchecked(ray() * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusingParams {
    /// Near-field focusing gain N²d(1−θ²)/(8r).
    pub alpha: f64,
    /// Angular offset N(θ−φ)/2.
    pub beta: f64,
}

impl FocusingParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(invalid(format!(
                "focusing params need finite alpha >= 0, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Offset along the focusing ray: √π(β−2α)/(2√α).
    pub fn ray_offset(&self) -> f64 {
        PI.sqrt() * (self.beta - 2.0 * self.alpha) / (2.0 * self.alpha.sqrt())
    }
}

pub fn focusing_alpha(cfg: &ArrayConfig, theta: f64, r: f64) -> f64 {
    let n = cfg.n_elements as f64;
    n * n * cfg.spacing_m * (1.0 - theta * theta) / (8.0 * r)
}

pub fn focusing_params(cfg: &ArrayConfig, theta: f64, r: f64, phi: f64) -> Result<FocusingParams> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("range must be positive, got {r}")));
    }
    if !theta.is_finite() || theta.abs() > 1.0 {
        return Err(invalid(format!("theta must lie in [-1, 1], got {theta}")));
    }
    let n = cfg.n_elements as f64;
    FocusingParams::new(focusing_alpha(cfg, theta, r), 0.5 * n * (theta - phi))
}

/// |b^H(θ,r) a(φ)| by direct summation with exact element ranges.
pub fn gain_discrete(cfg: &ArrayConfig, theta: f64, r: f64, phi: f64) -> Result<f64> {
    let pos = PolarPosition::new(theta, r)?;
    let b = steering_vector(cfg, &pos);
    Ok(b.inner(&dft_vector(cfg, phi).weights).norm())
}

/// b^H(θ,r) a(φ_n) for every angle of an `n_samples`-point DFT grid.
pub fn sweep_response(cfg: &ArrayConfig, theta: f64, r: f64, n_samples: usize) -> Result<Vec<Complex64>> {
    let pos = PolarPosition::new(theta, r)?;
    let conj: Vec<Complex64> = steering_vector(cfg, &pos).weights.iter().map(|c| c.conj()).collect();
    Ok(grid_projection(cfg, &conj, n_samples))
}

/// |b^H(θ,r) a(φ_n)| over a DFT grid.
pub fn sweep_gains(cfg: &ArrayConfig, theta: f64, r: f64, n_samples: usize) -> Result<Vec<f64>> {
    Ok(sweep_response(cfg, theta, r, n_samples)?
        .iter()
        .map(|g| g.norm())
        .collect())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

fn check_closed(params: &FocusingParams) -> Result<()> {
    if params.alpha == 0.0 {
        return Err(Error::DegenerateParameter(
            "alpha = 0: the beam is in the far field, use the sinc pattern".into(),
        ));
    }
    check_alpha(params.alpha)
}

/// Two-erf difference erf(e·√π(β−2α)/(2√α)) − erf(e·√π(β+2α)/(2√α)).
fn erf_difference(p: &FocusingParams) -> Complex64 {
    let s = p.ray_offset();
    erf_on_ray(s) - erf_on_ray(s + 2.0 * (PI * p.alpha).sqrt())
}

/// Closed-form gain |erf(·) − erf(·)|/(4√α).
pub fn gain_closed_form(params: &FocusingParams) -> Result<f64> {
    check_closed(params)?;
    if params.beta.abs() < 1e-8 {
        return central_gain_exact(params.alpha);
    }
    Ok(erf_difference(params).norm() / (4.0 * params.alpha.sqrt()))
}

/// Gain at the beam center, |erf(e^{j3π/4}√(απ))|/(2√α).
pub fn central_gain_exact(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(erf_on_ray((PI * alpha).sqrt()).norm() / (2.0 * alpha.sqrt()))
}

/// Large-α limit 1/(2√α) of the central gain.
pub fn central_gain_asymptotic(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(0.5 / alpha.sqrt())
}

/// Closed-form gain divided by the exact central gain; equals 1 at β = 0.
pub fn normalized_gain(params: &FocusingParams) -> Result<f64> {
    check_closed(params)?;
    if params.beta.abs() < 1e-8 {
        return Ok(1.0);
    }
    let center = erf_on_ray((PI * params.alpha).sqrt()).norm();
    Ok(0.5 * erf_difference(params).norm() / center)
}

/// Closed-form gain divided by the asymptotic central gain 1/(2√α):
/// ½|erf(·) − erf(·)|.
pub fn normalized_gain_asymptotic(params: &FocusingParams) -> Result<f64> {
    check_closed(params)?;
    Ok(0.5 * erf_difference(params).norm())
}

/// Single-erf approximation ½|erf(e·s) + 1| valid when β + 2α ≫ √α.
pub fn normalized_gain_moderate(params: &FocusingParams) -> Result<f64> {
    check_closed(params)?;
    Ok(rho_from_s(params.ray_offset()))
}

/// ρ(s) = ½|erf(e^{j3π/4}s) + 1|.
pub fn rho_from_s(s: f64) -> f64 {
    0.5 * (erf_on_ray(s) + 1.0).norm()
}

const RHO_MIN: f64 = 0.05;
const RHO_MAX: f64 = 0.95;

/// Argument of the last maximum of ρ(s) before its monotone decay.
fn rho_peak() -> f64 {
    // ρ oscillates for s < 0 and decays monotonically past its largest lobe.
    let (mut best_s, mut best) = (-4.0, rho_from_s(-4.0));
    let steps = 800;
    for i in 0..=steps {
        let s = -4.0 + 8.0 * i as f64 / steps as f64;
        let v = rho_from_s(s);
        if v > best {
            best = v;
            best_s = s;
        }
    }
    let (mut lo, mut hi) = (best_s - 0.01, best_s + 0.01);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if rho_from_s(m1) < rho_from_s(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    0.5 * (lo + hi)
}

/// Inverts ρ(s) on its monotone branch; s_from_rho(0.5) = 0.
pub fn s_from_rho(rho: f64) -> Result<f64> {
    if !(rho > RHO_MIN && rho < RHO_MAX) {
        return Err(Error::OutOfRange(format!(
            "threshold {rho} outside ({RHO_MIN}, {RHO_MAX})"
        )));
    }
    if rho == 0.5 {
        return Ok(0.0);
    }
    let mut lo = rho_peak();
    let mut hi = 4.0;
    while rho_from_s(hi) >= rho {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = rho_from_s(mid);
        if (v - rho).abs() <= 1e-12 {
            return Ok(mid);
        }
        if v > rho {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form beamwidth Nd(1−θ²)/r + (4s/√π)√(d(1−θ²)/(2r)).
pub fn beamwidth_closed(cfg: &ArrayConfig, theta: f64, r: f64, rho: f64) -> Result<f64> {
    let s = s_from_rho(rho)?;
    beamwidth_from_s(cfg, theta, r, s)
}

pub fn beamwidth_from_s(cfg: &ArrayConfig, theta: f64, r: f64, s_rho: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(invalid(format!("range must be positive, got {r}")));
    }
    if !theta.is_finite() || theta.abs() > 1.0 {
        return Err(invalid(format!("theta must lie in [-1, 1], got {theta}")));
    }
    let q = cfg.spacing_m * (1.0 - theta * theta);
    let n = cfg.n_elements as f64;
    Ok(n * q / r + 4.0 * s_rho / PI.sqrt() * (q / (2.0 * r)).sqrt())
}

/// Distance at which the closed-form beamwidth at angle `theta` equals
/// `width`: the exact algebraic inverse of [`beamwidth_from_s`].
pub fn distance_from_width(cfg: &ArrayConfig, theta: f64, width: f64, s_rho: f64) -> Result<f64> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(invalid(format!("width must be positive, got {width}")));
    }
    if !theta.is_finite() || theta.abs() >= 1.0 {
        return Err(invalid(format!("theta must lie in (-1, 1), got {theta}")));
    }
    let q = cfg.spacing_m * (1.0 - theta * theta);
    let n = cfg.n_elements as f64;
    let c = s_rho * (2.0 / PI).sqrt();
    let root = (c * c + n * width).sqrt() + c;
    Ok(q * root * root / (width * width))
}

/// Grid angles whose normalized amplitude strictly exceeds a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainAngleSet {
    pub angles: Vec<f64>,
    pub width: f64,
}

impl MainAngleSet {
    pub fn from_angles(mut angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(invalid("main angle set is empty"));
        }
        angles.sort_by(f64::total_cmp);
        let width = angles[angles.len() - 1] - angles[0];
        Ok(Self { angles, width })
    }
}

/// Thresholds a sampled normalized pattern at `rho` (strict >).
pub fn beamwidth_measured(angles: &[f64], normalized: &[f64], rho: f64) -> Result<MainAngleSet> {
    if angles.len() != normalized.len() {
        return Err(Error::DimensionMismatch {
            expected: angles.len(),
            got: normalized.len(),
        });
    }
    let kept: Vec<f64> = angles
        .iter()
        .zip(normalized)
        .filter(|(_, &g)| g > rho)
        .map(|(&a, _)| a)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySet { threshold: rho });
    }
    MainAngleSet::from_angles(kept)
}

/// Largest distance at which the beamwidth still exceeds 2p/N.
pub fn modified_rayleigh(cfg: &ArrayConfig, theta: f64, rho: f64, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(invalid(format!("width scaling factor must be positive, got {p}")));
    }
    let s = s_from_rho(rho)?;
    distance_from_width(cfg, theta, 2.0 * p / cfg.n_elements as f64, s)
}

/// Threshold that the finite-α normalized pattern actually crosses where the
/// asymptotic pattern crosses ρ(s_rho).
pub fn exact_threshold(alpha: f64, s_rho: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let root = (PI * alpha).sqrt();
    let num = erf_on_ray(s_rho) - erf_on_ray(2.0 * root + s_rho);
    Ok(0.5 * num.norm() / erf_on_ray(root).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ArrayConfig {
        ArrayConfig::default()
    }

    #[test]
    fn focusing_examples() {
        let p = focusing_params(&cfg(), 0.0, 5.0, 0.0).unwrap();
        assert!((p.alpha - 9.8304).abs() < 1e-12);
        assert_eq!(p.beta, 0.0);
        assert_eq!(focusing_params(&cfg(), 1.0, 5.0, 0.3).unwrap().alpha, 0.0);
        assert!(focusing_params(&cfg(), 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn discrete_gain_basics() {
        let c = cfg();
        assert!((gain_discrete(&c, 0.3, 1e9, 0.3).unwrap() - 1.0).abs() < 1e-6);
        let g = gain_discrete(&c, 0.0, 5.0, 0.0).unwrap();
        let cg = central_gain_exact(9.8304).unwrap();
        assert!((g - cg).abs() / cg < 0.05, "{g} {cg}");
        for d in [0.01, 0.05, 0.2] {
            let a = gain_discrete(&c, 0.0, 5.0, d).unwrap();
            let b = gain_discrete(&c, 0.0, 5.0, -d).unwrap();
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn sweep_gains_match_direct() {
        let c = cfg();
        let gains = sweep_gains(&c, 0.2, 7.0, 512).unwrap();
        for n in (0..512).step_by(37) {
            let phi = crate::geometry::dft_angle(n, 512);
            assert!((gains[n] - gain_discrete(&c, 0.2, 7.0, phi).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn central_gain() {
        let a = central_gain_asymptotic(9.8304).unwrap();
        assert!((a - 0.159_471_988_462_446_5).abs() < 1e-12 && (a - 0.1595).abs() < 1e-4);
        // mpmath: |erf(e^{j3π/4}√(100π))| = 0.977714724790362
        let e = central_gain_exact(100.0).unwrap();
        assert!((e - 0.977_714_724_790_362 / 20.0).abs() < 1e-13);
        // the gap decays like 1/(π√α)
        for &alpha in &[100.0, 1000.0, 1e4] {
            let e = central_gain_exact(alpha).unwrap();
            let a = central_gain_asymptotic(alpha).unwrap();
            assert!((e - a).abs() / a <= 1.0 / (PI * alpha.sqrt()));
        }
        let a = central_gain_asymptotic(1e4).unwrap();
        assert!((central_gain_exact(1e4).unwrap() - a).abs() / a <= 0.01);
        let ratio = central_gain_asymptotic(40.0).unwrap() / central_gain_asymptotic(10.0).unwrap();
        assert!((ratio - 0.5).abs() < 1e-15);
        assert!(central_gain_exact(0.0).is_err());
        assert!(central_gain_asymptotic(-1.0).is_err());
    }

    #[test]
    fn closed_form_center_and_degenerate() {
        let p = FocusingParams::new(9.8304, 0.0).unwrap();
        assert_eq!(gain_closed_form(&p).unwrap(), central_gain_exact(9.8304).unwrap());
        let near = FocusingParams::new(9.8304, 1e-6).unwrap();
        assert!((gain_closed_form(&near).unwrap() - central_gain_exact(9.8304).unwrap()).abs() < 1e-10);
        assert!(matches!(
            gain_closed_form(&FocusingParams::new(0.0, 1.0).unwrap()),
            Err(Error::DegenerateParameter(_))
        ));
    }

    #[test]
    fn closed_form_tracks_discrete() {
        let c = cfg();
        // θ = 0 profile, sweep over r and on-grid φ in the main lobe and shoulder
        for &r in &[4.0, 8.0, 16.0, 30.0] {
            for n in 200..312 {
                let phi = crate::geometry::dft_angle(n, 512);
                let p = focusing_params(&c, 0.0, r, phi).unwrap();
                if p.beta.abs() > 4.0 * p.alpha {
                    continue;
                }
                let d = gain_discrete(&c, 0.0, r, phi).unwrap();
                let g = gain_closed_form(&p).unwrap();
                assert!((g - d).abs() / d.max(0.02) < 0.05, "r={r} phi={phi} {g} {d}");
            }
        }
    }

    #[test]
    fn normalized_gain_examples() {
        for &alpha in &[4.0, 9.8304, 40.0] {
            assert_eq!(normalized_gain(&FocusingParams::new(alpha, 0.0).unwrap()).unwrap(), 1.0);
            let tiny = FocusingParams::new(alpha, 1e-7).unwrap();
            assert!((normalized_gain(&tiny).unwrap() - 1.0).abs() < 1e-6);
        }
        let far = FocusingParams::new(10.0, 40.0).unwrap();
        assert!(normalized_gain(&far).unwrap() <= 0.1);
    }

    #[test]
    fn half_threshold_at_twice_alpha() {
        for &alpha in &[4.0, 6.0, 9.8304, 20.0, 100.0] {
            let p = FocusingParams::new(alpha, 2.0 * alpha).unwrap();
            let exact = normalized_gain(&p).unwrap();
            let asym = normalized_gain_asymptotic(&p).unwrap();
            let bound = 1.0 / (PI * alpha.sqrt());
            assert!((exact - 0.5).abs() <= bound, "alpha={alpha} exact={exact}");
            assert!((asym - 0.5).abs() <= bound, "alpha={alpha} asym={asym}");
        }
    }

    #[test]
    fn moderate_matches_within_stated_gap() {
        // α = 6, θ = 0: every φ past 1.95e-2
        let alpha = 6.0;
        let mut worst: f64 = 0.0;
        let mut phi = 0.0195;
        while phi < 1.0 {
            let p = FocusingParams::new(alpha, 256.0 * phi).unwrap();
            let gap = normalized_gain_moderate(&p).unwrap() - normalized_gain_asymptotic(&p).unwrap();
            worst = worst.max(gap.abs());
            phi += 2e-4;
        }
        assert!(worst <= 0.048, "{worst}");
    }

    #[test]
    fn moderate_approximant_limits() {
        assert!((rho_from_s(0.0) - 0.5).abs() < 1e-15);
        assert!((rho_from_s(-30.0) - 1.0).abs() < 0.02);
        assert!(rho_from_s(30.0) < 0.01);
        let p = FocusingParams::new(6.0, 12.0).unwrap();
        assert!((normalized_gain_moderate(&p).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn s_rho_mapping() {
        assert_eq!(s_from_rho(0.5).unwrap(), 0.0);
        for &rho in &[0.06, 0.1, 0.3, 0.45, 0.55, 0.7, 0.9, 0.94] {
            let s = s_from_rho(rho).unwrap();
            assert!((rho_from_s(s) - rho).abs() < 1e-10, "rho={rho}");
        }
        assert!(s_from_rho(0.7).unwrap() < 0.0);
        assert!(s_from_rho(0.3).unwrap() > 0.0);
        assert!(matches!(s_from_rho(0.99), Err(Error::OutOfRange(_))));
        assert!(s_from_rho(0.01).is_err());
    }

    #[test]
    fn closed_beamwidth() {
        let c = cfg();
        assert!((beamwidth_closed(&c, 0.0, 5.0, 0.5).unwrap() - 0.1536).abs() < 1e-12);
        assert!((beamwidth_closed(&c, 0.0, 2.5, 0.5).unwrap() - 0.3072).abs() < 1e-12);
        assert_eq!(beamwidth_closed(&c, 1.0, 5.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn width_inverse_is_exact() {
        let c = cfg();
        for &rho in &[0.3, 0.5, 0.65, 0.8] {
            let s = s_from_rho(rho).unwrap();
            for &t in &[-0.8, 0.0, 0.45] {
                for &r in &[3.0, 10.0, 60.0] {
                    let w = beamwidth_from_s(&c, t, r, s).unwrap();
                    if w <= 0.0 {
                        continue;
                    }
                    let back = distance_from_width(&c, t, w, s).unwrap();
                    assert!((back - r).abs() / r < 1e-12, "rho={rho} t={t} r={r} back={back}");
                }
            }
        }
    }

    #[test]
    fn measured_width() {
        let c = cfg();
        let gains = sweep_gains(&c, 0.0, 5.0, 512).unwrap();
        let center = gains[255].max(gains[256]);
        let norm: Vec<f64> = gains.iter().map(|g| g / center).collect();
        let angles = crate::geometry::dft_angles(512);
        let set = beamwidth_measured(&angles, &norm, 0.5).unwrap();
        assert!((set.width - 0.1536).abs() <= 2.0 / 512.0 + 1e-12, "{}", set.width);
        assert!(matches!(
            beamwidth_measured(&angles, &norm, 2.0),
            Err(Error::EmptySet { .. })
        ));
        let one = beamwidth_measured(&[0.1, 0.2, 0.3], &[0.1, 0.9, 0.2], 0.5).unwrap();
        assert_eq!(one.width, 0.0);
    }

    #[test]
    fn modified_rayleigh_examples() {
        let c = cfg();
        let r0 = modified_rayleigh(&c, 0.0, 0.5, 3.0).unwrap();
        assert!((r0 - 65.536).abs() < 1e-9);
        let half = modified_rayleigh(&c, 0.5f64.sqrt(), 0.5, 3.0).unwrap();
        assert!((half / r0 - 0.5).abs() < 1e-12);
        let (_, ray) = crate::geometry::boundary_distances(&c);
        assert!((r0 / ray - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn exact_threshold_behaviour() {
        assert!((exact_threshold(1e4, 0.0).unwrap() - 0.5).abs() < 1e-3);
        let v = exact_threshold(9.8304, 0.0).unwrap();
        assert!(v > 0.4 && v < 0.6);
        let p = FocusingParams::new(9.8304, 2.0 * 9.8304).unwrap();
        assert!((normalized_gain(&p).unwrap() - v).abs() < 1e-12);
        let gaps: Vec<f64> = [10.0, 40.0, 160.0]
            .iter()
            .map(|&a| (exact_threshold(a, 0.0).unwrap() - 0.5).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
        assert!(exact_threshold(0.0, 0.0).is_err());
    }
}
