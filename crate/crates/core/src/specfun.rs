//! Special functions used by the closed-form pattern analytics and the Rician
//! likelihood: the complex error function, modified Bessel functions of the
//! first kind (orders 0 and 1), their stable logarithm and ratio, and complex
//! Gaussian sampling.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

pub type ComplexScalar = Complex64;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Maclaurin region: all of |z| <= 3, plus the strip |Re z| <= 2 where the
/// alternating series loses at most e^{2 Re(z)^2} to cancellation.
const SERIES_RADIUS: f64 = 3.0;
const SERIES_STRIP: f64 = 2.0;

/// Error function of a complex argument.
///
/// Accurate to about 1e-12 relative in |z| <= 12. Beyond that the continued
/// fraction branch still converges and saturates to +/-1 without overflow
/// when |Re z| dominates.
pub fn erf_complex(z: ComplexScalar) -> Result<ComplexScalar> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(invalid(format!("erf_complex: non-finite argument {z}")));
    }
    Ok(erf_unchecked(z))
}

/// Same as [`erf_complex`] for callers that already guarantee a finite input.
pub(crate) fn erf_unchecked(z: ComplexScalar) -> ComplexScalar {
    // Work in the right half-plane; erf is odd.
    let (w, sign) = if z.re < 0.0 || (z.re == 0.0 && z.im.is_sign_negative()) {
        (-z, -1.0)
    } else {
        (z, 1.0)
    };
    let val = if w.norm() <= SERIES_RADIUS || w.re <= SERIES_STRIP {
        erf_series(w)
    } else {
        Complex64::new(1.0, 0.0) - erfc_continued_fraction(w)
    };
    val * sign
}

fn erf_series(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let past_peak = z2.norm().ceil() as usize + 2;
    for n in 1..10_000 {
        term = -term * z2 / n as f64;
        let contrib = term / (2 * n + 1) as f64;
        sum += contrib;
        if n > past_peak && contrib.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum * FRAC_2_SQRT_PI
}

/// erfc(z) for Re z > 0 via the Laplace continued fraction, modified Lentz.
fn erfc_continued_fraction(z: Complex64) -> Complex64 {
    let tiny = 1e-300;
    let mut f = z;
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for k in 1..20_000 {
        let a = k as f64 * 0.5;
        d = z + d * a;
        if d.norm() < tiny {
            d = Complex64::new(tiny, 0.0);
        }
        c = z + c.inv() * a;
        if c.norm() < tiny {
            c = Complex64::new(tiny, 0.0);
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    let expo = -(z * z);
    if expo.re < -745.0 {
        return Complex64::new(0.0, 0.0);
    }
    expo.exp() * f.inv() * FRAC_1_SQRT_PI
}

fn check_bessel_arg(x: f64, name: &str) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(invalid(format!("{name}: argument must be finite and >= 0, got {x}")));
    }
    Ok(())
}

/// Below this the power series is used; above it the asymptotic expansion
/// of the exponentially scaled functions is accurate to double precision.
const BESSEL_SWITCH: f64 = 20.0;

fn bessel_series(x: f64, order: u32) -> f64 {
    let q = 0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let nu = order as f64;
    for k in 1..1000 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

/// e^{-x} I_nu(x) via the Hankel asymptotic expansion, truncated at the
/// smallest term.
fn bessel_scaled_asymptotic(x: f64, order: u32) -> f64 {
    let mu = 4.0 * (order as f64).powi(2);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() >= last {
            break;
        }
        last = term.abs();
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// Modified Bessel function I_0(x) for x >= 0.
pub fn bessel_i0(x: f64) -> Result<f64> {
    check_bessel_arg(x, "bessel_i0")?;
    if x <= BESSEL_SWITCH {
        Ok(bessel_series(x, 0))
    } else {
        Ok(bessel_scaled_asymptotic(x, 0) * x.exp())
    }
}

/// Modified Bessel function I_1(x) for x >= 0.
pub fn bessel_i1(x: f64) -> Result<f64> {
    check_bessel_arg(x, "bessel_i1")?;
    if x <= BESSEL_SWITCH {
        Ok(bessel_series(x, 1))
    } else {
        Ok(bessel_scaled_asymptotic(x, 1) * x.exp())
    }
}

/// e^{-x} I_0(x); finite for every x >= 0.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    check_bessel_arg(x, "bessel_i0_scaled")?;
    Ok(i0_scaled(x))
}

/// e^{-x} I_1(x); finite for every x >= 0.
pub fn bessel_i1_scaled(x: f64) -> Result<f64> {
    check_bessel_arg(x, "bessel_i1_scaled")?;
    Ok(i1_scaled(x))
}

fn i0_scaled(x: f64) -> f64 {
    if x <= BESSEL_SWITCH {
        bessel_series(x, 0) * (-x).exp()
    } else {
        bessel_scaled_asymptotic(x, 0)
    }
}

fn i1_scaled(x: f64) -> f64 {
    if x <= BESSEL_SWITCH {
        bessel_series(x, 1) * (-x).exp()
    } else {
        bessel_scaled_asymptotic(x, 1)
    }
}

/// ln I_0(x), never overflowing.
pub fn log_i0(x: f64) -> Result<f64> {
    check_bessel_arg(x, "log_i0")?;
    Ok(ln_i0(x))
}

/// I_1(x) / I_0(x), monotone increasing from 0 towards 1.
pub fn i1_over_i0(x: f64) -> Result<f64> {
    check_bessel_arg(x, "i1_over_i0")?;
    Ok(ratio_i1_i0(x))
}

pub(crate) fn ln_i0(x: f64) -> f64 {
    if x <= BESSEL_SWITCH {
        bessel_series(x, 0).ln()
    } else {
        x + bessel_scaled_asymptotic(x, 0).ln()
    }
}

pub(crate) fn ratio_i1_i0(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x <= BESSEL_SWITCH {
        bessel_series(x, 1) / bessel_series(x, 0)
    } else {
        bessel_scaled_asymptotic(x, 1) / bessel_scaled_asymptotic(x, 0)
    }
}

/// Draw w ~ CN(0, variance): independent real and imaginary parts, each with
/// variance `variance / 2`.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Result<ComplexScalar> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(invalid(format!(
            "sample_complex_gaussian: variance must be > 0, got {variance}"
        )));
    }
    Ok(complex_gaussian(rng, variance))
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
