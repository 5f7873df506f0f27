//! Array geometry, near-field channel and steering vectors, DFT and polar
//! codebooks, and synthesis of noisy training sweeps.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::specfun::complex_gaussian;

/// Propagation speed used to derive the wavelength from the carrier.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Uniform linear array and carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    pub n_elements: usize,
    pub spacing_m: f64,
    pub carrier_hz: f64,
    pub wavelength_m: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self::half_wavelength(512, 1.0e11).expect("default profile is valid")
    }
}

impl ArrayConfig {
    /// Array with element spacing equal to half the carrier wavelength.
    pub fn half_wavelength(n_elements: usize, carrier_hz: f64) -> Result<Self> {
        let wavelength_m = SPEED_OF_LIGHT / carrier_hz;
        Self::new(n_elements, carrier_hz, 0.5 * wavelength_m)
    }

    pub fn new(n_elements: usize, carrier_hz: f64, spacing_m: f64) -> Result<Self> {
        let cfg = Self {
            n_elements,
            spacing_m,
            carrier_hz,
            wavelength_m: SPEED_OF_LIGHT / carrier_hz,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_elements < 2 {
            return Err(invalid(format!(
                "array needs at least 2 elements, got {}",
                self.n_elements
            )));
        }
        for (name, v) in [
            ("spacing_m", self.spacing_m),
            ("carrier_hz", self.carrier_hz),
            ("wavelength_m", self.wavelength_m),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Aperture N·d.
    pub fn aperture_m(&self) -> f64 {
        self.n_elements as f64 * self.spacing_m
    }

    /// True when the spacing is half a wavelength, which the closed-form
    /// pattern analytics and the FFT sweep path assume.
    pub fn is_half_wavelength(&self) -> bool {
        ((2.0 * self.spacing_m / self.wavelength_m) - 1.0).abs() < 1e-12
    }

    /// Free-space gain λ/(4πr).
    pub fn path_gain(&self, range_m: f64) -> f64 {
        self.wavelength_m / (4.0 * PI * range_m)
    }
}

/// User location as (θ = sin of the departure angle, range in meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPosition {
    pub theta: f64,
    pub range_m: f64,
}

impl PolarPosition {
    pub fn new(theta: f64, range_m: f64) -> Result<Self> {
        let p = Self { theta, range_m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() || self.theta.abs() > 1.0 {
            return Err(invalid(format!("theta must lie in [-1, 1], got {}", self.theta)));
        }
        if !(self.range_m > 0.0) || !self.range_m.is_finite() {
            return Err(invalid(format!("range must be positive, got {}", self.range_m)));
        }
        Ok(())
    }
}

/// Unit-norm beamforming weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<Complex64>,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product self^H other.
    pub fn inner(&self, other: &[Complex64]) -> Complex64 {
        self.weights.iter().zip(other).map(|(a, b)| a.conj() * b).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookKind {
    Dft,
    Polar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookEntry {
    pub angle: f64,
    /// Focal range for polar entries; `None` for far-field DFT entries.
    pub range_m: Option<f64>,
    pub weights: WeightVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub kind: CodebookKind,
    pub entries: Vec<CodebookEntry>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.angle).collect()
    }
}

/// One training sweep: a noisy sample per codeword plus the extra probes
/// taken with off-grid reference codewords.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeasurement {
    pub complex_samples: Vec<Complex64>,
    pub amplitudes: Vec<f64>,
    pub noise_power: f64,
    /// Angles of the codewords that produced each sample.
    pub angles: Vec<f64>,
    /// (reference angle, received sample) in probing order.
    pub reference_samples: Vec<(f64, Complex64)>,
}

impl SweepMeasurement {
    pub fn new(complex_samples: Vec<Complex64>, angles: Vec<f64>, noise_power: f64) -> Result<Self> {
        if complex_samples.len() != angles.len() {
            return Err(Error::DimensionMismatch {
                expected: angles.len(),
                got: complex_samples.len(),
            });
        }
        let amplitudes = complex_samples.iter().map(|y| y.norm()).collect();
        Ok(Self {
            complex_samples,
            amplitudes,
            noise_power,
            angles,
            reference_samples: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Total number of probes taken: the sweep plus every reference.
    pub fn overhead(&self) -> usize {
        self.amplitudes.len() + self.reference_samples.len()
    }

    pub fn reference(&self, angle: f64) -> Option<Complex64> {
        self.reference_samples
            .iter()
            .find(|(a, _)| (*a - angle).abs() < 1e-15)
            .map(|(_, y)| *y)
    }
}

/// Element offsets (2n − N + 1)/2 in units of the spacing.
pub fn element_offsets(cfg: &ArrayConfig) -> Vec<f64> {
    let n = cfg.n_elements as f64;
    (0..cfg.n_elements).map(|i| (2.0 * i as f64 - n + 1.0) * 0.5).collect()
}

/// Exact distance from each element to the user.
pub fn element_ranges(cfg: &ArrayConfig, pos: &PolarPosition) -> Vec<f64> {
    let (r, t, d) = (pos.range_m, pos.theta, cfg.spacing_m);
    element_offsets(cfg)
        .into_iter()
        .map(|o| {
            let x = o * d;
            (r * r + x * x - 2.0 * r * t * x).sqrt()
        })
        .collect()
}

/// r_n − r for every element, without cancellation at large r.
pub fn range_excess(cfg: &ArrayConfig, pos: &PolarPosition) -> Vec<f64> {
    let (r, t, d) = (pos.range_m, pos.theta, cfg.spacing_m);
    element_offsets(cfg)
        .into_iter()
        .map(|o| {
            let x = o * d;
            let num = x * x - 2.0 * r * t * x;
            num / ((r * r + num).sqrt() + r)
        })
        .collect()
}

/// Near-field steering vector with the exact per-element range.
pub fn steering_vector(cfg: &ArrayConfig, pos: &PolarPosition) -> WeightVector {
    let scale = 1.0 / (cfg.n_elements as f64).sqrt();
    let k = 2.0 * PI / cfg.wavelength_m;
    let weights = range_excess(cfg, pos)
        .into_iter()
        .map(|dr| Complex64::from_polar(scale, -k * dr))
        .collect();
    WeightVector { weights }
}

/// Far-field codeword steering towards spatial angle `angle`.
pub fn dft_vector(cfg: &ArrayConfig, angle: f64) -> WeightVector {
    let scale = 1.0 / (cfg.n_elements as f64).sqrt();
    let k = 2.0 * PI * cfg.spacing_m / cfg.wavelength_m;
    let weights = element_offsets(cfg)
        .into_iter()
        .map(|o| Complex64::from_polar(scale, k * o * angle))
        .collect();
    WeightVector { weights }
}

/// Channel h such that the received sample is h^H v.
pub fn channel_vector(cfg: &ArrayConfig, pos: &PolarPosition) -> Vec<Complex64> {
    let amp = (cfg.n_elements as f64).sqrt() * cfg.path_gain(pos.range_m);
    let phase = Complex64::from_polar(amp, -2.0 * PI * pos.range_m / cfg.wavelength_m);
    steering_vector(cfg, pos)
        .weights
        .into_iter()
        .map(|b| b * phase)
        .collect()
}

/// Grid angle (2n − N_s + 1)/N_s.
pub fn dft_angle(n: usize, n_samples: usize) -> f64 {
    (2.0 * n as f64 - n_samples as f64 + 1.0) / n_samples as f64
}

pub fn dft_angles(n_samples: usize) -> Vec<f64> {
    (0..n_samples).map(|n| dft_angle(n, n_samples)).collect()
}

pub fn dft_codebook(cfg: &ArrayConfig, n_samples: usize) -> Result<Codebook> {
    if n_samples < 2 {
        return Err(invalid(format!("codebook needs at least 2 samples, got {n_samples}")));
    }
    let entries = dft_angles(n_samples)
        .into_iter()
        .map(|angle| CodebookEntry {
            angle,
            range_m: None,
            weights: dft_vector(cfg, angle),
        })
        .collect();
    Ok(Codebook {
        kind: CodebookKind::Dft,
        entries,
    })
}

/// Near-field codebook over the product of `angles` and `ranges`.
pub fn polar_codebook(cfg: &ArrayConfig, angles: &[f64], ranges: &[f64]) -> Result<Codebook> {
    let mut entries = Vec::with_capacity(angles.len() * ranges.len());
    for &angle in angles {
        for &r in ranges {
            let pos = PolarPosition::new(angle, r)?;
            entries.push(CodebookEntry {
                angle,
                range_m: Some(r),
                weights: steering_vector(cfg, &pos),
            });
        }
    }
    if entries.is_empty() {
        return Err(invalid("polar codebook is empty"));
    }
    Ok(Codebook {
        kind: CodebookKind::Polar,
        entries,
    })
}

/// y = h^H v + noise with unit pilot.
pub fn receive(h: &[Complex64], v: &WeightVector, noise: Complex64) -> Result<Complex64> {
    if h.len() != v.len() {
        return Err(invalid(format!(
            "receive: channel has {} entries, codeword has {}",
            h.len(),
            v.len()
        )));
    }
    Ok(noiseless_response(h, &v.weights) + noise)
}

pub(crate) fn noiseless_response(h: &[Complex64], v: &[Complex64]) -> Complex64 {
    h.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn inverse_plan(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Evaluates sum_m coeffs[m]·a_m(φ_n) over a DFT grid of `n_samples`
/// angles, where a(φ) is the normalized far-field codeword.
///
/// Uses an FFT of length `n_samples` when the spacing is half a wavelength
/// and falls back to direct summation otherwise.
pub fn grid_projection(cfg: &ArrayConfig, coeffs: &[Complex64], n_samples: usize) -> Vec<Complex64> {
    debug_assert_eq!(coeffs.len(), cfg.n_elements);
    let n = cfg.n_elements;
    let scale = 1.0 / (n as f64).sqrt();
    if !cfg.is_half_wavelength() {
        let k = 2.0 * PI * cfg.spacing_m / cfg.wavelength_m;
        let offs = element_offsets(cfg);
        return dft_angles(n_samples)
            .into_iter()
            .map(|phi| {
                coeffs
                    .iter()
                    .zip(&offs)
                    .map(|(c, o)| c * Complex64::from_polar(scale, k * o * phi))
                    .sum()
            })
            .collect();
    }
    // π δ_m φ_n = 2π m n / N_s + π m (1 − N_s)/N_s − π (N − 1) φ_n / 2
    let ns = n_samples as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); n_samples];
    for (m, c) in coeffs.iter().enumerate() {
        let tilt = Complex64::from_polar(1.0, PI * m as f64 * (1.0 - ns) / ns);
        buf[m % n_samples] += c * tilt;
    }
    inverse_plan(n_samples).process(&mut buf);
    let half = 0.5 * (n as f64 - 1.0);
    for (i, y) in buf.iter_mut().enumerate() {
        let phi = dft_angle(i, n_samples);
        *y *= Complex64::from_polar(scale, -PI * half * phi);
    }
    buf
}

/// Noiseless responses h^H v for every codeword of `codebook`.
pub fn codebook_responses(cfg: &ArrayConfig, h: &[Complex64], codebook: &Codebook) -> Vec<Complex64> {
    let n_s = codebook.len();
    let on_grid = codebook.kind == CodebookKind::Dft
        && codebook
            .entries
            .iter()
            .enumerate()
            .all(|(i, e)| e.angle == dft_angle(i, n_s));
    if on_grid {
        let conj: Vec<Complex64> = h.iter().map(|c| c.conj()).collect();
        grid_projection(cfg, &conj, n_s)
    } else {
        codebook
            .entries
            .iter()
            .map(|e| noiseless_response(h, &e.weights.weights))
            .collect()
    }
}

fn check_noise_power(noise_power: f64) -> Result<()> {
    if !(noise_power >= 0.0) || !noise_power.is_finite() {
        return Err(invalid(format!("noise power must be >= 0, got {noise_power}")));
    }
    Ok(())
}

fn add_noise<R: Rng + ?Sized>(y: Complex64, noise_power: f64, rng: &mut R) -> Complex64 {
    if noise_power > 0.0 {
        y + complex_gaussian(rng, noise_power)
    } else {
        y
    }
}

/// Sweeps every codeword once with independent noise draws.
pub fn run_sweep<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    pos: &PolarPosition,
    codebook: &Codebook,
    noise_power: f64,
    rng: &mut R,
) -> Result<SweepMeasurement> {
    pos.validate()?;
    check_noise_power(noise_power)?;
    let h = channel_vector(cfg, pos);
    sweep_channel(cfg, &h, codebook, noise_power, rng)
}

pub(crate) fn sweep_channel<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    h: &[Complex64],
    codebook: &Codebook,
    noise_power: f64,
    rng: &mut R,
) -> Result<SweepMeasurement> {
    let samples = codebook_responses(cfg, h, codebook)
        .into_iter()
        .map(|y| add_noise(y, noise_power, rng))
        .collect();
    SweepMeasurement::new(samples, codebook.angles(), noise_power)
}

/// Adds one probe with an off-grid far-field codeword at `angle`.
pub fn measure_reference<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    pos: &PolarPosition,
    angle: f64,
    noise_power: f64,
    rng: &mut R,
    sweep: &mut SweepMeasurement,
) -> Result<Complex64> {
    if !angle.is_finite() || angle.abs() > 1.0 {
        return Err(invalid(format!("reference angle must lie in [-1, 1], got {angle}")));
    }
    check_noise_power(noise_power)?;
    let h = channel_vector(cfg, pos);
    let y = add_noise(
        noiseless_response(&h, &dft_vector(cfg, angle).weights),
        noise_power,
        rng,
    );
    sweep.reference_samples.push((angle, y));
    Ok(y)
}

/// (Fresnel distance ½√(D³/λ), Rayleigh distance 2D²/λ) with D = N·d.
pub fn boundary_distances(cfg: &ArrayConfig) -> (f64, f64) {
    let ap = cfg.aperture_m();
    let fresnel = 0.5 * (ap.powi(3) / cfg.wavelength_m).sqrt();
    let rayleigh = 2.0 * ap * ap / cfg.wavelength_m;
    (fresnel, rayleigh)
}
