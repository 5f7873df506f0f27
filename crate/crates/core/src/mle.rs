//! Amplitude-only maximum-likelihood refinement over a DFT sweep.
//!
//! Each sweep amplitude z_n = |y_n| is Rician with line-of-sight amplitude
//! u_n = (D/r)|b^H(θ,r) a(φ_n)| and noise power σ². The estimator starts from
//! the coarse training output, initializes D and σ² from protected index
//! regions, then runs simulated annealing on (θ, r) followed by Adam on all
//! four parameters.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    boundary_distances, dft_angles, element_offsets, grid_projection, range_excess, ArrayConfig, PolarPosition,
    SweepMeasurement,
};
use crate::specfun::{complex_gaussian, ln_i0, ratio_i1_i0};
use crate::train::{estimate_angle, Classification, Method, PositionEstimate, TrainParams};

/// Unknowns of the amplitude model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleParams {
    pub theta: f64,
    pub range_m: f64,
    /// Real amplitude factor D, so that u_n = (D/r)|b^H a(φ_n)|.
    pub amp_factor: f64,
    pub noise_power: f64,
}

impl MleParams {
    fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.theta, self.range_m, self.amp_factor, self.noise_power)
    }

    fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            theta: v[0],
            range_m: v[1],
            amp_factor: v[2],
            noise_power: v[3],
        }
    }
}

/// Box constraints on (θ, r). D and σ² only need to stay positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleBounds {
    pub theta_min: f64,
    pub theta_max: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl MleBounds {
    /// θ ∈ [−1, 1] and r between the aperture and the Rayleigh distance.
    pub fn for_array(cfg: &ArrayConfig) -> Self {
        let (_, rayleigh) = boundary_distances(cfg);
        Self {
            theta_min: -1.0,
            theta_max: 1.0,
            r_min: cfg.aperture_m(),
            r_max: rayleigh,
        }
    }

    pub fn contains(&self, p: &MleParams) -> bool {
        p.theta >= self.theta_min
            && p.theta <= self.theta_max
            && p.range_m >= self.r_min
            && p.range_m <= self.r_max
            && p.amp_factor > 0.0
            && p.noise_power > 0.0
    }

    fn on_boundary(&self, p: &MleParams) -> bool {
        p.theta <= self.theta_min || p.theta >= self.theta_max || p.range_m <= self.r_min || p.range_m >= self.r_max
    }

    fn project(&self, p: &mut MleParams, floor_amp: f64, floor_noise: f64) {
        p.theta = p.theta.clamp(self.theta_min, self.theta_max);
        p.range_m = p.range_m.clamp(self.r_min, self.r_max);
        p.amp_factor = p.amp_factor.max(floor_amp);
        p.noise_power = p.noise_power.max(floor_noise);
    }

    fn check(&self, p: &MleParams) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!("parameters outside the search box: {p:?}")))
        }
    }
}

/// Sweep amplitudes with their codeword angles.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeObservation {
    pub z: Vec<f64>,
    pub angles: Vec<f64>,
    on_grid: bool,
}

impl AmplitudeObservation {
    pub fn new(z: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        if z.len() != angles.len() {
            return Err(Error::DimensionMismatch {
                expected: angles.len(),
                got: z.len(),
            });
        }
        if z.is_empty() {
            return Err(invalid("observation is empty"));
        }
        if let Some(bad) = z.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(invalid(format!("amplitudes must be finite and >= 0, got {bad}")));
        }
        let on_grid = angles == dft_angles(angles.len());
        Ok(Self { z, angles, on_grid })
    }

    pub fn from_sweep(sweep: &SweepMeasurement) -> Result<Self> {
        Self::new(sweep.amplitudes.clone(), sweep.angles.clone())
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Same angles, new amplitudes.
    fn with_amplitudes(&self, z: Vec<f64>) -> Self {
        Self {
            z,
            angles: self.angles.clone(),
            on_grid: self.on_grid,
        }
    }

    fn project(&self, cfg: &ArrayConfig, coeffs: &[Complex64]) -> Vec<Complex64> {
        if self.on_grid {
            return grid_projection(cfg, coeffs, self.angles.len());
        }
        let scale = 1.0 / (cfg.n_elements as f64).sqrt();
        let k = 2.0 * PI * cfg.spacing_m / cfg.wavelength_m;
        let offs = element_offsets(cfg);
        self.angles
            .iter()
            .map(|phi| {
                coeffs
                    .iter()
                    .zip(&offs)
                    .map(|(c, o)| c * Complex64::from_polar(scale, k * o * phi))
                    .sum()
            })
            .collect()
    }
}

/// |b^H a(φ_n)| and, optionally, its partials in θ and r.
struct Pattern {
    gain: Vec<f64>,
    d_theta: Vec<f64>,
    d_range: Vec<f64>,
}

fn pattern_terms(cfg: &ArrayConfig, obs: &AmplitudeObservation, theta: f64, r: f64, derivs: bool) -> Pattern {
    let pos = PolarPosition { theta, range_m: r };
    let k = 2.0 * PI / cfg.wavelength_m;
    let scale = 1.0 / (cfg.n_elements as f64).sqrt();
    let excess = range_excess(cfg, &pos);
    // conj(b_m) = e^{+jk(r_m − r)}/√N
    let coeffs: Vec<Complex64> = excess.iter().map(|dr| Complex64::from_polar(scale, k * dr)).collect();
    let p = obs.project(cfg, &coeffs);
    let gain: Vec<f64> = p.iter().map(|c| c.norm()).collect();
    if !derivs {
        return Pattern {
            gain,
            d_theta: Vec::new(),
            d_range: Vec::new(),
        };
    }
    let xs: Vec<f64> = element_offsets(cfg).iter().map(|o| o * cfg.spacing_m).collect();
    let mut c_theta = Vec::with_capacity(xs.len());
    let mut c_range = Vec::with_capacity(xs.len());
    for ((c, x), dr) in coeffs.iter().zip(&xs).zip(&excess) {
        let rm = r + dr;
        let j = Complex64::new(0.0, k);
        // ∂r_m/∂θ = −r x/r_m,  ∂(r_m − r)/∂r = −x²(1−θ²)/(r_m (r_m + r − θx))
        let dth = -r * x / rm;
        let drr = -x * x * (1.0 - theta * theta) / (rm * (rm + r - theta * x));
        c_theta.push(c * j * dth);
        c_range.push(c * j * drr);
    }
    let pt = obs.project(cfg, &c_theta);
    let pr = obs.project(cfg, &c_range);
    let d_abs = |dp: &[Complex64]| -> Vec<f64> {
        p.iter()
            .zip(dp)
            .zip(&gain)
            .map(|((a, b), g)| if *g > 0.0 { (a.conj() * b).re / g } else { 0.0 })
            .collect()
    };
    Pattern {
        d_theta: d_abs(&pt),
        d_range: d_abs(&pr),
        gain,
    }
}

/// Line-of-sight amplitudes u_n = (D/r)|b^H(θ,r) a(φ_n)| at the observation
/// angles, using the exact discrete pattern.
pub fn amplitude_model(cfg: &ArrayConfig, params: &MleParams, angles: &[f64]) -> Result<Vec<f64>> {
    PolarPosition::new(params.theta, params.range_m)?;
    if !(params.amp_factor >= 0.0) {
        return Err(invalid(format!(
            "amplitude factor must be >= 0, got {}",
            params.amp_factor
        )));
    }
    let obs = AmplitudeObservation::new(vec![0.0; angles.len()], angles.to_vec())?;
    Ok(model_amplitudes(cfg, &obs, params))
}

fn model_amplitudes(cfg: &ArrayConfig, obs: &AmplitudeObservation, params: &MleParams) -> Vec<f64> {
    let scale = params.amp_factor / params.range_m;
    pattern_terms(cfg, obs, params.theta, params.range_m, false)
        .gain
        .into_iter()
        .map(|g| scale * g)
        .collect()
}

/// Amplitude factor of a noiseless sweep: |y_n| = (D/r)|b^H a_n| with
/// D = √N λ/(4π).
pub fn true_amp_factor(cfg: &ArrayConfig) -> f64 {
    (cfg.n_elements as f64).sqrt() * cfg.wavelength_m / (4.0 * PI)
}

fn check_density_args(u: f64, noise_power: f64) -> Result<()> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(invalid(format!("Rician amplitude must be >= 0, got {u}")));
    }
    if !(noise_power > 0.0) || !noise_power.is_finite() {
        return Err(invalid(format!("noise power must be positive, got {noise_power}")));
    }
    Ok(())
}

/// Log of the Rician density (2z/σ²) exp(−(z²+u²)/σ²) I₀(2zu/σ²).
pub fn rician_logpdf(z: f64, u: f64, noise_power: f64) -> Result<f64> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(invalid(format!("amplitude must be >= 0, got {z}")));
    }
    check_density_args(u, noise_power)?;
    Ok((2.0 * z).ln() + rician_core(z, u, noise_power))
}

/// Parameter-dependent part of the log-density (everything but ln 2z).
fn rician_core(z: f64, u: f64, s2: f64) -> f64 {
    -s2.ln() - (z * z + u * u) / s2 + ln_i0(2.0 * z * u / s2)
}

/// Draws |u·e^{jψ} + w| with w ~ CN(0, σ²).
pub fn sample_rician<R: Rng + ?Sized>(rng: &mut R, u: f64, noise_power: f64) -> Result<f64> {
    check_density_args(u, noise_power)?;
    Ok(rician_draw(rng, u, noise_power))
}

fn rician_draw<R: Rng + ?Sized>(rng: &mut R, u: f64, s2: f64) -> f64 {
    (Complex64::new(u, 0.0) + complex_gaussian(rng, s2)).norm()
}

fn data_term(obs: &AmplitudeObservation) -> f64 {
    // zero amplitudes carry no parameter information; their ln 2z is dropped
    obs.z.iter().filter(|z| **z > 0.0).map(|z| (2.0 * z).ln()).sum()
}

fn check_params(params: &MleParams) -> Result<()> {
    PolarPosition::new(params.theta, params.range_m)?;
    if !(params.amp_factor > 0.0) || !(params.noise_power > 0.0) {
        return Err(invalid(format!(
            "amplitude factor and noise power must be positive, got {} and {}",
            params.amp_factor, params.noise_power
        )));
    }
    Ok(())
}

/// Sum of Rician log-densities over all sweep indices.
pub fn log_likelihood(obs: &AmplitudeObservation, cfg: &ArrayConfig, params: &MleParams) -> Result<f64> {
    check_params(params)?;
    Ok(data_term(obs) + likelihood_core(obs, cfg, params))
}

fn likelihood_core(obs: &AmplitudeObservation, cfg: &ArrayConfig, params: &MleParams) -> f64 {
    let u = model_amplitudes(cfg, obs, params);
    obs.z
        .iter()
        .zip(&u)
        .map(|(z, u)| rician_core(*z, *u, params.noise_power))
        .sum()
}

/// Gradient of the log-likelihood in (θ, r, D, σ²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub gradient: [f64; 4],
    /// Set when θ or r sits on the search box; the gradient there is the
    /// unconstrained one.
    pub on_boundary: bool,
}

/// Per-index pieces: ∂ℓ_n/∂u_n, ∂ℓ_n/∂σ², and ∇u_n over (θ, r, D).
struct IndexTerms {
    dl_du: Vec<f64>,
    dl_ds2: Vec<f64>,
    du: [Vec<f64>; 3],
}

fn index_terms(obs: &AmplitudeObservation, cfg: &ArrayConfig, params: &MleParams, z: &[f64]) -> IndexTerms {
    let (r, d, s2) = (params.range_m, params.amp_factor, params.noise_power);
    let pat = pattern_terms(cfg, obs, params.theta, r, true);
    let n = pat.gain.len();
    let mut dl_du = Vec::with_capacity(n);
    let mut dl_ds2 = Vec::with_capacity(n);
    let mut du_theta = Vec::with_capacity(n);
    let mut du_range = Vec::with_capacity(n);
    let mut du_amp = Vec::with_capacity(n);
    for (i, &zi) in z.iter().enumerate().take(n) {
        let g = pat.gain[i];
        let u = d / r * g;
        let x = 2.0 * zi * u / s2;
        let ratio = ratio_i1_i0(x);
        dl_du.push((-2.0 * u + 2.0 * zi * ratio) / s2);
        dl_ds2.push((-s2 + zi * zi + u * u - 2.0 * zi * u * ratio) / (s2 * s2));
        du_theta.push(d / r * pat.d_theta[i]);
        du_range.push(d / r * pat.d_range[i] - d / (r * r) * g);
        du_amp.push(g / r);
    }
    IndexTerms {
        dl_du,
        dl_ds2,
        du: [du_theta, du_range, du_amp],
    }
}

/// Analytic score from exact derivatives of the discrete array sum.
pub fn score(obs: &AmplitudeObservation, cfg: &ArrayConfig, params: &MleParams) -> Result<Score> {
    check_params(params)?;
    let bounds = MleBounds::for_array(cfg);
    Ok(Score {
        gradient: raw_score(obs, cfg, params),
        on_boundary: bounds.on_boundary(params),
    })
}

fn raw_score(obs: &AmplitudeObservation, cfg: &ArrayConfig, params: &MleParams) -> [f64; 4] {
    let t = index_terms(obs, cfg, params, &obs.z);
    let mut g = [0.0; 4];
    for i in 0..obs.len() {
        for (k, du) in t.du.iter().enumerate() {
            g[k] += t.dl_du[i] * du[i];
        }
        g[3] += t.dl_ds2[i];
    }
    g
}

/// Signal and noise index sets around the strongest cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtectedRegions {
    pub signal: Vec<usize>,
    pub noise: Vec<usize>,
    pub guard: usize,
}

/// Trims `guard` members off each end of the cluster for the signal set and
/// takes every index more than `guard` away from the cluster span as noise.
/// A cluster too short to trim keeps only `peak`.
pub fn protected_regions(cluster: &[usize], n_total: usize, guard: usize, peak: usize) -> Result<ProtectedRegions> {
    let mut c = cluster.to_vec();
    c.sort_unstable();
    c.dedup();
    let (Some(&lo), Some(&hi)) = (c.first(), c.last()) else {
        return Err(invalid("cluster is empty"));
    };
    if hi >= n_total {
        return Err(invalid(format!(
            "cluster index {hi} out of range for {n_total} samples"
        )));
    }
    let signal = if c.len() > 2 * guard {
        c[guard..c.len() - guard].to_vec()
    } else {
        vec![peak]
    };
    let lo_keep = lo.saturating_sub(guard);
    let hi_keep = hi + guard;
    let noise = (0..n_total).filter(|&i| i < lo_keep || i > hi_keep).collect();
    Ok(ProtectedRegions { signal, noise, guard })
}

/// Result of the amplitude-factor initializer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpInit {
    pub value: f64,
    /// True when the discriminant was negative and least squares was used.
    pub least_squares: bool,
}

/// Positive root of the high-SNR stationarity condition in D over the
/// signal set: [Σ zA + √((Σ zA)² − |H|σ²ΣA²)] / (2ΣA²), with A_n = u_n/D.
pub fn init_amp_factor(z: &[f64], shape: &[f64], noise_power: f64) -> Result<AmpInit> {
    if z.len() != shape.len() {
        return Err(Error::DimensionMismatch {
            expected: shape.len(),
            got: z.len(),
        });
    }
    if z.is_empty() {
        return Err(invalid("signal set is empty"));
    }
    if !(noise_power >= 0.0) {
        return Err(invalid(format!("noise power must be >= 0, got {noise_power}")));
    }
    let za: f64 = z.iter().zip(shape).map(|(z, a)| z * a).sum();
    let aa: f64 = shape.iter().map(|a| a * a).sum();
    if !(aa > 0.0) {
        return Err(Error::DegenerateParameter(
            "model shape is zero on the signal set".into(),
        ));
    }
    let disc = za * za - z.len() as f64 * noise_power * aa;
    if disc < 0.0 {
        return Ok(AmpInit {
            value: za / aa,
            least_squares: true,
        });
    }
    Ok(AmpInit {
        value: (za + disc.sqrt()) / (2.0 * aa),
        least_squares: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseEstimator {
    /// Mean of z² over the noise set; unbiased for σ² on pure noise.
    #[default]
    MeanSquare,
    /// Mean of z as literally written; estimates the Rayleigh mean √(πσ²)/2.
    MeanAmplitude,
}

/// Smallest noise set accepted by [`init_noise_power`].
pub const MIN_NOISE_INDICES: usize = 16;

pub fn init_noise_power(z: &[f64], noise_set: &[usize], mode: NoiseEstimator) -> Result<f64> {
    if noise_set.len() < MIN_NOISE_INDICES {
        return Err(Error::InsufficientNoiseRegion {
            got: noise_set.len(),
            need: MIN_NOISE_INDICES,
        });
    }
    if let Some(&bad) = noise_set.iter().find(|&&i| i >= z.len()) {
        return Err(invalid(format!("noise index {bad} out of range")));
    }
    let m = noise_set.len() as f64;
    Ok(match mode {
        NoiseEstimator::MeanSquare => noise_set.iter().map(|&i| z[i] * z[i]).sum::<f64>() / m,
        NoiseEstimator::MeanAmplitude => noise_set.iter().map(|&i| z[i]).sum::<f64>() / m,
    })
}

/// Optimizer tunables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    /// Independent annealing + gradient runs from the initial point; the best
    /// one wins.
    pub restarts: usize,
    pub sa_iterations: usize,
    /// Geometric decay of the annealing temperature per iteration.
    pub sa_decay: f64,
    /// Initial proposal spread in θ, in DFT grid steps.
    pub sa_theta_steps: f64,
    /// Initial proposal spread in r, as a fraction of r.
    pub sa_range_fraction: f64,
    /// Initial Metropolis temperature in log-likelihood units.
    pub sa_temperature: f64,
    pub adam_iterations: usize,
    pub adam_step: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Stop when the scaled gradient norm drops below this.
    pub gradient_tol: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            restarts: 3,
            sa_iterations: 200,
            sa_decay: 0.95,
            sa_theta_steps: 2.0,
            sa_range_fraction: 0.2,
            sa_temperature: 1.0,
            adam_iterations: 500,
            adam_step: 1e-2,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            gradient_tol: 1e-6,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(invalid("restarts must be at least 1"));
        }
        if !(self.sa_decay > 0.0 && self.sa_decay <= 1.0) {
            return Err(invalid(format!("sa_decay must lie in (0, 1], got {}", self.sa_decay)));
        }
        for (name, v) in [
            ("sa_theta_steps", self.sa_theta_steps),
            ("sa_range_fraction", self.sa_range_fraction),
            ("sa_temperature", self.sa_temperature),
            ("adam_step", self.adam_step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(invalid("Adam moment factors must lie in [0, 1)"));
        }
        if !(self.gradient_tol >= 0.0) {
            return Err(invalid("gradient_tol must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOutcome {
    pub params: MleParams,
    pub log_likelihood: f64,
    /// Annealing plus gradient iterations actually run.
    pub iterations: usize,
}

/// Per-coordinate units for the gradient phase.
fn units(obs: &AmplitudeObservation, init: &MleParams) -> Vector4<f64> {
    Vector4::new(2.0 / obs.len() as f64, 0.1, init.amp_factor, init.noise_power)
}

/// Maximizes the likelihood from `init`: annealing on (θ, r) with D and σ²
/// fixed, then Adam on all four parameters in rescaled coordinates with
/// projection onto `bounds`. Repeated `restarts` times; returns the best
/// point visited by any run.
pub fn optimize<R: Rng + ?Sized>(
    obs: &AmplitudeObservation,
    cfg: &ArrayConfig,
    init: &MleParams,
    bounds: &MleBounds,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<MleOutcome> {
    schedule.validate()?;
    check_params(init)?;
    bounds.check(init)?;

    let data = data_term(obs);
    let eval = |p: &MleParams| data + likelihood_core(obs, cfg, p);
    let init_ll = eval(init);
    let mut out = MleOutcome {
        params: *init,
        log_likelihood: init_ll,
        iterations: 0,
    };
    for _ in 0..schedule.restarts {
        let mut run = Run {
            best: *init,
            best_ll: init_ll,
            iterations: 0,
        };
        anneal(&mut run, &eval, obs.len(), bounds, schedule, rng);
        ascend(&mut run, &eval, obs, cfg, init, bounds, schedule);
        out.iterations += run.iterations;
        if run.best_ll > out.log_likelihood {
            out.params = run.best;
            out.log_likelihood = run.best_ll;
        }
    }
    Ok(out)
}

struct Run {
    best: MleParams,
    best_ll: f64,
    iterations: usize,
}

/// Metropolis annealing on (θ, r) from `run.best`.
fn anneal<R: Rng + ?Sized>(
    run: &mut Run,
    eval: &impl Fn(&MleParams) -> f64,
    n_samples: usize,
    bounds: &MleBounds,
    schedule: &Schedule,
    rng: &mut R,
) {
    let step = 2.0 / n_samples as f64;
    let mut cur = run.best;
    let mut cur_ll = run.best_ll;
    let mut temp = 1.0;
    for _ in 0..schedule.sa_iterations {
        run.iterations += 1;
        // one coordinate per proposal: the likelihood is far sharper in r
        // than in θ, so joint moves are almost always rejected
        for coord in 0..2 {
            let mut prop = cur;
            let jump = temp * rng.random_range(-1.0..=1.0);
            if coord == 0 {
                prop.theta += jump * schedule.sa_theta_steps * step;
            } else {
                prop.range_m *= 1.0 + jump * schedule.sa_range_fraction;
            }
            bounds.project(&mut prop, 0.0, 0.0);
            let ll = eval(&prop);
            let tau = schedule.sa_temperature * temp;
            if ll >= cur_ll || rng.random::<f64>() < ((ll - cur_ll) / tau).exp() {
                cur = prop;
                cur_ll = ll;
                if ll > run.best_ll {
                    run.best = prop;
                    run.best_ll = ll;
                }
            }
        }
        temp *= schedule.sa_decay;
    }
}

/// Adam on scaled coordinates from `run.best`.
fn ascend(
    run: &mut Run,
    eval: &impl Fn(&MleParams) -> f64,
    obs: &AmplitudeObservation,
    cfg: &ArrayConfig,
    init: &MleParams,
    bounds: &MleBounds,
    schedule: &Schedule,
) {
    let unit = units(obs, init);
    let floor_amp = 1e-9 * init.amp_factor;
    let floor_noise = 1e-9 * init.noise_power;
    let mut x = run.best.to_vector().component_div(&unit);
    let mut m = Vector4::zeros();
    let mut v = Vector4::zeros();
    let (b1, b2) = (schedule.adam_beta1, schedule.adam_beta2);
    for t in 1..=schedule.adam_iterations {
        run.iterations += 1;
        let p = MleParams::from_vector(&x.component_mul(&unit));
        let g = Vector4::from(raw_score(obs, cfg, &p)).component_mul(&unit);
        if g.norm() < schedule.gradient_tol {
            break;
        }
        m = m * b1 + g * (1.0 - b1);
        v = v * b2 + g.component_mul(&g) * (1.0 - b2);
        let m_hat = m / (1.0 - b1.powi(t as i32));
        let v_hat = v / (1.0 - b2.powi(t as i32));
        // ascent on ℓ
        x += m_hat.component_div(&v_hat.map(|s| s.sqrt() + 1e-12)) * schedule.adam_step;
        let mut q = MleParams::from_vector(&x.component_mul(&unit));
        bounds.project(&mut q, floor_amp, floor_noise);
        x = q.to_vector().component_div(&unit);
        let ll = eval(&q);
        if ll > run.best_ll {
            run.best = q;
            run.best_ll = ll;
        }
    }
}

/// Settings of the full refinement from a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MleConfig {
    /// Indices trimmed at each edge of the signal and noise sets.
    pub guard: usize,
    pub noise_estimator: NoiseEstimator,
    pub schedule: Schedule,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            guard: 3,
            noise_estimator: NoiseEstimator::MeanSquare,
            schedule: Schedule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleReport {
    pub estimate: PositionEstimate,
    pub initial: MleParams,
    pub amp_init_least_squares: bool,
    pub outcome: MleOutcome,
}

/// Initial parameters from a coarse estimate: (θ̂, r̂) as given, with r̂ of a
/// far-field estimate replaced by the Rayleigh distance, then σ̂² from the
/// noise set and D̂ from the signal set.
pub fn initial_params(
    obs: &AmplitudeObservation,
    cfg: &ArrayConfig,
    coarse: &PositionEstimate,
    regions: &ProtectedRegions,
    mode: NoiseEstimator,
) -> Result<(MleParams, bool)> {
    let bounds = MleBounds::for_array(cfg);
    let theta = coarse.theta_hat.clamp(bounds.theta_min, bounds.theta_max);
    let r = coarse.r_hat.unwrap_or(bounds.r_max).clamp(bounds.r_min, bounds.r_max);
    let noise_power = init_noise_power(&obs.z, &regions.noise, mode)?;
    if !(noise_power > 0.0) {
        return Err(Error::DegenerateParameter("noise set has zero power".into()));
    }
    let unit = MleParams {
        theta,
        range_m: r,
        amp_factor: 1.0,
        noise_power,
    };
    let shape_all = model_amplitudes(cfg, obs, &unit);
    let z: Vec<f64> = regions.signal.iter().map(|&i| obs.z[i]).collect();
    let shape: Vec<f64> = regions.signal.iter().map(|&i| shape_all[i]).collect();
    let amp = init_amp_factor(&z, &shape, noise_power)?;
    Ok((
        MleParams {
            amp_factor: amp.value,
            ..unit
        },
        amp.least_squares,
    ))
}

/// Refines a coarse estimate by maximizing the amplitude likelihood of the
/// sweep.
pub fn mle_train<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    sweep: &SweepMeasurement,
    coarse: &PositionEstimate,
    train: &TrainParams,
    settings: &MleConfig,
    rng: &mut R,
) -> Result<MleReport> {
    let obs = AmplitudeObservation::from_sweep(sweep)?;
    let angle = estimate_angle(sweep, train)?;
    let regions = protected_regions(&angle.cluster, obs.len(), settings.guard, angle.peak)?;
    let (initial, least_squares) = initial_params(&obs, cfg, coarse, &regions, settings.noise_estimator)?;
    let bounds = MleBounds::for_array(cfg);
    let outcome = optimize(&obs, cfg, &initial, &bounds, &settings.schedule, rng)?;
    let p = outcome.params;
    let mut estimate = PositionEstimate::near(cfg, p.theta, p.range_m, Method::Mle)?;
    estimate.classification = Classification::Near;
    estimate.candidates = coarse.candidates.clone();
    estimate.iterations = outcome.iterations;
    Ok(MleReport {
        estimate,
        initial,
        amp_init_least_squares: least_squares,
        outcome,
    })
}

/// Monte-Carlo Fisher information and Cramér-Rao bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherInfo {
    /// Order (θ, r, D, σ²).
    pub matrix: [[f64; 4]; 4],
    pub std_error: [[f64; 4]; 4],
    /// Diagonal of the (pseudo-)inverse.
    pub crb_diag: [f64; 4],
    pub condition_number: f64,
    /// True when the matrix was too ill-conditioned for a plain inverse.
    pub pseudo_inverse: bool,
}

/// Condition number above which the pseudo-inverse is used.
pub const FISHER_CONDITION_LIMIT: f64 = 1e12;

/// Expected outer product of the score, summed per index and averaged over
/// `n_mc` synthetic sweeps drawn at `params` on the given angles.
pub fn fisher_info<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    params: &MleParams,
    angles: &[f64],
    n_mc: usize,
    rng: &mut R,
) -> Result<FisherInfo> {
    check_params(params)?;
    if n_mc < 2 {
        return Err(invalid(format!("fisher_info needs at least 2 draws, got {n_mc}")));
    }
    let obs = AmplitudeObservation::new(vec![0.0; angles.len()], angles.to_vec())?;
    let u = model_amplitudes(cfg, &obs, params);
    let mut sum = Matrix4::<f64>::zeros();
    let mut sum_sq = Matrix4::<f64>::zeros();
    let mut z = vec![0.0; u.len()];
    for _ in 0..n_mc {
        for (zi, ui) in z.iter_mut().zip(&u) {
            *zi = rician_draw(rng, *ui, params.noise_power);
        }
        let t = index_terms(&obs, cfg, params, &z);
        let mut draw = Matrix4::<f64>::zeros();
        for i in 0..u.len() {
            let s = Vector4::new(
                t.dl_du[i] * t.du[0][i],
                t.dl_du[i] * t.du[1][i],
                t.dl_du[i] * t.du[2][i],
                t.dl_ds2[i],
            );
            draw += s * s.transpose();
        }
        sum += draw;
        sum_sq += draw.component_mul(&draw);
    }
    let n = n_mc as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean.component_mul(&mean)) * (n / (n - 1.0));
    let se = var.map(|v| (v.max(0.0) / n).sqrt());
    let mean = (mean + mean.transpose()) * 0.5;

    // invert in Jacobi-scaled coordinates so the four units do not swamp
    // the conditioning
    let d = mean.diagonal().map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 });
    let scaled = Matrix4::from_fn(|i, j| mean[(i, j)] * d[i] * d[j]);
    let sv = scaled.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let pseudo = !(condition_number < FISHER_CONDITION_LIMIT);
    let inv_scaled = if pseudo {
        scaled
            .pseudo_inverse(smax * 1e-14)
            .map_err(|e| Error::DegenerateParameter(format!("Fisher pseudo-inverse failed: {e}")))?
    } else {
        scaled
            .try_inverse()
            .ok_or_else(|| Error::DegenerateParameter("Fisher matrix is singular".into()))?
    };
    let inv = Matrix4::from_fn(|i, j| inv_scaled[(i, j)] * d[i] * d[j]);
    let to_array = |m: &Matrix4<f64>| {
        let mut a = [[0.0; 4]; 4];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[(i, j)];
            }
        }
        a
    };
    Ok(FisherInfo {
        matrix: to_array(&mean),
        std_error: to_array(&se),
        crb_diag: [inv[(0, 0)], inv[(1, 1)], inv[(2, 2)], inv[(3, 3)]],
        condition_number,
        pseudo_inverse: pseudo,
    })
}

/// Synthetic amplitude observation at `params` on the given angles.
pub fn simulate_amplitudes<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    params: &MleParams,
    angles: &[f64],
    rng: &mut R,
) -> Result<AmplitudeObservation> {
    check_params(params)?;
    let obs = AmplitudeObservation::new(vec![0.0; angles.len()], angles.to_vec())?;
    let z = model_amplitudes(cfg, &obs, params)
        .into_iter()
        .map(|u| rician_draw(rng, u, params.noise_power))
        .collect();
    Ok(obs.with_amplitudes(z))
}
