//! Low-complexity beam training from a single DFT sweep: amplitude
//! clustering, median-k angle estimation, distance from the measured
//! beamwidth, and iterative refinement with the finite-α threshold.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    boundary_distances, channel_vector, dft_vector, noiseless_response, steering_vector, ArrayConfig, PolarPosition,
    SweepMeasurement, WeightVector,
};
use crate::pattern::{self, exact_threshold, focusing_alpha, s_from_rho, MainAngleSet};
use crate::specfun::complex_gaussian;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainParams {
    /// Beamwidth threshold on the normalized pattern.
    pub rho: f64,
    /// Clustering threshold as a fraction of the strongest amplitude.
    pub rho2_factor: f64,
    /// Largest index gap inside one cluster.
    pub gap: usize,
    /// Number of candidate angles around the cluster midpoint.
    pub k: usize,
    /// Beamwidth scaling factor: widths up to 2p/N_s count as far field.
    pub p: f64,
    /// Width-convergence tolerance of the refinement loop.
    pub epsilon: f64,
    pub i_max: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            rho: 0.5,
            rho2_factor: 0.65,
            gap: 8,
            k: 3,
            p: 3.0,
            epsilon: 1e-9,
            i_max: 10,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        s_from_rho(self.rho)?;
        if !(self.rho2_factor > 0.0 && self.rho2_factor < 1.0) {
            return Err(invalid(format!(
                "rho2_factor must lie in (0, 1), got {}",
                self.rho2_factor
            )));
        }
        if self.gap == 0 || self.k == 0 || self.i_max == 0 {
            return Err(invalid("gap, k and i_max must be positive"));
        }
        if !(self.p > 0.0) || !(self.epsilon > 0.0) {
            return Err(invalid("p and epsilon must be positive"));
        }
        Ok(())
    }

    /// Far-field width limit 2p/N_s.
    pub fn far_width(&self, n_samples: usize) -> f64 {
        2.0 * self.p / n_samples as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<usize>>,
    pub threshold_used: f64,
    pub gap: usize,
}

/// Groups indices with amplitude above `rho2`; a new cluster starts whenever
/// the distance to the previous member exceeds `gap`.
pub fn cluster_indices(amplitudes: &[f64], rho2: f64, gap: usize) -> Result<ClusterSet> {
    if gap == 0 {
        return Err(invalid("cluster gap must be at least 1"));
    }
    let mut clusters = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for (n, &z) in amplitudes.iter().enumerate() {
        if z <= rho2 {
            continue;
        }
        match current.last() {
            Some(&last) if n - last > gap => {
                clusters.push(std::mem::take(&mut current));
                current.push(n);
            }
            _ => current.push(n),
        }
    }
    if !current.is_empty() {
        clusters.push(current);
    }
    Ok(ClusterSet {
        clusters,
        threshold_used: rho2,
        gap,
    })
}

fn peak_of(indices: &[usize], amplitudes: &[f64]) -> usize {
    let mut best = indices[0];
    for &i in indices {
        if amplitudes[i] > amplitudes[best] {
            best = i;
        }
    }
    best
}

/// Cluster holding the strongest sample; ties go to the earlier cluster.
pub fn select_best_cluster(set: &ClusterSet, amplitudes: &[f64]) -> Result<Vec<usize>> {
    let mut best: Option<(&Vec<usize>, f64)> = None;
    for c in &set.clusters {
        let m = amplitudes[peak_of(c, amplitudes)];
        if best.is_none_or(|(_, bm)| m > bm) {
            best = Some((c, m));
        }
    }
    best.map(|(c, _)| c.clone()).ok_or(Error::NoSignal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    /// Midpoint of the strongest cluster's angle span.
    pub theta0: f64,
    /// Grid angles nearest `theta0`, nearest first.
    pub candidates: Vec<f64>,
    /// Indices of the strongest cluster.
    pub cluster: Vec<usize>,
    /// Index of the strongest sample.
    pub peak: usize,
}

pub fn estimate_angle(sweep: &SweepMeasurement, params: &TrainParams) -> Result<AngleEstimate> {
    let z = &sweep.amplitudes;
    if z.is_empty() {
        return Err(Error::NoSignal);
    }
    let max = z.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::NoSignal);
    }
    let set = cluster_indices(z, params.rho2_factor * max, params.gap)?;
    let cluster = select_best_cluster(&set, z)?;
    let peak = peak_of(&cluster, z);
    let lo = sweep.angles[cluster[0]];
    let hi = sweep.angles[cluster[cluster.len() - 1]];
    let theta0 = 0.5 * (lo + hi);
    let candidates = nearest_grid(&sweep.angles, theta0, params.k)
        .into_iter()
        .map(|i| sweep.angles[i])
        .collect();
    Ok(AngleEstimate {
        theta0,
        candidates,
        cluster,
        peak,
    })
}

/// Indices of the `k` grid angles closest to `target`: the nearest one, then
/// alternating left and right neighbours.
fn nearest_grid(angles: &[f64], target: f64, k: usize) -> Vec<usize> {
    let mut centre = 0;
    for (i, a) in angles.iter().enumerate() {
        if (a - target).abs() < (angles[centre] - target).abs() {
            centre = i;
        }
    }
    let mut out = vec![centre];
    let mut step = 1;
    while out.len() < k.min(angles.len()) {
        if centre >= step {
            out.push(centre - step);
        }
        if out.len() < k && centre + step < angles.len() {
            out.push(centre + step);
        }
        step += 1;
    }
    out
}

/// Main angle set at one candidate angle, normalizing the sweep by the
/// reference probe at that angle.
///
/// The threshold set is re-clustered with the sweep gap and only the
/// cluster holding the sweep peak is kept, so isolated noise spikes do not
/// stretch the range.
pub fn measure_width_for_candidate(
    sweep: &SweepMeasurement,
    candidate: f64,
    rho: f64,
    gap: usize,
    peak: usize,
) -> Result<MainAngleSet> {
    let reference = sweep
        .reference(candidate)
        .ok_or_else(|| invalid(format!("no reference probe for angle {candidate}")))?;
    let scale = reference.norm();
    if !(scale > 0.0) {
        return Err(Error::EmptySet { threshold: rho });
    }
    let normalized: Vec<f64> = sweep.amplitudes.iter().map(|z| z / scale).collect();
    let set = cluster_indices(&normalized, rho, gap)?;
    let chosen = set
        .clusters
        .iter()
        .find(|c| c.contains(&peak))
        .ok_or(Error::EmptySet { threshold: rho })?;
    MainAngleSet::from_angles(chosen.iter().map(|&i| sweep.angles[i]).collect())
}

/// Distance whose closed-form beamwidth at `theta` equals `width`.
pub fn distance_from_width(cfg: &ArrayConfig, theta: f64, width: f64, rho: f64) -> Result<f64> {
    pattern::distance_from_width(cfg, theta, width, s_from_rho(rho)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Near,
    Far,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Coarse,
    Refined,
    Mle,
    Exhaustive,
    FullCsi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub theta: f64,
    /// `None` when the candidate was classified far field.
    pub r_hat: Option<f64>,
    /// Measured width; `None` when nothing crossed the threshold.
    pub width: Option<f64>,
    /// Amplitude of the probe taken with the candidate's codeword.
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub theta_hat: f64,
    /// `None` encodes a far-field user.
    pub r_hat: Option<f64>,
    pub classification: Classification,
    #[serde(skip)]
    pub codeword: Option<WeightVector>,
    pub method: Method,
    pub candidates: Vec<Candidate>,
    /// Width behind `r_hat` (the last refinement width for refined results).
    pub width: Option<f64>,
    /// Refinement iterations performed (0 for coarse).
    pub iterations: usize,
    /// Whether the refinement loop met its width tolerance.
    pub converged: bool,
}

impl PositionEstimate {
    pub fn near(cfg: &ArrayConfig, theta: f64, r: f64, method: Method) -> Result<Self> {
        let pos = PolarPosition::new(theta, r)?;
        Ok(Self {
            theta_hat: theta,
            r_hat: Some(r),
            classification: Classification::Near,
            codeword: Some(steering_vector(cfg, &pos)),
            method,
            candidates: Vec::new(),
            width: None,
            iterations: 0,
            converged: true,
        })
    }

    /// Codeword implied by the estimate, built on demand when not stored.
    pub fn codeword(&self, cfg: &ArrayConfig) -> Result<WeightVector> {
        if let Some(w) = &self.codeword {
            return Ok(w.clone());
        }
        codeword_for(cfg, self.theta_hat, self.r_hat)
    }
}

fn codeword_for(cfg: &ArrayConfig, theta: f64, r_hat: Option<f64>) -> Result<WeightVector> {
    match r_hat {
        Some(r) => Ok(steering_vector(cfg, &PolarPosition::new(theta, r)?)),
        None => Ok(dft_vector(cfg, theta)),
    }
}

/// Source of single noisy probes with arbitrary beamforming weights.
pub trait Prober {
    fn probe(&mut self, v: &WeightVector) -> Result<Complex64>;
    fn probes_used(&self) -> usize;
}

/// Probes a known channel with additive complex Gaussian noise.
pub struct ChannelProber<'a, R: Rng + ?Sized> {
    h: Vec<Complex64>,
    noise_power: f64,
    rng: &'a mut R,
    count: usize,
}

impl<'a, R: Rng + ?Sized> ChannelProber<'a, R> {
    pub fn new(cfg: &ArrayConfig, pos: &PolarPosition, noise_power: f64, rng: &'a mut R) -> Result<Self> {
        pos.validate()?;
        if !(noise_power >= 0.0) {
            return Err(invalid(format!("noise power must be >= 0, got {noise_power}")));
        }
        Ok(Self {
            h: channel_vector(cfg, pos),
            noise_power,
            rng,
            count: 0,
        })
    }

    pub fn channel(&self) -> &[Complex64] {
        &self.h
    }
}

impl<R: Rng + ?Sized> Prober for ChannelProber<'_, R> {
    fn probe(&mut self, v: &WeightVector) -> Result<Complex64> {
        if v.len() != self.h.len() {
            return Err(Error::DimensionMismatch {
                expected: self.h.len(),
                got: v.len(),
            });
        }
        self.count += 1;
        let y = noiseless_response(&self.h, &v.weights);
        if self.noise_power > 0.0 {
            Ok(y + complex_gaussian(self.rng, self.noise_power))
        } else {
            Ok(y)
        }
    }

    fn probes_used(&self) -> usize {
        self.count
    }
}

fn near_range(cfg: &ArrayConfig, theta: f64, width: f64, rho: f64) -> Result<f64> {
    let (_, rayleigh) = boundary_distances(cfg);
    Ok(distance_from_width(cfg, theta, width, rho)?.min(rayleigh))
}

/// Coarse estimate from one sweep: reference probe and width per candidate,
/// far/near split on the width, then one probe per candidate codeword to
/// pick the winner.
pub fn coarse_train<P: Prober>(
    cfg: &ArrayConfig,
    sweep: &mut SweepMeasurement,
    prober: &mut P,
    params: &TrainParams,
) -> Result<PositionEstimate> {
    params.validate()?;
    let angle = estimate_angle(sweep, params)?;
    let far_width = params.far_width(sweep.len());

    let mut candidates = Vec::with_capacity(angle.candidates.len());
    let mut codewords = Vec::with_capacity(angle.candidates.len());
    for &theta in &angle.candidates {
        let y = prober.probe(&dft_vector(cfg, theta))?;
        sweep.reference_samples.push((theta, y));
        let width = match measure_width_for_candidate(sweep, theta, params.rho, params.gap, angle.peak) {
            Ok(m) => Some(m.width),
            Err(Error::EmptySet { .. }) => None,
            Err(e) => return Err(e),
        };
        let r_hat = match width {
            Some(w) if w > far_width && theta.abs() < 1.0 => Some(near_range(cfg, theta, w, params.rho)?),
            _ => None,
        };
        codewords.push(codeword_for(cfg, theta, r_hat)?);
        candidates.push(Candidate {
            theta,
            r_hat,
            width,
            response: 0.0,
        });
    }

    for (c, v) in candidates.iter_mut().zip(&codewords) {
        c.response = prober.probe(v)?.norm();
    }
    // strict > keeps the candidate nearest the midpoint on ties
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.response > candidates[best].response {
            best = i;
        }
    }
    let win = &candidates[best];
    Ok(PositionEstimate {
        theta_hat: win.theta,
        r_hat: win.r_hat,
        classification: if win.r_hat.is_some() {
            Classification::Near
        } else {
            Classification::Far
        },
        codeword: Some(codewords[best].clone()),
        method: Method::Coarse,
        width: win.width,
        candidates,
        iterations: 0,
        converged: true,
    })
}

/// Iterates the width measurement with the finite-α threshold until the
/// width stops changing. Reuses the sweep and the winner's reference probe.
pub fn refine_train(
    cfg: &ArrayConfig,
    initial: &PositionEstimate,
    sweep: &SweepMeasurement,
    params: &TrainParams,
) -> Result<PositionEstimate> {
    params.validate()?;
    let mut out = initial.clone();
    out.method = Method::Refined;
    let (Some(mut r_hat), Some(mut width)) = (initial.r_hat, initial.width) else {
        return Ok(out);
    };
    let theta = initial.theta_hat;
    let s_rho = s_from_rho(params.rho)?;
    let angle = estimate_angle(sweep, params)?;
    let (_, rayleigh) = boundary_distances(cfg);

    let mut rho_exact = exact_threshold(focusing_alpha(cfg, theta, r_hat), s_rho)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.i_max {
        iterations += 1;
        let next_width = match measure_width_for_candidate(sweep, theta, rho_exact, params.gap, angle.peak) {
            Ok(m) if m.width > 0.0 => m.width,
            Ok(_) | Err(Error::EmptySet { .. }) => break,
            Err(e) => return Err(e),
        };
        r_hat = pattern::distance_from_width(cfg, theta, next_width, s_rho)?.min(rayleigh);
        let change = (next_width - width).abs();
        width = next_width;
        if change < params.epsilon {
            converged = true;
            break;
        }
        rho_exact = exact_threshold(focusing_alpha(cfg, theta, r_hat), s_rho)?;
    }
    out.r_hat = Some(r_hat);
    out.width = Some(width);
    out.codeword = Some(steering_vector(cfg, &PolarPosition::new(theta, r_hat)?));
    out.iterations = iterations;
    out.converged = converged;
    Ok(out)
}
