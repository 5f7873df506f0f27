//! Monte-Carlo campaigns: noise calibration from a reference SNR, per-trial
//! training with every estimator, mean-square errors and achievable rates.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    boundary_distances, channel_vector, dft_angle, dft_codebook, dft_vector, noiseless_response, range_excess,
    sweep_channel, ArrayConfig, PolarPosition, WeightVector,
};
use crate::mle::{mle_train, MleConfig};
use crate::pattern::modified_rayleigh;
use crate::specfun::complex_gaussian;
use crate::train::{
    coarse_train, distance_from_width, refine_train, Classification, Method, PositionEstimate, Prober, TrainParams,
};

/// Range of the canonical reference user at broadside.
pub const REFERENCE_RANGE_M: f64 = 5.0;

/// How a reference SNR maps to a noise power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrConvention {
    /// SNR of a single element: σ² = g(5 m)² / 10^{SNR/10}.
    #[default]
    PerElement,
    /// SNR of the whole array without beamforming: σ² = N g(5 m)² / 10^{SNR/10}.
    ArrayPower,
}

/// Noise power for a reference SNR measured on the user at (0, 5 m).
pub fn calibrate_noise(cfg: &ArrayConfig, reference_snr_db: f64, convention: SnrConvention) -> Result<f64> {
    if !reference_snr_db.is_finite() {
        return Err(invalid(format!("reference SNR must be finite, got {reference_snr_db}")));
    }
    let g2 = cfg.path_gain(REFERENCE_RANGE_M).powi(2);
    let power = match convention {
        SnrConvention::PerElement => g2,
        SnrConvention::ArrayPower => cfg.n_elements as f64 * g2,
    };
    Ok(power / 10f64.powf(reference_snr_db / 10.0))
}

fn check_noise(noise_power: f64) -> Result<()> {
    if !(noise_power > 0.0) || !noise_power.is_finite() {
        return Err(invalid(format!("noise power must be positive, got {noise_power}")));
    }
    Ok(())
}

/// log₂(1 + |h^H v|²/σ²).
pub fn achievable_rate_single(h: &[Complex64], v: &WeightVector, noise_power: f64) -> Result<f64> {
    check_noise(noise_power)?;
    if h.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            got: v.len(),
        });
    }
    let s = noiseless_response(h, &v.weights).norm_sqr();
    Ok((1.0 + s / noise_power).log2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiUserRates {
    pub rates: Vec<f64>,
    pub condition_number: f64,
    /// Condition number of the steering Gram matrix above 1e8.
    pub ill_conditioned: bool,
}

/// Condition number above which a multi-user steering matrix is flagged.
pub const MULTIUSER_CONDITION_LIMIT: f64 = 1e8;

/// SINR rates with regularized zero forcing over the estimated codewords.
///
/// V = B(B^H B + Mσ²I)^{-1}, scaled so that Σ‖v_i‖² = 1.
pub fn multiuser_rates(
    channels: &[Vec<Complex64>],
    codewords: &[WeightVector],
    noise_power: f64,
) -> Result<MultiUserRates> {
    check_noise(noise_power)?;
    let m = channels.len();
    if m < 2 {
        return Err(invalid(format!("multi-user rates need at least 2 users, got {m}")));
    }
    if codewords.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: codewords.len(),
        });
    }
    let n = channels[0].len();
    for v in channels
        .iter()
        .map(|h| h.len())
        .chain(codewords.iter().map(|w| w.len()))
    {
        if v != n {
            return Err(Error::DimensionMismatch { expected: n, got: v });
        }
    }
    let b = DMatrix::from_fn(n, m, |i, j| codewords[j].weights[i]);
    let gram = b.adjoint() * &b;
    let sv = gram.clone().singular_values();
    let condition_number = if sv.min() > 0.0 {
        sv.max() / sv.min()
    } else {
        f64::INFINITY
    };
    let reg = gram + DMatrix::identity(m, m) * Complex64::new(m as f64 * noise_power, 0.0);
    let inv = reg
        .try_inverse()
        .ok_or_else(|| Error::DegenerateParameter("regularized steering Gram matrix is singular".into()))?;
    let mut v = b * inv;
    let total = v.norm();
    if !(total > 0.0) {
        return Err(Error::DegenerateParameter("zero-forcing beamformer vanished".into()));
    }
    v /= Complex64::new(total, 0.0);

    let h = DMatrix::from_fn(n, m, |i, j| channels[j][i]);
    let cross = h.adjoint() * v;
    let rates = (0..m)
        .map(|i| {
            let signal = cross[(i, i)].norm_sqr();
            let interference: f64 = (0..m).filter(|&j| j != i).map(|j| cross[(i, j)].norm_sqr()).sum();
            (1.0 + signal / (interference + noise_power)).log2()
        })
        .collect();
    Ok(MultiUserRates {
        rates,
        condition_number,
        ill_conditioned: !(condition_number <= MULTIUSER_CONDITION_LIMIT),
    })
}

/// Distance rings uniform in 1/r from the Rayleigh distance down to
/// max(Fresnel distance, 3 m).
pub fn polar_rings(cfg: &ArrayConfig, n_rings: usize) -> Result<Vec<f64>> {
    if n_rings < 2 {
        return Err(invalid(format!("polar codebook needs at least 2 rings, got {n_rings}")));
    }
    let (fresnel, rayleigh) = boundary_distances(cfg);
    let near = fresnel.max(3.0);
    let (lo, hi) = (1.0 / rayleigh, 1.0 / near);
    Ok((0..n_rings)
        .map(|s| 1.0 / (lo + (hi - lo) * s as f64 / (n_rings - 1) as f64))
        .collect())
}

/// Exhaustive search over N_s angles × S rings with one noisy probe each;
/// returns the strongest codeword's position.
pub fn exhaustive_baseline<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    n_samples: usize,
    n_rings: usize,
    user: &PolarPosition,
    noise_power: f64,
    rng: &mut R,
) -> Result<(PositionEstimate, usize)> {
    user.validate()?;
    if !(noise_power >= 0.0) {
        return Err(invalid(format!("noise power must be >= 0, got {noise_power}")));
    }
    let rings = polar_rings(cfg, n_rings)?;
    let h_conj: Vec<Complex64> = channel_vector(cfg, user).iter().map(|c| c.conj()).collect();
    let k = 2.0 * std::f64::consts::PI / cfg.wavelength_m;
    let scale = 1.0 / (cfg.n_elements as f64).sqrt();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut probes = 0;
    for i in 0..n_samples {
        let angle = dft_angle(i, n_samples);
        for &r in &rings {
            let excess = range_excess(
                cfg,
                &PolarPosition {
                    theta: angle,
                    range_m: r,
                },
            );
            let mut y: Complex64 = h_conj
                .iter()
                .zip(&excess)
                .map(|(h, dr)| h * Complex64::from_polar(scale, -k * dr))
                .sum();
            if noise_power > 0.0 {
                y += complex_gaussian(rng, noise_power);
            }
            probes += 1;
            let a = y.norm();
            if a > best.0 {
                best = (a, angle, r);
            }
        }
    }
    Ok((PositionEstimate::near(cfg, best.1, best.2, Method::Exhaustive)?, probes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Coarse,
    Refined,
    Mle,
    Exhaustive,
    FullCsi,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Coarse,
        Estimator::Refined,
        Estimator::Mle,
        Estimator::Exhaustive,
        Estimator::FullCsi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Coarse => "coarse",
            Estimator::Refined => "refined",
            Estimator::Mle => "mle",
            Estimator::Exhaustive => "exhaustive",
            Estimator::FullCsi => "full_csi",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| invalid(format!("unknown estimator '{s}'")))
    }
}

/// Radial extent of sampled users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RangeSpec {
    /// [1.1·R_Fre, 0.95·R_mRay(θ)].
    Near,
    /// [1.1·R_mRay(θ), 2·R_mRay(θ)] capped at R_Ray: far-field users near
    /// the boundary.
    Far,
    Absolute {
        min_m: f64,
        max_m: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserRegion {
    pub theta_min: f64,
    pub theta_max: f64,
    pub range: RangeSpec,
    /// Snap θ to the nearest sweep grid angle.
    pub on_grid: bool,
    /// ρ and p of the modified Rayleigh distance bounding the regions.
    pub rho: f64,
    pub p: f64,
}

impl Default for UserRegion {
    fn default() -> Self {
        Self {
            theta_min: -0.8,
            theta_max: 0.8,
            range: RangeSpec::Near,
            on_grid: false,
            rho: 0.5,
            p: 3.0,
        }
    }
}

impl UserRegion {
    fn range_bounds(&self, cfg: &ArrayConfig, theta: f64) -> Result<(f64, f64)> {
        let (fresnel, rayleigh) = boundary_distances(cfg);
        Ok(match self.range {
            RangeSpec::Near => (1.1 * fresnel, 0.95 * modified_rayleigh(cfg, theta, self.rho, self.p)?),
            RangeSpec::Far => {
                let m = modified_rayleigh(cfg, theta, self.rho, self.p)?;
                ((1.1 * m).min(rayleigh), (2.0 * m).min(rayleigh))
            }
            RangeSpec::Absolute { min_m, max_m } => (min_m, max_m),
        })
    }

    fn validate(&self, cfg: &ArrayConfig) -> Result<()> {
        let ok = |t: f64| t.is_finite() && t.abs() < 1.0;
        if !ok(self.theta_min) || !ok(self.theta_max) || self.theta_min > self.theta_max {
            return Err(Error::Config(format!(
                "user angles must satisfy -1 < theta_min <= theta_max < 1, got [{}, {}]",
                self.theta_min, self.theta_max
            )));
        }
        let (_, rayleigh) = boundary_distances(cfg);
        for theta in [self.theta_min, self.theta_max, 0.5 * (self.theta_min + self.theta_max)] {
            let (lo, hi) = self.range_bounds(cfg, theta)?;
            if !(lo > 0.0) || !(lo <= hi) || hi > rayleigh * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "empty or invalid user range [{lo}, {hi}] m at theta = {theta}"
                )));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, cfg: &ArrayConfig, n_samples: usize, rng: &mut R) -> Result<PolarPosition> {
        let mut theta = rng.random_range(self.theta_min..=self.theta_max);
        if self.on_grid {
            let i = ((theta * n_samples as f64 + n_samples as f64 - 1.0) / 2.0).round();
            theta = dft_angle(i.clamp(0.0, n_samples as f64 - 1.0) as usize, n_samples);
        }
        let (lo, hi) = self.range_bounds(cfg, theta)?;
        PolarPosition::new(theta, rng.random_range(lo..=hi))
    }
}

/// One Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub array: ArrayConfig,
    pub estimators: Vec<Estimator>,
    pub snr_db: Vec<f64>,
    pub snr_convention: SnrConvention,
    pub n_trials: usize,
    pub users: UserRegion,
    /// Users served together; 1 gives single-user rates.
    pub n_users: usize,
    pub dft_samples: usize,
    /// Distance rings of the exhaustive baseline.
    pub rings: usize,
    pub seed: u64,
    pub train: TrainParams,
    pub mle: MleConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            array: ArrayConfig::default(),
            estimators: vec![Estimator::Coarse, Estimator::Refined],
            snr_db: vec![20.0],
            snr_convention: SnrConvention::PerElement,
            n_trials: 100,
            users: UserRegion::default(),
            n_users: 1,
            dft_samples: 512,
            rings: 5,
            seed: 0,
            train: TrainParams::default(),
            mle: MleConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.array.validate().map_err(cfg_err)?;
        self.train.validate().map_err(cfg_err)?;
        self.mle.schedule.validate().map_err(cfg_err)?;
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.n_users == 0 {
            return Err(Error::Config("n_users must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimator selected".into()));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("snr_db must list finite values".into()));
        }
        if self.dft_samples < 2 * self.train.gap + 2 {
            return Err(Error::Config(format!(
                "dft_samples = {} is too small",
                self.dft_samples
            )));
        }
        if self.rings < 2 {
            return Err(Error::Config("rings must be at least 2".into()));
        }
        self.users.validate(&self.array)
    }
}

/// Outcome of one estimator on one user of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub estimator: Estimator,
    pub snr_db: f64,
    pub trial: usize,
    pub user: usize,
    pub theta: f64,
    pub r: f64,
    pub theta_hat: f64,
    /// `None` for far-field estimates.
    pub r_hat: Option<f64>,
    /// Distance used for the error: `r_hat`, or the range whose beamwidth
    /// equals the far-field limit.
    pub r_hat_error: f64,
    pub sq_err_theta: f64,
    pub sq_err_r: f64,
    /// Single-user rate, or this user's SINR rate when users share the array.
    pub rate: f64,
    pub overhead: usize,
    pub classification: Classification,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: Estimator,
    pub snr_db: f64,
    pub mse_theta: f64,
    pub mse_r: f64,
    /// Mean over trials of the summed user rates.
    pub rate_mean: f64,
    pub rate_p10: f64,
    pub rate_p90: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: ScenarioConfig,
    pub rows: Vec<SummaryRow>,
    pub records: Vec<TrialRecord>,
    /// Multi-user trials whose steering matrix was flagged ill-conditioned.
    pub ill_conditioned_trials: usize,
    pub runtime_s: f64,
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Stream {
    User = 1,
    Sweep = 2,
    Probe = 3,
    Mle = 4,
    Exhaustive = 5,
}

/// Generator for one (SNR point, trial, user, purpose) derived from the
/// master seed. User positions ignore the SNR index so that every SNR point
/// sees the same users.
fn stream_rng(seed: u64, snr_index: usize, trial: usize, user: usize, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snr = match purpose {
        Stream::User => 0,
        _ => snr_index as u64 + 1,
    };
    rng.set_stream((snr << 48) | ((trial as u64) << 16) | ((user as u64) << 4) | purpose as u64);
    rng
}

/// Probes a channel with noise from its own generator.
struct OwnedProber {
    h: Vec<Complex64>,
    noise_power: f64,
    rng: ChaCha8Rng,
    count: usize,
}

impl Prober for OwnedProber {
    fn probe(&mut self, v: &WeightVector) -> Result<Complex64> {
        if v.len() != self.h.len() {
            return Err(Error::DimensionMismatch {
                expected: self.h.len(),
                got: v.len(),
            });
        }
        self.count += 1;
        let y = noiseless_response(&self.h, &v.weights);
        Ok(if self.noise_power > 0.0 {
            y + complex_gaussian(&mut self.rng, self.noise_power)
        } else {
            y
        })
    }

    fn probes_used(&self) -> usize {
        self.count
    }
}

struct UserOutcome {
    estimator: Estimator,
    estimate: PositionEstimate,
    overhead: usize,
}

/// Runs every requested estimator for one user. Coarse, refined and MLE
/// share one sweep and its probes.
fn train_user(
    sc: &ScenarioConfig,
    pos: &PolarPosition,
    noise_power: f64,
    snr_index: usize,
    trial: usize,
    user: usize,
) -> Result<Vec<UserOutcome>> {
    let cfg = &sc.array;
    let wants = |e: Estimator| sc.estimators.contains(&e);
    let mut out = Vec::new();
    if wants(Estimator::Coarse) || wants(Estimator::Refined) || wants(Estimator::Mle) {
        let codebook = dft_codebook(cfg, sc.dft_samples)?;
        let h = channel_vector(cfg, pos);
        let mut sweep_rng = stream_rng(sc.seed, snr_index, trial, user, Stream::Sweep);
        let mut sweep = sweep_channel(cfg, &h, &codebook, noise_power, &mut sweep_rng)?;
        let mut prober = OwnedProber {
            h,
            noise_power,
            rng: stream_rng(sc.seed, snr_index, trial, user, Stream::Probe),
            count: 0,
        };
        let coarse = coarse_train(cfg, &mut sweep, &mut prober, &sc.train)?;
        let overhead = sweep.len() + prober.probes_used();
        if wants(Estimator::Refined) {
            let est = refine_train(cfg, &coarse, &sweep, &sc.train)?;
            out.push(UserOutcome {
                estimator: Estimator::Refined,
                estimate: est,
                overhead,
            });
        }
        if wants(Estimator::Mle) {
            let mut rng = stream_rng(sc.seed, snr_index, trial, user, Stream::Mle);
            let rep = mle_train(cfg, &sweep, &coarse, &sc.train, &sc.mle, &mut rng)?;
            out.push(UserOutcome {
                estimator: Estimator::Mle,
                estimate: rep.estimate,
                overhead,
            });
        }
        if wants(Estimator::Coarse) {
            out.push(UserOutcome {
                estimator: Estimator::Coarse,
                estimate: coarse,
                overhead,
            });
        }
    }
    if wants(Estimator::Exhaustive) {
        let mut rng = stream_rng(sc.seed, snr_index, trial, user, Stream::Exhaustive);
        let (est, probes) = exhaustive_baseline(cfg, sc.dft_samples, sc.rings, pos, noise_power, &mut rng)?;
        out.push(UserOutcome {
            estimator: Estimator::Exhaustive,
            estimate: est,
            overhead: probes,
        });
    }
    if wants(Estimator::FullCsi) {
        out.push(UserOutcome {
            estimator: Estimator::FullCsi,
            estimate: PositionEstimate::near(cfg, pos.theta, pos.range_m, Method::FullCsi)?,
            overhead: 0,
        });
    }
    Ok(out)
}

/// Distance scored for an estimate: r̂ itself, or for far-field estimates
/// the range whose closed-form width equals the far-field width limit.
pub fn error_range(cfg: &ArrayConfig, est: &PositionEstimate, params: &TrainParams, n_samples: usize) -> Result<f64> {
    match est.r_hat {
        Some(r) => Ok(r),
        None => distance_from_width(cfg, est.theta_hat, params.far_width(n_samples), params.rho),
    }
}

fn run_trial(
    sc: &ScenarioConfig,
    snr_index: usize,
    trial: usize,
    noise_power: f64,
) -> Result<(Vec<TrialRecord>, bool)> {
    let cfg = &sc.array;
    let mut user_rng = stream_rng(sc.seed, snr_index, trial, 0, Stream::User);
    let users: Vec<PolarPosition> = (0..sc.n_users)
        .map(|_| sc.users.sample(cfg, sc.dft_samples, &mut user_rng))
        .collect::<Result<_>>()?;
    let channels: Vec<Vec<Complex64>> = users.iter().map(|p| channel_vector(cfg, p)).collect();

    let mut per_user = Vec::with_capacity(users.len());
    for (u, pos) in users.iter().enumerate() {
        per_user.push(train_user(sc, pos, noise_power, snr_index, trial, u)?);
    }

    let mut records = Vec::new();
    let mut flagged = false;
    for &est_kind in &sc.estimators {
        let outcomes: Vec<&UserOutcome> = per_user
            .iter()
            .map(|o| o.iter().find(|x| x.estimator == est_kind).expect("every estimator ran"))
            .collect();
        let codewords: Vec<WeightVector> = outcomes
            .iter()
            .map(|o| o.estimate.codeword(cfg))
            .collect::<Result<_>>()?;
        let rates = if users.len() == 1 {
            vec![achievable_rate_single(&channels[0], &codewords[0], noise_power)?]
        } else {
            let mu = multiuser_rates(&channels, &codewords, noise_power)?;
            flagged |= mu.ill_conditioned;
            mu.rates
        };
        for (u, (o, pos)) in outcomes.iter().zip(&users).enumerate() {
            let e = &o.estimate;
            let r_err = error_range(cfg, e, &sc.train, sc.dft_samples)?;
            records.push(TrialRecord {
                estimator: est_kind,
                snr_db: sc.snr_db[snr_index],
                trial,
                user: u,
                theta: pos.theta,
                r: pos.range_m,
                theta_hat: e.theta_hat,
                r_hat: e.r_hat,
                r_hat_error: r_err,
                sq_err_theta: (e.theta_hat - pos.theta).powi(2),
                sq_err_r: (r_err - pos.range_m).powi(2),
                rate: rates[u],
                overhead: o.overhead,
                classification: e.classification,
                iterations: e.iterations,
            });
        }
    }
    Ok((records, flagged))
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Aggregates records into one row per (estimator, SNR) in config order.
pub fn summarize(config: &ScenarioConfig, records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &est in &config.estimators {
        for &snr in &config.snr_db {
            let sel: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.estimator == est && r.snr_db == snr)
                .collect();
            if sel.is_empty() {
                continue;
            }
            let n = sel.len() as f64;
            let mut trial_rates: Vec<f64> = Vec::new();
            let mut last_trial = None;
            for r in &sel {
                if last_trial == Some(r.trial) {
                    *trial_rates.last_mut().expect("pushed below") += r.rate;
                } else {
                    trial_rates.push(r.rate);
                    last_trial = Some(r.trial);
                }
            }
            let n_trials = trial_rates.len();
            let rate_mean = trial_rates.iter().sum::<f64>() / n_trials as f64;
            trial_rates.sort_by(f64::total_cmp);
            rows.push(SummaryRow {
                estimator: est,
                snr_db: snr,
                mse_theta: sel.iter().map(|r| r.sq_err_theta).sum::<f64>() / n,
                mse_r: sel.iter().map(|r| r.sq_err_r).sum::<f64>() / n,
                rate_mean,
                rate_p10: quantile(&trial_rates, 0.1),
                rate_p90: quantile(&trial_rates, 0.9),
                n_trials,
            });
        }
    }
    rows
}

fn run_all(sc: &ScenarioConfig, jobs: &[(usize, usize, f64)]) -> Vec<Result<(Vec<TrialRecord>, bool)>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(s, t, sigma2)| run_trial(sc, s, t, sigma2))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(|&(s, t, sigma2)| run_trial(sc, s, t, sigma2)).collect()
    }
}

/// Runs every (SNR, trial) pair with generators split from the master seed.
/// Results do not depend on thread count or scheduling.
pub fn run_campaign(scenario: &ScenarioConfig) -> Result<CampaignResult> {
    scenario.validate()?;
    let start = Instant::now();
    let mut jobs = Vec::with_capacity(scenario.snr_db.len() * scenario.n_trials);
    for (s, &snr) in scenario.snr_db.iter().enumerate() {
        let sigma2 = calibrate_noise(&scenario.array, snr, scenario.snr_convention)?;
        for t in 0..scenario.n_trials {
            jobs.push((s, t, sigma2));
        }
    }
    let mut records = Vec::new();
    let mut ill = 0;
    for res in run_all(scenario, &jobs) {
        let (recs, flagged) = res?;
        ill += flagged as usize;
        records.extend(recs);
    }
    Ok(CampaignResult {
        rows: summarize(scenario, &records),
        config: scenario.clone(),
        records,
        ill_conditioned_trials: ill,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Far-field codeword at angle `theta`.
pub fn far_codeword(cfg: &ArrayConfig, theta: f64) -> WeightVector {
    dft_vector(cfg, theta)
}

/// Matched codeword for a known channel: h/‖h‖.
pub fn matched_codeword(h: &[Complex64]) -> Result<WeightVector> {
    let norm = DVector::from_column_slice(h).norm();
    if !(norm > 0.0) {
        return Err(Error::DegenerateParameter("zero channel".into()));
    }
    Ok(WeightVector {
        weights: h.iter().map(|c| c / norm).collect(),
    })
}
