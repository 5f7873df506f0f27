#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Browser bindings for the interactive demo page in `www/`.
//!
//! Each export has a plain Rust twin so the numbers can be checked natively.

use dftbeam::geometry::{channel_vector, dft_angles, dft_codebook, run_sweep, ArrayConfig, PolarPosition};
use dftbeam::pattern::{beamwidth_closed, beamwidth_measured, modified_rayleigh, sweep_gains};
use dftbeam::sim::{achievable_rate_single, calibrate_noise, SnrConvention};
use dftbeam::train::{coarse_train, refine_train, ChannelProber, TrainParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

fn array(n_elements: usize) -> Result<ArrayConfig, String> {
    ArrayConfig::half_wavelength(n_elements, 1.0e11).map_err(|e| e.to_string())
}

fn position(theta: f64, range: f64) -> Result<PolarPosition, String> {
    PolarPosition::new(theta, range).map_err(|e| e.to_string())
}

/// Sweep gains normalized by their peak, one per codeword angle.
pub fn normalized_pattern(n_elements: usize, theta: f64, range: f64) -> Result<Vec<f64>, String> {
    let cfg = array(n_elements)?;
    let pos = position(theta, range)?;
    let g = sweep_gains(&cfg, pos.theta, pos.range_m, n_elements).map_err(|e| e.to_string())?;
    let peak = g.iter().cloned().fold(0.0, f64::max);
    Ok(g.into_iter().map(|x| x / peak).collect())
}

pub struct WidthPoints {
    pub ranges: Vec<f64>,
    pub measured: Vec<f64>,
    pub closed: Vec<f64>,
    pub boundary: f64,
}

pub fn width_points(n_elements: usize, theta: f64, from: f64, to: f64, points: usize) -> Result<WidthPoints, String> {
    if points < 2 || !(to > from) {
        return Err(format!(
            "need at least 2 points over an increasing range, got {points} on [{from}, {to}]"
        ));
    }
    let cfg = array(n_elements)?;
    let angles = dft_angles(n_elements);
    let mut out = WidthPoints {
        ranges: Vec::with_capacity(points),
        measured: Vec::with_capacity(points),
        closed: Vec::with_capacity(points),
        boundary: modified_rayleigh(&cfg, theta, 0.5, 3.0).map_err(|e| e.to_string())?,
    };
    for i in 0..points {
        let r = from + (to - from) * i as f64 / (points - 1) as f64;
        let norm = normalized_pattern(n_elements, theta, r)?;
        let set = beamwidth_measured(&angles, &norm, 0.5).map_err(|e| e.to_string())?;
        out.ranges.push(r);
        out.measured.push(set.width);
        out.closed
            .push(beamwidth_closed(&cfg, theta, r, 0.5).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

pub struct TrialOutcome {
    pub theta_hat: f64,
    /// NaN for a user classified as far field.
    pub r_hat: f64,
    pub near: bool,
    pub iterations: usize,
    pub rate: f64,
    pub rate_ideal: f64,
    pub amplitudes: Vec<f64>,
}

/// One noisy sweep, coarse estimate and width refinement.
pub fn training_trial(
    n_elements: usize,
    theta: f64,
    range: f64,
    snr_db: f64,
    seed: u64,
) -> Result<TrialOutcome, String> {
    let err = |e: dftbeam::Error| e.to_string();
    let cfg = array(n_elements)?;
    let pos = position(theta, range)?;
    let s2 = calibrate_noise(&cfg, snr_db, SnrConvention::PerElement).map_err(err)?;
    let book = dft_codebook(&cfg, n_elements).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sweep = run_sweep(&cfg, &pos, &book, s2, &mut rng).map_err(err)?;
    let amplitudes = sweep.amplitudes.clone();
    let params = TrainParams::default();
    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut prober = ChannelProber::new(&cfg, &pos, s2, &mut probe_rng).map_err(err)?;
    let coarse = coarse_train(&cfg, &mut sweep, &mut prober, &params).map_err(err)?;
    let est = refine_train(&cfg, &coarse, &sweep, &params).map_err(err)?;
    let h = channel_vector(&cfg, &pos);
    let v = est.codeword(&cfg).map_err(err)?;
    let ideal = dftbeam::geometry::steering_vector(&cfg, &pos);
    Ok(TrialOutcome {
        theta_hat: est.theta_hat,
        r_hat: est.r_hat.unwrap_or(f64::NAN),
        near: est.r_hat.is_some(),
        iterations: est.iterations,
        rate: achievable_rate_single(&h, &v, s2).map_err(err)?,
        rate_ideal: achievable_rate_single(&h, &ideal, s2).map_err(err)?,
        amplitudes,
    })
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Codeword angles of an `n_elements` sweep.
#[wasm_bindgen(js_name = sweepAngles)]
pub fn sweep_angles(n_elements: usize) -> Vec<f64> {
    dft_angles(n_elements)
}

/// Normalized beam pattern of the far-field codebook for a user at (theta, range).
#[wasm_bindgen]
pub fn pattern(n_elements: usize, theta: f64, range: f64) -> Result<Vec<f64>, JsError> {
    normalized_pattern(n_elements, theta, range).map_err(js)
}

#[wasm_bindgen]
pub struct WidthCurve(WidthPoints);

#[wasm_bindgen]
impl WidthCurve {
    #[wasm_bindgen(getter)]
    pub fn ranges(&self) -> Vec<f64> {
        self.0.ranges.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn measured(&self) -> Vec<f64> {
        self.0.measured.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn closed(&self) -> Vec<f64> {
        self.0.closed.clone()
    }

    /// Range beyond which the codebook sees the user as far field.
    #[wasm_bindgen(getter)]
    pub fn boundary(&self) -> f64 {
        self.0.boundary
    }
}

#[wasm_bindgen(js_name = widthCurve)]
pub fn width_curve(n_elements: usize, theta: f64, from: f64, to: f64, points: usize) -> Result<WidthCurve, JsError> {
    width_points(n_elements, theta, from, to, points)
        .map(WidthCurve)
        .map_err(js)
}

#[wasm_bindgen]
pub struct Trial(TrialOutcome);

#[wasm_bindgen]
impl Trial {
    #[wasm_bindgen(getter, js_name = thetaHat)]
    pub fn theta_hat(&self) -> f64 {
        self.0.theta_hat
    }

    #[wasm_bindgen(getter, js_name = rHat)]
    pub fn r_hat(&self) -> f64 {
        self.0.r_hat
    }

    #[wasm_bindgen(getter)]
    pub fn near(&self) -> bool {
        self.0.near
    }

    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.0.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn rate(&self) -> f64 {
        self.0.rate
    }

    #[wasm_bindgen(getter, js_name = rateIdeal)]
    pub fn rate_ideal(&self) -> f64 {
        self.0.rate_ideal
    }

    /// Received amplitude of each sweep codeword.
    #[wasm_bindgen(getter)]
    pub fn amplitudes(&self) -> Vec<f64> {
        self.0.amplitudes.clone()
    }
}

#[wasm_bindgen(js_name = trainOnce)]
pub fn train_once(n_elements: usize, theta: f64, range: f64, snr_db: f64, seed: u32) -> Result<Trial, JsError> {
    training_trial(n_elements, theta, range, snr_db, seed as u64)
        .map(Trial)
        .map_err(js)
}
