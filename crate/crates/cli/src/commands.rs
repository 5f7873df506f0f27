use dftbeam::geometry::{
    boundary_distances, channel_vector, dft_angles, dft_codebook, run_sweep, ArrayConfig, PolarPosition,
};
use dftbeam::mle::{fisher_info, mle_train, true_amp_factor, MleParams};
use dftbeam::pattern::{
    beamwidth_closed, beamwidth_measured, focusing_params, gain_closed_form, modified_rayleigh, sweep_gains,
};
use dftbeam::sim::{
    achievable_rate_single, calibrate_noise, run_campaign, Estimator, RangeSpec, ScenarioConfig, UserRegion,
};
use dftbeam::train::{coarse_train, refine_train, ChannelProber, Classification, PositionEstimate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::Sink;
use crate::{Axis, CliError, Region};

pub struct Ctx {
    pub run: RunConfig,
    pub array: ArrayConfig,
    pub sink: Sink,
}

impl Ctx {
    fn samples(&self, flag: Option<usize>) -> usize {
        flag.unwrap_or(if self.run.scenario.dft_samples == 0 {
            self.array.n_elements
        } else {
            self.run.scenario.dft_samples
        })
    }
}

fn position(theta: f64, range: f64) -> Result<PolarPosition, CliError> {
    PolarPosition::new(theta, range).map_err(|e| CliError::Config(e.to_string()))
}

fn paths(p: &[std::path::PathBuf]) -> String {
    p.iter().map(|x| x.display().to_string()).collect::<Vec<_>>().join(", ")
}

/// Least-squares slope of y on x.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![from];
    }
    (0..points)
        .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Main-angle-set width of the noiseless sweep normalized by its maximum.
fn measured_width(cfg: &ArrayConfig, theta: f64, r: f64, rho: f64, ns: usize) -> Result<f64, CliError> {
    let g = sweep_gains(cfg, theta, r, ns)?;
    let peak = g.iter().cloned().fold(0.0, f64::max);
    let norm: Vec<f64> = g.iter().map(|x| x / peak).collect();
    Ok(beamwidth_measured(&dft_angles(ns), &norm, rho)?.width)
}

#[derive(Serialize)]
struct PatternRow {
    phi: f64,
    gain_discrete: f64,
    gain_closed_form: Option<f64>,
    normalized: f64,
}

pub fn pattern(ctx: &Ctx, theta: f64, range: f64, samples: Option<usize>) -> Result<String, CliError> {
    let pos = position(theta, range)?;
    let ns = ctx.samples(samples);
    let gains = sweep_gains(&ctx.array, pos.theta, pos.range_m, ns)?;
    let peak = gains.iter().cloned().fold(0.0, f64::max);
    let rows = dft_angles(ns)
        .into_iter()
        .zip(&gains)
        .map(|(phi, &g)| {
            let closed = focusing_params(&ctx.array, theta, range, phi)
                .ok()
                .and_then(|p| gain_closed_form(&p).ok());
            PatternRow {
                phi,
                gain_discrete: g,
                gain_closed_form: closed,
                normalized: g / peak,
            }
        })
        .collect::<Vec<_>>();
    let out = ctx.sink.emit("pattern", &rows)?;
    Ok(format!("pattern: {ns} angles, peak gain {peak:.4} -> {}", paths(&out)))
}

#[derive(Serialize)]
struct WidthRow {
    theta: f64,
    r: f64,
    width_measured: f64,
    width_closed: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn width_sweep(
    ctx: &Ctx,
    axis: Axis,
    theta: f64,
    range: f64,
    rho: f64,
    from: Option<f64>,
    to: Option<f64>,
    points: usize,
    samples: Option<usize>,
) -> Result<String, CliError> {
    if points < 2 {
        return Err(CliError::Config("--points must be at least 2".into()));
    }
    let ns = ctx.samples(samples);
    let (lo, hi) = match axis {
        Axis::R => (from.unwrap_or(5.0), to.unwrap_or(70.0)),
        Axis::Theta => (from.unwrap_or(-0.97), to.unwrap_or(0.97)),
    };
    let mut rows = Vec::with_capacity(points);
    for v in linspace(lo, hi, points) {
        let (t, r) = match axis {
            Axis::R => (theta, v),
            Axis::Theta => (v, range),
        };
        position(t, r)?;
        rows.push(WidthRow {
            theta: t,
            r,
            width_measured: measured_width(&ctx.array, t, r, rho, ns)?,
            width_closed: beamwidth_closed(&ctx.array, t, r, rho)?,
        });
    }
    let x: Vec<f64> = rows
        .iter()
        .map(|w| match axis {
            Axis::R => 1.0 / w.r,
            Axis::Theta => 1.0 - w.theta * w.theta,
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|w| w.width_measured).collect();
    let fit = slope(&x, &y);
    let label = match axis {
        Axis::R => "1/r",
        Axis::Theta => "1-theta^2",
    };
    let out = ctx.sink.emit("width_sweep", &rows)?;
    Ok(format!(
        "width-sweep: {points} points, slope vs {label} = {fit:.5} -> {}",
        paths(&out)
    ))
}

#[derive(Serialize)]
struct RayleighRow {
    theta: f64,
    modified_rayleigh_m: f64,
    simulated_boundary_m: Option<f64>,
    fresnel_m: f64,
    rayleigh_m: f64,
}

/// Smallest range where the sampled width drops to 2p/N_s, scanning in
/// `step` meters from the Fresnel distance.
fn simulated_boundary(
    cfg: &ArrayConfig,
    theta: f64,
    rho: f64,
    p: f64,
    ns: usize,
    step: f64,
) -> Result<Option<f64>, CliError> {
    let (fresnel, rayleigh) = boundary_distances(cfg);
    let limit = 2.0 * p / ns as f64;
    let mut r = fresnel;
    while r <= rayleigh {
        if measured_width(cfg, theta, r, rho, ns)? <= limit + 1e-12 {
            return Ok(Some(r));
        }
        r += step;
    }
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
pub fn rayleigh(
    ctx: &Ctx,
    rho: f64,
    p: f64,
    from: f64,
    to: f64,
    points: usize,
    simulate: bool,
    samples: Option<usize>,
) -> Result<String, CliError> {
    if points < 2 {
        return Err(CliError::Config("--points must be at least 2".into()));
    }
    let ns = ctx.samples(samples);
    let (fresnel, rayleigh) = boundary_distances(&ctx.array);
    let mut rows = Vec::with_capacity(points);
    for theta in linspace(from, to, points) {
        position(theta, 1.0)?;
        rows.push(RayleighRow {
            theta,
            modified_rayleigh_m: modified_rayleigh(&ctx.array, theta, rho, p)?,
            simulated_boundary_m: if simulate {
                simulated_boundary(&ctx.array, theta, rho, p, ns, 0.05)?
            } else {
                None
            },
            fresnel_m: fresnel,
            rayleigh_m: rayleigh,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| 1.0 - r.theta * r.theta).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.modified_rayleigh_m).collect();
    let mut msg = format!("rayleigh: slope vs 1-theta^2 = {:.3}", slope(&x, &y));
    if simulate {
        let pairs: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.simulated_boundary_m.map(|b| (1.0 - r.theta * r.theta, b)))
            .collect();
        if pairs.len() >= 2 {
            let (sx, sy): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            msg.push_str(&format!(", simulated {:.3}", slope(&sx, &sy)));
        }
    }
    let out = ctx.sink.emit("rayleigh", &rows)?;
    Ok(format!("{msg} -> {}", paths(&out)))
}

#[derive(Serialize)]
struct TrainRow {
    estimator: &'static str,
    theta: f64,
    r: f64,
    snr_db: f64,
    theta_hat: f64,
    r_hat: Option<f64>,
    classification: Classification,
    width: Option<f64>,
    iterations: usize,
    overhead: usize,
    rate: f64,
    amp_factor: Option<f64>,
    noise_power: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Coarse,
    Refined,
    Mle,
}

pub fn train(
    ctx: &Ctx,
    stage: Stage,
    theta: f64,
    range: f64,
    snr_db: f64,
    samples: Option<usize>,
) -> Result<String, CliError> {
    let cfg = &ctx.array;
    let pos = position(theta, range)?;
    let ns = ctx.samples(samples);
    let s2 = calibrate_noise(cfg, snr_db, ctx.run.scenario.snr_convention)?;
    let book = dft_codebook(cfg, ns)?;
    let mut sweep_rng = ChaCha8Rng::seed_from_u64(ctx.run.seed);
    let mut probe_rng = ChaCha8Rng::seed_from_u64(ctx.run.seed);
    probe_rng.set_stream(1);
    let mut sweep = run_sweep(cfg, &pos, &book, s2, &mut sweep_rng)?;
    let mut prober = ChannelProber::new(cfg, &pos, s2, &mut probe_rng)?;
    let coarse = coarse_train(cfg, &mut sweep, &mut prober, &ctx.run.train)?;
    let overhead = sweep.len() + dftbeam::train::Prober::probes_used(&prober);

    let mut amp = None;
    let (name, est): (&'static str, PositionEstimate) = match stage {
        Stage::Coarse => ("coarse", coarse),
        Stage::Refined => ("refined", refine_train(cfg, &coarse, &sweep, &ctx.run.train)?),
        Stage::Mle => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.run.seed);
            rng.set_stream(2);
            let rep = mle_train(cfg, &sweep, &coarse, &ctx.run.train, &ctx.run.mle, &mut rng)?;
            amp = Some(rep.outcome.params);
            ("mle", rep.estimate)
        }
    };
    let h = channel_vector(cfg, &pos);
    let rate = achievable_rate_single(&h, &est.codeword(cfg)?, s2)?;
    let row = TrainRow {
        estimator: name,
        theta,
        r: range,
        snr_db,
        theta_hat: est.theta_hat,
        r_hat: est.r_hat,
        classification: est.classification,
        width: est.width,
        iterations: est.iterations,
        overhead,
        rate,
        amp_factor: amp.map(|p: MleParams| p.amp_factor),
        noise_power: amp.map(|p| p.noise_power),
    };
    let out = ctx.sink.emit(name, &[row])?;
    let r_text = est.r_hat.map_or("far field".to_string(), |r| format!("r_hat {r:.4} m"));
    Ok(format!(
        "{name}: theta_hat {:.6}, {r_text}, rate {rate:.3} -> {}",
        est.theta_hat,
        paths(&out)
    ))
}

#[derive(Serialize)]
struct CrbRow {
    parameter: &'static str,
    truth: f64,
    fisher_diag: f64,
    fisher_std_error: f64,
    crb: f64,
}

pub fn crb(
    ctx: &Ctx,
    theta: f64,
    range: f64,
    snr_db: f64,
    mc: usize,
    samples: Option<usize>,
) -> Result<String, CliError> {
    let cfg = &ctx.array;
    position(theta, range)?;
    let ns = ctx.samples(samples);
    let truth = MleParams {
        theta,
        range_m: range,
        amp_factor: true_amp_factor(cfg),
        noise_power: calibrate_noise(cfg, snr_db, ctx.run.scenario.snr_convention)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.run.seed);
    let info = fisher_info(cfg, &truth, &dft_angles(ns), mc, &mut rng)?;
    let names = ["theta", "r", "amp_factor", "noise_power"];
    let values = [truth.theta, truth.range_m, truth.amp_factor, truth.noise_power];
    let rows: Vec<CrbRow> = (0..4)
        .map(|i| CrbRow {
            parameter: names[i],
            truth: values[i],
            fisher_diag: info.matrix[i][i],
            fisher_std_error: info.std_error[i][i],
            crb: info.crb_diag[i],
        })
        .collect();
    let out = ctx.sink.emit("crb", &rows)?;
    Ok(format!(
        "crb: theta {:.3e}, r {:.3e} (condition {:.2e}{}) -> {}",
        info.crb_diag[0],
        info.crb_diag[1],
        info.condition_number,
        if info.pseudo_inverse { ", pseudo-inverse" } else { "" },
        paths(&out)
    ))
}

pub struct CampaignArgs {
    pub estimators: Option<Vec<Estimator>>,
    pub snr: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub users: Option<usize>,
    pub region: Option<Region>,
    pub samples: Option<usize>,
}

fn scenario(ctx: &Ctx, args: &CampaignArgs) -> ScenarioConfig {
    let mut sc = ctx.run.scenario(ctx.array);
    if let Some(e) = &args.estimators {
        sc.estimators = e.clone();
    }
    if let Some(s) = &args.snr {
        sc.snr_db = s.clone();
    }
    if let Some(t) = args.trials {
        sc.n_trials = t;
    }
    if let Some(u) = args.users {
        sc.n_users = u;
    }
    if let Some(r) = args.region {
        sc.users.range = match r {
            Region::Near => RangeSpec::Near,
            Region::Far => RangeSpec::Far,
        };
    }
    if let Some(n) = args.samples {
        sc.dft_samples = n;
    }
    sc
}

fn campaign_error(e: dftbeam::Error) -> CliError {
    match e {
        dftbeam::Error::Config(m) => CliError::Config(m),
        other => CliError::Numeric(other),
    }
}

pub fn rate(ctx: &Ctx, theta: f64, range: f64, args: &CampaignArgs) -> Result<String, CliError> {
    position(theta, range)?;
    let mut sc = scenario(ctx, args);
    if args.estimators.is_none() && ctx.run.scenario.estimators == ScenarioConfig::default().estimators {
        sc.estimators = Estimator::ALL.to_vec();
    }
    sc.n_users = 1;
    sc.users = UserRegion {
        theta_min: theta,
        theta_max: theta,
        range: RangeSpec::Absolute {
            min_m: range,
            max_m: range,
        },
        on_grid: false,
        ..sc.users
    };
    let res = run_campaign(&sc).map_err(campaign_error)?;
    let out = ctx.sink.emit("rate", &res.rows)?;
    let best = res
        .rows
        .iter()
        .filter(|r| r.estimator != Estimator::FullCsi)
        .max_by(|a, b| a.rate_mean.total_cmp(&b.rate_mean));
    let best = best.map_or(String::new(), |r| {
        format!(", best {} {:.3}", r.estimator.name(), r.rate_mean)
    });
    Ok(format!("rate: {} rows{best} -> {}", res.rows.len(), paths(&out)))
}

pub fn campaign(ctx: &Ctx, args: &CampaignArgs) -> Result<String, CliError> {
    let sc = scenario(ctx, args);
    let res = run_campaign(&sc).map_err(campaign_error)?;
    let mut out = Vec::new();
    if ctx.sink.format.csv() {
        out.push(ctx.sink.write_csv("campaign", &res.rows)?);
    }
    if ctx.sink.format.jsonl() {
        out.push(ctx.sink.write_jsonl("campaign_records", &res.records)?);
    }
    let mut msg = format!(
        "campaign: {} rows from {} trials x {} SNR points in {:.1} s",
        res.rows.len(),
        sc.n_trials,
        sc.snr_db.len(),
        res.runtime_s
    );
    if res.ill_conditioned_trials > 0 {
        msg.push_str(&format!(
            ", {} ill-conditioned multi-user trials",
            res.ill_conditioned_trials
        ));
    }
    Ok(format!("{msg} -> {}", paths(&out)))
}
