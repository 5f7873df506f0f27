//! Command-line front end for the near-field beam training library.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dftbeam::sim::Estimator;

use commands::{CampaignArgs, Ctx, Stage};
use config::{Format, RunConfig};
use output::Sink;

const EXIT_HELP: &str = "\
Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure, \
1 output could not be written.

CSV files start with a '# generated_unix=<seconds>' line unless --no-timestamp is given.";

#[derive(Parser)]
#[command(name = "dftbeam", version, about = "Near-field beam training with far-field DFT codebooks", after_help = EXIT_HELP)]
struct Cli {
    /// TOML config file with [array], [train], [mle] and [scenario] blocks
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Suppress the summary line
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Omit the timestamp line so repeated runs are byte-identical
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Axis {
    R,
    Theta,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Region {
    Near,
    Far,
}

#[derive(Args)]
struct UserArgs {
    /// Spatial angle of the user (sine of the departure angle)
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta: f64,
    /// User distance in meters
    #[arg(long, default_value_t = 5.0)]
    range: f64,
}

#[derive(Args)]
struct TrialArgs {
    #[command(flatten)]
    user: UserArgs,
    /// Reference SNR in dB
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    snr: f64,
    /// Sweep size N_s (default: one codeword per element)
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Estimators, comma separated: coarse, refined, mle, exhaustive, full_csi
    #[arg(long = "estimator", value_delimiter = ',', value_parser = parse_estimator)]
    estimators: Option<Vec<Estimator>>,
    /// Reference SNR in dB: start:stop:step (inclusive), a comma list, or one value
    #[arg(long, value_parser = parse_snr_list, allow_hyphen_values = true)]
    snr: Option<SnrList>,
    #[arg(long)]
    trials: Option<usize>,
    /// Sweep size N_s
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Clone)]
struct SnrList(Vec<f64>);

fn parse_snr_list(s: &str) -> Result<SnrList, String> {
    config::parse_snr(s).map(SnrList)
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse().map_err(|e: dftbeam::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Beam gain of every sweep codeword for one user.
    #[command(after_help = "Writes pattern.csv: phi,gain_discrete,gain_closed_form,normalized")]
    Pattern {
        #[command(flatten)]
        user: UserArgs,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Measured and closed-form beamwidth along range or angle.
    #[command(after_help = "Writes width_sweep.csv: theta,r,width_measured,width_closed")]
    WidthSweep {
        #[arg(long, value_enum, default_value = "r")]
        axis: Axis,
        /// Fixed angle for --axis r
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        theta: f64,
        /// Fixed range for --axis theta
        #[arg(long, default_value_t = 5.0)]
        range: f64,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Sweep start (default 5 m or -0.97)
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        /// Sweep end (default 70 m or 0.97)
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long, default_value_t = 66)]
        points: usize,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Modified Rayleigh distance across angles.
    #[command(after_help = "Writes rayleigh.csv: theta,modified_rayleigh_m,simulated_boundary_m,fresnel_m,rayleigh_m")]
    Rayleigh {
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        /// Far-field width limit in grid resolutions
        #[arg(long, default_value_t = 3.0)]
        p: f64,
        #[arg(long, default_value_t = -0.8, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
        to: f64,
        #[arg(long, default_value_t = 17)]
        points: usize,
        /// Also scan for the range where the sampled width reaches the limit
        #[arg(long)]
        simulate: bool,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// One coarse training trial.
    #[command(
        after_help = "Writes coarse.csv: estimator,theta,r,snr_db,theta_hat,r_hat,classification,width,iterations,overhead,rate,amp_factor,noise_power"
    )]
    Train(TrialArgs),
    /// One coarse trial followed by width refinement.
    #[command(after_help = "Writes refined.csv with the same columns as train")]
    Refine(TrialArgs),
    /// One coarse trial followed by the amplitude maximum-likelihood refinement.
    #[command(after_help = "Writes mle.csv with the same columns as train")]
    Mle(TrialArgs),
    /// Monte-Carlo Fisher information and Cramer-Rao bounds.
    #[command(after_help = "Writes crb.csv: parameter,truth,fisher_diag,fisher_std_error,crb")]
    Crb {
        #[command(flatten)]
        trial: TrialArgs,
        /// Monte-Carlo draws
        #[arg(long, default_value_t = 2000)]
        mc: usize,
    },
    /// Achievable rate of each estimator for a fixed user.
    #[command(after_help = "Writes rate.csv: estimator,snr_db,mse_theta,mse_r,rate_mean,rate_p10,rate_p90,n_trials")]
    Rate {
        #[command(flatten)]
        user: UserArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Monte-Carlo campaign over random users.
    #[command(
        after_help = "Writes campaign.csv: estimator,snr_db,mse_theta,mse_r,rate_mean,rate_p10,rate_p90,n_trials\nand campaign_records.jsonl (one object per trial, user and estimator) with --format jsonl or both"
    )]
    Campaign {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Users per trial; above 1, rates use regularized zero forcing
        #[arg(long)]
        users: Option<usize>,
        /// User region: near (inside the modified Rayleigh distance) or far
        #[arg(long, value_enum)]
        region: Option<Region>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(dftbeam::Error),
    Io(String),
}

impl From<dftbeam::Error> for CliError {
    fn from(e: dftbeam::Error) -> Self {
        match e {
            dftbeam::Error::Config(m) => CliError::Config(m),
            dftbeam::Error::InvalidArgument(m) => CliError::Config(m),
            other => CliError::Numeric(other),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut run = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        run.seed = s;
    }
    if let Some(f) = cli.format {
        run.format = f;
    }
    let array = run.array.build()?;
    run.train
        .validate()
        .map_err(|e| CliError::Config(format!("[train]: {e}")))?;
    run.mle
        .schedule
        .validate()
        .map_err(|e| CliError::Config(format!("[mle]: {e}")))?;
    let dir = cli
        .out
        .or_else(|| run.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let sink = Sink {
        dir,
        format: run.format,
        timestamp: !cli.no_timestamp,
    };
    let ctx = Ctx { run, array, sink };

    match cli.command {
        Command::Pattern { user, samples } => commands::pattern(&ctx, user.theta, user.range, samples),
        Command::WidthSweep {
            axis,
            theta,
            range,
            rho,
            from,
            to,
            points,
            samples,
        } => commands::width_sweep(&ctx, axis, theta, range, rho, from, to, points, samples),
        Command::Rayleigh {
            rho,
            p,
            from,
            to,
            points,
            simulate,
            samples,
        } => commands::rayleigh(&ctx, rho, p, from, to, points, simulate, samples),
        Command::Train(t) => commands::train(&ctx, Stage::Coarse, t.user.theta, t.user.range, t.snr, t.samples),
        Command::Refine(t) => commands::train(&ctx, Stage::Refined, t.user.theta, t.user.range, t.snr, t.samples),
        Command::Mle(t) => commands::train(&ctx, Stage::Mle, t.user.theta, t.user.range, t.snr, t.samples),
        Command::Crb { trial, mc } => {
            commands::crb(&ctx, trial.user.theta, trial.user.range, trial.snr, mc, trial.samples)
        }
        Command::Rate { user, scenario } => {
            let args = CampaignArgs {
                estimators: scenario.estimators,
                snr: scenario.snr.map(|s| s.0),
                trials: scenario.trials,
                users: None,
                region: None,
                samples: scenario.samples,
            };
            commands::rate(&ctx, user.theta, user.range, &args)
        }
        Command::Campaign {
            scenario,
            users,
            region,
        } => {
            let args = CampaignArgs {
                estimators: scenario.estimators,
                snr: scenario.snr.map(|s| s.0),
                trials: scenario.trials,
                users,
                region,
                samples: scenario.samples,
            };
            commands::campaign(&ctx, &args)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let quiet = cli.quiet;
    match run(cli) {
        Ok(summary) => {
            if !quiet {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dftbeam: {e}");
            ExitCode::from(e.code())
        }
    }
}
