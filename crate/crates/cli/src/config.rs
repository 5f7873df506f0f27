use std::path::{Path, PathBuf};

use dftbeam::geometry::ArrayConfig;
use dftbeam::mle::MleConfig;
use dftbeam::sim::{Estimator, ScenarioConfig, SnrConvention, UserRegion};
use dftbeam::train::TrainParams;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn jsonl(self) -> bool {
        matches!(self, Format::Jsonl | Format::Both)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayBlock {
    pub n_elements: usize,
    pub carrier_hz: f64,
    /// Defaults to half the carrier wavelength.
    pub spacing_m: Option<f64>,
}

impl Default for ArrayBlock {
    fn default() -> Self {
        Self {
            n_elements: 512,
            carrier_hz: 1.0e11,
            spacing_m: None,
        }
    }
}

impl ArrayBlock {
    pub fn build(&self) -> Result<ArrayConfig, CliError> {
        let cfg = match self.spacing_m {
            Some(d) => ArrayConfig::new(self.n_elements, self.carrier_hz, d),
            None => ArrayConfig::half_wavelength(self.n_elements, self.carrier_hz),
        };
        cfg.map_err(|e| CliError::Config(format!("[array]: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioBlock {
    pub estimators: Vec<Estimator>,
    pub snr_db: Vec<f64>,
    pub snr_convention: SnrConvention,
    pub n_trials: usize,
    pub users: UserRegion,
    pub n_users: usize,
    /// Sweep size; 0 means one codeword per element.
    pub dft_samples: usize,
    pub rings: usize,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        let sc = ScenarioConfig::default();
        Self {
            estimators: sc.estimators,
            snr_db: sc.snr_db,
            snr_convention: sc.snr_convention,
            n_trials: sc.n_trials,
            users: sc.users,
            n_users: sc.n_users,
            dft_samples: 0,
            rings: sc.rings,
        }
    }
}

/// Contents of the TOML config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub array: ArrayBlock,
    pub train: TrainParams,
    pub mle: MleConfig,
    pub scenario: ScenarioBlock,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Scenario with the array, training and MLE blocks filled in.
    pub fn scenario(&self, array: ArrayConfig) -> ScenarioConfig {
        let s = &self.scenario;
        ScenarioConfig {
            array,
            estimators: s.estimators.clone(),
            snr_db: s.snr_db.clone(),
            snr_convention: s.snr_convention,
            n_trials: s.n_trials,
            users: s.users,
            n_users: s.n_users,
            dft_samples: if s.dft_samples == 0 {
                array.n_elements
            } else {
                s.dft_samples
            },
            rings: s.rings,
            seed: self.seed,
            train: self.train,
            mle: self.mle,
        }
    }
}

/// Parses `a:b:step` (inclusive), a comma list, or a single value.
pub fn parse_snr(spec: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad number '{s}' in SNR spec '{spec}'"))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step.is_nan() || step <= 0.0 || b < a {
                return Err(format!("SNR range '{spec}' needs start <= stop and step > 0"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            (0..n).map(|i| a + step * i as f64).collect()
        }
        [single] => single.split(',').map(num).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(format!("SNR spec '{spec}' must be a:b:step, a list, or one value")),
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(format!("SNR spec '{spec}' has a non-finite value"));
    }
    Ok(values)
}
