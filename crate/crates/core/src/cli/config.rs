//! Run configuration, loadable from TOML and overridable from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{NoiseKind, NoiseModel};
use crate::error::{Error, Result};
use crate::gls::DeltaIndexing;
use crate::pso::{PsoOverrides, SweepPlan};
use crate::symstate::InputStateKind;

/// Default number of trials for the seeded re-evaluation stored with every policy.
pub const DEFAULT_EVAL_TRIALS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub input: InputStateKind,
    pub noise: NoiseModel<f64>,
    pub pso: PsoOverrides<f64>,
    pub indexing: DeltaIndexing,
    pub seed: u64,
    pub restarts: usize,
    /// Trials of the seeded re-evaluation written into each policy file.
    pub eval_trials: usize,
    /// Also compute the exact sharpness where that is possible.
    pub exact: bool,
    pub out_dir: PathBuf,
    /// Bootstrap parent for a single-N run above the bootstrap threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parent: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_min: 4,
            n_max: 4,
            input: InputStateKind::PsiOpt,
            noise: NoiseModel::ideal(),
            pso: PsoOverrides::default(),
            indexing: DeltaIndexing::Measurement,
            seed: 1,
            restarts: 1,
            eval_trials: DEFAULT_EVAL_TRIALS,
            exact: false,
            out_dir: PathBuf::from("runs"),
            parent: None,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(Error::Argument(format!("bad qubit range {}..={}", self.n_min, self.n_max)));
        }
        if self.restarts == 0 {
            return Err(Error::Argument("restarts must be at least 1".into()));
        }
        if self.eval_trials == 0 {
            return Err(Error::Argument("eval_trials must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Argument("threads must be at least 1".into()));
        }
        self.noise.validate()?;
        for n in self.n_min..=self.n_max {
            self.pso.apply(n).validate()?;
        }
        Ok(())
    }

    pub fn sweep_plan(&self) -> SweepPlan<f64> {
        SweepPlan {
            n_min: self.n_min,
            n_max: self.n_max,
            restarts: self.restarts,
            input: self.input,
            model: self.noise,
            pso: self.pso.clone(),
            indexing: self.indexing,
        }
    }
}

/// Noise model from command-line style parameters: skew-normal when a
/// nonzero skewness is given, Gaussian when any spread is nonzero, ideal otherwise.
pub fn noise_from_parts(sigma_theta: f64, sigma_n: f64, skewness: f64, loss: f64) -> NoiseModel<f64> {
    let base = if skewness != 0.0 {
        NoiseModel::skew_normal(sigma_theta, sigma_n, skewness, 0.0)
    } else if sigma_theta > 0.0 || sigma_n > 0.0 {
        NoiseModel::gaussian(sigma_theta, sigma_n, 0.0)
    } else {
        NoiseModel::ideal()
    };
    base.with_loss(loss)
}

/// Inverse of [`noise_from_parts`] for models with isotropic axis noise.
pub(crate) fn noise_parts(model: &NoiseModel<f64>) -> (f64, f64, f64, f64) {
    let skew = if model.kind == NoiseKind::SkewNormal { model.skewness_gamma } else { 0.0 };
    (model.sigma_theta, model.sigma_n[1], skew, model.loss_eta)
}
