//! Versioned JSON policy files and the sweep result table.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::NoiseModel;
use crate::error::{Error, Result};
use crate::eval::{exact_sharpness, sample_sharpness, SharpnessEstimate, Simulator};
use crate::gls::{DeltaIndexing, GlsPolicy};
use crate::pso::{PsoConfig, SweepLevel};
use crate::rng::StreamKey;
use crate::symstate::InputStateKind;

pub const POLICY_FORMAT_VERSION: u32 = 1;

/// Label of the re-evaluation stream below the master seed.
const EVAL_STREAM: u64 = 0xE7A1;

/// How a policy was learned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub noise: NoiseModel<f64>,
    pub pso: PsoConfig<f64>,
    pub indexing: DeltaIndexing,
    pub master_seed: u64,
    pub iterations: usize,
    /// Running-mean sharpness S̄ of the returned personal best.
    pub mean_sharpness: f64,
    pub mean_count: u32,
    pub trials_per_eval: usize,
    pub trials_used: u64,
    pub restarts_used: usize,
    pub winning_restart: usize,
    /// `(restart, S̄)` of every completed restart.
    pub restart_sharpness: Vec<(usize, f64)>,
}

/// Seeded re-evaluation under the training conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub trials: usize,
    /// Raw stream key the trials were drawn from.
    pub stream: u64,
    pub sharpness: f64,
    pub holevo_variance: f64,
    pub std_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_sharpness: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Hash of the policy the swarm was bootstrapped from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_n_qubits: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub format_version: u32,
    pub n_qubits: usize,
    /// Increments `Δ_1 … Δ_N` in radians.
    pub deltas: Vec<f64>,
    /// Hash of `deltas`, see [`policy_sha256`].
    pub sha256: String,
    pub input: InputStateKind,
    pub training: TrainingRecord,
    pub evaluation: EvaluationRecord,
    #[serde(default)]
    pub provenance: Provenance,
}

/// SHA-256 over the little-endian bytes of the increments, hex encoded.
pub fn policy_sha256(deltas: &[f64]) -> String {
    let mut h = Sha256::new();
    for d in deltas {
        h.update(d.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Stream used to re-evaluate an N-qubit policy trained from `master_seed`.
pub fn evaluation_key(master_seed: u64, n_qubits: usize) -> StreamKey {
    StreamKey::root(master_seed).child(EVAL_STREAM).child(n_qubits as u64)
}

/// Seeded sampled sharpness of `policy` under the given conditions.
pub fn evaluate_policy(
    policy: &GlsPolicy<f64>,
    input: InputStateKind,
    noise: &NoiseModel<f64>,
    indexing: DeltaIndexing,
    trials: usize,
    key: StreamKey,
) -> Result<SharpnessEstimate<f64>> {
    let sim = Simulator::new(input.build(policy.len())?, noise)?.with_indexing(indexing);
    sample_sharpness(&sim, policy, trials, key)
}

/// Exact sharpness, refused for noisy channels and beyond the size limit.
pub fn exact_for(policy: &GlsPolicy<f64>, input: InputStateKind, noise: &NoiseModel<f64>) -> Result<f64> {
    if !noise.is_noiseless() || noise.loss_eta > 0.0 {
        return Err(Error::Refused("exact evaluation covers only the noiseless, lossless channel".into()));
    }
    exact_sharpness(policy, &input.build(policy.len())?)
}

impl PolicyFile {
    /// Packs a finished sweep level and re-evaluates it with `eval_trials`
    /// trials on the stream derived from `master_seed`.
    pub fn from_level(
        level: &SweepLevel<f64>,
        input: InputStateKind,
        noise: &NoiseModel<f64>,
        indexing: DeltaIndexing,
        master_seed: u64,
        eval_trials: usize,
        exact: bool,
    ) -> Result<Self> {
        let key = evaluation_key(master_seed, level.n_qubits);
        let est = evaluate_policy(&level.policy, input, noise, indexing, eval_trials, key)?;
        let exact_sharpness = if exact && level.n_qubits <= crate::eval::MAX_EXACT_QUBITS && noise.is_noiseless() && noise.loss_eta == 0.0 {
            Some(exact_for(&level.policy, input, noise)?)
        } else {
            None
        };
        let deltas = level.policy.to_f64();
        Ok(PolicyFile {
            format_version: POLICY_FORMAT_VERSION,
            n_qubits: level.n_qubits,
            sha256: policy_sha256(&deltas),
            deltas,
            input,
            training: TrainingRecord {
                noise: *noise,
                pso: level.config.clone(),
                indexing,
                master_seed,
                iterations: level.config.iterations,
                mean_sharpness: level.sharpness.sharpness,
                mean_count: level.sharpness.mean_count,
                trials_per_eval: level.config.trials_per_eval,
                trials_used: level.trials_used,
                restarts_used: level.restarts_used,
                winning_restart: level.winner,
                restart_sharpness: level.restart_sharpness.clone(),
            },
            evaluation: EvaluationRecord {
                trials: eval_trials,
                stream: key.raw(),
                sharpness: est.sharpness,
                holevo_variance: est.holevo_variance,
                std_error: est.std_error,
                exact_sharpness,
            },
            provenance: Provenance {
                parent_sha256: level.parent.as_ref().map(|p| policy_sha256(&p.to_f64())),
                parent_n_qubits: level.parent.as_ref().map(|p| p.len()),
            },
        })
    }

    pub fn policy(&self) -> GlsPolicy<f64> {
        GlsPolicy::new(self.deltas.clone())
    }

    /// Back to a sweep level, as used when resuming.
    pub fn to_level(&self) -> SweepLevel<f64> {
        SweepLevel {
            n_qubits: self.n_qubits,
            policy: self.policy(),
            sharpness: SharpnessEstimate {
                sharpness: self.training.mean_sharpness,
                trials: self.training.trials_per_eval * self.training.mean_count as usize,
                holevo_variance: crate::eval::holevo_variance(self.training.mean_sharpness),
                mean_count: self.training.mean_count,
                std_error: 0.0,
            },
            config: self.training.pso.clone(),
            restarts_used: self.training.restarts_used,
            winner: self.training.winning_restart,
            restart_sharpness: self.training.restart_sharpness.clone(),
            trials_used: self.training.trials_used,
            parent: None,
            resumed: true,
        }
    }

    /// Repeats the stored evaluation from its recorded stream.
    pub fn reevaluate(&self) -> Result<SharpnessEstimate<f64>> {
        evaluate_policy(
            &self.policy(),
            self.input,
            &self.training.noise,
            self.training.indexing,
            self.evaluation.trials,
            evaluation_key(self.training.master_seed, self.n_qubits),
        )
    }

    fn check(&self) -> Result<()> {
        if self.deltas.len() != self.n_qubits {
            return Err(Error::Format(format!(
                "policy file declares {} qubits but holds {} increments",
                self.n_qubits,
                self.deltas.len()
            )));
        }
        if self.sha256 != policy_sha256(&self.deltas) {
            return Err(Error::Format("policy hash does not match its increments".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Format(format!("policy file: {e}")))?;
        match raw.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == POLICY_FORMAT_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Format(format!(
                    "policy file format version {v} is not supported (expected {POLICY_FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Format("policy file has no format_version".into())),
        }
        let file: PolicyFile = serde_json::from_value(raw).map_err(|e| Error::Format(format!("policy file: {e}")))?;
        file.check()?;
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Writes atomically through a temporary sibling file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

pub fn policy_path(dir: &Path, n_qubits: usize) -> PathBuf {
    dir.join(format!("policy_n{n_qubits:02}.json"))
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "V_H")]
    pub holevo_variance: f64,
    #[serde(rename = "S")]
    pub sharpness: f64,
    /// Trials behind `S`; 0 when it is exact.
    #[serde(rename = "K")]
    pub trials: usize,
    pub seed: u64,
    pub restarts_used: usize,
}

impl SweepRow {
    pub fn from_file(file: &PolicyFile) -> Self {
        let (sharpness, trials) = match file.evaluation.exact_sharpness {
            Some(s) => (s, 0),
            None => (file.evaluation.sharpness, file.evaluation.trials),
        };
        SweepRow {
            n: file.n_qubits,
            holevo_variance: crate::eval::holevo_variance(sharpness),
            sharpness,
            trials,
            seed: file.training.master_seed,
            restarts_used: file.training.restarts_used,
        }
    }
}

pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// `(N, V_H)` pairs from any CSV with `N` and `V_H` columns.
pub fn read_scaling_points(path: &Path) -> Result<Vec<(usize, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let headers = r.headers().map_err(csv_error)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Format(format!("{}: no `{name}` column", path.display())))
    };
    let (cn, cv) = (col("N")?, col("V_H")?);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let bad = |what: &str| Error::Format(format!("{}: row {}: bad {what}", path.display(), line + 2));
        let n = rec.get(cn).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("N"))?;
        let v = rec.get(cv).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("V_H"))?;
        out.push((n, v));
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("{other:?}")),
        }
    } else {
        Error::Format(e.to_string())
    }
}
