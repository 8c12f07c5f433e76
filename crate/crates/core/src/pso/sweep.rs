//! Chained optimization over a range of N with independent restarts.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::channel::NoiseModel;
use crate::error::{Error, Result};
use crate::eval::SharpnessEstimate;
use crate::gls::{DeltaIndexing, GlsPolicy};
use crate::rng::StreamKey;
use crate::scalar::Real;
use crate::symstate::InputStateKind;

use super::{optimize_with, PsoConfig, PsoOverrides, SampledEvaluator};
use crate::eval::Simulator;

/// What to sweep and under which conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct SweepPlan<T> {
    pub n_min: usize,
    pub n_max: usize,
    pub restarts: usize,
    pub input: InputStateKind,
    pub model: NoiseModel<T>,
    #[serde(default)]
    pub pso: PsoOverrides<T>,
    #[serde(default)]
    pub indexing: DeltaIndexing,
}

/// Best policy found for one N.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepLevel<T> {
    pub n_qubits: usize,
    pub policy: GlsPolicy<T>,
    /// Running-mean S̄ of the winning restart.
    pub sharpness: SharpnessEstimate<T>,
    pub config: PsoConfig<T>,
    /// Restarts that ran to completion.
    pub restarts_used: usize,
    /// Index of the winning restart.
    pub winner: usize,
    /// S̄ of every completed restart, by restart index.
    pub restart_sharpness: Vec<(usize, T)>,
    pub trials_used: u64,
    /// Policy the swarm was bootstrapped from, if any.
    pub parent: Option<GlsPolicy<T>>,
    /// Loaded from persisted results instead of being optimized.
    pub resumed: bool,
}

/// Hooks for persisting and resuming a sweep.
pub trait SweepObserver<T: Real> {
    /// A previously persisted level for `n_qubits`, if any.
    fn resume(&mut self, _n_qubits: usize) -> Result<Option<SweepLevel<T>>> {
        Ok(None)
    }

    /// Called once per finished level, before the next one starts.
    fn level_done(&mut self, _level: &SweepLevel<T>) -> Result<()> {
        Ok(())
    }
}

/// Observer that neither persists nor resumes.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoPersistence;

impl<T: Real> SweepObserver<T> for NoPersistence {}

/// A sweep stopped early; `completed` holds every level finished before the
/// failure (already handed to the observer).
#[derive(Debug, thiserror::Error)]
#[error("sweep aborted at N = {n_qubits} after {} completed levels: {source}", .completed.len())]
pub struct SweepAbort<T: Real> {
    pub n_qubits: usize,
    pub completed: Vec<SweepLevel<T>>,
    #[source]
    pub source: Error,
}

/// Optimizes N = n_min..=n_max in order, feeding each level's best policy to
/// the next as bootstrap parent. Restart `r` at level N draws from
/// `key.child(N).child(r)`; the best restart by S̄ is kept.
pub fn sweep<T: Real, O: SweepObserver<T>>(
    plan: &SweepPlan<T>,
    key: StreamKey,
    observer: &mut O,
) -> std::result::Result<Vec<SweepLevel<T>>, SweepAbort<T>> {
    let mut done: Vec<SweepLevel<T>> = Vec::new();
    let abort = |n, done: Vec<SweepLevel<T>>, source| SweepAbort {
        n_qubits: n,
        completed: done,
        source,
    };
    if plan.n_min == 0 || plan.n_min > plan.n_max {
        return Err(abort(plan.n_min, done, Error::Argument(format!("bad N range {}..={}", plan.n_min, plan.n_max))));
    }
    if plan.restarts == 0 {
        return Err(abort(plan.n_min, done, Error::Argument("at least one restart is required".into())));
    }
    if let Err(e) = plan.model.validate() {
        return Err(abort(plan.n_min, done, e));
    }

    let mut parent: Option<GlsPolicy<T>> = if plan.n_min > 1 {
        match observer.resume(plan.n_min - 1) {
            Ok(level) => level.map(|l| l.policy),
            Err(e) => return Err(abort(plan.n_min, done, e)),
        }
    } else {
        None
    };

    for n in plan.n_min..=plan.n_max {
        match observer.resume(n) {
            Ok(Some(level)) if level.policy.len() == n => {
                info!("N = {n}: resumed persisted policy");
                parent = Some(level.policy.clone());
                done.push(SweepLevel { resumed: true, ..level });
                continue;
            }
            Ok(Some(level)) => {
                let e = Error::State(format!("persisted policy for N = {n} has {} increments", level.policy.len()));
                return Err(abort(n, done, e));
            }
            Ok(None) => {}
            Err(e) => return Err(abort(n, done, e)),
        }
        match optimize_level(plan, n, parent.as_ref(), key.child(n as u64)) {
            Ok(level) => {
                if let Err(e) = observer.level_done(&level) {
                    return Err(abort(n, done, e));
                }
                parent = Some(level.policy.clone());
                done.push(level);
            }
            Err(e) => return Err(abort(n, done, e)),
        }
    }
    Ok(done)
}

fn optimize_level<T: Real>(
    plan: &SweepPlan<T>,
    n: usize,
    parent: Option<&GlsPolicy<T>>,
    key: StreamKey,
) -> Result<SweepLevel<T>> {
    let config = plan.pso.apply(n);
    let state = plan.input.build::<T>(n)?;
    let evaluator = SampledEvaluator {
        backend: Simulator::new(state, &plan.model)?.with_indexing(plan.indexing),
        trials: config.trials_per_eval,
    };
    let parent = if n > config.bootstrap_threshold { parent } else { None };
    let mut best: Option<(usize, super::OptimizeOutcome<T>)> = None;
    let mut scores = Vec::new();
    let mut trials = 0;
    let mut last_error = None;
    for r in 0..plan.restarts {
        match optimize_with(n, &evaluator, &config, parent, key.child(r as u64)) {
            Ok(out) => {
                info!(
                    "N = {n} restart {r}: S = {:.6}, V_H = {:.6e}",
                    out.sharpness.sharpness, out.sharpness.holevo_variance.to_f64_lossy()
                );
                trials += out.trials_used;
                scores.push((r, out.sharpness.sharpness));
                if best.as_ref().is_none_or(|(_, b)| out.sharpness.sharpness > b.sharpness.sharpness) {
                    best = Some((r, out));
                }
            }
            Err(e) => {
                warn!("N = {n} restart {r} failed: {e}");
                last_error = Some(e);
            }
        }
    }
    let Some((winner, out)) = best else {
        return Err(last_error.unwrap_or_else(|| Error::Argument("no restarts ran".into())));
    };
    Ok(SweepLevel {
        n_qubits: n,
        policy: out.policy,
        sharpness: out.sharpness,
        config,
        restarts_used: scores.len(),
        winner,
        restart_sharpness: scores,
        trials_used: trials,
        parent: parent.cloned(),
        resumed: false,
    })
}
