//! Particle swarm optimization over the GLS policy space `[−π, π)^N`.
//!
//! Each round is synchronous: every particle samples the sharpness of its
//! current position and re-samples its personal best (whose score is the
//! running mean of all its samples), adopts the current position as personal
//! best if it scored higher, then moves toward its personal best and the best
//! personal best in its ring neighborhood.

mod init;
mod sweep;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::NoiseModel;
use crate::error::{arg, Result};
use crate::eval::{exact_sharpness, merge_sharpness, sample_sharpness, SharpnessEstimate, Simulator, TrialBackend};
use crate::gls::GlsPolicy;
use crate::rng::StreamKey;
use crate::scalar::{angular_diff, wrap_phase, Real};
use crate::symstate::SymmetricState;

pub use init::{bootstrap_init, sample_truncated_normal, uniform_init, TruncatedNormalParams};
pub use sweep::{sweep, NoPersistence, SweepAbort, SweepLevel, SweepObserver, SweepPlan};

// Stream labels below an iteration/particle key.
const PURPOSE_CURRENT: u64 = 0;
const PURPOSE_BEST: u64 = 1;
const PURPOSE_MOVE: u64 = 2;
const LABEL_INIT: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct PsoConfig<T> {
    /// Damping factor ω.
    pub omega: T,
    /// Attraction to the personal best.
    pub beta1: T,
    /// Attraction to the neighborhood best.
    pub beta2: T,
    /// Per-component bound on the displacement ω·δ.
    pub v_max: T,
    pub swarm_size: usize,
    pub ring_radius: usize,
    pub iterations: usize,
    /// Trials per sharpness sample (K).
    pub trials_per_eval: usize,
    /// Spread of the inherited increments at bootstrap.
    pub sigma1: T,
    /// Spread of the new last increment at bootstrap.
    pub sigma2: T,
    /// Largest N optimized from scratch; larger N bootstrap from N−1.
    pub bootstrap_threshold: usize,
    /// Draw ξ1, ξ2 per component instead of one scalar per update.
    #[serde(default)]
    pub per_component_xi: bool,
}

impl<T: Real> PsoConfig<T> {
    /// Defaults for an N-qubit search: Ξ = 20N, K = 10N².
    pub fn for_qubits(n: usize) -> Self {
        PsoConfig {
            omega: T::lit(0.8),
            beta1: T::lit(0.5),
            beta2: T::one(),
            v_max: T::lit(0.2),
            swarm_size: 20 * n,
            ring_radius: 1,
            iterations: 300,
            trials_per_eval: 10 * n * n,
            sigma1: T::lit(0.01) * T::PI(),
            sigma2: T::lit(0.25) * T::PI(),
            bootstrap_threshold: 10,
            per_component_xi: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.omega, self.beta1, self.beta2, self.v_max, self.sigma1, self.sigma2];
        if positive.iter().any(|w| !(*w > T::zero())) {
            return arg("ω, β1, β2, ν_max, σ1 and σ2 must be positive");
        }
        if self.swarm_size < 2 {
            return arg("swarm needs at least 2 particles");
        }
        if self.ring_radius < 1 {
            return arg("ring radius must be at least 1");
        }
        if self.trials_per_eval < 1 {
            return arg("at least one trial per evaluation is required");
        }
        Ok(())
    }
}

/// Partial [`PsoConfig`]; unset fields take the N-dependent defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct PsoOverrides<T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_max: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swarm_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ring_radius: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials_per_eval: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma1: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_threshold: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_component_xi: Option<bool>,
}

impl<T: Real> PsoOverrides<T> {
    pub fn apply(&self, n_qubits: usize) -> PsoConfig<T> {
        let d = PsoConfig::for_qubits(n_qubits);
        PsoConfig {
            omega: self.omega.unwrap_or(d.omega),
            beta1: self.beta1.unwrap_or(d.beta1),
            beta2: self.beta2.unwrap_or(d.beta2),
            v_max: self.v_max.unwrap_or(d.v_max),
            swarm_size: self.swarm_size.unwrap_or(d.swarm_size),
            ring_radius: self.ring_radius.unwrap_or(d.ring_radius),
            iterations: self.iterations.unwrap_or(d.iterations),
            trials_per_eval: self.trials_per_eval.unwrap_or(d.trials_per_eval),
            sigma1: self.sigma1.unwrap_or(d.sigma1),
            sigma2: self.sigma2.unwrap_or(d.sigma2),
            bootstrap_threshold: self.bootstrap_threshold.unwrap_or(d.bootstrap_threshold),
            per_component_xi: self.per_component_xi.unwrap_or(d.per_component_xi),
        }
    }
}

/// Policy scoring used by the swarm.
pub trait SharpnessEvaluator<T: Real>: Sync {
    fn evaluate(&self, policy: &GlsPolicy<T>, key: StreamKey) -> Result<SharpnessEstimate<T>>;

    /// Trials consumed per call; zero for exact evaluation.
    fn trials_per_evaluation(&self) -> usize;
}

/// K-trial Monte Carlo sharpness on a trial backend.
#[derive(Debug, Clone)]
pub struct SampledEvaluator<B> {
    pub backend: B,
    pub trials: usize,
}

impl<T: Real, B: TrialBackend<T>> SharpnessEvaluator<T> for SampledEvaluator<B> {
    fn evaluate(&self, policy: &GlsPolicy<T>, key: StreamKey) -> Result<SharpnessEstimate<T>> {
        sample_sharpness(&self.backend, policy, self.trials, key)
    }

    fn trials_per_evaluation(&self) -> usize {
        self.trials
    }
}

/// Exhaustive sharpness of the noiseless, lossless setup.
#[derive(Debug, Clone)]
pub struct ExactEvaluator<T: Real> {
    pub state: SymmetricState<T>,
}

impl<T: Real> SharpnessEvaluator<T> for ExactEvaluator<T> {
    fn evaluate(&self, policy: &GlsPolicy<T>, _key: StreamKey) -> Result<SharpnessEstimate<T>> {
        Ok(SharpnessEstimate::exact(exact_sharpness(policy, &self.state)?))
    }

    fn trials_per_evaluation(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle<T> {
    pub position: Vec<T>,
    pub velocity: Vec<T>,
    pub best_position: Vec<T>,
    /// Running mean S̄ of the personal best; `None` before the first round.
    pub best_sharpness: Option<SharpnessEstimate<T>>,
}

impl<T: Real> Particle<T> {
    fn best_score(&self) -> T {
        self.best_sharpness.map_or(T::neg_infinity(), |s| s.sharpness)
    }
}

#[derive(Debug, Clone)]
pub struct Swarm<T> {
    pub particles: Vec<Particle<T>>,
    pub iteration: usize,
    pub trials_used: u64,
}

impl<T: Real> Swarm<T> {
    /// Swarm at the given starting positions with velocities uniform in
    /// `[−ν_max, ν_max]`.
    pub fn from_positions(positions: Vec<Vec<T>>, config: &PsoConfig<T>, key: StreamKey) -> Self {
        let particles = positions
            .into_iter()
            .enumerate()
            .map(|(i, position)| {
                let mut rng = key.child(LABEL_INIT).child(i as u64).child(1).stream();
                let v_max = config.v_max.to_f64_lossy();
                let velocity = position.iter().map(|_| T::lit(v_max * (2.0 * rng.uniform() - 1.0))).collect();
                let position: Vec<T> = position.into_iter().map(wrap_phase).collect();
                Particle {
                    best_position: position.clone(),
                    position,
                    velocity,
                    best_sharpness: None,
                }
            })
            .collect();
        Swarm {
            particles,
            iteration: 0,
            trials_used: 0,
        }
    }

    /// Index of the particle holding the best personal best (lowest index on ties).
    pub fn global_best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, p) in self.particles.iter().enumerate() {
            if p.best_sharpness.is_some() && best.is_none_or(|b| p.best_score() > self.particles[b].best_score()) {
                best = Some(i);
            }
        }
        best
    }
}

/// Ring neighbors of `index` within distance `radius`, including itself,
/// in ring order starting at `index − radius`.
pub fn ring_neighborhood(index: usize, swarm_size: usize, radius: usize) -> Vec<usize> {
    assert!(index < swarm_size, "particle {index} outside swarm of {swarm_size}");
    if 2 * radius + 1 >= swarm_size {
        if 2 * radius >= swarm_size {
            warn!("ring radius {radius} covers the whole swarm of {swarm_size}");
        }
        return (0..swarm_size).collect();
    }
    (0..=2 * radius)
        .map(|k| (index + swarm_size + k - radius) % swarm_size)
        .collect()
}

/// Velocity and position update for one particle, with `ω·δ` clamped
/// componentwise to `[−ν_max, ν_max]`.
fn move_particle<T: Real>(p: &mut Particle<T>, guide: &[T], config: &PsoConfig<T>, key: StreamKey) {
    let mut rng = key.stream();
    let (mut xi1, mut xi2) = (rng.uniform(), rng.uniform());
    let limit = config.v_max / config.omega;
    for d in 0..p.position.len() {
        if config.per_component_xi && d > 0 {
            xi1 = rng.uniform();
            xi2 = rng.uniform();
        }
        let to_best = angular_diff(p.best_position[d], p.position[d]);
        let to_guide = angular_diff(guide[d], p.position[d]);
        let v = p.velocity[d] + config.beta1 * T::lit(xi1) * to_best + config.beta2 * T::lit(xi2) * to_guide;
        let v = v.max(-limit).min(limit);
        p.velocity[d] = v;
        p.position[d] = wrap_phase(p.position[d] + config.omega * v);
    }
}

/// One synchronous PSO round.
pub fn step_swarm<T: Real, E: SharpnessEvaluator<T>>(
    swarm: &mut Swarm<T>,
    config: &PsoConfig<T>,
    evaluator: &E,
    key: StreamKey,
) -> Result<()> {
    let round = key.child(swarm.iteration as u64);
    // (i) and (ii): sample the current position and re-sample the personal best.
    let samples: Vec<(SharpnessEstimate<T>, SharpnessEstimate<T>)> = swarm
        .particles
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let k = round.child(i as u64);
            let current = evaluator.evaluate(&GlsPolicy::new(p.position.clone()), k.child(PURPOSE_CURRENT))?;
            let best = evaluator.evaluate(&GlsPolicy::new(p.best_position.clone()), k.child(PURPOSE_BEST))?;
            Ok((current, best))
        })
        .collect::<Result<_>>()?;
    swarm.trials_used += 2 * (evaluator.trials_per_evaluation() * swarm.particles.len()) as u64;

    // (iii): fold the re-sample into S̄, then replace when the current sample wins.
    for (p, (current, best)) in swarm.particles.iter_mut().zip(samples) {
        let mean = match p.best_sharpness {
            Some(old) => merge_sharpness(&old, &best),
            None => best,
        };
        if current.sharpness > mean.sharpness {
            p.best_position = p.position.clone();
            p.best_sharpness = Some(current);
        } else {
            p.best_sharpness = Some(mean);
        }
    }

    // (iv)-(v): neighborhood best Λ, lowest index on ties.
    let n = swarm.particles.len();
    let guides: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut hood = ring_neighborhood(i, n, config.ring_radius);
            hood.sort_unstable();
            let mut best = hood[0];
            for &j in &hood[1..] {
                if swarm.particles[j].best_score() > swarm.particles[best].best_score() {
                    best = j;
                }
            }
            swarm.particles[best].best_position.clone()
        })
        .collect();

    // (vi): move.
    for (i, (p, guide)) in swarm.particles.iter_mut().zip(&guides).enumerate() {
        move_particle(p, guide, config, round.child(i as u64).child(PURPOSE_MOVE));
    }
    swarm.iteration += 1;
    Ok(())
}

/// Result of one optimization run.
#[derive(Debug, Clone)]
pub struct OptimizeOutcome<T> {
    pub policy: GlsPolicy<T>,
    /// Running-mean sharpness S̄ of the returned policy.
    pub sharpness: SharpnessEstimate<T>,
    pub trials_used: u64,
    pub iterations: usize,
    /// Best S̄ in the swarm after every round.
    pub best_history: Vec<T>,
}

/// Initial positions: uniform for N ≤ threshold, bootstrapped from the
/// (N−1)-qubit policy above it.
pub fn initial_positions<T: Real>(
    n_qubits: usize,
    config: &PsoConfig<T>,
    prev_policy: Option<&GlsPolicy<T>>,
    key: StreamKey,
) -> Result<Vec<Vec<T>>> {
    let init = key.child(LABEL_INIT);
    if n_qubits <= config.bootstrap_threshold {
        return Ok((0..config.swarm_size)
            .map(|i| uniform_init(n_qubits, &mut init.child(i as u64).child(0).stream()))
            .collect());
    }
    let prev = match prev_policy {
        Some(p) if p.len() + 1 == n_qubits => p,
        Some(p) => return arg(format!("bootstrap needs a {}-qubit policy, got {}", n_qubits - 1, p.len())),
        None => {
            return arg(format!(
                "N = {n_qubits} exceeds the bootstrap threshold {}; an (N−1)-qubit policy is required",
                config.bootstrap_threshold
            ))
        }
    };
    (0..config.swarm_size)
        .map(|i| bootstrap_init(prev, config.sigma1, config.sigma2, &mut init.child(i as u64).child(0).stream()))
        .collect()
}

/// Runs the full optimization with any evaluator.
pub fn optimize_with<T: Real, E: SharpnessEvaluator<T>>(
    n_qubits: usize,
    evaluator: &E,
    config: &PsoConfig<T>,
    prev_policy: Option<&GlsPolicy<T>>,
    key: StreamKey,
) -> Result<OptimizeOutcome<T>> {
    config.validate()?;
    if n_qubits == 0 {
        return arg("n_qubits must be at least 1");
    }
    let positions = initial_positions(n_qubits, config, prev_policy, key)?;
    let mut swarm = Swarm::from_positions(positions, config, key);
    let mut best_history = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        step_swarm(&mut swarm, config, evaluator, key)?;
        if let Some(b) = swarm.global_best() {
            best_history.push(swarm.particles[b].best_score());
        }
    }
    let b = swarm
        .global_best()
        .ok_or_else(|| crate::Error::Argument("optimization needs at least one iteration".into()))?;
    let p = &swarm.particles[b];
    Ok(OptimizeOutcome {
        policy: GlsPolicy::new(p.best_position.clone()),
        sharpness: p.best_sharpness.expect("evaluated"),
        trials_used: swarm.trials_used,
        iterations: swarm.iteration,
        best_history,
    })
}

/// Learns an N-qubit policy for `input_state` under `model` from simulated
/// trials with `config.trials_per_eval` trials per sample.
pub fn optimize_policy<T: Real>(
    input_state: &SymmetricState<T>,
    model: &NoiseModel<T>,
    config: &PsoConfig<T>,
    prev_policy: Option<&GlsPolicy<T>>,
    key: StreamKey,
) -> Result<OptimizeOutcome<T>> {
    let evaluator = SampledEvaluator {
        backend: Simulator::new(input_state.clone(), model)?,
        trials: config.trials_per_eval,
    };
    optimize_with(input_state.n_qubits(), &evaluator, config, prev_policy, key)
}
