//! End-to-end trial runs of a GLS policy through the simulated channel.

use crate::channel::{rotation_matrix_unchecked, ChannelSampler, NoiseModel};
use crate::error::{arg, Result};
use crate::gls::{final_estimate, initial_state, on_loss, on_measurement, DeltaIndexing, GlsPolicy};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::symstate::{identity, StateBuffer, SymmetricState};

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord<T> {
    pub true_phi: T,
    pub estimate: T,
    /// ς = wrap(φ − φ̃).
    pub error_sigma: T,
    pub measured_count: usize,
    pub informative: bool,
    /// Measured outcomes, `u_1` in bit 0. Only the first 64 are kept.
    pub history: u64,
    /// Bit `m` set when photon `m` was lost.
    pub lost_mask: u64,
}

/// Anything that can execute a trial of a policy at a given true phase:
/// the simulator here, or a physical experiment.
pub trait TrialBackend<T: Real>: Sync {
    /// Per-worker reusable state.
    type Scratch: Send;

    fn n_qubits(&self) -> usize;

    fn scratch(&self) -> Self::Scratch;

    fn run_trial(&self, scratch: &mut Self::Scratch, policy: &GlsPolicy<T>, true_phi: T, rng: &mut RngStream)
        -> Result<TrialRecord<T>>;
}

/// Photon-by-photon simulation of the noisy, lossy interferometer acting on
/// a symmetric input state.
#[derive(Debug, Clone)]
pub struct Simulator<T: Real> {
    state: SymmetricState<T>,
    sampler: ChannelSampler<T>,
    indexing: DeltaIndexing,
}

impl<T: Real> Simulator<T> {
    pub fn new(state: SymmetricState<T>, model: &NoiseModel<T>) -> Result<Self> {
        Ok(Simulator {
            state,
            sampler: ChannelSampler::new(model)?,
            indexing: DeltaIndexing::Measurement,
        })
    }

    pub fn with_indexing(mut self, indexing: DeltaIndexing) -> Self {
        self.indexing = indexing;
        self
    }

    pub fn state(&self) -> &SymmetricState<T> {
        &self.state
    }

    pub fn model(&self) -> &NoiseModel<T> {
        self.sampler.model()
    }
}

impl<T: Real> TrialBackend<T> for Simulator<T> {
    type Scratch = StateBuffer<T>;

    fn n_qubits(&self) -> usize {
        self.state.n_qubits()
    }

    fn scratch(&self) -> StateBuffer<T> {
        StateBuffer::new(self.state.n_qubits())
    }

    fn run_trial(
        &self,
        buf: &mut StateBuffer<T>,
        policy: &GlsPolicy<T>,
        true_phi: T,
        rng: &mut RngStream,
    ) -> Result<TrialRecord<T>> {
        let n = self.state.n_qubits();
        if policy.len() < n {
            return arg(format!("policy has {} increments for {n} qubits", policy.len()));
        }
        buf.load(&self.state);
        let mut ctrl = initial_state::<T>();
        let (mut history, mut lost_mask) = (0u64, 0u64);
        for photon in 0..n {
            let draw = self.sampler.sample(true_phi, ctrl.feedback_phi, rng);
            if draw.lost {
                // Hidden measurement: the outcome is drawn but never reported.
                let id = identity();
                let w = buf.basis_weights();
                let u = pick(w, rng);
                buf.collapse(&id, u, w[u as usize])?;
                ctrl = on_loss(&ctrl, self.indexing);
                if photon < 64 {
                    lost_mask |= 1 << photon;
                }
                continue;
            }
            let u = if self.sampler.has_axis_noise() {
                let unitary = rotation_matrix_unchecked(draw.theta, draw.axis);
                let w = buf.branch_weights(&unitary);
                let u = pick(w, rng);
                buf.collapse(&unitary, u, w[u as usize])?;
                u
            } else {
                let (s, c) = draw.theta.sin_cos();
                let p0 = buf.zero_weight_real(c, s);
                let w = [p0, (T::one() - p0).max(T::zero())];
                let u = pick(w, rng);
                buf.collapse_real(c, s, u, w[u as usize])?;
                u
            };
            if ctrl.measured_count < 64 {
                history |= (u as u64) << ctrl.measured_count;
            }
            ctrl = on_measurement(policy, &ctrl, u)?;
        }
        let est = final_estimate(&ctrl);
        Ok(TrialRecord {
            true_phi,
            estimate: est.estimate,
            error_sigma: est.error(true_phi),
            measured_count: ctrl.measured_count,
            informative: est.informative,
            history,
            lost_mask,
        })
    }
}

#[inline]
fn pick<T: Real>(w: [T; 2], rng: &mut RngStream) -> u8 {
    let total = (w[0] + w[1]).to_f64_lossy();
    if rng.uniform() * total < w[0].to_f64_lossy() {
        0
    } else {
        1
    }
}

/// One trial of `policy` on `input_state` through `model` at phase `true_phi`.
pub fn run_trial<T: Real>(
    policy: &GlsPolicy<T>,
    input_state: &SymmetricState<T>,
    model: &NoiseModel<T>,
    true_phi: T,
    rng: &mut RngStream,
) -> Result<TrialRecord<T>> {
    let sim = Simulator::new(input_state.clone(), model)?;
    let mut scratch = sim.scratch();
    sim.run_trial(&mut scratch, policy, true_phi, rng)
}

/// Uniform prior draw on `[0, 2π)`.
#[inline]
pub(crate) fn draw_phase<T: Real>(rng: &mut RngStream) -> T {
    T::lit(rng.uniform() * std::f64::consts::TAU)
}
