//! Generalized logarithmic search (GLS) feedback controller.
//!
//! A GLS policy is a vector of increments `(Δ_1, …, Δ_N)`. Starting from
//! `Φ_0 = 0`, the m-th successful measurement `u_m` moves the feedback phase
//! to `Φ_m = Φ_{m−1} − (−1)^{u_m} Δ_m`; the final estimate is the last
//! feedback phase. Lost photons leave `Φ` untouched.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::scalar::{wrap_phase, Real};

/// Largest tree depth [`export_decision_tree`] will emit.
pub const MAX_TREE_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct GlsPolicy<T> {
    deltas: Vec<T>,
}

impl<T: Real> GlsPolicy<T> {
    /// Builds a policy, wrapping every increment into `[−π, π)`.
    pub fn new(deltas: Vec<T>) -> Self {
        GlsPolicy {
            deltas: deltas.into_iter().map(wrap_phase).collect(),
        }
    }

    pub fn deltas(&self) -> &[T] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.deltas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    /// The first `n` increments as an `n`-qubit policy.
    pub fn prefix(&self, n: usize) -> Self {
        GlsPolicy {
            deltas: self.deltas[..n.min(self.deltas.len())].to_vec(),
        }
    }

    /// Same policy on one more qubit, ignoring that qubit's outcome.
    pub fn extended_ignoring_last(&self) -> Self {
        let mut deltas = self.deltas.clone();
        deltas.push(T::zero());
        GlsPolicy { deltas }
    }

    /// Equivalent policy with every increment in `[0, π)`.
    ///
    /// Adding π to `Δ_m` shifts every later feedback phase by π, which swaps
    /// the outcome probabilities of all later photons; negating the later
    /// increments undoes the swap, and the estimate moves by the constant π.
    /// Sharpness is therefore unchanged for any input state whenever the
    /// rotation axis is fixed (θ noise and loss are fine, axis noise is not).
    pub fn canonical(&self) -> Self {
        let pi = T::PI();
        let mut deltas = self.deltas.clone();
        for m in 0..deltas.len() {
            if deltas[m] < T::zero() {
                deltas[m] = deltas[m] + pi;
                for d in &mut deltas[m + 1..] {
                    *d = wrap_phase(-*d);
                }
            }
            if deltas[m] >= pi {
                deltas[m] = deltas[m] - pi;
            }
        }
        GlsPolicy { deltas }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.deltas.iter().map(|d| d.to_f64_lossy()).collect()
    }
}

/// `(π/2, π/4, …, π/2^N)`.
pub fn ls_policy<T: Real>(n_qubits: usize) -> Result<GlsPolicy<T>> {
    if n_qubits == 0 {
        return arg("n_qubits must be at least 1");
    }
    let mut d = T::FRAC_PI_2();
    let mut deltas = Vec::with_capacity(n_qubits);
    for _ in 0..n_qubits {
        deltas.push(d);
        d = d * T::lit(0.5);
    }
    Ok(GlsPolicy { deltas })
}

/// Which increment a measurement consumes when photons are lost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaIndexing {
    /// Δ_M for the M-th successful measurement; losses consume nothing.
    #[default]
    Measurement,
    /// Δ_m for the m-th photon; a lost photon skips its increment.
    Photon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState<T> {
    /// Current feedback phase Φ, in `[−π, π)`.
    pub feedback_phi: T,
    pub measured_count: usize,
    /// Index of the next increment to consume.
    pub next_delta: usize,
    pub last_outcome: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate<T> {
    /// φ̃ in `[−π, π)`.
    pub estimate: T,
    /// False when every photon was lost; the estimate then defaults to 0.
    pub informative: bool,
}

impl<T: Real> PhaseEstimate<T> {
    /// ς = wrap(φ − φ̃).
    pub fn error(&self, true_phi: T) -> T {
        wrap_phase(true_phi - self.estimate)
    }
}

pub fn initial_state<T: Real>() -> ControllerState<T> {
    ControllerState {
        feedback_phi: T::zero(),
        measured_count: 0,
        next_delta: 0,
        last_outcome: None,
    }
}

#[inline]
pub fn on_measurement<T: Real>(policy: &GlsPolicy<T>, state: &ControllerState<T>, outcome: u8) -> Result<ControllerState<T>> {
    if outcome > 1 {
        return arg(format!("outcome {outcome} is not a bit"));
    }
    let delta = *policy.deltas.get(state.next_delta).ok_or(Error::Capacity {
        deltas: policy.len(),
        requested: state.next_delta + 1,
    })?;
    let step = if outcome == 0 { delta } else { -delta };
    Ok(ControllerState {
        feedback_phi: wrap_phase(state.feedback_phi - step),
        measured_count: state.measured_count + 1,
        next_delta: state.next_delta + 1,
        last_outcome: Some(outcome),
    })
}

#[inline]
pub fn on_loss<T: Real>(state: &ControllerState<T>, indexing: DeltaIndexing) -> ControllerState<T> {
    match indexing {
        DeltaIndexing::Measurement => *state,
        DeltaIndexing::Photon => ControllerState {
            next_delta: state.next_delta + 1,
            ..*state
        },
    }
}

/// The estimate is the feedback phase after the last update, `Φ_M`.
#[inline]
pub fn final_estimate<T: Real>(state: &ControllerState<T>) -> PhaseEstimate<T> {
    if state.measured_count == 0 {
        PhaseEstimate {
            estimate: T::zero(),
            informative: false,
        }
    } else {
        PhaseEstimate {
            estimate: state.feedback_phi,
            informative: true,
        }
    }
}

/// Feedback phase reached after the outcome sequence `history` (oldest first).
pub fn feedback_after<T: Real>(policy: &GlsPolicy<T>, history: &[u8]) -> Result<T> {
    let mut s = initial_state();
    for &u in history {
        s = on_measurement(policy, &s, u)?;
    }
    Ok(s.feedback_phi)
}

/// DOT rendering of the policy's decision tree: inner nodes carry Φ_m for
/// their history, leaves the final estimate; `u = 0` branches left.
pub fn export_decision_tree<T: Real>(policy: &GlsPolicy<T>, n_qubits: usize) -> Result<String> {
    if n_qubits != policy.len() {
        return arg(format!("tree depth {n_qubits} does not match policy length {}", policy.len()));
    }
    if n_qubits > MAX_TREE_DEPTH {
        return Err(Error::Refused(format!(
            "decision tree of depth {n_qubits} has 2^{} nodes (limit depth {MAX_TREE_DEPTH})",
            n_qubits + 1
        )));
    }
    let mut out = String::new();
    writeln!(out, "digraph gls_policy {{").unwrap();
    writeln!(out, "  ordering=out;").unwrap();
    writeln!(out, "  node [fontname=\"Helvetica\"];").unwrap();
    let name = |depth: usize, bits: usize| -> String {
        if depth == 0 {
            "root".to_string()
        } else {
            // bits holds u_1 in its most significant position
            format!("h{:0width$b}", bits, width = depth)
        }
    };
    // Breadth-first so each level is contiguous in the output.
    let mut level: Vec<(usize, ControllerState<T>)> = vec![(0, initial_state())];
    for depth in 0..=n_qubits {
        for (bits, state) in &level {
            let id = name(depth, *bits);
            let phi = state.feedback_phi.to_f64_lossy();
            if depth == n_qubits {
                writeln!(out, "  {id} [shape=box, label=\"est={phi:.6}\"];").unwrap();
            } else {
                writeln!(out, "  {id} [shape=ellipse, label=\"Phi{depth}={phi:.6}\"];").unwrap();
            }
        }
        if depth == n_qubits {
            break;
        }
        let mut next = Vec::with_capacity(level.len() * 2);
        for (bits, state) in &level {
            for u in 0..2u8 {
                let child_bits = (bits << 1) | u as usize;
                writeln!(out, "  {} -> {} [label=\"u={u}\"];", name(depth, *bits), name(depth + 1, child_bits)).unwrap();
                next.push((child_bits, on_measurement(policy, state, u)?));
            }
        }
        level = next;
    }
    writeln!(out, "}}").unwrap();
    Ok(out)
}
