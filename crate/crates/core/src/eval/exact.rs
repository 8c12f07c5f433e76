//! Exact sharpness for noiseless, lossless interferometry by enumerating all
//! 2^N measurement histories.
//!
//! For a fixed phase φ every history probability `P(h|φ)` follows from the
//! branch amplitudes, and `Σ_h P(h|φ) e^{i(φ − φ̃(h))}` is a trigonometric
//! polynomial of degree at most N+1 in φ. An equidistant trapezoid rule with
//! more than N+1 nodes therefore integrates it exactly over the uniform prior.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{arg, Error, Result};
use crate::gls::GlsPolicy;
use crate::scalar::{wrap_phase, Real};
use crate::symstate::SymmetricState;

/// Largest N accepted by the exhaustive routines.
pub const MAX_EXACT_QUBITS: usize = 20;

/// Default quadrature size for an N-qubit evaluation.
pub fn default_nodes(n_qubits: usize) -> usize {
    4 * (n_qubits + 2)
}

fn check<T: Real>(policy: &GlsPolicy<T>, state: &SymmetricState<T>) -> Result<usize> {
    let n = state.n_qubits();
    if n > MAX_EXACT_QUBITS {
        return Err(Error::Refused(format!(
            "exact evaluation of {n} qubits needs 2^{n} histories (limit {MAX_EXACT_QUBITS})"
        )));
    }
    if policy.len() < n {
        return arg(format!("policy has {} increments for {n} qubits", policy.len()));
    }
    Ok(n)
}

/// Depth-first walk over histories at one phase value.
struct Walker<'a, T: Real> {
    deltas: &'a [T],
    phi: T,
    sq: Vec<T>,
    /// `levels[d]` holds the unnormalized branch state after d outcomes.
    levels: Vec<Vec<Complex<T>>>,
}

impl<'a, T: Real> Walker<'a, T> {
    fn new(deltas: &'a [T], state: &SymmetricState<T>, phi: T) -> Self {
        let n = state.n_qubits();
        let mut levels: Vec<Vec<Complex<T>>> = (0..=n).map(|d| vec![Complex::new(T::zero(), T::zero()); n + 1 - d]).collect();
        levels[0].copy_from_slice(state.amplitudes());
        Walker {
            deltas,
            phi,
            sq: (0..=n).map(|k| T::from_usize(k).unwrap().sqrt()).collect(),
            levels,
        }
    }

    /// Calls `leaf(history, probability, final_feedback)` for every history.
    fn walk<F: FnMut(u64, T, T)>(&mut self, depth: usize, history: u64, feedback: T, leaf: &mut F) {
        let n = self.levels.len() - 1;
        if depth == n {
            leaf(history, self.levels[n][0].norm_sqr(), feedback);
            return;
        }
        let l = n - depth;
        let inv = self.sq[l].recip();
        let (s, c) = ((self.phi - feedback) * T::lit(0.5)).sin_cos();
        // U_y(θ) rows: (c, −s) for u=0 and (s, c) for u=1.
        let rows = [(c, -s), (s, c)];
        for (u, &(r0, r1)) in rows.iter().enumerate() {
            {
                let (head, tail) = self.levels.split_at_mut(depth + 1);
                let a = &head[depth];
                let b = &mut tail[0];
                for m in 0..l {
                    let x = a[m] * (self.sq[l - m] * inv);
                    let y = a[m + 1] * (self.sq[m + 1] * inv);
                    b[m] = x * r0 + y * r1;
                }
            }
            let delta = self.deltas[depth];
            let next = wrap_phase(if u == 0 { feedback - delta } else { feedback + delta });
            self.walk(depth + 1, history | ((u as u64) << depth), next, leaf);
        }
    }
}

/// `P(h|φ)` for every history `h` (bit m holds `u_{m+1}`) of a noiseless,
/// lossless run.
pub fn history_probabilities<T: Real>(policy: &GlsPolicy<T>, state: &SymmetricState<T>, phi: T) -> Result<Vec<T>> {
    let n = check(policy, state)?;
    let mut probs = vec![T::zero(); 1 << n];
    Walker::new(policy.deltas(), state, phi).walk(0, 0, T::zero(), &mut |h, p, _| probs[h as usize] = p);
    Ok(probs)
}

/// Exact sharpness using `nodes` quadrature points on `[0, 2π)`.
pub fn exact_sharpness_with_nodes<T: Real>(policy: &GlsPolicy<T>, state: &SymmetricState<T>, nodes: usize) -> Result<T> {
    check(policy, state)?;
    if nodes <= state.n_qubits() + 1 {
        return arg(format!("{nodes} quadrature nodes cannot integrate degree {}", state.n_qubits() + 1));
    }
    let parts: Vec<Complex<f64>> = (0..nodes)
        .into_par_iter()
        .map(|j| {
            let phi = T::lit(std::f64::consts::TAU * j as f64 / nodes as f64);
            let mut acc = Complex::new(0.0f64, 0.0);
            Walker::new(policy.deltas(), state, phi).walk(0, 0, T::zero(), &mut |_, p, est| {
                acc += Complex::from_polar(p.to_f64_lossy(), (phi - est).to_f64_lossy());
            });
            acc
        })
        .collect();
    let total: Complex<f64> = parts.iter().sum::<Complex<f64>>() / nodes as f64;
    Ok(T::lit(total.norm().min(1.0)))
}

/// Exact sharpness `S = |(1/2π) ∫ dφ Σ_h P(h|φ) e^{i(φ − φ̃(h))}|`.
pub fn exact_sharpness<T: Real>(policy: &GlsPolicy<T>, state: &SymmetricState<T>) -> Result<T> {
    exact_sharpness_with_nodes(policy, state, default_nodes(state.n_qubits()))
}
