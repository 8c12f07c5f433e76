//! Learning adaptive feedback policies for interferometric phase estimation.
//!
//! An N-photon entangled input state passes through a noisy, lossy
//! interferometer one photon at a time; after each detection a generalized
//! logarithmic search (GLS) controller shifts the feedback phase. Policies,
//! i.e. the controller's increment vectors, are learned by particle swarm
//! optimization against the sampled sharpness of the estimation error.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix the scalar to `f64`.

pub mod channel;
pub mod cli;
pub mod error;
pub mod eval;
pub mod gls;
pub mod pso;
pub mod rng;
pub mod scalar;
pub mod symstate;

pub use channel::{rotation_matrix, sample_channel, visibility, ChannelDraw, ChannelSampler, NoiseKind, NoiseModel};
pub use error::{Error, Result};
pub use eval::{
    exact_sharpness, fit_scaling, merge_sharpness, run_trial, sample_sharpness, ScalingFit, SharpnessEstimate, Simulator,
    TrialBackend, TrialRecord,
};
pub use gls::{ls_policy, DeltaIndexing, GlsPolicy};
pub use pso::{optimize_policy, sweep, PsoConfig};
pub use rng::{RngStream, StreamKey};
pub use scalar::{wrap_phase, Real};
pub use symstate::{make_optimal_input_state, make_product_zero_state, InputStateKind, SymmetricState};

pub type SymmetricState64 = symstate::SymmetricState<f64>;
pub type NoiseModel64 = channel::NoiseModel<f64>;
pub type GlsPolicy64 = gls::GlsPolicy<f64>;
pub type SharpnessEstimate64 = eval::SharpnessEstimate<f64>;
pub type Simulator64 = eval::Simulator<f64>;
pub type ScalingFit64 = eval::ScalingFit<f64>;
pub type PsoConfig64 = pso::PsoConfig<f64>;

pub type SymmetricState32 = symstate::SymmetricState<f32>;
pub type GlsPolicy32 = gls::GlsPolicy<f32>;
pub type Simulator32 = eval::Simulator<f32>;
