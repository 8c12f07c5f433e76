//! Policy evaluation: trial simulation, sampled and exact sharpness, and
//! power-law fits of the Holevo variance.

mod exact;
mod fit;
mod sharpness;
mod trial;

pub use exact::{default_nodes, exact_sharpness, exact_sharpness_with_nodes, history_probabilities, MAX_EXACT_QUBITS};
pub use fit::{fit_scaling, ScalingFit};
pub use sharpness::{holevo_variance, merge_sharpness, sample_sharpness, sample_trials, SharpnessEstimate};
pub use trial::{run_trial, Simulator, TrialBackend, TrialRecord};
