//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line to
//! stderr (uncaptured) and then asserts.
//!
//! The learning criteria default to a smoke budget (100 PSO iterations, one
//! restart); set `ACCEPTANCE_FULL=1` for the full budget (300 iterations,
//! four restarts). Trained policies are cached under `ACCEPTANCE_OUT`, or
//! the cargo target tmp dir, and resumed on the next run.

mod cli;
mod criteria;
