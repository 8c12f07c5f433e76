use rayon::prelude::*;

use crate::error::{arg, Result};
use crate::gls::GlsPolicy;
use crate::rng::StreamKey;
use crate::scalar::Real;

use super::trial::{draw_phase, TrialBackend, TrialRecord};

/// Trials per work unit. Fixed so that reductions happen in the same order
/// for every thread count.
const CHUNK: usize = 128;

/// Sharpness of a policy's error distribution and the derived Holevo
/// variance `V_H = S⁻² − 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessEstimate<T> {
    pub sharpness: T,
    /// Trials behind the value; zero for an exact evaluation.
    pub trials: usize,
    pub holevo_variance: T,
    /// Number of independent sharpness samples averaged into `sharpness`.
    pub mean_count: u32,
    /// Monte Carlo standard error of `sharpness`; zero when exact.
    pub std_error: T,
}

/// `S⁻² − 1`, or `+∞` for zero sharpness.
pub fn holevo_variance<T: Real>(sharpness: T) -> T {
    if sharpness <= T::zero() {
        T::infinity()
    } else {
        sharpness.powi(-2) - T::one()
    }
}

impl<T: Real> SharpnessEstimate<T> {
    pub fn exact(sharpness: T) -> Self {
        SharpnessEstimate {
            sharpness,
            trials: 0,
            holevo_variance: holevo_variance(sharpness),
            mean_count: 1,
            std_error: T::zero(),
        }
    }

    /// Sharpness of a batch of estimation errors: `|Σ e^{iς_k}| / K`.
    pub fn from_errors(errors: &[T]) -> Result<Self> {
        if errors.is_empty() {
            return arg("at least one trial is required");
        }
        let mut acc = PhasorSums::default();
        errors.iter().for_each(|e| acc.push(e.to_f64_lossy()));
        Ok(acc.finish())
    }

    /// Standard error of `holevo_variance` by the delta method.
    pub fn holevo_std_error(&self) -> T {
        if self.sharpness <= T::zero() {
            return T::infinity();
        }
        T::lit(2.0) * self.std_error / self.sharpness.powi(3)
    }
}

/// Running sums of the error phasors.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct PhasorSums {
    n: usize,
    c: f64,
    s: f64,
    cc: f64,
    ss: f64,
    cs: f64,
}

impl PhasorSums {
    #[inline]
    pub(crate) fn push(&mut self, err: f64) {
        let (s, c) = err.sin_cos();
        self.n += 1;
        self.c += c;
        self.s += s;
        self.cc += c * c;
        self.ss += s * s;
        self.cs += c * s;
    }

    fn merge(mut self, o: &PhasorSums) -> Self {
        self.n += o.n;
        self.c += o.c;
        self.s += o.s;
        self.cc += o.cc;
        self.ss += o.ss;
        self.cs += o.cs;
        self
    }

    pub(crate) fn finish<T: Real>(&self) -> SharpnessEstimate<T> {
        let k = self.n as f64;
        let (mc, ms) = (self.c / k, self.s / k);
        let sharp = (mc * mc + ms * ms).sqrt().min(1.0);
        // variance of the phasor's projection on the mean direction
        let (dc, ds) = if sharp > 0.0 { (mc / sharp, ms / sharp) } else { (1.0, 0.0) };
        let var_c = self.cc / k - mc * mc;
        let var_s = self.ss / k - ms * ms;
        let cov = self.cs / k - mc * ms;
        let var = (dc * dc * var_c + ds * ds * var_s + 2.0 * dc * ds * cov).max(0.0);
        let sharpness = T::lit(sharp);
        SharpnessEstimate {
            sharpness,
            trials: self.n,
            holevo_variance: holevo_variance(sharpness),
            mean_count: 1,
            std_error: T::lit((var / k).sqrt()),
        }
    }
}

/// Runs trials `0..k` with uniformly drawn phases (or the fixed phase given)
/// and hands each record to `visit` in chunk order.
fn for_each_chunk<T, B, A, F>(backend: &B, policy: &GlsPolicy<T>, k: usize, key: StreamKey, phase: Option<T>, visit: F) -> Result<Vec<A>>
where
    T: Real,
    B: TrialBackend<T>,
    A: Send,
    F: Fn(&mut A, &TrialRecord<T>) + Sync,
    A: Default,
{
    let chunks = k.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut scratch = backend.scratch();
            let mut acc = A::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(k) {
                let mut rng = key.child(i as u64).stream();
                let phi = match phase {
                    Some(p) => p,
                    None => draw_phase(&mut rng),
                };
                let rec = backend.run_trial(&mut scratch, policy, phi, &mut rng)?;
                visit(&mut acc, &rec);
            }
            Ok(acc)
        })
        .collect()
}

/// Monte Carlo sharpness from `trials` runs at uniformly random phases.
///
/// Trial `k` draws from stream `key.child(k)`, so the result depends only on
/// `key`, never on the number of worker threads.
pub fn sample_sharpness<T: Real, B: TrialBackend<T>>(
    backend: &B,
    policy: &GlsPolicy<T>,
    trials: usize,
    key: StreamKey,
) -> Result<SharpnessEstimate<T>> {
    if trials == 0 {
        return arg("at least one trial is required");
    }
    let parts = for_each_chunk(backend, policy, trials, key, None, |acc: &mut PhasorSums, rec| {
        acc.push(rec.error_sigma.to_f64_lossy())
    })?;
    let total = parts.iter().fold(PhasorSums::default(), |a, b| a.merge(b));
    Ok(total.finish())
}

/// Full trial records, in trial order. `phase` fixes the true phase instead
/// of drawing it from the uniform prior.
pub fn sample_trials<T: Real, B: TrialBackend<T>>(
    backend: &B,
    policy: &GlsPolicy<T>,
    trials: usize,
    key: StreamKey,
    phase: Option<T>,
) -> Result<Vec<TrialRecord<T>>> {
    let parts = for_each_chunk(backend, policy, trials, key, phase, |acc: &mut Vec<TrialRecord<T>>, rec| {
        acc.push(*rec)
    })?;
    Ok(parts.into_iter().flatten().collect())
}

/// Count-weighted mean of two sharpness estimates of the same policy.
pub fn merge_sharpness<T: Real>(a: &SharpnessEstimate<T>, b: &SharpnessEstimate<T>) -> SharpnessEstimate<T> {
    let (wa, wb) = (T::from_u32(a.mean_count).unwrap(), T::from_u32(b.mean_count).unwrap());
    let w = wa + wb;
    let sharpness = (a.sharpness * wa + b.sharpness * wb) / w;
    let std_error = ((a.std_error * wa).powi(2) + (b.std_error * wb).powi(2)).sqrt() / w;
    SharpnessEstimate {
        sharpness,
        trials: a.trials + b.trials,
        holevo_variance: holevo_variance(sharpness),
        mean_count: a.mean_count + b.mean_count,
        std_error,
    }
}
