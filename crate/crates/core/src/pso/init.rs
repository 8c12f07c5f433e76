//! Swarm initialization: uniform scratch starts and the bootstrap density
//! that seeds an N-qubit swarm around the best (N−1)-qubit policy.

use crate::error::{arg, Result};
use crate::gls::GlsPolicy;
use crate::rng::RngStream;
use crate::scalar::Real;

use rand_distr::{Distribution, StandardNormal};

/// Normal distribution truncated to `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormalParams<T> {
    pub mu: T,
    pub sigma: T,
}

impl<T: Real> TruncatedNormalParams<T> {
    pub fn new(mu: T, sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !mu.is_finite() {
            return arg(format!("truncated normal needs σ > 0 and finite μ (μ={mu}, σ={sigma})"));
        }
        Ok(TruncatedNormalParams { mu, sigma })
    }

    /// `∫_0^π exp(−(x−μ)²/2σ²) dx = √(π/2) σ [erf((π−μ)/√2σ) + erf(μ/√2σ)]`.
    pub fn normalizer(&self) -> f64 {
        self.ln_normalizer().exp()
    }

    /// Logarithm of [`normalizer`](Self::normalizer), finite even when the
    /// kernel's mass on the support underflows.
    pub fn ln_normalizer(&self) -> f64 {
        let (mu, sigma) = (self.mu.to_f64_lossy(), self.sigma.to_f64_lossy());
        let r2s = std::f64::consts::SQRT_2 * sigma;
        let (lo, hi) = (mu / r2s, (std::f64::consts::PI - mu) / r2s);
        // erf(hi) + erf(lo), written as a difference of erfc values when the
        // center is outside the support so nothing cancels.
        let ln_mass = if lo >= 0.0 && hi >= 0.0 {
            (2.0 - libm::erfc(lo) - libm::erfc(hi)).ln()
        } else {
            let (near, far) = if hi < 0.0 { (-hi, lo) } else { (-lo, hi) };
            let (a, b) = (ln_erfc(near), ln_erfc(far));
            a + (-(b - a).exp()).ln_1p()
        };
        ((std::f64::consts::PI / 2.0).sqrt() * sigma).ln() + ln_mass
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..std::f64::consts::PI).contains(&x) {
            return 0.0;
        }
        let z = (x - self.mu.to_f64_lossy()) / self.sigma.to_f64_lossy();
        (-0.5 * z * z - self.ln_normalizer()).exp()
    }
}

/// `ln erfc(x)`; the asymptotic series takes over before erfc underflows.
fn ln_erfc(x: f64) -> f64 {
    if x < 25.0 {
        return libm::erfc(x).ln();
    }
    let t = 1.0 / (2.0 * x * x);
    let series = 1.0 - t * (1.0 - 3.0 * t * (1.0 - 5.0 * t * (1.0 - 7.0 * t)));
    -x * x - (x * std::f64::consts::PI.sqrt()).ln() + series.ln()
}

/// Standard normal restricted to `[a, b]`, `a ≥ 0`, far in the upper tail.
/// Exponential proposals (Robert 1995) for wide intervals, uniform
/// proposals for narrow ones.
fn upper_tail(a: f64, b: f64, rng: &mut RngStream) -> f64 {
    if b - a < 1.0 {
        loop {
            let z = a + (b - a) * rng.uniform();
            if rng.uniform() <= (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a - (1.0 - rng.uniform()).ln() / lambda;
        if z <= b && rng.uniform() <= (-0.5 * (z - lambda) * (z - lambda)).exp() {
            return z;
        }
    }
}

/// Draws from the truncated normal on `[0, π)`.
///
/// With μ inside the support this is plain rejection from the untruncated
/// normal; the other branches only exist so that centers outside `[0, π)`
/// (negative increments) terminate quickly.
pub fn sample_truncated_normal<T: Real>(params: &TruncatedNormalParams<T>, rng: &mut RngStream) -> T {
    let pi = std::f64::consts::PI;
    let (mu, sigma) = (params.mu.to_f64_lossy(), params.sigma.to_f64_lossy());
    let (a, b) = (-mu / sigma, (pi - mu) / sigma);
    let z = if a <= 0.0 && b >= 0.0 {
        if b - a >= 1.0 {
            loop {
                let z: f64 = StandardNormal.sample(rng);
                if z >= a && z < b {
                    break z;
                }
            }
        } else {
            loop {
                let z = a + (b - a) * rng.uniform();
                if rng.uniform() <= (-0.5 * z * z).exp() {
                    break z;
                }
            }
        }
    } else if a > 0.0 {
        upper_tail(a, b, rng)
    } else {
        -upper_tail(-b, -a, rng)
    };
    let x = (mu + sigma * z).clamp(0.0, pi);
    // keep the support half open
    let x = if x >= pi { pi - pi * f64::EPSILON } else { x };
    T::lit(x)
}

/// Starting position for an N-qubit particle around the (N−1)-qubit policy
/// `prev`: increment k ~ TN(Δ′_k, σ1) for k < N and Δ_N ~ TN(Δ′_{N−1}, σ2).
///
/// `prev` is first brought to its canonical form so that every center lies
/// inside the `[0, π)` support.
pub fn bootstrap_init<T: Real>(prev: &GlsPolicy<T>, sigma1: T, sigma2: T, rng: &mut RngStream) -> Result<Vec<T>> {
    let prev = &prev.canonical();
    let last = *prev.deltas().last().ok_or_else(|| crate::Error::Argument("previous policy is empty".into()))?;
    let mut out = Vec::with_capacity(prev.len() + 1);
    for &d in prev.deltas() {
        out.push(sample_truncated_normal(&TruncatedNormalParams::new(d, sigma1)?, rng));
    }
    out.push(sample_truncated_normal(&TruncatedNormalParams::new(last, sigma2)?, rng));
    Ok(out)
}

/// Uniform position in `[−π, π)^n`.
pub fn uniform_init<T: Real>(n: usize, rng: &mut RngStream) -> Vec<T> {
    (0..n)
        .map(|_| T::lit(std::f64::consts::TAU * rng.uniform() - std::f64::consts::PI))
        .collect()
}
