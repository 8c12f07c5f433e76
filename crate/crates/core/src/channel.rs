//! Per-photon interferometer channel.
//!
//! The noisy channel is a mixture of rotations `U_n(θ) = exp(−iθ σ·n)` with
//! `⟨θ⟩ = (φ − Φ)/2` and `⟨n⟩ = (0, 1, 0)`, plus state-independent loss. It is
//! unravelled per photon: each photon gets one sampled `(θ, n)` or is lost.

use num_complex::Complex;
use rand_distr::{Distribution, SkewNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::symstate::Mat2;

pub use crate::rng::StreamKey;

/// Largest |skewness| reachable by the skew-normal family.
pub const MAX_SKEWNESS: f64 = 0.9952;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Ideal,
    Gaussian,
    SkewNormal,
}

/// Noise and loss parameters of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct NoiseModel<T> {
    pub kind: NoiseKind,
    /// Standard deviation of θ, radians.
    pub sigma_theta: T,
    /// Per-component standard deviation of the rotation axis around (0,1,0).
    pub sigma_n: [T; 3],
    /// Third standardized moment; only read for [`NoiseKind::SkewNormal`].
    #[serde(default)]
    pub skewness_gamma: T,
    /// Probability that a photon is lost.
    pub loss_eta: T,
}

impl<T: Real> NoiseModel<T> {
    pub fn ideal() -> Self {
        NoiseModel {
            kind: NoiseKind::Ideal,
            sigma_theta: T::zero(),
            sigma_n: [T::zero(); 3],
            skewness_gamma: T::zero(),
            loss_eta: T::zero(),
        }
    }

    pub fn gaussian(sigma_theta: T, sigma_n: T, loss_eta: T) -> Self {
        NoiseModel {
            kind: NoiseKind::Gaussian,
            sigma_theta,
            sigma_n: [sigma_n; 3],
            skewness_gamma: T::zero(),
            loss_eta,
        }
    }

    pub fn skew_normal(sigma_theta: T, sigma_n: T, skewness_gamma: T, loss_eta: T) -> Self {
        NoiseModel {
            kind: NoiseKind::SkewNormal,
            skewness_gamma,
            ..Self::gaussian(sigma_theta, sigma_n, loss_eta)
        }
    }

    pub fn with_loss(mut self, loss_eta: T) -> Self {
        self.loss_eta = loss_eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss_eta >= T::zero() && self.loss_eta <= T::one()) {
            return arg(format!("loss rate {} outside [0, 1]", self.loss_eta));
        }
        if !(self.sigma_theta >= T::zero()) || self.sigma_n.iter().any(|s| !(*s >= T::zero())) {
            return arg("noise standard deviations must be nonnegative");
        }
        if !(self.skewness_gamma.abs().to_f64_lossy() < MAX_SKEWNESS) {
            return arg(format!(
                "|skewness| = {} is not reachable by a skew-normal distribution (max {MAX_SKEWNESS})",
                self.skewness_gamma.abs()
            ));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.kind == NoiseKind::Ideal || (self.sigma_theta == T::zero() && self.sigma_n.iter().all(|s| s.is_zero()))
    }
}

impl<T: Real> Default for NoiseModel<T> {
    fn default() -> Self {
        Self::ideal()
    }
}

/// Skew-normal `SN(ξ, ω, α)` standardized to zero mean and unit variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewNormalShape {
    /// `δ = α/√(1+α²)`.
    pub delta: f64,
    /// `ω/σ`: scale relative to the target standard deviation.
    pub scale: f64,
    /// `(ξ − mean)/σ`.
    pub offset: f64,
    dist: SkewNormal<f64>,
}

impl SkewNormalShape {
    /// Moment matching: solves the shape so the standardized third moment
    /// equals `gamma`.
    pub fn from_skewness(gamma: f64) -> Result<Self> {
        if !(gamma.abs() < MAX_SKEWNESS) {
            return arg(format!("skewness {gamma} outside the skew-normal range"));
        }
        let pi = std::f64::consts::PI;
        let g = gamma.abs().powf(2.0 / 3.0);
        let c = ((4.0 - pi) / 2.0).powf(2.0 / 3.0);
        let delta = gamma.signum() * ((pi / 2.0) * g / (g + c)).sqrt();
        let b = (2.0 / pi).sqrt();
        let scale = (1.0 - b * b * delta * delta).sqrt().recip();
        let offset = -scale * delta * b;
        let alpha = delta / (1.0 - delta * delta).sqrt();
        let dist = SkewNormal::new(offset, scale, alpha).map_err(|e| crate::Error::Argument(e.to_string()))?;
        Ok(SkewNormalShape {
            delta,
            scale,
            offset,
            dist,
        })
    }

    /// Shape parameter α of the density `2φ(z)Φ(αz)`.
    pub fn alpha(&self) -> f64 {
        self.delta / (1.0 - self.delta * self.delta).sqrt()
    }

    /// Standardized draw: mean 0, variance 1, skewness as constructed.
    #[inline]
    pub fn sample_standard(&self, rng: &mut RngStream) -> f64 {
        self.dist.sample(rng)
    }
}

/// One photon's realization of the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDraw<T> {
    pub lost: bool,
    pub theta: T,
    pub axis: [T; 3],
}

/// Precomputed sampler for a validated [`NoiseModel`].
#[derive(Debug, Clone, Copy)]
pub struct ChannelSampler<T> {
    model: NoiseModel<T>,
    skew: Option<SkewNormalShape>,
    loss: f64,
    sigma_theta: f64,
    sigma_n: [f64; 3],
    axis_noise: bool,
}

impl<T: Real> ChannelSampler<T> {
    pub fn new(model: &NoiseModel<T>) -> Result<Self> {
        model.validate()?;
        let skew = match model.kind {
            NoiseKind::SkewNormal => Some(SkewNormalShape::from_skewness(model.skewness_gamma.to_f64_lossy())?),
            _ => None,
        };
        let noisy = model.kind != NoiseKind::Ideal;
        let sigma_n = model.sigma_n.map(|s| if noisy { s.to_f64_lossy() } else { 0.0 });
        Ok(ChannelSampler {
            model: *model,
            skew,
            loss: model.loss_eta.to_f64_lossy(),
            sigma_theta: if noisy { model.sigma_theta.to_f64_lossy() } else { 0.0 },
            sigma_n,
            axis_noise: sigma_n.iter().any(|&s| s > 0.0),
        })
    }

    /// Whether draws can tilt the rotation axis away from y.
    pub(crate) fn has_axis_noise(&self) -> bool {
        self.axis_noise
    }

    pub fn model(&self) -> &NoiseModel<T> {
        &self.model
    }

    #[inline]
    fn noise(&self, sigma: f64, rng: &mut RngStream) -> f64 {
        match self.skew {
            Some(shape) => sigma * shape.sample_standard(rng),
            None => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
        }
    }

    /// Draws loss, θ and the rotation axis for one photon.
    #[inline]
    pub fn sample(&self, phi: T, feedback: T, rng: &mut RngStream) -> ChannelDraw<T> {
        let y_axis = [T::zero(), T::one(), T::zero()];
        if self.loss > 0.0 && rng.uniform() < self.loss {
            return ChannelDraw {
                lost: true,
                theta: T::zero(),
                axis: y_axis,
            };
        }
        let mean = (phi - feedback) * T::lit(0.5);
        let theta = if self.sigma_theta > 0.0 {
            mean + T::lit(self.noise(self.sigma_theta, rng))
        } else {
            mean
        };
        let axis = if self.axis_noise {
            let mut v = [0.0, 1.0, 0.0];
            for (c, &s) in v.iter_mut().zip(&self.sigma_n) {
                if s > 0.0 {
                    *c += self.noise(s, rng);
                }
            }
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            v.map(|c| T::lit(c / norm))
        } else {
            y_axis
        };
        ChannelDraw {
            lost: false,
            theta,
            axis,
        }
    }
}

pub fn sample_channel<T: Real>(model: &NoiseModel<T>, phi: T, feedback: T, rng: &mut RngStream) -> Result<ChannelDraw<T>> {
    Ok(ChannelSampler::new(model)?.sample(phi, feedback, rng))
}

/// `exp(−iθ σ·n) = cos θ · I − i sin θ · (n_x σ_x + n_y σ_y + n_z σ_z)`.
pub fn rotation_matrix<T: Real>(theta: T, axis: [T; 3]) -> Result<Mat2<T>> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    if (norm - T::one()).abs() > tol {
        return arg(format!("rotation axis has norm {norm}, expected 1"));
    }
    Ok(rotation_matrix_unchecked(theta, axis))
}

#[inline]
pub(crate) fn rotation_matrix_unchecked<T: Real>(theta: T, axis: [T; 3]) -> Mat2<T> {
    let (s, c) = theta.sin_cos();
    let [nx, ny, nz] = axis;
    [
        [Complex::new(c, -s * nz), Complex::new(-s * ny, -s * nx)],
        [Complex::new(s * ny, -s * nx), Complex::new(c, s * nz)],
    ]
}

/// Fringe visibility attributed to θ noise of standard deviation `sigma_theta`:
/// `1/(2e^{2σ²} − 1)`.
pub fn visibility<T: Real>(sigma_theta: T) -> T {
    let two = T::lit(2.0);
    (two * (two * sigma_theta * sigma_theta).exp() - T::one()).recip()
}
