//! Permutationally symmetric N-qubit pure states.
//!
//! A symmetric state is stored in the Dicke basis: entry `n` of the amplitude
//! vector multiplies `|n⟩_[N]`, the equal superposition of all N-qubit strings
//! with exactly `n` ones. Splitting off one qubit uses
//!
//! ```text
//! |n⟩_[N] = √(n/N) |1⟩⊗|n−1⟩_[N−1] + √((N−n)/N) |0⟩⊗|n⟩_[N−1]
//! ```
//!
//! so a photon-by-photon trial costs O(N) per photon.

use std::sync::OnceLock;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::scalar::Real;

/// 2×2 complex matrix, row-major: `m[row][col]`.
pub type Mat2<T> = [[Complex<T>; 2]; 2];

pub(crate) fn norm_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e4))
}

fn sqrt_table<T: Real>(n: usize) -> Vec<T> {
    (0..=n).map(|k| T::from_usize(k).unwrap().sqrt()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricState<T: Real> {
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> SymmetricState<T> {
    /// Wraps an amplitude vector that must already be normalized.
    pub fn new(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.is_empty() {
            return arg("amplitude vector must have at least one entry");
        }
        let norm = squared_norm(&amplitudes);
        if (norm - T::one()).abs() > norm_tolerance::<T>() {
            return Err(Error::State(format!("squared norm {norm} is not 1")));
        }
        Ok(SymmetricState { amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let norm = squared_norm(&amplitudes);
        if amplitudes.is_empty() || norm <= T::zero() || !norm.is_finite() {
            return arg("cannot normalize an empty or zero amplitude vector");
        }
        let s = norm.sqrt().recip();
        amplitudes.iter_mut().for_each(|a| *a = *a * s);
        Ok(SymmetricState { amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn squared_norm(&self) -> T {
        squared_norm(&self.amplitudes)
    }

    pub fn cast<U: Real>(&self) -> SymmetricState<U> {
        SymmetricState {
            amplitudes: self
                .amplitudes
                .iter()
                .map(|a| Complex::new(U::lit(a.re.to_f64_lossy()), U::lit(a.im.to_f64_lossy())))
                .collect(),
        }
    }
}

fn squared_norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// Arguments of a Wigner small-d matrix element `d^j_{ν,μ}(β)`.
///
/// Half-integers are held doubled, so `two_j = 2j` and so on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerDArgs<T> {
    two_j: i64,
    two_nu: i64,
    two_mu: i64,
    pub beta: T,
}

impl<T: Real> WignerDArgs<T> {
    /// Builds from doubled quantum numbers.
    pub fn from_doubled(two_j: i64, two_nu: i64, two_mu: i64, beta: T) -> Result<Self> {
        if two_j < 0 {
            return arg(format!("2j = {two_j} is negative"));
        }
        if two_nu.abs() > two_j || two_mu.abs() > two_j {
            return arg(format!("|ν|, |μ| must not exceed j (2j={two_j}, 2ν={two_nu}, 2μ={two_mu})"));
        }
        if (two_j + two_nu) % 2 != 0 || (two_j + two_mu) % 2 != 0 {
            return arg("j ± ν and j ± μ must be integers");
        }
        Ok(WignerDArgs {
            two_j,
            two_nu,
            two_mu,
            beta,
        })
    }

    /// Builds from half-integer values given as floats, e.g. `(0.5, -0.5, 0.5, β)`.
    pub fn new(j: f64, nu: f64, mu: f64, beta: T) -> Result<Self> {
        let doubled = |x: f64, name: &str| -> Result<i64> {
            let d = 2.0 * x;
            if (d - d.round()).abs() > 1e-12 {
                return arg(format!("{name} = {x} is not a half-integer"));
            }
            Ok(d.round() as i64)
        };
        Self::from_doubled(doubled(j, "j")?, doubled(nu, "ν")?, doubled(mu, "μ")?, beta)
    }
}

const LN_FACT_TABLE: usize = 1024;

fn ln_factorial(n: i64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..LN_FACT_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    });
    debug_assert!(n >= 0);
    match table.get(n as usize) {
        Some(v) => *v,
        None => libm::lgamma(n as f64 + 1.0),
    }
}

/// Wigner small-d matrix element via the explicit factorial sum, with the
/// factorials taken in log form.
pub fn wigner_d<T: Real>(args: &WignerDArgs<T>) -> T {
    // All quantities below are integers: j±ν, j±μ, ν−μ.
    let j_plus_nu = (args.two_j + args.two_nu) / 2;
    let j_minus_nu = (args.two_j - args.two_nu) / 2;
    let j_plus_mu = (args.two_j + args.two_mu) / 2;
    let j_minus_mu = (args.two_j - args.two_mu) / 2;
    let nu_minus_mu = (args.two_nu - args.two_mu) / 2;

    let half = args.beta.to_f64_lossy() / 2.0;
    let (c, s) = (half.cos(), half.sin());
    let ln_prefactor =
        0.5 * (ln_factorial(j_plus_nu) + ln_factorial(j_minus_nu) + ln_factorial(j_plus_mu) + ln_factorial(j_minus_mu));

    let s_min = 0.max(-nu_minus_mu);
    let s_max = j_plus_mu.min(j_minus_nu);
    let mut total = 0.0f64;
    for k in s_min..=s_max {
        let ln_term = ln_prefactor
            - ln_factorial(j_plus_mu - k)
            - ln_factorial(k)
            - ln_factorial(nu_minus_mu + k)
            - ln_factorial(j_minus_nu - k);
        let cos_pow = args.two_j - nu_minus_mu - 2 * k;
        let sin_pow = nu_minus_mu + 2 * k;
        let sign = if (nu_minus_mu + k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        total += sign * ln_term.exp() * c.powi(cos_pow as i32) * s.powi(sin_pow as i32);
    }
    T::lit(total)
}

/// Full matrix `d^j(β)` with rows `j + ν` and columns `j + μ`, built by
/// coupling one spin-½ at a time onto the stretched state. Unlike the
/// factorial sum this has no cancellation, so it stays accurate for large j.
pub fn wigner_d_matrix(two_j: usize, beta: f64) -> Vec<Vec<f64>> {
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let mut d = vec![vec![1.0f64]];
    for size in 1..=two_j {
        let prev = &d;
        let at = |i: usize, k: usize| if i < size && k < size { prev[i][k] } else { 0.0 };
        let inv = 1.0 / size as f64;
        let next: Vec<Vec<f64>> = (0..=size)
            .map(|i| {
                (0..=size)
                    .map(|k| {
                        let (up_i, dn_i) = (i as f64, (size - i) as f64);
                        let (up_k, dn_k) = (k as f64, (size - k) as f64);
                        let mut v = dn_i.sqrt() * dn_k.sqrt() * c * at(i, k);
                        if i > 0 {
                            v -= up_i.sqrt() * dn_k.sqrt() * s * at(i - 1, k);
                        }
                        if k > 0 {
                            v += dn_i.sqrt() * up_k.sqrt() * s * at(i, k - 1);
                        }
                        if i > 0 && k > 0 {
                            v += up_i.sqrt() * up_k.sqrt() * c * at(i - 1, k - 1);
                        }
                        v * inv
                    })
                    .collect()
            })
            .collect();
        d = next;
    }
    d
}

/// `i^k` for any integer `k`.
fn i_pow<T: Real>(k: i64) -> Complex<T> {
    match k.rem_euclid(4) {
        0 => Complex::new(T::one(), T::zero()),
        1 => Complex::new(T::zero(), T::one()),
        2 => Complex::new(-T::one(), T::zero()),
        _ => Complex::new(T::zero(), -T::one()),
    }
}

/// The sine-weighted input state `|Ψ_N⟩`, near-optimal for adaptive phase
/// estimation:
///
/// ```text
/// a_n = Σ_k sin((k+1)π/(N+2)) / √(1+N/2) · e^{iπ(k−n)/2} · d^{N/2}_{n−N/2, k−N/2}(π/2)
/// ```
pub fn make_optimal_input_state<T: Real>(n_qubits: usize) -> Result<SymmetricState<T>> {
    if n_qubits == 0 {
        return arg("n_qubits must be at least 1");
    }
    let n = n_qubits as i64;
    let nf = n_qubits as f64;
    let scale = (1.0 + nf / 2.0).sqrt().recip();
    let d = wigner_d_matrix(n_qubits, std::f64::consts::FRAC_PI_2);
    let mut amplitudes = Vec::with_capacity(n_qubits + 1);
    for row in 0..=n {
        let mut acc = Complex::new(0.0f64, 0.0);
        for k in 0..=n {
            let weight = ((k + 1) as f64 * std::f64::consts::PI / (nf + 2.0)).sin() * scale;
            acc += i_pow::<f64>(k - row) * (weight * d[row as usize][k as usize]);
        }
        amplitudes.push(Complex::new(T::lit(acc.re), T::lit(acc.im)));
    }
    SymmetricState::new(amplitudes)
}

/// `|0…0⟩`, i.e. the Dicke state with no excitations.
pub fn make_product_zero_state<T: Real>(n_qubits: usize) -> Result<SymmetricState<T>> {
    if n_qubits == 0 {
        return arg("n_qubits must be at least 1");
    }
    let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); n_qubits + 1];
    amplitudes[0] = Complex::new(T::one(), T::zero());
    Ok(SymmetricState { amplitudes })
}

/// Which input state to prepare for an N-qubit run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputStateKind {
    #[default]
    PsiOpt,
    ProductZero,
}

impl InputStateKind {
    pub fn build<T: Real>(self, n_qubits: usize) -> Result<SymmetricState<T>> {
        match self {
            InputStateKind::PsiOpt => make_optimal_input_state(n_qubits),
            InputStateKind::ProductZero => make_product_zero_state(n_qubits),
        }
    }
}

/// One qubit split off a symmetric state:
/// `|ψ⟩ = amp0 |0⟩⊗|rest0⟩ + amp1 |1⟩⊗|rest1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult<T: Real> {
    pub amp0: Complex<T>,
    pub amp1: Complex<T>,
    pub rest0: SymmetricState<T>,
    pub rest1: SymmetricState<T>,
}

impl<T: Real> ExtractionResult<T> {
    /// Inverse of [`extract_one_qubit`].
    pub fn recombine(&self) -> Vec<Complex<T>> {
        let m = self.rest0.n_qubits();
        let big_n = m + 1;
        let sq = sqrt_table::<T>(big_n);
        let inv = sq[big_n].recip();
        let mut out = vec![Complex::new(T::zero(), T::zero()); big_n + 1];
        for (n, slot) in out.iter_mut().enumerate() {
            if n < big_n {
                *slot = *slot + self.amp0 * self.rest0.amplitudes[n] * (sq[big_n - n] * inv);
            }
            if n >= 1 {
                *slot = *slot + self.amp1 * self.rest1.amplitudes[n - 1] * (sq[n] * inv);
            }
        }
        out
    }
}

fn branch_state<T: Real>(v: Vec<Complex<T>>, weight: T) -> SymmetricState<T> {
    if weight > T::zero() {
        let s = weight.sqrt().recip();
        SymmetricState {
            amplitudes: v.into_iter().map(|a| a * s).collect(),
        }
    } else {
        // Unreachable branch; any valid state will do.
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); v.len()];
        amplitudes[0] = Complex::new(T::one(), T::zero());
        SymmetricState { amplitudes }
    }
}

pub fn extract_one_qubit<T: Real>(state: &SymmetricState<T>) -> Result<ExtractionResult<T>> {
    let big_n = state.n_qubits();
    if big_n == 0 {
        return Err(Error::State("cannot extract a qubit from a zero-qubit state".into()));
    }
    let sq = sqrt_table::<T>(big_n);
    let inv = sq[big_n].recip();
    let a = &state.amplitudes;
    let v0: Vec<_> = (0..big_n).map(|n| a[n] * (sq[big_n - n] * inv)).collect();
    let v1: Vec<_> = (1..=big_n).map(|n| a[n] * (sq[n] * inv)).collect();
    let w0 = squared_norm(&v0);
    let w1 = squared_norm(&v1);
    Ok(ExtractionResult {
        amp0: Complex::new(w0.sqrt(), T::zero()),
        amp1: Complex::new(w1.sqrt(), T::zero()),
        rest0: branch_state(v0, w0),
        rest1: branch_state(v1, w1),
    })
}

/// Measures the extracted qubit after the single-qubit map `rotated` acted on
/// it. Returns the outcome probability and the renormalized remainder.
pub fn collapse<T: Real>(
    extraction: &ExtractionResult<T>,
    rotated: &Mat2<T>,
    outcome: u8,
) -> Result<(T, SymmetricState<T>)> {
    if outcome > 1 {
        return arg(format!("outcome {outcome} is not a bit"));
    }
    let row = rotated[outcome as usize];
    let c0 = row[0] * extraction.amp0;
    let c1 = row[1] * extraction.amp1;
    let v: Vec<_> = extraction
        .rest0
        .amplitudes
        .iter()
        .zip(&extraction.rest1.amplitudes)
        .map(|(&x, &y)| c0 * x + c1 * y)
        .collect();
    let p = squared_norm(&v);
    if p < T::degenerate_threshold() {
        return Err(Error::DegenerateBranch {
            probability: p.to_f64_lossy(),
        });
    }
    Ok((p, branch_state(v, p)))
}

/// Mutable working copy of a symmetric state for the trial hot loop.
///
/// Fuses extraction, the single-qubit map and collapse into two passes over
/// the amplitudes and renormalizes after every collapse.
#[derive(Debug, Clone)]
pub struct StateBuffer<T: Real> {
    amps: Vec<Complex<T>>,
    qubits: usize,
    /// `coef[l][n] = (√((l−n)/l), √((n+1)/l))`: weights of `|n⟩` and
    /// `|n+1⟩` of an l-qubit state in the `|0⟩` and `|1⟩` branches.
    coef: Vec<Vec<(T, T)>>,
}

fn coefficient_table<T: Real>(max_qubits: usize) -> Vec<Vec<(T, T)>> {
    (0..=max_qubits)
        .map(|l| {
            (0..l)
                .map(|n| {
                    let lf = l as f64;
                    (T::lit(((l - n) as f64 / lf).sqrt()), T::lit(((n + 1) as f64 / lf).sqrt()))
                })
                .collect()
        })
        .collect()
}

impl<T: Real> StateBuffer<T> {
    pub fn new(capacity_qubits: usize) -> Self {
        StateBuffer {
            amps: Vec::with_capacity(capacity_qubits + 1),
            qubits: 0,
            coef: coefficient_table(capacity_qubits),
        }
    }

    pub fn load(&mut self, state: &SymmetricState<T>) {
        let n = state.n_qubits();
        if self.coef.len() < n + 1 {
            self.coef = coefficient_table(n);
        }
        self.amps.clear();
        self.amps.extend_from_slice(&state.amplitudes);
        self.qubits = n;
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps[..=self.qubits]
    }

    /// Unnormalized outcome weights `[p0, p1]` of the next qubit after `u`.
    #[inline]
    pub fn branch_weights(&self, u: &Mat2<T>) -> [T; 2] {
        let l = self.qubits;
        debug_assert!(l >= 1);
        let a = &self.amps;
        let (mut p0, mut p1) = (T::zero(), T::zero());
        for (n, &(lo, hi)) in self.coef[l].iter().enumerate() {
            let x = a[n] * lo;
            let y = a[n + 1] * hi;
            p0 = p0 + (u[0][0] * x + u[0][1] * y).norm_sqr();
            p1 = p1 + (u[1][0] * x + u[1][1] * y).norm_sqr();
        }
        [p0, p1]
    }

    /// Weight of outcome 0 after the real rotation `[[c, −s], [s, c]]`.
    /// The buffer is normalized, so outcome 1 has weight `1 − p0`.
    #[inline]
    pub fn zero_weight_real(&self, c: T, s: T) -> T {
        let l = self.qubits;
        debug_assert!(l >= 1);
        let a = &self.amps;
        let mut p0 = T::zero();
        for (n, &(lo, hi)) in self.coef[l].iter().enumerate() {
            p0 = p0 + (a[n] * (c * lo) - a[n + 1] * (s * hi)).norm_sqr();
        }
        p0
    }

    /// Keeps branch `outcome` (whose weight is `weight`) and drops one qubit.
    #[inline]
    pub fn collapse(&mut self, u: &Mat2<T>, outcome: u8, weight: T) -> Result<()> {
        let row = u[outcome as usize];
        self.collapse_with(|x, y| row[0] * x + row[1] * y, weight)
    }

    /// [`collapse`](Self::collapse) for the real rotation `[[c, −s], [s, c]]`.
    #[inline]
    pub fn collapse_real(&mut self, c: T, s: T, outcome: u8, weight: T) -> Result<()> {
        let (r0, r1) = if outcome == 0 { (c, -s) } else { (s, c) };
        self.collapse_with(|x, y| x * r0 + y * r1, weight)
    }

    #[inline]
    fn collapse_with(&mut self, row: impl Fn(Complex<T>, Complex<T>) -> Complex<T>, weight: T) -> Result<()> {
        if weight < T::degenerate_threshold() {
            return Err(Error::DegenerateBranch {
                probability: weight.to_f64_lossy(),
            });
        }
        let l = self.qubits;
        let inv = weight.sqrt().recip();
        for (n, &(lo, hi)) in self.coef[l].iter().enumerate() {
            let next = self.amps[n + 1];
            self.amps[n] = row(self.amps[n] * (lo * inv), next * (hi * inv));
        }
        self.qubits = l - 1;
        Ok(())
    }

    /// Weights for measuring the next qubit in the computational basis.
    #[inline]
    pub fn basis_weights(&self) -> [T; 2] {
        let l = self.qubits;
        let inv = T::from_usize(l).unwrap().recip();
        let (mut p0, mut p1) = (T::zero(), T::zero());
        for n in 0..=l {
            let w = self.amps[n].norm_sqr();
            p0 = p0 + w * T::from_usize(l - n).unwrap() * inv;
            p1 = p1 + w * T::from_usize(n).unwrap() * inv;
        }
        [p0, p1]
    }
}

pub(crate) fn identity<T: Real>() -> Mat2<T> {
    let o = Complex::new(T::one(), T::zero());
    let z = Complex::new(T::zero(), T::zero());
    [[o, z], [z, o]]
}
