//! Intermittent slabs ρ_{λ,ε}(x) = Σ_n L^{1/2} φ(λx + Ln), L = λ^{1−ε}.
//!
//! With μ = λ^ε the translates sit at the points n/μ, have width 2/λ and
//! are disjoint once L ≥ 2, so ‖ρ‖_{L²(T)} = ‖φ‖_{L²(R)} = 1 exactly. By
//! Poisson summation ρ̂(μn) = L^{−1/2} φ̂(n/L) and ρ̂ vanishes off μZ.

mod profile;
mod tail;

pub use profile::{build_profile, SlabProfile, CONTOUR_FROM, HAT_REL_CUTOFF};
pub use tail::{high_low_decay, high_low_decay_truncated, high_low_decay_with, high_low_envelope_bound, TailOptions};

use crate::spectral::{analyze, next_pow2, GridSamples, SpectralError, TorusFunction};
use num_complex::Complex64;
use thiserror::Error;

/// Largest sampling grid the physical construction allocates.
pub const MAX_PHYSICAL_GRID: usize = 1 << 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlabError {
    #[error("λ = {0} is not a power of two ≥ 4")]
    BadLambda(u64),
    #[error("target ε = {0} outside (0, 1)")]
    BadEpsilon(f64),
    #[error("max_freq {max_freq} below 4λ = {need}")]
    MaxFreqTooSmall { max_freq: i64, need: i64 },
    #[error("physical grid of {0} points exceeds the limit")]
    GridTooLarge(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// λ = 2^m, μ = λ^ε = 2^k with 1 ≤ k ≤ m − 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SlabSpec {
    m: u32,
    k: u32,
}

impl SlabSpec {
    /// Rounds m·ε_target to the nearest k, clamped so that 2 ≤ L.
    pub fn new(lambda: u64, eps_target: f64) -> Result<Self, SlabError> {
        if lambda < 4 || !lambda.is_power_of_two() {
            return Err(SlabError::BadLambda(lambda));
        }
        if !(eps_target > 0.0 && eps_target < 1.0) {
            return Err(SlabError::BadEpsilon(eps_target));
        }
        let m = lambda.trailing_zeros();
        let k = ((m as f64 * eps_target).round() as u32).clamp(1, m - 1);
        Ok(SlabSpec { m, k })
    }

    pub fn from_exponents(m: u32, k: u32) -> Result<Self, SlabError> {
        if !(2..=62).contains(&m) {
            return Err(SlabError::BadLambda(if m < 63 { 1 << m } else { 0 }));
        }
        if k == 0 || k >= m {
            return Err(SlabError::BadEpsilon(k as f64 / m as f64));
        }
        Ok(SlabSpec { m, k })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn lambda(&self) -> i64 {
        1 << self.m
    }

    pub fn mu(&self) -> i64 {
        1 << self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.k as f64 / self.m as f64
    }

    /// L = λ^{1−ε} = λ/μ.
    pub fn ell(&self) -> i64 {
        1 << (self.m - self.k)
    }

    /// log₂ L.
    pub fn level(&self) -> u32 {
        self.m - self.k
    }

    /// ρ̂(μn), without truncation.
    pub fn coefficient(&self, profile: &SlabProfile, n: i64) -> Complex64 {
        let l = self.ell() as f64;
        profile.phi_hat(n as f64 / l) / l.sqrt()
    }

    /// Largest |n| kept by the truncated series.
    pub fn series_extent(&self, profile: &SlabProfile) -> i64 {
        (profile.tail_cutoff() * self.ell() as f64).ceil() as i64
    }

    /// ‖ρ‖_{L^p} = L^{1/2−1/p}‖φ‖_{L^p(R)}, exact for disjoint translates.
    pub fn lp_norm_exact(&self, profile: &SlabProfile, p: f64) -> f64 {
        let l = self.ell() as f64;
        if p.is_infinite() {
            let xm = max_point();
            return l.sqrt() * profile.phi(xm);
        }
        let n = 8192;
        let integral: f64 =
            (1..n).map(|i| profile.phi(i as f64 / n as f64).abs().powf(p)).sum::<f64>() * 2.0 / n as f64;
        l.powf(0.5 - 1.0 / p) * integral.powf(1.0 / p)
    }
}

/// Maximizer of x e^{−1/(1−x²)} on (0, 1).
fn max_point() -> f64 {
    // 1/x = 2x/(1−x²)²  ⇔  1 − x² = √2 x
    (6f64.sqrt() - 2f64.sqrt()) / 2.0
}

fn check_max_freq(spec: &SlabSpec, max_freq: i64) -> Result<(), SlabError> {
    let need = 4 * spec.lambda();
    if max_freq < need {
        return Err(SlabError::MaxFreqTooSmall { max_freq, need });
    }
    Ok(())
}

/// Samples the translate sum on a grid fine enough that aliasing from
/// above `max_freq` is below the φ̂ cutoff, then analyzes up to `max_freq`.
pub fn build_slab_physical(spec: &SlabSpec, profile: &SlabProfile, max_freq: i64) -> Result<TorusFunction, SlabError> {
    check_max_freq(spec, max_freq)?;
    let lambda = spec.lambda() as usize;
    let reach = (profile.tail_cutoff() * lambda as f64).ceil() as usize;
    let m = next_pow2((2 * max_freq as usize + 1).max(max_freq as usize + reach + 1));
    if m > MAX_PHYSICAL_GRID {
        return Err(SlabError::GridTooLarge(m));
    }
    // λx_j mod L = (j mod LR)/R with R = M/λ
    let r = m / lambda;
    let period = spec.ell() as usize * r;
    let l = spec.ell() as f64;
    let amp = l.sqrt();
    let values = (0..m)
        .map(|j| {
            let u = (j % period) as f64 / r as f64;
            amp * (profile.phi(u) + profile.phi(u - l))
        })
        .collect();
    Ok(analyze(&GridSamples::new(values), max_freq)?)
}

/// The Poisson-summation series, truncated at `max_freq` and where the
/// envelope of φ̂ drops below [`HAT_REL_CUTOFF`] of its maximum.
pub fn build_slab_fourier(spec: &SlabSpec, profile: &SlabProfile, max_freq: i64) -> Result<TorusFunction, SlabError> {
    check_max_freq(spec, max_freq)?;
    let n_max = (max_freq / spec.mu()).min(spec.series_extent(profile));
    let table = profile.hat_table(spec.level(), n_max as usize);
    let inv = 1.0 / (spec.ell() as f64).sqrt();
    let mu = spec.mu();
    let mut pairs = Vec::with_capacity(2 * n_max as usize);
    for n in (1..=n_max).rev() {
        pairs.push((-mu * n, Complex64::new(0.0, -inv * table[n as usize])));
    }
    for n in 1..=n_max {
        pairs.push((mu * n, Complex64::new(0.0, inv * table[n as usize])));
    }
    Ok(TorusFunction::from_pairs_unchecked(pairs))
}
