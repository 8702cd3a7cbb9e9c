//! ‖P_{>λ²}(a·ρ_{λ,ε})‖_{L^∞} with the untruncated slab spectrum.
//!
//! (aρ)^(k + μn) collects â(k)ρ̂(μn). For each mode k of a only the n with
//! |k + μn| past the low-pass plateau survive, and on each half-line the
//! surviving ρ̂(μn) decay like e^{−√(2π|n|/L)}, so the sum is cut once that
//! factor has dropped by e^{−depth} from its value at the first surviving n.
//!
//! The supremum is taken over the grid x = (y_i + j)/μ, y_i = i/M,
//! 0 ≤ j < μ. Writing h(x) = Σ_k â(k) e^{2πikx} R_k(μx) with R_k
//! 1-periodic, every R_k is sampled once by an FFT of length M and the μ
//! translates are recombined pointwise.

use super::{SlabError, SlabProfile, SlabSpec};
use crate::lp::{low_flat_edge, LpFilter};
use crate::norms::lp_norm;
use crate::spectral::{fft_inverse, next_pow2, product, TorusFunction};
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug)]
pub struct TailOptions {
    /// Grid samples per period of the highest frequency, halved.
    pub oversample: usize,
    /// The series on each half-line stops where the decay factor has
    /// fallen by e^{−depth}.
    pub depth: f64,
    /// Upper bound on μ·M grid points.
    pub max_points: usize,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions { oversample: 4, depth: 37.0, max_points: 1 << 28 }
    }
}

/// A coefficient (k, â_k) of a with the slab terms it contributes above the edge.
type ModeTerms = (i64, Complex64, Vec<(i64, Complex64)>);

fn stop_at(t0: f64, depth: f64) -> f64 {
    ((2.0 * PI * t0).sqrt() + depth).powi(2) / (2.0 * PI)
}

pub fn high_low_decay(
    filter: &LpFilter,
    profile: &SlabProfile,
    a: &TorusFunction,
    spec: &SlabSpec,
) -> Result<f64, SlabError> {
    high_low_decay_with(filter, profile, a, spec, &TailOptions::default())
}

pub fn high_low_decay_with(
    filter: &LpFilter,
    profile: &SlabProfile,
    a: &TorusFunction,
    spec: &SlabSpec,
    opts: &TailOptions,
) -> Result<f64, SlabError> {
    let j = 2 * spec.m();
    let edge = low_flat_edge(j);
    let (mu, ell) = (spec.mu(), spec.ell());
    let lf = ell as f64;
    let far = |t0: f64| (stop_at(t0, opts.depth) * lf).ceil() as i64;

    let mut hats: HashMap<i64, Complex64> = HashMap::new();
    let mut modes: Vec<ModeTerms> = Vec::new();
    let mut reach: i64 = 0;
    let mut n_abs_max: i64 = 0;
    for (k, ak) in a.nonzeros() {
        let mut terms = Vec::new();
        let lo = (edge - k).div_euclid(mu) + 1;
        let hi = far(lo.max(0) as f64 / lf);
        let up = -(edge + k).div_euclid(mu) - 1;
        let down = far((-up).max(0) as f64 / lf);
        for n in lo.max(-hi)..=hi {
            push_term(filter, profile, spec, j, k, n, &mut hats, &mut terms);
        }
        for n in -down..=up.min(down) {
            push_term(filter, profile, spec, j, k, n, &mut hats, &mut terms);
        }
        if terms.is_empty() {
            continue;
        }
        for (n, _) in &terms {
            reach = reach.max((k + mu * n).abs());
            n_abs_max = n_abs_max.max(n.abs());
        }
        modes.push((k, ak, terms));
    }
    if modes.is_empty() {
        return Ok(0.0);
    }

    let per_period = 2 * opts.oversample as i64;
    let m = next_pow2(((per_period * reach).div_euclid(mu) + 1).max(2 * n_abs_max + 1) as usize);
    let points = m * mu as usize;
    if points > opts.max_points {
        return Err(SlabError::GridTooLarge(points));
    }
    let mi = m as i64;
    let period = mu as i128 * m as i128;
    let twiddle = |k: i64, idx: i128| {
        let ph = (k as i128 * idx).rem_euclid(period) as f64 / period as f64;
        Complex64::from_polar(1.0, 2.0 * PI * ph)
    };
    // x = (i + jM)/(μM), so e^{2πikx} = e^{2πiki/(μM)} e^{2πikj/μ}; the
    // first factor and â(k) are folded into the samples of R_k
    let mut samples = Vec::with_capacity(modes.len());
    let mut combs = Vec::with_capacity(modes.len());
    for (k, ak, terms) in &modes {
        let mut buf = vec![Complex64::ZERO; m];
        for (n, c) in terms {
            buf[n.rem_euclid(mi) as usize] += *c;
        }
        fft_inverse(&mut buf);
        for (i, b) in buf.iter_mut().enumerate() {
            *b *= *ak * twiddle(*k, i as i128);
        }
        samples.push(buf);
        combs.push((0..mu).map(|j| twiddle(*k, j as i128 * m as i128)).collect::<Vec<_>>());
    }

    let mut best: f64 = 0.0;
    for i in 0..m {
        for j in 0..mu as usize {
            let v: f64 = samples.iter().zip(&combs).map(|(r, b)| (r[i] * b[j]).re).sum();
            best = best.max(v.abs());
        }
    }
    Ok(best)
}

#[allow(clippy::too_many_arguments)]
fn push_term(
    filter: &LpFilter,
    profile: &SlabProfile,
    spec: &SlabSpec,
    j: u32,
    k: i64,
    n: i64,
    hats: &mut HashMap<i64, Complex64>,
    out: &mut Vec<(i64, Complex64)>,
) {
    if n == 0 {
        return;
    }
    let w = 1.0 - filter.low_weight(j, k + spec.mu() * n);
    if w == 0.0 {
        return;
    }
    // ρ̂ is odd in n
    let h = *hats.entry(n.abs()).or_insert_with(|| spec.coefficient(profile, n.abs()));
    let c = if n > 0 { h } else { -h } * w;
    if c != Complex64::ZERO {
        out.push((n, c));
    }
}

/// Upper bound Σ|â|·Σ_{|μn| > λ² − max_freq(a)} |ρ̂(μn)| with |φ̂| replaced
/// by its envelope; needs no grid, so it serves where the sup grid is too large.
pub fn high_low_envelope_bound(profile: &SlabProfile, a: &TorusFunction, spec: &SlabSpec) -> f64 {
    let edge = low_flat_edge(2 * spec.m());
    let (mu, lf) = (spec.mu(), spec.ell() as f64);
    let n0 = ((edge - a.max_freq()).div_euclid(mu) + 1).max(1);
    let mut total = 0.0;
    let mut n = n0;
    loop {
        let t = profile.envelope(n as f64 / lf) / lf.sqrt();
        total += t;
        if t <= 1e-30 * total || n - n0 > 1 << 24 {
            break;
        }
        n += 1;
    }
    2.0 * a.coeff_l1() * total
}

/// Same quantity for an already truncated slab.
pub fn high_low_decay_truncated(
    filter: &LpFilter,
    a: &TorusFunction,
    rho: &TorusFunction,
    spec: &SlabSpec,
) -> Result<f64, SlabError> {
    let high = filter.project_high(&product(a, rho), 2 * spec.m());
    lp_norm(&high, f64::INFINITY).map_err(|e| match e {
        crate::norms::NormError::Spectral(s) => SlabError::Spectral(s),
        _ => SlabError::GridTooLarge(high.max_freq() as usize),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slabs::{build_profile, build_slab_fourier};

    fn smooth_a() -> TorusFunction {
        TorusFunction::constant(2.0).add(&TorusFunction::cos_mode(1.0, 1))
    }

    #[test]
    fn decays_along_lambda() {
        let (p, f) = (build_profile(), LpFilter::build());
        let vals: Vec<f64> = [6u32, 8, 10]
            .iter()
            .map(|m| high_low_decay(&f, &p, &smooth_a(), &SlabSpec::new(1 << m, 0.5).unwrap()).unwrap())
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2] && vals[2] < 1e-3, "{vals:?}");
        assert!(vals[0] > 0.0);
    }

    #[test]
    fn truncated_constant_has_nothing_above_cutoff() {
        let (p, f) = (build_profile(), LpFilter::build());
        let s = SlabSpec::new(1 << 8, 0.5).unwrap();
        let rho = build_slab_fourier(&s, &p, s.series_extent(&p) * s.mu()).unwrap();
        assert!(rho.max_freq() < s.lambda() * s.lambda());
        assert_eq!(high_low_decay_truncated(&f, &TorusFunction::constant(1.0), &rho, &s).unwrap(), 0.0);
    }

    #[test]
    fn exact_tail_matches_wide_truncation() {
        // at λ = 2^4 the threshold λ² sits inside the retained series
        let (p, f) = (build_profile(), LpFilter::build());
        let s = SlabSpec::new(1 << 4, 0.5).unwrap();
        let rho = build_slab_fourier(&s, &p, s.series_extent(&p) * s.mu()).unwrap();
        let a = smooth_a();
        let exact = high_low_decay(&f, &p, &a, &s).unwrap();
        let trunc = high_low_decay_truncated(&f, &a, &rho, &s).unwrap();
        assert!((exact - trunc).abs() < 0.1 * exact, "{exact} {trunc}");
    }

    #[test]
    fn envelope_bound_dominates() {
        let (p, f) = (build_profile(), LpFilter::build());
        for m in [6u32, 8] {
            let s = SlabSpec::new(1 << m, 0.5).unwrap();
            let exact = high_low_decay(&f, &p, &smooth_a(), &s).unwrap();
            let bound = high_low_envelope_bound(&p, &smooth_a(), &s);
            assert!(exact <= bound && bound < 1e6 * exact.max(1e-300), "{exact} {bound}");
        }
    }

    #[test]
    fn high_mode_of_a_is_not_suppressed() {
        let (p, f) = (build_profile(), LpFilter::build());
        let s = SlabSpec::new(1 << 6, 0.5).unwrap();
        let xi0 = 4 * s.lambda() * s.lambda();
        let a = TorusFunction::cos_mode(1.0, xi0);
        let v = high_low_decay(&f, &p, &a, &s).unwrap();
        let scale = 0.5 * s.lp_norm_exact(&p, f64::INFINITY);
        assert!(v > 0.25 * scale && v < 4.0 * scale, "{v} vs {scale}");
    }
}
