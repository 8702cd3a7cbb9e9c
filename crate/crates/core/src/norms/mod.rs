//! L^p, homogeneous Sobolev Ḣ^s, homogeneous Besov Ḃ^α_{p,q} and C^k norms.

pub mod quadrature;

use crate::lp::LpFilter;
use crate::spectral::{fft_inverse, next_pow2, synthesize_complex, SpectralError, TorusFunction};
use num_complex::Complex64;
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("exponent {0} outside [1, ∞]")]
    InvalidExponent(f64),
    #[error(
        "no quadrature route for max frequency {max_freq}: grid too large and spectrum not a narrow modulated band"
    )]
    GridTooLarge { max_freq: i64 },
    #[error("L^{p} quadrature did not converge: relative change {rel_change:e} after the last doubling")]
    NoConvergence { p: f64, rel_change: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Clone, Copy, Debug)]
pub struct LpOptions {
    /// Grid size is at least `oversample · (2N + 1)`.
    pub oversample: usize,
    pub rel_tol: f64,
    pub max_doublings: u32,
    /// Largest grid the quadrature may allocate.
    pub max_grid: usize,
    /// A two-sided band centred at ±c with half-width B is handled through
    /// its envelope when c ≥ `envelope_ratio · (B + 1)`.
    pub envelope_ratio: i64,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { oversample: 8, rel_tol: 1e-8, max_doublings: 3, max_grid: 1 << 25, envelope_ratio: 16 }
    }
}

pub fn lp_norm(f: &TorusFunction, p: f64) -> Result<f64, NormError> {
    lp_norm_with(f, p, &LpOptions::default())
}

/// ‖f‖_{L^p(T)}.
///
/// p = 2 uses Plancherel. Otherwise the spectrum is first compressed by
/// the gcd of its frequencies (L^p is invariant under x ↦ dx on T) and
/// sampled on an oversampled grid; ∞ takes the grid maximum and finite p
/// refines by doubling. Spectra too wide for a grid but concentrated in a
/// narrow band around ±c are reduced to their complex envelope g, using
/// ‖2Re(g e^{2πicx})‖_p^p → 2^p m_p ‖g‖_p^p with m_p = ∫|cos 2πt|^p.
pub fn lp_norm_with(f: &TorusFunction, p: f64, opts: &LpOptions) -> Result<f64, NormError> {
    if p.is_nan() || p < 1.0 {
        return Err(NormError::InvalidExponent(p));
    }
    if f.is_zero() {
        return Ok(0.0);
    }
    if p == 2.0 {
        return Ok(f.coeff_l2_sq().sqrt());
    }
    let d = f.support_gcd().max(1);
    let g = f.reduce(d);
    let n = g.max_freq() as usize;
    let base = next_pow2(opts.oversample * (2 * n + 1));
    if base <= opts.max_grid / 2 || (p.is_infinite() && base <= opts.max_grid) {
        return grid_norm(&g, p, base, opts);
    }
    if let Some(v) = envelope_norm(&g, p, opts)? {
        return Ok(v);
    }
    Err(NormError::GridTooLarge { max_freq: f.max_freq() })
}

fn grid_norm(g: &TorusFunction, p: f64, base: usize, opts: &LpOptions) -> Result<f64, NormError> {
    if p.is_infinite() {
        let v: Vec<f64> = synthesize_complex(g, base)?.into_iter().map(|z| z.re).collect();
        let best = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if g.nnz() > POLISH_MAX_NNZ || best == 0.0 {
            return Ok(best);
        }
        return Ok(polish_max(g, &v, best));
    }
    let eval = |m: usize| -> Result<f64, NormError> {
        let v: Vec<f64> = synthesize_complex(g, m)?.into_iter().map(|z| z.re).collect();
        Ok(quadrature::integrate_abs_pow(&v, p).powf(1.0 / p))
    };
    refine(p, base, opts, eval)
}

/// Spectra with at most this many nonzeros get their grid maximum polished.
const POLISH_MAX_NNZ: usize = 1 << 15;
const POLISH_CANDIDATES: usize = 16;

/// Newton steps on f′ = 0 from the largest local maxima of |f| on the grid;
/// the plain grid maximum can be low by (π/oversample)²/2 relative.
fn polish_max(g: &TorusFunction, v: &[f64], best: f64) -> f64 {
    let m = v.len();
    let mut cands: Vec<usize> = (0..m)
        .filter(|&i| {
            let a = v[i].abs();
            a >= 0.8 * best && a >= v[(i + m - 1) % m].abs() && a >= v[(i + 1) % m].abs()
        })
        .collect();
    cands.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()));
    cands.truncate(POLISH_CANDIDATES);
    let (d1, d2) = (g.derivative(1), g.derivative(2));
    let h = 1.0 / m as f64;
    let mut out = best;
    for i in cands {
        let x0 = i as f64 * h;
        let mut x = x0;
        for _ in 0..8 {
            let f2 = d2.eval(x);
            if f2 == 0.0 {
                break;
            }
            let step = (d1.eval(x) / f2).clamp(-h, h);
            x -= step;
            if step.abs() < 1e-15 || (x - x0).abs() > 2.0 * h {
                break;
            }
        }
        if (x - x0).abs() <= 2.0 * h {
            out = out.max(g.eval(x).abs());
        }
    }
    out
}

fn refine<F>(p: f64, base: usize, opts: &LpOptions, eval: F) -> Result<f64, NormError>
where
    F: Fn(usize) -> Result<f64, NormError>,
{
    let mut prev = eval(base)?;
    let mut rel_change = f64::INFINITY;
    for k in 1..=opts.max_doublings {
        let m = base << k;
        if m > opts.max_grid {
            break;
        }
        let cur = eval(m)?;
        rel_change = (cur - prev).abs() / cur.abs().max(f64::MIN_POSITIVE);
        if rel_change < opts.rel_tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(NormError::NoConvergence { p, rel_change })
}

/// ∫_0^1 |cos 2πt|^p dt = Γ((p+1)/2) / (√π Γ(p/2 + 1)).
pub fn cos_moment(p: f64) -> f64 {
    gamma((p + 1.0) / 2.0) / (std::f64::consts::PI.sqrt() * gamma(p / 2.0 + 1.0))
}

fn envelope_norm(g: &TorusFunction, p: f64, opts: &LpOptions) -> Result<Option<f64>, NormError> {
    if g.coeff(0) != Complex64::ZERO {
        return Ok(None);
    }
    let Some((lo, hi)) = g.positive_support() else {
        return Ok(None);
    };
    let c = (lo + hi) / 2;
    let half = (c - lo).max(hi - c);
    if c < opts.envelope_ratio * (half + 1) {
        return Ok(None);
    }
    let width = (2 * half + 1) as usize;
    let base = next_pow2(opts.oversample * width);
    if base > opts.max_grid / 2 {
        return Ok(None);
    }
    let positive: Vec<(i64, Complex64)> = g.nonzeros().filter(|(xi, _)| *xi > 0).collect();
    let samples = |m: usize| -> Vec<Complex64> {
        let mut buf = vec![Complex64::ZERO; m];
        let mi = m as i64;
        for (xi, z) in &positive {
            buf[(xi - c).rem_euclid(mi) as usize] = *z;
        }
        fft_inverse(&mut buf);
        buf
    };
    if p.is_infinite() {
        let v = samples(base);
        return Ok(Some(2.0 * v.iter().map(|z| z.norm()).fold(0.0, f64::max)));
    }
    let probe = samples(base);
    let re_max = probe.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let im_max = probe.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let real_envelope = im_max <= 1e-12 * re_max;
    drop(probe);
    let mp = cos_moment(p);
    let eval = |m: usize| -> Result<f64, NormError> {
        let v = samples(m);
        let integral = if real_envelope {
            let re: Vec<f64> = v.into_iter().map(|z| z.re).collect();
            quadrature::integrate_abs_pow(&re, p)
        } else {
            let modulus: Vec<f64> = v.into_iter().map(|z| z.norm()).collect();
            quadrature::trapezoid_abs_pow(&modulus, p)
        };
        Ok(2.0 * (mp * integral).powf(1.0 / p))
    };
    refine(p, base, opts, eval).map(Some)
}

/// (Σ_{ξ≠0} |ξ|^{2s}|f̂(ξ)|²)^{1/2}.
pub fn sobolev_norm(f: &TorusFunction, s: f64) -> f64 {
    let int = s.fract() == 0.0 && s.abs() < 64.0;
    let mut acc = 0.0;
    for b in f.bands() {
        for (i, c) in b.coeffs().iter().enumerate() {
            let xi = b.start() + i as i64;
            if xi == 0 || *c == Complex64::ZERO {
                continue;
            }
            let a = xi.unsigned_abs() as f64;
            let w = if int { a.powi(s as i32) } else { a.powf(s) };
            acc += (w * c.norm()).powi(2);
        }
    }
    acc.sqrt()
}

/// ‖(2^{jα}‖P_{2^j}f‖_{L^p})_{j≥0}‖_{ℓ^q}.
pub fn besov_norm(filter: &LpFilter, f: &TorusFunction, alpha: f64, p: f64, q: f64) -> Result<f64, NormError> {
    if q.is_nan() || q <= 0.0 {
        return Err(NormError::InvalidExponent(q));
    }
    let mut terms = Vec::new();
    for j in filter.active_shells(f) {
        let shell = filter.project_shell(f, j);
        terms.push(2f64.powf(j as f64 * alpha) * lp_norm(&shell, p)?);
    }
    Ok(if q.is_infinite() {
        terms.into_iter().fold(0.0, f64::max)
    } else {
        terms.into_iter().map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
    })
}

/// max_{0≤m≤k} ‖f^{(m)}‖_{L^∞}.
pub fn ck_norm(f: &TorusFunction, k: u32) -> Result<f64, NormError> {
    let mut best: f64 = 0.0;
    for m in 0..=k {
        best = best.max(lp_norm(&f.derivative(m), f64::INFINITY)?);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormRequest {
    Lp { p: f64 },
    SobolevHomog { s: f64 },
    Besov { alpha: f64, p: f64, q: f64 },
    Ck { k: u32 },
}

impl NormRequest {
    pub fn evaluate(&self, filter: &LpFilter, f: &TorusFunction) -> Result<f64, NormError> {
        match *self {
            NormRequest::Lp { p } => lp_norm(f, p),
            NormRequest::SobolevHomog { s } => Ok(sobolev_norm(f, s)),
            NormRequest::Besov { alpha, p, q } => besov_norm(filter, f, alpha, p, q),
            NormRequest::Ck { k } => ck_norm(f, k),
        }
    }
}
