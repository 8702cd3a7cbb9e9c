//! Real band-limited functions on T = [0, 1] stored by their Fourier
//! coefficients against the characters e^{2πiξx}.
//!
//! Coefficients live in a sorted list of contiguous bands. Functions whose
//! frequency radius is at most [`DENSE_LIMIT`] are kept as one symmetric
//! dense band; beyond that, bands separated by long zero runs stay apart,
//! which keeps spectra clustered around ±σ (σ ~ 10^10) storable.

mod grid;
mod product;

pub use grid::{analyze, pointwise_map, pointwise_map_with, synthesize, GridSamples, MapOptions};
pub(crate) use grid::{fft_forward, fft_inverse, next_pow2, synthesize_complex};
pub use product::{product, product_coefficient};

use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Frequency radius up to which functions are stored as a single dense band.
pub const DENSE_LIMIT: i64 = 1 << 20;
/// Bands closer than this are merged when assembled.
const MERGE_GAP: i64 = 64;
/// Zero runs at least this long split a band in sparse storage.
const SPLIT_RUN: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid of {m} points cannot resolve max frequency {max_freq}")]
    ResolutionTooSmall { m: usize, max_freq: i64 },
    #[error("synthesized samples are not real: imaginary residue {residue:e} exceeds {threshold:e}")]
    NonReal { residue: f64, threshold: f64 },
    #[error("discarded tail has relative l2 mass {ratio:e}, above tolerance {tol:e}")]
    TailTooLarge { ratio: f64, tol: f64 },
    #[error("pointwise map returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
    #[error("coefficients violate Hermitian symmetry at frequency {xi}")]
    NotHermitian { xi: i64 },
}

/// A contiguous run of coefficients for frequencies `start .. start + len`.
#[derive(Clone, Debug)]
pub struct Band {
    start: i64,
    coeffs: Vec<Complex64>,
}

impl Band {
    pub fn new(start: i64, coeffs: Vec<Complex64>) -> Self {
        Band { start, coeffs }
    }
    pub fn start(&self) -> i64 {
        self.start
    }
    /// Last frequency of the band (inclusive).
    pub fn end(&self) -> i64 {
        self.start + self.coeffs.len() as i64 - 1
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
    pub(crate) fn l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
    pub(crate) fn nnz(&self) -> usize {
        self.coeffs.iter().filter(|c| **c != Complex64::ZERO).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Storage {
    Dense,
    Sparse,
}

/// Real-valued trigonometric polynomial on T = [0, 1].
#[derive(Clone, Debug, Default)]
pub struct TorusFunction {
    bands: Vec<Band>,
}

impl PartialEq for TorusFunction {
    /// Coefficient-wise equality, independent of the band layout.
    fn eq(&self, other: &Self) -> bool {
        self.nonzeros().eq(other.nonzeros())
    }
}

/// A piece of a linear combination: `scale · coeffs`, placed at `start`.
pub(crate) struct Part<'a> {
    pub start: i64,
    pub coeffs: &'a [Complex64],
    pub scale: Complex64,
}

impl TorusFunction {
    pub fn zero() -> Self {
        TorusFunction { bands: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_parts_owned(vec![(0, vec![Complex64::new(c, 0.0)])])
    }

    /// `amp · sin(2π·freq·x)`.
    pub fn sin_mode(amp: f64, freq: i64) -> Self {
        if freq == 0 {
            return Self::zero();
        }
        let c = Complex64::new(0.0, -amp / 2.0);
        Self::from_pairs_unchecked([(freq, c), (-freq, c.conj())])
    }

    /// `amp · cos(2π·freq·x)`.
    pub fn cos_mode(amp: f64, freq: i64) -> Self {
        if freq == 0 {
            return Self::constant(amp);
        }
        let c = Complex64::new(amp / 2.0, 0.0);
        Self::from_pairs_unchecked([(freq, c), (-freq, c)])
    }

    /// Builds a function from `(ξ, f̂(ξ))` pairs. Repeated frequencies add up.
    /// The pairs must be Hermitian-symmetric to 1e-12 relative; the stored
    /// coefficients are then symmetrized exactly.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, SpectralError>
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        let f = Self::assemble_raw(pairs_to_parts(pairs));
        let scale = f.max_abs_coeff().max(f64::MIN_POSITIVE);
        for (xi, c) in f.raw_nonzeros() {
            let d = (f.coeff_raw(-xi) - c.conj()).norm();
            if d > 1e-12 * scale {
                return Err(SpectralError::NotHermitian { xi });
            }
        }
        Ok(f.finish())
    }

    pub(crate) fn from_pairs_unchecked<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (i64, Complex64)>,
    {
        Self::assemble_raw(pairs_to_parts(pairs)).finish()
    }

    /// Dense coefficients `coeffs[ξ + max_freq]` for |ξ| ≤ max_freq.
    pub fn from_dense(max_freq: i64, coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        assert_eq!(coeffs.len() as i64, 2 * max_freq + 1, "dense length mismatch");
        let pairs: Vec<_> = coeffs.into_iter().enumerate().map(|(i, c)| (i as i64 - max_freq, c)).collect();
        Self::from_pairs(pairs)
    }

    pub(crate) fn from_parts_owned(parts: Vec<(i64, Vec<Complex64>)>) -> Self {
        let views: Vec<Part> =
            parts.iter().map(|(s, c)| Part { start: *s, coeffs: c, scale: Complex64::ONE }).collect();
        Self::assemble(&views)
    }

    /// Sums scaled pieces into a normalized function.
    pub(crate) fn assemble(parts: &[Part]) -> Self {
        Self::assemble_raw_parts(parts).finish()
    }

    fn assemble_raw(parts: Vec<(i64, Vec<Complex64>)>) -> Self {
        let views: Vec<Part> =
            parts.iter().map(|(s, c)| Part { start: *s, coeffs: c, scale: Complex64::ONE }).collect();
        Self::assemble_raw_parts(&views)
    }

    /// Accumulates the parts into disjoint, sorted bands without
    /// symmetrizing or trimming.
    fn assemble_raw_parts(parts: &[Part]) -> Self {
        let mut spans: Vec<(i64, i64)> = parts
            .iter()
            .filter(|p| !p.coeffs.is_empty())
            .map(|p| (p.start, p.start + p.coeffs.len() as i64 - 1))
            .collect();
        // Mirror every interval so the layout is symmetric about 0.
        let mirrored: Vec<(i64, i64)> = spans.iter().map(|&(a, b)| (-b, -a)).collect();
        spans.extend(mirrored);
        let intervals = merge_intervals(spans);
        let mut bands: Vec<Band> =
            intervals.iter().map(|&(a, b)| Band::new(a, vec![Complex64::ZERO; (b - a + 1) as usize])).collect();
        for p in parts.iter().filter(|p| !p.coeffs.is_empty()) {
            let idx = match bands.binary_search_by(|b| b.start.cmp(&p.start)) {
                Ok(i) => i,
                Err(i) => i - 1,
            };
            let band = &mut bands[idx];
            let off = (p.start - band.start) as usize;
            let dst = &mut band.coeffs[off..off + p.coeffs.len()];
            if p.scale == Complex64::ONE {
                for (d, s) in dst.iter_mut().zip(p.coeffs) {
                    *d += *s;
                }
            } else {
                for (d, s) in dst.iter_mut().zip(p.coeffs) {
                    *d += p.scale * *s;
                }
            }
        }
        TorusFunction { bands }
    }

    /// Symmetrizes exactly, trims zeros and chooses the storage layout.
    /// Requires a layout symmetric about 0 (guaranteed by `assemble_raw_parts`).
    fn finish(mut self) -> Self {
        self.hermitize();
        let max_freq = self.raw_nonzeros().map(|(xi, _)| xi.abs()).max();
        let Some(n) = max_freq else {
            return Self::zero();
        };
        if n <= DENSE_LIMIT {
            let mut dense = vec![Complex64::ZERO; (2 * n + 1) as usize];
            for b in &self.bands {
                for (i, c) in b.coeffs.iter().enumerate() {
                    let xi = b.start + i as i64;
                    if xi.abs() <= n {
                        dense[(xi + n) as usize] = *c;
                    }
                }
            }
            return TorusFunction { bands: vec![Band::new(-n, dense)] };
        }
        let mut out = Vec::new();
        for b in self.bands {
            split_band(b, &mut out);
        }
        TorusFunction { bands: out }
    }

    fn hermitize(&mut self) {
        let nb = self.bands.len();
        for i in 0..nb {
            let j = nb - 1 - i;
            if i > j {
                break;
            }
            let (si, ei) = (self.bands[i].start, self.bands[i].end());
            debug_assert_eq!(self.bands[j].start, -ei);
            debug_assert_eq!(self.bands[j].end(), -si);
            let len = self.bands[i].len();
            if i == j {
                // Band symmetric about 0.
                let b = &mut self.bands[i].coeffs;
                for k in 0..len / 2 {
                    let m = len - 1 - k;
                    let avg = (b[m] + b[k].conj()) * 0.5;
                    b[m] = avg;
                    b[k] = avg.conj();
                }
                if len % 2 == 1 {
                    b[len / 2].im = 0.0;
                }
            } else {
                let (left, right) = self.bands.split_at_mut(j);
                let bi = &mut left[i].coeffs;
                let bj = &mut right[0].coeffs;
                for (lo, hi) in bi.iter_mut().zip(bj.iter_mut().rev()) {
                    let avg = (*hi + lo.conj()) * 0.5;
                    *hi = avg;
                    *lo = avg.conj();
                }
            }
        }
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn storage(&self) -> Storage {
        if self.bands.len() <= 1 {
            Storage::Dense
        } else {
            Storage::Sparse
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bands.is_empty()
    }

    /// Radius of the frequency support (0 for constants and for zero).
    pub fn max_freq(&self) -> i64 {
        match (self.bands.first(), self.bands.last()) {
            (Some(a), Some(b)) => a.start.abs().max(b.end().abs()),
            _ => 0,
        }
    }

    pub fn coeff(&self, xi: i64) -> Complex64 {
        self.coeff_raw(xi)
    }

    fn coeff_raw(&self, xi: i64) -> Complex64 {
        let idx = match self.bands.binary_search_by(|b| b.start.cmp(&xi)) {
            Ok(i) => i,
            Err(0) => return Complex64::ZERO,
            Err(i) => i - 1,
        };
        let b = &self.bands[idx];
        if xi <= b.end() {
            b.coeffs[(xi - b.start) as usize]
        } else {
            Complex64::ZERO
        }
    }

    /// Nonzero coefficients in increasing frequency order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.raw_nonzeros()
    }

    fn raw_nonzeros(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.bands.iter().flat_map(|b| {
            b.coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != Complex64::ZERO)
                .map(move |(i, c)| (b.start + i as i64, *c))
        })
    }

    pub fn nnz(&self) -> usize {
        self.bands.iter().map(Band::nnz).sum()
    }

    pub fn mean(&self) -> f64 {
        self.coeff(0).re
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.bands.iter().flat_map(|b| b.coeffs.iter()).map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// ℓ¹ norm of the coefficients, an upper bound for the sup norm.
    pub fn coeff_l1(&self) -> f64 {
        self.bands.iter().flat_map(|b| b.coeffs.iter()).map(|c| c.norm()).sum()
    }

    /// Σ|f̂(ξ)|², the squared L² norm.
    pub fn coeff_l2_sq(&self) -> f64 {
        self.bands.iter().flat_map(|b| b.coeffs.iter()).map(|c| c.norm_sqr()).sum()
    }

    /// Smallest and largest positive frequency carrying a nonzero coefficient.
    pub fn positive_support(&self) -> Option<(i64, i64)> {
        let mut it = self.raw_nonzeros().filter(|(xi, _)| *xi > 0).map(|(xi, _)| xi);
        let lo = it.next()?;
        let hi = it.last().unwrap_or(lo);
        Some((lo, hi))
    }

    /// gcd of all nonzero frequencies (0 for constants and zero).
    pub fn support_gcd(&self) -> i64 {
        let mut g = 0i64;
        for (xi, _) in self.raw_nonzeros() {
            g = gcd(g, xi.abs());
            if g == 1 {
                return 1;
            }
        }
        g
    }

    /// The function y ↦ f(y/d) for f supported on dℤ: frequencies divided by d.
    pub fn reduce(&self, d: i64) -> Self {
        assert!(d >= 1);
        if d == 1 {
            return self.clone();
        }
        let pairs = self.raw_nonzeros().map(|(xi, c)| {
            debug_assert_eq!(xi % d, 0);
            (xi / d, c)
        });
        Self::from_pairs_unchecked(pairs.collect::<Vec<_>>())
    }

    /// The function x ↦ f(d·x): frequencies multiplied by d.
    pub fn dilate(&self, d: i64) -> Self {
        assert!(d >= 1);
        if d == 1 {
            return self.clone();
        }
        let pairs: Vec<_> = self.raw_nonzeros().map(|(xi, c)| (xi * d, c)).collect();
        Self::from_pairs_unchecked(pairs)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_coeffs(|_, c| c * s)
    }

    /// Σ scale_i · f_i.
    pub fn linear_combination(terms: &[(f64, &TorusFunction)]) -> Self {
        let parts: Vec<Part> = terms
            .iter()
            .flat_map(|(s, f)| {
                f.bands.iter().map(move |b| Part { start: b.start, coeffs: &b.coeffs, scale: Complex64::new(*s, 0.0) })
            })
            .collect();
        Self::assemble(&parts)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::linear_combination(&[(1.0, self), (1.0, other)])
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::linear_combination(&[(1.0, self), (-1.0, other)])
    }

    /// Applies a frequency-dependent map to every stored coefficient.
    pub fn map_coeffs<F: Fn(i64, Complex64) -> Complex64>(&self, f: F) -> Self {
        let bands = self
            .bands
            .iter()
            .map(|b| {
                let coeffs = b.coeffs.iter().enumerate().map(|(i, c)| f(b.start + i as i64, *c)).collect();
                Band::new(b.start, coeffs)
            })
            .collect();
        TorusFunction { bands }.finish()
    }

    /// Keeps the coefficients whose |ξ| lies in `[lo, hi]`, weighted by `w(|ξ|)`.
    /// Bands outside the window are skipped without being touched.
    pub fn window<W: Fn(i64) -> f64>(&self, lo: i64, hi: i64, w: W) -> Self {
        let mut parts = Vec::new();
        for b in &self.bands {
            // ξ = 0 belongs to the positive window only.
            let neg_top = if lo == 0 { -1 } else { -lo };
            for (a, z) in [(lo, hi), (-hi, neg_top)] {
                let s = b.start.max(a);
                let e = b.end().min(z);
                if s > e {
                    continue;
                }
                let seg: Vec<Complex64> = (s..=e).map(|xi| b.coeffs[(xi - b.start) as usize] * w(xi.abs())).collect();
                parts.push((s, seg));
            }
        }
        Self::from_parts_owned(parts)
    }

    /// Coefficients multiplied by (2πiξ)^order.
    pub fn derivative(&self, order: u32) -> Self {
        if order == 0 {
            return self.clone();
        }
        let unit = match order % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        self.map_coeffs(|xi, c| c * unit * (2.0 * PI * xi as f64).powi(order as i32))
    }

    /// f − P_{=0} f.
    pub fn without_mean(&self) -> Self {
        self.map_coeffs(|xi, c| if xi == 0 { Complex64::ZERO } else { c })
    }

    /// Largest coefficient-wise difference between two functions.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs_coeff()
    }

    /// Whether every stored coefficient satisfies f̂(−ξ) = conj f̂(ξ) exactly.
    pub fn is_hermitian(&self) -> bool {
        self.raw_nonzeros().all(|(xi, c)| self.coeff_raw(-xi) == c.conj()) && self.coeff(0).im == 0.0
    }

    /// Point evaluation by direct summation.
    pub fn eval(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for (xi, c) in self.raw_nonzeros() {
            let th = 2.0 * PI * (xi as f64) * x;
            s += c.re * th.cos() - c.im * th.sin();
        }
        s
    }
}

impl std::ops::Add for &TorusFunction {
    type Output = TorusFunction;
    fn add(self, rhs: &TorusFunction) -> TorusFunction {
        TorusFunction::add(self, rhs)
    }
}

impl std::ops::Sub for &TorusFunction {
    type Output = TorusFunction;
    fn sub(self, rhs: &TorusFunction) -> TorusFunction {
        TorusFunction::sub(self, rhs)
    }
}

impl std::ops::Neg for &TorusFunction {
    type Output = TorusFunction;
    fn neg(self) -> TorusFunction {
        self.scale(-1.0)
    }
}

impl std::ops::Mul<f64> for &TorusFunction {
    type Output = TorusFunction;
    fn mul(self, rhs: f64) -> TorusFunction {
        self.scale(rhs)
    }
}

impl std::ops::Mul for &TorusFunction {
    type Output = TorusFunction;
    fn mul(self, rhs: &TorusFunction) -> TorusFunction {
        product(self, rhs)
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn pairs_to_parts<I>(pairs: I) -> Vec<(i64, Vec<Complex64>)>
where
    I: IntoIterator<Item = (i64, Complex64)>,
{
    let mut v: Vec<(i64, Complex64)> = pairs.into_iter().collect();
    v.sort_by_key(|p| p.0);
    let mut parts: Vec<(i64, Vec<Complex64>)> = Vec::new();
    for (xi, c) in v {
        match parts.last_mut() {
            Some((s, run)) if *s + run.len() as i64 - 1 == xi => {
                *run.last_mut().unwrap() += c;
            }
            Some((s, run)) if *s + run.len() as i64 == xi => run.push(c),
            _ => parts.push((xi, vec![c])),
        }
    }
    parts
}

fn merge_intervals(mut spans: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    spans.sort_unstable();
    let mut out: Vec<(i64, i64)> = Vec::new();
    for (a, b) in spans {
        match out.last_mut() {
            Some((_, e)) if a <= *e + MERGE_GAP => *e = (*e).max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Trims zeros and splits at long zero runs, appending the pieces to `out`.
fn split_band(b: Band, out: &mut Vec<Band>) {
    let n = b.coeffs.len();
    let mut i = 0;
    while i < n {
        while i < n && b.coeffs[i] == Complex64::ZERO {
            i += 1;
        }
        if i == n {
            break;
        }
        let s = i;
        let mut last_nz = i;
        let mut run = 0usize;
        while i < n {
            if b.coeffs[i] == Complex64::ZERO {
                run += 1;
                if run >= SPLIT_RUN {
                    break;
                }
            } else {
                run = 0;
                last_nz = i;
            }
            i += 1;
        }
        out.push(Band::new(b.start + s as i64, b.coeffs[s..=last_nz].to_vec()));
        i = last_nz + 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sine_coefficients() {
        let f = TorusFunction::sin_mode(1.0, 1);
        assert_eq!(f.coeff(1), c(0.0, -0.5));
        assert_eq!(f.coeff(-1), c(0.0, 0.5));
        assert_eq!(f.max_freq(), 1);
        assert!(f.is_hermitian());
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let r = TorusFunction::from_pairs([(2, c(1.0, 0.0)), (-2, c(0.5, 0.0))]);
        assert!(matches!(r, Err(SpectralError::NotHermitian { .. })));
    }

    #[test]
    fn sparse_and_dense_layouts_compare_equal() {
        let far = DENSE_LIMIT * 4;
        let pairs = [(far, c(1.0, 2.0)), (-far, c(1.0, -2.0)), (3, c(0.5, 0.0)), (-3, c(0.5, 0.0))];
        let sparse = TorusFunction::from_pairs(pairs).unwrap();
        assert_eq!(sparse.storage(), Storage::Sparse);
        assert_eq!(sparse.bands().len(), 3);
        let low = TorusFunction::cos_mode(1.0, 3);
        assert_eq!(low.storage(), Storage::Dense);
        let back = sparse.sub(&TorusFunction::from_pairs([(far, c(1.0, 2.0)), (-far, c(1.0, -2.0))]).unwrap());
        assert_eq!(back, low);
        assert_eq!(back.storage(), Storage::Dense);
    }

    #[test]
    fn derivative_of_sine() {
        let f = TorusFunction::sin_mode(1.0, 1).derivative(1);
        let g = TorusFunction::cos_mode(2.0 * PI, 1);
        assert!(f.max_coeff_diff(&g) < 1e-15);
        assert!(TorusFunction::constant(3.0).derivative(2).is_zero());
    }

    #[test]
    fn reduce_and_dilate_round_trip() {
        let f = TorusFunction::cos_mode(1.0, 12).add(&TorusFunction::sin_mode(0.3, 8));
        assert_eq!(f.support_gcd(), 4);
        assert_eq!(f.reduce(4).dilate(4), f);
    }

    #[test]
    fn window_restricts_support() {
        let f = TorusFunction::cos_mode(1.0, 2).add(&TorusFunction::cos_mode(1.0, 9));
        let w = f.window(5, 20, |_| 1.0);
        assert_eq!(w, TorusFunction::cos_mode(1.0, 9));
        let z = f.window(0, 20, |_| 1.0);
        assert_eq!(z, f);
    }

    #[test]
    fn long_zero_runs_split_sparse_bands() {
        let big = DENSE_LIMIT + 10;
        let mut run = vec![Complex64::ZERO; 6000];
        run[0] = c(1.0, 0.0);
        run[10] = c(2.0, 0.0);
        run[5999] = c(3.0, 0.0);
        let mirror: Vec<Complex64> = run.iter().rev().copied().collect();
        let f = TorusFunction::from_parts_owned(vec![(big, run), (-big - 5999, mirror)]);
        assert_eq!(f.bands().len(), 4);
        assert_eq!(f.nnz(), 6);
        assert_eq!(f.coeff(big + 10), c(2.0, 0.0));
        assert_eq!(f.coeff(-big - 5999), c(3.0, 0.0));
    }

    #[test]
    fn point_evaluation() {
        let f = TorusFunction::sin_mode(2.0, 3);
        assert!((f.eval(1.0 / 12.0) - 2.0).abs() < 1e-14);
    }
}
