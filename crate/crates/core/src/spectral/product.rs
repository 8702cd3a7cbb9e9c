//! Exact (untruncated) coefficient convolution.
//!
//! Each pair of bands is convolved either by direct scatter over the
//! nonzeros of the sparser band or by a zero-padded FFT, whichever is
//! cheaper. FFT round-off is absolute, of size ε·‖a‖₂‖b‖₂ per output; for
//! large bands the lowest output frequencies |ξ| ≤ [`EXACT_LOW_BAND`] are
//! recomputed with compensated summation so that derivatives of products
//! (which only weight low frequencies mildly under negative Sobolev norms)
//! stay accurate.

use super::{fft_forward, fft_inverse, gcd, next_pow2, Band, Part, TorusFunction};
use num_complex::Complex64;
use std::collections::HashMap;

/// Output frequencies recomputed with compensated sums.
pub const EXACT_LOW_BAND: i64 = 16;
/// Band pairs with ‖a‖₂‖b‖₂ below this leave the FFT result as is.
const COMPENSATE_ABOVE: f64 = 1e3;

/// Coefficients of the pointwise product f·g.
pub fn product(f: &TorusFunction, g: &TorusFunction) -> TorusFunction {
    if f.is_zero() || g.is_zero() {
        return TorusFunction::zero();
    }
    let same = std::ptr::eq(f, g);
    let d = gcd(f.support_gcd(), g.support_gcd());
    if d > 1 {
        let fr = f.reduce(d);
        let h = if same { product_core(&fr, &fr, true) } else { product_core(&fr, &g.reduce(d), false) };
        return h.dilate(d);
    }
    product_core(f, g, same)
}

/// A single coefficient (f·g)^(ξ) by compensated direct summation.
pub fn product_coefficient(f: &TorusFunction, g: &TorusFunction, xi: i64) -> Complex64 {
    let mut acc = Dot2::default();
    for a in f.bands() {
        for b in g.bands() {
            acc.add_band_pair(a, b, xi);
        }
    }
    acc.value()
}

fn product_core(f: &TorusFunction, g: &TorusFunction, same: bool) -> TorusFunction {
    let (fb, gb) = (f.bands(), g.bands());
    let fn2: Vec<f64> = fb.iter().map(Band::l2).collect();
    let gn2: Vec<f64> = if same { fn2.clone() } else { gb.iter().map(Band::l2).collect() };
    let mut cache = SpectrumCache::default();
    let mut outs: Vec<(i64, Vec<Complex64>)> = Vec::new();
    for (i, a) in fb.iter().enumerate() {
        let j0 = if same { i } else { 0 };
        for (j, b) in gb.iter().enumerate().skip(j0) {
            let mut out = convolve(a, b, (0, i), (if same { 0 } else { 1 }, j), &mut cache);
            if fn2[i] * gn2[j] >= COMPENSATE_ABOVE {
                compensate_low(a, b, &mut out);
            }
            if same && j > i {
                out.iter_mut().for_each(|c| *c *= 2.0);
            }
            outs.push((a.start() + b.start(), out));
        }
    }
    let parts: Vec<Part> = outs.iter().map(|(s, c)| Part { start: *s, coeffs: c, scale: Complex64::ONE }).collect();
    TorusFunction::assemble(&parts)
}

#[derive(Default)]
struct SpectrumCache {
    map: HashMap<(u8, usize, usize), Vec<Complex64>>,
}

impl SpectrumCache {
    fn ensure(&mut self, key: (u8, usize), band: &Band, n: usize) {
        self.map.entry((key.0, key.1, n)).or_insert_with(|| {
            let mut buf = vec![Complex64::ZERO; n];
            buf[..band.len()].copy_from_slice(band.coeffs());
            fft_forward(&mut buf);
            buf
        });
    }

    fn get(&self, key: (u8, usize), n: usize) -> &[Complex64] {
        &self.map[&(key.0, key.1, n)]
    }
}

fn convolve(a: &Band, b: &Band, ka: (u8, usize), kb: (u8, usize), cache: &mut SpectrumCache) -> Vec<Complex64> {
    let out_len = a.len() + b.len() - 1;
    let n = next_pow2(out_len);
    let (na, nb) = (a.nnz(), b.nnz());
    let direct_cost = (na.min(nb) as f64) * (if na <= nb { b.len() } else { a.len() }) as f64;
    let fft_cost = 2.0 * n as f64 * (n as f64).log2().max(1.0);
    if direct_cost <= fft_cost {
        let (s, d) = if na <= nb { (a, b) } else { (b, a) };
        let mut out = vec![Complex64::ZERO; out_len];
        for (i, x) in s.coeffs().iter().enumerate() {
            if *x == Complex64::ZERO {
                continue;
            }
            for (o, y) in out[i..i + d.len()].iter_mut().zip(d.coeffs()) {
                *o += *x * *y;
            }
        }
        return out;
    }
    cache.ensure(ka, a, n);
    cache.ensure(kb, b, n);
    let (sa, sb) = (cache.get(ka, n), cache.get(kb, n));
    let mut buf: Vec<Complex64> = sa.iter().zip(sb.iter()).map(|(x, y)| x * y).collect();
    fft_inverse(&mut buf);
    let inv = 1.0 / n as f64;
    buf.truncate(out_len);
    buf.iter_mut().for_each(|c| *c *= inv);
    buf
}

fn compensate_low(a: &Band, b: &Band, out: &mut [Complex64]) {
    let lo = a.start() + b.start();
    let hi = lo + out.len() as i64 - 1;
    let (k0, k1) = (lo.max(-EXACT_LOW_BAND), hi.min(EXACT_LOW_BAND));
    for xi in k0..=k1 {
        let mut acc = Dot2::default();
        acc.add_band_pair(a, b, xi);
        out[(xi - lo) as usize] = acc.value();
    }
}

/// Error-free transformations for sums of products (Ogita–Rump–Oishi Dot2),
/// independent of hardware FMA.
#[derive(Default)]
struct Dot2 {
    re: (f64, f64),
    im: (f64, f64),
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, al * bl - (((p - ah * bh) - al * bh) - ah * bl))
}

#[inline]
fn acc_term(acc: &mut (f64, f64), a: f64, b: f64) {
    let (p, e) = two_prod(a, b);
    let (s, t) = two_sum(acc.0, p);
    acc.0 = s;
    acc.1 += t + e;
}

impl Dot2 {
    fn add_band_pair(&mut self, a: &Band, b: &Band, xi: i64) {
        // terms a(η) b(ξ − η) with η in a and ξ − η in b
        let lo = a.start().max(xi - b.end());
        let hi = a.end().min(xi - b.start());
        if lo > hi {
            return;
        }
        let (ac, bc) = (a.coeffs(), b.coeffs());
        for eta in lo..=hi {
            let x = ac[(eta - a.start()) as usize];
            if x == Complex64::ZERO {
                continue;
            }
            let y = bc[(xi - eta - b.start()) as usize];
            acc_term(&mut self.re, x.re, y.re);
            acc_term(&mut self.re, -x.im, y.im);
            acc_term(&mut self.im, x.re, y.im);
            acc_term(&mut self.im, x.im, y.re);
        }
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{analyze, synthesize, GridSamples};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_fn(rng: &mut ChaCha8Rng, n: i64) -> TorusFunction {
        let mut pairs = vec![(0, Complex64::new(rng.random_range(-1.0..1.0), 0.0))];
        for xi in 1..=n {
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            pairs.push((xi, c));
            pairs.push((-xi, c.conj()));
        }
        TorusFunction::from_pairs(pairs).unwrap()
    }

    #[test]
    fn identity_and_sine_square() {
        let s = TorusFunction::sin_mode(1.0, 1);
        assert_eq!(product(&s, &TorusFunction::constant(1.0)), s);
        let want = TorusFunction::constant(0.5).add(&TorusFunction::cos_mode(-0.5, 2));
        assert!(product(&s, &s).max_coeff_diff(&want) < 1e-16);
    }

    #[test]
    fn matches_grid_multiplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = random_fn(&mut rng, 32);
        let g = random_fn(&mut rng, 32);
        let m = 2 * 64 + 1;
        let (sf, sg) = (synthesize(&f, m).unwrap(), synthesize(&g, m).unwrap());
        let vals = sf.values.iter().zip(&sg.values).map(|(a, b)| a * b).collect();
        let oracle = analyze(&GridSamples::new(vals), 64).unwrap();
        assert!(product(&f, &g).max_coeff_diff(&oracle) < 1e-11);
    }

    #[test]
    fn direct_and_fft_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_fn(&mut rng, 700);
        let g = random_fn(&mut rng, 3);
        let fft = product(&f, &f);
        let direct = product(&f, &g);
        for xi in [-1403i64, -5, 0, 7, 1400] {
            let want = product_coefficient(&f, &f, xi);
            assert!((fft.coeff(xi) - want).norm() < 1e-11);
            let want = product_coefficient(&f, &g, xi);
            assert!((direct.coeff(xi) - want).norm() < 1e-13);
        }
    }

    #[test]
    fn lacunary_product_uses_reduced_grid() {
        let f = TorusFunction::cos_mode(1.0, 1 << 30).add(&TorusFunction::cos_mode(0.5, 3 << 30));
        let p = product(&f, &f);
        assert!((p.coeff(0).re - 0.625).abs() < 1e-15);
        assert!((p.coeff(2 << 30).re - 0.5).abs() < 1e-15);
        assert!((p.coeff(4 << 30).re - 0.25).abs() < 1e-15);
        assert!((p.coeff(6 << 30).re - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_beats_naive_cancellation() {
        let big = 1e8;
        let a = Band::new(0, vec![Complex64::new(big, 0.0), Complex64::new(1.0, 0.0), Complex64::new(-big, 0.0)]);
        let b = Band::new(0, vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
        let mut acc = Dot2::default();
        acc.add_band_pair(&a, &b, 2);
        assert_eq!(acc.value(), Complex64::new(1.0, 0.0));
    }
}
