use super::{SpectralError, TorusFunction};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Samples of a real function on the uniform grid x_k = k/M.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSamples {
    pub values: Vec<f64>,
}

impl GridSamples {
    pub fn new(values: Vec<f64>) -> Self {
        GridSamples { values }
    }
    pub fn resolution(&self) -> usize {
        self.values.len()
    }
}

pub(crate) fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Unnormalized inverse transform: out_k = Σ_j buf_j e^{+2πijk/M}.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
}

fn check_resolution(m: usize, max_freq: i64) -> Result<(), SpectralError> {
    if (m as i64) < 2 * max_freq + 1 {
        return Err(SpectralError::ResolutionTooSmall { m, max_freq });
    }
    Ok(())
}

/// Complex samples Σ f̂(ξ) e^{2πiξk/M}; imaginary parts are round-off.
pub(crate) fn synthesize_complex(f: &TorusFunction, m: usize) -> Result<Vec<Complex64>, SpectralError> {
    check_resolution(m, f.max_freq())?;
    let mut buf = vec![Complex64::ZERO; m];
    let mi = m as i64;
    for (xi, c) in f.nonzeros() {
        buf[xi.rem_euclid(mi) as usize] = c;
    }
    fft_inverse(&mut buf);
    Ok(buf)
}

/// Evaluates f on the M-point grid.
///
/// The imaginary residue is compared against 1e-12·Σ|f̂(ξ)|, the natural
/// bound for |f|; an ∞-norm threshold on the coefficients would flag
/// ordinary FFT round-off once many coefficients are present.
pub fn synthesize(f: &TorusFunction, m: usize) -> Result<GridSamples, SpectralError> {
    let buf = synthesize_complex(f, m)?;
    let threshold = 1e-12 * f.coeff_l1();
    let residue = buf.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > threshold && residue > f64::MIN_POSITIVE {
        return Err(SpectralError::NonReal { residue, threshold });
    }
    Ok(GridSamples::new(buf.into_iter().map(|z| z.re).collect()))
}

/// Discrete Fourier coefficients of the samples, truncated to |ξ| ≤ max_freq.
pub fn analyze(g: &GridSamples, max_freq: i64) -> Result<TorusFunction, SpectralError> {
    let m = g.resolution();
    check_resolution(m, max_freq)?;
    let mut buf: Vec<Complex64> = g.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    Ok(from_spectrum(&buf, max_freq))
}

fn from_spectrum(buf: &[Complex64], max_freq: i64) -> TorusFunction {
    let m = buf.len() as i64;
    let inv = 1.0 / m as f64;
    let mut dense = Vec::with_capacity((2 * max_freq + 1) as usize);
    for xi in -max_freq..=max_freq {
        dense.push(buf[xi.rem_euclid(m) as usize] * inv);
    }
    TorusFunction::from_parts_owned(vec![(-max_freq, dense)])
}

#[derive(Clone, Copy, Debug)]
pub struct MapOptions {
    pub out_max_freq: i64,
    pub tail_tol: f64,
    /// Grid size is at least `oversample · (2·out_max_freq + 1)`.
    pub oversample: usize,
}

impl MapOptions {
    pub fn new(out_max_freq: i64, tail_tol: f64) -> Self {
        MapOptions { out_max_freq, tail_tol, oversample: 4 }
    }
}

/// `map ∘ f`, projected onto |ξ| ≤ out_max_freq with a certified tail.
pub fn pointwise_map<F: Fn(f64) -> f64>(
    f: &TorusFunction,
    map: F,
    out_max_freq: i64,
    tail_tol: f64,
) -> Result<TorusFunction, SpectralError> {
    pointwise_map_with(f, map, &MapOptions::new(out_max_freq, tail_tol))
}

pub fn pointwise_map_with<F: Fn(f64) -> f64>(
    f: &TorusFunction,
    map: F,
    opts: &MapOptions,
) -> Result<TorusFunction, SpectralError> {
    let out = opts.out_max_freq;
    let need = (opts.oversample.max(1) * (2 * out as usize + 1)).max(2 * f.max_freq() as usize + 1);
    let m = next_pow2(need);
    let samples = synthesize(f, m)?;
    let mut buf = Vec::with_capacity(m);
    for (k, v) in samples.values.iter().enumerate() {
        let y = map(*v);
        if !y.is_finite() {
            return Err(SpectralError::NonFinite { x: k as f64 / m as f64 });
        }
        buf.push(Complex64::new(y, 0.0));
    }
    fft_forward(&mut buf);
    let mi = m as i64;
    let inv = 1.0 / m as f64;
    let (mut kept, mut tail) = (0.0, 0.0);
    for xi in -(mi / 2 - 1)..=(mi / 2 - 1) {
        let e = (buf[xi.rem_euclid(mi) as usize] * inv).norm_sqr();
        if xi.abs() <= out {
            kept += e;
        } else {
            tail += e;
        }
    }
    let ratio = if kept > 0.0 {
        (tail / kept).sqrt()
    } else if tail > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if ratio > opts.tail_tol {
        return Err(SpectralError::TailTooLarge { ratio, tol: opts.tail_tol });
    }
    Ok(from_spectrum(&buf, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::product;
    use std::f64::consts::PI;

    #[test]
    fn constant_samples() {
        let g = synthesize(&TorusFunction::constant(1.0), 8).unwrap();
        assert!(g.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn exact_sine_samples() {
        let g = synthesize(&TorusFunction::sin_mode(1.0, 1), 4).unwrap();
        let want = [0.0, 1.0, 0.0, -1.0];
        for (v, w) in g.values.iter().zip(want) {
            assert!((v - w).abs() < 1e-15);
        }
    }

    #[test]
    fn resolution_is_enforced() {
        let f = TorusFunction::cos_mode(1.0, 4);
        assert!(matches!(synthesize(&f, 8), Err(SpectralError::ResolutionTooSmall { .. })));
        assert!(synthesize(&f, 9).is_ok());
        assert!(matches!(analyze(&GridSamples::new(vec![0.0; 8]), 4), Err(SpectralError::ResolutionTooSmall { .. })));
    }

    #[test]
    fn constant_analysis() {
        let f = analyze(&GridSamples::new(vec![3.0; 16]), 5).unwrap();
        assert_eq!(f, TorusFunction::constant(3.0));
    }

    #[test]
    fn product_of_cosines_from_samples() {
        let m = 16;
        let vals = (0..m)
            .map(|k| {
                let x = k as f64 / m as f64;
                (2.0 * PI * x).cos() * (4.0 * PI * x).cos()
            })
            .collect();
        let f = analyze(&GridSamples::new(vals), 7).unwrap();
        for xi in -7i64..=7 {
            let want = if matches!(xi.abs(), 1 | 3) { 0.25 } else { 0.0 };
            assert!((f.coeff(xi).re - want).abs() < 1e-15 && f.coeff(xi).im.abs() < 1e-15, "xi={xi}");
        }
    }

    #[test]
    fn sqrt_of_constant() {
        let a = pointwise_map(&TorusFunction::constant(4.0), f64::sqrt, 4, 1e-12).unwrap();
        assert!(a.max_coeff_diff(&TorusFunction::constant(2.0)) < 1e-15);
    }

    #[test]
    fn square_of_cosine() {
        let f = TorusFunction::cos_mode(1.0, 1);
        let sq = pointwise_map(&f, |x| x * x, 4, 1e-12).unwrap();
        let want = TorusFunction::constant(0.5).add(&TorusFunction::cos_mode(0.5, 2));
        assert!(sq.max_coeff_diff(&want) < 1e-15);
        assert!(sq.max_coeff_diff(&product(&f, &f)) < 1e-15);
    }

    #[test]
    fn sqrt_map_on_fresh_grid() {
        let f = TorusFunction::constant(2.0).add(&TorusFunction::cos_mode(1.0, 1));
        let a = pointwise_map(&f, f64::sqrt, 64, 1e-8).unwrap();
        let g = synthesize(&a, 1024).unwrap();
        for (k, v) in g.values.iter().enumerate() {
            let x = k as f64 / 1024.0;
            assert!((v - (2.0 + (2.0 * PI * x).cos()).sqrt()).abs() < 1e-8);
        }
    }

    #[test]
    fn truncated_tail_is_reported() {
        let f = TorusFunction::constant(1.0).add(&TorusFunction::cos_mode(0.99, 1));
        let r = pointwise_map(&f, f64::sqrt, 2, 1e-8);
        assert!(matches!(r, Err(SpectralError::TailTooLarge { .. })));
    }
}
