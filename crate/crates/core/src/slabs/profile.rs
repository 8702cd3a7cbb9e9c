//! The odd bump φ(x) = c·x·e^{−1/(1−x²)} and its Fourier transform
//! φ̂(ξ) = ∫ φ(x) e^{−2πiξx} dx.
//!
//! φ̂ is purely imaginary and odd. Below [`CONTOUR_FROM`] it is computed by
//! the trapezoid rule on [−1, 1], which converges faster than any power for
//! integrands vanishing to all orders at the endpoints. Above it the values
//! are exponentially small and cancel badly on the real line, so the right
//! half ∫_0^1 is moved onto a contour in the lower half plane through the
//! saddle point of the exponent near z = 1. The left half is the negated
//! conjugate, and the piece along the imaginary axis is real.

use crate::norms::quadrature::gauss_legendre;
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

pub const CONTOUR_FROM: f64 = 8.0;
const TRAPEZOID_CELLS: usize = 1024;
const NORMALIZATION_CELLS: usize = 4096;
/// e^{−DEPTH} is the size of the discarded contour segment relative to the saddle.
const DEPTH: f64 = 40.0;
/// Relative threshold below which the series in ξ/λ is cut.
pub const HAT_REL_CUTOFF: f64 = 1e-14;
/// Safety factor on the saddle-point envelope.
const ENVELOPE_SLACK: f64 = 1.1;

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x * (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

fn gl32() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(32))
}

#[derive(Debug)]
pub struct SlabProfile {
    c: f64,
    hat_max: f64,
    tail_cutoff: f64,
    /// level ℓ ↦ Im φ̂(n/2^ℓ) for n = 0, 1, ...
    tables: Mutex<HashMap<u32, Arc<Vec<f64>>>>,
}

impl Default for SlabProfile {
    fn default() -> Self {
        build_profile()
    }
}

pub fn build_profile() -> SlabProfile {
    let n = NORMALIZATION_CELLS;
    let sq: f64 = (1..n).map(|i| bump(i as f64 / n as f64).powi(2)).sum::<f64>() * 2.0 / n as f64;
    let mut p = SlabProfile { c: 1.0 / sq.sqrt(), hat_max: 0.0, tail_cutoff: 0.0, tables: Mutex::new(HashMap::new()) };
    p.hat_max = (0..=(64 * CONTOUR_FROM as usize)).map(|i| p.hat_im(i as f64 / 64.0).abs()).fold(0.0, f64::max);
    let mut t = CONTOUR_FROM;
    while p.envelope(t) >= HAT_REL_CUTOFF * p.hat_max {
        t += 1.0;
    }
    p.tail_cutoff = t;
    p
}

struct Saddle {
    xi: f64,
    c: f64,
}

impl Saddle {
    fn exponent(&self, z: Complex64) -> Complex64 {
        -1.0 / (1.0 - z * z) - Complex64::new(0.0, 2.0 * PI * self.xi) * z
    }

    fn integrand(&self, z: Complex64) -> Complex64 {
        self.c * z * self.exponent(z).exp()
    }

    /// Root of (1 − z²)² = iz/(πξ) near 1 − (4πξ)^{−1/2} e^{iπ/4}.
    fn point(&self) -> Complex64 {
        let k = Complex64::new(0.0, 1.0 / (PI * self.xi));
        let mut z = 1.0 - Complex64::from_polar((4.0 * PI * self.xi).powf(-0.5), PI / 4.0);
        for _ in 0..60 {
            let w = 1.0 - z * z;
            let step = (w * w - k * z) / (-4.0 * z * w - k);
            z -= step;
            if step.norm() < 1e-16 {
                break;
            }
        }
        z
    }

    fn second_derivative(&self, z: Complex64) -> Complex64 {
        let w = 1.0 - z * z;
        -2.0 / (w * w) - 8.0 * z * z / (w * w * w)
    }

    fn segment(&self, a: Complex64, b: Complex64, panels: usize) -> Complex64 {
        let mut sum = Complex64::ZERO;
        let h = 1.0 / panels as f64;
        for p in 0..panels {
            for (x, w) in gl32() {
                let u = h * (p as f64 + 0.5 * (x + 1.0));
                sum += *w * self.integrand(a + (b - a) * u);
            }
        }
        sum * (b - a) * (0.5 * h)
    }
}

impl SlabProfile {
    pub fn normalization(&self) -> f64 {
        self.c
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.c * bump(x)
    }

    /// max |φ̂|.
    pub fn hat_max(&self) -> f64 {
        self.hat_max
    }

    /// Beyond this |ξ| the envelope of φ̂ is below 10⁻¹⁴·max|φ̂|.
    pub fn tail_cutoff(&self) -> f64 {
        self.tail_cutoff
    }

    pub fn phi_hat(&self, xi: f64) -> Complex64 {
        Complex64::new(0.0, self.hat_im(xi))
    }

    /// Im φ̂(ξ).
    pub fn hat_im(&self, xi: f64) -> f64 {
        if xi < 0.0 {
            return -self.hat_im(-xi);
        }
        if xi < CONTOUR_FROM {
            let n = TRAPEZOID_CELLS;
            let s: f64 = (1..n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    bump(x) * (2.0 * PI * xi * x).sin()
                })
                .sum();
            return -2.0 * self.c * s / n as f64;
        }
        let sd = Saddle { xi, c: self.c };
        let s = sd.point();
        let depth = (-sd.exponent(s).re + DEPTH) / (2.0 * PI * xi);
        let bottom = Complex64::new(s.re, -depth);
        // round-off floor is about 1e-13 of the saddle-point magnitude
        let scale = 2.0 * sd.integrand(s).norm() * (2.0 * PI / sd.second_derivative(s).norm()).sqrt();
        let eval = |panels| (sd.segment(bottom, s, panels) + sd.segment(s, Complex64::ONE, panels)).im * 2.0;
        let mut prev = eval(4);
        let mut panels = 8;
        loop {
            let cur = eval(panels);
            if (cur - prev).abs() <= 1e-12 * scale || panels >= 64 {
                return cur;
            }
            prev = cur;
            panels *= 2;
        }
    }

    /// Saddle-point bound on |φ̂(ξ)|; max|φ̂| below the contour range.
    pub fn envelope(&self, xi: f64) -> f64 {
        let xi = xi.abs();
        if xi < CONTOUR_FROM {
            return self.hat_max.max(1.0);
        }
        let sd = Saddle { xi, c: self.c };
        let s = sd.point();
        let curv = sd.second_derivative(s).norm();
        ENVELOPE_SLACK * 2.0 * sd.integrand(s).norm() * (2.0 * PI / curv).sqrt()
    }

    /// Im φ̂(n/2^level) for 0 ≤ n ≤ n_max, from a per-level table that
    /// grows on demand.
    pub fn hat_table(&self, level: u32, n_max: usize) -> Arc<Vec<f64>> {
        let mut map = self.tables.lock().expect("profile table lock");
        if let Some(t) = map.get(&level) {
            if t.len() > n_max {
                return Arc::clone(t);
            }
        }
        let step = (-(level as f64)).exp2();
        let mut v = map.get(&level).map(|t| t.as_ref().clone()).unwrap_or_default();
        let want = (n_max + 1).max(2 * v.len());
        v.reserve(want - v.len());
        for n in v.len()..want {
            v.push(self.hat_im(n as f64 * step));
        }
        let t = Arc::new(v);
        map.insert(level, Arc::clone(&t));
        t
    }
}
