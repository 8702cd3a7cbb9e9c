//! Smooth dyadic cutoff and the projector family P_{=0}, P_{2^j},
//! P_{≤2^j}, P_{>2^j}, P_{≠0}.

use crate::spectral::TorusFunction;

const LOWER_FLAT: f64 = 12.0 / 7.0;
/// Shells with j at most this keep a precomputed weight table.
const CACHED_SHELLS: u32 = 16;

/// h(t) = e^{−1/t} for t > 0, else 0.
fn h(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// C^∞ step rising from 0 at t ≤ 0 to 1 at t ≥ 1.
pub fn smooth_step(t: f64) -> f64 {
    let (a, b) = (h(t), h(1.0 - t));
    a / (a + b)
}

/// The cutoff φ: 1 on 1 ≤ |t| ≤ 12/7, 0 outside 6/7 < |t| < 2, and
/// φ(t) + φ(t/2) = 1 on [12/7, 2].
pub fn phi(t: f64) -> f64 {
    let t = t.abs();
    if (1.0..=LOWER_FLAT).contains(&t) {
        1.0
    } else if t > LOWER_FLAT && t < 2.0 {
        smooth_step((2.0 - t) / (2.0 - LOWER_FLAT))
    } else if (6.0 / 7.0..1.0).contains(&t) {
        1.0 - phi(2.0 * t)
    } else {
        0.0
    }
}

/// Integer support of shell j: 6/7·2^j < |ξ| < 2^{j+1}.
pub fn shell_support(j: u32) -> (i64, i64) {
    let p = 1i64 << j;
    ((6 * p) / 7 + 1, 2 * p - 1)
}

/// Largest |ξ| at which the P_{≤2^j} weight is exactly 1.
pub fn low_flat_edge(j: u32) -> i64 {
    (12i64 << j) / 7
}

#[derive(Clone, Debug)]
pub struct LpFilter {
    /// cache[j][|ξ| − lo_j] = φ(2^{-j}ξ) over the shell support
    cache: Vec<Vec<f64>>,
}

impl Default for LpFilter {
    fn default() -> Self {
        Self::build()
    }
}

impl LpFilter {
    pub fn build() -> Self {
        let cache = (0..=CACHED_SHELLS)
            .map(|j| {
                let (lo, hi) = shell_support(j);
                let p = (1i64 << j) as f64;
                (lo..=hi).map(|xi| phi(xi as f64 / p)).collect()
            })
            .collect();
        LpFilter { cache }
    }

    /// φ(2^{−j}ξ).
    pub fn shell_weight(&self, j: u32, xi: i64) -> f64 {
        let a = xi.abs();
        let (lo, hi) = shell_support(j);
        if a < lo || a > hi {
            return 0.0;
        }
        match self.cache.get(j as usize) {
            Some(t) => t[(a - lo) as usize],
            None => phi(a as f64 / (1i64 << j) as f64),
        }
    }

    /// Multiplier of P_{≤2^j} = P_{=0} + Σ_{k=0}^{j} P_{2^k}.
    pub fn low_weight(&self, j: u32, xi: i64) -> f64 {
        let a = xi.abs();
        if a <= low_flat_edge(j) {
            1.0
        } else {
            self.shell_weight(j, a)
        }
    }

    pub fn project_shell(&self, f: &TorusFunction, j: u32) -> TorusFunction {
        let (lo, hi) = shell_support(j);
        f.window(lo, hi, |a| self.shell_weight(j, a))
    }

    pub fn project_low(&self, f: &TorusFunction, j: u32) -> TorusFunction {
        f.window(0, (2i64 << j) - 1, |a| self.low_weight(j, a))
    }

    /// P_{>2^j} f := f − P_{≤2^j} f.
    pub fn project_high(&self, f: &TorusFunction, j: u32) -> TorusFunction {
        let top = f.max_freq();
        let lo = low_flat_edge(j) + 1;
        if top < lo {
            return TorusFunction::zero();
        }
        f.window(lo, top, |a| 1.0 - self.low_weight(j, a))
    }

    /// P_{>T} := Id − P_{≤2^⌊log₂T⌋} for a real threshold T ≥ 1.
    pub fn project_high_threshold(&self, f: &TorusFunction, t: f64) -> TorusFunction {
        assert!(t >= 1.0, "threshold must be at least 1");
        self.project_high(f, t.log2().floor() as u32)
    }

    /// Shell indices whose support meets the frequency support of f.
    pub fn active_shells(&self, f: &TorusFunction) -> Vec<u32> {
        let mut out = Vec::new();
        let top = f.max_freq();
        let mut j = 0u32;
        while j < 62 && shell_support(j).0 <= top {
            let (lo, hi) = shell_support(j);
            let hit = f.bands().iter().any(|b| {
                b.coeffs().iter().enumerate().any(|(i, c)| {
                    let a = (b.start() + i as i64).abs();
                    a >= lo && a <= hi && *c != num_complex::Complex64::ZERO
                })
            });
            if hit {
                out.push(j);
            }
            j += 1;
        }
        out
    }
}

pub fn project_mean(f: &TorusFunction) -> f64 {
    f.mean()
}

pub fn project_nonzero(f: &TorusFunction) -> TorusFunction {
    f.without_mean()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn plateau_and_support() {
        assert_eq!(phi(1.5), 1.0);
        assert_eq!(phi(0.5), 0.0);
        assert_eq!(phi(2.5), 0.0);
        assert_eq!(phi(-1.2), 1.0);
        assert_eq!(phi(6.0 / 7.0), 0.0);
        assert_eq!(phi(2.0), 0.0);
    }

    #[test]
    fn overlap_partition() {
        for k in 0..=1000 {
            let t = LOWER_FLAT + (2.0 - LOWER_FLAT) * k as f64 / 1000.0;
            assert!((phi(t) + phi(t / 2.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn low_pass_values() {
        let f = LpFilter::build();
        assert_eq!(f.low_weight(2, 1), 1.0);
        assert_eq!(f.low_weight(2, 6), 1.0);
        assert!((f.low_weight(2, 7) - 0.998_949_19).abs() < 1e-8);
        assert_eq!(f.low_weight(2, 8), 0.0);
    }

    #[test]
    fn cached_and_direct_weights_agree() {
        let f = LpFilter::build();
        let j = CACHED_SHELLS + 1;
        let p = 1i64 << j;
        for xi in [p - 3, p, p + p / 2, 2 * p - 5] {
            assert_eq!(f.shell_weight(j, xi), phi(xi as f64 / p as f64));
        }
    }

    #[test]
    fn flat_shell_passes_unchanged() {
        let filt = LpFilter::build();
        let xi = (1.2f64 * 32.0).round() as i64;
        let f = TorusFunction::from_pairs([(xi, Complex64::new(0.3, 0.1)), (-xi, Complex64::new(0.3, -0.1))]).unwrap();
        assert_eq!(filt.project_shell(&f, 5), f);
        assert!(filt.project_shell(&TorusFunction::constant(2.0), 0).is_zero());
    }

    #[test]
    fn mean_and_nonzero_parts() {
        let f = TorusFunction::constant(3.0).add(&TorusFunction::sin_mode(1.0, 1));
        assert_eq!(project_mean(&f), 3.0);
        assert!(project_nonzero(&TorusFunction::constant(3.0)).is_zero());
    }

    #[test]
    fn real_threshold_rounds_down() {
        let filt = LpFilter::build();
        let f = TorusFunction::cos_mode(1.0, 30);
        assert_eq!(filt.project_high_threshold(&f, 20.0), filt.project_high(&f, 4));
    }
}
