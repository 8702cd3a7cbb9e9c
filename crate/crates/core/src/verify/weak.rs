//! The relaxed equation tested against ψ = e^{2πikx}.
//!
//! Integrating 3(u²)′ − u‴ = E′ against ψ gives
//! −∫uψ‴ + 3∫u²ψ′ = ∫Eψ′, and ∫fψ^{(n)} = (2πik)^n f̂(−k).

use crate::norms::sobolev_norm;
use crate::spectral::{product_coefficient, TorusFunction};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub k: i64,
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    /// |LHS − RHS|.
    pub diff: f64,
    /// max(1, |each pairing|).
    pub scale: f64,
    /// ‖E‖_{Ḣ^{−s}}‖ψ′‖_{Ḣ^s}, a bound on |∫Eψ′|.
    pub pairing_bound: f64,
}

impl WeakResidual {
    pub fn passes(&self, tol: f64) -> bool {
        self.diff < tol * self.scale && self.rhs_re.hypot(self.rhs_im) <= self.pairing_bound * (1.0 + 1e-12)
    }
}

pub fn weak_residual(u: &TorusFunction, e: &TorusFunction, s: f64, test_freqs: &[i64]) -> Vec<WeakResidual> {
    let e_norm = sobolev_norm(e, -s);
    test_freqs
        .iter()
        .map(|&k| {
            let d = Complex64::new(0.0, 2.0 * PI * k as f64);
            let dispersive = -(d * d * d) * u.coeff(-k);
            let nonlinear = 3.0 * d * product_coefficient(u, u, -k);
            let lhs = dispersive + nonlinear;
            let rhs = d * e.coeff(-k);
            let scale = [dispersive.norm(), nonlinear.norm(), rhs.norm()].into_iter().fold(1.0, f64::max);
            let kk = (k.unsigned_abs()) as f64;
            WeakResidual {
                k,
                lhs_re: lhs.re,
                lhs_im: lhs.im,
                rhs_re: rhs.re,
                rhs_im: rhs.im,
                diff: (lhs - rhs).norm(),
                scale,
                pairing_bound: e_norm * 2.0 * PI * kk * kk.powf(s),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::base_case;

    #[test]
    fn base_identity_and_zero_mode() {
        let b = base_case(0.7, 1, 0.0, 3);
        let r = weak_residual(&b.u, &b.e, 3.0, &[0, 1, 2, 3, -2]);
        assert_eq!((r[0].lhs_re, r[0].rhs_re, r[0].diff), (0.0, 0.0, 0.0));
        for x in &r {
            assert!(x.passes(1e-12), "{x:?}");
        }
    }

    #[test]
    fn wrong_error_is_detected() {
        let b = base_case(0.7, 1, 0.0, 3);
        let e = b.e.add(&TorusFunction::cos_mode(0.1, 2));
        let r = weak_residual(&b.u, &e, 3.0, &[2]);
        assert!(!r[0].passes(1e-9));
    }
}
