//! The iteration for the relaxed equation 3(u²)′ − u‴ = E′.
//!
//! Stage q → q+1 adds w = √(2/3)·P_{≤λ²}(aρ)·cos(2πσx) with amplitude
//! a = (2‖E‖_∞ − E)^{1/2}, slab ρ = ρ_{λ,ε} and σ = (5/4)λ³, and sets
//! E_{q+1} = (E + 3w²) + 6wu − w″. Then 3(u_{q+1}²)′ − u_{q+1}‴ = E_{q+1}′
//! holds exactly, and λ is found by doubling until the stage checks pass.

use crate::lp::{low_flat_edge, LpFilter};
use crate::norms::{lp_norm, sobolev_norm, NormError};
use crate::slabs::{build_slab_fourier, SlabError, SlabProfile, SlabSpec};
use crate::spectral::{pointwise_map, product, product_coefficient, SpectralError, TorusFunction};
use crate::verify::{certify_stage, CertParams, Certificate};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Relative size below which E_O + E_N + E_D counts as identically zero.
pub const ZERO_ERROR_REL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("shell condition fails for λ = {lambda}, σ = {sigma}")]
    ShellViolation { lambda: i64, sigma: i64 },
    #[error("search exhausted at λ_max = {lambda_max}: last failed check was {last}")]
    Exhausted { lambda_max: i64, last: Check },
    #[error("stage {q} violates an invariant: {what}")]
    InvariantViolated { q: usize, what: String },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Slab(#[from] SlabError),
}

/// The stage checks of the λ-search, in evaluation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Check {
    Shell,
    FreqCutoff,
    RiemannLebesgue,
    ErrorDecay,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Check::Shell => "shell condition",
            Check::FreqCutoff => "frequency cutoff ‖P_{>λ²}(aρ)‖₂ < ‖P_{≤λ²}(aρ)‖₂",
            Check::RiemannLebesgue => "Riemann–Lebesgue bound",
            Check::ErrorDecay => "error decay target",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Sobolev index of the error norm Ḣ^{−s}.
    pub s: u32,
    /// ε_q = 1 − 2^{−q−c0}.
    pub c0: u32,
    /// σ = sigma_num/sigma_den · λ^sigma_exponent.
    pub sigma_num: i64,
    pub sigma_den: i64,
    pub sigma_exponent: u32,
    /// decay target at stage q: decay_factor · 2^{−q} · ‖E_0‖_{Ḣ^{−s}}.
    pub decay_factor: f64,
    pub lambda_min: u64,
    pub lambda_max: u64,
    /// Base-case amplitude A in u_0 = A sin(2π·freq·x).
    pub amplitude: f64,
    pub base_freq: i64,
    /// Constant added to E_0.
    pub base_constant: f64,
    /// Relative ℓ² tail allowed when sampling the amplitude.
    pub amp_tail_tol: f64,
    pub cert: CertParams,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            s: 3,
            c0: 2,
            sigma_num: 5,
            sigma_den: 4,
            sigma_exponent: 3,
            decay_factor: 1.0,
            lambda_min: 8,
            lambda_max: 1 << 14,
            amplitude: 0.03,
            base_freq: 1,
            base_constant: 0.0,
            amp_tail_tol: 1e-8,
            cert: CertParams::default(),
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<(), SchemeError> {
        let bad = |m: String| Err(SchemeError::InvalidParams(m));
        if self.s < 3 {
            return bad(format!("s = {} must be at least 3", self.s));
        }
        for (name, l) in [("lambda_min", self.lambda_min), ("lambda_max", self.lambda_max)] {
            if l < 4 || !l.is_power_of_two() || l > 1 << 20 {
                return bad(format!("{name} = {l} must be a power of two in [4, 2^20]"));
            }
        }
        if self.lambda_min > self.lambda_max {
            return bad("lambda_min exceeds lambda_max".into());
        }
        if self.sigma_num <= 0 || self.sigma_den <= 0 || self.sigma_exponent == 0 {
            return bad("sigma factor and exponent must be positive".into());
        }
        if self.sigma(self.lambda_min as i64).is_none() || self.sigma(self.lambda_max as i64).is_none() {
            return bad(format!(
                "{}/{}·λ^{} is not an integer in range for λ in [lambda_min, lambda_max]",
                self.sigma_num, self.sigma_den, self.sigma_exponent
            ));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return bad(format!("amplitude A = {} must be positive", self.amplitude));
        }
        if self.base_freq < 1 {
            return bad("base_freq must be at least 1".into());
        }
        if self.decay_factor.is_nan() || self.decay_factor <= 0.0 || self.amp_tail_tol.is_nan() || self.amp_tail_tol <= 0.0 {
            return bad("decay_factor and amp_tail_tol must be positive".into());
        }
        Ok(())
    }

    /// σ(λ), or None when it is not an integer or overflows.
    pub fn sigma(&self, lambda: i64) -> Option<i64> {
        let p = lambda.checked_pow(self.sigma_exponent)?.checked_mul(self.sigma_num)?;
        (p % self.sigma_den == 0).then(|| p / self.sigma_den)
    }

    pub fn epsilon_target(&self, q: usize) -> f64 {
        1.0 - (-((q as f64) + self.c0 as f64)).exp2()
    }

    pub fn decay_target(&self, q: usize, e0_norm: f64) -> f64 {
        self.decay_factor * (-(q as f64)).exp2() * e0_norm
    }
}

/// Norm summary of the step that produced a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub m: u32,
    pub k: u32,
    pub shell_j: u32,
    pub amp_out_max_freq: i64,
    pub e_prev_linf: f64,
    pub low_l2: f64,
    pub high_l2: f64,
    pub rl_integral: f64,
    pub w_l1: f64,
    pub w_l2: f64,
    pub e_o: f64,
    pub e_n: f64,
    pub e_d: f64,
    pub c_const: f64,
    pub candidates: Vec<CandidateLog>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateLog {
    pub lambda: i64,
    pub epsilon: f64,
    pub sigma: i64,
    pub failed: Option<Check>,
    pub e_norm: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct IterationState {
    pub q: usize,
    pub u: TorusFunction,
    pub e: TorusFunction,
    /// 0 for the base case.
    pub lambda: i64,
    pub epsilon: f64,
    pub sigma: i64,
    /// w_1, …, w_q.
    pub increments: Vec<TorusFunction>,
    pub certificates: Vec<Certificate>,
    /// ‖E_q‖_{Ḣ^{−s}}.
    pub e_norm: f64,
    /// ‖E_0‖_{Ḣ^{−s}} of the run.
    pub e0_norm: f64,
    pub stage: Option<StageSummary>,
}

impl IterationState {
    pub fn slab_spec(&self) -> Option<SlabSpec> {
        let s = self.stage.as_ref()?;
        SlabSpec::from_exponents(s.m, s.k).ok()
    }
}

/// u_0 = A sin(2π·freq·x), E_0 = 3u_0² − u_0″ + κ.
pub fn base_case(amplitude: f64, freq: i64, constant: f64, s: u32) -> IterationState {
    let u = TorusFunction::sin_mode(amplitude, freq);
    let e = product(&u, &u).scale(3.0).sub(&u.derivative(2)).add(&TorusFunction::constant(constant));
    let e_norm = sobolev_norm(&e, -(s as f64));
    IterationState {
        q: 0,
        u,
        e,
        lambda: 0,
        epsilon: 0.0,
        sigma: 0,
        increments: Vec::new(),
        certificates: Vec::new(),
        e_norm,
        e0_norm: e_norm,
        stage: None,
    }
}

/// Largest A with ‖E_0(A)‖_{Ḣ^{−s}} < 1, by bisection.
pub fn base_amplitude_threshold(params: &SchemeParams) -> f64 {
    let norm = |a: f64| base_case(a, params.base_freq, params.base_constant, params.s).e_norm;
    let (mut lo, mut hi) = (0.0, 1.0);
    while norm(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if norm(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// a = (2‖E‖_∞ − E)^{1/2} on |ξ| ≤ out_max_freq.
pub fn amplitude(
    e: &TorusFunction,
    e_linf: f64,
    out_max_freq: i64,
    tail_tol: f64,
) -> Result<TorusFunction, SpectralError> {
    let c = TorusFunction::constant(2.0 * e_linf);
    pointwise_map(&c.sub(e), |y| y.max(0.0).sqrt(), out_max_freq, tail_tol)
}

/// [`amplitude`] starting from 4·max_freq(E), doubling the band while the tail is too large.
pub fn amplitude_auto(e: &TorusFunction, e_linf: f64, tail_tol: f64) -> Result<(TorusFunction, i64), SpectralError> {
    let mut out = (4 * e.max_freq()).max(16);
    loop {
        match amplitude(e, e_linf, out, tail_tol) {
            Ok(a) => return Ok((a, out)),
            Err(SpectralError::TailTooLarge { .. }) if out < 1 << 24 => out *= 2,
            Err(err) => return Err(err),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShellCheck {
    pub j: u32,
    pub pass: bool,
}

/// Shell j with [σ − 2λ², σ + 2λ²] inside [2^j, (12/7)2^j], where the
/// shell weight is exactly 1; also requires λ ≥ 8.
pub fn shell_check(lambda: i64, sigma: i64) -> ShellCheck {
    let lo = sigma - 2 * lambda * lambda;
    let hi = sigma + 2 * lambda * lambda;
    if lo < 1 {
        return ShellCheck { j: 0, pass: false };
    }
    let j = 63 - lo.leading_zeros();
    ShellCheck { j, pass: lambda >= 8 && hi <= low_flat_edge(j) }
}

/// Data fixed by the current state: filter, profile, amplitude.
pub struct StageContext<'a> {
    pub filter: &'a LpFilter,
    pub profile: &'a SlabProfile,
    pub e_linf: f64,
    pub a: TorusFunction,
    pub amp_out_max_freq: i64,
}

impl<'a> StageContext<'a> {
    pub fn new(
        state: &IterationState,
        params: &SchemeParams,
        filter: &'a LpFilter,
        profile: &'a SlabProfile,
    ) -> Result<Self, SchemeError> {
        let e_linf = lp_norm(&state.e, f64::INFINITY)?;
        if e_linf <= 1e-12 {
            return Err(SchemeError::InvariantViolated { q: state.q, what: "E vanishes".into() });
        }
        let (a, out) = amplitude_auto(&state.e, e_linf, params.amp_tail_tol)?;
        Ok(StageContext { filter, profile, e_linf, a, amp_out_max_freq: out })
    }
}

#[derive(Clone, Debug)]
pub struct Increment {
    pub rho: TorusFunction,
    /// P_{≤λ²}(aρ).
    pub low: TorusFunction,
    /// P_{>λ²}(aρ).
    pub high: TorusFunction,
    pub w: TorusFunction,
}

/// The slab at (λ, ε) truncated where φ̂ is negligible.
pub fn stage_slab(profile: &SlabProfile, spec: &SlabSpec) -> Result<TorusFunction, SlabError> {
    let mf = (spec.series_extent(profile) * spec.mu()).max(4 * spec.lambda());
    build_slab_fourier(spec, profile, mf)
}

/// w = √(2/3)·P_{≤λ²}(aρ)·cos(2πσx).
pub fn build_increment(ctx: &StageContext, spec: &SlabSpec, sigma: i64) -> Result<Increment, SchemeError> {
    let lambda = spec.lambda();
    if !shell_check(lambda, sigma).pass {
        return Err(SchemeError::ShellViolation { lambda, sigma });
    }
    let rho = stage_slab(ctx.profile, spec)?;
    let ar = product(&ctx.a, &rho);
    let low = ctx.filter.project_low(&ar, 2 * spec.m());
    let high = ar.sub(&low);
    let w = product(&low, &TorusFunction::cos_mode(1.0, sigma)).scale((2.0f64 / 3.0).sqrt());
    Ok(Increment { rho, low, high, w })
}

#[derive(Clone, Debug)]
pub struct ErrorParts {
    pub e_o: TorusFunction,
    pub e_n: TorusFunction,
    pub e_d: TorusFunction,
    pub c_const: f64,
}

impl ErrorParts {
    pub fn total(&self) -> TorusFunction {
        TorusFunction::linear_combination(&[(1.0, &self.e_o), (1.0, &self.e_n), (1.0, &self.e_d)])
            .add(&TorusFunction::constant(self.c_const))
    }
}

/// E_O = E + 3w², E_N = 6wu, E_D = −w″, plus 1 if these sum to zero.
pub fn error_update(e: &TorusFunction, u: &TorusFunction, w: &TorusFunction) -> ErrorParts {
    let e_o = e.add(&product(w, w).scale(3.0));
    let e_n = product(w, u).scale(6.0);
    let e_d = w.derivative(2).scale(-1.0);
    let sum = TorusFunction::linear_combination(&[(1.0, &e_o), (1.0, &e_n), (1.0, &e_d)]);
    // Σ|f̂| bounds ‖f‖_∞ from above
    let zero = sum.coeff_l1() < ZERO_ERROR_REL * e.coeff_l1().max(1.0);
    ErrorParts { e_o, e_n, e_d, c_const: if zero { 1.0 } else { 0.0 } }
}

/// Accepted candidate of the λ-search.
pub struct Selection {
    pub spec: SlabSpec,
    pub sigma: i64,
    pub shell_j: u32,
    pub increment: Increment,
    pub parts: ErrorParts,
    pub e_next: TorusFunction,
    pub e_next_norm: f64,
    pub rl_integral: f64,
    pub log: Vec<CandidateLog>,
}

/// ∫ P_{≤λ²}(aρ)² cos(4πσx) = Re (v²)^(2σ).
pub fn rl_integral(low: &TorusFunction, sigma: i64) -> f64 {
    product_coefficient(low, low, 2 * sigma).re
}

/// Doubles λ from lambda_min until every stage check passes.
pub fn select_lambda(
    state: &IterationState,
    params: &SchemeParams,
    ctx: &StageContext,
) -> Result<Selection, SchemeError> {
    let q1 = state.q + 1;
    let eps_t = params.epsilon_target(q1);
    let target = params.decay_target(q1, state.e0_norm);
    let s = -(params.s as f64);
    let mut log = Vec::new();
    let mut lambda = params.lambda_min as i64;
    let mut last = Check::Shell;
    while lambda <= params.lambda_max as i64 {
        let spec = SlabSpec::new(lambda as u64, eps_t)?;
        let sigma = params
            .sigma(lambda)
            .ok_or_else(|| SchemeError::InvalidParams(format!("σ(λ = {lambda}) is not an integer")))?;
        let mut entry = CandidateLog { lambda, epsilon: spec.epsilon(), sigma, failed: None, e_norm: None };
        let shell = shell_check(lambda, sigma);
        let failed = if !shell.pass {
            Some(Check::Shell)
        } else {
            let inc = build_increment(ctx, &spec, sigma)?;
            let low_sq = inc.low.coeff_l2_sq();
            let rl = rl_integral(&inc.low, sigma);
            if inc.high.coeff_l2_sq() >= low_sq {
                Some(Check::FreqCutoff)
            } else if rl <= -0.5 * low_sq {
                Some(Check::RiemannLebesgue)
            } else {
                let parts = error_update(&state.e, &state.u, &inc.w);
                let e_next = parts.total();
                let norm = sobolev_norm(&e_next, s);
                entry.e_norm = Some(norm);
                if norm < target {
                    log.push(entry);
                    return Ok(Selection {
                        spec,
                        sigma,
                        shell_j: shell.j,
                        increment: inc,
                        parts,
                        e_next,
                        e_next_norm: norm,
                        rl_integral: rl,
                        log,
                    });
                }
                Some(Check::ErrorDecay)
            }
        };
        entry.failed = failed;
        last = failed.unwrap_or(last);
        log.push(entry);
        lambda *= 2;
    }
    Err(SchemeError::Exhausted { lambda_max: params.lambda_max as i64, last })
}

/// Applies an accepted selection to produce state q+1.
pub fn advance(
    state: &IterationState,
    params: &SchemeParams,
    ctx: &StageContext,
    sel: Selection,
) -> Result<IterationState, SchemeError> {
    let w = sel.increment.w;
    let mut increments = state.increments.clone();
    increments.push(w.clone());
    let sob = |f: &TorusFunction| sobolev_norm(f, -(params.s as f64));
    let summary = StageSummary {
        m: sel.spec.m(),
        k: sel.spec.k(),
        shell_j: sel.shell_j,
        amp_out_max_freq: ctx.amp_out_max_freq,
        e_prev_linf: ctx.e_linf,
        low_l2: sel.increment.low.coeff_l2_sq().sqrt(),
        high_l2: sel.increment.high.coeff_l2_sq().sqrt(),
        rl_integral: sel.rl_integral,
        w_l1: lp_norm(&w, 1.0)?,
        w_l2: w.coeff_l2_sq().sqrt(),
        e_o: sob(&sel.parts.e_o),
        e_n: sob(&sel.parts.e_n),
        e_d: sob(&sel.parts.e_d),
        c_const: sel.parts.c_const,
        candidates: sel.log,
    };
    Ok(IterationState {
        q: state.q + 1,
        u: state.u.add(&w),
        e: sel.e_next,
        lambda: sel.spec.lambda(),
        epsilon: sel.spec.epsilon(),
        sigma: sel.sigma,
        increments,
        certificates: Vec::new(),
        e_norm: sel.e_next_norm,
        e0_norm: state.e0_norm,
        stage: Some(summary),
    })
}

/// Base case plus q_max stages, each certified.
pub fn iterate(params: &SchemeParams, q_max: usize) -> Result<Vec<IterationState>, SchemeError> {
    let mut states = Vec::with_capacity(q_max + 1);
    iterate_each(params, q_max, |s| {
        states.push(s.clone());
        Ok::<(), SchemeError>(())
    })?;
    Ok(states)
}

/// Like [`iterate`], but hands each certified state to `on_stage` as soon as
/// it exists and keeps only the latest one in memory. Returns the final state.
pub fn iterate_each<E, F>(params: &SchemeParams, q_max: usize, mut on_stage: F) -> Result<IterationState, E>
where
    E: From<SchemeError>,
    F: FnMut(&IterationState) -> Result<(), E>,
{
    params.validate()?;
    let filter = LpFilter::build();
    let profile = SlabProfile::default();
    let mut state = base_case(params.amplitude, params.base_freq, params.base_constant, params.s);
    let cert = certify_stage(None, &state, params, &filter, &profile)?;
    check_invariants(&cert, 0)?;
    state.certificates.push(cert);
    on_stage(&state)?;
    for _ in 0..q_max {
        let ctx = StageContext::new(&state, params, &filter, &profile)?;
        let sel = select_lambda(&state, params, &ctx)?;
        let mut next = advance(&state, params, &ctx, sel)?;
        drop(ctx);
        let cert = certify_stage(Some(&state), &next, params, &filter, &profile)?;
        check_invariants(&cert, next.q)?;
        next.certificates = std::mem::take(&mut state.certificates);
        next.certificates.push(cert);
        state = next;
        on_stage(&state)?;
    }
    Ok(state)
}

fn check_invariants(cert: &Certificate, q: usize) -> Result<(), SchemeError> {
    match cert.items.iter().find(|i| i.item == 1 && !i.pass) {
        Some(item) => Err(SchemeError::InvariantViolated { q, what: item.failures().join("; ") }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn base_case_example() {
        let b = base_case(1.0, 1, 0.0, 3);
        let want = TorusFunction::constant(1.5)
            .add(&TorusFunction::sin_mode(4.0 * PI * PI, 1))
            .add(&TorusFunction::cos_mode(-1.5, 2));
        assert!(b.e.max_coeff_diff(&want) < 1e-12);
        assert_eq!(b.u.mean(), 0.0);
    }

    #[test]
    fn threshold_is_where_base_norm_reaches_one() {
        let p = SchemeParams::default();
        let a = base_amplitude_threshold(&p);
        assert!((a - 0.0358).abs() < 5e-4, "{a}");
        assert!(base_case(a * 0.999, 1, 0.0, 3).e_norm < 1.0);
        assert!(base_case(a * 1.001, 1, 0.0, 3).e_norm > 1.0);
    }

    #[test]
    fn shell_examples() {
        let c = shell_check(16, 5 * 16 * 16 * 16 / 4);
        assert_eq!(c, ShellCheck { j: 12, pass: true });
        assert!(!shell_check(4, 80).pass);
    }

    #[test]
    fn amplitude_of_constant_and_bounds() {
        let a = amplitude(&TorusFunction::constant(2.0), 2.0, 8, 1e-12).unwrap();
        assert!(a.max_coeff_diff(&TorusFunction::constant(2f64.sqrt())) < 1e-14);
        let e = base_case(0.03, 1, 0.0, 3).e;
        let linf = lp_norm(&e, f64::INFINITY).unwrap();
        let (a, _) = amplitude_auto(&e, linf, 1e-8).unwrap();
        let g = crate::spectral::synthesize(&a, 4096).unwrap();
        let (lo, hi) = g.values.iter().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
        assert!(lo >= linf.sqrt() * (1.0 - 1e-6) && hi <= (3.0 * linf).sqrt() * (1.0 + 1e-6));
        let defect = product(&a, &a).add(&e).sub(&TorusFunction::constant(2.0 * linf));
        assert!(lp_norm(&defect, f64::INFINITY).unwrap() < 1e-6 * linf);
    }

    #[test]
    fn zero_increment_keeps_error() {
        let b = base_case(0.03, 1, 0.0, 3);
        let parts = error_update(&b.e, &b.u, &TorusFunction::zero());
        assert_eq!(parts.e_o, b.e);
        assert!(parts.e_n.is_zero() && parts.e_d.is_zero());
        assert_eq!(parts.c_const, 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(SchemeParams::default().validate().is_ok());
        let p = SchemeParams { s: 2, ..SchemeParams::default() };
        assert!(p.validate().is_err());
        let p = SchemeParams { lambda_min: 12, ..SchemeParams::default() };
        assert!(p.validate().is_err());
        assert_eq!(SchemeParams::default().sigma(16), Some(5120));
        assert_eq!(SchemeParams::default().epsilon_target(1), 0.875);
    }
}
