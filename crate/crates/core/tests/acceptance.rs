//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Every tolerance and grid is pinned below. The default iteration (q = 0, 1, 2)
//! is computed once and shared by the criteria that inspect its stages.

use kdv_flex::lp::LpFilter;
use kdv_flex::norms::{lp_norm, sobolev_norm};
use kdv_flex::scheme::{iterate, IterationState, SchemeParams};
use kdv_flex::slabs::{build_slab_fourier, build_slab_physical, SlabProfile, SlabSpec};
use kdv_flex::verify::lemmas::lemma_suite;
use kdv_flex::verify::scaling::{error_reports, high_low_sweep, slab_reports, ScalingInputs, ScalingReport};
use kdv_flex::verify::weak::weak_residual;
use kdv_flex::verify::{relaxed_residual, single_shell};
use kdv_flex::TorusFunction;
use std::process::ExitCode;
use std::time::{Duration, Instant};

const Q_MAX: usize = 2;
const RESIDUAL_TOL: f64 = 1e-8;
const ITERATION_BUDGET: Duration = Duration::from_secs(120);
const DECAY_RATIO: f64 = 0.5;
const DUAL_BUILD_TOL: f64 = 1e-6;
const DUAL_BUILD_CASES: [(u64, f64); 2] = [(1 << 8, 0.5), (1 << 10, 0.75)];
const SLAB_EPSILON: f64 = 0.5;
const SLAB_GRID: [u32; 7] = [7, 8, 9, 10, 11, 12, 13];
const SLAB_SLOPE_IDS: [&str; 3] = ["rho_l1", "rho_l4", "rho_linf"];
const HIGH_LOW_GRID: [i64; 3] = [1 << 6, 1 << 8, 1 << 10];
const HIGH_LOW_LAST: f64 = 1e-3;
const ERROR_GRID: [u32; 6] = [7, 8, 9, 10, 11, 12];
const ERROR_SLOPE_IDS: [&str; 3] = ["e_d", "e_n", "rho_sq_osc"];
const CANCELLATION_TOL: f64 = 1e-8;
const ITEM4_RATIO: f64 = 0.25;
const ITEM4_FLOOR: f64 = 0.1;
const WEAK_FREQS: [i64; 8] = [1, 2, 3, 4, 5, 6, 7, 8];
const WEAK_TOL: f64 = 1e-9;
const LEMMA_SEED: u64 = 7;
const LEMMA_BUDGET: Duration = Duration::from_secs(300);
/// The families named by the property-suite criterion; the other lemma
/// reports are informational here.
const LEMMA_IDS: [&str; 6] = [
    "lp_partition_of_unity",
    "projector_lp_bound",
    "bernstein_a_ck",
    "bernstein_a_besov",
    "bernstein_b_sobolev",
    "kato_ponce",
];

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

type Run = Result<(Vec<IterationState>, Duration), String>;

fn stages(run: &Run) -> Result<&[IterationState], Verdict> {
    run.as_ref().map(|(s, _)| s.as_slice()).map_err(|e| Verdict::new(false, format!("iteration failed: {e}")))
}

fn relaxed_identity(run: &Run) -> Verdict {
    let (states, elapsed) = match run {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, format!("iteration failed: {e}")),
    };
    let mut worst: f64 = 0.0;
    for s in states {
        let res = sobolev_norm(&relaxed_residual(&s.u, &s.e), -3.0);
        worst = worst.max(res / s.e_norm.max(1.0));
    }
    let pass = worst < RESIDUAL_TOL && *elapsed < ITERATION_BUDGET && states.len() == Q_MAX + 1;
    Verdict::new(pass, format!("worst relative residual {worst:.2e} < {RESIDUAL_TOL:e}; runtime {:.1?}", elapsed))
}

fn error_decay(run: &Run) -> Verdict {
    let states = match stages(run) {
        Ok(s) => s,
        Err(v) => return v,
    };
    let ratios: Vec<f64> = states.windows(2).map(|w| w[1].e_norm / w[0].e_norm).collect();
    let pass = ratios.len() == Q_MAX && ratios.iter().all(|r| *r <= DECAY_RATIO);
    Verdict::new(pass, format!("ratios {ratios:.4?} <= {DECAY_RATIO}"))
}

fn dual_build(profile: &SlabProfile) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for (lambda, eps) in DUAL_BUILD_CASES {
        let r = (|| -> Result<f64, String> {
            let spec = SlabSpec::new(lambda, eps).map_err(|e| e.to_string())?;
            let mf = (spec.series_extent(profile) * spec.mu()).max(4 * spec.lambda());
            let fourier = build_slab_fourier(&spec, profile, mf).map_err(|e| e.to_string())?;
            let physical = build_slab_physical(&spec, profile, mf).map_err(|e| e.to_string())?;
            let diff = lp_norm(&physical.sub(&fourier), f64::INFINITY).map_err(|e| e.to_string())?;
            let sup = lp_norm(&fourier, f64::INFINITY).map_err(|e| e.to_string())?;
            Ok(diff / sup)
        })();
        match r {
            Ok(rel) => {
                pass &= rel < DUAL_BUILD_TOL;
                parts.push(format!("(λ={lambda}, ε={eps}) {rel:.2e}"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("(λ={lambda}, ε={eps}) error {e}"));
            }
        }
    }
    Verdict::new(pass, format!("{} < {DUAL_BUILD_TOL:e}", parts.join(", ")))
}

fn pick<'a>(reports: &'a [ScalingReport], id: &str) -> Option<&'a ScalingReport> {
    reports.iter().find(|r| r.id == id)
}

fn slope_verdict(reports: &Result<Vec<ScalingReport>, String>, ids: &[&str]) -> Verdict {
    let reports = match reports {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e.clone()),
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for id in ids {
        match pick(reports, id) {
            Some(r) => {
                pass &= r.pass;
                parts.push(format!(
                    "{id} {:.3} vs {:.3}±{}",
                    r.fitted_slope.unwrap_or(f64::NAN),
                    r.predicted_slope.unwrap_or(f64::NAN),
                    r.tolerance
                ));
            }
            None => {
                pass = false;
                parts.push(format!("{id} missing"));
            }
        }
    }
    Verdict::new(pass, parts.join("; "))
}

fn normalization(reports: &Result<Vec<ScalingReport>, String>) -> Verdict {
    let r = match reports.as_ref().map(|r| pick(r, "rho_l2_defect")) {
        Ok(Some(r)) => r,
        Ok(None) => return Verdict::new(false, "rho_l2_defect missing"),
        Err(e) => return Verdict::new(false, e.clone()),
    };
    let margin = r.values.iter().zip(&r.bounds).map(|(v, b)| v / b).fold(0.0, f64::max);
    Verdict::new(r.pass, format!("max defect/bound {margin:.2e} over λ = 2^7..2^13"))
}

fn high_low(filter: &LpFilter, profile: &SlabProfile) -> Verdict {
    let a = TorusFunction::constant(2.0).add(&TorusFunction::cos_mode(1.0, 1));
    match high_low_sweep(filter, profile, &a, &HIGH_LOW_GRID, SLAB_EPSILON) {
        Ok(v) => {
            let decreasing = v.windows(2).all(|w| w[1] < w[0]);
            let last = v.last().copied().unwrap_or(f64::INFINITY);
            Verdict::new(decreasing && last < HIGH_LOW_LAST, format!("values [{}], last < {HIGH_LOW_LAST:e}", sci(&v)))
        }
        Err(e) => Verdict::new(false, e.to_string()),
    }
}

fn cancellation(run: &Run) -> Verdict {
    let states = match stages(run) {
        Ok(s) => s,
        Err(v) => return v,
    };
    let vals: Vec<f64> =
        states[1..].iter().filter_map(|s| s.certificates.last()?.lemma("error_cancellation")?.value).collect();
    let pass = vals.len() == Q_MAX && vals.iter().all(|v| *v <= CANCELLATION_TOL);
    Verdict::new(pass, format!("relative defects [{}] <= {CANCELLATION_TOL:e}", sci(&vals)))
}

fn item4(run: &Run) -> Verdict {
    let states = match stages(run) {
        Ok(s) => s,
        Err(v) => return v,
    };
    let mut pass = states.len() == Q_MAX + 1;
    let mut parts = Vec::new();
    for s in &states[1..] {
        let (Some(st), Some(item)) = (&s.stage, s.certificates.last().and_then(|c| c.item(4))) else {
            pass = false;
            continue;
        };
        pass &= item.pass && st.w_l2 >= ITEM4_RATIO * st.low_l2 && st.w_l2 >= ITEM4_FLOOR;
        parts.push(format!("q={}: ‖w‖={:.4} vs ¼‖P(aρ)‖={:.4}", s.q, st.w_l2, ITEM4_RATIO * st.low_l2));
    }
    Verdict::new(pass, parts.join("; "))
}

fn item5(run: &Run) -> Verdict {
    let states = match stages(run) {
        Ok(s) => s,
        Err(v) => return v,
    };
    let last = &states[states.len() - 1];
    let shells: Vec<Option<u32>> = last.increments.iter().map(single_shell).collect();
    let certified = states[1..].iter().all(|s| s.certificates.last().and_then(|c| c.item(5)).is_some_and(|i| i.pass));
    let pass = certified && shells.len() == Q_MAX && shells.iter().all(Option::is_some);
    Verdict::new(pass, format!("shells {shells:?}"))
}

fn weak_form(run: &Run) -> Verdict {
    let states = match stages(run) {
        Ok(s) => s,
        Err(v) => return v,
    };
    let s = &states[states.len() - 1];
    let res = weak_residual(&s.u, &s.e, 3.0, &WEAK_FREQS);
    let worst = res.iter().map(|r| r.diff / r.scale).fold(0.0, f64::max);
    let pass = s.q == Q_MAX && res.iter().all(|r| r.passes(WEAK_TOL));
    Verdict::new(pass, format!("q={} worst |LHS−RHS|/scale {worst:.2e} < {WEAK_TOL:e}", s.q))
}

fn lemmas() -> Verdict {
    let t = Instant::now();
    let reports = match lemma_suite(LEMMA_SEED) {
        Ok(r) => r,
        Err(e) => return Verdict::new(false, e.to_string()),
    };
    let elapsed = t.elapsed();
    let mut pass = elapsed < LEMMA_BUDGET;
    let mut failed = Vec::new();
    for id in LEMMA_IDS {
        match reports.iter().find(|r| r.id == id) {
            Some(r) if r.pass => {}
            Some(r) => {
                pass = false;
                failed.push(format!("{id} {:.3} > {}", r.statistic, r.threshold));
            }
            None => {
                pass = false;
                failed.push(format!("{id} missing"));
            }
        }
    }
    let detail = if failed.is_empty() { "all families within bounds".to_string() } else { failed.join("; ") };
    Verdict::new(pass, format!("{detail}; runtime {elapsed:.1?}"))
}

fn main() -> ExitCode {
    let params = SchemeParams::default();
    let (filter, profile) = (LpFilter::build(), SlabProfile::default());

    let t = Instant::now();
    let run: Run = iterate(&params, Q_MAX).map(|s| (s, t.elapsed())).map_err(|e| e.to_string());

    let slab_lambdas: Vec<i64> = SLAB_GRID.iter().map(|m| 1 << m).collect();
    let error_lambdas: Vec<i64> = ERROR_GRID.iter().map(|m| 1 << m).collect();
    let inputs =
        |lambdas| ScalingInputs { filter: &filter, profile: &profile, params: &params, lambdas, epsilon: SLAB_EPSILON };
    let slab = slab_reports(&inputs(&slab_lambdas)).map_err(|e| e.to_string());
    let errors = error_reports(&inputs(&error_lambdas)).map_err(|e| e.to_string());

    let verdicts = [
        ("relaxed-equation identity", relaxed_identity(&run)),
        ("error decay", error_decay(&run)),
        ("slab dual construction", dual_build(&profile)),
        ("slab Lp scaling", slope_verdict(&slab, &SLAB_SLOPE_IDS)),
        ("slab normalization", normalization(&slab)),
        ("high-low decay", high_low(&filter, &profile)),
        ("error-part scaling", slope_verdict(&errors, &ERROR_SLOPE_IDS)),
        ("oscillation cancellation", cancellation(&run)),
        ("increment lower bound", item4(&run)),
        ("single-shell support", item5(&run)),
        ("weak-form residual", weak_form(&run)),
        ("property suites", lemmas()),
    ];
    let mut failures = 0;
    for (n, (name, v)) in verdicts.iter().enumerate() {
        println!("{} criterion {:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, n + 1, v.detail);
        failures += usize::from(!v.pass);
    }
    println!("{} of {} criteria pass", verdicts.len() - failures, verdicts.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
