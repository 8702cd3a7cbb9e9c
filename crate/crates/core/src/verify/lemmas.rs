//! Seeded randomized families for the projector, Bernstein, product and
//! norm-comparison estimates. Each report holds the worst constant seen
//! across its family, compared against one uniform threshold.

use crate::lp::LpFilter;
use crate::norms::{besov_norm, ck_norm, lp_norm, sobolev_norm, NormError};
use crate::spectral::{product, synthesize, SpectralError, TorusFunction};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::Relation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub id: String,
    pub statistic: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub trials: usize,
    pub pass: bool,
    pub note: String,
}

impl LemmaReport {
    fn new(id: &str, statistic: f64, relation: Relation, threshold: f64, trials: usize, note: &str) -> Self {
        let pass = statistic.is_finite() && relation.holds(statistic, threshold);
        LemmaReport { id: id.into(), statistic, threshold, relation, trials, pass, note: note.into() }
    }
}

/// Ids produced by [`lemma_suite`].
pub const LEMMA_IDS: &[&str] = &[
    "lp_partition_of_unity",
    "projector_lp_bound",
    "bernstein_a_ck",
    "bernstein_a_ck_normalized",
    "bernstein_a_besov",
    "bernstein_b_sobolev",
    "bernstein_b_besov",
    "kato_ponce",
    "holder",
    "plancherel",
    "sobolev_duality",
    "besov_sobolev_equivalence",
    "ck_finite_difference",
];

/// Ids produced by the scaling sweeps.
pub const SCALING_IDS: &[&str] =
    &["rho_l1", "rho_l2", "rho_l4", "rho_linf", "rho_l2_defect", "e_d", "e_n", "rho_sq_osc", "high_low"];

/// Lemma ids carried by certificates of stages q ≥ 1.
pub const CERTIFICATE_IDS: &[&str] = &[
    "increment_reproduced",
    "oscillation_split",
    "error_cancellation",
    "error_decomposition",
    "nash_constant",
    "off_diagonal_constant",
];

pub const PROJECTOR_TRIALS: usize = 100;
pub const BERNSTEIN_TRIALS: usize = 50;
pub const KATO_PONCE_TRIALS: usize = 100;
pub const PROJECTOR_C: f64 = 4.0;
pub const BERNSTEIN_A_C: f64 = 8.0;
pub const BERNSTEIN_B_C: f64 = 4.0;
pub const KATO_PONCE_C: f64 = 16.0;

fn rng_for(seed: u64, family: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (family << 40) ^ trial as u64)
}

/// Real function with uniform random coefficients on lo ≤ |ξ| ≤ hi.
pub fn random_band(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> TorusFunction {
    let mut pairs = Vec::with_capacity(2 * (hi - lo + 1) as usize);
    for xi in lo.max(1)..=hi {
        let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        pairs.push((xi, c));
        pairs.push((-xi, c.conj()));
    }
    if lo == 0 {
        pairs.push((0, Complex64::new(rng.random_range(-1.0..1.0), 0.0)));
    }
    TorusFunction::from_pairs(pairs).expect("Hermitian by construction")
}

#[derive(Debug, thiserror::Error)]
pub enum LemmaError {
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

pub fn lemma_suite(seed: u64) -> Result<Vec<LemmaReport>, LemmaError> {
    let f = LpFilter::build();
    let mut out = Vec::new();
    out.push(partition_of_unity(&f, seed));
    out.push(projector_bound(&f, seed)?);
    out.extend(bernstein_a(&f, seed)?);
    out.extend(bernstein_b(&f, seed)?);
    out.push(kato_ponce(seed)?);
    out.extend(norm_comparisons(&f, seed)?);
    Ok(out)
}

fn partition_of_unity(f: &LpFilter, seed: u64) -> LemmaReport {
    let mut worst: f64 = 0.0;
    for xi in 1..=(1i64 << 16) {
        let s: f64 = (0..=17).map(|j| f.shell_weight(j, xi)).sum();
        worst = worst.max((s - 1.0).abs());
    }
    for t in 0..PROJECTOR_TRIALS {
        let mut rng = rng_for(seed, 1, t);
        let hi = rng.random_range(8..=4096);
        let g = random_band(&mut rng, 0, hi);
        let mut sum = TorusFunction::zero();
        for j in f.active_shells(&g) {
            sum = sum.add(&f.project_shell(&g, j));
        }
        worst = worst.max(sum.max_coeff_diff(&g.without_mean()) / g.max_abs_coeff());
    }
    LemmaReport::new("lp_partition_of_unity", worst, Relation::Le, 1e-12, PROJECTOR_TRIALS, "")
}

fn projector_bound(f: &LpFilter, seed: u64) -> Result<LemmaReport, LemmaError> {
    let mut worst: f64 = 0.0;
    for t in 0..PROJECTOR_TRIALS {
        let mut rng = rng_for(seed, 2, t);
        let hi = rng.random_range(16..=1024i64);
        let g = random_band(&mut rng, 0, hi);
        let top = 64 - (hi as u64).leading_zeros();
        let j = rng.random_range(0..=top.min(14));
        let low = f.project_low(&g, j);
        let shell = f.project_shell(&g, j);
        for p in [1.0, 2.0, f64::INFINITY] {
            let base = lp_norm(&g, p)?;
            worst = worst.max(lp_norm(&low, p)? / base).max(lp_norm(&shell, p)? / base);
        }
    }
    Ok(LemmaReport::new(
        "projector_lp_bound",
        worst,
        Relation::Le,
        PROJECTOR_C,
        PROJECTOR_TRIALS,
        "P_{<=2^j} and P_{2^j}, p in {1, 2, inf}",
    ))
}

fn bernstein_a(f: &LpFilter, seed: u64) -> Result<Vec<LemmaReport>, LemmaError> {
    let (mut ck, mut ck_norm_2pi, mut besov): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for t in 0..BERNSTEIN_TRIALS {
        let mut rng = rng_for(seed, 3, t);
        let mu = 1i64 << rng.random_range(3..=8);
        let u = random_band(&mut rng, 0, mu - 1);
        let sup = lp_norm(&u, f64::INFINITY)?;
        for s in 1..=3u32 {
            let m = (mu as f64).powi(s as i32);
            let c = ck_norm(&u, s)? / (m * sup);
            ck = ck.max(c);
            ck_norm_2pi = ck_norm_2pi.max(c / (2.0 * PI).powi(s as i32));
            besov = besov.max(besov_norm(f, &u, s as f64, f64::INFINITY, f64::INFINITY)? / (m * sup));
        }
    }
    Ok(vec![
        LemmaReport::new(
            "bernstein_a_ck",
            ck,
            Relation::Le,
            BERNSTEIN_A_C,
            BERNSTEIN_TRIALS,
            "s in {1, 2, 3}; derivatives carry (2 pi)^s on T = [0, 1]",
        ),
        LemmaReport::new(
            "bernstein_a_ck_normalized",
            ck_norm_2pi,
            Relation::Le,
            BERNSTEIN_A_C,
            BERNSTEIN_TRIALS,
            "constant divided by (2 pi)^s",
        ),
        LemmaReport::new("bernstein_a_besov", besov, Relation::Le, BERNSTEIN_A_C, BERNSTEIN_TRIALS, "s in {1, 2, 3}"),
    ])
}

fn bernstein_b(f: &LpFilter, seed: u64) -> Result<Vec<LemmaReport>, LemmaError> {
    let (mut sob, mut besov): (f64, f64) = (0.0, 0.0);
    for t in 0..BERNSTEIN_TRIALS {
        let mut rng = rng_for(seed, 4, t);
        let mu = 1i64 << rng.random_range(3..=9);
        let v = random_band(&mut rng, mu, 2 * mu - 1);
        let l2 = v.coeff_l2_sq().sqrt();
        let sup = lp_norm(&v, f64::INFINITY)?;
        for s in [-1.0, 1.0, 2.0] {
            let m = (mu as f64).powf(s);
            sob = sob.max(sobolev_norm(&v, s) / (m * l2));
            besov = besov.max(besov_norm(f, &v, s, f64::INFINITY, f64::INFINITY)? / (m * sup));
        }
    }
    Ok(vec![
        LemmaReport::new("bernstein_b_sobolev", sob, Relation::Le, BERNSTEIN_B_C, BERNSTEIN_TRIALS, "s in {-1, 1, 2}"),
        LemmaReport::new("bernstein_b_besov", besov, Relation::Le, BERNSTEIN_B_C, BERNSTEIN_TRIALS, "s in {-1, 1, 2}"),
    ])
}

fn kato_ponce(seed: u64) -> Result<LemmaReport, LemmaError> {
    let mut worst: f64 = 0.0;
    for t in 0..KATO_PONCE_TRIALS {
        let mut rng = rng_for(seed, 5, t);
        let top = rng.random_range(1..=8);
        let alpha = random_band(&mut rng, 0, top);
        let lo = rng.random_range(1..=64);
        let width = rng.random_range(0..=256);
        let beta = random_band(&mut rng, lo, lo + width);
        let lhs = sobolev_norm(&product(&alpha, &beta), -3.0);
        worst = worst.max(lhs / (ck_norm(&alpha, 3)? * sobolev_norm(&beta, -3.0)));
    }
    Ok(LemmaReport::new("kato_ponce", worst, Relation::Le, KATO_PONCE_C, KATO_PONCE_TRIALS, "s = 3"))
}

fn norm_comparisons(f: &LpFilter, seed: u64) -> Result<Vec<LemmaReport>, LemmaError> {
    let exps = [1.0, 1.5, 2.0, 4.0, f64::INFINITY];
    let (mut holder, mut planch, mut dual, mut equiv, mut fd): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 1.0, 0.0);
    for t in 0..PROJECTOR_TRIALS {
        let mut rng = rng_for(seed, 6, t);
        let top = rng.random_range(4..=256);
        let g = random_band(&mut rng, 0, top);
        let norms: Vec<f64> = exps.iter().map(|p| lp_norm(&g, *p)).collect::<Result<_, _>>()?;
        for w in norms.windows(2) {
            holder = holder.max(w[0] / w[1]);
        }
        let n = 4096;
        let grid = synthesize(&g, n)?;
        let quad: f64 = grid.values.iter().map(|v| v * v).sum::<f64>() / n as f64;
        planch = planch.max((quad - g.coeff_l2_sq()).abs() / g.coeff_l2_sq());

        let top = rng.random_range(4..=256);
        let h = random_band(&mut rng, 1, top);
        let pairing: f64 = h.nonzeros().map(|(xi, c)| (g.coeff(xi).conj() * c).re).sum();
        let gz = g.without_mean();
        dual = dual.max(pairing.abs() / (sobolev_norm(&gz, -2.0) * sobolev_norm(&h, 2.0)));

        let s = rng.random_range(-2.0..2.0);
        let r = besov_norm(f, &gz, s, 2.0, 2.0)? / sobolev_norm(&gz, s);
        equiv = equiv.max(r).max(1.0 / r);
    }
    for t in 0..20 {
        let mut rng = rng_for(seed, 7, t);
        let top = rng.random_range(2..=32);
        let g = random_band(&mut rng, 0, top);
        let n = 1 << 14;
        let v = synthesize(&g, n)?.values;
        let h = 1.0 / n as f64;
        let at = |i: usize| v[i % n];
        let d1 = (0..n).map(|i| ((at(i + 1) - at(i + n - 1)) / (2.0 * h)).abs()).fold(0.0, f64::max);
        let d2 = (0..n).map(|i| ((at(i + 1) - 2.0 * at(i) + at(i + n - 1)) / (h * h)).abs()).fold(0.0, f64::max);
        let d0 = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let fd_ck = d0.max(d1).max(d2);
        let ck = ck_norm(&g, 2)?;
        fd = fd.max((fd_ck - ck).abs() / ck);
    }
    Ok(vec![
        LemmaReport::new("holder", holder, Relation::Le, 1.0 + 1e-9, PROJECTOR_TRIALS, "p <= r implies |f|_p <= |f|_r"),
        LemmaReport::new("plancherel", planch, Relation::Le, 1e-10, PROJECTOR_TRIALS, ""),
        LemmaReport::new("sobolev_duality", dual, Relation::Le, 1.0 + 1e-12, PROJECTOR_TRIALS, "s = 2"),
        LemmaReport::new(
            "besov_sobolev_equivalence",
            equiv,
            Relation::Le,
            4.0,
            PROJECTOR_TRIALS,
            "B^s_{2,2} against H^s, s in [-2, 2)",
        ),
        LemmaReport::new("ck_finite_difference", fd, Relation::Le, 1e-4, 20, "k = 2 on a 2^14 grid"),
    ])
}
