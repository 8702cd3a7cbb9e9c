//! ∫_0^1 |f|^p from uniform samples of a band-limited real f.
//!
//! When f changes sign, |f|^p has kinks and the trapezoid rule degrades to
//! O(h²) per root, all of one sign. Each cell is then integrated by
//! 8-point Gauss–Legendre on a local degree-15 interpolant through the 16
//! surrounding samples; cells containing a root are split there and each
//! half uses the substitution t = z ± δu², which removes the kink.

#![allow(clippy::excessive_precision)]

/// Stencil offsets −7..=8 around the left node of a cell.
const STENCIL: usize = 16;
const LEFT: i64 = 7;

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

#[derive(Clone, Copy, Debug)]
enum Power {
    One,
    ThreeHalves,
    Int(i32),
    Real(f64),
}

impl Power {
    fn new(p: f64) -> Self {
        if p == 1.0 {
            Power::One
        } else if p == 1.5 {
            Power::ThreeHalves
        } else if p.fract() == 0.0 && p <= 16.0 {
            Power::Int(p as i32)
        } else {
            Power::Real(p)
        }
    }

    #[inline]
    fn apply(self, v: f64) -> f64 {
        let a = v.abs();
        match self {
            Power::One => a,
            Power::ThreeHalves => a * a.sqrt(),
            Power::Int(k) => a.powi(k),
            Power::Real(p) => a.powf(p),
        }
    }
}

/// Mean of |f|^p over the grid by the trapezoid rule.
pub fn trapezoid_abs_pow(values: &[f64], p: f64) -> f64 {
    let pw = Power::new(p);
    values.iter().map(|v| pw.apply(*v)).sum::<f64>() / values.len() as f64
}

/// ∫_0^1 |f|^p for samples of a real trigonometric polynomial on an
/// oversampled uniform grid.
pub fn integrate_abs_pow(values: &[f64], p: f64) -> f64 {
    let m = values.len();
    let even_power = p.fract() == 0.0 && (p as i64) % 2 == 0;
    let has_root = (0..m).any(|k| values[k] * values[(k + 1) % m] <= 0.0 && values[k] != values[(k + 1) % m]);
    if even_power || !has_root || m < 2 * STENCIL {
        return trapezoid_abs_pow(values, p);
    }
    let pw = Power::new(p);
    let interp = gauss_interpolation_matrix();
    let mut total = 0.0;
    let mut stencil = [0.0; STENCIL];
    let mi = m as i64;
    for k in 0..m {
        let (a, b) = (values[k], values[(k + 1) % m]);
        for (s, slot) in stencil.iter_mut().enumerate() {
            *slot = values[(k as i64 + s as i64 - LEFT).rem_euclid(mi) as usize];
        }
        if a * b <= 0.0 && a != b {
            total += root_cell(&stencil, pw);
        } else if let Some(toward_left) = root_neighbour(values, k) {
            total += graded_cell(&stencil, pw, toward_left);
        } else {
            let mut cell = 0.0;
            for (row, (_, w)) in interp.iter().zip(GL8.iter()) {
                let v: f64 = row.iter().zip(stencil.iter()).map(|(l, y)| l * y).sum();
                cell += w * pw.apply(v);
            }
            total += 0.5 * cell;
        }
    }
    total / m as f64
}

fn sign_change(values: &[f64], k: usize) -> bool {
    let m = values.len();
    let (a, b) = (values[k % m], values[(k + 1) % m]);
    a * b <= 0.0 && a != b
}

/// Some(true) if the cell to the left holds a root, Some(false) for the right.
fn root_neighbour(values: &[f64], k: usize) -> Option<bool> {
    let m = values.len();
    if sign_change(values, k + m - 1) {
        Some(true)
    } else if sign_change(values, k + 1) {
        Some(false)
    } else {
        None
    }
}

/// A cell next to a root: |f|^p has a branch point within one cell, so
/// split geometrically toward that side.
fn graded_cell(stencil: &[f64; STENCIL], pw: Power, toward_left: bool) -> f64 {
    const BREAKS: [f64; 7] = [0.0, 1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0, 0.25, 0.5, 1.0];
    let bw = barycentric_weights();
    let mut sum = 0.0;
    for w in BREAKS.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        for (x, wt) in GL8.iter() {
            let r = lo + 0.5 * (x + 1.0) * (hi - lo);
            let t = if toward_left { r } else { 1.0 - r };
            sum += 0.5 * (hi - lo) * wt * pw.apply(eval_local(stencil, &bw, t));
        }
    }
    sum
}

/// Lagrange weights of the 16 stencil nodes at the 8 Gauss nodes of [0, 1].
fn gauss_interpolation_matrix() -> [[f64; STENCIL]; 8] {
    let mut out = [[0.0; STENCIL]; 8];
    for (i, (x, _)) in GL8.iter().enumerate() {
        let t = 0.5 * (x + 1.0);
        out[i] = lagrange_weights(t);
    }
    out
}

fn lagrange_weights(t: f64) -> [f64; STENCIL] {
    let mut w = [0.0; STENCIL];
    for (s, ws) in w.iter_mut().enumerate() {
        let xs = s as f64 - LEFT as f64;
        let mut l = 1.0;
        for r in 0..STENCIL {
            if r != s {
                let xr = r as f64 - LEFT as f64;
                l *= (t - xr) / (xs - xr);
            }
        }
        *ws = l;
    }
    w
}

fn barycentric_weights() -> [f64; STENCIL] {
    // w_s ∝ (−1)^s C(15, s) for equispaced nodes
    let mut w = [0.0; STENCIL];
    let mut binom = 1.0;
    for (s, ws) in w.iter_mut().enumerate() {
        *ws = if s % 2 == 0 { binom } else { -binom };
        binom = binom * (15 - s) as f64 / (s + 1) as f64;
    }
    w
}

/// Local interpolant in cell coordinates, t = 0 at the left node.
fn eval_local(stencil: &[f64; STENCIL], bw: &[f64; STENCIL], t: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for s in 0..STENCIL {
        let d = t - (s as f64 - LEFT as f64);
        if d == 0.0 {
            return stencil[s];
        }
        let q = bw[s] / d;
        num += q * stencil[s];
        den += q;
    }
    num / den
}

fn root_cell(stencil: &[f64; STENCIL], pw: Power) -> f64 {
    let bw = barycentric_weights();
    let f = |t: f64| eval_local(stencil, &bw, t);
    let (fa, fb) = (stencil[LEFT as usize], stencil[LEFT as usize + 1]);
    let z = if fa == 0.0 {
        0.0
    } else if fb == 0.0 {
        1.0
    } else {
        find_root(&f, 0.0, 1.0, fa, fb)
    };
    let mut sum = 0.0;
    for (u, w) in GL16.iter() {
        let u = 0.5 * (u + 1.0);
        let w = 0.5 * w;
        if z > 0.0 {
            let t = z - z * u * u;
            sum += w * pw.apply(f(t)) * 2.0 * z * u;
        }
        if z < 1.0 {
            let d = 1.0 - z;
            let t = z + d * u * u;
            sum += w * pw.apply(f(t)) * 2.0 * d * u;
        }
    }
    sum
}

/// Illinois-modified regula falsi on a bracketing interval.
fn find_root<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    let mut side = 0i32;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() < 1e-15 {
            return c;
        }
        if fc * fb < 0.0 {
            a = b;
            fa = fb;
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}

const GL16: [(f64, f64); 16] = [
    (-0.989_400_934_991_649_9, 0.027_152_459_411_754_095),
    (-0.944_575_023_073_232_6, 0.062_253_523_938_647_89),
    (-0.865_631_202_387_831_7, 0.095_158_511_682_492_78),
    (-0.755_404_408_355_003, 0.124_628_971_255_533_87),
    (-0.617_876_244_402_643_7, 0.149_595_988_816_576_73),
    (-0.458_016_777_657_227_4, 0.169_156_519_395_002_54),
    (-0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
    (-0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
    (0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
    (0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
    (0.458_016_777_657_227_4, 0.169_156_519_395_002_54),
    (0.617_876_244_402_643_7, 0.149_595_988_816_576_73),
    (0.755_404_408_355_003, 0.124_628_971_255_533_87),
    (0.865_631_202_387_831_7, 0.095_158_511_682_492_78),
    (0.944_575_023_073_232_6, 0.062_253_523_938_647_89),
    (0.989_400_934_991_649_9, 0.027_152_459_411_754_095),
];

/// n-point Gauss–Legendre rule on [−1, 1] (Newton on the three-term recurrence).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}
