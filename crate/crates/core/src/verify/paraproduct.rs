//! Shell-pair decomposition of u² for band-limited iterates.

use crate::lp::LpFilter;
use crate::norms::sobolev_norm;
use crate::spectral::{product, TorusFunction};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellPair {
    pub j: u32,
    pub j2: u32,
    /// ‖P_{≠0}(P_{2^j}u · P_{2^{j2}}u)‖_{Ḣ^{−s}}.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParaproductTable {
    pub q: usize,
    /// Pairs with j ≤ j2.
    pub pairs: Vec<ShellPair>,
    /// Σ over ordered pairs (j, j2).
    pub double_sum: f64,
}

/// One table per partial sum u_q = w_0 + … + w_q.
pub fn paraproduct_partial_sums(filter: &LpFilter, increments: &[TorusFunction], s: f64) -> Vec<ParaproductTable> {
    let mut u = TorusFunction::zero();
    let mut out = Vec::with_capacity(increments.len());
    for (q, w) in increments.iter().enumerate() {
        u = u.add(w);
        out.push(shell_table(filter, &u, s, q));
    }
    out
}

pub fn shell_table(filter: &LpFilter, u: &TorusFunction, s: f64, q: usize) -> ParaproductTable {
    let shells: Vec<(u32, TorusFunction)> =
        filter.active_shells(u).into_iter().map(|j| (j, filter.project_shell(u, j))).collect();
    let mut pairs = Vec::new();
    let mut double_sum = 0.0;
    for (i, (j, a)) in shells.iter().enumerate() {
        for (j2, b) in &shells[i..] {
            let value = sobolev_norm(&product(a, b), -s);
            double_sum += if j == j2 { value } else { 2.0 * value };
            pairs.push(ShellPair { j: *j, j2: *j2, value });
        }
    }
    ParaproductTable { q, pairs, double_sum }
}

/// True when the double sums are nondecreasing in q and all below `budget`.
pub fn monotone_bounded(tables: &[ParaproductTable], budget: f64) -> bool {
    tables.windows(2).all(|w| w[1].double_sum >= w[0].double_sum * (1.0 - 1e-12))
        && tables.iter().all(|t| t.double_sum < budget)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_shell_is_the_diagonal_term() {
        let f = LpFilter::build();
        let w = TorusFunction::cos_mode(1.0, 40);
        let t = &paraproduct_partial_sums(&f, std::slice::from_ref(&w), 3.0)[0];
        assert_eq!(t.pairs.len(), 1);
        let want = sobolev_norm(&product(&w, &w), -3.0);
        assert!((t.double_sum - want).abs() < 1e-15);
    }

    #[test]
    fn sums_grow_with_more_increments() {
        let f = LpFilter::build();
        let ws = [TorusFunction::sin_mode(0.1, 1), TorusFunction::cos_mode(0.5, 40), TorusFunction::cos_mode(0.5, 700)];
        let t = paraproduct_partial_sums(&f, &ws, 3.0);
        assert!(monotone_bounded(&t, 1.0));
        assert!(t[2].pairs.len() > t[1].pairs.len());
    }
}
