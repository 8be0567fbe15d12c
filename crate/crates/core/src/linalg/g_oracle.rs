//! `g(theta, n) = sup { |det(a_ij)| : |a_ij| <= theta }`.
//!
//! Over `R` the determinant is multilinear, so the supremum is attained on
//! sign matrices and `g(theta, n) = theta^n g(1, n)`; `g(1, n)` is enumerated
//! exactly for `n <= 5`. Beyond that the factorial and Hadamard bounds are
//! returned and flagged. Over `Q_p` the ultrametric inequality gives
//! `g = theta'^n` with `theta'` the largest value-group element `<= theta`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LinalgError;
use crate::field::Valuation;

/// Largest `n` for which the archimedean value is enumerated.
pub const EXACT_LIMIT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GKind {
    Exact,
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GValue {
    pub value: f64,
    pub ln_value: f64,
    pub kind: GKind,
}

impl GValue {
    pub fn is_exact(&self) -> bool {
        self.kind == GKind::Exact
    }
}

/// Fraction-free (Bareiss) determinant of a small integer matrix.
fn bareiss(mut a: [[i64; EXACT_LIMIT]; EXACT_LIMIT], n: usize) -> i64 {
    let mut sign = 1;
    let mut prev = 1i64;
    for k in 0..n.saturating_sub(1) {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

fn enumerate_g1(n: usize) -> u64 {
    if n == 1 {
        return 1;
    }
    // flipping the sign of a row or a column leaves |det| unchanged, so the
    // first row and first column are pinned to +1
    let free = (n - 1) * (n - 1);
    let total: u64 = 1 << free;
    (0..total)
        .into_par_iter()
        .map(|mask| {
            let mut a = [[1i64; EXACT_LIMIT]; EXACT_LIMIT];
            let mut bit = 0;
            for row in a.iter_mut().take(n).skip(1) {
                for entry in row.iter_mut().take(n).skip(1) {
                    if mask >> bit & 1 == 1 {
                        *entry = -1;
                    }
                    bit += 1;
                }
            }
            bareiss(a, n).unsigned_abs()
        })
        .max()
        .unwrap_or(0)
}

/// Exact `g(1, n)` over the reals for `1 <= n <= 5`.
pub fn real_g1_exact(n: usize) -> Option<u64> {
    static CACHE: [OnceLock<u64>; EXACT_LIMIT] = [const { OnceLock::new() }; EXACT_LIMIT];
    if n == 0 || n > EXACT_LIMIT {
        return None;
    }
    Some(*CACHE[n - 1].get_or_init(|| enumerate_g1(n)))
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

pub fn g_oracle(theta: f64, n: usize, valuation: &Valuation) -> Result<GValue, LinalgError> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(LinalgError::InvalidTheta(theta));
    }
    if n == 0 {
        return Err(LinalgError::ZeroDimension);
    }
    let nf = n as f64;
    match valuation {
        Valuation::Real { .. } => {
            if let Some(g1) = real_g1_exact(n) {
                let ln_value = (g1 as f64).ln() + nf * theta.ln();
                Ok(GValue {
                    value: ln_value.exp(),
                    ln_value,
                    kind: GKind::Exact,
                })
            } else {
                let ln_fact = ln_factorial(n) + nf * theta.ln();
                let ln_hadamard = nf * (theta.ln() + 0.5 * nf.ln());
                let ln_value = ln_fact.min(ln_hadamard);
                Ok(GValue {
                    value: ln_value.exp(),
                    ln_value,
                    kind: GKind::Bound,
                })
            }
        }
        Valuation::Padic { .. } => {
            let floor = valuation.value_group_floor(theta);
            let ln_value = nf * floor.ln();
            Ok(GValue {
                value: floor.powi(n as i32),
                ln_value,
                kind: GKind::Exact,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_maximal_determinants() {
        assert_eq!(real_g1_exact(1), Some(1));
        assert_eq!(real_g1_exact(2), Some(2));
        assert_eq!(real_g1_exact(3), Some(4));
        assert_eq!(real_g1_exact(4), Some(16));
        assert_eq!(real_g1_exact(5), Some(48));
        assert_eq!(real_g1_exact(6), None);
    }

    #[test]
    fn scaling_and_bounds() {
        let r = Valuation::real();
        let g = g_oracle(0.5, 3, &r).unwrap();
        assert!((g.value - 0.5).abs() < 1e-15);
        let big = g_oracle(1.0, 8, &r).unwrap();
        assert_eq!(big.kind, GKind::Bound);
        assert!((big.value - 8f64.powf(4.0)).abs() / big.value < 1e-12);
        assert!(g_oracle(0.0, 2, &r).is_err());
        assert!(g_oracle(-1.0, 2, &r).is_err());
    }

    #[test]
    fn padic_values() {
        let q = Valuation::padic(5).unwrap();
        for n in 1..8 {
            assert_eq!(g_oracle(1.0, n, &q).unwrap().value, 1.0);
        }
        assert_eq!(g_oracle(5.0, 2, &q).unwrap().value, 25.0);
        assert_eq!(g_oracle(4.0, 2, &q).unwrap().value, 1.0);
    }
}
