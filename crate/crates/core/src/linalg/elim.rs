//! Gaussian elimination shared by the real and p-adic code paths.

use std::ops::Neg;

use num_rational::BigRational;
use num_traits::{Num, Zero};

pub(crate) trait Pivot: Num + Clone + Neg<Output = Self> {
    /// Size used to pick pivots; zero marks an unusable pivot.
    fn weight(&self) -> f64;
}

impl Pivot for f64 {
    fn weight(&self) -> f64 {
        self.abs()
    }
}

impl Pivot for BigRational {
    fn weight(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else {
            1.0
        }
    }
}

fn max_weight<T: Pivot>(rows: &[Vec<T>]) -> f64 {
    rows.iter()
        .flat_map(|r| r.iter().map(Pivot::weight))
        .fold(0.0, f64::max)
}

pub(crate) fn determinant<T: Pivot>(mut a: Vec<Vec<T>>) -> T {
    let n = a.len();
    let mut det = T::one();
    for col in 0..n {
        let (best, w) = (col..n)
            .map(|r| (r, a[r][col].weight()))
            .fold((col, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if w == 0.0 {
            return T::zero();
        }
        if best != col {
            a.swap(best, col);
            det = -det;
        }
        let pivot = a[col][col].clone();
        det = det * pivot.clone();
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() / pivot.clone();
            for c in col..n {
                let delta = factor.clone() * a[col][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
        }
    }
    det
}

/// Rank of a row-major matrix; `rel_tol` is relative to the largest entry.
pub(crate) fn rank<T: Pivot>(mut a: Vec<Vec<T>>, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let cols = a[0].len();
    let tol = rel_tol * max_weight(&a);
    let mut rank = 0;
    for col in 0..cols {
        if rank == a.len() {
            break;
        }
        let (best, w) = (rank..a.len())
            .map(|r| (r, a[r][col].weight()))
            .fold((rank, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if w <= tol || w == 0.0 {
            continue;
        }
        a.swap(best, rank);
        let pivot = a[rank][col].clone();
        for r in rank + 1..a.len() {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone() / pivot.clone();
            for c in col..cols {
                let delta = factor.clone() * a[rank][c].clone();
                a[r][c] = a[r][c].clone() - delta;
            }
        }
        rank += 1;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn det_small() {
        assert_eq!(determinant(vec![vec![1.0, 1.0], vec![0.0, 1.0]]), 1.0);
        assert_eq!(determinant(vec![vec![0.0, 2.0], vec![3.0, 0.0]]), -6.0);
        let d = determinant(vec![vec![q(2), q(1)], vec![q(4), q(7)]]);
        assert_eq!(d, q(10));
    }

    #[test]
    fn rank_detects_dependence() {
        assert_eq!(rank(vec![vec![1.0, 2.0], vec![2.0, 4.0]], 1e-12), 1);
        assert_eq!(rank(vec![vec![q(1), q(0)], vec![q(0), q(3)], vec![q(1), q(3)]], 0.0), 2);
    }
}
