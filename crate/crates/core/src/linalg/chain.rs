//! Determinant bound from a nested chain `V_1 ⊃ .. ⊃ V_n` with
//! `dim V_j = n - j + 1` and `|Tx| <= kappa_j |x|` on `V_j`.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{elim, g_oracle, pullback_det, GValue, LinalgError, LinearMap};
use crate::field::{Scalar, Valuation};

/// Spanning sets of the chain, outermost first.
#[derive(Debug, Clone)]
pub struct SubspaceChain {
    pub spans: Vec<Vec<Vec<Scalar>>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainBound {
    /// `G(n) * prod kappa_j`.
    pub bound: f64,
    pub g: GValue,
    pub det: f64,
    /// `det <= bound`.
    pub holds: bool,
    /// Largest sampled `|Tx|/|x|` on each `V_j`.
    pub sampled_ratios: Vec<f64>,
}

const RANK_TOL: f64 = 1e-10;

fn rank_of(rows: &[Vec<Scalar>], field: &Valuation) -> usize {
    match field {
        Valuation::Real { .. } => elim::rank(
            rows.iter()
                .map(|r| r.iter().map(|s| s.as_real().unwrap()).collect())
                .collect(),
            RANK_TOL,
        ),
        Valuation::Padic { .. } => elim::rank(
            rows.iter()
                .map(|r| r.iter().map(|s| s.as_rational().unwrap().clone()).collect())
                .collect(),
            0.0,
        ),
    }
}

fn random_scalar(rng: &mut ChaCha8Rng, field: &Valuation) -> Scalar {
    match *field {
        Valuation::Real { .. } => Scalar::Real(rng.gen_range(-1.0..=1.0)),
        Valuation::Padic { p } => {
            let n: i64 = rng.gen_range(-50..=50);
            let d: i64 = [1, p as i64, (p * p) as i64][rng.gen_range(0..3)];
            Scalar::Padic {
                p,
                value: BigRational::new(BigInt::from(n), BigInt::from(d)),
            }
        }
    }
}

/// Checks the chain structure and the contraction hypothesis, then compares
/// `pullback_det(T)` with `G(n) prod kappa_j`.
///
/// `G(n) = g(1, n)`: the real value group is dense, and over `Q_p` the
/// weights and vectors are normalized inside the value group.
pub fn det_chain_bound(
    t: &LinearMap,
    chain: &SubspaceChain,
    kappa: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ChainBound, LinalgError> {
    if !t.is_square() {
        return Err(LinalgError::NotSquare {
            rows: t.codomain().dim(),
            cols: t.domain().dim(),
        });
    }
    let n = t.domain().dim();
    let field = *t.valuation();
    if chain.spans.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: chain.spans.len(),
        });
    }
    if kappa.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: kappa.len(),
        });
    }
    if let Some(j) = kappa.iter().position(|&k| !(k >= 0.0)) {
        return Err(LinalgError::NegativeKappa(j + 1));
    }
    for span in &chain.spans {
        for v in span {
            t.domain().check_vector(v)?;
        }
    }
    for (j, span) in chain.spans.iter().enumerate() {
        let expected = n - j;
        let got = rank_of(span, &field);
        if got != expected {
            return Err(LinalgError::ChainDimension {
                index: j + 1,
                expected,
                got,
            });
        }
        if j > 0 {
            let mut joint = chain.spans[j - 1].clone();
            joint.extend(span.iter().cloned());
            if rank_of(&joint, &field) != n - j + 1 {
                return Err(LinalgError::ChainNotNested(j + 1, j));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled_ratios = Vec::with_capacity(n);
    for (j, span) in chain.spans.iter().enumerate() {
        let mut worst = 0.0f64;
        let mut probe = |x: Vec<Scalar>| -> Result<(), LinalgError> {
            let nx = t.domain().norm(&x)?;
            if nx > 0.0 {
                worst = worst.max(t.codomain().norm(&t.apply(&x)?)? / nx);
            }
            Ok(())
        };
        for v in span {
            probe(v.clone())?;
        }
        for _ in 0..samples {
            let mut x = vec![field.zero(); n];
            for v in span {
                let c = random_scalar(&mut rng, &field);
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi = xi.checked_add(&c.checked_mul(vi)?)?;
                }
            }
            probe(x)?;
        }
        if worst > kappa[j] * (1.0 + 1e-9) {
            return Err(LinalgError::ChainHypothesis {
                index: j + 1,
                ratio: worst,
                kappa: kappa[j],
            });
        }
        sampled_ratios.push(worst);
    }

    let g = g_oracle(1.0, n, &field)?;
    let bound = g.value * kappa.iter().product::<f64>();
    let det = pullback_det(t)?.value;
    Ok(ChainBound {
        bound,
        g,
        det,
        holds: det <= bound * (1.0 + 1e-12),
        sampled_ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: &[&[f64]]) -> Vec<Vec<Scalar>> {
        rows.iter().map(|r| r.iter().map(|&x| Scalar::Real(x)).collect()).collect()
    }

    #[test]
    fn diagonal_real() {
        let t = LinearMap::real(&[vec![3.0, 0.0], vec![0.0, -0.5]]).unwrap();
        let chain = SubspaceChain {
            spans: vec![real(&[&[1.0, 0.0], &[0.0, 1.0]]), real(&[&[0.0, 1.0]])],
        };
        let b = det_chain_bound(&t, &chain, &[3.0, 0.5], 200, 7).unwrap();
        assert_eq!(b.bound, 3.0);
        assert!((b.det - 1.5).abs() < 1e-12);
        assert!(b.holds);
    }

    #[test]
    fn hypothesis_violation_reported() {
        let t = LinearMap::real(&[vec![3.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let chain = SubspaceChain {
            spans: vec![real(&[&[1.0, 0.0], &[0.0, 1.0]]), real(&[&[0.0, 1.0]])],
        };
        assert!(matches!(
            det_chain_bound(&t, &chain, &[3.0, 1.0], 50, 1),
            Err(LinalgError::ChainHypothesis { index: 2, .. })
        ));
    }

    #[test]
    fn bad_chain_shapes() {
        let t = LinearMap::real(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let flat = SubspaceChain {
            spans: vec![real(&[&[1.0, 0.0], &[2.0, 0.0]]), real(&[&[0.0, 1.0]])],
        };
        assert!(matches!(
            det_chain_bound(&t, &flat, &[1.0, 1.0], 10, 1),
            Err(LinalgError::ChainDimension { index: 1, .. })
        ));
    }

    #[test]
    fn padic_equality() {
        let q = Valuation::padic(5).unwrap();
        let s = super::super::NormedSpace::sup(q, 2).unwrap();
        let t = LinearMap::new(
            s.clone(),
            s,
            vec![vec![q.integer(5), q.zero()], vec![q.zero(), q.integer(50)]],
        )
        .unwrap();
        let chain = SubspaceChain {
            spans: vec![
                vec![vec![q.one(), q.zero()], vec![q.zero(), q.one()]],
                vec![vec![q.zero(), q.one()]],
            ],
        };
        let b = det_chain_bound(&t, &chain, &[0.2, 0.04], 100, 3).unwrap();
        assert_eq!(b.bound, b.det);
    }
}
