//! Finite-dimensional normed spaces over a valued field, linear maps between
//! them, and the determinant defined as the norm of the pullback on top-degree
//! alternating forms.
//!
//! Norms are weighted sup-norms `|x| = max_j w_j |x_j|`. For these the
//! operator norm, the norm of a top form and the determinant are all exact.

mod chain;
pub(crate) mod elim;
mod g_oracle;
mod triangular;

pub use chain::{det_chain_bound, ChainBound, SubspaceChain};
pub use g_oracle::{g_oracle, real_g1_exact, GKind, GValue, EXACT_LIMIT};
pub use triangular::{tail_infimum, triangular_basis, TriangularBasis};

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::field::{rational_valuation, FieldError, Scalar, Valuation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("valuation mismatch between {0} and {1}")]
    ValuationMismatch(String, String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weights must be finite and strictly positive, got {0}")]
    InvalidWeight(f64),
    #[error("p-adic weights must be integer powers of p, got {0}")]
    WeightOutsideValueGroup(f64),
    #[error("spaces of dimension zero are not supported")]
    ZeroDimension,
    #[error("theta must be positive, got {0}")]
    InvalidTheta(f64),
    #[error("map is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("chain subspace V_{index} has dimension {got}, expected {expected}")]
    ChainDimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("chain subspace V_{0} is not contained in V_{1}")]
    ChainNotNested(usize, usize),
    #[error("chain hypothesis |Tx| <= kappa|x| fails on V_{index}: ratio {ratio} > kappa {kappa}")]
    ChainHypothesis { index: usize, ratio: f64, kappa: f64 },
    #[error("kappa_{0} must be nonnegative")]
    NegativeKappa(usize),
    #[error("precondition fails at v_{index}: |v| = {norm} > 1")]
    VectorTooLong { index: usize, norm: f64 },
    #[error("precondition fails at v_{index}: tail infimum {infimum} < kappa {kappa}")]
    TailInfimum {
        index: usize,
        infimum: f64,
        kappa: f64,
    },
    #[error("kappa must lie in (0, 1], got {0}")]
    InvalidKappa(f64),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("vectors are linearly dependent")]
    Dependent,
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("malformed JSON: {0}")]
    Json(String),
}

/// `K^n` with a weighted sup-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct NormedSpace {
    valuation: Valuation,
    weights: Vec<f64>,
    /// `log_p` of the weights over `Q_p`.
    exponents: Option<Vec<i32>>,
}

impl NormedSpace {
    /// Plain sup-norm over the standard basis.
    pub fn sup(valuation: Valuation, dim: usize) -> Result<Self, LinalgError> {
        Self::weighted(valuation, vec![1.0; dim])
    }

    pub fn weighted(valuation: Valuation, weights: Vec<f64>) -> Result<Self, LinalgError> {
        if weights.is_empty() {
            return Err(LinalgError::ZeroDimension);
        }
        for &w in &weights {
            if !(w > 0.0 && w.is_finite()) {
                return Err(LinalgError::InvalidWeight(w));
            }
        }
        let exponents = match valuation {
            Valuation::Real { .. } => None,
            Valuation::Padic { .. } => Some(
                weights
                    .iter()
                    .map(|&w| {
                        valuation
                            .value_group_exponent(w)
                            .ok_or(LinalgError::WeightOutsideValueGroup(w))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        Ok(Self {
            valuation,
            weights,
            exponents,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn valuation(&self) -> &Valuation {
        &self.valuation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weight_exponents(&self) -> Option<&[i32]> {
        self.exponents.as_deref()
    }

    pub fn check_vector(&self, x: &[Scalar]) -> Result<(), LinalgError> {
        if x.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for s in x {
            if !s.belongs_to(&self.valuation) {
                return Err(LinalgError::ValuationMismatch(
                    self.valuation.to_string(),
                    s.field_name(),
                ));
            }
        }
        Ok(())
    }

    pub fn norm(&self, x: &[Scalar]) -> Result<f64, LinalgError> {
        self.check_vector(x)?;
        Ok(x.iter()
            .zip(&self.weights)
            .map(|(s, w)| w * s.abs_value())
            .fold(0.0, f64::max))
    }

    /// `prod_j 1/w_j`: the norm of the coordinate determinant form divided by
    /// `g(1, n)`, which cancels in every ratio of form norms.
    pub fn unit_form_scale(&self) -> f64 {
        self.weights.iter().map(|w| 1.0 / w).product()
    }

    pub(crate) fn same_field(&self, other: &NormedSpace) -> Result<(), LinalgError> {
        if !self.valuation.same_field(&other.valuation) {
            return Err(LinalgError::ValuationMismatch(
                self.valuation.to_string(),
                other.valuation.to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    valuation: Valuation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
}

impl Serialize for NormedSpace {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let unweighted = self.weights.iter().all(|&w| w == 1.0);
        SpaceRepr {
            valuation: self.valuation,
            dim: unweighted.then_some(self.dim()),
            weights: (!unweighted).then(|| self.weights.clone()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for NormedSpace {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = SpaceRepr::deserialize(deserializer)?;
        let weights = match (repr.weights, repr.dim) {
            (Some(w), None) => w,
            (Some(w), Some(d)) if w.len() == d => w,
            (None, Some(d)) => vec![1.0; d],
            _ => {
                return Err(serde::de::Error::custom(
                    "space needs `dim` or `weights` (of matching length)",
                ))
            }
        };
        NormedSpace::weighted(repr.valuation, weights).map_err(serde::de::Error::custom)
    }
}

/// A linear map `T: X -> Y` stored as a `dim Y x dim X` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    domain: NormedSpace,
    codomain: NormedSpace,
    entries: Vec<Vec<Scalar>>,
}

impl LinearMap {
    pub fn new(
        domain: NormedSpace,
        codomain: NormedSpace,
        entries: Vec<Vec<Scalar>>,
    ) -> Result<Self, LinalgError> {
        domain.same_field(&codomain)?;
        if entries.len() != codomain.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: codomain.dim(),
                got: entries.len(),
            });
        }
        for row in &entries {
            domain.check_vector(row)?;
        }
        Ok(Self {
            domain,
            codomain,
            entries,
        })
    }

    /// Real matrix between unweighted sup-norm spaces.
    pub fn real(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.first().map_or(0, Vec::len);
        let v = Valuation::real();
        Self::new(
            NormedSpace::sup(v, n)?,
            NormedSpace::sup(v, rows.len())?,
            rows.iter()
                .map(|r| r.iter().copied().map(Scalar::Real).collect())
                .collect(),
        )
    }

    pub fn identity(space: &NormedSpace) -> Self {
        let v = space.valuation;
        let entries = (0..space.dim())
            .map(|i| {
                (0..space.dim())
                    .map(|j| if i == j { v.one() } else { v.zero() })
                    .collect()
            })
            .collect();
        Self {
            domain: space.clone(),
            codomain: space.clone(),
            entries,
        }
    }

    pub fn domain(&self) -> &NormedSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &NormedSpace {
        &self.codomain
    }

    pub fn entries(&self) -> &[Vec<Scalar>] {
        &self.entries
    }

    pub fn valuation(&self) -> &Valuation {
        &self.domain.valuation
    }

    pub fn is_square(&self) -> bool {
        self.domain.dim() == self.codomain.dim()
    }

    pub(crate) fn real_matrix(&self) -> Option<Vec<Vec<f64>>> {
        self.entries
            .iter()
            .map(|r| r.iter().map(Scalar::as_real).collect())
            .collect()
    }

    pub(crate) fn rational_matrix(&self) -> Option<Vec<Vec<BigRational>>> {
        self.entries
            .iter()
            .map(|r| r.iter().map(|s| s.as_rational().cloned()).collect())
            .collect()
    }

    pub fn apply(&self, x: &[Scalar]) -> Result<Vec<Scalar>, LinalgError> {
        self.domain.check_vector(x)?;
        self.entries
            .iter()
            .map(|row| {
                row.iter()
                    .zip(x)
                    .try_fold(self.valuation().zero(), |acc, (a, b)| {
                        acc.checked_add(&a.checked_mul(b)?)
                    })
                    .map_err(LinalgError::from)
            })
            .collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LinearMap) -> Result<LinearMap, LinalgError> {
        self.domain.same_field(&inner.codomain)?;
        if self.domain.dim() != inner.codomain.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.domain.dim(),
                got: inner.codomain.dim(),
            });
        }
        let v = *self.valuation();
        let mut entries = Vec::with_capacity(self.codomain.dim());
        for row in &self.entries {
            let mut out = Vec::with_capacity(inner.domain.dim());
            for j in 0..inner.domain.dim() {
                let mut acc = v.zero();
                for (k, a) in row.iter().enumerate() {
                    acc = acc.checked_add(&a.checked_mul(&inner.entries[k][j])?)?;
                }
                out.push(acc);
            }
            entries.push(out);
        }
        LinearMap::new(inner.domain.clone(), self.codomain.clone(), entries)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "domain": self.domain,
            "codomain": self.codomain,
            "entries": self.entries.iter()
                .map(|r| r.iter().map(Scalar::to_descriptor).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, LinalgError> {
        #[derive(Deserialize)]
        struct Repr {
            domain: NormedSpace,
            codomain: NormedSpace,
            entries: Vec<Vec<serde_json::Value>>,
        }
        let repr: Repr =
            serde_json::from_value(value.clone()).map_err(|e| LinalgError::Json(e.to_string()))?;
        let field = repr.domain.valuation;
        let entries = repr
            .entries
            .iter()
            .map(|r| {
                r.iter()
                    .map(|d| Scalar::from_descriptor(d, &field))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        LinearMap::new(repr.domain, repr.codomain, entries)
    }
}

impl Serialize for LinearMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LinearMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(deserializer)?;
        LinearMap::from_json(&v).map_err(serde::de::Error::custom)
    }
}

/// `sup_{x != 0} |Tx| / |x|`, exact for weighted sup-norms.
///
/// Over `R` this is the largest weighted absolute row sum; over `Q_p` the
/// ultrametric inequality reduces it to the largest weighted entry.
pub fn operator_norm(t: &LinearMap) -> Result<f64, LinalgError> {
    t.domain.same_field(&t.codomain)?;
    let wx = t.domain.weights();
    let wy = t.codomain.weights();
    let archimedean = t.valuation().is_archimedean();
    let mut best = 0.0f64;
    for (row, w_out) in t.entries.iter().zip(wy) {
        let terms = row.iter().zip(wx).map(|(a, w_in)| a.abs_value() / w_in);
        let r = if archimedean {
            terms.sum::<f64>()
        } else {
            terms.fold(0.0, f64::max)
        };
        best = best.max(w_out * r);
    }
    Ok(best)
}

/// Value of `det T = |T* alpha| / |alpha|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Determinant {
    pub value: f64,
    /// Over `Q_p`: the integer `e` with `det T = p^e` (absent when `det T = 0`).
    pub padic_exponent: Option<i64>,
}

/// The determinant of a square map in the sense of pulled-back top forms.
///
/// For weighted sup-norms the form norms on both sides are `g(1,n)` times the
/// weight products, so `det T = |det(entries)| * prod w^Y / prod w^X`.
pub fn pullback_det(t: &LinearMap) -> Result<Determinant, LinalgError> {
    if !t.is_square() {
        return Err(LinalgError::NotSquare {
            rows: t.codomain.dim(),
            cols: t.domain.dim(),
        });
    }
    match t.valuation() {
        Valuation::Real { .. } => {
            let m = t.real_matrix().expect("validated real entries");
            let det = elim::determinant(m).abs();
            let scale: f64 = t
                .codomain
                .weights()
                .iter()
                .zip(t.domain.weights())
                .map(|(wy, wx)| wy / wx)
                .product();
            Ok(Determinant {
                value: det * scale,
                padic_exponent: None,
            })
        }
        Valuation::Padic { p } => {
            let m = t.rational_matrix().expect("validated p-adic entries");
            let det = elim::determinant(m);
            if det.is_zero() {
                return Ok(Determinant {
                    value: 0.0,
                    padic_exponent: None,
                });
            }
            let ey: i64 = t.codomain.weight_exponents().unwrap().iter().map(|&e| e as i64).sum();
            let ex: i64 = t.domain.weight_exponents().unwrap().iter().map(|&e| e as i64).sum();
            let e = -rational_valuation(&det.abs(), *p) + ey - ex;
            Ok(Determinant {
                value: (*p as f64).powi(e as i32),
                padic_exponent: Some(e),
            })
        }
    }
}

/// A top-degree alternating form `c * det_coord` on a normed space.
#[derive(Debug, Clone, PartialEq)]
pub struct TopForm {
    pub space: NormedSpace,
    pub coefficient: Scalar,
}

impl TopForm {
    pub fn new(space: NormedSpace, coefficient: Scalar) -> Result<Self, LinalgError> {
        if !coefficient.belongs_to(space.valuation()) {
            return Err(LinalgError::ValuationMismatch(
                space.valuation().to_string(),
                coefficient.field_name(),
            ));
        }
        Ok(Self { space, coefficient })
    }

    /// `sup_{|y_i| <= 1} |alpha(y_1, .., y_n)|`.
    ///
    /// Exact when `g(1, n)` is exact (always over `Q_p`, `n <= 5` over `R`).
    pub fn norm(&self) -> Result<GValue, LinalgError> {
        let g = g_oracle(1.0, self.space.dim(), self.space.valuation())?;
        let value = self.coefficient.abs_value() * g.value * self.space.unit_form_scale();
        Ok(GValue {
            value,
            ln_value: value.ln(),
            kind: g.kind,
        })
    }

    /// `T* alpha = alpha(T., .., T.)` for `T: X -> self.space`.
    pub fn pull_back(&self, t: &LinearMap) -> Result<TopForm, LinalgError> {
        if t.codomain != self.space {
            return Err(LinalgError::DimensionMismatch {
                expected: self.space.dim(),
                got: t.codomain.dim(),
            });
        }
        if !t.is_square() {
            return Err(LinalgError::NotSquare {
                rows: t.codomain.dim(),
                cols: t.domain.dim(),
            });
        }
        let det = match t.valuation() {
            Valuation::Real { .. } => Scalar::Real(elim::determinant(t.real_matrix().unwrap())),
            Valuation::Padic { p } => Scalar::Padic {
                p: *p,
                value: elim::determinant(t.rational_matrix().unwrap()),
            },
        };
        TopForm::new(t.domain.clone(), self.coefficient.checked_mul(&det)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_norm_examples() {
        let id = LinearMap::identity(&NormedSpace::sup(Valuation::real(), 3).unwrap());
        assert_eq!(operator_norm(&id).unwrap(), 1.0);
        let t = LinearMap::real(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(operator_norm(&t).unwrap(), 2.0);
        let q = Valuation::padic(5).unwrap();
        let s = NormedSpace::sup(q, 1).unwrap();
        let five = LinearMap::new(s.clone(), s, vec![vec![q.integer(5)]]).unwrap();
        assert_eq!(operator_norm(&five).unwrap(), 0.2);
    }

    #[test]
    fn weighted_operator_norm() {
        let r = Valuation::real();
        let x = NormedSpace::weighted(r, vec![1.0, 2.0]).unwrap();
        let y = NormedSpace::weighted(r, vec![3.0]).unwrap();
        let t = LinearMap::new(x, y, vec![vec![Scalar::Real(1.0), Scalar::Real(-4.0)]]).unwrap();
        // x = (1, -1/2): |x| = 1, Tx = 3, |Tx| = 9
        assert_eq!(operator_norm(&t).unwrap(), 9.0);
    }

    #[test]
    fn valuation_mismatch_rejected() {
        let x = NormedSpace::sup(Valuation::real(), 1).unwrap();
        let y = NormedSpace::sup(Valuation::padic(3).unwrap(), 1).unwrap();
        assert!(matches!(
            LinearMap::new(x, y, vec![vec![Scalar::Real(1.0)]]),
            Err(LinalgError::ValuationMismatch(..))
        ));
    }

    #[test]
    fn padic_weights_must_be_powers() {
        let q = Valuation::padic(5).unwrap();
        assert!(NormedSpace::weighted(q, vec![25.0, 0.2]).is_ok());
        assert!(matches!(
            NormedSpace::weighted(q, vec![3.0]),
            Err(LinalgError::WeightOutsideValueGroup(_))
        ));
    }

    #[test]
    fn det_examples() {
        let t = LinearMap::real(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(pullback_det(&t).unwrap().value, 6.0);
        let nonsquare = LinearMap::real(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(pullback_det(&nonsquare), Err(LinalgError::NotSquare { .. })));
        let q = Valuation::padic(5).unwrap();
        let s = NormedSpace::sup(q, 2).unwrap();
        let d = LinearMap::new(
            s.clone(),
            s,
            vec![vec![q.integer(10), q.zero()], vec![q.zero(), q.integer(3)]],
        )
        .unwrap();
        let det = pullback_det(&d).unwrap();
        assert_eq!(det.padic_exponent, Some(-1));
        assert_eq!(det.value, 0.2);
    }

    #[test]
    fn top_form_ratio_matches_det() {
        let r = Valuation::real();
        let x = NormedSpace::weighted(r, vec![1.0, 2.0, 0.5]).unwrap();
        let y = NormedSpace::weighted(r, vec![4.0, 1.0, 1.0]).unwrap();
        let rows = [[1.0, 2.0, 0.0], [0.5, -1.0, 3.0], [0.0, 1.0, 1.0]];
        let t = LinearMap::new(
            x,
            y.clone(),
            rows.iter().map(|r| r.iter().map(|&v| Scalar::Real(v)).collect()).collect(),
        )
        .unwrap();
        let alpha = TopForm::new(y, Scalar::Real(2.5)).unwrap();
        let ratio = alpha.pull_back(&t).unwrap().norm().unwrap().value / alpha.norm().unwrap().value;
        let det = pullback_det(&t).unwrap().value;
        assert!((ratio - det).abs() < 1e-12 * det);
    }

    #[test]
    fn map_json_roundtrip() {
        let q = Valuation::padic(5).unwrap();
        let s = NormedSpace::weighted(q, vec![1.0, 5.0]).unwrap();
        let t = LinearMap::new(
            s.clone(),
            s,
            vec![
                vec![Scalar::padic(5, 1, 25).unwrap(), q.integer(2)],
                vec![q.zero(), q.integer(-7)],
            ],
        )
        .unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: LinearMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
