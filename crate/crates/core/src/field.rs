//! Scalars over valued fields: the reals with the usual absolute value and
//! the p-adic rationals with `|s| = p^(-v_p(s))`.
//!
//! p-adic scalars are exact rationals; the valuation is read off the
//! numerator and denominator, so absolute values never carry rounding.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default annulus constant for the reals, `1 - 2^-20`.
pub const DEFAULT_REAL_THETA: f64 = 1.0 - 1.0 / 1_048_576.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("the trivial valuation is not supported (p = {0})")]
    TrivialValuation(u64),
    #[error("p = {0} is not prime")]
    NotPrime(u64),
    #[error("theta must lie in (0, 1], got {0}")]
    InvalidTheta(f64),
    #[error("operands live over different fields: {0} vs {1}")]
    MixedValuation(String, String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("cannot normalize the zero vector")]
    ZeroVector,
    #[error("empty vector")]
    EmptyVector,
    #[error("non-finite real scalar {0}")]
    NonFinite(f64),
    #[error("malformed scalar descriptor: {0}")]
    Descriptor(String),
}

/// An absolute value on the scalar field.
///
/// The reals carry a configurable `theta < 1` (their value group is dense);
/// `Q_p` has the discrete value group `p^Z` and therefore `theta = 1/p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ValuationRepr", into = "ValuationRepr")]
pub enum Valuation {
    Real { theta: f64 },
    Padic { p: u64 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ValuationRepr {
    Real {
        #[serde(default = "default_theta")]
        theta: f64,
    },
    Padic {
        p: u64,
    },
}

fn default_theta() -> f64 {
    DEFAULT_REAL_THETA
}

impl TryFrom<ValuationRepr> for Valuation {
    type Error = FieldError;

    fn try_from(repr: ValuationRepr) -> Result<Self, Self::Error> {
        match repr {
            ValuationRepr::Real { theta } => Valuation::real_with_theta(theta),
            ValuationRepr::Padic { p } => Valuation::padic(p),
        }
    }
}

impl From<Valuation> for ValuationRepr {
    fn from(v: Valuation) -> Self {
        match v {
            Valuation::Real { theta } => ValuationRepr::Real { theta },
            Valuation::Padic { p } => ValuationRepr::Padic { p },
        }
    }
}

impl Default for Valuation {
    fn default() -> Self {
        Valuation::Real {
            theta: DEFAULT_REAL_THETA,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Real { .. } => write!(f, "R"),
            Valuation::Padic { p } => write!(f, "Q_{p}"),
        }
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Valuation {
    pub fn real() -> Self {
        Self::default()
    }

    pub fn real_with_theta(theta: f64) -> Result<Self, FieldError> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(FieldError::InvalidTheta(theta));
        }
        Ok(Valuation::Real { theta })
    }

    pub fn padic(p: u64) -> Result<Self, FieldError> {
        if p <= 1 {
            return Err(FieldError::TrivialValuation(p));
        }
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(Valuation::Padic { p })
    }

    /// The annulus constant: `1/p` for `Q_p`, the configured value for `R`.
    pub fn theta(&self) -> f64 {
        match *self {
            Valuation::Real { theta } => theta,
            Valuation::Padic { p } => 1.0 / p as f64,
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Valuation::Real { .. })
    }

    pub fn is_archimedean(&self) -> bool {
        matches!(self, Valuation::Real { .. })
    }

    pub fn prime(&self) -> Option<u64> {
        match *self {
            Valuation::Real { .. } => None,
            Valuation::Padic { p } => Some(p),
        }
    }

    /// Whether two valuations describe the same field (theta is ignored).
    pub fn same_field(&self, other: &Valuation) -> bool {
        self.prime() == other.prime()
    }

    /// Largest element of the value group that does not exceed `x > 0`.
    pub fn value_group_floor(&self, x: f64) -> f64 {
        match *self {
            Valuation::Real { .. } => x,
            Valuation::Padic { p } => {
                let k = value_group_floor_exponent(p, x);
                (p as f64).powi(k)
            }
        }
    }

    /// Integer `k` with `p^k == x` when `x` lies in the value group.
    pub fn value_group_exponent(&self, x: f64) -> Option<i32> {
        let p = self.prime()?;
        if x <= 0.0 || !x.is_finite() {
            return None;
        }
        let k = (x.ln() / (p as f64).ln()).round();
        let back = (p as f64).powi(k as i32);
        if ((back - x) / x).abs() < 1e-12 {
            Some(k as i32)
        } else {
            None
        }
    }

    pub fn zero(&self) -> Scalar {
        match *self {
            Valuation::Real { .. } => Scalar::Real(0.0),
            Valuation::Padic { p } => Scalar::Padic {
                p,
                value: BigRational::zero(),
            },
        }
    }

    pub fn one(&self) -> Scalar {
        match *self {
            Valuation::Real { .. } => Scalar::Real(1.0),
            Valuation::Padic { p } => Scalar::Padic {
                p,
                value: BigRational::one(),
            },
        }
    }

    /// Builds a scalar from an integer over this field.
    pub fn integer(&self, n: i64) -> Scalar {
        match *self {
            Valuation::Real { .. } => Scalar::Real(n as f64),
            Valuation::Padic { p } => Scalar::Padic {
                p,
                value: BigRational::from_integer(BigInt::from(n)),
            },
        }
    }
}

fn value_group_floor_exponent(p: u64, x: f64) -> i32 {
    let pf = p as f64;
    let mut k = (x.ln() / pf.ln()).floor() as i32;
    // guard the float estimate against off-by-one on exact powers
    while pf.powi(k + 1) <= x {
        k += 1;
    }
    while pf.powi(k) > x {
        k -= 1;
    }
    k
}

/// A field element together with the field it lives in.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Real(f64),
    Padic { p: u64, value: BigRational },
}

/// p-adic valuation of a nonzero integer.
pub fn int_valuation(n: &BigInt, p: u64) -> i64 {
    debug_assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

/// p-adic valuation of a nonzero rational.
pub fn rational_valuation(q: &BigRational, p: u64) -> i64 {
    int_valuation(q.numer(), p) - int_valuation(q.denom(), p)
}

/// `p^k` as an exact rational.
pub fn rational_power(p: u64, k: i64) -> BigRational {
    let base = BigInt::from(p);
    let mag = num_traits::pow(base, k.unsigned_abs() as usize);
    if k >= 0 {
        BigRational::from_integer(mag)
    } else {
        BigRational::new(BigInt::one(), mag)
    }
}

impl Scalar {
    pub fn real(x: f64) -> Self {
        Scalar::Real(x)
    }

    pub fn padic(p: u64, numer: i64, denom: i64) -> Result<Self, FieldError> {
        Valuation::padic(p)?;
        if denom == 0 {
            return Err(FieldError::DivisionByZero);
        }
        Ok(Scalar::Padic {
            p,
            value: BigRational::new(BigInt::from(numer), BigInt::from(denom)),
        })
    }

    pub fn padic_rational(p: u64, value: BigRational) -> Self {
        Scalar::Padic { p, value }
    }

    pub fn field_name(&self) -> String {
        match self {
            Scalar::Real(_) => "R".into(),
            Scalar::Padic { p, .. } => format!("Q_{p}"),
        }
    }

    pub fn prime(&self) -> Option<u64> {
        match self {
            Scalar::Real(_) => None,
            Scalar::Padic { p, .. } => Some(*p),
        }
    }

    pub fn belongs_to(&self, v: &Valuation) -> bool {
        self.prime() == v.prime()
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Real(x) => *x == 0.0,
            Scalar::Padic { value, .. } => value.is_zero(),
        }
    }

    /// `|s|`: the usual absolute value over `R`, `p^(-v_p(s))` over `Q_p`.
    pub fn abs_value(&self) -> f64 {
        match self {
            Scalar::Real(x) => x.abs(),
            Scalar::Padic { p, value } => {
                if value.is_zero() {
                    0.0
                } else {
                    let v = rational_valuation(value, *p);
                    (*p as f64).powi(-(v as i32))
                }
            }
        }
    }

    /// `v_p(s)` for nonzero p-adic scalars.
    pub fn padic_valuation(&self) -> Option<i64> {
        match self {
            Scalar::Padic { p, value } if !value.is_zero() => Some(rational_valuation(value, *p)),
            _ => None,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Scalar::Real(x) => Some(*x),
            Scalar::Padic { .. } => None,
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Scalar::Padic { value, .. } => Some(value),
            Scalar::Real(_) => None,
        }
    }

    fn check_same(&self, other: &Scalar) -> Result<(), FieldError> {
        if self.prime() != other.prime() {
            return Err(FieldError::MixedValuation(
                self.field_name(),
                other.field_name(),
            ));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Scalar) -> Result<Scalar, FieldError> {
        self.check_same(other)?;
        Ok(match (self, other) {
            (Scalar::Real(a), Scalar::Real(b)) => Scalar::Real(a + b),
            (Scalar::Padic { p, value: a }, Scalar::Padic { value: b, .. }) => Scalar::Padic {
                p: *p,
                value: a + b,
            },
            _ => unreachable!(),
        })
    }

    pub fn checked_sub(&self, other: &Scalar) -> Result<Scalar, FieldError> {
        self.checked_add(&other.neg())
    }

    pub fn checked_mul(&self, other: &Scalar) -> Result<Scalar, FieldError> {
        self.check_same(other)?;
        Ok(match (self, other) {
            (Scalar::Real(a), Scalar::Real(b)) => Scalar::Real(a * b),
            (Scalar::Padic { p, value: a }, Scalar::Padic { value: b, .. }) => Scalar::Padic {
                p: *p,
                value: a * b,
            },
            _ => unreachable!(),
        })
    }

    pub fn checked_div(&self, other: &Scalar) -> Result<Scalar, FieldError> {
        self.check_same(other)?;
        if other.is_zero() {
            return Err(FieldError::DivisionByZero);
        }
        Ok(match (self, other) {
            (Scalar::Real(a), Scalar::Real(b)) => Scalar::Real(a / b),
            (Scalar::Padic { p, value: a }, Scalar::Padic { value: b, .. }) => Scalar::Padic {
                p: *p,
                value: a / b,
            },
            _ => unreachable!(),
        })
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Real(a) => Scalar::Real(-a),
            Scalar::Padic { p, value } => Scalar::Padic {
                p: *p,
                value: -value,
            },
        }
    }

    /// JSON descriptor: a number over `R`, a `"num/den"` string over `Q_p`.
    pub fn to_descriptor(&self) -> serde_json::Value {
        match self {
            Scalar::Real(x) => serde_json::json!(x),
            Scalar::Padic { value, .. } => {
                if value.is_integer() {
                    serde_json::json!(value.numer().to_string())
                } else {
                    serde_json::json!(format!("{}/{}", value.numer(), value.denom()))
                }
            }
        }
    }

    pub fn from_descriptor(v: &serde_json::Value, field: &Valuation) -> Result<Scalar, FieldError> {
        match field {
            Valuation::Real { .. } => {
                let x = v
                    .as_f64()
                    .ok_or_else(|| FieldError::Descriptor(format!("expected a number, got {v}")))?;
                if !x.is_finite() {
                    return Err(FieldError::NonFinite(x));
                }
                Ok(Scalar::Real(x))
            }
            Valuation::Padic { p } => {
                let q = match v {
                    serde_json::Value::Number(n) => {
                        let i = n.as_i64().ok_or_else(|| {
                            FieldError::Descriptor(format!("p-adic entries must be rational, got {n}"))
                        })?;
                        BigRational::from_integer(BigInt::from(i))
                    }
                    serde_json::Value::String(s) => parse_rational(s)?,
                    other => {
                        return Err(FieldError::Descriptor(format!(
                            "expected a rational string, got {other}"
                        )))
                    }
                };
                Ok(Scalar::Padic { p: *p, value: q })
            }
        }
    }
}

fn parse_rational(s: &str) -> Result<BigRational, FieldError> {
    let bad = || FieldError::Descriptor(format!("cannot parse rational {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(FieldError::DivisionByZero);
    }
    Ok(BigRational::new(n, d))
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Real(x) => write!(f, "{x}"),
            Scalar::Padic { value, .. } => write!(f, "{value}"),
        }
    }
}

/// Free-function form of [`Scalar::abs_value`].
pub fn abs_value(s: &Scalar) -> f64 {
    s.abs_value()
}

/// The annulus constant of a valuation.
pub fn theta(v: &Valuation) -> f64 {
    v.theta()
}

/// Sup-norm of a coordinate vector.
pub fn sup_norm(x: &[Scalar]) -> f64 {
    x.iter().map(Scalar::abs_value).fold(0.0, f64::max)
}

/// Rescales `x != 0` into the annulus `theta <= |y| <= 1` by a scalar `k`.
///
/// Both fields land exactly on `|y| = 1`: over `R` the entries are divided by
/// the norm, over `Q_p` they are multiplied by `p^(v)` where `v` is the least
/// coordinate valuation.
pub fn normalize_annulus(x: &[Scalar]) -> Result<(Scalar, Vec<Scalar>), FieldError> {
    let first = x.first().ok_or(FieldError::EmptyVector)?;
    for s in x {
        first.check_same(s)?;
    }
    match first {
        Scalar::Real(_) => {
            let norm = sup_norm(x);
            if norm == 0.0 {
                return Err(FieldError::ZeroVector);
            }
            if !norm.is_finite() {
                return Err(FieldError::NonFinite(norm));
            }
            let y = x
                .iter()
                .map(|s| Scalar::Real(s.as_real().unwrap() / norm))
                .collect();
            Ok((Scalar::Real(1.0 / norm), y))
        }
        Scalar::Padic { p, .. } => {
            let v = x
                .iter()
                .filter_map(Scalar::padic_valuation)
                .min()
                .ok_or(FieldError::ZeroVector)?;
            let k = rational_power(*p, -v);
            let y = x
                .iter()
                .map(|s| Scalar::Padic {
                    p: *p,
                    value: s.as_rational().unwrap() * &k,
                })
                .collect();
            Ok((Scalar::Padic { p: *p, value: k }, y))
        }
    }
}

/// Lossy conversion used when p-adic quantities are reported as reals.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    let n = q.numer().to_f64().unwrap_or(f64::NAN);
    let d = q.denom().to_f64().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() {
        n / d
    } else {
        let sign = if q.is_negative() { -1.0 } else { 1.0 };
        sign * (q.numer().abs().bits() as f64 - q.denom().bits() as f64).exp2()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_value_examples() {
        assert_eq!(Scalar::real(-3.5).abs_value(), 3.5);
        assert_eq!(Scalar::padic(5, 1, 5).unwrap().abs_value(), 5.0);
        let s = Scalar::padic(5, 50, 1).unwrap();
        assert_eq!(s.padic_valuation(), Some(2));
        assert_eq!(s.abs_value(), 1.0 / 25.0);
    }

    #[test]
    fn theta_examples() {
        assert_eq!(Valuation::padic(5).unwrap().theta(), 0.2);
        assert_eq!(Valuation::padic(2).unwrap().theta(), 0.5);
        assert_eq!(Valuation::real().theta(), 1.0 - 2f64.powi(-20));
    }

    #[test]
    fn rejects_trivial_and_composite() {
        assert_eq!(Valuation::padic(1), Err(FieldError::TrivialValuation(1)));
        assert_eq!(Valuation::padic(6), Err(FieldError::NotPrime(6)));
        assert!(Valuation::real_with_theta(0.0).is_err());
        assert!(Valuation::real_with_theta(1.5).is_err());
    }

    #[test]
    fn mixed_operands_rejected() {
        let a = Scalar::real(1.0);
        let b = Scalar::padic(5, 1, 1).unwrap();
        assert!(matches!(a.checked_mul(&b), Err(FieldError::MixedValuation(..))));
        let c = Scalar::padic(3, 1, 1).unwrap();
        assert!(b.checked_add(&c).is_err());
    }

    #[test]
    fn valuation_json() {
        let v: Valuation = serde_json::from_str(r#"{"kind":"padic","p":5}"#).unwrap();
        assert_eq!(v, Valuation::Padic { p: 5 });
        let r: Valuation = serde_json::from_str(r#"{"kind":"real","theta":0.99999905}"#).unwrap();
        assert_eq!(r.theta(), 0.99999905);
        let d: Valuation = serde_json::from_str(r#"{"kind":"real"}"#).unwrap();
        assert_eq!(d.theta(), DEFAULT_REAL_THETA);
        assert!(serde_json::from_str::<Valuation>(r#"{"kind":"padic","p":1}"#).is_err());
        let back = serde_json::to_string(&Valuation::Padic { p: 7 }).unwrap();
        assert_eq!(back, r#"{"kind":"padic","p":7}"#);
    }

    #[test]
    fn normalize_real() {
        let x = vec![Scalar::real(4.0), Scalar::real(-1.0)];
        let (k, y) = normalize_annulus(&x).unwrap();
        assert_eq!(k.abs_value(), 0.25);
        assert_eq!(sup_norm(&y), 1.0);
        assert_eq!(normalize_annulus(&[Scalar::real(0.0)]), Err(FieldError::ZeroVector));
    }

    #[test]
    fn normalize_padic() {
        let x = vec![Scalar::padic(5, 25, 1).unwrap(), Scalar::padic(5, 1, 25).unwrap()];
        let (k, y) = normalize_annulus(&x).unwrap();
        assert_eq!(sup_norm(&x), 25.0);
        assert_eq!(k.abs_value(), 1.0 / 25.0);
        assert_eq!(sup_norm(&y), 1.0);

        let x = vec![Scalar::padic(5, 5, 1).unwrap()];
        let (k, y) = normalize_annulus(&x).unwrap();
        assert_eq!(k.abs_value(), 5.0);
        assert_eq!(sup_norm(&y), 1.0);
    }

    #[test]
    fn value_group_floor() {
        let v = Valuation::padic(5).unwrap();
        assert_eq!(v.value_group_floor(1.0), 1.0);
        assert_eq!(v.value_group_floor(4.99), 1.0);
        assert_eq!(v.value_group_floor(5.0), 5.0);
        assert_eq!(v.value_group_floor(0.3), 0.2);
        assert_eq!(v.value_group_exponent(25.0), Some(2));
        assert_eq!(v.value_group_exponent(0.04), Some(-2));
        assert_eq!(v.value_group_exponent(3.0), None);
    }

    #[test]
    fn descriptors() {
        let q = Valuation::padic(5).unwrap();
        let s = Scalar::from_descriptor(&serde_json::json!("3/25"), &q).unwrap();
        assert_eq!(s.padic_valuation(), Some(-2));
        assert_eq!(Scalar::from_descriptor(&s.to_descriptor(), &q).unwrap(), s);
        let i = Scalar::from_descriptor(&serde_json::json!(10), &q).unwrap();
        assert_eq!(i.abs_value(), 0.2);
        assert!(Scalar::from_descriptor(&serde_json::json!(0.5), &q).is_err());
    }
}
