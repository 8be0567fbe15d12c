//! Ladders, growth constants, the `(m, p)` search and everything derived
//! from a growth certificate.

mod envelope;
mod ladder;
mod nonlinear;
mod search;
mod xi;

pub use envelope::{
    decay_envelope, direction_neighborhood, direction_neighborhood_from, envelope_from,
    envelope_ln_constant, frame_separation, minkowski_bound, minkowski_bound_from, Neighborhood,
};
pub use ladder::{delay_rung, CompactnessLadder, TailGenerator};
pub use nonlinear::{
    error_recursion, nonlinear_eta, perturbation_gate, BudgetInputs, ErrorRecursion, EtaValue,
};
pub use search::{
    search_grid, search_mp, search_report, GridCell, GrowthCertificate, SearchLimits, SearchReport,
};
pub use xi::{rho_infinity, upsilon, xi, ProfilePoint, RhoInfinity, UpsilonTerm, UpsilonValue, XiCandidate, XiValue};

use thiserror::Error;

use crate::field::Valuation;
use crate::linalg::LinalgError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrowthError {
    #[error("invalid ladder: {0}")]
    Ladder(String),
    #[error("ladder has {available} explicit rungs and no tail generator, {needed} needed")]
    InsufficientRungs { needed: usize, available: usize },
    #[error("no admissible decomposition m = p k_s + r for m = {m}, p = {p}")]
    NoDecomposition { m: u64, p: u64 },
    #[error("Xi(m,p)^(1/mp) = {ratio} is not below varpi = {varpi} for m = {m}, p = {p}")]
    RatioNotBelowVarpi { m: u64, p: u64, ratio: f64, varpi: f64 },
    #[error("varpi = {varpi} does not exceed the rho_inf estimate {rho_infinity}")]
    VarpiBelowRhoInfinity { varpi: f64, rho_infinity: f64 },
    #[error("no (m, p) within limits: best Xi^(1/mp) = {best_ratio} at m = {m}, p = {p}, varpi = {varpi}; larger p eventually succeeds")]
    NoPair { best_ratio: f64, m: u64, p: u64, varpi: f64 },
    #[error("kappa varrho^N - chi^N <= 0 at N = {n} (chi = {chi}, varrho = {varrho}, kappa = {kappa})")]
    NonPositiveDenominator { n: u32, chi: f64, varrho: f64, kappa: f64 },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The dyadic ladder of a delay equation with horizon `tau` in `R^d`.
pub fn delay_ladder(tau: f64, d: u64) -> Result<CompactnessLadder, GrowthError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(GrowthError::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if d == 0 {
        return Err(GrowthError::InvalidParameter("d must be at least 1".into()));
    }
    let (k, rho): (Vec<u64>, Vec<f64>) = (0..3).map(|i| delay_rung(tau, d, i)).unzip();
    CompactnessLadder::new(k, rho, Valuation::real())?.with_tail(TailGenerator::DelayDyadic { tau, d })
}

/// Serializes non-finite floats as strings so JSON stays lossless.
pub(crate) mod float_or_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}
