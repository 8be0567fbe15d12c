//! Linear (and linearized) delay equations `x'(t) = F(t, x_t)` in `R^d`:
//! integration, time rescaling, the dyadic ladder of the solution operator
//! and empirical checks of its restricted norms.

mod integrate;
mod rescale;
mod restricted;
mod system;
mod timefn;
mod variational;

pub use integrate::{integrate, InitialSegment, Trajectory};
pub use rescale::{integral_bound, rescale_time, Rescaled, TimeMap};
pub use restricted::{
    constraint_points, ladder_from_delay, lemma_bound, myshkis_check, restricted_norm_estimate, stability_cap,
    worst_case_family, ConstraintIndexing, MyshkisReport, MyshkisVerdict, RestrictedNormOptions,
    RestrictedNormReport, StabilityCap,
};
pub use system::{
    DelayFunctional, DelaySystem, DelaySystemRepr, DelayTerm, History, JacobianFn, LipschitzCheck,
    NonlinearSystem, RhsFn, StateNorm, TermRepr,
};
pub use timefn::{Payload, TimeFunction, TimeFunctionRepr};
pub use variational::{variational_solve, VariationalFit};

use thiserror::Error;

use crate::growth::GrowthError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdeError {
    #[error("invalid coefficient: {0}")]
    Coefficient(String),
    #[error("invalid system: {0}")]
    System(String),
    #[error("step {h} does not divide the delay {tau}")]
    StepDoesNotDivide { h: f64, tau: f64 },
    #[error("delayed lookup at t = {at} before the history start {start}")]
    LookupBeforeHistory { at: f64, start: f64 },
    #[error("lookup at t = {at} outside the trajectory [{start}, {end}]")]
    OutsideTrajectory { at: f64, start: f64, end: f64 },
    #[error("Lipschitz majorant violated at t = {t}: sum |A_j| = {norm} > n(t) = {majorant}")]
    MajorantViolated { t: f64, norm: f64, majorant: f64 },
    #[error("delay sigma_{index}({t}) = {sigma} outside [0, {tau}]")]
    DelayOutOfRange { index: usize, t: f64, sigma: f64, tau: f64 },
    #[error("the majorant vanishes on [0, {horizon}]: no rescaling possible")]
    DegenerateMajorant { horizon: f64 },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("no rung with rho_i M < 1 up to depth {searched}; depth {needed} is needed")]
    NoStabilityCap { searched: usize, needed: String },
    #[error("trajectory covers [{start}, {end}], need [{need_start}, {need_end}]")]
    InsufficientCoverage { start: f64, end: f64, need_start: f64, need_end: f64 },
    #[error("the system supplies no derivative")]
    MissingDerivative,
    #[error(transparent)]
    Growth(#[from] GrowthError),
}

/// `h` divides `tau` up to rounding: `tau / h` is within `1e-9` of an integer.
pub(crate) fn steps_per_delay(h: f64, tau: f64) -> Result<usize, DdeError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(DdeError::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let q = tau / h;
    let n = q.round();
    if n < 1.0 || (q - n).abs() > 1e-9 * q.max(1.0) {
        return Err(DdeError::StepDoesNotDivide { h, tau });
    }
    Ok(n as usize)
}
