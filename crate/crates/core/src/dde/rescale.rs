//! Time change `s = f(t) = int_0^t n` that brings the Lipschitz majorant
//! down to 1.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::integrate::{InitialSegment, Trajectory};
use super::system::{DelaySystem, DelayTerm};
use super::timefn::TimeFunction;
use super::DdeError;

/// `f(t) = int_0^t n` for a piecewise-constant `n >= 0`, and its
/// generalized inverse `g(s) = inf { t >= 0 : f(t) = s }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeMap {
    breaks: Vec<f64>,
    values: Vec<f64>,
    /// Knots of `f` on `[0, inf)`: `0` and the positive breaks.
    knots: Vec<f64>,
    /// `f` at the knots.
    f_knots: Vec<f64>,
    /// Slope of `f` right of each knot.
    slopes: Vec<f64>,
}

impl TimeMap {
    pub fn new(n: &TimeFunction) -> Result<Self, DdeError> {
        let TimeFunction::PiecewiseConstant { breaks, values } = n else {
            return Err(DdeError::Coefficient("the majorant must be piecewise constant".into()));
        };
        let values: Vec<f64> = values.iter().map(|v| v[0]).collect();
        if values.iter().any(|v| *v < 0.0) {
            return Err(DdeError::Coefficient("the majorant must be nonnegative".into()));
        }
        let mut knots = vec![0.0];
        knots.extend(breaks.iter().copied().filter(|b| *b > 0.0));
        let piece = |t: f64| values[breaks.partition_point(|b| *b <= t)];
        let slopes: Vec<f64> = knots.iter().map(|k| piece(*k)).collect();
        let mut f_knots = vec![0.0];
        for j in 1..knots.len() {
            f_knots.push(f_knots[j - 1] + slopes[j - 1] * (knots[j] - knots[j - 1]));
        }
        Ok(Self {
            breaks: breaks.clone(),
            values,
            knots,
            f_knots,
            slopes,
        })
    }

    pub fn n(&self, t: f64) -> f64 {
        self.values[self.breaks.partition_point(|b| *b <= t)]
    }

    pub fn f(&self, t: f64) -> f64 {
        if t < 0.0 {
            // int_t^0 n, walking left through the breaks
            let mut total = 0.0;
            let mut hi = 0.0;
            let mut j = self.breaks.partition_point(|b| *b < 0.0);
            while hi > t {
                let lo = if j > 0 { self.breaks[j - 1].max(t) } else { t };
                total += self.values[j] * (hi - lo);
                hi = lo;
                j = j.saturating_sub(1);
            }
            return -total;
        }
        let j = self.knots.partition_point(|k| *k <= t) - 1;
        self.f_knots[j] + self.slopes[j] * (t - self.knots[j])
    }

    /// `g(s)`, or `+inf` when `f` never reaches `s`.
    pub fn g(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let last = self.knots.len() - 1;
        for j in 0..last {
            if self.f_knots[j + 1] >= s {
                return self.knots[j] + (s - self.f_knots[j]) / self.slopes[j];
            }
        }
        if self.slopes[last] > 0.0 {
            self.knots[last] + (s - self.f_knots[last]) / self.slopes[last]
        } else {
            f64::INFINITY
        }
    }

    /// `f` is bounded when `n` vanishes from some point on.
    pub fn is_bounded(&self) -> bool {
        *self.slopes.last().expect("nonempty") == 0.0
    }
}

/// `sup_t int_t^{t+tau} n` for a piecewise-constant `n`.
pub fn integral_bound(n: &TimeFunction, tau: f64) -> Result<f64, DdeError> {
    let TimeFunction::PiecewiseConstant { breaks, values } = n else {
        return Err(DdeError::Coefficient("the majorant must be piecewise constant".into()));
    };
    if breaks.is_empty() {
        return Ok(values[0][0] * tau);
    }
    // t -> int_t^{t+tau} n is piecewise linear with knots at b and b - tau
    let r = breaks
        .iter()
        .flat_map(|b| [*b, b - tau])
        .map(|t| n.integrate_scalar(t, t + tau).expect("piecewise"))
        .chain([values[0][0] * tau, values[values.len() - 1][0] * tau])
        .fold(0.0, f64::max);
    Ok(r)
}

/// The rescaled system `x~(s) = x(g(s))` with delay horizon `r`, valid for
/// `s >= r`.
#[derive(Debug, Clone)]
pub struct Rescaled {
    pub system: DelaySystem,
    pub map: Arc<TimeMap>,
    pub r: f64,
}

impl Rescaled {
    /// Start of the transformed evolution.
    pub fn start(&self) -> f64 {
        self.r
    }

    /// `x(g(s))`.
    pub fn compose(&self, original: &Trajectory, s: f64) -> Result<Vec<f64>, DdeError> {
        original.eval(self.map.g(s))
    }

    /// History `x~ = x o g` on `[0, r]` taken from a solution of the
    /// original system.
    pub fn history_from(&self, original: Arc<Trajectory>) -> Result<InitialSegment, DdeError> {
        let need = self.map.g(self.r);
        if original.t0() > 0.0 || original.t_end() < need {
            return Err(DdeError::InsufficientCoverage {
                start: original.t0(),
                end: original.t_end(),
                need_start: 0.0,
                need_end: need,
            });
        }
        let map = self.map.clone();
        let d = original.dim();
        Ok(InitialSegment::function(move |s| {
            original.eval(map.g(s)).unwrap_or_else(|_| vec![f64::NAN; d])
        }))
    }

    /// Largest `sum_j |A~_j(s)|` on `[s0, s1]`.
    pub fn majorant_sup(&self, s0: f64, s1: f64, samples: usize) -> Result<f64, DdeError> {
        Ok(self.system.validate_on(s0, s1, samples)?.worst_ratio)
    }
}

/// Rescales a linear system with piecewise-constant majorant `n`:
/// `A~_j(s) = A_j(g(s)) / n(g(s))` (0/0 = 0), `sigma~_j(s) = s - f(g(s) - sigma_j(g(s)))`.
pub fn rescale_time(system: &DelaySystem, horizon: f64) -> Result<Rescaled, DdeError> {
    if !(horizon > 0.0) {
        return Err(DdeError::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    for t in system.terms() {
        if !t.sigma.is_piecewise_constant() {
            return Err(DdeError::Coefficient("delays must be piecewise constant to rescale".into()));
        }
    }
    let map = Arc::new(TimeMap::new(system.majorant())?);
    if map.f(horizon) <= 0.0 {
        return Err(DdeError::DegenerateMajorant { horizon });
    }
    if map.is_bounded() {
        return Err(DdeError::InvalidParameter(
            "the majorant vanishes eventually, so f(t) stays bounded".into(),
        ));
    }
    let r = integral_bound(system.majorant(), system.tau())?;
    let d = system.d();

    let mut src_breaks: Vec<f64> = system
        .terms()
        .iter()
        .flat_map(|t| {
            let mut v = t.a.breakpoints(f64::NEG_INFINITY, f64::INFINITY);
            v.extend(t.sigma.breakpoints(f64::NEG_INFINITY, f64::INFINITY));
            v
        })
        .chain(system.majorant().breakpoints(f64::NEG_INFINITY, f64::INFINITY))
        .collect();
    let shifts: Vec<f64> = system
        .terms()
        .iter()
        .flat_map(|t| match &t.sigma {
            TimeFunction::PiecewiseConstant { values, .. } => values.iter().map(|v| v[0]).collect(),
            _ => Vec::new(),
        })
        .collect();
    let extra: Vec<f64> = src_breaks
        .iter()
        .flat_map(|b| shifts.iter().map(move |s| b + s))
        .collect();
    src_breaks.extend(extra);
    let mut breaks: Vec<f64> = src_breaks
        .into_iter()
        .filter(|b| *b >= 0.0)
        .map(|b| map.f(b))
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let terms = system
        .terms()
        .iter()
        .map(|term| {
            let (a, sigma) = (term.a.clone(), term.sigma.clone());
            let (m1, m2) = (map.clone(), map.clone());
            let a_new = TimeFunction::function(d * d, breaks.clone(), move |s| {
                let t = m1.g(s);
                let n = m1.n(t);
                let mut v = a.eval(t);
                if n == 0.0 {
                    v.fill(0.0);
                } else {
                    v.iter_mut().for_each(|x| *x /= n);
                }
                v
            });
            let sigma_new = TimeFunction::function(1, breaks.clone(), move |s| {
                let t = m2.g(s);
                vec![(s - m2.f(t - sigma.eval(t)[0])).max(0.0)]
            });
            DelayTerm {
                a: a_new,
                sigma: sigma_new,
            }
        })
        .collect();
    let system = DelaySystem::new(r, d, terms, TimeFunction::scalar(1.0))?.with_norm(system.norm());
    Ok(Rescaled { system, map, r })
}
