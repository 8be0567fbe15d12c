use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::timefn::{TimeFunction, TimeFunctionRepr};
use super::DdeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateNorm {
    #[default]
    Sup,
    Euclidean,
}

impl StateNorm {
    pub fn vector(&self, x: &[f64]) -> f64 {
        match self {
            StateNorm::Sup => x.iter().fold(0.0, |m, v| m.max(v.abs())),
            StateNorm::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Induced norm of a row-major `d x d` matrix.
    pub fn matrix(&self, a: &[f64], d: usize) -> f64 {
        match self {
            StateNorm::Sup => a
                .chunks(d)
                .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            StateNorm::Euclidean => {
                if d == 1 {
                    return a[0].abs();
                }
                DMatrix::from_row_slice(d, d, a)
                    .singular_values()
                    .iter()
                    .fold(0.0, |m, v| m.max(*v))
            }
        }
    }
}

/// Past values of a solution, queried at `s <= t`.
pub trait History {
    fn value_into(&self, s: f64, out: &mut [f64]);
}

/// Right-hand side `F(t, x_t)`.
pub trait DelayFunctional: Send + Sync {
    fn dim(&self) -> usize;
    fn tau(&self) -> f64;
    fn state_norm(&self) -> StateNorm {
        StateNorm::Sup
    }
    /// Points in `(t0, t1)` where the right-hand side may jump.
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64>;
    /// Evaluates `F(t, x_t)`; `anchor` selects the one-sided coefficients.
    fn rhs(&self, t: f64, anchor: f64, x: &dyn History, out: &mut [f64]);
}

/// `A(t) x(t - sigma(t))`.
#[derive(Debug, Clone)]
pub struct DelayTerm {
    pub a: TimeFunction,
    pub sigma: TimeFunction,
}

/// `F(t, x_t) = sum_j A_j(t) x(t - sigma_j(t))` with `sum_j |A_j(t)| <= n(t)`.
#[derive(Debug, Clone)]
pub struct DelaySystem {
    tau: f64,
    d: usize,
    terms: Vec<DelayTerm>,
    majorant: TimeFunction,
    norm: StateNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCheck {
    pub samples: usize,
    /// Largest `sum |A_j(t)| / n(t)` seen (0/0 counted as 0).
    pub worst_ratio: f64,
    pub worst_t: f64,
}

impl DelaySystem {
    pub fn new(tau: f64, d: usize, terms: Vec<DelayTerm>, majorant: TimeFunction) -> Result<Self, DdeError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(DdeError::System(format!("tau must be positive, got {tau}")));
        }
        if d == 0 {
            return Err(DdeError::System("d must be at least 1".into()));
        }
        for (j, t) in terms.iter().enumerate() {
            t.a.validate()?;
            t.sigma.validate()?;
            if t.a.len() != d * d {
                return Err(DdeError::System(format!(
                    "A_{j} has {} entries, expected {}",
                    t.a.len(),
                    d * d
                )));
            }
            if t.sigma.len() != 1 {
                return Err(DdeError::System(format!("sigma_{j} must be scalar")));
            }
        }
        majorant.validate()?;
        if majorant.len() != 1 {
            return Err(DdeError::System("the majorant must be scalar".into()));
        }
        Ok(Self {
            tau,
            d,
            terms,
            majorant,
            norm: StateNorm::Sup,
        })
    }

    /// `x'(t) = a x(t - sigma)` with constant data and `n = |a|`.
    pub fn constant_scalar(tau: f64, a: f64, sigma: f64) -> Result<Self, DdeError> {
        Self::new(
            tau,
            1,
            vec![DelayTerm {
                a: TimeFunction::scalar(a),
                sigma: TimeFunction::scalar(sigma),
            }],
            TimeFunction::scalar(a.abs()),
        )
    }

    /// `x' = 0`.
    pub fn zero(tau: f64, d: usize) -> Result<Self, DdeError> {
        Self::new(tau, d, Vec::new(), TimeFunction::scalar(0.0))
    }

    pub fn with_norm(mut self, norm: StateNorm) -> Self {
        self.norm = norm;
        self
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &[DelayTerm] {
        &self.terms
    }

    pub fn majorant(&self) -> &TimeFunction {
        &self.majorant
    }

    pub fn norm(&self) -> StateNorm {
        self.norm
    }

    /// `sum_j |A_j(t)|`, the best Lipschitz constant at `t`.
    pub fn coefficient_norm(&self, t: f64, anchor: f64) -> f64 {
        let mut a = vec![0.0; self.d * self.d];
        self.terms
            .iter()
            .map(|term| {
                term.a.eval_into(t, anchor, &mut a);
                self.norm.matrix(&a, self.d)
            })
            .sum()
    }

    /// Checks `sum_j |A_j(t)| <= n(t)` and `sigma_j(t) in [0, tau]` on a grid
    /// of `samples` points of `[t0, t1]` together with every breakpoint.
    pub fn validate_on(&self, t0: f64, t1: f64, samples: usize) -> Result<LipschitzCheck, DdeError> {
        let mut pts: Vec<f64> = (0..=samples.max(1))
            .map(|k| t0 + (t1 - t0) * k as f64 / samples.max(1) as f64)
            .collect();
        pts.extend(self.breakpoints(t0, t1));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut probes: Vec<(f64, f64)> = pts.iter().map(|t| (*t, *t)).collect();
        probes.extend(pts.windows(2).map(|w| {
            let m = 0.5 * (w[0] + w[1]);
            (m, m)
        }));
        let mut worst = LipschitzCheck {
            samples: probes.len(),
            worst_ratio: 0.0,
            worst_t: t0,
        };
        let mut s = [0.0];
        for (t, anchor) in probes {
            for (j, term) in self.terms.iter().enumerate() {
                term.sigma.eval_into(t, anchor, &mut s);
                if !(s[0] >= -1e-12 * self.tau && s[0] <= self.tau * (1.0 + 1e-12)) {
                    return Err(DdeError::DelayOutOfRange {
                        index: j,
                        t,
                        sigma: s[0],
                        tau: self.tau,
                    });
                }
            }
            let norm = self.coefficient_norm(t, anchor);
            self.majorant.eval_into(t, anchor, &mut s);
            let n = s[0];
            if n < 0.0 {
                return Err(DdeError::Coefficient(format!("negative majorant {n} at t = {t}")));
            }
            let ratio = if norm == 0.0 { 0.0 } else { norm / n };
            if ratio > worst.worst_ratio {
                worst.worst_ratio = ratio;
                worst.worst_t = t;
            }
            if norm > n * (1.0 + 1e-12) + 1e-300 {
                return Err(DdeError::MajorantViolated { t, norm, majorant: n });
            }
        }
        Ok(worst)
    }

    pub fn from_json(s: &str) -> Result<Self, DdeError> {
        let repr: DelaySystemRepr =
            serde_json::from_str(s).map_err(|e| DdeError::System(format!("bad JSON: {e}")))?;
        Self::try_from(repr)
    }

    /// `None` when some coefficient is a closure.
    pub fn to_repr(&self) -> Option<DelaySystemRepr> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                Some(TermRepr {
                    a: t.a.to_repr()?,
                    sigma: t.sigma.to_repr()?,
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(DelaySystemRepr {
            tau: self.tau,
            d: self.d,
            terms,
            majorant: self.majorant.to_repr()?,
            norm: self.norm,
            linear: true,
        })
    }
}

impl DelayFunctional for DelaySystem {
    fn dim(&self) -> usize {
        self.d
    }

    fn tau(&self) -> f64 {
        self.tau
    }

    fn state_norm(&self) -> StateNorm {
        self.norm
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .terms
            .iter()
            .flat_map(|t| {
                let mut v = t.a.breakpoints(t0, t1);
                v.extend(t.sigma.breakpoints(t0, t1));
                v
            })
            .chain(self.majorant.breakpoints(t0, t1))
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    fn rhs(&self, t: f64, anchor: f64, x: &dyn History, out: &mut [f64]) {
        let d = self.d;
        out.fill(0.0);
        let mut a = vec![0.0; d * d];
        let mut xv = vec![0.0; d];
        let mut s = [0.0];
        for term in &self.terms {
            term.a.eval_into(t, anchor, &mut a);
            term.sigma.eval_into(t, anchor, &mut s);
            x.value_into(t - s[0], &mut xv);
            for (o, row) in out.iter_mut().zip(a.chunks(d)) {
                *o += row.iter().zip(&xv).map(|(p, q)| p * q).sum::<f64>();
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermRepr {
    #[serde(rename = "A")]
    pub a: TimeFunctionRepr,
    pub sigma: TimeFunctionRepr,
}

/// JSON form `{"tau", "d", "terms": [{"A", "sigma"}], "majorant", "norm"?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySystemRepr {
    pub tau: f64,
    pub d: usize,
    pub terms: Vec<TermRepr>,
    pub majorant: TimeFunctionRepr,
    #[serde(default)]
    pub norm: StateNorm,
    #[serde(default = "yes")]
    pub linear: bool,
}

fn yes() -> bool {
    true
}

impl TryFrom<DelaySystemRepr> for DelaySystem {
    type Error = DdeError;
    fn try_from(r: DelaySystemRepr) -> Result<Self, DdeError> {
        if !r.linear {
            return Err(DdeError::System(
                "nonlinear right-hand sides cannot be read from JSON; build a NonlinearSystem in code".into(),
            ));
        }
        let terms = r
            .terms
            .into_iter()
            .map(|t| {
                Ok(DelayTerm {
                    a: TimeFunction::try_from(t.a)?,
                    sigma: TimeFunction::try_from(t.sigma)?,
                })
            })
            .collect::<Result<Vec<_>, DdeError>>()?;
        Ok(DelaySystem::new(r.tau, r.d, terms, TimeFunction::try_from(r.majorant)?)?.with_norm(r.norm))
    }
}

/// `f(t, x(t - delta_0), .., x(t - delta_k))`, writing into the last slice.
pub type RhsFn = Arc<dyn Fn(f64, &[Vec<f64>], &mut [f64]) + Send + Sync>;
/// Row-major `d x d` derivative of `f` in its `j`-th delayed argument.
pub type JacobianFn = Arc<dyn Fn(f64, &[Vec<f64>], usize, &mut [f64]) + Send + Sync>;

/// Nonlinear right-hand side with fixed discrete delays.
#[derive(Clone)]
pub struct NonlinearSystem {
    tau: f64,
    d: usize,
    delays: Vec<f64>,
    f: RhsFn,
    jacobian: Option<JacobianFn>,
    norm: StateNorm,
}

impl fmt::Debug for NonlinearSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearSystem")
            .field("tau", &self.tau)
            .field("d", &self.d)
            .field("delays", &self.delays)
            .field("has_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl NonlinearSystem {
    pub fn new(tau: f64, d: usize, delays: Vec<f64>, f: RhsFn) -> Result<Self, DdeError> {
        if !(tau > 0.0 && tau.is_finite()) || d == 0 {
            return Err(DdeError::System("need tau > 0 and d >= 1".into()));
        }
        if delays.is_empty() || delays.iter().any(|s| !(*s >= 0.0 && *s <= tau)) {
            return Err(DdeError::System(format!("delays must lie in [0, {tau}]")));
        }
        Ok(Self {
            tau,
            d,
            delays,
            f,
            jacobian: None,
            norm: StateNorm::Sup,
        })
    }

    pub fn with_jacobian(mut self, j: JacobianFn) -> Self {
        self.jacobian = Some(j);
        self
    }

    pub fn with_norm(mut self, norm: StateNorm) -> Self {
        self.norm = norm;
        self
    }

    /// `x'(t) = x(t - 1) (1 - x(t))`.
    pub fn logistic() -> Self {
        let f: RhsFn = Arc::new(|_, x, out| out[0] = x[1][0] * (1.0 - x[0][0]));
        let jac: JacobianFn = Arc::new(|_, x, j, out| {
            out[0] = if j == 0 { -x[1][0] } else { 1.0 - x[0][0] };
        });
        Self::new(1.0, 1, vec![0.0, 1.0], f)
            .expect("valid logistic data")
            .with_jacobian(jac)
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn jacobian(&self) -> Option<&JacobianFn> {
        self.jacobian.as_ref()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub(crate) fn args_at(&self, t: f64, x: &dyn History) -> Vec<Vec<f64>> {
        self.delays
            .iter()
            .map(|s| {
                let mut v = vec![0.0; self.d];
                x.value_into(t - s, &mut v);
                v
            })
            .collect()
    }
}

impl DelayFunctional for NonlinearSystem {
    fn dim(&self) -> usize {
        self.d
    }

    fn tau(&self) -> f64 {
        self.tau
    }

    fn state_norm(&self) -> StateNorm {
        self.norm
    }

    fn breakpoints(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }

    fn rhs(&self, t: f64, _anchor: f64, x: &dyn History, out: &mut [f64]) {
        let args = self.args_at(t, x);
        (self.f)(t, &args, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn induced_norms() {
        let a = [1.0, -2.0, 0.5, 0.5];
        assert_eq!(StateNorm::Sup.matrix(&a, 2), 3.0);
        let rot = [0.0, -1.0, 1.0, 0.0];
        assert!((StateNorm::Euclidean.matrix(&rot, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn majorant_checked() {
        let sys = DelaySystem::new(
            1.0,
            1,
            vec![DelayTerm {
                a: TimeFunction::scalar(2.0),
                sigma: TimeFunction::scalar(1.0),
            }],
            TimeFunction::scalar(1.0),
        )
        .unwrap();
        assert!(matches!(sys.validate_on(0.0, 1.0, 10), Err(DdeError::MajorantViolated { .. })));
        let late = DelaySystem::new(
            1.0,
            1,
            vec![DelayTerm {
                a: TimeFunction::scalar(1.0),
                sigma: TimeFunction::scalar(1.5),
            }],
            TimeFunction::scalar(1.0),
        )
        .unwrap();
        assert!(matches!(late.validate_on(0.0, 1.0, 10), Err(DdeError::DelayOutOfRange { .. })));
        let ok = DelaySystem::constant_scalar(1.0, -1.0, 1.0).unwrap();
        assert_eq!(ok.validate_on(0.0, 5.0, 10).unwrap().worst_ratio, 1.0);
    }

    #[test]
    fn json_round_trip() {
        let src = r#"{"tau": 1, "d": 1, "terms": [{"A": {"breaks": [0.5], "values": [-1, 1]}, "sigma": {"constant": 1}}], "majorant": {"constant": 1}}"#;
        let sys = DelaySystem::from_json(src).unwrap();
        assert_eq!(sys.breakpoints(0.0, 2.0), vec![0.5]);
        let back = serde_json::to_string(&sys.to_repr().unwrap()).unwrap();
        let again = DelaySystem::from_json(&back).unwrap();
        assert_eq!(again.terms().len(), 1);
        assert!(DelaySystem::from_json(r#"{"tau": 1, "d": 2, "terms": [{"A": {"constant": 1}, "sigma": {"constant": 1}}], "majorant": {"constant": 1}}"#).is_err());
    }
}
