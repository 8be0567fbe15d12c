//! Time-dependent coefficients: scalars (delays, majorants) and `d x d`
//! matrices, stored flat in row-major order.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DdeError;

pub type CoefficientFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub enum TimeFunction {
    /// `values[0]` on `(-inf, breaks[0])`, `values[j]` on `[breaks[j-1], breaks[j])`,
    /// the last value on `[breaks[last], inf)`.
    PiecewiseConstant { breaks: Vec<f64>, values: Vec<Vec<f64>> },
    /// Linear interpolation of `values[j]` at `t0 + j dt`, constant outside.
    Sampled { t0: f64, dt: f64, values: Vec<Vec<f64>> },
    /// Piecewise-smooth closure, smooth between the listed breakpoints.
    Function { f: CoefficientFn, breaks: Vec<f64>, len: usize },
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeFunction::PiecewiseConstant { breaks, values } => f
                .debug_struct("PiecewiseConstant")
                .field("breaks", breaks)
                .field("values", values)
                .finish(),
            TimeFunction::Sampled { t0, dt, values } => f
                .debug_struct("Sampled")
                .field("t0", t0)
                .field("dt", dt)
                .field("len", &values.len())
                .finish(),
            TimeFunction::Function { breaks, len, .. } => f
                .debug_struct("Function")
                .field("breaks", breaks)
                .field("len", len)
                .finish(),
        }
    }
}

impl TimeFunction {
    pub fn constant(value: Vec<f64>) -> Self {
        TimeFunction::PiecewiseConstant {
            breaks: Vec::new(),
            values: vec![value],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::constant(vec![value])
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, DdeError> {
        let tf = TimeFunction::PiecewiseConstant { breaks, values };
        tf.validate()?;
        Ok(tf)
    }

    pub fn function(len: usize, breaks: Vec<f64>, f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        TimeFunction::Function {
            f: Arc::new(f),
            breaks,
            len,
        }
    }

    pub fn validate(&self) -> Result<(), DdeError> {
        match self {
            TimeFunction::PiecewiseConstant { breaks, values } => {
                if values.len() != breaks.len() + 1 {
                    return Err(DdeError::Coefficient(format!(
                        "{} breaks need {} values, got {}",
                        breaks.len(),
                        breaks.len() + 1,
                        values.len()
                    )));
                }
                if breaks.windows(2).any(|w| !(w[0] < w[1])) || breaks.iter().any(|b| !b.is_finite()) {
                    return Err(DdeError::Coefficient("breaks must be finite and strictly increasing".into()));
                }
                uniform_len(values)
            }
            TimeFunction::Sampled { dt, values, t0 } => {
                if !(*dt > 0.0) || !t0.is_finite() || values.is_empty() {
                    return Err(DdeError::Coefficient("sampled function needs dt > 0 and samples".into()));
                }
                uniform_len(values)
            }
            TimeFunction::Function { len, .. } => {
                if *len == 0 {
                    return Err(DdeError::Coefficient("function value length must be positive".into()));
                }
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TimeFunction::PiecewiseConstant { values, .. } | TimeFunction::Sampled { values, .. } => values[0].len(),
            TimeFunction::Function { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self, TimeFunction::PiecewiseConstant { .. })
    }

    /// Value at `t`. `anchor` is a point of the open interval between
    /// breakpoints that `t` belongs to; it decides which one-sided value is
    /// taken at a discontinuity.
    pub fn eval_into(&self, t: f64, anchor: f64, out: &mut [f64]) {
        match self {
            TimeFunction::PiecewiseConstant { breaks, values } => {
                let j = breaks.partition_point(|b| *b <= anchor);
                out.copy_from_slice(&values[j]);
            }
            TimeFunction::Sampled { t0, dt, values } => {
                let u = ((t - t0) / dt).clamp(0.0, (values.len() - 1) as f64);
                let j = (u.floor() as usize).min(values.len().saturating_sub(2));
                if values.len() == 1 {
                    out.copy_from_slice(&values[0]);
                    return;
                }
                let w = u - j as f64;
                for (o, (a, b)) in out.iter_mut().zip(values[j].iter().zip(&values[j + 1])) {
                    *o = a + w * (b - a);
                }
            }
            TimeFunction::Function { f, .. } => {
                let s = if t == anchor { t } else { t + (anchor - t) * 1e-10 };
                out.copy_from_slice(&f(s));
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(t, t, &mut out);
        out
    }

    /// Breakpoints in the open interval `(t0, t1)`.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        match self {
            TimeFunction::PiecewiseConstant { breaks, .. } | TimeFunction::Function { breaks, .. } => {
                breaks.iter().copied().filter(|b| *b > t0 && *b < t1).collect()
            }
            TimeFunction::Sampled { t0: s0, dt, values } => (0..values.len())
                .map(|j| s0 + j as f64 * dt)
                .filter(|b| *b > t0 && *b < t1)
                .collect(),
        }
    }

    /// `int_a^b` of a scalar piecewise-constant function.
    pub fn integrate_scalar(&self, a: f64, b: f64) -> Option<f64> {
        let TimeFunction::PiecewiseConstant { breaks, values } = self else {
            return None;
        };
        if b < a {
            return self.integrate_scalar(b, a).map(|v| -v);
        }
        let mut total = 0.0;
        let mut lo = a;
        let mut j = breaks.partition_point(|x| *x <= a);
        while lo < b {
            let hi = if j < breaks.len() { breaks[j].min(b) } else { b };
            total += values[j][0] * (hi - lo);
            lo = hi;
            j += 1;
        }
        Some(total)
    }
}

fn uniform_len(values: &[Vec<f64>]) -> Result<(), DdeError> {
    let n = values[0].len();
    if n == 0 || values.iter().any(|v| v.len() != n) {
        return Err(DdeError::Coefficient("values must be nonempty and of equal size".into()));
    }
    if values.iter().flatten().any(|x| !x.is_finite()) {
        return Err(DdeError::Coefficient("values must be finite".into()));
    }
    Ok(())
}

/// A scalar or a square matrix in JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Payload {
    fn flatten(self) -> Vec<f64> {
        match self {
            Payload::Scalar(x) => vec![x],
            Payload::Matrix(rows) => rows.into_iter().flatten().collect(),
        }
    }

    fn from_flat(v: &[f64]) -> Payload {
        if v.len() == 1 {
            return Payload::Scalar(v[0]);
        }
        let d = (v.len() as f64).sqrt().round() as usize;
        Payload::Matrix(v.chunks(d.max(1)).map(<[f64]>::to_vec).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledRepr {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<Payload>,
}

/// JSON form: `{"constant": v}`, `{"breaks": [..], "values": [..]}` or
/// `{"sampled": {"t0": .., "dt": .., "values": [..]}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeFunctionRepr {
    Constant { constant: Payload },
    Piecewise { breaks: Vec<f64>, values: Vec<Payload> },
    Sampled { sampled: SampledRepr },
}

impl TryFrom<TimeFunctionRepr> for TimeFunction {
    type Error = DdeError;
    fn try_from(r: TimeFunctionRepr) -> Result<Self, DdeError> {
        let tf = match r {
            TimeFunctionRepr::Constant { constant } => TimeFunction::constant(constant.flatten()),
            TimeFunctionRepr::Piecewise { breaks, values } => TimeFunction::PiecewiseConstant {
                breaks,
                values: values.into_iter().map(Payload::flatten).collect(),
            },
            TimeFunctionRepr::Sampled { sampled } => TimeFunction::Sampled {
                t0: sampled.t0,
                dt: sampled.dt,
                values: sampled.values.into_iter().map(Payload::flatten).collect(),
            },
        };
        tf.validate()?;
        Ok(tf)
    }
}

impl TimeFunction {
    /// JSON form; closures have none.
    pub fn to_repr(&self) -> Option<TimeFunctionRepr> {
        match self {
            TimeFunction::PiecewiseConstant { breaks, values } if breaks.is_empty() => {
                Some(TimeFunctionRepr::Constant {
                    constant: Payload::from_flat(&values[0]),
                })
            }
            TimeFunction::PiecewiseConstant { breaks, values } => Some(TimeFunctionRepr::Piecewise {
                breaks: breaks.clone(),
                values: values.iter().map(|v| Payload::from_flat(v)).collect(),
            }),
            TimeFunction::Sampled { t0, dt, values } => Some(TimeFunctionRepr::Sampled {
                sampled: SampledRepr {
                    t0: *t0,
                    dt: *dt,
                    values: values.iter().map(|v| Payload::from_flat(v)).collect(),
                },
            }),
            TimeFunction::Function { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_sides() {
        let f = TimeFunction::piecewise(vec![1.0], vec![vec![0.0], vec![2.0]]).unwrap();
        let mut out = [0.0];
        f.eval_into(1.0, 0.9, &mut out);
        assert_eq!(out[0], 0.0);
        f.eval_into(1.0, 1.1, &mut out);
        assert_eq!(out[0], 2.0);
        assert_eq!(f.integrate_scalar(0.0, 3.0), Some(4.0));
        assert_eq!(f.integrate_scalar(1.5, 0.5), Some(-1.0));
    }

    #[test]
    fn sampled_interpolates() {
        let f = TimeFunction::Sampled {
            t0: 0.0,
            dt: 0.5,
            values: vec![vec![0.0], vec![1.0], vec![3.0]],
        };
        assert_eq!(f.eval(0.25)[0], 0.5);
        assert_eq!(f.eval(0.75)[0], 2.0);
        assert_eq!(f.eval(9.0)[0], 3.0);
        assert_eq!(f.breakpoints(0.0, 1.0), vec![0.5]);
    }

    #[test]
    fn json_forms() {
        let c: TimeFunctionRepr = serde_json::from_str(r#"{"constant": [[1, 2], [3, 4]]}"#).unwrap();
        let tf = TimeFunction::try_from(c).unwrap();
        assert_eq!(tf.eval(0.0), vec![1.0, 2.0, 3.0, 4.0]);
        let p: TimeFunctionRepr = serde_json::from_str(r#"{"breaks": [1], "values": [0, 1]}"#).unwrap();
        let tf = TimeFunction::try_from(p).unwrap();
        assert_eq!(tf.eval(2.0), vec![1.0]);
        let bad: TimeFunctionRepr = serde_json::from_str(r#"{"breaks": [1], "values": [0]}"#).unwrap();
        assert!(TimeFunction::try_from(bad).is_err());
    }
}
