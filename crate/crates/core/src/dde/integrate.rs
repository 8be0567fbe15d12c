//! Method of steps with the classical four-stage Runge-Kutta scheme and
//! cubic Hermite dense output for delayed lookups.

use std::cell::Cell;
use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use super::system::{DelayFunctional, History, StateNorm};
use super::{steps_per_delay, DdeError};

pub type SegmentFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Initial function on `[t0 - tau, t0]`, in absolute time.
#[derive(Clone)]
pub enum InitialSegment {
    Constant(Vec<f64>),
    /// Piecewise-linear through `values[j]` at `start + j dt`.
    Samples { start: f64, dt: f64, values: Vec<Vec<f64>> },
    Function(SegmentFn),
}

impl fmt::Debug for InitialSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSegment::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            InitialSegment::Samples { start, dt, values } => f
                .debug_struct("Samples")
                .field("start", start)
                .field("dt", dt)
                .field("len", &values.len())
                .finish(),
            InitialSegment::Function(_) => f.write_str("Function"),
        }
    }
}

impl InitialSegment {
    pub fn function(f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        InitialSegment::Function(Arc::new(f))
    }

    pub fn value_into(&self, s: f64, out: &mut [f64]) {
        match self {
            InitialSegment::Constant(c) => out.copy_from_slice(c),
            InitialSegment::Samples { start, dt, values } => {
                if values.len() == 1 {
                    out.copy_from_slice(&values[0]);
                    return;
                }
                let u = ((s - start) / dt).clamp(0.0, (values.len() - 1) as f64);
                let j = (u.floor() as usize).min(values.len() - 2);
                let w = u - j as f64;
                for (o, (a, b)) in out.iter_mut().zip(values[j].iter().zip(&values[j + 1])) {
                    *o = a + w * (b - a);
                }
            }
            InitialSegment::Function(f) => out.copy_from_slice(&f(s)),
        }
    }

    pub fn value(&self, s: f64, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        self.value_into(s, &mut v);
        v
    }

    /// `sup_{[a, b]} |phi|`, exact for constants and samples, on a grid of
    /// 2001 points for closures.
    pub fn sup_norm(&self, a: f64, b: f64, d: usize, norm: StateNorm) -> f64 {
        match self {
            InitialSegment::Constant(c) => norm.vector(c),
            InitialSegment::Samples { start, dt, values } => {
                let mut m = norm.vector(&self.value(a, d)).max(norm.vector(&self.value(b, d)));
                for (j, v) in values.iter().enumerate() {
                    let t = start + j as f64 * dt;
                    if t >= a && t <= b {
                        m = m.max(norm.vector(v));
                    }
                }
                m
            }
            InitialSegment::Function(_) => (0..=2000)
                .map(|k| norm.vector(&self.value(a + (b - a) * k as f64 / 2000.0, d)))
                .fold(0.0, f64::max),
        }
    }

    fn check(&self, d: usize, from: f64, to: f64) -> Result<(), DdeError> {
        match self {
            InitialSegment::Constant(c) if c.len() != d => Err(DdeError::InvalidParameter(format!(
                "initial constant has {} components, expected {d}",
                c.len()
            ))),
            InitialSegment::Samples { start, dt, values } => {
                if values.is_empty() || values.iter().any(|v| v.len() != d) || !(*dt > 0.0) {
                    return Err(DdeError::InvalidParameter(format!(
                        "initial samples must be nonempty vectors of length {d} with dt > 0"
                    )));
                }
                let end = start + (values.len() - 1) as f64 * dt;
                let slack = 1e-9 * (to - from).abs().max(1.0);
                if *start > from + slack || end < to - slack {
                    return Err(DdeError::InsufficientCoverage {
                        start: *start,
                        end,
                        need_start: from,
                        need_end: to,
                    });
                }
                Ok(())
            }
            InitialSegment::Function(f) if f(to).len() != d => Err(DdeError::InvalidParameter(format!(
                "initial function returns {} components, expected {d}",
                f(to).len()
            ))),
            _ => Ok(()),
        }
    }
}

/// A computed solution: nodes, values, one-sided derivatives at each node
/// and the initial function for times before `t0`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    d: usize,
    tau: f64,
    h: f64,
    norm: StateNorm,
    initial: InitialSegment,
    times: Vec<f64>,
    values: Vec<f64>,
    /// Derivative at node `j` used on `[t_j, t_{j+1}]`.
    d_right: Vec<f64>,
    /// Derivative at node `j` used on `[t_{j-1}, t_j]`.
    d_left: Vec<f64>,
}

impl Trajectory {
    fn start(d: usize, tau: f64, h: f64, norm: StateNorm, initial: InitialSegment, t0: f64) -> Self {
        let x0 = initial.value(t0, d);
        Self {
            d,
            tau,
            h,
            norm,
            initial,
            times: vec![t0],
            values: x0,
            d_right: Vec::new(),
            d_left: vec![0.0; d],
        }
    }

    /// Samples a known function on `[t0, t1]` with step `h`; derivatives by
    /// central differences. The same function serves as history before `t0`.
    pub fn from_fn(
        d: usize,
        tau: f64,
        t0: f64,
        t1: f64,
        h: f64,
        f: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self, DdeError> {
        if !(h > 0.0) || !(t1 >= t0) {
            return Err(DdeError::InvalidParameter("need h > 0 and t1 >= t0".into()));
        }
        let f: SegmentFn = Arc::new(f);
        let n = ((t1 - t0) / h - 1e-9).ceil().max(0.0) as usize;
        let mut tr = Self::start(d, tau, h, StateNorm::Sup, InitialSegment::Function(f.clone()), t0);
        tr.times.clear();
        tr.values.clear();
        tr.d_left.clear();
        let delta = 1e-6 * h.min(1.0);
        for k in 0..=n {
            let t = if k == n { t1 } else { t0 + k as f64 * h };
            let v = f(t);
            if v.len() != d {
                return Err(DdeError::InvalidParameter("function dimension mismatch".into()));
            }
            let (p, m) = (f(t + delta), f(t - delta));
            let der: Vec<f64> = p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * delta)).collect();
            tr.times.push(t);
            tr.values.extend(v);
            tr.d_left.extend(&der);
            tr.d_right.extend(der);
        }
        Ok(tr)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn state_norm(&self) -> StateNorm {
        self.norm
    }

    pub fn with_norm(mut self, norm: StateNorm) -> Self {
        self.norm = norm;
        self
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn initial(&self) -> &InitialSegment {
        &self.initial
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `x(s)` for `s` in `[t0 - tau, t_end]`; `false` outside.
    pub fn eval_into(&self, s: f64, out: &mut [f64]) -> bool {
        let t0 = self.t0();
        let slack = 1e-9 * self.tau.max(self.h);
        if s < t0 {
            if s < t0 - self.tau - slack {
                return false;
            }
            self.initial.value_into(s, out);
            return true;
        }
        let n = self.times.len();
        if n == 1 {
            out.copy_from_slice(self.node(0));
            return s <= t0 + slack;
        }
        let end = self.t_end();
        if s > end + slack {
            return false;
        }
        let j = self.times.partition_point(|t| *t <= s).clamp(1, n - 1) - 1;
        self.hermite(j, s.min(end), out);
        true
    }

    pub fn eval(&self, s: f64) -> Result<Vec<f64>, DdeError> {
        let mut v = vec![0.0; self.d];
        if self.eval_into(s, &mut v) {
            Ok(v)
        } else {
            Err(DdeError::OutsideTrajectory {
                at: s,
                start: self.t0() - self.tau,
                end: self.t_end(),
            })
        }
    }

    fn hermite(&self, j: usize, s: f64, out: &mut [f64]) {
        let d = self.d;
        let (a, b) = (self.times[j], self.times[j + 1]);
        let hs = b - a;
        let u = (s - a) / hs;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let ya = &self.values[j * d..(j + 1) * d];
        let yb = &self.values[(j + 1) * d..(j + 2) * d];
        let ma = &self.d_right[j * d..(j + 1) * d];
        let mb = &self.d_left[(j + 1) * d..(j + 2) * d];
        for k in 0..d {
            out[k] = h00 * ya[k] + h10 * hs * ma[k] + h01 * yb[k] + h11 * hs * mb[k];
        }
    }

    /// Largest node norm over `[a, b]`, including the history before `t0`
    /// and the interpolant at interval midpoints.
    pub fn sup_norm_on(&self, a: f64, b: f64) -> f64 {
        let t0 = self.t0();
        let mut m: f64 = 0.0;
        if a < t0 {
            m = self.initial.sup_norm(a, b.min(t0), self.d, self.norm);
        }
        let mut buf = vec![0.0; self.d];
        for j in 0..self.times.len() {
            let t = self.times[j];
            if t >= a && t <= b {
                m = m.max(self.norm.vector(self.node(j)));
            }
            if j + 1 < self.times.len() {
                let mid = 0.5 * (t + self.times[j + 1]);
                if mid >= a && mid <= b {
                    self.hermite(j, mid, &mut buf);
                    m = m.max(self.norm.vector(&buf));
                }
            }
        }
        m
    }

    /// Values at `n + 1` equispaced points of `[a, b]`.
    pub fn sample(&self, a: f64, b: f64, n: usize) -> Result<Vec<(f64, Vec<f64>)>, DdeError> {
        (0..=n)
            .map(|k| {
                let t = if n == 0 { a } else { a + (b - a) * k as f64 / n as f64 };
                Ok((t, self.eval(t)?))
            })
            .collect()
    }

    /// CSV with header `t,x1,..,xd`, one row per node.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for k in 1..=self.d {
            let _ = write!(s, ",x{k}");
        }
        s.push('\n');
        for (j, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t}");
            for v in self.node(j) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// History seen by a stage evaluation on `[a, t]`: the finished trajectory
/// up to `a`, then linear interpolation towards the stage state at `t`.
struct Stage<'a> {
    traj: &'a Trajectory,
    a: f64,
    xa: &'a [f64],
    t: f64,
    xt: &'a [f64],
    bad: Cell<Option<f64>>,
}

impl History for Stage<'_> {
    fn value_into(&self, s: f64, out: &mut [f64]) {
        if s <= self.a {
            if !self.traj.eval_into(s, out) {
                self.bad.set(Some(s));
                out.fill(0.0);
            }
        } else if s >= self.t {
            out.copy_from_slice(self.xt);
        } else {
            let w = (s - self.a) / (self.t - self.a);
            for (o, (p, q)) in out.iter_mut().zip(self.xa.iter().zip(self.xt)) {
                *o = p + w * (q - p);
            }
        }
    }
}

fn eval_stage<F: DelayFunctional + ?Sized>(
    sys: &F,
    traj: &Trajectory,
    a: f64,
    xa: &[f64],
    t: f64,
    xt: &[f64],
    anchor: f64,
    out: &mut [f64],
) -> Result<(), DdeError> {
    let st = Stage {
        traj,
        a,
        xa,
        t,
        xt,
        bad: Cell::new(None),
    };
    sys.rhs(t, anchor, &st, out);
    match st.bad.get() {
        Some(at) => Err(DdeError::LookupBeforeHistory {
            at,
            start: traj.t0() - traj.tau,
        }),
        None => Ok(()),
    }
}

/// Solves `x' = F(t, x_t)` on `[t0, t_end]` from `x_{t0} = phi`.
///
/// The grid is `t0 + k h`; breakpoints of the right-hand side inside a step
/// split it into sub-steps, and coefficients on each sub-step are taken
/// from its interior.
pub fn integrate<F: DelayFunctional + ?Sized>(
    sys: &F,
    phi: &InitialSegment,
    t0: f64,
    t_end: f64,
    h: f64,
) -> Result<Trajectory, DdeError> {
    let tau = sys.tau();
    steps_per_delay(h, tau)?;
    if !(t_end >= t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(DdeError::InvalidParameter(format!("need t0 <= T, got [{t0}, {t_end}]")));
    }
    let d = sys.dim();
    phi.check(d, t0 - tau, t0)?;
    let mut traj = Trajectory::start(d, tau, h, sys.state_norm(), phi.clone(), t0);
    let n_steps = ((t_end - t0) / h - 1e-9).ceil().max(0.0) as usize;
    let breaks = sys.breakpoints(t0, t_end);
    let merge = 1e-9 * h;

    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut xb = vec![0.0; d];
    let mut dl = vec![0.0; d];
    let mut cuts = Vec::new();
    let mut first = true;

    for n in 0..n_steps {
        let lo = t0 + n as f64 * h;
        let hi = if n + 1 == n_steps { t_end } else { t0 + (n + 1) as f64 * h };
        cuts.clear();
        cuts.push(lo);
        let from = breaks.partition_point(|b| *b <= lo + merge);
        cuts.extend(breaks[from..].iter().copied().take_while(|b| *b < hi - merge));
        cuts.push(hi);

        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let hs = b - a;
            let anchor = 0.5 * (a + b);
            let xa = traj.node(traj.len() - 1).to_vec();

            eval_stage(sys, &traj, a, &xa, a, &xa, anchor, &mut k1)?;
            let mid = a + 0.5 * hs;
            for i in 0..d {
                y[i] = xa[i] + 0.5 * hs * k1[i];
            }
            eval_stage(sys, &traj, a, &xa, mid, &y, anchor, &mut k2)?;
            for i in 0..d {
                y[i] = xa[i] + 0.5 * hs * k2[i];
            }
            eval_stage(sys, &traj, a, &xa, mid, &y, anchor, &mut k3)?;
            for i in 0..d {
                y[i] = xa[i] + hs * k3[i];
            }
            eval_stage(sys, &traj, a, &xa, b, &y, anchor, &mut k4)?;
            for i in 0..d {
                xb[i] = xa[i] + hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            eval_stage(sys, &traj, a, &xa, b, &xb, anchor, &mut dl)?;

            if first {
                traj.d_left.copy_from_slice(&k1);
                first = false;
            }
            traj.d_right.extend_from_slice(&k1);
            traj.times.push(b);
            traj.values.extend_from_slice(&xb);
            traj.d_left.extend_from_slice(&dl);
        }
    }
    // the last node has no interval to its right
    let last = traj.d_left[traj.d_left.len() - d..].to_vec();
    traj.d_right.extend(last);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::{DelaySystem, DelayTerm, TimeFunction};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_rhs_keeps_constant() {
        let sys = DelaySystem::zero(1.0, 2).unwrap();
        let tr = integrate(&sys, &InitialSegment::Constant(vec![3.0, -1.0]), 0.0, 5.0, 0.1).unwrap();
        for j in 0..tr.len() {
            assert_eq!(tr.node(j), &[3.0, -1.0]);
        }
    }

    #[test]
    fn linear_decay_first_interval() {
        let sys = DelaySystem::constant_scalar(1.0, -1.0, 1.0).unwrap();
        let tr = integrate(&sys, &InitialSegment::Constant(vec![1.0]), 0.0, 1.0, 1e-2).unwrap();
        assert!(tr.eval(1.0).unwrap()[0].abs() < 1e-12);
        assert!((tr.eval(0.37).unwrap()[0] - 0.63).abs() < 1e-12);
    }

    #[test]
    fn cosine_solution() {
        let sys = DelaySystem::constant_scalar(1.0, -FRAC_PI_2, 1.0).unwrap();
        let phi = InitialSegment::function(|t| vec![(FRAC_PI_2 * t).cos()]);
        let tr = integrate(&sys, &phi, 0.0, 4.0, 1e-2).unwrap();
        let err = (0..=400)
            .map(|k| {
                let t = k as f64 * 0.01 + 0.003;
                (tr.eval(t.min(4.0)).unwrap()[0] - (FRAC_PI_2 * t.min(4.0)).cos()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn rejects_bad_step() {
        let sys = DelaySystem::constant_scalar(1.0, -1.0, 1.0).unwrap();
        assert!(matches!(
            integrate(&sys, &InitialSegment::Constant(vec![1.0]), 0.0, 1.0, 0.3),
            Err(DdeError::StepDoesNotDivide { .. })
        ));
    }

    #[test]
    fn breakpoint_substeps() {
        // x' = a(t) with a jumping from 0 to 1 at t = 0.55: x(1) = 1 + 0.45
        let a = TimeFunction::piecewise(vec![0.55], vec![vec![0.0], vec![1.0]]).unwrap();
        let sys = DelaySystem::new(
            1.0,
            1,
            vec![DelayTerm {
                a,
                sigma: TimeFunction::scalar(1.0),
            }],
            TimeFunction::scalar(1.0),
        )
        .unwrap();
        let tr = integrate(&sys, &InitialSegment::Constant(vec![1.0]), 0.0, 1.0, 0.1).unwrap();
        assert!((tr.eval(1.0).unwrap()[0] - 1.45).abs() < 1e-13);
        assert!(tr.times().iter().any(|t| (*t - 0.55).abs() < 1e-15));
    }

    #[test]
    fn bit_identical() {
        let sys = DelaySystem::constant_scalar(1.0, -0.8, 0.5).unwrap();
        let phi = InitialSegment::function(|t| vec![t.sin() + 1.0]);
        let a = integrate(&sys, &phi, 0.0, 3.0, 0.05).unwrap();
        let b = integrate(&sys, &phi, 0.0, 3.0, 0.05).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
