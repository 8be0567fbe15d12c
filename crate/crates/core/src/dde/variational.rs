//! Directional derivative of the solution map along a frozen trajectory.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrate::{integrate, InitialSegment, Trajectory};
use super::system::{DelayFunctional, DelaySystem, DelayTerm, NonlinearSystem};
use super::timefn::TimeFunction;
use super::DdeError;

impl NonlinearSystem {
    /// The linear system `V' = d2F(t, x_t)[V_t]` along `base`.
    pub fn linearize(&self, base: Arc<Trajectory>) -> Result<DelaySystem, DdeError> {
        let jac = self.jacobian().ok_or(DdeError::MissingDerivative)?.clone();
        let d = self.d();
        let delays = self.delays().to_vec();
        let args = {
            let base = base.clone();
            let delays = delays.clone();
            Arc::new(move |t: f64| -> Vec<Vec<f64>> {
                delays
                    .iter()
                    .map(|s| base.eval(t - s).unwrap_or_else(|_| vec![f64::NAN; d]))
                    .collect()
            })
        };
        let terms: Vec<DelayTerm> = delays
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let (jac, args) = (jac.clone(), args.clone());
                DelayTerm {
                    a: TimeFunction::function(d * d, Vec::new(), move |t| {
                        let mut out = vec![0.0; d * d];
                        jac(t, &args(t), j, &mut out);
                        out
                    }),
                    sigma: TimeFunction::scalar(*s),
                }
            })
            .collect();
        let (jac_n, args_n, norm, k) = (jac.clone(), args.clone(), self.state_norm(), delays.len());
        let majorant = TimeFunction::function(1, Vec::new(), move |t| {
            let a = args_n(t);
            let mut m = vec![0.0; d * d];
            let total = (0..k)
                .map(|j| {
                    jac_n(t, &a, j, &mut m);
                    norm.matrix(&m, d)
                })
                .sum();
            vec![total]
        });
        Ok(DelaySystem::new(base.tau(), d, terms, majorant)?.with_norm(norm))
    }
}

/// Solves the variational equation along `base` with `V_{t0} = xi`.
pub fn variational_solve(
    system: &NonlinearSystem,
    base: Arc<Trajectory>,
    xi: &InitialSegment,
    t_end: f64,
    h: f64,
) -> Result<Trajectory, DdeError> {
    let t0 = base.t0();
    if base.t_end() < t_end {
        return Err(DdeError::InsufficientCoverage {
            start: t0,
            end: base.t_end(),
            need_start: t0,
            need_end: t_end,
        });
    }
    let lin = system.linearize(base)?;
    integrate(&lin, xi, t0, t_end, h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalFit {
    pub perturbations: Vec<f64>,
    /// `sup |x(phi + h xi) - x(phi) - h V| / h` for each `h`.
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub slope: f64,
}

impl VariationalFit {
    /// Measures how fast the first-order remainder vanishes; integration
    /// runs on `[t0, t_end]` with step `step` for every perturbation.
    pub fn measure(
        system: &NonlinearSystem,
        phi: &InitialSegment,
        xi: &InitialSegment,
        t0: f64,
        t_end: f64,
        step: f64,
        perturbations: &[f64],
    ) -> Result<Self, DdeError> {
        if perturbations.len() < 2 || perturbations.iter().any(|h| !(*h > 0.0)) {
            return Err(DdeError::InvalidParameter("need two or more positive perturbations".into()));
        }
        let d = system.d();
        let base = Arc::new(integrate(system, phi, t0, t_end, step)?);
        let v = variational_solve(system, base.clone(), xi, t_end, step)?;
        let errors = perturbations
            .par_iter()
            .map(|eps| {
                let (p, x, e) = (phi.clone(), xi.clone(), *eps);
                let shifted = InitialSegment::function(move |s| {
                    let (a, b) = (p.value(s, d), x.value(s, d));
                    a.iter().zip(&b).map(|(u, w)| u + e * w).collect()
                });
                let pert = integrate(system, &shifted, t0, t_end, step)?;
                let norm = pert.state_norm();
                let worst = (0..pert.len())
                    .map(|j| {
                        let r: Vec<f64> = (0..d)
                            .map(|k| pert.node(j)[k] - base.node(j)[k] - e * v.node(j)[k])
                            .collect();
                        norm.vector(&r)
                    })
                    .fold(0.0, f64::max);
                Ok(worst / e)
            })
            .collect::<Result<Vec<f64>, DdeError>>()?;
        let slope = log_log_slope(perturbations, &errors);
        Ok(Self {
            perturbations: perturbations.to_vec(),
            errors,
            slope,
        })
    }
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(f64::MIN_POSITIVE).ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
