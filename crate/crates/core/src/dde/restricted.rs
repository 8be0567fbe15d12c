//! The dyadic ladder of the solution operator `Q` and its empirical
//! checks: restricted norms on vanishing subspaces, zero-grid bounds on
//! single trajectories, and stability caps.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrate::{integrate, InitialSegment, Trajectory};
use super::system::{DelaySystem, DelayTerm};
use super::timefn::TimeFunction;
use super::{steps_per_delay, DdeError};
use crate::growth::{delay_ladder, CompactnessLadder, TailGenerator};

pub fn ladder_from_delay(tau: f64, d: usize) -> Result<CompactnessLadder, DdeError> {
    Ok(delay_ladder(tau, d as u64)?)
}

/// How a level `i` is turned into a grid of zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintIndexing {
    /// Level `i` of the ladder: no zeros at `i = 0`, `x(0)` at `i = 1`,
    /// `k tau / 2^(i-2)` for `i >= 2`, so the codimension is at most `k_i`.
    #[default]
    Ladder,
    /// Zeros at `k tau / 2^(i-1)`, `k = 0..=2^(i-1)`, as in the dyadic
    /// decay lemma (`x(0)` only when `i = 0`).
    Lemma,
}

/// Offsets from the segment start where the solution must vanish.
pub fn constraint_points(tau: f64, level: usize, indexing: ConstraintIndexing) -> Vec<f64> {
    let spacing_exp = match (indexing, level) {
        (ConstraintIndexing::Ladder, 0) => return Vec::new(),
        (ConstraintIndexing::Ladder, 1) | (ConstraintIndexing::Lemma, 0) => return vec![0.0],
        (ConstraintIndexing::Ladder, i) => i - 2,
        (ConstraintIndexing::Lemma, i) => i - 1,
    };
    let parts = 1u64 << spacing_exp.min(62);
    (0..=parts).map(|k| tau * k as f64 / parts as f64).collect()
}

/// `tau / 2^i` when `tau <= 2^i`, else `exp(tau - 2^i)`.
pub fn lemma_bound(tau: f64, i: usize) -> f64 {
    let p = 2f64.powi(i as i32);
    if tau <= p {
        tau / p
    } else {
        (tau - p).exp()
    }
}

fn reference_bound(tau: f64, d: usize, level: usize, indexing: ConstraintIndexing) -> Result<f64, DdeError> {
    match indexing {
        ConstraintIndexing::Ladder => {
            let ladder = ladder_from_delay(tau, d)?;
            ladder
                .rung(level)
                .map(|(_, rho)| rho)
                .ok_or_else(|| DdeError::InvalidParameter(format!("level {level} beyond the ladder")))
        }
        ConstraintIndexing::Lemma => Ok(lemma_bound(tau, level)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestrictedNormOptions {
    pub samples: usize,
    pub h: f64,
    pub seed: u64,
    pub indexing: ConstraintIndexing,
    /// Relative slack granted to the discretization.
    pub allowance: f64,
    /// The operator maps segments at `t0` to segments at `t0 + tau`.
    pub t0: f64,
}

impl Default for RestrictedNormOptions {
    fn default() -> Self {
        Self {
            samples: 100,
            h: 1e-2,
            seed: 0,
            indexing: ConstraintIndexing::Ladder,
            allowance: 0.1,
            t0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedNormReport {
    pub level: usize,
    pub indexing: ConstraintIndexing,
    pub estimate: f64,
    /// `rho_i` of the delay ladder, or the lemma bound.
    pub reference: f64,
    pub allowance: f64,
    pub within_allowance: bool,
    pub constraint_points: Vec<f64>,
    pub constraint_rank: usize,
    /// Rank below the number of constraint rows: the subspace is larger than
    /// required, which only helps the codimension bound.
    pub rank_deficient: bool,
    pub basis_size: usize,
    pub samples: usize,
}

/// Largest `sum_j |A_j(t)|` on a sample grid of `[t0, t1]`.
fn coefficient_sup(sys: &DelaySystem, t0: f64, t1: f64, n: usize) -> f64 {
    let mut pts: Vec<f64> = (0..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect();
    pts.extend(crate::dde::DelayFunctional::breakpoints(sys, t0, t1));
    pts.sort_by(f64::total_cmp);
    let mids: Vec<f64> = pts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    pts.iter()
        .chain(&mids)
        .map(|t| sys.coefficient_norm(*t, *t))
        .fold(0.0, f64::max)
}

/// Samples `|Q phi| / |phi|` over initial segments whose solutions vanish on
/// the constraint grid of `level`.
///
/// Segments are spanned by hat functions at step `h`; their images under
/// `Q` are computed once, in parallel, and combined linearly.
pub fn restricted_norm_estimate(
    system: &DelaySystem,
    level: usize,
    opts: &RestrictedNormOptions,
) -> Result<RestrictedNormReport, DdeError> {
    if opts.samples < 100 {
        return Err(DdeError::InvalidParameter(format!(
            "at least 100 samples are needed, got {}",
            opts.samples
        )));
    }
    let tau = system.tau();
    let d = system.d();
    let t0 = opts.t0;
    let nodes = steps_per_delay(opts.h, tau)? + 1;
    system.validate_on(t0, t0 + tau, 200)?;
    let sup = coefficient_sup(system, t0, t0 + tau, 200);
    if sup > 1.0 + 1e-12 {
        return Err(DdeError::InvalidParameter(format!(
            "coefficients reach norm {sup} > 1; rescale time first"
        )));
    }
    let reference = reference_bound(tau, d, level, opts.indexing)?;
    let points = constraint_points(tau, level, opts.indexing);

    let basis_size = nodes * d;
    let h = opts.h;
    let start = t0 - tau;
    // outputs at nodes and midpoints of [t0, t0 + tau]
    let out_times: Vec<f64> = (0..2 * nodes - 1).map(|k| t0 + 0.5 * h * k as f64).collect();
    let columns: Vec<(Vec<f64>, Vec<f64>)> = (0..basis_size)
        .into_par_iter()
        .map(|b| {
            let (node, comp) = (b / d, b % d);
            let values: Vec<Vec<f64>> = (0..nodes)
                .map(|q| {
                    let mut v = vec![0.0; d];
                    if q == node {
                        v[comp] = 1.0;
                    }
                    v
                })
                .collect();
            let phi = InitialSegment::Samples { start, dt: h, values };
            let tr = integrate(system, &phi, t0, t0 + tau, h)?;
            let outs = sample_flat(&tr, &out_times)?;
            let abs_points: Vec<f64> = points.iter().map(|p| t0 + p).collect();
            let cons = sample_flat(&tr, &abs_points)?;
            Ok((outs, cons))
        })
        .collect::<Result<_, DdeError>>()?;

    let n_out = out_times.len() * d;
    let q = DMatrix::from_fn(n_out, basis_size, |r, c| columns[c].0[r]);
    let n_rows = points.len() * d;
    let (rank, row_space) = if n_rows == 0 {
        (0, DMatrix::zeros(0, basis_size))
    } else {
        let c = DMatrix::from_fn(n_rows, basis_size, |r, col| columns[col].1[r]);
        let svd = c.svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let smax = svd.singular_values.iter().fold(0.0, |m: f64, s| m.max(*s));
        let rank = svd
            .singular_values
            .iter()
            .filter(|s| **s > 1e-10 * smax.max(f64::MIN_POSITIVE))
            .count();
        // singular values are sorted in decreasing order
        (rank, v_t.rows(0, rank).into_owned())
    };
    let project = |c: DVector<f64>| -> DVector<f64> {
        if rank == 0 {
            c
        } else {
            let coords = &row_space * &c;
            c - row_space.transpose() * coords
        }
    };

    let mut candidates: Vec<DVector<f64>> = Vec::with_capacity(opts.samples + n_out);
    candidates.push(project(DVector::from_element(basis_size, 1.0)));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let thetas: Vec<f64> = (0..nodes).map(|q| q as f64 / (nodes - 1).max(1) as f64).collect();
    for s in 1..opts.samples {
        let c = if s % 2 == 1 {
            DVector::from_fn(basis_size, |_, _| StandardNormal.sample(&mut rng))
        } else {
            // low-frequency trigonometric segment
            let coef: Vec<f64> = (0..10 * d).map(|_| StandardNormal.sample(&mut rng)).collect();
            DVector::from_fn(basis_size, |b, _| {
                let (node, comp) = (b / d, b % d);
                let th = thetas[node] * std::f64::consts::PI;
                (0..5)
                    .map(|k| {
                        let base = comp * 10 + 2 * k;
                        coef[base] * (k as f64 * th).cos() + coef[base + 1] * ((k + 1) as f64 * th).sin()
                    })
                    .sum()
            })
        };
        candidates.push(project(c));
    }
    // directions aligned with single outputs
    for r in 0..n_out {
        let row = q.row(r);
        let signs = DVector::from_fn(basis_size, |b, _| row[b].signum());
        candidates.push(project(signs));
    }

    let norm = system.norm();
    let estimate = candidates
        .par_iter()
        .map(|c| {
            let phi_norm = c
                .as_slice()
                .chunks(d)
                .map(|v| norm.vector(v))
                .fold(0.0, f64::max);
            if phi_norm < 1e-12 {
                return 0.0;
            }
            let img = &q * c;
            let q_norm = img.as_slice().chunks(d).map(|v| norm.vector(v)).fold(0.0, f64::max);
            q_norm / phi_norm
        })
        .reduce(|| 0.0, f64::max);

    Ok(RestrictedNormReport {
        level,
        indexing: opts.indexing,
        estimate,
        reference,
        allowance: opts.allowance,
        within_allowance: estimate <= reference * (1.0 + opts.allowance),
        constraint_points: points,
        constraint_rank: rank,
        rank_deficient: rank < n_rows,
        basis_size,
        samples: candidates.len(),
    })
}

fn sample_flat(tr: &Trajectory, times: &[f64]) -> Result<Vec<f64>, DdeError> {
    let mut out = Vec::with_capacity(times.len() * tr.dim());
    for t in times {
        out.extend(tr.eval(*t)?);
    }
    Ok(out)
}

/// Scalar systems with `|F(t, .)| <= 1` on `[0, tau]` that push the
/// restricted norms towards their bounds.
pub fn worst_case_family(tau: f64) -> Result<Vec<(String, DelaySystem)>, DdeError> {
    let scalar = |a: TimeFunction, sigma: TimeFunction| {
        DelaySystem::new(tau, 1, vec![DelayTerm { a, sigma }], TimeFunction::scalar(1.0))
    };
    let half = |lo: f64, hi: f64| TimeFunction::piecewise(vec![0.5 * tau], vec![vec![lo], vec![hi]]);
    Ok(vec![
        ("negative full delay".into(), DelaySystem::constant_scalar(tau, -1.0, tau)?),
        ("positive full delay".into(), DelaySystem::constant_scalar(tau, 1.0, tau)?),
        ("negative half delay".into(), DelaySystem::constant_scalar(tau, -1.0, 0.5 * tau)?),
        ("instantaneous".into(), DelaySystem::constant_scalar(tau, -1.0, 0.0)?),
        ("sign switch".into(), scalar(half(1.0, -1.0)?, TimeFunction::scalar(tau))?),
        ("delay switch".into(), scalar(TimeFunction::scalar(1.0), half(tau, 0.25 * tau)?)?),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MyshkisVerdict {
    Pass { max_norm: f64, bound: f64 },
    Fail { max_norm: f64, bound: f64 },
    HypothesisUnmet { at: f64, norm: f64 },
}

impl MyshkisVerdict {
    pub fn is_fail(&self) -> bool {
        matches!(self, MyshkisVerdict::Fail { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MyshkisReport {
    pub level: usize,
    /// Zeros at `k tau / 2^(i-1)`, bound `tau / 2^i` (or `exp(tau - 2^i)`).
    pub lemma: MyshkisVerdict,
    /// The same statement shifted to ladder level `i`.
    pub ladder: MyshkisVerdict,
    pub zero_tolerance: f64,
}

fn myshkis_verdict(
    traj: &Trajectory,
    tau: f64,
    points: &[f64],
    bound: f64,
    phi_norm: f64,
    tol: f64,
) -> Result<MyshkisVerdict, DdeError> {
    let norm = traj.state_norm();
    for p in points {
        let v = norm.vector(&traj.eval(*p)?);
        if v > tol {
            return Ok(MyshkisVerdict::HypothesisUnmet { at: *p, norm: v });
        }
    }
    let max_norm = traj.sup_norm_on(0.0, tau);
    let limit = bound * phi_norm;
    Ok(if max_norm <= limit * (1.0 + 1e-9) + tol {
        MyshkisVerdict::Pass { max_norm, bound: limit }
    } else {
        MyshkisVerdict::Fail { max_norm, bound: limit }
    })
}

/// Checks a trajectory on `[0, tau]` against the zero-grid decay bound.
///
/// When the solution vanishes on the grid of level `i` (within
/// `zero_tol`, default `1e-8 |phi|`), `|x(t)|` must stay below the bound
/// times `|phi|`; a failure shows that no system with `|F(t, .)| <= 1`
/// produces the trajectory.
pub fn myshkis_check(
    traj: &Trajectory,
    tau: f64,
    level: usize,
    phi_norm: f64,
    zero_tol: Option<f64>,
) -> Result<MyshkisReport, DdeError> {
    if !(tau > 0.0) || !(phi_norm >= 0.0) {
        return Err(DdeError::InvalidParameter("need tau > 0 and |phi| >= 0".into()));
    }
    if traj.t0() - traj.tau() > 0.0 || traj.t_end() < tau - 1e-12 * tau {
        return Err(DdeError::InsufficientCoverage {
            start: traj.t0(),
            end: traj.t_end(),
            need_start: 0.0,
            need_end: tau,
        });
    }
    let tol = zero_tol.unwrap_or(1e-8 * phi_norm);
    let lemma = myshkis_verdict(
        traj,
        tau,
        &constraint_points(tau, level, ConstraintIndexing::Lemma),
        lemma_bound(tau, level),
        phi_norm,
        tol,
    )?;
    let ladder_bound = if level == 0 { tau.exp() } else { lemma_bound(tau, level - 1) };
    let ladder = myshkis_verdict(
        traj,
        tau,
        &constraint_points(tau, level, ConstraintIndexing::Ladder),
        ladder_bound,
        phi_norm,
        tol,
    )?;
    Ok(MyshkisReport {
        level,
        lemma,
        ladder,
        zero_tolerance: tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCap {
    pub i: usize,
    pub k: u64,
    pub rho: f64,
}

/// Smallest `i` with `rho_i M < 1`: solutions that do not decay start from
/// a space of dimension at most `k_i`.
pub fn stability_cap(m: f64, ladder: &CompactnessLadder) -> Result<StabilityCap, DdeError> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(DdeError::InvalidParameter(format!("M must be positive, got {m}")));
    }
    let mut i = 0;
    while let Some((k, rho)) = ladder.rung(i) {
        if rho * m < 1.0 {
            return Ok(StabilityCap { i, k, rho });
        }
        i += 1;
        if i > 4096 {
            break;
        }
    }
    let needed = match ladder.tail() {
        Some(TailGenerator::DelayDyadic { tau, .. }) => {
            format!("{}", ((tau * m).log2() + 1.0).floor() as i64 + 1)
        }
        Some(TailGenerator::Geometric { ratio, .. }) if *ratio < 1.0 => {
            let last = ladder.explicit_len() - 1;
            let rho = ladder.explicit_rho()[last];
            let extra = ((1.0 / (rho * m)).ln() / ratio.ln()).floor() as i64 + 1;
            format!("{}", last as i64 + extra.max(1))
        }
        _ => "unbounded: the ladder never drops below 1/M".into(),
    };
    Err(DdeError::NoStabilityCap { searched: i, needed })
}
