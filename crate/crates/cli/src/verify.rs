//! The property suite behind `dimbound verify`.
//!
//! Every check compares library output against either a closed form or an
//! oracle computed here by a different route.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dimbound_core::boxdim::{cantor_points, minkowski_dim, Metric, PointCloud};
use dimbound_core::dde::{
    integrate, ladder_from_delay, rescale_time, restricted_norm_estimate, worst_case_family, DelaySystem,
    InitialSegment, NonlinearSystem, RestrictedNormOptions, VariationalFit,
};
use dimbound_core::field::{Scalar, Valuation};
use dimbound_core::growth::{
    decay_envelope, delay_ladder, error_recursion, frame_separation, minkowski_bound, minkowski_bound_from,
    nonlinear_eta, rho_infinity, search_mp, BudgetInputs, CompactnessLadder, SearchLimits, TailGenerator,
};
use dimbound_core::linalg::{g_oracle, pullback_det, LinearMap, NormedSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::pipeline::run_pipeline;
use crate::spec::parse_spec_str;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub elapsed: Duration,
    /// Wall-clock budget for the check.
    #[serde(skip)]
    pub limit: Duration,
}

impl CheckResult {
    pub fn within_time(&self) -> bool {
        self.elapsed <= self.limit
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed && self.within_time() { "PASS" } else { "FAIL" };
        format!(
            "criterion {:>2} {verdict} {} ({:.2} s of {} s): {}",
            self.id,
            self.name,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs(),
            self.detail
        )
    }
}

type CheckFn = fn(u64) -> Result<String, String>;

pub struct Check {
    pub id: u32,
    pub name: &'static str,
    pub limit: Duration,
    run: CheckFn,
}

impl Check {
    pub fn run(&self, seed: u64) -> CheckResult {
        let start = Instant::now();
        let out = (self.run)(seed);
        let elapsed = start.elapsed();
        let (passed, detail) = match out {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        CheckResult {
            id: self.id,
            name: self.name,
            passed,
            detail,
            elapsed,
            limit: self.limit,
        }
    }
}

pub fn checks() -> Vec<Check> {
    let secs = Duration::from_secs;
    vec![
        Check { id: 1, name: "g-oracle", limit: secs(10), run: g_oracle_check },
        Check { id: 2, name: "determinant multiplicativity", limit: secs(30), run: determinant_check },
        Check { id: 3, name: "rho_inf profiles", limit: secs(10), run: rho_check },
        Check { id: 4, name: "Minkowski bound closed form", limit: secs(10), run: minkowski_check },
        Check { id: 5, name: "synthetic cocycle envelope", limit: secs(60), run: cocycle_check },
        Check { id: 6, name: "delay integrator", limit: secs(30), run: integrator_check },
        Check { id: 7, name: "time rescaling", limit: secs(30), run: rescaling_check },
        Check { id: 8, name: "restricted norms", limit: secs(120), run: restricted_check },
        Check { id: 9, name: "variational convergence", limit: secs(60), run: variational_check },
        Check { id: 10, name: "box counting", limit: secs(60), run: boxdim_check },
        Check { id: 11, name: "nonlinear budget", limit: secs(10), run: budget_check },
        Check { id: 12, name: "pipeline determinism", limit: secs(120), run: determinism_check },
    ]
}

/// Runs the checks whose ids are listed (all when `only` is empty).
pub fn run_checks(seed: u64, only: &[u32]) -> Vec<CheckResult> {
    checks()
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .map(|c| c.run(seed))
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `max |det|` over all `2^(n^2)` sign matrices, by cofactor expansion.
fn sign_matrix_max_det(n: usize) -> i64 {
    fn det(a: &[Vec<i64>]) -> i64 {
        let n = a.len();
        if n == 1 {
            return a[0][0];
        }
        (0..n)
            .map(|j| {
                let minor: Vec<Vec<i64>> = a[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1 } else { -1 };
                sign * a[0][j] * det(&minor)
            })
            .sum()
    }
    (0u64..1 << (n * n))
        .map(|mask| {
            let a: Vec<Vec<i64>> = (0..n)
                .map(|i| (0..n).map(|j| if mask >> (i * n + j) & 1 == 1 { -1 } else { 1 }).collect())
                .collect();
            det(&a).abs()
        })
        .max()
        .unwrap_or(0)
}

fn g_oracle_check(_: u64) -> Result<String, String> {
    let real = Valuation::real();
    let g = |n| g_oracle(1.0, n, &real).map_err(|e| e.to_string());
    for (n, want) in [(2, 2.0), (3, 4.0)] {
        let got = g(n)?.value;
        let brute = sign_matrix_max_det(n) as f64;
        ensure(got == want && brute == want, || format!("g(1,{n}) = {got}, enumeration {brute}"))?;
    }
    for n in 1..=5 {
        let got = g(n)?.value;
        let had = (n as f64).powf(n as f64 / 2.0);
        ensure(got <= had, || format!("g(1,{n}) = {got} exceeds n^(n/2) = {had}"))?;
    }
    Ok("g(1,2) = 2, g(1,3) = 4, Hadamard bound holds for n <= 5".into())
}

fn determinant_check(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD37);
    let real = Valuation::real();
    let q5 = Valuation::padic(5).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for trial in 0..1000 {
        let n = rng.gen_range(1..=4);
        let space = NormedSpace::sup(real, n).map_err(|e| e.to_string())?;
        let mut mat = || -> Vec<Vec<Scalar>> {
            (0..n).map(|_| (0..n).map(|_| Scalar::Real(rng.gen_range(-2.0..2.0))).collect()).collect()
        };
        let (a, b) = (mat(), mat());
        let s = LinearMap::new(space.clone(), space.clone(), a).map_err(|e| e.to_string())?;
        let t = LinearMap::new(space.clone(), space, b).map_err(|e| e.to_string())?;
        let st = s.compose(&t).map_err(|e| e.to_string())?;
        let lhs = pullback_det(&st).map_err(|e| e.to_string())?.value;
        let rhs = pullback_det(&s).map_err(|e| e.to_string())?.value * pullback_det(&t).map_err(|e| e.to_string())?.value;
        let rel = (lhs - rhs).abs() / rhs.abs().max(1e-300);
        if rhs > 1e-12 {
            worst = worst.max(rel);
            ensure(rel <= 1e-9, || format!("real pair {trial}: det(ST) = {lhs}, det S det T = {rhs}"))?;
        }

        let space = NormedSpace::sup(q5, n).map_err(|e| e.to_string())?;
        let mut pmat = || -> Result<Vec<Vec<Scalar>>, String> {
            (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            let num = rng.gen_range(-200i64..=200);
                            let den = [1i64, 2, 5, 25, 3][rng.gen_range(0..5)];
                            Scalar::padic(5, num, den).map_err(|e| e.to_string())
                        })
                        .collect()
                })
                .collect()
        };
        let (a, b) = (pmat()?, pmat()?);
        let s = LinearMap::new(space.clone(), space.clone(), a).map_err(|e| e.to_string())?;
        let t = LinearMap::new(space.clone(), space, b).map_err(|e| e.to_string())?;
        let st = s.compose(&t).map_err(|e| e.to_string())?;
        let (ds, dt, dst) = (
            pullback_det(&s).map_err(|e| e.to_string())?,
            pullback_det(&t).map_err(|e| e.to_string())?,
            pullback_det(&st).map_err(|e| e.to_string())?,
        );
        let expected = match (ds.padic_exponent, dt.padic_exponent) {
            (Some(x), Some(y)) => Some(x + y),
            _ => None,
        };
        ensure(dst.padic_exponent == expected, || {
            format!("Q_5 pair {trial}: exponent {:?}, expected {expected:?}", dst.padic_exponent)
        })?;
    }
    Ok(format!("1000 pairs over R (worst relative error {worst:.1e}) and Q_5 (exact)"))
}

fn rho_check(_: u64) -> Result<String, String> {
    let l = CompactnessLadder::constant(0.5, 3, Valuation::real()).map_err(|e| e.to_string())?;
    let r = rho_infinity(&l, 1000).map_err(|e| e.to_string())?;
    ensure((r.value - 0.5).abs() <= 1e-6, || format!("constant ladder: rho_inf = {}", r.value))?;
    let d = delay_ladder(1.0, 1).map_err(|e| e.to_string())?;
    let p = rho_infinity(&d, 3).map_err(|e| e.to_string())?;
    let at3 = p.profile.iter().find(|x| x.s == 3).ok_or("no s = 3 point")?.value;
    let want = 0.5f64.powf(1.0 / 3.0);
    ensure((at3 - want).abs() <= 1e-12, || format!("delay profile at s = 3: {at3} vs {want}"))?;
    Ok(format!("constant ladder -> {}, delay profile s = 3 -> {at3}", r.value))
}

fn minkowski_check(_: u64) -> Result<String, String> {
    let l = delay_ladder(1.0, 1).map_err(|e| e.to_string())?;
    let cert = search_mp(&l, 0.95, SearchLimits::default()).map_err(|e| e.to_string())?;
    let cert = cert.with_constants(1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let b = minkowski_bound(&cert).map_err(|e| e.to_string())?;
    ensure(b == (cert.m - 1) as f64, || format!("varrho = 1: bound {b}, m = {}", cert.m))?;
    for m in 1..10 {
        let v = minkowski_bound_from(m, 0.3, 1.0).map_err(|e| e.to_string())?;
        ensure(v == (m - 1) as f64, || format!("varrho = 1, m = {m}: {v}"))?;
    }
    let v = minkowski_bound_from(3, 0.25, 0.5).map_err(|e| e.to_string())?;
    ensure((v - 4.0).abs() <= 1e-12, || format!("chi* = 0.25, varrho = 0.5, m = 3: {v}"))?;
    Ok(format!("m - 1 = {b} at varrho = 1; closed form 4 -> {v}"))
}

/// Diagonal cocycle in `R^3` whose maps contract `span(e_2, e_3)` by
/// `0.25`, matching the ladder `k_i = i`, `rho_0 = 1`, `rho_i = 0.25`.
fn cocycle_check(seed: u64) -> Result<String, String> {
    let ladder = CompactnessLadder::new(vec![0, 1, 2], vec![1.0, 0.25, 0.25], Valuation::real())
        .and_then(|l| l.with_tail(TailGenerator::Constant { rho: 0.25, k_step: 1 }))
        .map_err(|e| e.to_string())?;
    let cert = search_mp(&ladder, 0.95, SearchLimits { p_max: 1, s_max: 2 }).map_err(|e| e.to_string())?;
    let m = cert.m as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0C);
    let mut frame: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let mut v = vec![1.0];
            v.extend((0..2).map(|_| rng.gen_range(-0.3..0.3)));
            v
        })
        .collect();
    let mut worst: f64 = 0.0;
    for n in 0..=30u32 {
        let a = frame_separation(&frame, None).map_err(|e| e.to_string())?;
        let env = decay_envelope(&cert, n);
        ensure(a <= env, || format!("N = {n}: A_N = {a} > envelope {env}"))?;
        worst = worst.max(a / env);
        let diag = [rng.gen_range(-1.0..=1.0), rng.gen_range(-0.25..=0.25), rng.gen_range(-0.25..=0.25)];
        for v in frame.iter_mut() {
            for (x, d) in v.iter_mut().zip(diag) {
                *x *= d;
            }
        }
    }
    Ok(format!("m = {m}, chi* = {:.4}, max A_N / envelope = {worst:.3e}", cert.chi_star))
}

fn integrator_check(_: u64) -> Result<String, String> {
    let sys = DelaySystem::constant_scalar(1.0, -FRAC_PI_2, 1.0).map_err(|e| e.to_string())?;
    let phi = InitialSegment::function(|t| vec![(FRAC_PI_2 * t).cos()]);
    let tr = integrate(&sys, &phi, 0.0, 10.0, 1e-3).map_err(|e| e.to_string())?;
    let mut err: f64 = 0.0;
    for k in 0..=20_000 {
        let t = k as f64 * 5e-4;
        let x = tr.eval(t).map_err(|e| e.to_string())?[0];
        err = err.max((x - (FRAC_PI_2 * t).cos()).abs());
    }
    ensure(err <= 1e-6, || format!("cosine solution: sup error {err:e}"))?;
    let sys = DelaySystem::constant_scalar(1.0, -1.0, 1.0).map_err(|e| e.to_string())?;
    let tr = integrate(&sys, &InitialSegment::Constant(vec![1.0]), 0.0, 1.0, 1e-3).map_err(|e| e.to_string())?;
    let x1 = tr.eval(1.0).map_err(|e| e.to_string())?[0];
    ensure(x1.abs() <= 1e-9, || format!("x(1) = {x1:e}"))?;
    Ok(format!("sup error {err:.2e}, x(1) = {x1:.1e}"))
}

fn rescaling_check(_: u64) -> Result<String, String> {
    let sys = DelaySystem::constant_scalar(1.0, -2.0, 1.0).map_err(|e| e.to_string())?;
    let rs = rescale_time(&sys, 10.0).map_err(|e| e.to_string())?;
    let sup = rs.majorant_sup(0.0, 20.0, 2000).map_err(|e| e.to_string())?;
    ensure(sup <= 1.0 + 1e-12, || format!("rescaled majorant {sup}"))?;
    let phi = InitialSegment::function(|t| vec![1.0 + 0.5 * t]);
    let orig = Arc::new(integrate(&sys, &phi, 0.0, 5.0, 1e-3).map_err(|e| e.to_string())?);
    let hist = rs.history_from(orig.clone()).map_err(|e| e.to_string())?;
    let tr = integrate(&rs.system, &hist, rs.start(), 10.0, 2e-3).map_err(|e| e.to_string())?;
    let mut diff: f64 = 0.0;
    for k in 0..=800 {
        let s = 2.0 + k as f64 * 0.01;
        let a = tr.eval(s).map_err(|e| e.to_string())?[0];
        let b = orig.eval(s / 2.0).map_err(|e| e.to_string())?[0];
        diff = diff.max((a - b).abs());
    }
    ensure(diff <= 1e-4, || format!("|x~(s) - x(s/2)| up to {diff:e}"))?;
    Ok(format!("max |x~(s) - x(s/2)| = {diff:.2e}, majorant sup = {sup}"))
}

fn restricted_check(seed: u64) -> Result<String, String> {
    let opts = RestrictedNormOptions {
        seed,
        ..RestrictedNormOptions::default()
    };
    let rho2 = ladder_from_delay(1.0, 1)
        .map_err(|e| e.to_string())?
        .rung(2)
        .ok_or("no rung 2")?
        .1;
    let mut worst: f64 = 0.0;
    for (name, sys) in worst_case_family(1.0).map_err(|e| e.to_string())? {
        let r = restricted_norm_estimate(&sys, 2, &opts).map_err(|e| e.to_string())?;
        ensure(r.estimate <= 0.55 && r.estimate <= rho2 * 1.1, || format!("{name}: estimate {}", r.estimate))?;
        worst = worst.max(r.estimate);
    }
    Ok(format!("largest level-2 estimate {worst:.4} (rho_2 = {rho2})"))
}

fn variational_check(_: u64) -> Result<String, String> {
    let sys = NonlinearSystem::logistic();
    let phi = InitialSegment::Constant(vec![0.5]);
    let xi = InitialSegment::function(|s| vec![1.0 + s]);
    let fit = VariationalFit::measure(&sys, &phi, &xi, 0.0, 5.0, 1e-2, &[1e-2, 1e-3, 1e-4])
        .map_err(|e| e.to_string())?;
    ensure(fit.slope >= 0.9, || format!("slope {} (errors {:?})", fit.slope, fit.errors))?;
    Ok(format!("log-log slope {:.3}", fit.slope))
}

fn boxdim_check(seed: u64) -> Result<String, String> {
    let cantor = PointCloud::new(&cantor_points(10), Metric::Sup).map_err(|e| e.to_string())?;
    let c = minkowski_dim(&cantor, 1e-4, 0.5).map_err(|e| e.to_string())?;
    let want = 2f64.ln() / 3f64.ln();
    ensure((c.estimate - want).abs() <= 0.05, || format!("Cantor estimate {}", c.estimate))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB0C);
    let pts: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    let sq = PointCloud::new(&pts, Metric::Sup).map_err(|e| e.to_string())?;
    let s = minkowski_dim(&sq, 1.0 / 32.0, 0.5).map_err(|e| e.to_string())?;
    ensure((s.estimate - 2.0).abs() <= 0.05, || format!("unit square estimate {}", s.estimate))?;
    Ok(format!("Cantor {:.4} (ln2/ln3 = {want:.4}), square {:.4}", c.estimate, s.estimate))
}

fn budget_check(seed: u64) -> Result<String, String> {
    let b = BudgetInputs { m: 1.0, l: 1.0, c: 1.0, lambda: 2.0, n0: 0 };
    let eta = nonlinear_eta(&b).map_err(|e| e.to_string())?.eta;
    ensure((eta - 4.0 / 3.0).abs() <= 1e-9, || format!("eta = {eta}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB06);
    for draw in 0..1000 {
        let b = BudgetInputs {
            m: rng.gen_range(0.0..3.0),
            l: rng.gen_range(0.0..3.0),
            c: rng.gen_range(0.05..3.0),
            lambda: rng.gen_range(1.05..3.0),
            n0: 0,
        };
        let d0 = rng.gen_range(0.0..1.0);
        let n = rng.gen_range(1..=20u32);
        // pathwise bounds anywhere below the chain bound
        let bounds: Vec<f64> = (0..n)
            .map(|k| rng.gen_range(0.0..=1.0) * (b.l + b.c).powi(k as i32 + 1) * d0)
            .collect();
        let r = error_recursion(&b, d0, Some(&bounds), n).map_err(|e| e.to_string())?;
        ensure(r.within_majorant, || format!("draw {draw}: {b:?}, d0 = {d0}"))?;
    }
    Ok(format!("eta = {eta}, 1000 recursions below the majorant"))
}

const EXAMPLE_SPEC: &str = include_str!("../../../configs/delay_tau1_d1.json");
const EXAMPLE_SYSTEM: &str = include_str!("../../../configs/delay_tau1_d1.system.json");

fn determinism_check(seed: u64) -> Result<String, String> {
    let run = || -> Result<Vec<(String, String)>, String> {
        let load = |name: &str| {
            if name == "delay_tau1_d1.system.json" {
                Ok(EXAMPLE_SYSTEM.to_string())
            } else {
                Err(crate::error::CliError::Usage(format!("unknown file {name}")))
            }
        };
        let mut spec = parse_spec_str(EXAMPLE_SPEC, "delay_tau1_d1.json", &load).map_err(|e| e.to_string())?;
        spec.seed = seed;
        Ok(run_pipeline(&spec).map_err(|e| e.to_string())?.artifacts)
    };
    let (a, b) = (run()?, run()?);
    ensure(a == b, || "two runs produced different artifacts".into())?;
    let bytes: usize = a.iter().map(|(_, c)| c.len()).sum();
    Ok(format!("{} artifacts, {bytes} bytes, identical", a.len()))
}
