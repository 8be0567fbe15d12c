//! ladder -> certificate -> bound -> empirical cross-check.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dimbound_core::boxdim::{embed_trajectory, minkowski_dim};
use dimbound_core::dde::{
    integrate, ladder_from_delay, myshkis_check, restricted_norm_estimate, ConstraintIndexing, DdeError,
    DelaySystem, InitialSegment, RestrictedNormOptions,
};
use dimbound_core::growth::{
    envelope_ln_constant, minkowski_bound, nonlinear_eta, rho_infinity, search_report, CompactnessLadder,
    GrowthCertificate, GrowthError, SearchLimits, SearchReport,
};
use serde_json::{json, Value};

use crate::error::{write_file, CliError, EXIT_VIOLATION};
use crate::spec::{output_path, Input, PipelineSpec};

pub const FORMULAS: &[(&str, &str)] = &[
    (
        "rho_infinity",
        "running minimum over s of [prod_{i=1}^{s-1} rho_i^(k_{i+1}-k_i)]^(1/(k_s-k_1))",
    ),
    (
        "xi",
        "Xi(m,p) = G(m) rho_s^(p r) prod_{i=1}^{s-1} rho_i^(p^2 (k_{i+1}-k_i)), minimized over m = p k_s + r",
    ),
    ("chi_star", "chi* = Xi(m,p)^(1/mp) / varpi"),
    ("upsilon", "Upsilon = sup_{0<=r<=p} Xi(m,r) Xi(m,p)^(-(r-1)/p), Xi(m,0) = 1"),
    ("envelope", "A_N <= K chi*^N with K = [Upsilon m^m c^-m G(m)]^(1/m)"),
    ("minkowski_bound", "dim_B <= (m-1) ln chi* / (ln chi* - ln varrho)"),
    ("eta", "eta = sup_{N>=N0} M C^N (1 + q (q^N-1)/(q-1)) / (L+C)^(N Lambda), q = (L+C)^Lambda / C"),
];

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub report: Value,
    /// Output file names and their contents, in a fixed order.
    pub artifacts: Vec<(String, String)>,
    pub violations: Vec<String>,
}

impl PipelineOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.violations.is_empty() {
            0
        } else {
            EXIT_VIOLATION
        }
    }

    pub fn write(&self, dir: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        for (name, contents) in &self.artifacts {
            let path = output_path(dir, name);
            write_file(&path, contents)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn growth_err(e: GrowthError) -> CliError {
    CliError::module("growth-engine", e)
}

fn dde_err(e: DdeError) -> CliError {
    CliError::module("dde", e)
}

pub fn run_pipeline(spec: &PipelineSpec) -> Result<PipelineOutcome, CliError> {
    let mut violations = Vec::new();
    let mut artifacts = Vec::new();

    let ladder = match &spec.input {
        Input::Ladder { ladder, .. } => ladder.clone(),
        Input::System { system, .. } => ladder_from_delay(system.tau(), system.d()).map_err(dde_err)?,
    };
    let limits: SearchLimits = spec.search.into();
    let rho_inf = rho_infinity(&ladder, limits.s_max).map_err(growth_err)?;

    let search = match search_report(&ladder, spec.varpi, limits) {
        Ok(r) => Some(r),
        Err(e @ GrowthError::VarpiBelowRhoInfinity { .. }) => {
            violations.push(format!("search: {e}"));
            None
        }
        Err(e) => return Err(growth_err(e)),
    };

    let mut certificate = None;
    if let Some(rep) = &search {
        match &rep.certificate {
            Some(c) => match c.clone().with_constants(spec.varrho, spec.kappa, spec.c) {
                Ok(c) => certificate = Some(c),
                Err(e) => violations.push(format!("certificate: {e}")),
            },
            None => {
                let (m, p, r) = rep.best.unwrap_or((0, 0, f64::NAN));
                violations.push(format!(
                    "search: no (m, p) with Xi^(1/mp) < varpi = {} within p <= {}, s <= {}; best {r} at m = {m}, p = {p}",
                    spec.varpi, limits.p_max, limits.s_max
                ));
            }
        }
    }

    let bound = match &certificate {
        Some(c) if c.ladder.valuation().is_archimedean() => Some(minkowski_bound(c).map_err(growth_err)?),
        _ => None,
    };

    let mut report = serde_json::Map::new();
    report.insert(
        "input".into(),
        json!({
            "kind": match &spec.input { Input::Ladder { .. } => "ladder", Input::System { .. } => "delay_system" },
            "file": spec.input.file(),
        }),
    );
    report.insert(
        "parameters".into(),
        json!({
            "varpi": spec.varpi,
            "varrho": spec.varrho,
            "kappa": spec.kappa,
            "c": spec.c,
            "iota": spec.iota,
            "seed": spec.seed,
            "search": { "p_max": limits.p_max, "s_max": limits.s_max },
        }),
    );
    report.insert("formulas".into(), FORMULAS.iter().map(|(k, v)| (k.to_string(), json!(v))).collect());
    report.insert("ladder".into(), to_value(&ladder));
    report.insert("rho_infinity".into(), to_value(&rho_inf));
    report.insert(
        "search".into(),
        match &search {
            Some(r) => json!({
                "best": r.best.map(|(m, p, x)| json!({ "m": m, "p": p, "xi_root": x })),
                "grid": to_value(&r.grid),
            }),
            None => Value::Null,
        },
    );
    report.insert("certificate".into(), certificate.as_ref().map_or(Value::Null, to_value));
    report.insert(
        "bound".into(),
        match (&certificate, bound) {
            (Some(c), Some(b)) => json!({
                "formula": "minkowski_bound",
                "value": b,
                "m": c.m,
                "chi_star": c.chi_star,
                "varrho": c.varrho,
                "envelope": { "formula": "envelope", "ln_K": envelope_ln_constant(c), "chi_star": c.chi_star },
            }),
            (Some(c), None) => json!({
                "formula": "envelope",
                "value": Value::Null,
                "note": "the dimension bound is stated over the reals",
                "envelope": { "formula": "envelope", "ln_K": envelope_ln_constant(c), "chi_star": c.chi_star },
            }),
            _ => Value::Null,
        },
    );
    if let Some(b) = &spec.budget {
        let eta = nonlinear_eta(b).map_err(growth_err)?;
        report.insert("budget".into(), json!({ "inputs": to_value(b), "formula": "eta", "eta": to_value(&eta) }));
    }

    if let Input::System { system, .. } = &spec.input {
        let cross = cross_check(spec, system, bound, &mut violations, &mut artifacts)?;
        report.insert("cross_check".into(), cross);
    }

    report.insert("violations".into(), json!(violations));
    report.insert(
        "status".into(),
        json!(if violations.is_empty() { "pass" } else { "violation" }),
    );
    let report = Value::Object(report);

    let mut files = Vec::new();
    if let Some(c) = &certificate {
        files.push((spec.outputs.certificate.clone(), pretty(&to_value(c))));
    }
    files.push((
        spec.outputs.bound_report.clone(),
        bound_csv(&ladder, &rho_inf, search.as_ref(), certificate.as_ref(), bound),
    ));
    files.push((spec.outputs.report.clone(), pretty(&report)));
    files.extend(artifacts);

    Ok(PipelineOutcome {
        report,
        artifacts: files,
        violations,
    })
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cross_check(
    spec: &PipelineSpec,
    system: &DelaySystem,
    bound: Option<f64>,
    violations: &mut Vec<String>,
    artifacts: &mut Vec<(String, String)>,
) -> Result<Value, CliError> {
    let sim = &spec.simulation;
    let tau = system.tau();
    let d = system.d();
    let mut out = serde_json::Map::new();

    let lipschitz = match system.validate_on(0.0, sim.horizon, spec.tolerances.lipschitz_samples) {
        Ok(c) => to_value(&c),
        Err(e @ (DdeError::MajorantViolated { .. } | DdeError::DelayOutOfRange { .. })) => {
            violations.push(format!("lipschitz: {e}"));
            json!({ "error": e.to_string() })
        }
        Err(e) => return Err(dde_err(e)),
    };
    out.insert("lipschitz".into(), lipschitz);

    let initial = sim.initial.clone().unwrap_or_else(|| vec![1.0; d]);
    let phi_norm = system.norm().vector(&initial);
    let traj = integrate(system, &InitialSegment::Constant(initial.clone()), 0.0, sim.horizon, sim.step)
        .map_err(dde_err)?;
    artifacts.push((spec.outputs.trajectory.clone(), traj.to_csv()));
    out.insert(
        "simulation".into(),
        json!({
            "initial": initial,
            "horizon": sim.horizon,
            "step": sim.step,
            "nodes": traj.len(),
            "final_norm": system.norm().vector(traj.node(traj.len() - 1)),
            "sup_norm": traj.sup_norm_on(-tau, sim.horizon),
            "trajectory": spec.outputs.trajectory,
        }),
    );

    let mys = myshkis_check(&traj, tau, sim.level, phi_norm, spec.tolerances.zero_tolerance).map_err(dde_err)?;
    if mys.lemma.is_fail() || mys.ladder.is_fail() {
        violations.push(format!("myshkis: decay bound exceeded at level {}", sim.level));
    }
    out.insert("myshkis".into(), to_value(&mys));

    let opts = RestrictedNormOptions {
        samples: sim.samples,
        h: sim.restricted_step,
        seed: spec.seed,
        indexing: ConstraintIndexing::Ladder,
        allowance: spec.tolerances.allowance,
        t0: 0.0,
    };
    let restricted = match restricted_norm_estimate(system, sim.level, &opts) {
        Ok(r) => {
            if !r.within_allowance {
                violations.push(format!(
                    "restricted_norm: estimate {} exceeds rho_{} = {} by more than {}",
                    r.estimate, r.level, r.reference, r.allowance
                ));
            }
            to_value(&r)
        }
        Err(e @ (DdeError::InvalidParameter(_) | DdeError::Coefficient(_))) => {
            json!({ "skipped": e.to_string() })
        }
        Err(e) => return Err(dde_err(e)),
    };
    out.insert("restricted_norm".into(), restricted);

    let cloud = embed_trajectory(&traj, tau, sim.embedding_dim, tau, sim.horizon, sim.embedding_samples)
        .map_err(|e| CliError::module("boxdim", e))?;
    let (lo, hi) = cloud.bounding_box();
    let diam = lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max);
    let boxdim = if diam > 0.0 {
        let eps_max = diam / 2.0;
        let eps_min = eps_max / 2f64.powi(sim.box_scales as i32 - 1);
        let fit = minkowski_dim(&cloud, eps_min, eps_max).map_err(|e| CliError::module("boxdim", e))?;
        json!({
            "window": tau,
            "dim": sim.embedding_dim,
            "points": cloud.len(),
            "fit": to_value(&fit),
            "bound": bound,
            "within_bound": bound.map(|b| fit.estimate <= b + 0.1),
            "note": "a finite trajectory segment need not lie on the attractor; the comparison is informational",
        })
    } else {
        json!({ "points": cloud.len(), "fit": Value::Null, "note": "the embedded cloud is a single point" })
    };
    out.insert("boxdim".into(), boxdim);
    Ok(Value::Object(out))
}

/// One table: the `rho_inf` profile, the search grid and the final bound.
pub fn bound_csv(
    ladder: &CompactnessLadder,
    rho: &dimbound_core::growth::RhoInfinity,
    search: Option<&SearchReport>,
    cert: Option<&GrowthCertificate>,
    bound: Option<f64>,
) -> String {
    let mut s = String::from("section,s,k_s,p,m,value,aux\n");
    for pt in &rho.profile {
        let _ = writeln!(s, "profile,{},{},,,{},{}", pt.s, pt.k_s, pt.value, pt.normalized);
    }
    if let Some(r) = search {
        for cell in &r.grid {
            let k = ladder.rung(cell.s).map(|(k, _)| k).unwrap_or(0);
            let _ = writeln!(
                s,
                "grid,{},{},{},{},{},{}",
                cell.s, k, cell.p, cell.m, cell.xi_root, cell.below_varpi
            );
        }
    }
    if let Some(c) = cert {
        let k = ladder.rung(c.s).map(|(k, _)| k).unwrap_or(0);
        let value = bound.map_or(String::new(), |b| b.to_string());
        let _ = writeln!(s, "bound,{},{},{},{},{},{}", c.s, k, c.p, c.m, value, c.chi_star);
    }
    s
}
