//! Argument parsing and subcommand dispatch for the `dimbound` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dimbound_core::boxdim::{minkowski_dim, Metric, PointCloud};
use dimbound_core::dde::{
    integrate, ladder_from_delay, rescale_time, restricted_norm_estimate, stability_cap, ConstraintIndexing,
    DdeError, InitialSegment, NonlinearSystem, RestrictedNormOptions, VariationalFit,
};
use dimbound_core::growth::delay_ladder;
use serde_json::json;

use crate::error::{read_file, write_file, CliError, EXIT_USAGE, EXIT_VIOLATION};
use crate::pipeline::{pretty, run_pipeline};
use crate::spec::{
    load_ladder_file, load_system_file, output_path, parse_spec, Input, Outputs, PipelineSpec, SearchSpec,
    SimulationSpec, Tolerances,
};
use crate::verify::run_checks;

pub const SCHEMA_HELP: &str = concat!(
    "Exit status: 0 on success, 2 when a checked property fails, 1 on a usage error.\n\n",
    "Pipeline spec schema (dimbound run):\n",
    include_str!("../../../schemas/pipeline.schema.json"),
    "\nDelay system schema (--system):\n",
    include_str!("../../../schemas/delay_system.schema.json"),
    "\nLadder schema (--ladder):\n",
    include_str!("../../../schemas/ladder.schema.json"),
);

#[derive(Debug, Parser)]
#[command(
    name = "dimbound",
    version,
    about = "Dimension bounds from compactness ladders, with delay-equation cross-checks",
    after_long_help = SCHEMA_HELP
)]
pub struct Cli {
    /// Seed for every sampled quantity.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Override the command's tolerance (restricted-norm allowance, rescale match).
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Directory for output files (default: the working directory).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dyadic ladder of a delay equation.
    Ladder(LadderArgs),
    /// Search (m, p), write the certificate and the dimension bound.
    Bound(BoundArgs),
    /// Integrate a linear delay system from a constant initial segment.
    Simulate(SimulateArgs),
    /// Rescale time so the Lipschitz majorant becomes 1.
    Rescale(RescaleArgs),
    /// Estimate restricted norms of the delay-interval solution operator.
    RestrictedNorm(RestrictedArgs),
    /// Convergence of the first-order remainder for a nonlinear model.
    Variational(VariationalArgs),
    /// Box-counting dimension of a point cloud (CSV rows).
    Boxdim(BoxdimArgs),
    /// Run the property suite.
    Verify(VerifyArgs),
    /// Run a pipeline spec end to end.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct LadderArgs {
    /// Delay system file; alternatively give --tau and --d.
    #[arg(long, conflicts_with_all = ["tau", "d"])]
    pub system: Option<PathBuf>,
    #[arg(long, requires = "d")]
    pub tau: Option<f64>,
    #[arg(long, requires = "tau")]
    pub d: Option<usize>,
    /// Rungs to list.
    #[arg(long, default_value_t = 8)]
    pub levels: usize,
    /// Lipschitz constant M for the stability cap (smallest i with rho_i M < 1).
    #[arg(long)]
    pub lipschitz: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub ladder: PathBuf,
    #[arg(long)]
    pub varpi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub varrho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 8)]
    pub p_max: u64,
    #[arg(long, default_value_t = 12)]
    pub s_max: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,
    /// Constant initial segment, comma separated (default: all ones).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub initial: Option<Vec<f64>>,
    /// Grid points for the Lipschitz check.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct RescaleArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub horizon: f64,
    /// Grid points for the majorant check.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Also integrate both systems at this step and compare x~(s) with x(g(s)).
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum IndexingArg {
    Ladder,
    Lemma,
}

#[derive(Debug, Args)]
pub struct RestrictedArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub level: usize,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    /// Hat-basis resolution of the initial segment.
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = IndexingArg::Ladder)]
    pub indexing: IndexingArg,
    /// Start of the delay interval.
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Model {
    /// x'(t) = x(t - 1) (1 - x(t)).
    Logistic,
}

#[derive(Debug, Args)]
pub struct VariationalArgs {
    #[arg(long, value_enum, default_value_t = Model::Logistic)]
    pub model: Model,
    #[arg(long, default_value_t = 0.5)]
    pub initial: f64,
    #[arg(long, default_value_t = 5.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
    pub perturbations: Vec<f64>,
    #[arg(long, default_value_t = 0.9)]
    pub min_slope: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Sup,
    Euclidean,
}

#[derive(Debug, Args)]
pub struct BoxdimArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub eps_min: f64,
    #[arg(long)]
    pub eps_max: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Sup)]
    pub metric: MetricArg,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Criteria to run, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub spec: PathBuf,
}

/// Parses `args` and runs the command; returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(&cli, &mut buf));
    let _ = out.write_all(&buf);
    match result {
        Ok(violations) if violations.is_empty() => 0,
        Ok(violations) => {
            for v in violations {
                let _ = writeln!(err, "violation: {v}");
            }
            EXIT_VIOLATION
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

type Outcome = Result<Vec<String>, CliError>;

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Outcome {
    let dir = cli.output_dir.as_deref();
    match &cli.command {
        Command::Ladder(a) => ladder_cmd(a, dir, out),
        Command::Bound(a) => bound_cmd(a, cli, out),
        Command::Simulate(a) => simulate_cmd(a, dir, out),
        Command::Rescale(a) => rescale_cmd(a, cli.tolerance, dir, out),
        Command::RestrictedNorm(a) => restricted_cmd(a, cli, out),
        Command::Variational(a) => variational_cmd(a, dir, out),
        Command::Boxdim(a) => boxdim_cmd(a, dir, out),
        Command::Verify(a) => verify_cmd(a, cli.seed.unwrap_or(0), out),
        Command::Run(a) => run_cmd(a, cli, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn dde(e: DdeError) -> CliError {
    CliError::module("dde", e)
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--{name} must be positive, got {v}")))
    }
}

fn ladder_cmd(a: &LadderArgs, dir: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let (tau, d) = match (&a.system, a.tau, a.d) {
        (Some(path), _, _) => {
            let (_, sys) = load_system_file(path)?;
            (sys.tau(), sys.d())
        }
        (None, Some(tau), Some(d)) => (tau, d),
        _ => return Err(CliError::Usage("give --system or both --tau and --d".into())),
    };
    let ladder = ladder_from_delay(tau, d).map_err(dde)?;
    let rungs: Vec<_> = (0..a.levels)
        .filter_map(|i| ladder.rung(i).map(|(k, rho)| json!({ "i": i, "k": k, "rho": rho })))
        .collect();
    let cap = match a.lipschitz {
        Some(m) => Some(stability_cap(m, &ladder).map_err(dde)?),
        None => None,
    };
    write_file(&output_path(dir, "ladder.json"), &pretty(&serde_json::to_value(&ladder).unwrap()))?;
    let report = json!({ "tau": tau, "d": d, "ladder": ladder, "rungs": rungs, "stability_cap": cap });
    emit(out, &pretty(&report))?;
    Ok(Vec::new())
}

fn ladder_spec(a: &BoundArgs, seed: u64) -> Result<PipelineSpec, CliError> {
    let ladder = load_ladder_file(&a.ladder)?;
    let bad = |f: &str, v: f64| CliError::Usage(format!("--{f} out of range: {v}"));
    if !(a.varpi > 0.0) {
        return Err(bad("varpi", a.varpi));
    }
    if !(a.varrho > 0.0 && a.varrho <= 1.0) {
        return Err(bad("varrho", a.varrho));
    }
    if !(a.kappa > 0.0 && a.kappa <= 1.0) {
        return Err(bad("kappa", a.kappa));
    }
    if !(a.c > 0.0) {
        return Err(bad("c", a.c));
    }
    if a.p_max == 0 || a.s_max < 2 {
        return Err(CliError::Usage("need --p-max >= 1 and --s-max >= 2".into()));
    }
    Ok(PipelineSpec {
        input: Input::Ladder {
            file: a.ladder.display().to_string(),
            ladder,
        },
        search: SearchSpec {
            p_max: a.p_max,
            s_max: a.s_max,
        },
        varpi: a.varpi,
        varrho: a.varrho,
        kappa: a.kappa,
        c: a.c,
        iota: None,
        seed,
        budget: None,
        outputs: Outputs::default(),
        tolerances: Tolerances::default(),
        simulation: SimulationSpec::default(),
    })
}

fn bound_cmd(a: &BoundArgs, cli: &Cli, out: &mut dyn Write) -> Outcome {
    let spec = ladder_spec(a, cli.seed.unwrap_or(0))?;
    let outcome = run_pipeline(&spec)?;
    outcome.write(cli.output_dir.as_deref())?;
    let summary = json!({
        "certificate": outcome.report["certificate"].get("m").map(|_| json!({
            "m": outcome.report["certificate"]["m"],
            "p": outcome.report["certificate"]["p"],
            "chi_star": outcome.report["certificate"]["chi_star"],
        })),
        "bound": outcome.report["bound"],
        "status": outcome.report["status"],
    });
    emit(out, &pretty(&summary))?;
    Ok(outcome.violations)
}

fn simulate_cmd(a: &SimulateArgs, dir: Option<&Path>, out: &mut dyn Write) -> Outcome {
    check_positive("horizon", a.horizon)?;
    check_positive("step", a.step)?;
    let (_, sys) = load_system_file(&a.system)?;
    let initial = a.initial.clone().unwrap_or_else(|| vec![1.0; sys.d()]);
    if initial.len() != sys.d() {
        return Err(CliError::Usage(format!("--initial has {} entries, d = {}", initial.len(), sys.d())));
    }
    let mut violations = Vec::new();
    let lipschitz = match sys.validate_on(0.0, a.horizon, a.samples) {
        Ok(c) => serde_json::to_value(c).unwrap(),
        Err(e @ (DdeError::MajorantViolated { .. } | DdeError::DelayOutOfRange { .. })) => {
            violations.push(e.to_string());
            json!({ "error": e.to_string() })
        }
        Err(e) => return Err(dde(e)),
    };
    let tr = integrate(&sys, &InitialSegment::Constant(initial.clone()), 0.0, a.horizon, a.step).map_err(dde)?;
    let path = output_path(dir, "trajectory.csv");
    write_file(&path, &tr.to_csv())?;
    let report = json!({
        "trajectory": path.display().to_string(),
        "nodes": tr.len(),
        "t_end": tr.t_end(),
        "final": tr.node(tr.len() - 1),
        "sup_norm": tr.sup_norm_on(-sys.tau(), a.horizon),
        "lipschitz": lipschitz,
    });
    emit(out, &pretty(&report))?;
    Ok(violations)
}

fn rescale_cmd(a: &RescaleArgs, tolerance: Option<f64>, dir: Option<&Path>, out: &mut dyn Write) -> Outcome {
    check_positive("horizon", a.horizon)?;
    let (_, sys) = load_system_file(&a.system)?;
    let rs = rescale_time(&sys, a.horizon).map_err(dde)?;
    let s_end = rs.map.f(a.horizon);
    let sup = rs.majorant_sup(0.0, s_end.max(rs.r), a.samples).map_err(dde)?;
    let mut violations = Vec::new();
    if sup > 1.0 + 1e-12 {
        violations.push(format!("rescaled majorant reaches {sup} > 1"));
    }
    let tol = tolerance.unwrap_or(1e-4);
    let comparison = match a.step {
        Some(h) if s_end > rs.r => {
            check_positive("step", h)?;
            let phi = InitialSegment::Constant(vec![1.0; sys.d()]);
            let orig = Arc::new(integrate(&sys, &phi, 0.0, a.horizon + sys.tau(), h).map_err(dde)?);
            let hist = rs.history_from(orig.clone()).map_err(dde)?;
            let steps = (rs.r / h).ceil();
            let tr = integrate(&rs.system, &hist, rs.r, s_end, rs.r / steps).map_err(dde)?;
            let norm = sys.norm();
            let mut worst: f64 = 0.0;
            for k in 0..=1000 {
                let s = rs.r + (s_end - rs.r) * k as f64 / 1000.0;
                let a = tr.eval(s).map_err(dde)?;
                let b = rs.compose(&orig, s).map_err(dde)?;
                let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                worst = worst.max(norm.vector(&diff));
            }
            if worst > tol {
                violations.push(format!("rescaled solution differs from x(g(s)) by {worst} > {tol}"));
            }
            Some(json!({ "max_difference": worst, "tolerance": tol, "step": h }))
        }
        _ => None,
    };
    let report = json!({
        "r": rs.r,
        "horizon": a.horizon,
        "f_horizon": s_end,
        "majorant_sup": sup,
        "comparison": comparison,
    });
    let text = pretty(&report);
    write_file(&output_path(dir, "rescale.json"), &text)?;
    emit(out, &text)?;
    Ok(violations)
}

fn restricted_cmd(a: &RestrictedArgs, cli: &Cli, out: &mut dyn Write) -> Outcome {
    let (_, sys) = load_system_file(&a.system)?;
    let opts = RestrictedNormOptions {
        samples: a.samples,
        h: a.step,
        seed: cli.seed.unwrap_or(0),
        indexing: match a.indexing {
            IndexingArg::Ladder => ConstraintIndexing::Ladder,
            IndexingArg::Lemma => ConstraintIndexing::Lemma,
        },
        allowance: cli.tolerance.unwrap_or(0.1),
        t0: a.t0,
    };
    let r = restricted_norm_estimate(&sys, a.level, &opts).map_err(dde)?;
    let mut violations = Vec::new();
    if !r.within_allowance {
        violations.push(format!(
            "estimate {} exceeds the reference {} by more than {}",
            r.estimate, r.reference, r.allowance
        ));
    }
    let text = pretty(&serde_json::to_value(&r).unwrap());
    write_file(&output_path(cli.output_dir.as_deref(), "restricted_norm.json"), &text)?;
    emit(out, &text)?;
    Ok(violations)
}

fn variational_cmd(a: &VariationalArgs, dir: Option<&Path>, out: &mut dyn Write) -> Outcome {
    check_positive("horizon", a.horizon)?;
    check_positive("step", a.step)?;
    let sys = match a.model {
        Model::Logistic => NonlinearSystem::logistic(),
    };
    let phi = InitialSegment::Constant(vec![a.initial]);
    let xi = InitialSegment::function(|s| vec![1.0 + s]);
    let fit = VariationalFit::measure(&sys, &phi, &xi, 0.0, a.horizon, a.step, &a.perturbations).map_err(dde)?;
    let mut violations = Vec::new();
    if !(fit.slope >= a.min_slope) {
        violations.push(format!("log-log slope {} below {}", fit.slope, a.min_slope));
    }
    let text = pretty(&json!({ "model": "logistic", "fit": fit, "min_slope": a.min_slope }));
    write_file(&output_path(dir, "variational.json"), &text)?;
    emit(out, &text)?;
    Ok(violations)
}

fn boxdim_cmd(a: &BoxdimArgs, dir: Option<&Path>, out: &mut dyn Write) -> Outcome {
    let metric = match a.metric {
        MetricArg::Sup => Metric::Sup,
        MetricArg::Euclidean => Metric::Euclidean,
    };
    let cloud = PointCloud::from_csv(&read_file(&a.points)?, metric).map_err(|e| CliError::module("boxdim", e))?;
    let fit = minkowski_dim(&cloud, a.eps_min, a.eps_max).map_err(|e| CliError::module("boxdim", e))?;
    let text = pretty(&json!({
        "points": cloud.len(),
        "dim": cloud.dim(),
        "metric": metric,
        "scales": fit.scales,
        "estimate": fit.estimate,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "reliable": fit.reliable,
    }));
    write_file(&output_path(dir, "boxdim.json"), &text)?;
    emit(out, &text)?;
    Ok(Vec::new())
}

fn verify_cmd(a: &VerifyArgs, seed: u64, out: &mut dyn Write) -> Outcome {
    let results = run_checks(seed, &a.only);
    let mut violations = Vec::new();
    for r in &results {
        emit(out, &format!("{}\n", r.line()))?;
        if !(r.passed && r.within_time()) {
            violations.push(format!("criterion {} ({})", r.id, r.name));
        }
    }
    Ok(violations)
}

fn run_cmd(a: &RunArgs, cli: &Cli, out: &mut dyn Write) -> Outcome {
    let mut spec = parse_spec(&a.spec)?;
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    if let Some(t) = cli.tolerance {
        spec.tolerances.allowance = t;
    }
    let outcome = run_pipeline(&spec)?;
    let written = outcome.write(cli.output_dir.as_deref())?;
    for p in written {
        emit(out, &format!("wrote {}\n", p.display()))?;
    }
    emit(out, &format!("status: {}\n", outcome.report["status"].as_str().unwrap_or("?")))?;
    Ok(outcome.violations)
}

/// The dyadic ladder for `tau`, `d` as written by `dimbound ladder`.
pub fn delay_ladder_json(tau: f64, d: u64) -> Result<String, CliError> {
    let l = delay_ladder(tau, d).map_err(|e| CliError::module("growth-engine", e))?;
    Ok(pretty(&serde_json::to_value(&l).unwrap()))
}
