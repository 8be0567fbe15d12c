//! Pipeline specs: parsing, defaults and validation.

use std::path::{Path, PathBuf};

use dimbound_core::dde::{DelaySystem, DelaySystemRepr};
use dimbound_core::growth::{BudgetInputs, CompactnessLadder, SearchLimits};
use serde::{Deserialize, Serialize};

use crate::error::{from_json, read_file, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    #[serde(default = "default_p_max")]
    pub p_max: u64,
    #[serde(default = "default_s_max")]
    pub s_max: usize,
}

fn default_p_max() -> u64 {
    SearchLimits::default().p_max
}

fn default_s_max() -> usize {
    SearchLimits::default().s_max
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            p_max: default_p_max(),
            s_max: default_s_max(),
        }
    }
}

impl From<SearchSpec> for SearchLimits {
    fn from(s: SearchSpec) -> Self {
        SearchLimits {
            p_max: s.p_max,
            s_max: s.s_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "default_certificate")]
    pub certificate: String,
    #[serde(default = "default_bound_report")]
    pub bound_report: String,
    #[serde(default = "default_report")]
    pub report: String,
    #[serde(default = "default_trajectory")]
    pub trajectory: String,
}

fn default_certificate() -> String {
    "certificate.json".into()
}
fn default_bound_report() -> String {
    "bound_report.csv".into()
}
fn default_report() -> String {
    "report.json".into()
}
fn default_trajectory() -> String {
    "trajectory.csv".into()
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            certificate: default_certificate(),
            bound_report: default_bound_report(),
            report: default_report(),
            trajectory: default_trajectory(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_allowance")]
    pub allowance: f64,
    #[serde(default)]
    pub zero_tolerance: Option<f64>,
    #[serde(default = "default_lipschitz_samples")]
    pub lipschitz_samples: usize,
}

fn default_allowance() -> f64 {
    0.1
}
fn default_lipschitz_samples() -> usize {
    1000
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            allowance: default_allowance(),
            zero_tolerance: None,
            lipschitz_samples: default_lipschitz_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default = "default_level")]
    pub level: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_step")]
    pub restricted_step: f64,
    #[serde(default = "default_embedding_dim")]
    pub embedding_dim: usize,
    #[serde(default = "default_embedding_samples")]
    pub embedding_samples: usize,
    #[serde(default = "default_box_scales")]
    pub box_scales: usize,
}

fn default_horizon() -> f64 {
    20.0
}
fn default_step() -> f64 {
    1e-2
}
fn default_level() -> usize {
    2
}
fn default_samples() -> usize {
    100
}
fn default_embedding_dim() -> usize {
    4
}
fn default_embedding_samples() -> usize {
    20_000
}
fn default_box_scales() -> usize {
    8
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            step: default_step(),
            initial: None,
            level: default_level(),
            samples: default_samples(),
            restricted_step: default_step(),
            embedding_dim: default_embedding_dim(),
            embedding_samples: default_embedding_samples(),
            box_scales: default_box_scales(),
        }
    }
}

/// The file as written, before defaults are checked against each other.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpecFile {
    #[serde(default)]
    pub ladder: Option<String>,
    #[serde(default)]
    pub system: Option<String>,
    #[serde(default)]
    pub search: SearchSpec,
    pub varpi: f64,
    #[serde(default = "one")]
    pub varrho: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub iota: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget: Option<BudgetInputs>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub simulation: SimulationSpec,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
pub enum Input {
    Ladder {
        file: String,
        ladder: CompactnessLadder,
    },
    System {
        file: String,
        repr: DelaySystemRepr,
        system: DelaySystem,
    },
}

impl Input {
    pub fn file(&self) -> &str {
        match self {
            Input::Ladder { file, .. } | Input::System { file, .. } => file,
        }
    }
}

/// A validated spec with its inputs loaded.
#[derive(Debug, Clone)]
pub struct PipelineSpec {
    pub input: Input,
    pub search: SearchSpec,
    pub varpi: f64,
    pub varrho: f64,
    pub kappa: f64,
    pub c: f64,
    pub iota: Option<f64>,
    pub seed: u64,
    pub budget: Option<BudgetInputs>,
    pub outputs: Outputs,
    pub tolerances: Tolerances,
    pub simulation: SimulationSpec,
}

pub fn parse_spec(path: &Path) -> Result<PipelineSpec, CliError> {
    let text = read_file(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_spec_str(&text, &path.display().to_string(), &|rel| read_file(&base.join(rel)))
}

/// Parses a spec whose referenced files are fetched through `load`.
pub fn parse_spec_str(
    text: &str,
    name: &str,
    load: &dyn Fn(&str) -> Result<String, CliError>,
) -> Result<PipelineSpec, CliError> {
    let raw: PipelineSpecFile = from_json(text, name)?;
    validate(&raw, name)?;
    let input = match (&raw.ladder, &raw.system) {
        (Some(file), None) => Input::Ladder {
            file: file.clone(),
            ladder: load_ladder(&load(file)?, file)?,
        },
        (None, Some(file)) => {
            let (repr, system) = load_system(&load(file)?, file)?;
            Input::System {
                file: file.clone(),
                repr,
                system,
            }
        }
        (Some(_), Some(_)) => {
            return Err(CliError::field(name, "$", "give either `ladder` or `system`, not both"));
        }
        (None, None) => return Err(CliError::field(name, "$", "missing input: `ladder` or `system`")),
    };
    if let (Input::System { system, .. }, Some(init)) = (&input, &raw.simulation.initial) {
        if init.len() != system.d() {
            return Err(CliError::field(
                name,
                "$.simulation.initial",
                format!("has {} entries, the system has d = {}", init.len(), system.d()),
            ));
        }
    }
    Ok(PipelineSpec {
        input,
        search: raw.search,
        varpi: raw.varpi,
        varrho: raw.varrho,
        kappa: raw.kappa,
        c: raw.c,
        iota: raw.iota,
        seed: raw.seed,
        budget: raw.budget,
        outputs: raw.outputs,
        tolerances: raw.tolerances,
        simulation: raw.simulation,
    })
}

fn validate(raw: &PipelineSpecFile, name: &str) -> Result<(), CliError> {
    let positive = |v: f64, field: &str| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(CliError::field(name, field, format!("must be positive, got {v}")))
        }
    };
    positive(raw.varpi, "$.varpi")?;
    positive(raw.varrho, "$.varrho")?;
    positive(raw.kappa, "$.kappa")?;
    positive(raw.c, "$.c")?;
    if raw.varrho > 1.0 {
        return Err(CliError::field(name, "$.varrho", format!("must not exceed 1, got {}", raw.varrho)));
    }
    if raw.kappa > 1.0 {
        return Err(CliError::field(name, "$.kappa", format!("must not exceed 1, got {}", raw.kappa)));
    }
    if let Some(i) = raw.iota {
        positive(i, "$.iota")?;
    }
    if raw.search.p_max == 0 {
        return Err(CliError::field(name, "$.search.p_max", "must be at least 1"));
    }
    if raw.search.s_max < 2 {
        return Err(CliError::field(name, "$.search.s_max", "must be at least 2"));
    }
    if let Some(b) = &raw.budget {
        b.validate().map_err(|e| CliError::field(name, "$.budget", e.to_string()))?;
    }
    if !(raw.tolerances.allowance >= 0.0) {
        return Err(CliError::field(name, "$.tolerances.allowance", "must be nonnegative"));
    }
    let sim = &raw.simulation;
    positive(sim.horizon, "$.simulation.horizon")?;
    positive(sim.step, "$.simulation.step")?;
    positive(sim.restricted_step, "$.simulation.restricted_step")?;
    if sim.samples < 100 {
        return Err(CliError::field(name, "$.simulation.samples", "must be at least 100"));
    }
    if sim.embedding_dim == 0 {
        return Err(CliError::field(name, "$.simulation.embedding_dim", "must be at least 1"));
    }
    if sim.box_scales < 3 {
        return Err(CliError::field(name, "$.simulation.box_scales", "must be at least 3"));
    }
    Ok(())
}

pub fn load_ladder(text: &str, file: &str) -> Result<CompactnessLadder, CliError> {
    from_json(text, file)
}

pub fn load_system(text: &str, file: &str) -> Result<(DelaySystemRepr, DelaySystem), CliError> {
    let repr: DelaySystemRepr = from_json(text, file)?;
    let system = DelaySystem::try_from(repr.clone()).map_err(|e| CliError::module("dde", format!("{file}: {e}")))?;
    Ok((repr, system))
}

pub fn load_system_file(path: &Path) -> Result<(DelaySystemRepr, DelaySystem), CliError> {
    load_system(&read_file(path)?, &path.display().to_string())
}

pub fn load_ladder_file(path: &Path) -> Result<CompactnessLadder, CliError> {
    load_ladder(&read_file(path)?, &path.display().to_string())
}

/// `dir/name`, or `name` when no directory is given.
pub fn output_path(dir: Option<&Path>, name: &str) -> PathBuf {
    match dir {
        Some(d) => d.join(name),
        None => PathBuf::from(name),
    }
}
