use std::fmt;
use std::path::PathBuf;

use branched::models::{GaussianModel, ModelSpec, Potential};
use branched::quantum::{BoundaryCondition, PotentialProfile};
use branched::BranchId;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Classical,
    Quantum,
    Deform,
    Branches,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Classical => "classical",
            Command::Quantum => "quantum",
            Command::Deform => "deform",
            Command::Branches => "branches",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

/// A validation failure with the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum: Option<QuantumParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deform: Option<DeformParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<BranchesParams>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            formats: default_formats(),
        }
    }
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalParams {
    #[serde(default = "default_susy_energies")]
    pub energies: Vec<f64>,
    /// One SVG stroke color per energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<Vec<String>>,
    /// Contour sampling nodes per axis.
    #[serde(default = "default_contour_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub trajectories: Vec<TrajectorySeed>,
}

impl Default for ClassicalParams {
    fn default() -> Self {
        Self {
            energies: default_susy_energies(),
            colors: None,
            grid_points: default_contour_points(),
            trajectories: Vec::new(),
        }
    }
}

fn default_susy_energies() -> Vec<f64> {
    vec![-0.5, 0.0, 0.5, 1.0, 1.2, 1.4]
}

fn default_contour_points() -> usize {
    241
}

/// Start of an integrated trajectory: `x ≥ 0` is solved from the energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySeed {
    pub energy: f64,
    pub branch: BranchId,
    pub p: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
}

fn default_t_max() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumParams {
    #[serde(default = "default_profile")]
    pub profile: PotentialProfile<f64>,
    #[serde(default = "default_bc")]
    pub bc: BoundaryCondition<f64>,
    /// Solve one level in this bracket.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    /// Or scan every level up to this energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

impl Default for QuantumParams {
    fn default() -> Self {
        Self {
            profile: default_profile(),
            bc: default_bc(),
            bracket: None,
            e_max: None,
            p_max: None,
            grid_points: default_grid_points(),
        }
    }
}

fn default_profile() -> PotentialProfile<f64> {
    PotentialProfile::SusyMinus
}

fn default_bc() -> BoundaryCondition<f64> {
    BoundaryCondition::Dirichlet
}

fn default_grid_points() -> usize {
    4001
}

pub const DEFAULT_BRACKET: [f64; 2] = [1.5, 2.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformParams {
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    #[serde(default = "default_deform_p_max")]
    pub p_max: f64,
    #[serde(default = "default_deform_points")]
    pub points: usize,
}

impl Default for DeformParams {
    fn default() -> Self {
        Self {
            kappas: default_kappas(),
            p_max: default_deform_p_max(),
            points: default_deform_points(),
        }
    }
}

fn default_kappas() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.125]
}

fn default_deform_p_max() -> f64 {
    6.0
}

fn default_deform_points() -> usize {
    600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchesParams {
    #[serde(default = "default_branch_points")]
    pub points: usize,
    /// Velocity half-range of the kinetic curve, in units of `√(C/m)` for the
    /// gaussian model and absolute for the family.
    #[serde(default = "default_v_range")]
    pub v_range: f64,
    /// Momentum window for the family branches.
    #[serde(default = "default_family_p")]
    pub p_range: [f64; 2],
}

impl Default for BranchesParams {
    fn default() -> Self {
        Self {
            points: default_branch_points(),
            v_range: default_v_range(),
            p_range: default_family_p(),
        }
    }
}

fn default_branch_points() -> usize {
    801
}

fn default_v_range() -> f64 {
    4.0
}

fn default_family_p() -> [f64; 2] {
    [0.02, 4.0]
}

pub fn default_model(command: Command) -> ModelSpec<f64> {
    match command {
        Command::Branches => ModelSpec::Gaussian(GaussianModel {
            mass: 1.0,
            scale: 1.0,
            potential: Potential::Zero,
        }),
        _ => ModelSpec::susy(),
    }
}

/// Fully resolved run: command fixed, defaults filled in, overrides applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub command: Command,
    pub model: ModelSpec<f64>,
    pub task: Task,
    pub output: OutputSpec,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Task {
    Classical(ClassicalParams),
    Quantum(QuantumParams),
    Deform(DeformParams),
    Branches(BranchesParams),
}

pub struct Overrides {
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
    pub tol: Option<f64>,
}

pub fn parse(text: &str) -> Result<RunConfig, ValidationError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { String::new() } else { path };
        ValidationError::new(path, e.into_inner().to_string())
    })
}

fn default_tol(command: Command) -> f64 {
    match command {
        Command::Quantum => 1e-7,
        _ => 1e-10,
    }
}

fn finite(path: &str, v: f64) -> Result<(), ValidationError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ValidationError::new(
            path,
            format!("must be finite, got {v}"),
        ))
    }
}

/// Resolves defaults and overrides, then checks every parameter.
pub fn resolve(
    command: Command,
    config: RunConfig,
    overrides: Overrides,
) -> Result<Resolved, ValidationError> {
    let model = config.model.unwrap_or_else(|| default_model(command));
    model
        .validate()
        .map_err(|e| ValidationError::new("model", e.to_string()))?;

    let mut output = config.output;
    if let Some(dir) = overrides.out {
        output.directory = dir;
    }
    if let Some(formats) = overrides.formats {
        output.formats = formats;
    }
    output.formats.sort();
    output.formats.dedup();
    if output.formats.is_empty() {
        return Err(ValidationError::new(
            "output.formats",
            "at least one format is required",
        ));
    }
    if output.directory.as_os_str().is_empty() {
        return Err(ValidationError::new(
            "output.directory",
            "must not be empty",
        ));
    }

    let tol = overrides
        .tol
        .or(config.tol)
        .unwrap_or_else(|| default_tol(command));
    if !(tol > 0.0 && tol < 1.0) {
        return Err(ValidationError::new(
            "tol",
            format!("must lie in (0, 1), got {tol}"),
        ));
    }

    let task = match command {
        Command::Classical => Task::Classical(check_classical(
            &model,
            config.classical.unwrap_or_default(),
        )?),
        Command::Quantum => Task::Quantum(check_quantum(config.quantum.unwrap_or_default())?),
        Command::Deform => Task::Deform(check_deform(config.deform.unwrap_or_default())?),
        Command::Branches => {
            Task::Branches(check_branches(&model, config.branches.unwrap_or_default())?)
        }
    };
    Ok(Resolved {
        command,
        model,
        task,
        output,
        tol,
    })
}

fn check_classical(
    model: &ModelSpec<f64>,
    p: ClassicalParams,
) -> Result<ClassicalParams, ValidationError> {
    if p.energies.is_empty() {
        return Err(ValidationError::new(
            "classical.energies",
            "at least one energy is required",
        ));
    }
    for (i, e) in p.energies.iter().enumerate() {
        finite(&format!("classical.energies[{i}]"), *e)?;
    }
    if let Some(colors) = &p.colors {
        if colors.len() != p.energies.len() {
            return Err(ValidationError::new(
                "classical.colors",
                format!(
                    "needs one color per energy ({}), got {}",
                    p.energies.len(),
                    colors.len()
                ),
            ));
        }
        for (i, c) in colors.iter().enumerate() {
            if c.is_empty() || !c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '#') {
                return Err(ValidationError::new(
                    format!("classical.colors[{i}]"),
                    format!("not a color: {c:?}"),
                ));
            }
        }
    }
    if !(2..=4001).contains(&p.grid_points) {
        return Err(ValidationError::new(
            "classical.grid_points",
            "must lie in [2, 4001]",
        ));
    }
    let branches = model.branches();
    for (i, s) in p.trajectories.iter().enumerate() {
        let path = format!("classical.trajectories[{i}]");
        finite(&format!("{path}.energy"), s.energy)?;
        finite(&format!("{path}.p"), s.p)?;
        if !(s.t_max > 0.0 && s.t_max.is_finite()) {
            return Err(ValidationError::new(
                format!("{path}.t_max"),
                "must be positive and finite",
            ));
        }
        if !branches.contains(&s.branch) {
            return Err(ValidationError::new(
                format!("{path}.branch"),
                format!("branch {} does not belong to the model", s.branch),
            ));
        }
    }
    Ok(p)
}

fn check_quantum(mut q: QuantumParams) -> Result<QuantumParams, ValidationError> {
    q.profile
        .validate()
        .map_err(|e| ValidationError::new("quantum.profile", e.to_string()))?;
    if let BoundaryCondition::Robin { kappa } = q.bc {
        finite("quantum.bc.kappa", kappa)?;
    }
    match (q.bracket, q.e_max) {
        (Some(_), Some(_)) => {
            return Err(ValidationError::new(
                "quantum",
                "give either bracket or e_max, not both",
            ));
        }
        (None, None) => q.bracket = Some(DEFAULT_BRACKET),
        _ => {}
    }
    if let Some([lo, hi]) = q.bracket {
        finite("quantum.bracket[0]", lo)?;
        finite("quantum.bracket[1]", hi)?;
        if lo >= hi {
            return Err(ValidationError::new(
                "quantum.bracket",
                format!("needs lo < hi, got [{lo}, {hi}]"),
            ));
        }
    }
    if let Some(e) = q.e_max {
        finite("quantum.e_max", e)?;
    }
    if let Some(p) = q.p_max {
        let top = q.bracket.map(|b| b[1]).or(q.e_max).unwrap_or(0.0);
        if !(p.is_finite() && p > top.max(0.0)) {
            return Err(ValidationError::new(
                "quantum.p_max",
                format!("must exceed the largest energy {top}"),
            ));
        }
    }
    if !(5..=200_001).contains(&q.grid_points) {
        return Err(ValidationError::new(
            "quantum.grid_points",
            "must lie in [5, 200001]",
        ));
    }
    Ok(q)
}

fn check_deform(d: DeformParams) -> Result<DeformParams, ValidationError> {
    if d.kappas.is_empty() {
        return Err(ValidationError::new(
            "deform.kappas",
            "at least one kappa is required",
        ));
    }
    for (i, k) in d.kappas.iter().enumerate() {
        if !(k.is_finite() && *k >= 0.0) {
            return Err(ValidationError::new(
                format!("deform.kappas[{i}]"),
                format!("must be finite and ≥ 0, got {k}"),
            ));
        }
    }
    if !(d.p_max.is_finite() && d.p_max > 0.0) {
        return Err(ValidationError::new(
            "deform.p_max",
            "must be positive and finite",
        ));
    }
    if !(2..=100_000).contains(&d.points) {
        return Err(ValidationError::new(
            "deform.points",
            "must lie in [2, 100000]",
        ));
    }
    Ok(d)
}

fn check_branches(
    model: &ModelSpec<f64>,
    b: BranchesParams,
) -> Result<BranchesParams, ValidationError> {
    if !(3..=100_000).contains(&b.points) {
        return Err(ValidationError::new(
            "branches.points",
            "must lie in [3, 100000]",
        ));
    }
    if !(b.v_range.is_finite() && b.v_range > 0.0) {
        return Err(ValidationError::new(
            "branches.v_range",
            "must be positive and finite",
        ));
    }
    if let ModelSpec::Family(_) = model {
        let [lo, hi] = b.p_range;
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
            return Err(ValidationError::new(
                "branches.p_range",
                "needs 0 < lo < hi",
            ));
        }
    }
    Ok(b)
}
