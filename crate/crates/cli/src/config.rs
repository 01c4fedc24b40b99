//! Run configuration: TOML text, dotted overrides, defaults and validation.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;

use abc_thermistor::fracops::{build_abc_weights, AbcWeights, FractionalOrder, TimeGrid, ALPHA_MAX};
use abc_thermistor::mesh::{BoundaryControl, GridSpec, SpaceGrid};
use abc_thermistor::optimize::{AdjointScheme, ArmijoOptions, OptimizerOptions};
use abc_thermistor::state::{ConductivityModel, ConductivitySpec, PicardOptions, ThermistorProblem};
use abc_thermistor::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Simulate,
    Optimize,
    Fbs,
    Verify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Optimize => "optimize",
            Mode::Fbs => "fbs",
            Mode::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSection {
    pub t_final: f64,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
}

fn default_n_steps() -> usize {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub alpha: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "default_conductivity")]
    pub conductivity: ConductivitySpec,
}

fn one() -> f64 {
    1.0
}

fn default_conductivity() -> ConductivitySpec {
    ConductivitySpec::Reference
}

/// `u₀` as a function of the first coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Constant {
        value: f64,
    },
    /// `mean + amplitude · cos(wavenumber · π x / L)`.
    Cosine {
        mean: f64,
        amplitude: f64,
        wavenumber: u32,
    },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSection {
    /// Constant starting control; defaults to `(lower + upper)/2`.
    #[serde(default)]
    pub initial: Option<f64>,
    #[serde(default = "default_lower")]
    pub lower: f64,
    #[serde(default = "default_upper")]
    pub upper: f64,
}

fn default_lower() -> f64 {
    0.1
}

fn default_upper() -> f64 {
    2.0
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            initial: None,
            lower: default_lower(),
            upper: default_upper(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_picard")]
    pub max_picard: usize,
}

fn default_tol() -> f64 {
    PicardOptions::default().tol
}

fn default_max_picard() -> usize {
    PicardOptions::default().max_picard
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_picard: default_max_picard(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmijoSection {
    #[serde(default = "one")]
    pub initial_step: f64,
    #[serde(default = "default_shrink")]
    pub shrink: f64,
    #[serde(default = "default_sufficient_decrease")]
    pub sufficient_decrease: f64,
    #[serde(default = "default_max_backtracks")]
    pub max_backtracks: usize,
}

fn default_shrink() -> f64 {
    ArmijoOptions::default().shrink
}

fn default_sufficient_decrease() -> f64 {
    ArmijoOptions::default().sufficient_decrease
}

fn default_max_backtracks() -> usize {
    ArmijoOptions::default().max_backtracks
}

impl Default for ArmijoSection {
    fn default() -> Self {
        let a = ArmijoOptions::default();
        Self {
            initial_step: a.initial_step,
            shrink: a.shrink,
            sufficient_decrease: a.sufficient_decrease,
            max_backtracks: a.max_backtracks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSection {
    #[serde(default = "default_tol_opt")]
    pub tol_opt: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub adjoint: AdjointScheme,
    #[serde(default)]
    pub armijo: ArmijoSection,
}

fn default_tol_opt() -> f64 {
    OptimizerOptions::default().tol_opt
}

fn default_max_iters() -> usize {
    OptimizerOptions::default().max_iters
}

fn default_omega() -> f64 {
    OptimizerOptions::default().omega
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            tol_opt: default_tol_opt(),
            max_iters: default_max_iters(),
            omega: default_omega(),
            adjoint: AdjointScheme::default(),
            armijo: ArmijoSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    /// Seed of the randomized checks in verify mode.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Backward Euler in place of the ABC derivative.
    #[serde(default)]
    pub classical: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seed() -> u64 {
    2024
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            classical: false,
            output_dir: default_output_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    pub grid: GridSpec,
    pub time: TimeSection,
    pub model: ModelSection,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Parses TOML text, applies `key=value` overrides and fills defaults.
/// Unknown keys are reported all at once. The result is not yet validated.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML: {e}")))?;
    for item in overrides {
        apply_override(&mut doc, item)?;
    }
    let mut unknown = BTreeSet::new();
    let value = toml::Value::Table(doc);
    let mut config: RunConfig = serde_ignored::deserialize(value, |path| {
        unknown.insert(path.to_string());
    })
    .map_err(|e| Error::Config(e.to_string()))?;
    if !unknown.is_empty() {
        let keys: Vec<_> = unknown.into_iter().collect();
        return Err(Error::Config(format!("unknown keys: {}", keys.join(", "))));
    }
    if config.control.initial.is_none() {
        config.control.initial = Some(0.5 * (config.control.lower + config.control.upper));
    }
    Ok(config)
}

/// Applies one `a.b.c=value` override. The value is read as a TOML value and
/// falls back to a bare string.
fn apply_override(doc: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {item:?} is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} has an empty component")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    };
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut table = doc;
    for part in parents {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {part} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Serializes the resolved configuration.
pub fn emit_config(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
}

impl RunConfig {
    pub fn initial_control(&self) -> f64 {
        self.control
            .initial
            .unwrap_or(0.5 * (self.control.lower + self.control.upper))
    }

    /// Checks every field against its bound and names the first violation.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if self.run.classical {
            if !(m.alpha > 0.0 && m.alpha <= 1.0) {
                return Err(Error::Config(format!(
                    "model.alpha must lie in (0, 1], got {}",
                    m.alpha
                )));
            }
        } else if m.alpha == 1.0 {
            return Err(Error::Config(
                "model.alpha = 1 is the ordinary derivative; pass --classical (run.classical = true) for backward Euler".into(),
            ));
        } else if !(m.alpha > 0.0 && m.alpha <= ALPHA_MAX) {
            return Err(Error::Config(format!(
                "model.alpha must lie in (0, {ALPHA_MAX}], got {}",
                m.alpha
            )));
        }
        if !(m.lambda >= 0.0 && m.lambda.is_finite()) {
            return Err(Error::Config(format!("model.lambda must be >= 0, got {}", m.lambda)));
        }
        if !(self.time.t_final > 0.0 && self.time.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "time.t_final must be > 0, got {}",
                self.time.t_final
            )));
        }
        if self.time.n_steps == 0 {
            return Err(Error::Config("time.n_steps must be >= 1".into()));
        }
        let c = &self.control;
        if !(c.lower > 0.0 && c.lower.is_finite()) {
            return Err(Error::Config(format!(
                "control.lower must satisfy 0 < m ≤ β, got {}",
                c.lower
            )));
        }
        if !(c.upper >= c.lower && c.upper.is_finite()) {
            return Err(Error::Config(format!(
                "control.upper must satisfy m ≤ M, got lower {} and upper {}",
                c.lower, c.upper
            )));
        }
        let beta = self.initial_control();
        match self.mode {
            Mode::Simulate => {
                if !(beta >= 0.0 && beta.is_finite()) {
                    return Err(Error::Config(format!("control.initial must be >= 0, got {beta}")));
                }
            }
            _ => {
                if !(beta >= c.lower && beta <= c.upper) {
                    return Err(Error::Config(format!(
                        "control.initial must lie in [{}, {}] for {}, got {beta}",
                        c.lower,
                        c.upper,
                        self.mode.name()
                    )));
                }
            }
        }
        if let InitialState::Cosine { wavenumber, .. } = self.initial_state {
            if wavenumber > 1000 {
                return Err(Error::Config(format!(
                    "initial_state.wavenumber must be <= 1000, got {wavenumber}"
                )));
            }
        }
        self.picard().validate().map_err(|e| prefixed("solver", e))?;
        self.optimizer_options()
            .validate()
            .map_err(|e| prefixed("optimizer", e))?;
        Ok(())
    }

    pub fn picard(&self) -> PicardOptions {
        PicardOptions {
            tol: self.solver.tol,
            max_picard: self.solver.max_picard,
        }
    }

    pub fn optimizer_options(&self) -> OptimizerOptions {
        let o = &self.optimizer;
        OptimizerOptions {
            tol_opt: o.tol_opt,
            max_iters: o.max_iters,
            omega: o.omega,
            adjoint: o.adjoint,
            armijo: ArmijoOptions {
                initial_step: o.armijo.initial_step,
                shrink: o.armijo.shrink,
                sufficient_decrease: o.armijo.sufficient_decrease,
                max_backtracks: o.armijo.max_backtracks,
            },
        }
    }

    pub fn build_problem(&self) -> Result<ThermistorProblem> {
        let grid = SpaceGrid::new(self.grid.clone())?;
        let time = TimeGrid::new(self.time.t_final, self.time.n_steps)?;
        let weights = if self.run.classical {
            AbcWeights::classical(time)
        } else {
            build_abc_weights(FractionalOrder::new(self.model.alpha)?, time)?
        };
        let model = ConductivityModel::from_spec(&self.model.conductivity)?;
        let u0 = self.initial_field(&grid);
        ThermistorProblem::new(grid, weights, model, self.model.lambda, u0, self.picard())
    }

    fn initial_field(&self, grid: &SpaceGrid) -> Vec<f64> {
        let length = match self.grid {
            GridSpec::Interval { length, .. } => length,
            GridSpec::Rectangle { lx, .. } => lx,
        };
        grid.coords()
            .iter()
            .map(|c| match self.initial_state {
                InitialState::Constant { value } => value,
                InitialState::Cosine {
                    mean,
                    amplitude,
                    wavenumber,
                } => mean + amplitude * (wavenumber as f64 * PI * c[0] / length).cos(),
            })
            .collect()
    }

    /// Constant initial control. Simulate mode accepts any `β ≥ 0`; the
    /// optimizers require `m ≤ β ≤ M`.
    pub fn build_control(&self, problem: &ThermistorProblem) -> Result<BoundaryControl> {
        let values = vec![vec![self.initial_control(); problem.grid.n_boundary()]; problem.time().len()];
        match self.mode {
            Mode::Simulate => Ok(BoundaryControl::free(values)),
            _ => BoundaryControl::new(values, self.control.lower, self.control.upper),
        }
    }
}

fn prefixed(section: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{section}: {msg}")),
        other => other,
    }
}
