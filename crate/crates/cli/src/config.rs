//! Declarative experiment configuration (TOML or JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};

use steplab::diagnostics::Granularity;
use steplab::equivalence::MatchSpace;
use steplab::optim::{BatchMode, HyperParams, PhaseSpec, ScheduleSpec, TrainConfig};
use steplab::problems::{make_dataset, make_quadratic, Activation, Dataset, MlpModel, MlpProblem, Problem, QuadraticProblem};
use steplab::vecops::log_spaced;

use crate::error::CliError;
use crate::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    QuadraticDemo,
    Train,
    Equivalence,
    Sweep,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::QuadraticDemo => "quadratic-demo",
            CommandKind::Train => "train",
            CommandKind::Equivalence => "equivalence",
            CommandKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name of the run directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    pub training: TrainingConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases: Vec<PhaseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<DemoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<EquivalenceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    Quadratic {
        dim: usize,
        condition_number: f64,
        /// Matrix seed; the experiment seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Mlp {
        dataset: String,
        n_samples: usize,
        #[serde(default)]
        noise: f64,
        /// Dataset seed; the experiment seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_seed: Option<u64>,
        /// Trailing samples kept out of training for accuracy.
        #[serde(default)]
        held_out: usize,
        layers: Vec<usize>,
        #[serde(default = "default_activation")]
        activation: Activation,
    },
}

fn default_activation() -> Activation {
    Activation::Tanh
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    /// Epochs, or iterations for full-batch quadratic runs.
    pub epochs: usize,
    #[serde(default = "one")]
    pub iters_per_epoch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<Granularity>,
    #[serde(default = "default_divergence")]
    pub divergence_factor: f64,
}

fn one() -> usize {
    1
}

fn default_divergence() -> f64 {
    1e12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// Full batch when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub transitions: Vec<usize>,
    #[serde(default = "yes")]
    pub reset_momentum: bool,
}

fn yes() -> bool {
    true
}

/// Reruns a single-phase `train` config once per momentum value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub momenta: Vec<f64>,
}

/// `n` log-spaced values in `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl LogAxis {
    pub fn values(&self, unit: f64) -> Vec<f64> {
        log_spaced(self.lo, self.hi, self.n).into_iter().map(|v| v * unit).collect()
    }

    fn validate(&self, what: &str) -> Result<(), CliError> {
        if !(self.lo > 0.0 && self.lo <= self.hi && self.hi.is_finite()) || self.n == 0 {
            return Err(CliError::config(format!(
                "{what}: need 0 < lo <= hi and n >= 1, got lo={} hi={} n={}",
                self.lo, self.hi, self.n
            )));
        }
        if self.n == 1 && self.lo != self.hi {
            return Err(CliError::config(format!("{what}: a single value needs lo == hi")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub momenta: Vec<f64>,
    /// Tuning grid for every momentum.
    pub eta: LogAxis,
    /// Grid values are multiples of `1/λ_max` when set.
    #[serde(default)]
    pub relative_to_lambda_max: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Grid,
    Random,
    Transition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomRange {
    pub momentum: f64,
    pub eta_lo: f64,
    pub eta_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: SweepMode,
    /// Grid: learning-rate axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<LogAxis>,
    /// Grid: `1 − μ` axis; alternative to `momenta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_minus_mu: Option<LogAxis>,
    /// Grid: explicit momentum values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momenta: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Grid learning rates are multiples of `1/λ_max` when set.
    #[serde(default)]
    pub relative_to_lambda_max: bool,
    /// Random: samples per momentum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Random: sampling range per momentum.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ranges: Vec<RandomRange>,
    /// Transition: candidate transition epochs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<usize>,
    /// Transition: independent seeds per candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    /// Grid and random: mini-batch size; full batch when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// Grid and random: weight decay of every run.
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "default_max_runs")]
    pub max_runs: usize,
    #[serde(default)]
    pub allow_large: bool,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_max_runs() -> usize {
    2500
}

fn default_bins() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub baseline_etas: Vec<f64>,
    pub momenta: Vec<f64>,
    pub candidates: LogAxis,
    /// Baselines and candidates are multiples of `1/λ_max` when set.
    #[serde(default)]
    pub relative_to_lambda_max: bool,
    #[serde(default)]
    pub space: MatchSpace,
}

/// Built problem plus the optional held-out split.
pub enum BuiltProblem {
    Quadratic(QuadraticProblem),
    Mlp { problem: MlpProblem, held_out: Option<Dataset> },
}

impl BuiltProblem {
    pub fn as_dyn(&self) -> &dyn Problem {
        match self {
            BuiltProblem::Quadratic(q) => q,
            BuiltProblem::Mlp { problem, .. } => problem,
        }
    }

    pub fn held_out(&self) -> Option<&Dataset> {
        match self {
            BuiltProblem::Quadratic(_) => None,
            BuiltProblem::Mlp { held_out, .. } => held_out.as_ref(),
        }
    }

    pub fn lambda_max(&self) -> Option<f64> {
        match self {
            BuiltProblem::Quadratic(q) => Some(q.lambda_max()),
            BuiltProblem::Mlp { .. } => None,
        }
    }
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub epochs: Option<usize>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self, CliError> {
        if json {
            serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid JSON config: {e}")))
        } else {
            toml::from_str(text).map_err(|e| CliError::config(format!("invalid TOML config: {e}")))
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::parse(&text, json)
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let text = presets::get(name).ok_or_else(|| {
            CliError::config(format!(
                "unknown preset {name:?}; available: {}",
                presets::names().join(", ")
            ))
        })?;
        Self::parse(text, false)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(n) = o.iterations {
            if !matches!(self.problem, ProblemConfig::Quadratic { .. }) {
                return Err(CliError::config("--iterations applies to quadratic problems; use --epochs"));
            }
            self.training.epochs = n;
            self.training.iters_per_epoch = 1;
        }
        if let Some(n) = o.epochs {
            self.training.epochs = n;
        }
        Ok(())
    }

    pub fn run_name(&self, command: CommandKind) -> String {
        self.name.clone().unwrap_or_else(|| command.as_str().to_string())
    }

    pub fn snapshot(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn check_command(&self, command: CommandKind) -> Result<(), CliError> {
        match self.command {
            Some(c) if c != command => Err(CliError::config(format!(
                "config is for `{}`, not `{}`",
                c.as_str(),
                command.as_str()
            ))),
            _ => Ok(()),
        }
    }

    pub fn build_problem(&self) -> Result<BuiltProblem, CliError> {
        match &self.problem {
            ProblemConfig::Quadratic {
                dim,
                condition_number,
                seed,
            } => Ok(BuiltProblem::Quadratic(
                make_quadratic(*dim, *condition_number, seed.unwrap_or(self.seed)).map_err(CliError::from_config)?,
            )),
            ProblemConfig::Mlp {
                dataset,
                n_samples,
                noise,
                data_seed,
                held_out,
                layers,
                activation,
            } => {
                let data = make_dataset(dataset, *n_samples, *noise, data_seed.unwrap_or(self.seed))
                    .map_err(CliError::from_config)?;
                let (train, test) = if *held_out > 0 {
                    let (a, b) = data.split(*held_out).map_err(CliError::from_config)?;
                    (a, Some(b))
                } else {
                    (data, None)
                };
                let model = MlpModel::new(layers.clone(), *activation).map_err(CliError::from_config)?;
                let problem = MlpProblem::new(model, train).map_err(CliError::from_config)?;
                Ok(BuiltProblem::Mlp { problem, held_out: test })
            }
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let t = &self.training;
        if t.epochs == 0 || t.iters_per_epoch == 0 {
            return Err(CliError::config("training.epochs and training.iters_per_epoch must be >= 1"));
        }
        if t.divergence_factor.is_nan() || t.divergence_factor <= 1.0 {
            return Err(CliError::config("training.divergence_factor must exceed 1"));
        }
        Ok(TrainConfig {
            epochs: t.epochs,
            iters_per_epoch: t.iters_per_epoch,
            seed: self.seed,
            granularity: t.granularity,
            store_snapshots: false,
            divergence_factor: t.divergence_factor,
        })
    }

    pub fn schedule(&self) -> Result<ScheduleSpec, CliError> {
        if self.phases.is_empty() {
            return Err(CliError::config("at least one [[phases]] entry is required"));
        }
        let phases = self
            .phases
            .iter()
            .map(|p| p.to_spec())
            .collect::<Result<Vec<_>, _>>()?;
        let spec = match &self.schedule {
            Some(s) => ScheduleSpec {
                phases,
                transition_epochs: s.transitions.clone(),
                reset_momentum: s.reset_momentum,
            },
            None if phases.len() == 1 => ScheduleSpec::single(phases[0]),
            None => return Err(CliError::config("several phases need a [schedule] with transitions")),
        };
        spec.validate(self.training.epochs).map_err(CliError::from_config)?;
        Ok(spec)
    }
}

impl PhaseConfig {
    pub fn to_spec(&self) -> Result<PhaseSpec, CliError> {
        let hyper = HyperParams::new(self.learning_rate, self.momentum, self.weight_decay).map_err(CliError::from_config)?;
        let spec = PhaseSpec {
            hyper,
            batch: match self.batch_size {
                Some(size) => BatchMode::MiniBatch { size },
                None => BatchMode::FullBatch,
            },
        };
        spec.validate().map_err(CliError::from_config)?;
        Ok(spec)
    }
}

pub fn check_momenta(momenta: &[f64], what: &str) -> Result<(), CliError> {
    if momenta.is_empty() {
        return Err(CliError::config(format!("{what}: at least one momentum is required")));
    }
    if let Some(m) = momenta.iter().find(|m| !(0.0..1.0).contains(*m)) {
        return Err(CliError::config(format!("{what}: momentum {m} is outside [0, 1)")));
    }
    Ok(())
}

pub fn validate_axis(axis: &LogAxis, what: &str) -> Result<(), CliError> {
    axis.validate(what)
}
