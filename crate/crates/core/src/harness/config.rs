//! TOML experiment configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bandit::{DEFAULT_EI_THRESHOLD, DEFAULT_MAB_ITERATIONS};
use crate::baselines::{
    GpHyper, DEFAULT_BO_CANDIDATES, DEFAULT_BO_ITERATIONS, DEFAULT_BO_REPS,
    DEFAULT_CEM_FULL_ITERATIONS, DEFAULT_RANDOM_TRIALS,
};
use crate::belief::{PriorMode, SigmaKind, DEFAULT_OBS_NOISE_SIGMA, DEFAULT_PRIOR_SIGMA_FLOOR};
use crate::error::{Error, Result};
use crate::exec_stop::{RuleSpec, DEFAULT_BUDGET, DEFAULT_EXEC_EI_THRESHOLD};
use crate::param_space::{Parameterization, RangeTable};
use crate::sim_env::Category;
use crate::trajectory::{ShakeConfig, TrajectoryConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    MabCem,
    /// CEM over the full range.
    #[serde(alias = "cem_full")]
    Cem,
    Bo,
    Random,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::MabCem => "mab_cem",
            Method::Cem => "cem_full",
            Method::Bo => "bo",
            Method::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GarmentSelection {
    pub category: Category,
    /// Index in the category family. Training garments take `0..n`, so the
    /// default test garment sits just past a 5-garment training family.
    pub index: usize,
}

impl Default for GarmentSelection {
    fn default() -> Self {
        Self {
            category: Category::TShirt,
            index: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub mode: PriorMode,
    /// Bank JSON written by `prior-bank`. Required for informed modes.
    pub bank: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub varied: Vec<String>,
    pub splits: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            varied: ["v23_max", "v34_max", "p3_y", "p3_z"]
                .map(String::from)
                .to_vec(),
            splits: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub mab_iterations: usize,
    pub ei_threshold: f64,
    pub cem_iterations: usize,
    pub cem_batch: usize,
    pub cem_elites: usize,
    pub cem_reps: usize,
    pub exec_budget: usize,
    pub bo_iterations: usize,
    pub bo_reps: usize,
    pub bo_candidates: usize,
    pub cem_full_iterations: usize,
    pub random_trials: usize,
    /// MAB trials per training garment when building a prior bank.
    pub training_trials: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            mab_iterations: DEFAULT_MAB_ITERATIONS,
            ei_threshold: DEFAULT_EI_THRESHOLD,
            cem_iterations: 2,
            cem_batch: 5,
            cem_elites: 3,
            cem_reps: 3,
            exec_budget: DEFAULT_BUDGET,
            bo_iterations: DEFAULT_BO_ITERATIONS,
            bo_reps: DEFAULT_BO_REPS,
            bo_candidates: DEFAULT_BO_CANDIDATES,
            cem_full_iterations: DEFAULT_CEM_FULL_ITERATIONS,
            random_trials: DEFAULT_RANDOM_TRIALS,
            training_trials: DEFAULT_MAB_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeliefConfig {
    pub obs_noise_sigma: f64,
    pub prior_sigma_floor: f64,
    /// Std used by both the training EI rule and the execution posterior.
    pub sigma_kind: SigmaKind,
}

impl Default for BeliefConfig {
    fn default() -> Self {
        Self {
            obs_noise_sigma: DEFAULT_OBS_NOISE_SIGMA,
            prior_sigma_floor: DEFAULT_PRIOR_SIGMA_FLOOR,
            sigma_kind: SigmaKind::Posterior,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub categories: Vec<Category>,
    pub garments_per_category: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            categories: Category::ALL.to_vec(),
            garments_per_category: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingConfig {
    /// Thresholds swept per rule (z values for rule 1).
    pub rule1_thresholds: Vec<f64>,
    pub rule2_thresholds: Vec<f64>,
    pub rule3_thresholds: Vec<f64>,
    pub resamples: usize,
    /// Observed coverages of the executed action; when unset they are
    /// collected from the simulator.
    pub coverages: Option<PathBuf>,
    pub observations: usize,
    pub budget: usize,
    pub samples: usize,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        Self {
            rule1_thresholds: vec![0.25, 0.5, 1.0, 1.5, 2.0, 2.5],
            rule2_thresholds: vec![0.001, 0.0025, 0.005, 0.01, 0.02, 0.04],
            rule3_thresholds: vec![0.001, 0.0025, 0.005, 0.01, 0.02, 0.04],
            resamples: 1000,
            coverages: None,
            observations: 200,
            budget: DEFAULT_BUDGET,
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub method: Method,
    pub seed: u64,
    pub parameterization: Parameterization,
    /// Catalog JSON; the bundled catalog when unset.
    pub catalog: Option<PathBuf>,
    pub garment: GarmentSelection,
    pub prior: PriorConfig,
    pub grid: GridConfig,
    pub budgets: Budgets,
    pub belief: BeliefConfig,
    pub exec: RuleSpec,
    pub gp: GpHyper,
    pub training: TrainingConfig,
    pub stopping: StoppingConfig,
    pub ranges: RangeTable,
    pub trajectory: TrajectoryConfig,
    pub shake: ShakeConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment_id: "experiment".into(),
            method: Method::MabCem,
            seed: 0,
            parameterization: Parameterization::SevenD,
            catalog: None,
            garment: GarmentSelection::default(),
            prior: PriorConfig::default(),
            grid: GridConfig::default(),
            budgets: Budgets::default(),
            belief: BeliefConfig::default(),
            exec: RuleSpec::one_step_ei(DEFAULT_EXEC_EI_THRESHOLD),
            gp: GpHyper::default(),
            training: TrainingConfig::default(),
            stopping: StoppingConfig::default(),
            ranges: RangeTable::new(),
            trajectory: TrajectoryConfig::default(),
            shake: ShakeConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.budgets;
        let positive = [
            ("mab_iterations", b.mab_iterations),
            ("cem_iterations", b.cem_iterations),
            ("cem_batch", b.cem_batch),
            ("cem_elites", b.cem_elites),
            ("cem_reps", b.cem_reps),
            ("exec_budget", b.exec_budget),
            ("bo_iterations", b.bo_iterations),
            ("bo_reps", b.bo_reps),
            ("bo_candidates", b.bo_candidates),
            ("cem_full_iterations", b.cem_full_iterations),
            ("random_trials", b.random_trials),
            ("training_trials", b.training_trials),
            ("grid.splits", self.grid.splits),
            (
                "training.garments_per_category",
                self.training.garments_per_category,
            ),
            ("stopping.resamples", self.stopping.resamples),
            ("stopping.observations", self.stopping.observations),
            ("stopping.budget", self.stopping.budget),
            ("stopping.samples", self.stopping.samples),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if b.cem_elites > b.cem_batch {
            return Err(Error::InvalidArgument(
                "cem_elites exceeds cem_batch".into(),
            ));
        }
        if !(b.ei_threshold.is_finite() && b.ei_threshold >= 0.0) {
            return Err(Error::InvalidArgument(
                "ei_threshold must be finite and >= 0".into(),
            ));
        }
        let bel = &self.belief;
        if !(bel.obs_noise_sigma.is_finite() && bel.obs_noise_sigma > 0.0) {
            return Err(Error::InvalidArgument("obs_noise_sigma must be > 0".into()));
        }
        if !(bel.prior_sigma_floor.is_finite() && bel.prior_sigma_floor >= 0.0) {
            return Err(Error::InvalidArgument(
                "prior_sigma_floor must be >= 0".into(),
            ));
        }
        self.exec.validate()?;
        let (g, t, s) = (&self.gp, &self.trajectory, &self.shake);
        let scalars = [
            ("gp.length_scale", g.length_scale, false),
            ("gp.signal_std", g.signal_std, false),
            ("gp.noise_std", g.noise_std, true),
            ("trajectory.v12_max", t.v12_max, false),
            ("trajectory.accel_limit", t.accel_limit, false),
            ("trajectory.sample_rate", t.sample_rate, false),
            ("shake.reset", s.reset, true),
            ("shake.period", s.period, true),
        ];
        for (name, v, zero_ok) in scalars {
            if !(v.is_finite() && (v > 0.0 || zero_ok && v == 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and positive"
                )));
            }
        }
        let finite = [g.prior_mean, t.theta_start]
            .into_iter()
            .chain(t.p1)
            .chain(t.p2)
            .chain(t.p4);
        if !finite.into_iter().all(f64::is_finite) {
            return Err(Error::InvalidArgument(
                "gp and trajectory values must be finite".into(),
            ));
        }
        if self.training.categories.is_empty() {
            return Err(Error::InvalidArgument(
                "training.categories is empty".into(),
            ));
        }
        if self.experiment_id.is_empty() || self.experiment_id.contains([',', '"', '\n']) {
            return Err(Error::InvalidArgument(
                "experiment_id must be non-empty and free of commas, quotes and newlines".into(),
            ));
        }
        Ok(())
    }
}
