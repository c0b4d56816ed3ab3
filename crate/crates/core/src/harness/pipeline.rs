//! End-to-end experiment runs.

use std::fs;

use serde::Serialize;

use crate::bandit::{run_mab, MabOptions};
use crate::baselines::{run_bo, run_cem_full, run_random, BoOptions};
use crate::belief::{informed_prior, BeliefBank, GarmentStats, PriorBank, PriorMode};
use crate::cem::{run_cem, CemOptions};
use crate::error::{Error, Result};
use crate::exec_stop::{
    bootstrap_stop_analysis, parse_coverages, run_execution, ExecPosterior, RuleKind, StopTimeStat,
};
use crate::param_space::{ActionGrid, FlingParams, ParamBounds};
use crate::seed::{derive_rng, derive_seed};
use crate::sim_env::{oracle_best, Catalog, Category, EnvSpec, Environment, SimEnv};
use crate::trajectory::{build_waypoints, cycle_timing, generate_profile, CycleTiming, Profile};
use crate::trial::{StopReason, TrialLog, TrialRecord};

use super::config::{ExperimentConfig, Method};

/// Resolution per searched dimension of the oracle used in summaries.
pub const ORACLE_RESOLUTION: usize = 17;

/// Everything a run needs that is derived from the config alone.
#[derive(Debug, Clone)]
pub struct Setup {
    pub bounds: ParamBounds,
    pub grid: ActionGrid,
    pub catalog: Catalog,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let bounds = ParamBounds::from_table(cfg.parameterization, &cfg.ranges)?;
        let grid = ActionGrid::from_names(&bounds, &cfg.grid.varied, cfg.grid.splits)?;
        let catalog = match &cfg.catalog {
            Some(path) => Catalog::from_json_str(&fs::read_to_string(path)?)?,
            None => Catalog::default(),
        };
        Ok(Self {
            bounds,
            grid,
            catalog,
        })
    }

    /// Garment `index` of `category`. Families are seeded from the master
    /// seed so training and test garments of one run share a family.
    pub fn garment(
        &self,
        cfg: &ExperimentConfig,
        category: Category,
        index: usize,
    ) -> Result<EnvSpec> {
        let seed = derive_seed(cfg.seed, "family");
        Ok(self
            .catalog
            .family(category, index + 1, &self.bounds, seed)?
            .remove(index))
    }

    pub fn env(&self, cfg: &ExperimentConfig, spec: EnvSpec, purpose: &str) -> SimEnv {
        let stream = derive_seed(cfg.seed, &format!("env/{purpose}/{}", spec.garment));
        SimEnv::with_stream(spec, stream)
    }

    fn cem_options(cfg: &ExperimentConfig) -> CemOptions {
        CemOptions {
            batch: cfg.budgets.cem_batch,
            elites: cfg.budgets.cem_elites,
            reps: cfg.budgets.cem_reps,
            ..CemOptions::default()
        }
    }

    fn mab_options(cfg: &ExperimentConfig, threshold: f64, limit: usize) -> MabOptions {
        MabOptions {
            iteration_limit: limit,
            threshold,
            sigma_kind: cfg.belief.sigma_kind,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PriorBankRun {
    pub bank: PriorBank,
    pub log: TrialLog,
    /// Garment name per log row.
    pub garments: Vec<String>,
}

/// Trains the bandit (no CEM, no early stop) on every training garment and
/// records per-arm statistics of the observed coverages.
pub fn build_prior_bank(cfg: &ExperimentConfig) -> Result<PriorBankRun> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let arms = setup.grid.arms();
    let opts = Setup::mab_options(cfg, 0.0, cfg.budgets.training_trials);
    let mut bank = Vec::new();
    let mut log = TrialLog::new();
    let mut garments = Vec::new();
    for &category in &cfg.training.categories {
        for i in 0..cfg.training.garments_per_category {
            let spec = setup.garment(cfg, category, i)?;
            let name = spec.garment.clone();
            let label = format!("train/{name}");
            let seed = derive_seed(cfg.seed, &label);
            let mut rng = derive_rng(cfg.seed, &label);
            let mut env = setup.env(cfg, spec, "train");
            let prior = BeliefBank::uninformed(arms, cfg.belief.obs_noise_sigma)?;
            let start = log.len();
            run_mab(
                &mut env,
                &setup.grid,
                prior,
                &opts,
                &mut rng,
                seed,
                &mut log,
            )?;
            let rows = &log.records()[start..];
            garments.extend(std::iter::repeat_n(name.clone(), rows.len()));
            bank.push(GarmentStats::from_observations(
                &name,
                category.as_str(),
                arms,
                rows.iter()
                    .map(|r| (r.arm.expect("mab rows carry an arm"), r.reward)),
            )?);
        }
    }
    Ok(PriorBankRun {
        bank: PriorBank(bank),
        log,
        garments,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecSummary {
    pub rule: String,
    pub threshold: f64,
    pub posterior_mu: f64,
    pub posterior_sigma: f64,
    pub flings: usize,
    pub stopped: bool,
    pub best_coverage: f64,
    pub final_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment_id: String,
    pub method: String,
    pub seed: u64,
    pub garment: String,
    pub category: String,
    pub prior_mode: PriorMode,
    pub best_params: FlingParams,
    /// Arm whose cell holds the best action (bandit runs only).
    pub best_arm: Option<usize>,
    /// Observed value of the best action (average over repetitions).
    pub best_observed: f64,
    /// Noise-free mean coverage of the best action.
    pub true_mean: f64,
    pub oracle_params: FlingParams,
    pub oracle_value: f64,
    pub mab_trials: usize,
    pub mab_stop_reason: Option<StopReason>,
    pub mab_max_ei: Option<f64>,
    pub cem_trials: usize,
    pub baseline_trials: usize,
    pub exec: Option<ExecSummary>,
    pub total_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment_id: String,
    pub method: Method,
    pub seed: u64,
    pub rows: Vec<TrialRecord>,
    pub summary: Summary,
}

fn load_bank(cfg: &ExperimentConfig) -> Result<Option<PriorBank>> {
    match (&cfg.prior.mode, &cfg.prior.bank) {
        (PriorMode::Uninformed, _) => Ok(None),
        (_, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("prior bank {}: {e}", path.display()),
                ))
            })?;
            Ok(Some(PriorBank::from_json_str(&text)?))
        }
        (_, None) => Err(Error::InvalidArgument(
            "informed prior needs prior.bank".into(),
        )),
    }
}

/// Runs the configured method on the test garment.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let bank = load_bank(cfg)?;
    run_pipeline_with_bank(cfg, bank.as_ref())
}

/// As [`run_pipeline`] with the prior bank supplied in memory.
pub fn run_pipeline_with_bank(
    cfg: &ExperimentConfig,
    bank: Option<&PriorBank>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let spec = setup.garment(cfg, cfg.garment.category, cfg.garment.index)?;
    let mut env = setup.env(cfg, spec.clone(), &format!("test/{}", cfg.method.as_str()));
    let mut log = TrialLog::new();

    let mut summary_parts = MethodOutcome::default();
    match cfg.method {
        Method::MabCem => {
            summary_parts = run_mab_cem(cfg, &setup, bank, &mut env, &mut log)?;
        }
        Method::Cem => {
            let seed = derive_seed(cfg.seed, "baseline/cem_full");
            let mut rng = derive_rng(cfg.seed, "baseline/cem_full");
            let out = run_cem_full(
                &mut env,
                &setup.bounds,
                cfg.budgets.cem_full_iterations,
                &Setup::cem_options(cfg),
                &mut rng,
                seed,
                &mut log,
            )?;
            summary_parts.set_baseline(out.best, out.best_value, out.trials);
        }
        Method::Bo => {
            let seed = derive_seed(cfg.seed, "baseline/bo");
            let mut rng = derive_rng(cfg.seed, "baseline/bo");
            let opts = BoOptions {
                iterations: cfg.budgets.bo_iterations,
                reps: cfg.budgets.bo_reps,
                candidates: cfg.budgets.bo_candidates,
                hyper: cfg.gp,
            };
            let out = run_bo(&mut env, &setup.bounds, &opts, &mut rng, seed, &mut log)?;
            summary_parts.set_baseline(out.best, out.best_value, out.trials);
        }
        Method::Random => {
            let seed = derive_seed(cfg.seed, "baseline/random");
            let mut rng = derive_rng(cfg.seed, "baseline/random");
            let out = run_random(
                &mut env,
                &setup.bounds,
                cfg.budgets.random_trials,
                &mut rng,
                seed,
                &mut log,
            )?;
            summary_parts.set_baseline(out.best, out.best_value, out.trials);
        }
    }

    let best = summary_parts
        .best
        .clone()
        .expect("every method yields an action");
    let (oracle_params, oracle_value) = oracle_best(
        &spec,
        setup.grid.varied_dims(),
        ORACLE_RESOLUTION,
        setup.grid.fixed_values(),
    )?;
    let summary = Summary {
        experiment_id: cfg.experiment_id.clone(),
        method: cfg.method.as_str().to_string(),
        seed: cfg.seed,
        garment: spec.garment.clone(),
        category: spec.category.as_str().to_string(),
        prior_mode: cfg.prior.mode,
        true_mean: spec.mean_coverage(&best)?,
        best_params: best,
        best_arm: summary_parts.best_arm,
        best_observed: summary_parts.best_observed,
        oracle_params,
        oracle_value,
        mab_trials: summary_parts.mab_trials,
        mab_stop_reason: summary_parts.stop_reason,
        mab_max_ei: summary_parts.max_ei,
        cem_trials: summary_parts.cem_trials,
        baseline_trials: summary_parts.baseline_trials,
        exec: summary_parts.exec,
        total_trials: log.len(),
    };
    Ok(ExperimentReport {
        experiment_id: cfg.experiment_id.clone(),
        method: cfg.method,
        seed: cfg.seed,
        rows: log.records().to_vec(),
        summary,
    })
}

#[derive(Debug, Default)]
struct MethodOutcome {
    best: Option<FlingParams>,
    best_arm: Option<usize>,
    best_observed: f64,
    mab_trials: usize,
    stop_reason: Option<StopReason>,
    max_ei: Option<f64>,
    cem_trials: usize,
    baseline_trials: usize,
    exec: Option<ExecSummary>,
    posterior: Option<ExecPosterior>,
}

impl MethodOutcome {
    fn set_baseline(&mut self, best: FlingParams, value: f64, trials: usize) {
        self.best = Some(best);
        self.best_observed = value;
        self.baseline_trials = trials;
    }
}

fn prior_for(
    cfg: &ExperimentConfig,
    setup: &Setup,
    bank: Option<&PriorBank>,
) -> Result<BeliefBank> {
    let arms = setup.grid.arms();
    match (cfg.prior.mode, bank) {
        (PriorMode::Uninformed, _) => BeliefBank::uninformed(arms, cfg.belief.obs_noise_sigma),
        (mode, Some(bank)) => informed_prior(
            &bank.0,
            mode,
            cfg.garment.category.as_str(),
            arms,
            cfg.belief.obs_noise_sigma,
            cfg.belief.prior_sigma_floor,
        ),
        (_, None) => Err(Error::InvalidArgument(
            "informed prior needs prior.bank".into(),
        )),
    }
}

fn run_mab_cem(
    cfg: &ExperimentConfig,
    setup: &Setup,
    bank: Option<&PriorBank>,
    env: &mut SimEnv,
    log: &mut TrialLog,
) -> Result<MethodOutcome> {
    let prior = prior_for(cfg, setup, bank)?;
    let opts = Setup::mab_options(cfg, cfg.budgets.ei_threshold, cfg.budgets.mab_iterations);
    let seed = derive_seed(cfg.seed, "mab");
    let mab = run_mab(
        env,
        &setup.grid,
        prior,
        &opts,
        &mut derive_rng(cfg.seed, "mab"),
        seed,
        log,
    )?;

    let seed = derive_seed(cfg.seed, "cem");
    let before = log.len();
    let cem = run_cem(
        &setup.grid,
        mab.best_arm,
        env,
        cfg.budgets.cem_iterations,
        &Setup::cem_options(cfg),
        &mut derive_rng(cfg.seed, "cem"),
        seed,
        log,
    )?;
    let cem_trials = log.len() - before;

    let belief = mab.bank.belief(mab.best_arm);
    let sigma = mab.bank.sigma(mab.best_arm, cfg.belief.sigma_kind);
    let post = ExecPosterior::new(belief.mu, sigma.max(f64::MIN_POSITIVE))?;
    let seed = derive_seed(cfg.seed, "exec");
    let episode = run_execution(
        env,
        &cem.best.params,
        Some(mab.best_arm),
        &post,
        &cfg.exec,
        cfg.budgets.exec_budget,
        &mut derive_rng(cfg.seed, "exec"),
        seed,
        log,
    )?;
    Ok(MethodOutcome {
        best: Some(cem.best.params),
        best_arm: Some(mab.best_arm),
        best_observed: cem.best.average,
        mab_trials: mab.trials_used,
        stop_reason: Some(mab.stop_reason),
        max_ei: Some(mab.max_ei),
        cem_trials,
        baseline_trials: 0,
        exec: Some(ExecSummary {
            rule: cfg.exec.kind.as_str().to_string(),
            threshold: cfg.exec.threshold,
            posterior_mu: post.mu,
            posterior_sigma: post.sigma,
            flings: episode.flings,
            stopped: episode.stopped,
            best_coverage: episode.best_coverage(),
            final_coverage: *episode.coverages.last().expect("budget >= 1"),
        }),
        posterior: Some(post),
    })
}

/// Runs every method on the same garment with the same master seed.
pub fn compare(cfg: &ExperimentConfig, bank: Option<&PriorBank>) -> Result<Vec<ExperimentReport>> {
    let bank = match bank {
        Some(b) => Some(b.clone()),
        None => load_bank(cfg)?,
    };
    [Method::MabCem, Method::Cem, Method::Bo, Method::Random]
        .into_iter()
        .map(|method| {
            let mut c = cfg.clone();
            c.method = method;
            run_pipeline_with_bank(&c, bank.as_ref())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingAnalysis {
    pub action: FlingParams,
    pub posterior: ExecPosterior,
    pub observed: Vec<f64>,
    pub rows: Vec<StopTimeStat>,
}

/// Bootstrap stopping-time curves for all three execution rules.
///
/// The executed action and its posterior come from a bandit + CEM run on
/// the test garment. Observed coverages are read from
/// `stopping.coverages` when set, otherwise collected by flinging the
/// action `stopping.observations` times on a separate stream.
pub fn exec_stopping(cfg: &ExperimentConfig, bank: Option<&PriorBank>) -> Result<StoppingAnalysis> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let spec = setup.garment(cfg, cfg.garment.category, cfg.garment.index)?;
    let mut env = setup.env(cfg, spec.clone(), "stopping/train");
    let mut log = TrialLog::new();
    let mut c = cfg.clone();
    c.method = Method::MabCem;
    let bank = match bank {
        Some(b) => Some(b.clone()),
        None => load_bank(&c)?,
    };
    let outcome = run_mab_cem(&c, &setup, bank.as_ref(), &mut env, &mut log)?;
    let action = outcome.best.expect("mab_cem yields an action");
    let post = outcome.posterior.expect("mab_cem yields a posterior");

    let observed = match &cfg.stopping.coverages {
        Some(path) => parse_coverages(&fs::read_to_string(path)?)?,
        None => {
            let mut obs_env = setup.env(cfg, spec, "stopping/observe");
            (0..cfg.stopping.observations)
                .map(|_| obs_env.trial(&action))
                .collect::<Result<Vec<f64>>>()?
        }
    };

    let mut rows = Vec::new();
    for (kind, thresholds) in [
        (RuleKind::ZScore, &cfg.stopping.rule1_thresholds),
        (RuleKind::OneStepEi, &cfg.stopping.rule2_thresholds),
        (RuleKind::BudgetEi, &cfg.stopping.rule3_thresholds),
    ] {
        if thresholds.is_empty() {
            continue;
        }
        let rule = crate::exec_stop::RuleSpec {
            kind,
            threshold: thresholds[0],
            samples: cfg.stopping.samples,
            ..cfg.exec
        };
        let mut rng = derive_rng(cfg.seed, &format!("stopping/{}", kind.as_str()));
        rows.extend(bootstrap_stop_analysis(
            &observed,
            &post,
            &rule,
            thresholds,
            cfg.stopping.budget,
            cfg.stopping.resamples,
            &mut rng,
        )?);
    }
    Ok(StoppingAnalysis {
        action,
        posterior: post,
        observed,
        rows,
    })
}

/// Fling trajectory and full cycle timing for `params`.
pub fn plan_trajectory(
    cfg: &ExperimentConfig,
    params: &FlingParams,
) -> Result<(Profile, CycleTiming)> {
    let bounds = ParamBounds::from_table(cfg.parameterization, &cfg.ranges)?;
    let plan = build_waypoints(&bounds, params, &cfg.trajectory)?;
    let profile = generate_profile(&plan, cfg.trajectory.sample_rate)?;
    let timing = cycle_timing(&profile, &cfg.shake);
    Ok((profile, timing))
}
