//! Comparison methods over the full continuous range: GP-EI Bayesian
//! optimization, unconstrained CEM and uniform random search.

pub mod gp;

use rand::Rng;

use crate::bandit::expected_improvement;
use crate::cem::{run_cem_from, CemOptions, CemState};
use crate::error::{Error, Result};
use crate::param_space::{FlingParams, ParamBounds};
use crate::sim_env::Environment;
use crate::trial::{Phase, TrialLog};

pub use gp::{GpHyper, GpModel};

pub const DEFAULT_BO_ITERATIONS: usize = 70;
pub const DEFAULT_BO_REPS: usize = 3;
pub const DEFAULT_BO_CANDIDATES: usize = 2048;
pub const DEFAULT_CEM_FULL_ITERATIONS: usize = 14;
pub const DEFAULT_RANDOM_TRIALS: usize = 210;

/// Best action found by a baseline and its observed value (average over
/// repetitions where the method repeats).
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub best: FlingParams,
    pub best_value: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoOptions {
    pub iterations: usize,
    pub reps: usize,
    pub candidates: usize,
    pub hyper: GpHyper,
}

impl Default for BoOptions {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_BO_ITERATIONS,
            reps: DEFAULT_BO_REPS,
            candidates: DEFAULT_BO_CANDIDATES,
            hyper: GpHyper::default(),
        }
    }
}

fn evaluate<E>(
    env: &mut E,
    p: &FlingParams,
    reps: usize,
    seed: u64,
    log: &mut TrialLog,
) -> Result<f64>
where
    E: Environment + ?Sized,
{
    let mut sum = 0.0;
    for _ in 0..reps {
        let r = env.trial(p)?;
        log.push(Phase::Baseline, None, p.clone(), r, seed)?;
        sum += r;
    }
    Ok(sum / reps as f64)
}

/// GP-EI Bayesian optimization. Every step scores `candidates` uniform
/// random points by EI against the best observed average and evaluates the
/// winner `reps` times.
pub fn run_bo<E, R>(
    env: &mut E,
    bounds: &ParamBounds,
    opts: &BoOptions,
    rng: &mut R,
    seed: u64,
    log: &mut TrialLog,
) -> Result<BaselineOutcome>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    if opts.iterations < 1 || opts.reps < 1 || opts.candidates < 1 {
        return Err(Error::InvalidArgument(
            "BO iterations, reps and candidates must be >= 1".into(),
        ));
    }
    let d = bounds.len();
    let mut xs: Vec<Vec<f64>> = Vec::with_capacity(opts.iterations);
    let mut ys: Vec<f64> = Vec::with_capacity(opts.iterations);
    let mut best: Option<(FlingParams, f64)> = None;
    let start = log.len();
    for _ in 0..opts.iterations {
        let model = GpModel::fit(xs.clone(), ys.clone(), opts.hyper)?;
        let mu_star = best.as_ref().map_or(opts.hyper.prior_mean, |b| b.1);
        let mut pick: Option<(Vec<f64>, f64)> = None;
        for _ in 0..opts.candidates {
            let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let (m, s) = model.predict(&u);
            let ei = expected_improvement(m, s, mu_star)?;
            if pick.as_ref().is_none_or(|p| ei > p.1) {
                pick = Some((u, ei));
            }
        }
        let (u, _) = pick.expect("candidates >= 1");
        let p = bounds.denormalize(&u);
        let avg = evaluate(env, &p, opts.reps, seed, log)?;
        if best.as_ref().is_none_or(|b| avg > b.1) {
            best = Some((p, avg));
        }
        xs.push(u);
        ys.push(avg);
    }
    let (best, best_value) = best.expect("iterations >= 1");
    Ok(BaselineOutcome {
        best,
        best_value,
        trials: log.len() - start,
    })
}

/// CEM with the whole bounds box as its cell, started at the box center.
pub fn run_cem_full<E, R>(
    env: &mut E,
    bounds: &ParamBounds,
    iterations: usize,
    opts: &CemOptions,
    rng: &mut R,
    seed: u64,
    log: &mut TrialLog,
) -> Result<BaselineOutcome>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    let start = log.len();
    let state = CemState::for_cell(bounds.full_cell(), None);
    let out = run_cem_from(
        state,
        env,
        iterations,
        opts,
        rng,
        seed,
        Phase::Baseline,
        log,
    )?;
    Ok(BaselineOutcome {
        best: out.best.params,
        best_value: out.best.average,
        trials: log.len() - start,
    })
}

/// Uniform random search; returns the best single-trial outcome.
pub fn run_random<E, R>(
    env: &mut E,
    bounds: &ParamBounds,
    trials: usize,
    rng: &mut R,
    seed: u64,
    log: &mut TrialLog,
) -> Result<BaselineOutcome>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    if trials < 1 {
        return Err(Error::InvalidArgument(
            "random search needs >= 1 trial".into(),
        ));
    }
    let start = log.len();
    let mut best: Option<(FlingParams, f64)> = None;
    for _ in 0..trials {
        let p = sample_uniform(bounds, rng);
        let r = evaluate(env, &p, 1, seed, log)?;
        if best.as_ref().is_none_or(|b| r > b.1) {
            best = Some((p, r));
        }
    }
    let (best, best_value) = best.expect("trials >= 1");
    Ok(BaselineOutcome {
        best,
        best_value,
        trials: log.len() - start,
    })
}

pub fn sample_uniform<R: Rng + ?Sized>(bounds: &ParamBounds, rng: &mut R) -> FlingParams {
    let u: Vec<f64> = (0..bounds.len()).map(|_| rng.random::<f64>()).collect();
    bounds.denormalize(&u)
}
