//! Thompson-sampling bandit over grid arms with an expected-improvement
//! stopping rule.

use rand::Rng;
use statrs::function::erf::erfc;

use crate::belief::{BeliefBank, SigmaKind};
use crate::error::{Error, Result};
use crate::param_space::ActionGrid;
use crate::sim_env::Environment;
use crate::trial::{Phase, StopReason, TrialLog};

/// Default training-time EI threshold (absolute coverage).
pub const DEFAULT_EI_THRESHOLD: f64 = 0.015;
pub const DEFAULT_MAB_ITERATIONS: usize = 50;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `E[max(X - mu_star, 0)]` for `X ~ N(mu, sigma^2)`.
///
/// `(mu - mu_star) Phi(Z) + sigma phi(Z)` with `Z = (mu - mu_star) / sigma`;
/// at `sigma = 0` this is `max(mu - mu_star, 0)`.
pub fn expected_improvement(mu: f64, sigma: f64, mu_star: f64) -> Result<f64> {
    if !(mu.is_finite() && sigma.is_finite() && mu_star.is_finite()) {
        return Err(Error::NonFinite("expected improvement input"));
    }
    if sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma must be >= 0, got {sigma}"
        )));
    }
    let gap = mu - mu_star;
    if sigma == 0.0 {
        return Ok(gap.max(0.0));
    }
    let z = gap / sigma;
    Ok((gap * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0))
}

/// Draws one sample per arm and returns the argmax (lowest index on ties).
pub fn select_action<R: Rng + ?Sized>(bank: &BeliefBank, rng: &mut R) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, b) in bank.beliefs().iter().enumerate() {
        let s = b.sample(rng);
        if s > best.1 {
            best = (k, s);
        }
    }
    best.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCheck {
    pub stop: bool,
    pub max_ei: f64,
    pub best_mean: f64,
}

/// Max over arms of EI against the best posterior mean; stop when it is
/// below `threshold`.
pub fn training_should_stop(
    bank: &BeliefBank,
    threshold: f64,
    kind: SigmaKind,
) -> Result<StopCheck> {
    check_threshold(threshold)?;
    let best_mean = bank.best_mean();
    let mut max_ei = 0.0f64;
    for (k, b) in bank.beliefs().iter().enumerate() {
        max_ei = max_ei.max(expected_improvement(b.mu, bank.sigma(k, kind), best_mean)?);
    }
    Ok(StopCheck {
        stop: max_ei < threshold,
        max_ei,
        best_mean,
    })
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold.is_finite() && threshold >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "EI threshold must be finite and >= 0, got {threshold}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MabOptions {
    pub iteration_limit: usize,
    pub threshold: f64,
    pub sigma_kind: SigmaKind,
}

impl Default for MabOptions {
    fn default() -> Self {
        Self {
            iteration_limit: DEFAULT_MAB_ITERATIONS,
            threshold: DEFAULT_EI_THRESHOLD,
            sigma_kind: SigmaKind::Posterior,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MabResult {
    pub bank: BeliefBank,
    pub best_arm: usize,
    pub trials_used: usize,
    pub stop_reason: StopReason,
    pub max_ei: f64,
}

/// Select, execute, update, check; repeated until the EI rule fires or the
/// iteration limit is reached.
///
/// Trials are appended to `log`; on an environment error the trials run so
/// far stay in the log. `seed` is recorded on every row.
pub fn run_mab<E, R>(
    env: &mut E,
    grid: &ActionGrid,
    prior: BeliefBank,
    opts: &MabOptions,
    rng: &mut R,
    seed: u64,
    log: &mut TrialLog,
) -> Result<MabResult>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    if opts.iteration_limit < 1 {
        return Err(Error::InvalidArgument(
            "iteration limit must be >= 1".into(),
        ));
    }
    check_threshold(opts.threshold)?;
    if prior.arms() != grid.arms() {
        return Err(Error::InvalidArgument(format!(
            "prior has {} arms, grid has {}",
            prior.arms(),
            grid.arms()
        )));
    }
    let mut bank = prior;
    let mut stop_reason = StopReason::IterationLimit;
    let mut max_ei = f64::INFINITY;
    let mut used = 0;
    while used < opts.iteration_limit {
        let k = select_action(&bank, rng);
        let params = grid.center(k)?.clone();
        let r = env.trial(&params)?;
        log.push(Phase::Mab, Some(k), params, r, seed)?;
        bank.observe(k, r)?;
        used += 1;
        let check = training_should_stop(&bank, opts.threshold, opts.sigma_kind)?;
        max_ei = check.max_ei;
        let row = log.last_mut().expect("just pushed");
        row.best_posterior_mean = Some(check.best_mean);
        row.max_ei = Some(check.max_ei);
        if check.stop {
            stop_reason = StopReason::EiThreshold;
            break;
        }
    }
    if let Some(row) = log.last_mut() {
        row.stopped_reason = Some(stop_reason);
    }
    Ok(MabResult {
        best_arm: bank.best_arm(),
        bank,
        trials_used: used,
        stop_reason,
        max_ei,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::GaussianBelief;
    use crate::param_space::{FlingParams, ParamBounds};
    use crate::seed::rng_from;

    fn bank(beliefs: &[(f64, f64)]) -> BeliefBank {
        BeliefBank::new(
            beliefs
                .iter()
                .map(|&(m, s)| GaussianBelief::new(m, s))
                .collect(),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn ei_examples() {
        let ei = expected_improvement(0.7, 1.0, 0.7).unwrap();
        assert!((ei - INV_SQRT_2PI).abs() < 1e-15);
        assert!((ei - 0.39894).abs() < 1e-5);
        assert_eq!(expected_improvement(0.5, 0.0, 0.7).unwrap(), 0.0);
        assert_eq!(expected_improvement(0.9, 0.0, 0.7).unwrap(), 0.9 - 0.7);
        // frozen from the Monte-Carlo oracle in tests/oracles.rs
        let ei = expected_improvement(0.6, 0.05, 0.7).unwrap();
        assert!((ei - 4.245e-4).abs() < 5e-7, "{ei}");
        assert!(expected_improvement(f64::NAN, 1.0, 0.0).is_err());
        assert!(expected_improvement(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn select_degenerate_and_ties() {
        let mut rng = rng_from(0);
        let mut arms = vec![(0.0, 0.0); 16];
        arms[3] = (1.0, 0.0);
        assert_eq!(select_action(&bank(&arms), &mut rng), 3);
        assert_eq!(select_action(&bank(&[(0.5, 0.0); 16]), &mut rng), 0);
    }

    #[test]
    fn select_separated_arms() {
        let b = bank(&[(0.9, 0.01), (0.1, 0.01)]);
        let mut rng = rng_from(42);
        let zeros = (0..1000)
            .filter(|_| select_action(&b, &mut rng) == 0)
            .count();
        assert!(zeros >= 999);
    }

    #[test]
    fn training_stop_examples() {
        assert_eq!(DEFAULT_EI_THRESHOLD, 0.015);
        let c = training_should_stop(
            &bank(&[(0.2, 0.0), (0.7, 0.0)]),
            0.015,
            SigmaKind::Posterior,
        )
        .unwrap();
        assert!(c.stop);
        assert_eq!(c.max_ei, 0.0);
        let c = training_should_stop(
            &bank(&[(0.7, 0.05), (0.7, 0.0)]),
            0.015,
            SigmaKind::Posterior,
        )
        .unwrap();
        assert!((c.max_ei - 0.05 * INV_SQRT_2PI).abs() < 1e-12);
        assert!((c.max_ei - 0.0199).abs() < 1e-4);
        assert!(!c.stop);
        assert!(
            training_should_stop(&bank(&[(0.5, 1.0)]), f64::INFINITY, SigmaKind::Posterior)
                .is_err()
        );
    }

    fn one_dim_grid() -> ActionGrid {
        ActionGrid::new(&ParamBounds::default_7d(), &[0, 1, 2, 3], 2).unwrap()
    }

    #[test]
    fn run_mab_rejects_bad_options() {
        let grid = one_dim_grid();
        let mut env = |_: &FlingParams| Ok(0.5);
        let mut log = TrialLog::new();
        let prior = BeliefBank::uninformed(16, 0.1).unwrap();
        let mut rng = rng_from(1);
        let inf = MabOptions {
            threshold: f64::INFINITY,
            ..MabOptions::default()
        };
        assert!(run_mab(&mut env, &grid, prior.clone(), &inf, &mut rng, 1, &mut log).is_err());
        let wrong = BeliefBank::uninformed(4, 0.1).unwrap();
        assert!(run_mab(
            &mut env,
            &grid,
            wrong,
            &MabOptions::default(),
            &mut rng,
            1,
            &mut log
        )
        .is_err());
        assert!(log.is_empty());
    }

    #[test]
    fn sharp_prior_stops_after_one_trial() {
        let grid = one_dim_grid();
        let beliefs = (0..16)
            .map(|k| GaussianBelief::new(0.3 + 0.03 * k as f64, 0.001))
            .collect();
        let prior = BeliefBank::new(beliefs, 0.1).unwrap();
        let mut env = |_: &FlingParams| Ok(0.5);
        let mut log = TrialLog::new();
        let res = run_mab(
            &mut env,
            &grid,
            prior,
            &MabOptions::default(),
            &mut rng_from(2),
            2,
            &mut log,
        )
        .unwrap();
        assert_eq!(res.trials_used, 1);
        assert_eq!(res.stop_reason, StopReason::EiThreshold);
        assert_eq!(log.len(), 1);
        assert_eq!(
            log.records()[0].stopped_reason,
            Some(StopReason::EiThreshold)
        );
    }

    #[test]
    fn env_failure_keeps_partial_log() {
        let grid = one_dim_grid();
        let mut calls = 0;
        let mut env = |_: &FlingParams| {
            calls += 1;
            if calls > 3 {
                Err(Error::Environment("camera lost".into()))
            } else {
                Ok(0.4)
            }
        };
        let mut log = TrialLog::new();
        let prior = BeliefBank::uninformed(16, 0.1).unwrap();
        let err = run_mab(
            &mut env,
            &grid,
            prior,
            &MabOptions::default(),
            &mut rng_from(3),
            3,
            &mut log,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Environment(_)));
        assert_eq!(log.len(), 3);
    }

    #[test]
    fn zero_threshold_runs_to_limit() {
        let grid = one_dim_grid();
        let mut env = |p: &FlingParams| Ok(0.2 + 0.1 * (p[0] - 2.0));
        let mut log = TrialLog::new();
        let opts = MabOptions {
            threshold: 0.0,
            iteration_limit: 37,
            ..MabOptions::default()
        };
        let prior = BeliefBank::uninformed(16, 0.1).unwrap();
        let res = run_mab(&mut env, &grid, prior, &opts, &mut rng_from(4), 4, &mut log).unwrap();
        assert_eq!(res.trials_used, 37);
        assert_eq!(log.len(), 37);
        assert_eq!(res.stop_reason, StopReason::IterationLimit);
        assert!(log.iter().all(|r| r.arm.unwrap() < 16));
    }
}
