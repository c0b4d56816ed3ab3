//! Execution-time stopping rules for repeated flings of the chosen action,
//! and bootstrap estimation of their stopping-time distributions.
//!
//! All three rules read the trained belief `N(mu, sigma^2)` of the executed
//! action:
//!
//! * z-score: stop once the best coverage so far reaches `mu + z sigma`;
//! * one-step EI: stop once `EI(mu, sigma, reference)` drops below a
//!   threshold, the reference being the best (default) or last coverage;
//! * budget EI: Monte-Carlo estimate of the improvement over the current
//!   coverage achievable in the remaining budget,
//!   `mean_i max(max_j r~_ij - r_current, 0)`, minus an optional per-step
//!   cost.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bandit::expected_improvement;
use crate::error::{Error, Result};
use crate::param_space::FlingParams;
use crate::sim_env::Environment;
use crate::trial::{Phase, TrialLog};

pub const DEFAULT_BUDGET: usize = 10;
pub const DEFAULT_EXEC_EI_THRESHOLD: f64 = 0.01;
pub const DEFAULT_POSTERIOR_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecPosterior {
    pub mu: f64,
    pub sigma: f64,
}

impl ExecPosterior {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "execution posterior needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mu + self.sigma * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    #[serde(alias = "rule1")]
    ZScore,
    #[serde(alias = "rule2")]
    OneStepEi,
    #[serde(alias = "rule3")]
    BudgetEi,
}

impl RuleKind {
    pub const ALL: [RuleKind; 3] = [RuleKind::ZScore, RuleKind::OneStepEi, RuleKind::BudgetEi];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::ZScore => "rule1",
            RuleKind::OneStepEi => "rule2",
            RuleKind::BudgetEi => "rule3",
        }
    }
}

/// Reference coverage for the one-step EI rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EiBaseline {
    #[default]
    BestSoFar,
    Last,
}

/// A rule plus its parameters. `threshold` is `z` for the z-score rule and
/// an EI threshold otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub kind: RuleKind,
    pub threshold: f64,
    #[serde(default)]
    pub baseline: EiBaseline,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub cost: f64,
}

fn default_samples() -> usize {
    DEFAULT_POSTERIOR_SAMPLES
}

impl RuleSpec {
    pub fn z_score(z: f64) -> Self {
        Self::new(RuleKind::ZScore, z)
    }

    pub fn one_step_ei(threshold: f64) -> Self {
        Self::new(RuleKind::OneStepEi, threshold)
    }

    pub fn budget_ei(threshold: f64, samples: usize) -> Self {
        Self {
            samples,
            ..Self::new(RuleKind::BudgetEi, threshold)
        }
    }

    pub fn new(kind: RuleKind, threshold: f64) -> Self {
        Self {
            kind,
            threshold,
            baseline: EiBaseline::BestSoFar,
            samples: DEFAULT_POSTERIOR_SAMPLES,
            cost: 0.0,
        }
    }

    pub fn with_threshold(self, threshold: f64) -> Self {
        Self { threshold, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{} threshold must be finite and > 0, got {}",
                self.kind.as_str(),
                self.threshold
            )));
        }
        if self.kind == RuleKind::BudgetEi && self.samples < 1 {
            return Err(Error::InvalidArgument(
                "posterior sample sets L must be >= 1".into(),
            ));
        }
        if !(self.cost.is_finite() && self.cost >= 0.0) {
            return Err(Error::InvalidArgument("fling cost must be >= 0".into()));
        }
        Ok(())
    }
}

/// Stop iff `r_best_so_far >= mu + z sigma`.
pub fn rule1_should_stop(post: &ExecPosterior, r_best_so_far: f64, z: f64) -> Result<bool> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::InvalidArgument(format!("z must be > 0, got {z}")));
    }
    Ok(r_best_so_far >= post.mu + z * post.sigma)
}

/// Stop iff the one-step EI over `reference` is below `ei_threshold`.
pub fn rule2_should_stop(
    post: &ExecPosterior,
    reference: f64,
    ei_threshold: f64,
) -> Result<(bool, f64)> {
    if !(ei_threshold.is_finite() && ei_threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "EI threshold must be > 0, got {ei_threshold}"
        )));
    }
    let ei = expected_improvement(post.mu, post.sigma, reference)?;
    Ok((ei < ei_threshold, ei))
}

/// Monte-Carlo improvement over `r_current` achievable in `remaining`
/// further flings, from `samples` posterior sample sets. Zero when nothing
/// remains.
pub fn rule3_estimate<R: Rng + ?Sized>(
    post: &ExecPosterior,
    r_current: f64,
    remaining: usize,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if samples < 1 {
        return Err(Error::InvalidArgument(
            "posterior sample sets L must be >= 1".into(),
        ));
    }
    if remaining == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for _ in 0..samples {
        let mut best = f64::NEG_INFINITY;
        for _ in 0..remaining {
            best = best.max(post.sample(rng));
        }
        total += (best - r_current).max(0.0);
    }
    Ok(total / samples as f64)
}

/// Budget-EI rule at step `step` (1-based) of `budget`.
#[allow(clippy::too_many_arguments)]
pub fn rule3_should_stop<R: Rng + ?Sized>(
    post: &ExecPosterior,
    r_current: f64,
    step: usize,
    budget: usize,
    samples: usize,
    threshold: f64,
    cost: f64,
    rng: &mut R,
) -> Result<(bool, f64)> {
    if step < 1 || step > budget {
        return Err(Error::InvalidArgument(format!(
            "step {step} outside 1..={budget}"
        )));
    }
    let remaining = budget - step;
    let ei = rule3_estimate(post, r_current, remaining, samples, rng)? - cost * remaining as f64;
    Ok((ei < threshold, ei))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecEpisode {
    pub coverages: Vec<f64>,
    pub budget: usize,
    pub rule: RuleSpec,
    /// The rule fired (as opposed to running out of budget).
    pub stopped: bool,
    pub flings: usize,
    /// Rule statistic at each step: best-so-far coverage for the z-score
    /// rule, EI for the others.
    pub statistics: Vec<f64>,
}

impl ExecEpisode {
    pub fn best_coverage(&self) -> f64 {
        self.coverages
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

struct RuleState {
    best: f64,
}

fn decide<R: Rng + ?Sized>(
    rule: &RuleSpec,
    post: &ExecPosterior,
    state: &RuleState,
    r: f64,
    step: usize,
    budget: usize,
    rng: &mut R,
) -> Result<(bool, f64)> {
    match rule.kind {
        RuleKind::ZScore => Ok((
            rule1_should_stop(post, state.best, rule.threshold)?,
            state.best,
        )),
        RuleKind::OneStepEi => {
            let reference = match rule.baseline {
                EiBaseline::BestSoFar => state.best,
                EiBaseline::Last => r,
            };
            let ei = expected_improvement(post.mu, post.sigma, reference)? - rule.cost;
            Ok((ei < rule.threshold, ei))
        }
        RuleKind::BudgetEi => rule3_should_stop(
            post,
            r,
            step,
            budget,
            rule.samples,
            rule.threshold,
            rule.cost,
            rng,
        ),
    }
}

/// Flings `action` until `rule` fires or `budget` flings are used.
#[allow(clippy::too_many_arguments)]
pub fn run_execution<E, R>(
    env: &mut E,
    action: &FlingParams,
    arm: Option<usize>,
    post: &ExecPosterior,
    rule: &RuleSpec,
    budget: usize,
    rng: &mut R,
    seed: u64,
    log: &mut TrialLog,
) -> Result<ExecEpisode>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    rule.validate()?;
    if budget < 1 {
        return Err(Error::InvalidArgument(
            "execution budget must be >= 1".into(),
        ));
    }
    let mut state = RuleState {
        best: f64::NEG_INFINITY,
    };
    let mut coverages = Vec::new();
    let mut statistics = Vec::new();
    let mut stopped = false;
    for step in 1..=budget {
        let r = env.trial(action)?;
        log.push(Phase::Exec, arm, action.clone(), r, seed)?;
        coverages.push(r);
        state.best = state.best.max(r);
        let (stop, stat) = decide(rule, post, &state, r, step, budget, rng)?;
        statistics.push(stat);
        if stop {
            stopped = true;
            break;
        }
    }
    Ok(ExecEpisode {
        flings: coverages.len(),
        coverages,
        budget,
        rule: *rule,
        stopped,
        statistics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StopTimeStat {
    pub rule: RuleKind,
    pub threshold: f64,
    pub mean_stops: f64,
    pub std_stops: f64,
}

/// Bootstrap stopping-time statistics for one rule over a threshold grid.
///
/// Each resample is an episode of `budget` coverages drawn with replacement
/// from `observed`. The same episodes (and, for the budget-EI rule, the same
/// posterior draws per distinct `(coverage, remaining)` pair) are reused for
/// every threshold, so curves are exactly monotone in the threshold.
pub fn bootstrap_stop_analysis<R: Rng + ?Sized>(
    observed: &[f64],
    post: &ExecPosterior,
    rule: &RuleSpec,
    thresholds: &[f64],
    budget: usize,
    resamples: usize,
    rng: &mut R,
) -> Result<Vec<StopTimeStat>> {
    if observed.len() < 2 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least 2 observed coverages".into(),
        ));
    }
    if observed.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("observed coverages"));
    }
    if resamples < 1 || budget < 1 {
        return Err(Error::InvalidArgument(
            "resamples and budget must be >= 1".into(),
        ));
    }
    for &t in thresholds {
        rule.with_threshold(t).validate()?;
    }

    // rule-3 estimates depend only on (observed index, remaining budget)
    let budget_table = if rule.kind == RuleKind::BudgetEi {
        let mut table = vec![0.0; observed.len() * budget];
        for (i, &r) in observed.iter().enumerate() {
            for remaining in 0..budget {
                table[i * budget + remaining] =
                    rule3_estimate(post, r, remaining, rule.samples, rng)?
                        - rule.cost * remaining as f64;
            }
        }
        Some(table)
    } else {
        None
    };

    let n = observed.len();
    let mut times = vec![vec![0usize; resamples]; thresholds.len()];
    let mut idx = vec![0usize; budget];
    let mut stat = vec![0.0; budget];
    for s in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        let mut best = f64::NEG_INFINITY;
        for (j, &i) in idx.iter().enumerate() {
            let r = observed[i];
            best = best.max(r);
            stat[j] = match rule.kind {
                RuleKind::ZScore => best,
                RuleKind::OneStepEi => {
                    let reference = match rule.baseline {
                        EiBaseline::BestSoFar => best,
                        EiBaseline::Last => r,
                    };
                    expected_improvement(post.mu, post.sigma, reference)? - rule.cost
                }
                RuleKind::BudgetEi => {
                    budget_table.as_ref().expect("table")[i * budget + budget - 1 - j]
                }
            };
        }
        for (t, &thr) in thresholds.iter().enumerate() {
            let fired = stat.iter().position(|&v| match rule.kind {
                RuleKind::ZScore => v >= post.mu + thr * post.sigma,
                _ => v < thr,
            });
            times[t][s] = fired.map_or(budget, |j| j + 1);
        }
    }

    Ok(thresholds
        .iter()
        .zip(&times)
        .map(|(&threshold, ts)| {
            let m = ts.iter().sum::<usize>() as f64 / ts.len() as f64;
            let v = ts.iter().map(|&t| (t as f64 - m).powi(2)).sum::<f64>() / ts.len() as f64;
            StopTimeStat {
                rule: rule.kind,
                threshold,
                mean_stops: m,
                std_stops: v.sqrt(),
            }
        })
        .collect())
}

/// CSV with columns `rule,threshold,mean_stops,std_stops`.
pub fn stopping_table_csv(rows: &[StopTimeStat]) -> String {
    let mut out = String::from("rule,threshold,mean_stops,std_stops\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.rule.as_str(),
            r.threshold,
            r.mean_stops,
            r.std_stops
        );
    }
    out
}

/// Parses observed coverages: one number per line or comma-separated; blank
/// lines, `#` comments and a non-numeric first line (a header) are skipped.
pub fn parse_coverages(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(',')
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(vals) => {
                for v in vals {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::Parse(format!(
                            "line {}: coverage {v} outside [0, 1]",
                            lineno + 1
                        )));
                    }
                    out.push(v);
                }
            }
            Err(_) if out.is_empty() && lineno == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", lineno + 1))),
        }
    }
    Ok(out)
}
