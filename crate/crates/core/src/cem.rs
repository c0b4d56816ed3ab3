//! Cross-entropy refinement inside one grid cell.
//!
//! The sampling distribution is a diagonal Gaussian. Draws outside the
//! cell are clipped onto it. Each candidate is evaluated `reps` times and
//! ranked by its average.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::param_space::{ActionGrid, Cell, FlingParams};
use crate::sim_env::Environment;
use crate::trial::{Phase, TrialLog};

/// Per-dimension std floor as a fraction of the cell width.
pub const DEFAULT_STD_FLOOR_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CemOptions {
    pub batch: usize,
    pub elites: usize,
    pub reps: usize,
    pub std_floor_fraction: f64,
}

impl Default for CemOptions {
    fn default() -> Self {
        Self {
            batch: 5,
            elites: 3,
            reps: 3,
            std_floor_fraction: DEFAULT_STD_FLOOR_FRACTION,
        }
    }
}

impl CemOptions {
    fn validate(&self) -> Result<()> {
        if self.batch < 1 || self.elites < 1 || self.reps < 1 {
            return Err(Error::InvalidArgument(
                "batch, elites and reps must be >= 1".into(),
            ));
        }
        if self.elites > self.batch {
            return Err(Error::InvalidArgument(format!(
                "elites ({}) exceed batch ({})",
                self.elites, self.batch
            )));
        }
        if !(self.std_floor_fraction.is_finite() && self.std_floor_fraction >= 0.0) {
            return Err(Error::InvalidArgument("std floor must be >= 0".into()));
        }
        Ok(())
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub params: FlingParams,
    pub rewards: Vec<f64>,
    pub average: f64,
}

#[derive(Debug, Clone)]
pub struct CemState {
    pub cell: Cell,
    pub arm: Option<usize>,
    pub mean: FlingParams,
    pub std: Vec<f64>,
    pub iteration: usize,
    /// Elite candidates of each completed iteration.
    pub elite_history: Vec<Vec<Candidate>>,
}

impl CemState {
    /// Mean at the cell center, std = half-width / 2 on varied dimensions
    /// and 0 elsewhere.
    pub fn for_cell(cell: Cell, arm: Option<usize>) -> Self {
        let std = (0..cell.lo.len())
            .map(|i| {
                if cell.varied[i] {
                    cell.width(i) / 4.0
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            mean: FlingParams(cell.center.clone()),
            cell,
            arm,
            std,
            iteration: 0,
            elite_history: Vec::new(),
        }
    }

    fn floor(&self, i: usize, fraction: f64) -> f64 {
        if self.cell.varied[i] {
            fraction * self.cell.width(i)
        } else {
            0.0
        }
    }
}

pub fn cem_init(grid: &ActionGrid, k: usize) -> Result<CemState> {
    Ok(CemState::for_cell(grid.cell(k)?, Some(k)))
}

/// One CEM iteration. Returns the evaluated batch in sample order.
pub fn cem_iterate<E, R>(
    state: &mut CemState,
    env: &mut E,
    opts: &CemOptions,
    rng: &mut R,
    seed: u64,
    phase: Phase,
    log: &mut TrialLog,
) -> Result<Vec<Candidate>>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    opts.validate()?;
    let dims = state.mean.len();
    let mut batch = Vec::with_capacity(opts.batch);
    for _ in 0..opts.batch {
        let raw = FlingParams(
            (0..dims)
                .map(|i| {
                    let z: f64 = rng.sample(StandardNormal);
                    state.mean[i] + state.std[i] * z
                })
                .collect(),
        );
        let params = state.cell.clip(&raw);
        let mut rewards = Vec::with_capacity(opts.reps);
        for _ in 0..opts.reps {
            let r = env.trial(&params)?;
            log.push(phase, state.arm, params.clone(), r, seed)?;
            rewards.push(r);
        }
        let average = rewards.iter().sum::<f64>() / rewards.len() as f64;
        batch.push(Candidate {
            params,
            rewards,
            average,
        });
    }

    let mut order: Vec<usize> = (0..batch.len()).collect();
    // stable sort keeps the lower sample index first on ties
    order.sort_by(|&a, &b| batch[b].average.total_cmp(&batch[a].average));
    let elites: Vec<Candidate> = order[..opts.elites]
        .iter()
        .map(|&i| batch[i].clone())
        .collect();

    let n = elites.len() as f64;
    let mut mean = vec![0.0; dims];
    let mut std = vec![0.0; dims];
    for i in 0..dims {
        let m = elites.iter().map(|c| c.params[i]).sum::<f64>() / n;
        let v = elites
            .iter()
            .map(|c| (c.params[i] - m).powi(2))
            .sum::<f64>()
            / n;
        mean[i] = m;
        std[i] = v.sqrt().max(state.floor(i, opts.std_floor_fraction));
    }
    state.mean = state.cell.clip(&FlingParams(mean));
    state.std = std;
    state.iteration += 1;
    state.elite_history.push(elites);
    Ok(batch)
}

#[derive(Debug, Clone)]
pub struct CemOutcome {
    pub best: Candidate,
    pub state: CemState,
}

/// Runs `iterations` CEM steps from `state` and returns the candidate with
/// the highest average reward seen (earliest on ties).
#[allow(clippy::too_many_arguments)]
pub fn run_cem_from<E, R>(
    mut state: CemState,
    env: &mut E,
    iterations: usize,
    opts: &CemOptions,
    rng: &mut R,
    seed: u64,
    phase: Phase,
    log: &mut TrialLog,
) -> Result<CemOutcome>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    if iterations < 1 {
        return Err(Error::InvalidArgument(
            "CEM needs at least one iteration".into(),
        ));
    }
    let mut best: Option<Candidate> = None;
    for _ in 0..iterations {
        for c in cem_iterate(&mut state, env, opts, rng, seed, phase, log)? {
            if best.as_ref().is_none_or(|b| c.average > b.average) {
                best = Some(c);
            }
        }
    }
    Ok(CemOutcome {
        best: best.expect("at least one candidate"),
        state,
    })
}

/// CEM constrained to arm `k`'s cell.
#[allow(clippy::too_many_arguments)]
pub fn run_cem<E, R>(
    grid: &ActionGrid,
    k: usize,
    env: &mut E,
    iterations: usize,
    opts: &CemOptions,
    rng: &mut R,
    seed: u64,
    log: &mut TrialLog,
) -> Result<CemOutcome>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    run_cem_from(
        cem_init(grid, k)?,
        env,
        iterations,
        opts,
        rng,
        seed,
        Phase::Cem,
        log,
    )
}
