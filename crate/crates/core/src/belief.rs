//! Gaussian reward beliefs per arm.
//!
//! Each arm's mean reward carries a Gaussian belief updated under a
//! known-observation-noise conjugate model: every observation adds
//! `1 / obs_noise_sigma^2` to the precision and the mean is the
//! precision-weighted average. Rewards are not clamped here.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const UNINFORMED_MEAN: f64 = 0.5;
pub const UNINFORMED_SIGMA: f64 = 1.0;
pub const DEFAULT_OBS_NOISE_SIGMA: f64 = 0.1;
/// Floor applied to informed-prior standard deviations.
pub const DEFAULT_PRIOR_SIGMA_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBelief {
    pub mu: f64,
    pub sigma: f64,
    pub n_obs: u64,
    pub sum_rewards: f64,
}

impl GaussianBelief {
    pub fn new(mu: f64, sigma: f64) -> Self {
        Self {
            mu,
            sigma,
            n_obs: 0,
            sum_rewards: 0.0,
        }
    }

    pub fn uninformed() -> Self {
        Self::new(UNINFORMED_MEAN, UNINFORMED_SIGMA)
    }

    /// Conjugate update with one observation.
    ///
    /// A zero-sigma belief is a point mass and keeps its mean; only the
    /// counters move.
    pub fn update(&self, r: f64, obs_noise_sigma: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        if !(obs_noise_sigma > 0.0 && obs_noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "obs_noise_sigma must be positive, got {obs_noise_sigma}"
            )));
        }
        let mut next = *self;
        next.n_obs += 1;
        next.sum_rewards += r;
        if self.sigma > 0.0 {
            let prior_prec = 1.0 / (self.sigma * self.sigma);
            let obs_prec = 1.0 / (obs_noise_sigma * obs_noise_sigma);
            let prec = prior_prec + obs_prec;
            next.mu = (self.mu * prior_prec + r * obs_prec) / prec;
            next.sigma = prec.recip().sqrt();
        }
        Ok(next)
    }

    /// One draw from `N(mu, sigma^2)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mu + self.sigma * z
    }

    /// Standard deviation of a fresh observation: epistemic plus aleatoric.
    pub fn predictive_sigma(&self, obs_noise_sigma: f64) -> f64 {
        self.sigma.hypot(obs_noise_sigma)
    }
}

/// Which standard deviation a consumer reads from a belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigmaKind {
    /// Uncertainty of the mean reward.
    #[default]
    Posterior,
    /// Uncertainty of a single new outcome.
    Predictive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefBank {
    beliefs: Vec<GaussianBelief>,
    obs_noise_sigma: f64,
}

impl BeliefBank {
    pub fn new(beliefs: Vec<GaussianBelief>, obs_noise_sigma: f64) -> Result<Self> {
        if beliefs.is_empty() {
            return Err(Error::InvalidArgument(
                "belief bank needs at least one arm".into(),
            ));
        }
        if !(obs_noise_sigma > 0.0 && obs_noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "obs_noise_sigma must be positive, got {obs_noise_sigma}"
            )));
        }
        if beliefs
            .iter()
            .any(|b| !b.mu.is_finite() || !b.sigma.is_finite() || b.sigma < 0.0)
        {
            return Err(Error::InvalidArgument(
                "beliefs need finite mu and sigma >= 0".into(),
            ));
        }
        Ok(Self {
            beliefs,
            obs_noise_sigma,
        })
    }

    /// `N(0.5, 1)` on every arm.
    pub fn uninformed(arms: usize, obs_noise_sigma: f64) -> Result<Self> {
        if arms < 1 {
            return Err(Error::InvalidArgument(
                "arm count must be at least 1".into(),
            ));
        }
        Self::new(vec![GaussianBelief::uninformed(); arms], obs_noise_sigma)
    }

    pub fn arms(&self) -> usize {
        self.beliefs.len()
    }

    pub fn beliefs(&self) -> &[GaussianBelief] {
        &self.beliefs
    }

    pub fn belief(&self, k: usize) -> &GaussianBelief {
        &self.beliefs[k]
    }

    pub fn obs_noise_sigma(&self) -> f64 {
        self.obs_noise_sigma
    }

    pub fn sigma(&self, k: usize, kind: SigmaKind) -> f64 {
        let b = &self.beliefs[k];
        match kind {
            SigmaKind::Posterior => b.sigma,
            SigmaKind::Predictive => b.predictive_sigma(self.obs_noise_sigma),
        }
    }

    pub fn observe(&mut self, k: usize, r: f64) -> Result<()> {
        let arms = self.arms();
        let b = self
            .beliefs
            .get_mut(k)
            .ok_or(Error::InvalidArm { index: k, arms })?;
        *b = b.update(r, self.obs_noise_sigma)?;
        Ok(())
    }

    /// Arm with the highest posterior mean, lowest index on ties.
    pub fn best_arm(&self) -> usize {
        let mut best = 0;
        for (k, b) in self.beliefs.iter().enumerate().skip(1) {
            if b.mu > self.beliefs[best].mu {
                best = k;
            }
        }
        best
    }

    pub fn best_mean(&self) -> f64 {
        self.beliefs[self.best_arm()].mu
    }
}

/// Summary statistics of one arm's observed coverages on one garment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub index: usize,
    pub mean: f64,
    pub std: f64,
    pub count: u64,
}

/// Per-arm empirical coverage statistics for one training garment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarmentStats {
    pub garment: String,
    pub category: String,
    pub arms: Vec<ArmStats>,
}

impl GarmentStats {
    /// Population mean/std per arm from `(arm, reward)` observations.
    pub fn from_observations(
        garment: &str,
        category: &str,
        arms: usize,
        observations: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<Self> {
        let mut per_arm: Vec<Vec<f64>> = vec![Vec::new(); arms];
        for (k, r) in observations {
            per_arm
                .get_mut(k)
                .ok_or(Error::InvalidArm { index: k, arms })?
                .push(r);
        }
        let arms = per_arm
            .iter()
            .enumerate()
            .map(|(index, rs)| {
                let (mean, std) = mean_std(rs);
                ArmStats {
                    index,
                    mean,
                    std,
                    count: rs.len() as u64,
                }
            })
            .collect();
        Ok(Self {
            garment: garment.to_string(),
            category: category.to_string(),
            arms,
        })
    }

    fn validate(&self) -> Result<()> {
        for (i, a) in self.arms.iter().enumerate() {
            if a.index != i {
                return Err(Error::Parse(format!(
                    "garment `{}`: arm entries must be ordered by index",
                    self.garment
                )));
            }
            if !a.mean.is_finite() || !a.std.is_finite() || a.std < 0.0 {
                return Err(Error::Parse(format!(
                    "garment `{}` arm {i}: mean must be finite and std >= 0",
                    self.garment
                )));
            }
        }
        Ok(())
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// The persisted collection of training-garment statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct PriorBank(pub Vec<GarmentStats>);

impl PriorBank {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let bank: PriorBank = serde_json::from_str(s)?;
        for g in &bank.0 {
            g.validate()?;
        }
        Ok(bank)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    #[default]
    Uninformed,
    /// Pool every training garment.
    #[serde(alias = "all-garment", alias = "all_garment")]
    All,
    /// Pool only garments of the test garment's category.
    Category,
}

/// Informed prior from pooled training statistics.
///
/// Per arm the prior is the mean and population std over every raw
/// observation of the selected garments, recovered exactly from each
/// garment's `(mean, std, count)`. Arms nobody observed fall back to
/// `N(0.5, 1)`; stds below `sigma_floor` are raised to it.
pub fn informed_prior(
    stats: &[GarmentStats],
    mode: PriorMode,
    test_category: &str,
    arms: usize,
    obs_noise_sigma: f64,
    sigma_floor: f64,
) -> Result<BeliefBank> {
    if mode == PriorMode::Uninformed {
        return BeliefBank::uninformed(arms, obs_noise_sigma);
    }
    let selected: Vec<&GarmentStats> = stats
        .iter()
        .filter(|g| mode == PriorMode::All || g.category == test_category)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyPrior(match mode {
            PriorMode::Category => test_category.to_string(),
            _ => "*".to_string(),
        }));
    }
    if let Some(g) = selected.iter().find(|g| g.arms.len() != arms) {
        return Err(Error::InvalidArgument(format!(
            "garment `{}` has {} arms, expected {arms}",
            g.garment,
            g.arms.len()
        )));
    }
    let beliefs = (0..arms)
        .map(|k| {
            let (mut n, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for g in &selected {
                let a = &g.arms[k];
                let c = a.count as f64;
                n += c;
                s1 += c * a.mean;
                s2 += c * (a.std * a.std + a.mean * a.mean);
            }
            if n == 0.0 {
                return GaussianBelief::uninformed();
            }
            let mean = s1 / n;
            let var = (s2 / n - mean * mean).max(0.0);
            GaussianBelief::new(mean, var.sqrt().max(sigma_floor))
        })
        .collect();
    BeliefBank::new(beliefs, obs_noise_sigma)
}
