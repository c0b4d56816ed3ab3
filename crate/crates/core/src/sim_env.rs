//! Seeded synthetic garments standing in for physical fling trials.
//!
//! The mean coverage of a garment is a Gaussian bump over the parameter
//! space, `c0 + A * exp(-sum(((p_i - x*_i) / w_i)^2))`. Each trial starts
//! with a reset that perturbs the optimum slightly, then adds Gaussian noise
//! and clamps to `[0, 1]`. Clamping biases means close to 0 or 1 slightly.
//!
//! This is a stand-in landscape, not a calibrated model of cloth.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param_space::{FlingParams, ParamBounds};
use crate::seed::{self, derive_rng};

/// Anything that can execute one fling cycle and report coverage.
pub trait Environment {
    fn trial(&mut self, p: &FlingParams) -> Result<f64>;
}

impl<F> Environment for F
where
    F: FnMut(&FlingParams) -> Result<f64>,
{
    fn trial(&mut self, p: &FlingParams) -> Result<f64> {
        self(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "towel")]
    Towel,
    #[serde(rename = "t-shirt")]
    TShirt,
    #[serde(rename = "long-sleeve")]
    LongSleeve,
    #[serde(rename = "dress")]
    Dress,
    #[serde(rename = "sweat-pants")]
    SweatPants,
    #[serde(rename = "jeans")]
    Jeans,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Towel,
        Category::TShirt,
        Category::LongSleeve,
        Category::Dress,
        Category::SweatPants,
        Category::Jeans,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Towel => "towel",
            Category::TShirt => "t-shirt",
            Category::LongSleeve => "long-sleeve",
            Category::Dress => "dress",
            Category::SweatPants => "sweat-pants",
            Category::Jeans => "jeans",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

/// Noise std at `p` is `base + gain * (1 - bump(p))`: optionally noisier
/// away from the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub base: f64,
    #[serde(default)]
    pub gain: f64,
}

impl NoiseModel {
    pub fn constant(sigma: f64) -> Self {
        Self {
            base: sigma,
            gain: 0.0,
        }
    }

    fn sigma(&self, bump: f64) -> f64 {
        (self.base + self.gain * (1.0 - bump)).max(0.0)
    }
}

/// One synthetic garment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub garment: String,
    pub category: Category,
    pub bounds: ParamBounds,
    pub optimum: FlingParams,
    pub base_coverage: f64,
    pub amplitude: f64,
    /// Bump widths in parameter units.
    pub widths: Vec<f64>,
    pub noise: NoiseModel,
    /// Std of the per-episode optimum shift as a fraction of each range.
    pub perturbation: f64,
    pub seed: u64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        let d = self.bounds.len();
        if self.optimum.len() != d || self.widths.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.optimum.len().min(self.widths.len()),
            });
        }
        if self.optimum.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("optimum"));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.base_coverage)
            || !unit(self.amplitude)
            || self.base_coverage + self.amplitude > 1.0
        {
            return Err(Error::InvalidArgument(format!(
                "need c0, A in [0, 1] with c0 + A <= 1, got {} + {}",
                self.base_coverage, self.amplitude
            )));
        }
        if self.widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidArgument("widths must be positive".into()));
        }
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !nonneg(self.noise.base) || !self.noise.gain.is_finite() || !nonneg(self.perturbation) {
            return Err(Error::InvalidArgument(
                "noise and perturbation scales must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: EnvSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    fn bump_at(&self, optimum: &[f64], p: &FlingParams) -> f64 {
        let e: f64 = p
            .values()
            .iter()
            .zip(optimum)
            .zip(&self.widths)
            .map(|((x, o), w)| ((x - o) / w).powi(2))
            .sum();
        (-e).exp()
    }

    /// Noise-free mean coverage at `p`.
    pub fn mean_coverage(&self, p: &FlingParams) -> Result<f64> {
        self.bounds.check(p)?;
        Ok(self.base_coverage + self.amplitude * self.bump_at(self.optimum.values(), p))
    }

    /// Starts a new fling cycle: the optimum shifts by a small random offset.
    pub fn reset<R: Rng + ?Sized>(&self, index: u64, rng: &mut R) -> Episode {
        let optimum = self
            .optimum
            .values()
            .iter()
            .zip(self.bounds.dims())
            .map(|(o, d)| {
                let z: f64 = rng.sample(StandardNormal);
                o + self.perturbation * d.width() * z
            })
            .collect();
        Episode { index, optimum }
    }

    /// One noisy outcome in `episode`.
    pub fn fling<R: Rng + ?Sized>(
        &self,
        episode: &Episode,
        p: &FlingParams,
        rng: &mut R,
    ) -> Result<FlingOutcome> {
        self.bounds.check(p)?;
        let bump = self.bump_at(&episode.optimum, p);
        let mean = self.base_coverage + self.amplitude * bump;
        let z: f64 = rng.sample(StandardNormal);
        let coverage = (mean + self.noise.sigma(bump) * z).clamp(0.0, 1.0);
        Ok(FlingOutcome {
            coverage,
            episode: episode.index,
        })
    }
}

/// State of one fling cycle after reset.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub index: u64,
    pub optimum: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlingOutcome {
    pub coverage: f64,
    pub episode: u64,
}

/// A garment plus its own random stream; every trial is reset + fling.
#[derive(Debug, Clone)]
pub struct SimEnv {
    spec: EnvSpec,
    rng: seed::Rng,
    episodes: u64,
}

impl SimEnv {
    pub fn new(spec: EnvSpec) -> Self {
        let rng = seed::rng_from(spec.seed);
        Self {
            spec,
            rng,
            episodes: 0,
        }
    }

    /// Same garment, independent noise stream.
    pub fn with_stream(spec: EnvSpec, stream: u64) -> Self {
        let rng = seed::rng_from(seed::splitmix64(spec.seed ^ stream));
        Self {
            spec,
            rng,
            episodes: 0,
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }
}

impl Environment for SimEnv {
    fn trial(&mut self, p: &FlingParams) -> Result<f64> {
        let episode = self.spec.reset(self.episodes, &mut self.rng);
        self.episodes += 1;
        Ok(self.spec.fling(&episode, p, &mut self.rng)?.coverage)
    }
}

/// Largest number of evaluations `oracle_best` will perform.
pub const ORACLE_EVAL_CAP: u64 = 50_000_000;

/// Dense-grid argmax of the noise-free mean coverage.
///
/// `search_dims` are scanned with `resolution` evenly spaced points each
/// (endpoints included); all other coordinates come from `base`. Ties keep
/// the first point in row-major order.
pub fn oracle_best(
    spec: &EnvSpec,
    search_dims: &[usize],
    resolution: usize,
    base: &FlingParams,
) -> Result<(FlingParams, f64)> {
    if resolution < 2 {
        return Err(Error::InvalidArgument(
            "oracle resolution must be >= 2".into(),
        ));
    }
    spec.bounds.check(base)?;
    if search_dims.iter().any(|&i| i >= spec.bounds.len()) {
        return Err(Error::InvalidArgument(
            "oracle search dimension out of range".into(),
        ));
    }
    let evals = u32::try_from(search_dims.len())
        .ok()
        .and_then(|m| (resolution as u64).checked_pow(m))
        .filter(|&n| n <= ORACLE_EVAL_CAP)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("oracle grid exceeds {ORACLE_EVAL_CAP} evaluations"))
        })?;
    let axis = |i: usize, s: u64| {
        let d = spec.bounds.dim(i);
        if s as usize == resolution - 1 {
            d.hi
        } else {
            d.lo + d.width() * s as f64 / (resolution - 1) as f64
        }
    };
    let mut p = base.clone();
    let mut best = (base.clone(), f64::NEG_INFINITY);
    for n in 0..evals {
        let mut rest = n;
        for &i in search_dims.iter().rev() {
            p.0[i] = axis(i, rest % resolution as u64);
            rest /= resolution as u64;
        }
        let v = spec.mean_coverage(&p)?;
        if v > best.1 {
            best = (p.clone(), v);
        }
    }
    Ok(best)
}

/// Per-category base landscape in range-normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryProfile {
    pub category: Category,
    pub base_coverage: f64,
    pub amplitude: f64,
    /// Normalized optimum, 9 entries (the 7-D space uses the first 7).
    pub optimum: Vec<f64>,
    /// Normalized bump widths, 9 entries.
    pub widths: Vec<f64>,
    pub noise: NoiseModel,
    /// Std of per-garment optimum jitter, normalized units.
    pub jitter: f64,
    pub perturbation: f64,
}

/// Set of category profiles garments are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub profiles: Vec<CategoryProfile>,
}

const DEFAULT_CATALOG: &str = include_str!("../data/catalog.json");

impl Default for Catalog {
    fn default() -> Self {
        Self::from_json_str(DEFAULT_CATALOG).expect("bundled catalog is valid")
    }
}

impl Catalog {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cat: Catalog = serde_json::from_str(s)?;
        for p in &cat.profiles {
            if p.optimum.len() != 9 || p.widths.len() != 9 {
                return Err(Error::Parse(format!(
                    "profile `{}` needs 9 normalized optimum and width entries",
                    p.category
                )));
            }
            if p.optimum.iter().chain(&p.widths).any(|v| !v.is_finite())
                || !(p.jitter.is_finite() && p.jitter >= 0.0)
            {
                return Err(Error::Parse(format!(
                    "profile `{}` has non-finite or negative entries",
                    p.category
                )));
            }
        }
        Ok(cat)
    }

    pub fn profile(&self, category: Category) -> Result<&CategoryProfile> {
        self.profiles
            .iter()
            .find(|p| p.category == category)
            .ok_or_else(|| Error::UnknownCategory(category.to_string()))
    }

    /// `n` garments of one category. Garment `i` does not depend on `n`, so a
    /// longer family extends a shorter one with the same seed.
    pub fn family(
        &self,
        category: Category,
        n: usize,
        bounds: &ParamBounds,
        seed: u64,
    ) -> Result<Vec<EnvSpec>> {
        if n < 1 {
            return Err(Error::InvalidArgument(
                "family size must be at least 1".into(),
            ));
        }
        let profile = self.profile(category)?;
        let mut rng = derive_rng(seed, category.as_str());
        let d = bounds.len();
        (0..n)
            .map(|i| {
                let u: Vec<f64> = profile.optimum[..d]
                    .iter()
                    .map(|&o| {
                        let z: f64 = rng.sample(StandardNormal);
                        (o + profile.jitter * z).clamp(0.0, 1.0)
                    })
                    .collect();
                let garment_seed: u64 = rng.random();
                let spec = EnvSpec {
                    garment: format!("{category}-{i}"),
                    category,
                    bounds: bounds.clone(),
                    optimum: bounds.denormalize(&u),
                    base_coverage: profile.base_coverage,
                    amplitude: profile.amplitude,
                    widths: profile.widths[..d]
                        .iter()
                        .zip(bounds.dims())
                        .map(|(w, dim)| w * dim.width())
                        .collect(),
                    noise: profile.noise,
                    perturbation: profile.perturbation,
                    seed: garment_seed,
                };
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }

    /// The category's base garment with no jitter.
    pub fn base_spec(
        &self,
        category: Category,
        bounds: &ParamBounds,
        seed: u64,
    ) -> Result<EnvSpec> {
        let mut no_jitter = self.clone();
        for p in &mut no_jitter.profiles {
            p.jitter = 0.0;
        }
        let mut spec = no_jitter.family(category, 1, bounds, seed)?.remove(0);
        spec.garment = format!("{category}-base");
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    fn tshirt() -> EnvSpec {
        Catalog::default()
            .base_spec(Category::TShirt, &ParamBounds::default_7d(), 1)
            .unwrap()
    }

    #[test]
    fn mean_coverage_peak_and_tail() {
        let s = tshirt();
        assert_eq!(
            s.mean_coverage(&s.optimum).unwrap(),
            s.base_coverage + s.amplitude
        );
        // far corner relative to a narrow bump
        let mut narrow = s.clone();
        narrow.widths = narrow
            .bounds
            .dims()
            .iter()
            .map(|d| d.width() / 12.0)
            .collect();
        narrow.optimum = narrow.bounds.midpoint();
        let corner = FlingParams(narrow.bounds.dims().iter().map(|d| d.lo).collect());
        let v = narrow.mean_coverage(&corner).unwrap();
        assert!((v - narrow.base_coverage).abs() < 1e-6);
        let out = FlingParams(vec![10.0; 7]);
        assert!(s.mean_coverage(&out).is_err());
    }

    #[test]
    fn jeans_top_band() {
        let s = Catalog::default()
            .base_spec(Category::Jeans, &ParamBounds::default_7d(), 0)
            .unwrap();
        assert!((s.base_coverage - 0.55).abs() < 1e-12);
        assert!((s.amplitude - 0.39).abs() < 1e-12);
        assert!((s.mean_coverage(&s.optimum).unwrap() - 0.94).abs() < 1e-12);
    }

    #[test]
    fn noiseless_fling_is_mean() {
        let mut s = tshirt();
        s.noise = NoiseModel::constant(0.0);
        s.perturbation = 0.0;
        let p = s.bounds.midpoint();
        let mut rng = rng_from(5);
        let ep = s.reset(0, &mut rng);
        assert_eq!(ep.optimum, s.optimum.0);
        let out = s.fling(&ep, &p, &mut rng).unwrap();
        assert_eq!(out.coverage, s.mean_coverage(&p).unwrap());
    }

    #[test]
    fn fling_determinism_and_noise_scale() {
        let mut s = tshirt();
        s.perturbation = 0.0;
        s.noise = NoiseModel::constant(0.06);
        // mean ~0.45 so clamping never triggers at 6 sigma
        let p = FlingParams(s.bounds.dims().iter().map(|d| d.lo).collect());
        let run = |seed| {
            let mut env = SimEnv::with_stream(s.clone(), seed);
            (0..10_000)
                .map(|_| env.trial(&p).unwrap())
                .collect::<Vec<_>>()
        };
        let a = run(9);
        assert_eq!(a, run(9));
        let m = a.iter().sum::<f64>() / a.len() as f64;
        let sd = (a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
        assert!((sd - 0.06).abs() < 0.006, "sd {sd}");
        assert!(a.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn reset_perturbation_scale() {
        let s = tshirt();
        let mut rng = rng_from(77);
        let n = 10_000;
        let eps: Vec<Episode> = (0..n).map(|i| s.reset(i, &mut rng)).collect();
        for (i, d) in s.bounds.dims().iter().enumerate() {
            let xs: Vec<f64> = eps.iter().map(|e| e.optimum[i] - s.optimum[i]).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            let nominal = s.perturbation * d.width();
            assert!((sd - nominal).abs() < 0.1 * nominal, "dim {i}");
        }
        let eps2: Vec<Episode> = {
            let mut rng = rng_from(77);
            (0..5).map(|i| s.reset(i, &mut rng)).collect()
        };
        assert_eq!(&eps[..5], &eps2[..]);
    }

    #[test]
    fn oracle_hits_grid_node_optimum() {
        let s = Catalog::default()
            .base_spec(Category::Jeans, &ParamBounds::default_7d(), 0)
            .unwrap();
        let base = s.bounds.midpoint();
        let (p, v) = oracle_best(&s, &[0, 1, 2, 3], 17, &base).unwrap();
        assert!((v - 0.94).abs() < 1e-3);
        for i in 0..7 {
            assert!((p[i] - s.optimum[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_refinement_nondecreasing() {
        let mut s = tshirt();
        s.optimum.0[0] = 2.3712;
        s.optimum.0[3] = 0.4417;
        let base = s.bounds.midpoint();
        let mut last = f64::NEG_INFINITY;
        for res in [3, 5, 9, 17, 33] {
            let (_, v) = oracle_best(&s, &[0, 1, 2, 3], res, &base).unwrap();
            assert!(v >= last);
            last = v;
        }
        assert!(oracle_best(&s, &[0], 1, &base).is_err());
        assert!(oracle_best(&s, &[0, 1, 2, 3, 4, 5, 6], 20, &base).is_err());
    }

    #[test]
    fn family_properties() {
        let cat = Catalog::default();
        let b = ParamBounds::default_7d();
        let fam = cat.family(Category::Towel, 5, &b, 3).unwrap();
        assert_eq!(fam.len(), 5);
        let longer = cat.family(Category::Towel, 6, &b, 3).unwrap();
        assert_eq!(&longer[..5], &fam[..]);
        assert!(cat.family(Category::Towel, 0, &b, 3).is_err());

        let mut flat = cat.clone();
        flat.profiles.iter_mut().for_each(|p| p.jitter = 0.0);
        let fam = flat.family(Category::Dress, 3, &b, 3).unwrap();
        assert!(fam.windows(2).all(|w| w[0].optimum == w[1].optimum
            && w[0].widths == w[1].widths
            && w[0].base_coverage == w[1].base_coverage));

        // base optima of distinct categories sit at least one cell half apart
        for (i, a) in cat.profiles.iter().enumerate() {
            for c in &cat.profiles[i + 1..] {
                let gap = (0..4)
                    .map(|j| (a.optimum[j] - c.optimum[j]).abs())
                    .fold(0.0, f64::max);
                assert!(gap >= 0.5 - 1e-12, "{} vs {}", a.category, c.category);
            }
        }
    }

    #[test]
    fn category_parsing() {
        assert_eq!("t-shirt".parse::<Category>().unwrap(), Category::TShirt);
        assert!(matches!(
            "socks".parse::<Category>(),
            Err(Error::UnknownCategory(_))
        ));
    }

    #[test]
    fn spec_json_roundtrip_and_validation() {
        let s = tshirt();
        assert_eq!(EnvSpec::from_json_str(&s.to_json_string()).unwrap(), s);
        let mut bad = s.clone();
        bad.base_coverage = 0.8;
        bad.amplitude = 0.5;
        assert!(EnvSpec::from_json_str(&bad.to_json_string()).is_err());
        let mut bad = s;
        bad.widths[2] = 0.0;
        assert!(EnvSpec::from_json_str(&bad.to_json_string()).is_err());
    }
}
