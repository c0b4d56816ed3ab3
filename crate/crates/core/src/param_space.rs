//! Fling-parameter space: bounds, the uniform action grid that defines the
//! bandit arms, and cell geometry used to constrain local refinement.
//!
//! Parameters are stored in the order
//! `v23_max, v34_max, p3_y, p3_z, theta, v_theta, a_theta [, a23_max, a34_max]`.
//! Angles are kept in degrees.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical dimension names, in storage order.
pub const DIMENSION_NAMES: [&str; 9] = [
    "v23_max", "v34_max", "p3_y", "p3_z", "theta", "v_theta", "a_theta", "a23_max", "a34_max",
];

// (lo, hi, unit). The last two rows are shipped placeholders for the 9-D
// variant, whose acceleration ranges were never published.
const DEFAULT_RANGES: [(f64, f64, &str); 9] = [
    (2.0, 3.0, "m/s"),
    (1.0, 3.0, "m/s"),
    (0.55, 0.7, "m"),
    (0.4, 0.55, "m"),
    (-40.0, 20.0, "deg"),
    (-1.0, 1.0, "m/s"),
    (-20.0, 20.0, "m/s^2"),
    (15.0, 30.0, "m/s^2"),
    (15.0, 30.0, "m/s^2"),
];

/// Largest arm count `make_grid` accepts.
pub const MAX_ARMS: usize = 1 << 20;

/// 7 learnable parameters, or 9 with the two segment acceleration limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Parameterization {
    #[default]
    #[serde(rename = "7d")]
    SevenD,
    #[serde(rename = "9d")]
    NineD,
}

impl Parameterization {
    pub fn dims(self) -> usize {
        match self {
            Parameterization::SevenD => 7,
            Parameterization::NineD => 9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

/// Per-dimension overrides keyed by canonical name.
pub type RangeTable = BTreeMap<String, Range>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub unit: String,
}

impl Dimension {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Validated per-dimension bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Dimension>", into = "Vec<Dimension>")]
pub struct ParamBounds {
    dims: Vec<Dimension>,
}

impl ParamBounds {
    pub fn new(dims: Vec<Dimension>) -> Result<Self> {
        if dims.len() != 7 && dims.len() != 9 {
            return Err(Error::DimensionMismatch {
                expected: if dims.len() < 8 { 7 } else { 9 },
                found: dims.len(),
            });
        }
        for (i, d) in dims.iter().enumerate() {
            if !(d.lo.is_finite() && d.hi.is_finite()) || d.lo >= d.hi {
                return Err(Error::InvalidRange {
                    name: d.name.clone(),
                    lo: d.lo,
                    hi: d.hi,
                });
            }
            if dims[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::DuplicateDimension(d.name.clone()));
            }
        }
        Ok(Self { dims })
    }

    /// The published 7-D ranges.
    pub fn default_7d() -> Self {
        Self::from_table(Parameterization::SevenD, &RangeTable::new()).expect("default ranges")
    }

    pub fn default_9d() -> Self {
        Self::from_table(Parameterization::NineD, &RangeTable::new()).expect("default ranges")
    }

    /// Builds bounds from the default table with `overrides` applied.
    pub fn from_table(param: Parameterization, overrides: &RangeTable) -> Result<Self> {
        let d = param.dims();
        for name in overrides.keys() {
            match DIMENSION_NAMES.iter().position(|n| n == name) {
                None => return Err(Error::UnknownDimension(name.clone())),
                Some(i) if i >= d => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: i + 1,
                    })
                }
                Some(_) => {}
            }
        }
        let dims = DIMENSION_NAMES[..d]
            .iter()
            .zip(DEFAULT_RANGES.iter())
            .map(|(name, &(lo, hi, unit))| {
                let r = overrides.get(*name).copied().unwrap_or(Range { lo, hi });
                Dimension {
                    name: name.to_string(),
                    lo: r.lo,
                    hi: r.hi,
                    unit: unit.to_string(),
                }
            })
            .collect();
        Self::new(dims)
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn dims(&self) -> &[Dimension] {
        &self.dims
    }

    pub fn dim(&self, i: usize) -> &Dimension {
        &self.dims[i]
    }

    pub fn parameterization(&self) -> Parameterization {
        if self.dims.len() == 9 {
            Parameterization::NineD
        } else {
            Parameterization::SevenD
        }
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.dims
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::UnknownDimension(name.to_string()))
    }

    pub fn midpoint(&self) -> FlingParams {
        FlingParams(self.dims.iter().map(Dimension::midpoint).collect())
    }

    pub fn check(&self, p: &FlingParams) -> Result<()> {
        if p.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: p.len(),
            });
        }
        for (i, (&v, d)) in p.values().iter().zip(&self.dims).enumerate() {
            if !(v >= d.lo && v <= d.hi) {
                return Err(Error::OutOfBounds {
                    index: i,
                    value: v,
                    lo: d.lo,
                    hi: d.hi,
                });
            }
        }
        Ok(())
    }

    /// Maps `p` into `[0, 1]^d`.
    pub fn normalize(&self, p: &FlingParams) -> Vec<f64> {
        p.values()
            .iter()
            .zip(&self.dims)
            .map(|(v, d)| (v - d.lo) / d.width())
            .collect()
    }

    pub fn denormalize(&self, u: &[f64]) -> FlingParams {
        FlingParams(
            u.iter()
                .zip(&self.dims)
                .map(|(u, d)| d.lo + u * d.width())
                .collect(),
        )
    }

    /// The whole box as a single cell with every dimension free.
    pub fn full_cell(&self) -> Cell {
        Cell {
            lo: self.dims.iter().map(|d| d.lo).collect(),
            hi: self.dims.iter().map(|d| d.hi).collect(),
            varied: vec![true; self.len()],
            open_lower: vec![false; self.len()],
            center: self.midpoint().0,
        }
    }
}

impl TryFrom<Vec<Dimension>> for ParamBounds {
    type Error = Error;
    fn try_from(dims: Vec<Dimension>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<ParamBounds> for Vec<Dimension> {
    fn from(b: ParamBounds) -> Self {
        b.dims
    }
}

/// A point in the fling-parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlingParams(pub Vec<f64>);

impl FlingParams {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for FlingParams {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Axis-aligned box owned by one arm.
///
/// On a varied dimension shared with a lower-indexed neighbour the lower
/// face is open, so membership agrees with the lower-index tie-break used by
/// [`ActionGrid::cell_of`]. Non-varied dimensions span the global range.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub varied: Vec<bool>,
    pub open_lower: Vec<bool>,
    pub center: Vec<f64>,
}

impl Cell {
    /// Smallest value in the cell along dimension `i`.
    pub fn lower_limit(&self, i: usize) -> f64 {
        if self.open_lower[i] {
            self.lo[i].next_up()
        } else {
            self.lo[i]
        }
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn clip(&self, p: &FlingParams) -> FlingParams {
        FlingParams(
            p.values()
                .iter()
                .enumerate()
                .map(|(i, &v)| v.clamp(self.lower_limit(i), self.hi[i]))
                .collect(),
        )
    }

    pub fn contains(&self, p: &FlingParams) -> bool {
        p.len() == self.lo.len()
            && p.values()
                .iter()
                .enumerate()
                .all(|(i, &v)| v >= self.lower_limit(i) && v <= self.hi[i])
    }
}

/// Uniform grid over a subset of dimensions; each cell center is an arm.
///
/// Arms are numbered row-major over `varied_dims` (the first listed
/// dimension is the most significant digit).
#[derive(Debug, Clone)]
pub struct ActionGrid {
    bounds: ParamBounds,
    varied_dims: Vec<usize>,
    splits: usize,
    fixed_values: FlingParams,
    edges: Vec<Vec<f64>>,
    centers: Vec<FlingParams>,
}

impl ActionGrid {
    pub fn new(bounds: &ParamBounds, varied_dims: &[usize], splits: usize) -> Result<Self> {
        if varied_dims.is_empty() {
            return Err(Error::InvalidGrid("no varied dimensions".into()));
        }
        if splits < 1 {
            return Err(Error::InvalidGrid("splits must be at least 1".into()));
        }
        for (j, &i) in varied_dims.iter().enumerate() {
            if i >= bounds.len() {
                return Err(Error::InvalidGrid(format!(
                    "dimension index {i} out of range"
                )));
            }
            if varied_dims[..j].contains(&i) {
                return Err(Error::InvalidGrid(format!("duplicate dimension index {i}")));
            }
        }
        let arms = u32::try_from(varied_dims.len())
            .ok()
            .and_then(|m| splits.checked_pow(m))
            .filter(|&k| k <= MAX_ARMS)
            .ok_or_else(|| Error::InvalidGrid(format!("more than {MAX_ARMS} arms")))?;

        let edges: Vec<Vec<f64>> = varied_dims
            .iter()
            .map(|&i| {
                let d = bounds.dim(i);
                let mut e: Vec<f64> = (0..=splits)
                    .map(|s| d.lo + d.width() * s as f64 / splits as f64)
                    .collect();
                e[splits] = d.hi;
                e
            })
            .collect();
        let fixed_values = bounds.midpoint();
        let mut grid = Self {
            bounds: bounds.clone(),
            varied_dims: varied_dims.to_vec(),
            splits,
            fixed_values,
            edges,
            centers: Vec::with_capacity(arms),
        };
        grid.centers = (0..arms).map(|k| grid.center_of(k)).collect();
        Ok(grid)
    }

    /// Resolves dimension names and builds the grid.
    pub fn from_names(bounds: &ParamBounds, names: &[String], splits: usize) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| bounds.index_of(n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(bounds, &idx, splits)
    }

    fn digits(&self, k: usize) -> Vec<usize> {
        let mut digits = vec![0; self.varied_dims.len()];
        let mut rest = k;
        for d in digits.iter_mut().rev() {
            *d = rest % self.splits;
            rest /= self.splits;
        }
        digits
    }

    fn center_of(&self, k: usize) -> FlingParams {
        let mut v = self.fixed_values.0.clone();
        for (j, &s) in self.digits(k).iter().enumerate() {
            let e = &self.edges[j];
            v[self.varied_dims[j]] = 0.5 * (e[s] + e[s + 1]);
        }
        FlingParams(v)
    }

    pub fn arms(&self) -> usize {
        self.centers.len()
    }

    pub fn bounds(&self) -> &ParamBounds {
        &self.bounds
    }

    pub fn varied_dims(&self) -> &[usize] {
        &self.varied_dims
    }

    pub fn splits(&self) -> usize {
        self.splits
    }

    /// Values used for non-varied dimensions (range midpoints).
    pub fn fixed_values(&self) -> &FlingParams {
        &self.fixed_values
    }

    pub fn centers(&self) -> &[FlingParams] {
        &self.centers
    }

    pub fn center(&self, k: usize) -> Result<&FlingParams> {
        self.centers.get(k).ok_or(Error::InvalidArm {
            index: k,
            arms: self.arms(),
        })
    }

    pub fn cell(&self, k: usize) -> Result<Cell> {
        if k >= self.arms() {
            return Err(Error::InvalidArm {
                index: k,
                arms: self.arms(),
            });
        }
        let mut cell = self.bounds.full_cell();
        cell.varied = vec![false; self.bounds.len()];
        cell.center = self.centers[k].0.clone();
        for (j, &s) in self.digits(k).iter().enumerate() {
            let i = self.varied_dims[j];
            cell.lo[i] = self.edges[j][s];
            cell.hi[i] = self.edges[j][s + 1];
            cell.varied[i] = true;
            cell.open_lower[i] = s > 0;
        }
        Ok(cell)
    }

    /// Arm whose cell contains `p`; shared faces go to the lower index.
    pub fn cell_of(&self, p: &FlingParams) -> Result<usize> {
        self.bounds.check(p)?;
        let mut k = 0;
        for (j, &i) in self.varied_dims.iter().enumerate() {
            let x = p[i];
            let e = &self.edges[j];
            let s = (0..self.splits)
                .find(|&s| x <= e[s + 1])
                .unwrap_or(self.splits - 1);
            k = k * self.splits + s;
        }
        Ok(k)
    }

    /// Clamps `p` into cell `k` (non-varied dimensions into the global range).
    pub fn clip_to_cell(&self, p: &FlingParams, k: usize) -> Result<FlingParams> {
        Ok(self.cell(k)?.clip(p))
    }
}
