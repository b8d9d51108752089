//! Box-counting dimension of state clouds.
//!
//! `epsilon` is the grid resolution (boxes per axis), so the occupied-box
//! count grows with it and the log-log slope of `N(epsilon)` against
//! `epsilon` estimates the dimension directly.
//!
//! Cells along each axis are half-open `[low_k, high_k)` except the last,
//! which also takes the top boundary, so each in-range point lies in exactly
//! one cell.

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::reservoir::StateCloud;
use crate::{stats, Error, Result};

/// Default box-counting resolutions, in boxes per axis.
pub const DEFAULT_EPSILONS: [u32; 11] = [300, 500, 600, 650, 700, 750, 800, 850, 900, 950, 1000];

/// Bits of resolution of one `f64` state: 52 mantissa bits plus sign.
pub const F64_STATE_BITS: u32 = 53;

/// Slope margin allowed above the embedding dimension for fit noise.
pub const FIT_NOISE_MARGIN: f64 = 0.1;

/// Axis-aligned grid with `resolution` cells per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxGrid {
    resolution: u32,
    bounds: Vec<(f64, f64)>,
}

impl BoxGrid {
    pub fn new(resolution: u32, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidParameter("grid resolution must be >= 1".into()));
        }
        validate_bounds(&bounds)?;
        Ok(Self { resolution, bounds })
    }

    /// `[-1, 1]` on each of `dim` axes, the range of `tanh`.
    pub fn symmetric(resolution: u32, dim: usize) -> Result<Self> {
        Self::new(resolution, vec![(-1.0, 1.0); dim])
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Cell index along one axis, or `None` if `x` is outside `[low, high]`.
    #[inline]
    pub fn axis_cell(&self, axis: usize, x: f64) -> Option<u32> {
        axis_cell(x, self.bounds[axis], self.resolution)
    }
}

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::InvalidParameter("grid needs at least one axis".into()));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "degenerate axis bounds [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

#[inline]
fn axis_cell(x: f64, (lo, hi): (f64, f64), eps: u32) -> Option<u32> {
    if !(x >= lo && x <= hi) {
        return None;
    }
    let k = (f64::from(eps) * (x - lo) / (hi - lo)).floor() as u64;
    Some(k.min(u64::from(eps) - 1) as u32)
}

/// Occupied-cell set for one resolution. Cell coordinates pack into one
/// `u128` when `eps^dim` fits, otherwise the full index vector is kept.
#[derive(Clone, Debug)]
enum CellSet {
    Packed(FxHashSet<u128>),
    Wide(FxHashSet<Box<[u32]>>),
}

impl CellSet {
    fn new(eps: u32, dim: usize) -> Self {
        let fits = u32::try_from(dim)
            .ok()
            .and_then(|d| u128::from(eps).checked_pow(d))
            .is_some();
        if fits {
            CellSet::Packed(FxHashSet::default())
        } else {
            CellSet::Wide(FxHashSet::default())
        }
    }

    fn len(&self) -> usize {
        match self {
            CellSet::Packed(s) => s.len(),
            CellSet::Wide(s) => s.len(),
        }
    }

    fn merge(&mut self, other: CellSet) {
        match (self, other) {
            (CellSet::Packed(a), CellSet::Packed(b)) => a.extend(b),
            (CellSet::Wide(a), CellSet::Wide(b)) => a.extend(b),
            _ => unreachable!("cell sets of one resolution share a layout"),
        }
    }
}

/// Incremental occupied-box counter over several resolutions at once.
///
/// Memory scales with the number of occupied cells, not `eps^dim`, so it can
/// absorb streams far larger than a materialized [`StateCloud`].
#[derive(Clone, Debug)]
pub struct BoxCounter {
    bounds: Vec<(f64, f64)>,
    resolutions: Vec<u32>,
    sets: Vec<CellSet>,
    seen: usize,
    scratch: Vec<u32>,
}

impl BoxCounter {
    pub fn new(resolutions: &[u32], bounds: Vec<(f64, f64)>) -> Result<Self> {
        validate_bounds(&bounds)?;
        if resolutions.contains(&0) {
            return Err(Error::InvalidParameter("grid resolution must be >= 1".into()));
        }
        let dim = bounds.len();
        Ok(Self {
            sets: resolutions.iter().map(|&e| CellSet::new(e, dim)).collect(),
            resolutions: resolutions.to_vec(),
            scratch: vec![0; dim],
            bounds,
            seen: 0,
        })
    }

    /// Adds one point; fails without modifying the counts if any coordinate
    /// is out of bounds.
    pub fn insert(&mut self, x: &[f64]) -> Result<()> {
        let index = self.seen;
        self.seen += 1;
        if x.len() != self.bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bounds.len(),
                got: x.len(),
            });
        }
        let oob = || Error::OutOfBounds {
            index,
            coords: x.to_vec(),
        };
        if x
            .iter()
            .zip(&self.bounds)
            .any(|(&v, &(lo, hi))| !(v >= lo && v <= hi))
        {
            return Err(oob());
        }
        for (set, &eps) in self.sets.iter_mut().zip(&self.resolutions) {
            match set {
                CellSet::Packed(s) => {
                    let mut key: u128 = 0;
                    for (&v, &b) in x.iter().zip(&self.bounds).rev() {
                        let k = axis_cell(v, b, eps).ok_or_else(oob)?;
                        key = key * u128::from(eps) + u128::from(k);
                    }
                    s.insert(key);
                }
                CellSet::Wide(s) => {
                    for ((slot, &v), &b) in self.scratch.iter_mut().zip(x).zip(&self.bounds) {
                        *slot = axis_cell(v, b, eps).ok_or_else(oob)?;
                    }
                    if !s.contains(self.scratch.as_slice()) {
                        s.insert(self.scratch.clone().into_boxed_slice());
                    }
                }
            }
        }
        Ok(())
    }

    /// Folds another counter with identical resolutions and bounds into this one.
    pub fn merge(&mut self, other: BoxCounter) -> Result<()> {
        if other.resolutions != self.resolutions || other.bounds != self.bounds {
            return Err(Error::InvalidParameter("merging counters with different grids".into()));
        }
        self.seen += other.seen;
        for (a, b) in self.sets.iter_mut().zip(other.sets) {
            a.merge(b);
        }
        Ok(())
    }

    pub fn points_seen(&self) -> usize {
        self.seen
    }

    /// `(epsilon, occupied)` in construction order.
    pub fn counts(&self) -> Vec<(u32, usize)> {
        self.resolutions
            .iter()
            .zip(&self.sets)
            .map(|(&e, s)| (e, s.len()))
            .collect()
    }
}

/// Number of grid cells holding at least one cloud point.
pub fn box_count(cloud: &StateCloud, grid: &BoxGrid) -> Result<usize> {
    if cloud.is_empty() {
        return Ok(0);
    }
    if cloud.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: cloud.dim(),
        });
    }
    let mut counter = BoxCounter::new(&[grid.resolution], grid.bounds.clone())?;
    for p in cloud.points() {
        counter.insert(p.coords)?;
    }
    Ok(counter.counts()[0].1)
}

/// One `(epsilon, N(epsilon))` measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleSample {
    pub epsilon: u32,
    pub occupied: usize,
}

/// Result of a log-log fit `ln N = slope * ln epsilon + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    pub slope: f64,
    pub intercept: f64,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    pub samples: Vec<ScaleSample>,
}

impl FdEstimate {
    pub fn dimension(&self) -> f64 {
        self.slope
    }
}

/// Ordinary least squares of `ln N(epsilon)` on `ln epsilon`.
pub fn richardson_fit(samples: &[(u32, usize)]) -> Result<FdEstimate> {
    let mut distinct: Vec<u32> = samples.iter().map(|s| s.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::TooFewScales(distinct.len()));
    }
    if let Some(&(e, _)) = samples.iter().find(|s| s.1 == 0) {
        return Err(Error::EmptyScale(e));
    }
    if let Some(&(e, _)) = samples.iter().find(|s| s.0 == 0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {e}")));
    }
    let x: Vec<f64> = samples.iter().map(|s| f64::from(s.0).ln()).collect();
    let y: Vec<f64> = samples.iter().map(|s| (s.1 as f64).ln()).collect();
    let (slope, intercept, r_squared) =
        stats::ols(&x, &y).expect("two distinct epsilons give a non-degenerate design");
    Ok(FdEstimate {
        slope,
        intercept,
        r_squared,
        samples: samples
            .iter()
            .map(|&(epsilon, occupied)| ScaleSample { epsilon, occupied })
            .collect(),
    })
}

/// Box counts over `epsilons` on the `[-1, 1]^m` grid, then the log-log fit.
pub fn estimate_fd(cloud: &StateCloud, epsilons: &[u32]) -> Result<FdEstimate> {
    estimate_fd_in(cloud, epsilons, &vec![(-1.0, 1.0); cloud.dim()])
}

/// [`estimate_fd`] over explicit per-axis bounds.
pub fn estimate_fd_in(
    cloud: &StateCloud,
    epsilons: &[u32],
    bounds: &[(f64, f64)],
) -> Result<FdEstimate> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let samples = epsilons
        .par_iter()
        .map(|&e| {
            let grid = BoxGrid::new(e, bounds.to_vec())?;
            Ok((e, box_count(cloud, &grid)?))
        })
        .collect::<Result<Vec<_>>>()?;
    richardson_fit(&samples)
}

/// Information capacity of a reservoir and the dimension-based bound on
/// what it actually stores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub m: usize,
    pub m_b: u32,
    /// `m * m_b` bits.
    pub i_max: f64,
    /// `clamp(d_f, 0, m) * m_b` bits.
    pub i_bound: f64,
}

pub fn capacity_bound(fd: &FdEstimate, m: usize, m_b: u32) -> Result<CapacityReport> {
    capacity_from_dimension(fd.slope, m, m_b)
}

pub fn capacity_from_dimension(d_f: f64, m: usize, m_b: u32) -> Result<CapacityReport> {
    if m == 0 || m_b == 0 {
        return Err(Error::InvalidParameter("m and m_b must be positive".into()));
    }
    if !d_f.is_finite() {
        return Err(Error::NonFinite("fractal dimension"));
    }
    let mb = f64::from(m_b);
    Ok(CapacityReport {
        m,
        m_b,
        i_max: m as f64 * mb,
        i_bound: d_f.clamp(0.0, m as f64) * mb,
    })
}
