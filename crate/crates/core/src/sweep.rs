//! `(alpha, beta)` grid harness.
//!
//! Every cell regenerates a cloud from a fixed weight template, estimates its
//! box-counting dimension and optionally trains the SVM probe on a subsample.
//! Cells are independent jobs on a bounded worker pool; the cell seed is
//! derived from the master seed and the bit patterns of the cell's own
//! `alpha` and `beta`, so adding or removing grid values never changes
//! another cell's result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fractal::{self, DEFAULT_EPSILONS};
use crate::reservoir::{self, CloudParams, ReservoirConfig};
use crate::svm::{self, KernelParams, LabeledSet, TrainOptions};
use crate::{seed, stats, Error, Result};

/// `start, start + step, ..., stop`, rounded to 12 decimals so grid values
/// print cleanly.
pub fn grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop.is_finite() && stop >= start) {
        return Err(Error::InvalidParameter(format!(
            "bad grid range {start}..{stop} step {step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// `alpha = 0.4, 0.45, ..., 1`.
pub fn default_alphas() -> Vec<f64> {
    grid(0.4, 1.0, 0.05).expect("static grid")
}

/// `beta = 0.15, 0.2, ..., 2`.
pub fn default_betas() -> Vec<f64> {
    grid(0.15, 2.0, 0.05).expect("static grid")
}

/// SVM probe settings for a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmProbe {
    pub params: KernelParams,
    /// States subsampled from the cell's cloud for training.
    pub samples: usize,
    pub options: TrainOptions,
}

impl Default for SvmProbe {
    fn default() -> Self {
        Self {
            params: KernelParams::probe(),
            samples: 3000,
            options: TrainOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Weights shared by every cell; its own gains are ignored.
    pub base: ReservoirConfig,
    pub cloud: CloudParams,
    pub epsilons: Vec<u32>,
    /// Box-counting bounds; `None` means `[-1, 1]` per axis.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub svm: Option<SvmProbe>,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl SweepSpec {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>, base: ReservoirConfig, cloud: CloudParams) -> Self {
        Self {
            alphas,
            betas,
            base,
            cloud,
            epsilons: DEFAULT_EPSILONS.to_vec(),
            bounds: None,
            svm: None,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::EmptyGrid("alpha"));
        }
        if self.betas.is_empty() {
            return Err(Error::EmptyGrid("beta"));
        }
        for (name, g) in [("alpha", &self.alphas), ("beta", &self.betas)] {
            if g.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
                return Err(Error::InvalidParameter(format!("{name} grid must be strictly increasing")));
            }
        }
        if self.cloud.n_sequences == 0 || self.cloud.retained_per_sequence() == 0 {
            return Err(Error::InvalidParameter("cloud budget must retain at least one state".into()));
        }
        if self.epsilons.len() < 2 {
            return Err(Error::TooFewScales(self.epsilons.len()));
        }
        Ok(())
    }

    fn cell_seed(&self, alpha: f64, beta: f64) -> u64 {
        seed::derive(self.cloud.seed, &[alpha.to_bits(), beta.to_bits()])
    }
}

/// Outcome of one grid cell. `d_f` is NaN when `error` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub alpha: f64,
    pub beta: f64,
    pub d_f: f64,
    pub r_squared: f64,
    pub n_sv: Option<usize>,
    pub train_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Ordered by `alpha`, then `beta`.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn get(&self, alpha: f64, beta: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.alpha == alpha && c.beta == beta)
    }

    /// Distinct alphas and betas, ascending.
    pub fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        let mut a: Vec<f64> = self.cells.iter().map(|c| c.alpha).collect();
        let mut b: Vec<f64> = self.cells.iter().map(|c| c.beta).collect();
        for v in [&mut a, &mut b] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        (a, b)
    }
}

fn run_cell(spec: &SweepSpec, alpha: f64, beta: f64) -> SweepCell {
    let mut cell = SweepCell {
        alpha,
        beta,
        d_f: f64::NAN,
        r_squared: f64::NAN,
        n_sv: None,
        train_accuracy: None,
        error: None,
    };
    if let Err(e) = fill_cell(spec, &mut cell) {
        cell.error = Some(e.to_string());
    }
    cell
}

fn fill_cell(spec: &SweepSpec, cell: &mut SweepCell) -> Result<()> {
    let cfg = spec.base.with_gains(cell.alpha, cell.beta)?;
    let cell_seed = spec.cell_seed(cell.alpha, cell.beta);
    let params = CloudParams {
        seed: cell_seed,
        ..spec.cloud.clone()
    };
    let cloud = reservoir::generate_cloud(&cfg, &params)?;
    let fd = match &spec.bounds {
        Some(b) => fractal::estimate_fd_in(&cloud, &spec.epsilons, b)?,
        None => fractal::estimate_fd(&cloud, &spec.epsilons)?,
    };
    cell.d_f = fd.slope;
    cell.r_squared = fd.r_squared;
    if let Some(probe) = &spec.svm {
        let data = LabeledSet::sample_cloud(&cloud, probe.samples, seed::derive(cell_seed, &[1]))?;
        let model = svm::train(&data, probe.params, probe.options)?;
        cell.n_sv = Some(svm::sv_count(&model));
        cell.train_accuracy = Some(svm::accuracy(&model, &data)?);
    }
    Ok(())
}

/// Runs every `(alpha, beta)` cell. Per-cell failures are recorded in the
/// cell; only an invalid spec aborts.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(f64, f64)> = spec
        .alphas
        .iter()
        .flat_map(|&a| spec.betas.iter().map(move |&b| (a, b)))
        .collect();
    let work = || -> Vec<SweepCell> {
        jobs.par_iter().map(|&(a, b)| run_cell(spec, a, b)).collect()
    };
    let cells = if spec.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(work)
    };
    Ok(SweepResult { cells })
}

/// Sign of a rank correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Increasing,
    Decreasing,
    NoTrend,
}

/// Spearman correlation along one line of the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    /// Value of the axis held fixed.
    pub fixed: f64,
    pub rho: f64,
    pub points: usize,
    pub direction: Direction,
}

impl Trend {
    fn new(fixed: f64, x: &[f64], y: &[f64]) -> Self {
        let rho = stats::spearman(x, y);
        let direction = if rho > 0.0 {
            Direction::Increasing
        } else if rho < 0.0 {
            Direction::Decreasing
        } else {
            Direction::NoTrend
        };
        Self {
            fixed,
            rho,
            points: x.len(),
            direction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    /// `d_f` against `beta` for each fixed `alpha`, over `beta >= beta_min`.
    pub rows: Vec<Trend>,
    /// `d_f` against `alpha` for each fixed `beta`.
    pub columns: Vec<Trend>,
    /// Support-vector count against `alpha` for each fixed `beta`.
    pub sv_columns: Vec<Trend>,
    pub beta_min: f64,
}

impl TrendReport {
    pub fn row(&self, alpha: f64) -> Option<&Trend> {
        self.rows.iter().find(|t| t.fixed == alpha)
    }

    pub fn column(&self, beta: f64) -> Option<&Trend> {
        self.columns.iter().find(|t| t.fixed == beta)
    }

    pub fn sv_column(&self, beta: f64) -> Option<&Trend> {
        self.sv_columns.iter().find(|t| t.fixed == beta)
    }
}

/// Default lower edge of the beta range where `d_f` is expected to fall.
pub const TREND_BETA_MIN: f64 = 0.45;

/// Rank correlations of the surface along both axes. Lines with fewer than
/// two usable cells are skipped; an error is returned if nothing is left.
pub fn trend_report(result: &SweepResult, beta_min: f64) -> Result<TrendReport> {
    let ok = |c: &&SweepCell| c.error.is_none() && c.d_f.is_finite();
    let (alphas, betas) = result.axes();
    let mut rows = Vec::new();
    for &a in &alphas {
        let line: Vec<&SweepCell> = result
            .cells
            .iter()
            .filter(|c| c.alpha == a && c.beta >= beta_min)
            .filter(ok)
            .collect();
        if line.len() >= 2 {
            let x: Vec<f64> = line.iter().map(|c| c.beta).collect();
            let y: Vec<f64> = line.iter().map(|c| c.d_f).collect();
            rows.push(Trend::new(a, &x, &y));
        }
    }
    let mut columns = Vec::new();
    let mut sv_columns = Vec::new();
    for &b in &betas {
        let line: Vec<&SweepCell> = result.cells.iter().filter(|c| c.beta == b).filter(ok).collect();
        if line.len() >= 2 {
            let x: Vec<f64> = line.iter().map(|c| c.alpha).collect();
            let y: Vec<f64> = line.iter().map(|c| c.d_f).collect();
            columns.push(Trend::new(b, &x, &y));
        }
        let sv: Vec<(f64, f64)> = line
            .iter()
            .filter_map(|c| c.n_sv.map(|n| (c.alpha, n as f64)))
            .collect();
        if sv.len() >= 2 {
            let (x, y): (Vec<f64>, Vec<f64>) = sv.into_iter().unzip();
            sv_columns.push(Trend::new(b, &x, &y));
        }
    }
    if rows.is_empty() && columns.is_empty() {
        return Err(Error::InsufficientCells(format!(
            "{} usable cells, no line with two or more",
            result.cells.iter().filter(ok).count()
        )));
    }
    Ok(TrendReport {
        rows,
        columns,
        sv_columns,
        beta_min,
    })
}
