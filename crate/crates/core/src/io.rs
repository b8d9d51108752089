//! Configuration documents (JSON) and CSV schemas.
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64` (integral values without a fractional part, exponent notation
//! outside `[1e-5, 1e16)`), so every CSV round-trips bit-exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::arith::{EncoderState, SymbolModel};
use crate::fractal::{FdEstimate, DEFAULT_EPSILONS};
use crate::reservoir::{CloudParams, ReservoirConfig, StateCloud, Symbol};
use crate::svm::{KernelParams, TrainOptions};
use crate::sweep::{self, SvmProbe, SweepCell, SweepResult, SweepSpec};
use crate::{Error, Result};

/// Shortest round-trip text for `v`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = v.abs();
    if v == 0.0 {
        if v.is_sign_negative() { "-0".into() } else { "0".into() }
    } else if v == v.trunc() && a < 1e15 {
        format!("{}", v as i64)
    } else if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn default_washout() -> usize {
    CloudParams::DEFAULT_WASHOUT
}

fn default_p_plus() -> f64 {
    0.5
}

/// Reservoir plus sampling budget, as read by the `cloud` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirDocument {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub w_in: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    pub n_sequences: usize,
    /// Steps per sequence, washout included.
    pub steps: usize,
    #[serde(default = "default_washout")]
    pub washout: usize,
    #[serde(default = "default_p_plus")]
    pub p_plus: f64,
    /// Rescale `W` and `w_in` to unit norm before use.
    #[serde(default)]
    pub normalize: bool,
}

impl ReservoirDocument {
    pub fn config(&self) -> Result<ReservoirConfig> {
        let cfg = ReservoirConfig::from_rows(&self.w, &self.w_in, self.alpha, self.beta)?;
        if self.normalize {
            cfg.normalized()
        } else {
            Ok(cfg)
        }
    }

    pub fn cloud_params(&self) -> CloudParams {
        CloudParams {
            n_sequences: self.n_sequences,
            steps: self.steps,
            washout: self.washout,
            seed: self.seed,
            p_plus: self.p_plus,
        }
    }
}

/// Symbol token: JSON strings or numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Token {
    Text(String),
    Number(serde_json::Number),
}

impl Token {
    fn into_string(self) -> String {
        match self {
            Token::Text(s) => s,
            Token::Number(n) => n.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolModelDocument {
    pub symbols: Vec<Token>,
    pub probs: Vec<f64>,
}

impl SymbolModelDocument {
    pub fn model(self) -> Result<SymbolModel> {
        SymbolModel::new(self.symbols.into_iter().map(Token::into_string).collect(), self.probs)
    }
}

/// Grid axis: explicit values or an inclusive range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridDocument {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl GridDocument {
    pub fn values(&self) -> Result<Vec<f64>> {
        match self {
            GridDocument::Values(v) => Ok(v.clone()),
            GridDocument::Range { start, stop, step } => sweep::grid(*start, *stop, *step),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmProbeDocument {
    #[serde(default = "SvmProbeDocument::sigma")]
    pub sigma: f64,
    #[serde(default = "SvmProbeDocument::c")]
    pub c: f64,
    #[serde(default = "SvmProbeDocument::samples")]
    pub samples: usize,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_passes: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl SvmProbeDocument {
    fn sigma() -> f64 {
        KernelParams::probe().sigma
    }
    fn c() -> f64 {
        KernelParams::probe().c
    }
    fn samples() -> usize {
        SvmProbe::default().samples
    }

    pub fn probe(&self) -> Result<SvmProbe> {
        let d = TrainOptions::default();
        Ok(SvmProbe {
            params: KernelParams::new(self.sigma, self.c)?,
            samples: self.samples,
            options: TrainOptions {
                tol: self.tol.unwrap_or(d.tol),
                max_passes: self.max_passes.unwrap_or(d.max_passes),
                seed: self.seed,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDocument {
    pub alphas: GridDocument,
    pub betas: GridDocument,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub w_in: Vec<f64>,
    pub n_sequences: usize,
    pub steps: usize,
    #[serde(default = "default_washout")]
    pub washout: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub epsilons: Option<Vec<u32>>,
    #[serde(default)]
    pub svm: Option<SvmProbeDocument>,
    #[serde(default)]
    pub workers: usize,
}

impl SweepDocument {
    pub fn spec(&self) -> Result<SweepSpec> {
        let base = ReservoirConfig::from_rows(&self.w, &self.w_in, 1.0, 1.0)?;
        let cloud = CloudParams {
            n_sequences: self.n_sequences,
            steps: self.steps,
            washout: self.washout,
            seed: self.seed,
            p_plus: 0.5,
        };
        let mut spec = SweepSpec::new(self.alphas.values()?, self.betas.values()?, base, cloud);
        spec.epsilons = self.epsilons.clone().unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
        spec.svm = self.svm.as_ref().map(SvmProbeDocument::probe).transpose()?;
        spec.workers = self.workers;
        Ok(spec)
    }
}

/// Parses a JSON document from `r`.
pub fn read_json<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<T> {
    Ok(serde_json::from_reader(r)?)
}

/// `x1,...,xm,label` with one row per point.
pub fn write_cloud_csv<W: Write>(cloud: &StateCloud, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=cloud.dim()).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    out.write_record(&header)?;
    let mut row = Vec::with_capacity(cloud.dim() + 1);
    for p in cloud.points() {
        row.clear();
        row.extend(p.coords.iter().map(|&v| fmt_f64(v)));
        row.push(p.label.to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_cloud_csv<R: Read>(r: R) -> Result<StateCloud> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    let n = header.len();
    let shape_ok = n >= 2
        && header.get(n - 1) == Some("label")
        && (0..n - 1).all(|i| header.get(i) == Some(format!("x{}", i + 1).as_str()));
    if !shape_ok {
        return Err(Error::Parse(format!(
            "cloud header must be x1,...,xm,label; got {:?}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let dim = n - 1;
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for i in 0..dim {
            let f = &rec[i];
            coords.push(f.trim().parse::<f64>().map_err(|_| {
                Error::Parse(format!("row {}: bad coordinate {f:?}", line + 2))
            })?);
        }
        labels.push(rec[dim].parse::<Symbol>()?);
    }
    StateCloud::from_parts(dim, coords, labels)
}

/// `epsilon,occupied` rows followed by a `# d_f=..,intercept=..,r2=..` line.
pub fn write_fd_csv<W: Write>(fd: &FdEstimate, mut w: W) -> Result<()> {
    writeln!(w, "epsilon,occupied")?;
    for s in &fd.samples {
        writeln!(w, "{},{}", s.epsilon, s.occupied)?;
    }
    writeln!(
        w,
        "# d_f={},intercept={},r2={}",
        fmt_f64(fd.slope),
        fmt_f64(fd.intercept),
        fmt_f64(fd.r_squared)
    )?;
    Ok(())
}

pub fn write_fd_json<W: Write>(fd: &FdEstimate, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, fd)?;
    Ok(())
}

/// `x,width,bits` rows.
pub fn write_encoded_csv<W: Write>(rows: &[(EncoderState, f64)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "width", "bits"])?;
    for (s, bits) in rows {
        out.write_record([fmt_f64(s.x), fmt_f64(s.width), fmt_f64(*bits)])?;
    }
    out.flush()?;
    Ok(())
}

pub const SWEEP_HEADER: [&str; 7] = ["alpha", "beta", "d_f", "r2", "n_sv", "train_accuracy", "error"];

pub fn write_sweep_csv<W: Write>(result: &SweepResult, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for c in &result.cells {
        out.write_record([
            fmt_f64(c.alpha),
            fmt_f64(c.beta),
            fmt_f64(c.d_f),
            fmt_f64(c.r_squared),
            c.n_sv.map(|n| n.to_string()).unwrap_or_default(),
            c.train_accuracy.map(fmt_f64).unwrap_or_default(),
            c.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<SweepResult> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().ne(SWEEP_HEADER) {
        return Err(Error::Parse(format!(
            "sweep header must be {}",
            SWEEP_HEADER.join(",")
        )));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad {what} {s:?}")))
    };
    let mut cells = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        cells.push(SweepCell {
            alpha: num(&rec[0], "alpha")?,
            beta: num(&rec[1], "beta")?,
            d_f: num(&rec[2], "d_f")?,
            r_squared: num(&rec[3], "r2")?,
            n_sv: match rec[4].trim() {
                "" => None,
                s => Some(s.parse().map_err(|_| Error::Parse(format!("bad n_sv {s:?}")))?),
            },
            train_accuracy: match rec[5].trim() {
                "" => None,
                s => Some(num(s, "train_accuracy")?),
            },
            error: Some(rec[6].to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(SweepResult { cells })
}
