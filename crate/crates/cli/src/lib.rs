//! `esnfd`: command-line front end for cloud generation, box counting,
//! arithmetic coding, SVM probing, grid sweeps and SVG rendering.
//!
//! Exit status is 0 on success, 1 when a computation fails and 2 for usage
//! or configuration problems (bad flags, unreadable or malformed inputs).

pub mod render;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use esn_fractal::io::{self as fio, ReservoirDocument, SweepDocument, SymbolModelDocument};
use esn_fractal::{arith, fractal, svm, sweep};
use esn_fractal::{KernelParams, LabeledSet, SymbolModel, TrainOptions, DEFAULT_EPSILONS};

#[derive(Debug, Parser)]
#[command(name = "esnfd", version, about = "Fractal analysis of echo state network state spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drive a reservoir with random inputs and write its state cloud as CSV.
    Cloud {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArg,
        /// Overrides the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Box-counting dimension of a cloud CSV.
    Fd {
        #[arg(long)]
        cloud: PathBuf,
        /// Boxes per axis, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPSILONS)]
        epsilons: Vec<u32>,
        /// Axis range `lo,hi` applied to every axis.
        #[arg(long, value_parser = parse_bounds, allow_hyphen_values = true)]
        bounds: Option<(f64, f64)>,
        #[command(flatten)]
        out: OutArg,
        /// Emit JSON instead of CSV.
        #[arg(long)]
        json: bool,
    },
    /// Arithmetic-code a symbol sequence.
    Encode {
        #[arg(long)]
        model: PathBuf,
        /// Symbols separated by commas or spaces.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "input", required_unless_present = "input")]
        seq: Option<String>,
        /// One sequence per line; writes `x,width,bits` CSV.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Recover `len` symbols from a code value.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        len: usize,
    },
    /// Code sequences from one model with another; writes a 1-D cloud CSV.
    Mismatch {
        /// Model the sequences are drawn from.
        #[arg(long)]
        source: PathBuf,
        /// Model used for coding.
        #[arg(long)]
        assumed: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 12)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Train an RBF SVM on a cloud labeled by last input.
    Svm {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long, default_value_t = KernelParams::probe().sigma)]
        sigma: f64,
        #[arg(long, default_value_t = KernelParams::probe().c)]
        c: f64,
        /// Training states drawn from the cloud (all when larger).
        #[arg(long, default_value_t = 3000)]
        samples: usize,
        #[arg(long, default_value_t = TrainOptions::default().tol)]
        tol: f64,
        #[arg(long, default_value_t = TrainOptions::default().max_passes)]
        max_passes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run an (alpha, beta) grid sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArg,
        /// Also write the d_f heatmap.
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render a cloud CSV (scatter) or sweep CSV (heatmap) as SVG.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: OutArg,
        #[arg(long, default_value_t = render::DEFAULT_MAX_POINTS)]
        max_points: usize,
    },
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_bounds(text: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = text.split(',').collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(format!("expected lo,hi but got {text:?}"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Compute(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Compute(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Compute(m) => m,
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn compute(e: impl std::fmt::Display) -> Failure {
    Failure::Compute(e.to_string())
}

fn open(path: &Path) -> Outcome<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            Err(Failure::Usage(format!("file not found: {}", path.display())))
        }
        Err(e) => Err(Failure::Usage(format!("cannot read {}: {e}", path.display()))),
    }
}

fn read_doc<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Outcome<T> {
    fio::read_json(open(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_model(path: &Path) -> Outcome<SymbolModel> {
    read_doc::<SymbolModelDocument>(path)?
        .model()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_cloud(path: &Path) -> Outcome<esn_fractal::StateCloud> {
    fio::read_cloud_csv(open(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Writes to `--out` or stdout.
fn emit(out: &OutArg, body: impl FnOnce(&mut dyn Write) -> esn_fractal::Result<()>) -> Outcome {
    let result = match &out.out {
        Some(p) => {
            let f = File::create(p).map_err(|e| compute(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(f);
            body(&mut w).and_then(|_| w.flush().map_err(Into::into))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).and_then(|_| w.flush().map_err(Into::into))
        }
    };
    result.map_err(compute)
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| compute(format!("{}: {e}", path.display())))
}

fn parse_sequence(text: &str, model: &SymbolModel) -> Outcome<Vec<usize>> {
    let tokens: Vec<&str> = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return Err(usage("empty symbol sequence"));
    }
    tokens.iter().map(|t| model.index_of(t).map_err(usage)).collect()
}

fn execute(cmd: Command) -> Outcome {
    match cmd {
        Command::Cloud { config, out, seed } => {
            let doc: ReservoirDocument = read_doc(&config)?;
            let cfg = doc.config().map_err(usage)?;
            let mut params = doc.cloud_params();
            if let Some(s) = seed {
                params.seed = s;
            }
            let cloud = esn_fractal::reservoir::generate_cloud(&cfg, &params).map_err(compute)?;
            emit(&out, |w| fio::write_cloud_csv(&cloud, w))
        }
        Command::Fd { cloud, epsilons, bounds, out, json } => {
            let cloud = read_cloud(&cloud)?;
            let fd = match bounds {
                Some(b) => fractal::estimate_fd_in(&cloud, &epsilons, &vec![b; cloud.dim()]),
                None => fractal::estimate_fd(&cloud, &epsilons),
            }
            .map_err(compute)?;
            if json {
                emit(&out, |w| {
                    fio::write_fd_json(&fd, &mut *w)?;
                    Ok(writeln!(w)?)
                })
            } else {
                emit(&out, |w| fio::write_fd_csv(&fd, w))
            }
        }
        Command::Encode { model, seq, input, out } => {
            let model = read_model(&model)?;
            if let Some(text) = seq {
                let seq = parse_sequence(&text, &model)?;
                let s = arith::encode(&seq, &model, 0.0).map_err(compute)?;
                let bits = arith::code_length(&seq, &model).map_err(compute)?;
                return emit(&out, |w| {
                    Ok(writeln!(
                        w,
                        "x={},width={},bits={}",
                        fio::fmt_f64(s.x),
                        fio::fmt_f64(s.width),
                        fio::fmt_f64(bits)
                    )?)
                });
            }
            let path = input.expect("clap enforces --seq or --input");
            let text = io::read_to_string(open(&path)?).map_err(usage)?;
            let mut rows = Vec::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let seq = parse_sequence(line, &model)?;
                let s = arith::encode(&seq, &model, 0.0).map_err(compute)?;
                rows.push((s, arith::code_length(&seq, &model).map_err(compute)?));
            }
            emit(&out, |w| fio::write_encoded_csv(&rows, w))
        }
        Command::Decode { model, x, len } => {
            let model = read_model(&model)?;
            let symbols = arith::decode(x, len, &model).map_err(usage)?;
            let names: Vec<&str> = symbols.iter().map(|&k| model.symbols()[k].as_str()).collect();
            println!("{}", names.join(","));
            Ok(())
        }
        Command::Mismatch { source, assumed, n, len, seed, out } => {
            let (source, assumed) = (read_model(&source)?, read_model(&assumed)?);
            let cloud = arith::mismatch_cloud(&source, &assumed, n, len, seed).map_err(compute)?;
            emit(&out, |w| fio::write_cloud_csv(&cloud, w))
        }
        Command::Svm { cloud, sigma, c, samples, tol, max_passes, seed, out } => {
            let params = KernelParams::new(sigma, c).map_err(usage)?;
            let opts = TrainOptions { tol, max_passes, seed };
            let cloud = read_cloud(&cloud)?;
            let data = LabeledSet::sample_cloud(&cloud, samples, seed).map_err(compute)?;
            let model = svm::train(&data, params, opts).map_err(compute)?;
            let acc = svm::accuracy(&model, &data).map_err(compute)?;
            let summary = serde_json::json!({
                "n_sv": svm::sv_count(&model),
                "bias": model.bias,
                "train_accuracy": acc,
            });
            emit(&out, |w| Ok(writeln!(w, "{summary}")?))
        }
        Command::Sweep { config, out, svg, workers, seed } => {
            let doc: SweepDocument = read_doc(&config)?;
            let mut spec = doc.spec().map_err(usage)?;
            if let Some(n) = workers {
                spec.workers = n;
            }
            if let Some(s) = seed {
                spec.cloud.seed = s;
            }
            spec.validate().map_err(usage)?;
            let result = sweep::run_sweep(&spec).map_err(compute)?;
            emit(&out, |w| fio::write_sweep_csv(&result, w))?;
            if let Some(path) = svg {
                write_file(&path, &render::render_surface(&result).map_err(compute)?)?;
            }
            Ok(())
        }
        Command::Render { input, out, max_points } => {
            let text = io::read_to_string(open(&input)?).map_err(usage)?;
            let first = text.lines().next().unwrap_or_default();
            let svg = if first == fio::SWEEP_HEADER.join(",") {
                let result = fio::read_sweep_csv(text.as_bytes()).map_err(usage)?;
                render::render_surface(&result)
            } else {
                let cloud = fio::read_cloud_csv(text.as_bytes()).map_err(usage)?;
                render::render_scatter(&cloud, max_points)
            }
            .map_err(compute)?;
            emit(&out, |w| Ok(w.write_all(svg.as_bytes())?))
        }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("esnfd: {}", f.message());
            f.code()
        }
    }
}
