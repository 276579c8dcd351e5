//! Command implementations behind the `christoffel` binary.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

pub mod levelset;
pub mod metrics;
pub mod model_file;
pub mod sweep;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::christoffel::ThresholdPolicy;
use crate::classifier::{ClassifierModel, FitOptions, Prediction};
use crate::datasets::{gen_shapes, read_csv, read_csv_table, read_shape_file, write_csv, PRNG_NAME};
use crate::error::{Error, ErrorKind, Result};
use crate::moments::MassPolicy;
use crate::multiindex::basis_size;
use levelset::{levelset_grid, Gamma};
use metrics::evaluate;
use sweep::{run_sweep, write_rows, SweepConfig};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Usage => EXIT_USAGE,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Parser)]
#[command(name = "christoffel", version, about = "Christoffel-function classification on point clouds")]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample labeled points uniformly from shapes listed in a TOML file.
    Synth(SynthArgs),
    /// Fit a model on a labeled CSV and save it.
    Train(TrainArgs),
    /// Append predicted labels and per-class scores to a CSV of queries.
    Predict(PredictArgs),
    /// Accuracy and confusion matrix on a labeled CSV.
    Eval(EvalArgs),
    /// Per-class scores and superlevel membership on a grid.
    Levelset(LevelsetArgs),
    /// Train/evaluate over every combination of sizes, degrees and seeds.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Degree {
    Auto,
    Fixed(u32),
}

impl std::str::FromStr for Degree {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(Degree::Auto),
            _ => match s.parse::<u32>() {
                Ok(t) if t >= 1 => Ok(Degree::Fixed(t)),
                _ => Err(format!("expected `auto` or an integer >= 1, got `{s}`")),
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Shape file (TOML, one `[[shape]]` block per class).
    #[arg(long)]
    pub spec: PathBuf,
    /// Points per class.
    #[arg(short = 'n', long = "per-class")]
    pub per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled CSV (`x1,...,xn,label`).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "auto")]
    pub degree: Degree,
    #[arg(long, default_value = "rel:1e-10")]
    pub threshold_policy: ThresholdPolicy,
    /// Give class j mass N_j/N instead of 1.
    #[arg(long)]
    pub class_prior_weights: bool,
    /// Predict `0` (reject) when every score is below this level.
    #[arg(long)]
    pub reject_below: Option<f64>,
    /// Recorded in the model metadata.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Query CSV; a trailing `label` column is kept as is.
    #[arg(long)]
    pub data: PathBuf,
    /// Report `Lambda_j * s(t) / mass_j` instead of raw scores.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Shape file; adds accuracy restricted to the epsilon-interior.
    #[arg(long)]
    pub shapes: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Leave out the wall-clock line, making the report reproducible.
    #[arg(long)]
    pub omit_runtime: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LevelsetArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `lo1,hi1[,lo2,hi2[,lo3,hi3]]`, e.g. `--bounds=-4,4,-3,3`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub bounds: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub grid_res: usize,
    /// `auto` (per-class 5th percentile of training scores), a number, or `inf`.
    #[arg(long, default_value = "auto")]
    pub gamma: Gamma,
    /// Grid table (CSV); the summary goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Training points per class, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "4")]
    pub degrees: Vec<u32>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "0")]
    pub seeds: Vec<u64>,
    /// Test points per class.
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value = "rel:1e-10")]
    pub threshold_policy: ThresholdPolicy,
    #[arg(long)]
    pub omit_runtime: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn out_name(path: Option<&Path>) -> PathBuf {
    path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf)
}

fn finish(mut w: Box<dyn Write>, path: Option<&Path>) -> Result<()> {
    w.flush().map_err(|e| Error::io(out_name(path), e))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Train(a) => train(&a),
        Command::Predict(a) => predict(&a),
        Command::Eval(a) => eval(&a),
        Command::Levelset(a) => levelset(&a),
        Command::Sweep(a) => sweep(&a),
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let specs = read_shape_file(&a.spec)?;
    let ds = gen_shapes(&specs, a.per_class, a.seed)?;
    write_csv(&ds, &a.out)?;
    println!("rows = {}", ds.len());
    println!("prng = {PRNG_NAME}");
    println!("seed = {}", a.seed);
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let ds = read_csv(&a.data)?;
    let opts = FitOptions {
        degree: match a.degree {
            Degree::Auto => None,
            Degree::Fixed(t) => Some(t),
        },
        policy: a.threshold_policy,
        mass_policy: if a.class_prior_weights { MassPolicy::ClassPrior } else { MassPolicy::Normalized },
        reject_below: a.reject_below,
        scale: true,
        seed: a.seed,
    };
    let model = ClassifierModel::fit(&ds, &opts)?;
    model_file::save(&model, &a.out)?;
    let s = basis_size(model.dim(), model.degree());
    println!("degree = {}", model.degree());
    println!("basis_size = {s}");
    for (j, ev) in model.evaluators().iter().enumerate() {
        println!("class.{} = samples {}, rank {}/{s}, condition {:e}", j + 1, ev.samples(), ev.rank(), ev.condition());
    }
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let model = model_file::load(&a.model)?;
    let table = read_csv_table(&a.data)?;
    if table.n != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: table.n });
    }
    let out_path = a.out.as_deref();
    let mut w = output(out_path)?;
    let io = |e| Error::io(out_name(out_path), e);
    let mut header: Vec<String> = (1..=table.n).map(|i| format!("x{i}")).collect();
    if table.labels.is_some() {
        header.push("label".into());
    }
    header.push("predicted".into());
    header.extend((1..=model.classes()).map(|j| format!("score{j}")));
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for (i, x) in table.points.chunks_exact(table.n).enumerate() {
        let raw = model.scores(x)?;
        let pred = match model.decide(&raw) {
            Prediction::Class(j) => j,
            Prediction::Reject => 0,
        };
        let shown = if a.normalize { model.normalized_scores(x)? } else { raw };
        let mut cells: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        if let Some(labels) = &table.labels {
            cells.push(labels[i].to_string());
        }
        cells.push(pred.to_string());
        cells.extend(shown.iter().map(|v| format!("{v:?}")));
        writeln!(w, "{}", cells.join(",")).map_err(io)?;
    }
    finish(w, out_path)
}

fn eval(a: &EvalArgs) -> Result<()> {
    let start = Instant::now();
    let model = model_file::load(&a.model)?;
    let ds = read_csv(&a.data)?;
    let shapes = a.shapes.as_deref().map(read_shape_file).transpose()?;
    let mut report = evaluate(&model, &ds, shapes.as_deref().map(|s| (s, a.epsilon)))?;
    if !a.omit_runtime {
        report.runtime_seconds = Some(start.elapsed().as_secs_f64());
    }
    let out_path = a.out.as_deref();
    let mut w = output(out_path)?;
    w.write_all(report.to_text().as_bytes()).map_err(|e| Error::io(out_name(out_path), e))?;
    finish(w, out_path)
}

fn levelset(a: &LevelsetArgs) -> Result<()> {
    let model = model_file::load(&a.model)?;
    let grid = levelset_grid(&model, &a.bounds, a.grid_res, a.gamma)?;
    if let Some(p) = &a.out {
        let mut w = output(Some(p))?;
        grid.write_csv(&mut w).map_err(|e| Error::io(p, e))?;
        finish(w, Some(p))?;
    }
    print!("{}", grid.summary());
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<()> {
    let cfg = SweepConfig {
        specs: read_shape_file(&a.spec)?,
        sizes: a.sizes.clone(),
        degrees: a.degrees.clone(),
        seeds: a.seeds.clone(),
        test_size: a.test_size,
        epsilon: a.epsilon,
        policy: a.threshold_policy,
    };
    let rows = run_sweep(&cfg)?;
    let out_path = a.out.as_deref();
    let mut w = output(out_path)?;
    write_rows(&rows, !a.omit_runtime, &mut w).map_err(|e| Error::io(out_name(out_path), e))?;
    finish(w, out_path)
}
