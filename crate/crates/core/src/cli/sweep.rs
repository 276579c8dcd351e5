//! Full factorial `(N, t, seed)` experiments on synthetic shapes.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::christoffel::ThresholdPolicy;
use crate::classifier::{ClassifierModel, FitOptions};
use crate::cli::metrics::evaluate;
use crate::datasets::{gen_shapes, ShapeSpec};
use crate::error::{Error, Result};

/// Mixed into the seed of each test draw so test points never reuse the
/// training stream.
pub const TEST_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub specs: Vec<ShapeSpec>,
    pub sizes: Vec<usize>,
    pub degrees: Vec<u32>,
    pub seeds: Vec<u64>,
    pub test_size: usize,
    pub epsilon: f64,
    pub policy: ThresholdPolicy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub size: usize,
    pub degree: u32,
    pub seed: u64,
    pub outcome: std::result::Result<(f64, f64), String>,
    pub runtime_seconds: f64,
}

/// Trains on `size` points per class and scores a fresh test draw.
/// Returns `(accuracy, interior accuracy)`.
pub fn run_cell(cfg: &SweepConfig, size: usize, degree: u32, seed: u64) -> Result<(f64, f64)> {
    let train = gen_shapes(&cfg.specs, size, seed)?;
    let test = gen_shapes(&cfg.specs, cfg.test_size, seed ^ TEST_SEED_MIX)?;
    let opts = FitOptions { degree: Some(degree), policy: cfg.policy, seed: Some(seed), ..FitOptions::default() };
    let model = ClassifierModel::fit(&train, &opts)?;
    let report = evaluate(&model, &test, Some((&cfg.specs, cfg.epsilon)))?;
    Ok((report.accuracy, report.interior.map_or(f64::NAN, |i| i.accuracy)))
}

/// Rows come back in `(N, t, seed)` order whatever the schedule.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.sizes.is_empty() || cfg.degrees.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::invalid("sweep needs at least one size, degree and seed"));
    }
    let cells: Vec<(usize, u32, u64)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| cfg.degrees.iter().flat_map(move |&t| cfg.seeds.iter().map(move |&s| (n, t, s))))
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(size, degree, seed)| {
            let start = Instant::now();
            let outcome = run_cell(cfg, size, degree, seed).map_err(|e| e.to_string());
            SweepRow { size, degree, seed, outcome, runtime_seconds: start.elapsed().as_secs_f64() }
        })
        .collect())
}

pub fn write_rows(rows: &[SweepRow], runtime: bool, mut out: impl Write) -> std::io::Result<()> {
    write!(out, "N,t,seed,accuracy,interior_accuracy")?;
    if runtime {
        write!(out, ",runtime_seconds")?;
    }
    writeln!(out, ",error")?;
    for r in rows {
        let (acc, int, err) = match &r.outcome {
            Ok((a, i)) => (a.to_string(), i.to_string(), String::new()),
            Err(e) => (String::new(), String::new(), format!("\"{}\"", e.replace('"', "'"))),
        };
        write!(out, "{},{},{},{acc},{int}", r.size, r.degree, r.seed)?;
        if runtime {
            write!(out, ",{:.6}", r.runtime_seconds)?;
        }
        writeln!(out, ",{err}")?;
    }
    Ok(())
}
