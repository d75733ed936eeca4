//! Subcommand bodies: seed sweeps, masking, evaluation and synthesis.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cdimc_core::dataset::{make_synthetic, MaskSpec, MultiViewDataset, SyntheticSpec};
use cdimc_core::metrics::{acc, nmi};
use cdimc_core::pipeline::{run_pipeline, PipelineError, PipelineOutcome};
use rayon::prelude::*;

use crate::checkpoint;
use crate::config::{DataSource, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{load_dataset, load_labels, save_dataset, write_assignments};
use crate::report::{diagnostics_jsonl, RunReport, SeedResult};

pub fn load_source(source: &DataSource) -> Result<MultiViewDataset> {
    match source {
        DataSource::Dir(dir) => load_dataset(dir),
        DataSource::Synthetic(spec) => Ok(make_synthetic(spec)?),
    }
}

pub struct SeedRun {
    pub seed: u64,
    pub outcome: std::result::Result<PipelineOutcome, PipelineError>,
    pub wall_time_secs: f64,
}

/// Runs the pipeline once per seed. Seeds run in parallel; results come back
/// in the order of `seeds`.
pub fn sweep(ds: &MultiViewDataset, config: &RunConfig) -> Vec<SeedRun> {
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let start = Instant::now();
            let outcome = run_pipeline(ds, &config.pipeline, seed);
            SeedRun { seed, outcome, wall_time_secs: start.elapsed().as_secs_f64() }
        })
        .collect()
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Everything `run` writes for one seed.
pub fn seed_files(out: &Path, seed: u64) -> (PathBuf, PathBuf, PathBuf) {
    (
        out.join(format!("assignments_seed{seed}.csv")),
        out.join(format!("diagnostics_seed{seed}.jsonl")),
        out.join(format!("model_seed{seed}.ckpt")),
    )
}

/// Runs every seed and writes `config.txt`, `report.txt`, `report.json` and
/// the per-seed assignments, diagnostics and checkpoints into `config.out`.
/// On a failed seed the report is still written, marked incomplete, and the
/// first failure is returned.
pub fn cmd_run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let ds = load_source(&config.data)?;
    let out = &config.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write(&out.join("config.txt"), &config.to_text())?;

    let mut results = Vec::new();
    let mut failure = None;
    for run in sweep(&ds, config) {
        let outcome = match run.outcome {
            Ok(o) => o,
            Err(e) => {
                failure.get_or_insert(CliError::from(e));
                continue;
            }
        };
        let (assign_path, diag_path, model_path) = seed_files(out, run.seed);
        write_assignments(&assign_path, &outcome.assignments)?;
        write(&diag_path, &diagnostics_jsonl(&outcome.finetune.trace))?;
        checkpoint::save(&outcome.model, &model_path)?;
        if !outcome.finetune.idle_iterations.is_empty() {
            eprintln!(
                "warning: seed {}: no sample selected and no graph term in iteration(s) {:?}; encoders were not updated",
                run.seed, outcome.finetune.idle_iterations
            );
        }
        results.push(SeedResult {
            seed: run.seed,
            acc: outcome.acc,
            nmi: outcome.nmi,
            iterations: outcome.iterations(),
            converged: outcome.finetune.converged,
            idle_iterations: outcome.finetune.idle_iterations.clone(),
            wall_time_secs: run.wall_time_secs,
            diagnostics: diag_path.file_name().expect("file name").to_string_lossy().into_owned(),
        });
    }
    let report = RunReport::new(results, failure.is_none());
    write(&out.join("report.txt"), &report.to_text())?;
    write(&out.join("report.json"), &report.to_json())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// Loads a complete dataset, removes views per `spec` and saves the result.
pub fn cmd_mask(data: &Path, spec: &MaskSpec, out: &Path) -> Result<MultiViewDataset> {
    let ds = load_dataset(data)?;
    let masked = ds.make_incomplete(spec)?;
    save_dataset(&masked, out)?;
    Ok(masked)
}

/// ACC and NMI of `predicted` against `truth`.
pub fn cmd_eval(predicted: &Path, truth: &Path) -> Result<(f64, f64)> {
    let pred = load_labels(predicted)?;
    let truth = load_labels(truth)?;
    if pred.len() != truth.len() {
        return Err(CliError::Format(format!("{} predictions but {} true labels", pred.len(), truth.len())));
    }
    Ok((acc(&pred, &truth)?, nmi(&pred, &truth)?))
}

pub fn cmd_synth(spec: &SyntheticSpec, out: &Path) -> Result<MultiViewDataset> {
    let ds = make_synthetic(spec)?;
    save_dataset(&ds, out)?;
    Ok(ds)
}
