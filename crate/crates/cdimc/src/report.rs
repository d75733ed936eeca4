//! Per-seed results with mean and standard deviation, as text and JSON.

use std::fmt::Write as _;

use cdimc_core::finetune::IterationRecord;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    /// Outer fine-tuning iterations run.
    pub iterations: usize,
    pub converged: bool,
    /// Iterations in which the encoders received no gradient.
    pub idle_iterations: Vec<usize>,
    pub wall_time_secs: f64,
    /// Diagnostics file for this seed, relative to the output directory.
    pub diagnostics: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single value.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Some(Summary { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// `false` when some seed failed; `runs` then holds the seeds that finished.
    pub complete: bool,
    pub runs: Vec<SeedResult>,
    pub acc: Option<Summary>,
    pub nmi: Option<Summary>,
}

impl RunReport {
    pub fn new(runs: Vec<SeedResult>, complete: bool) -> Self {
        let collect = |f: fn(&SeedResult) -> Option<f64>| -> Option<Vec<f64>> { runs.iter().map(f).collect() };
        let acc = collect(|r| r.acc).and_then(|v| Summary::of(&v));
        let nmi = collect(|r| r.nmi).and_then(|v| Summary::of(&v));
        RunReport { complete, runs, acc, nmi }
    }

    pub fn to_text(&self) -> String {
        let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        let mut out = String::new();
        writeln!(out, "status: {}", if self.complete { "complete" } else { "INCOMPLETE" }).unwrap();
        writeln!(out, "{:>6} {:>8} {:>8} {:>10} {:>9} {:>9}", "seed", "acc", "nmi", "iterations", "converged", "time_s")
            .unwrap();
        for r in &self.runs {
            writeln!(
                out,
                "{:>6} {:>8} {:>8} {:>10} {:>9} {:>9.2}",
                r.seed,
                fmt(r.acc),
                fmt(r.nmi),
                r.iterations,
                r.converged,
                r.wall_time_secs
            )
            .unwrap();
        }
        for (name, s) in [("acc", self.acc), ("nmi", self.nmi)] {
            if let Some(s) = s {
                writeln!(out, "{name}: {:.4} +- {:.4}", s.mean, s.std).unwrap();
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// One JSON object per line: `t`, `loss`, `lambda`, `threshold`, `selected`,
/// `change_fraction`, `distortion`.
pub fn diagnostics_jsonl(trace: &[IterationRecord]) -> String {
    trace
        .iter()
        .map(|r| {
            let rec = serde_json::json!({
                "t": r.t,
                "loss": r.loss,
                "lambda": r.lambda,
                "threshold": r.threshold,
                "selected": r.selected,
                "change_fraction": r.change_fraction,
                "distortion": r.distortion,
            });
            rec.to_string() + "\n"
        })
        .collect()
}
