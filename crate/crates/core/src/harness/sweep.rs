use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::guidance::GuidanceMode;

use super::{train_command, ExperimentConfig, HarnessError};

pub const SUMMARY_FILE: &str = "summary.csv";

/// One (guidance, seed) training run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub guidance: GuidanceMode,
    pub seed: u64,
    pub out: PathBuf,
    /// Final `return_mean`, or the error that stopped the run.
    pub result: Result<f64, String>,
}

/// Per-guidance aggregate over the successful seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceSummary {
    pub guidance: GuidanceMode,
    pub runs: usize,
    pub failed: usize,
    /// `None` when every run failed.
    pub final_return_mean: Option<f64>,
    /// Population standard deviation; 0 for a single run.
    pub final_return_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    pub summary: Vec<GuidanceSummary>,
    pub summary_path: PathBuf,
}

/// Trains every (guidance, seed) pair of `base`.
///
/// Cell `g`/`s` writes into `base.out/<g>-seed<s>/`. A failing cell is recorded
/// and the sweep carries on. With `parallel`, cells run concurrently; results
/// are identical either way.
pub fn sweep_command(
    base: &ExperimentConfig,
    guidances: &[GuidanceMode],
    seeds: &[u64],
    parallel: bool,
) -> Result<SweepOutcome, HarnessError> {
    if guidances.is_empty() {
        return Err(HarnessError::Config {
            field: "guidance".into(),
            reason: "sweep needs at least one guidance mode".into(),
        });
    }
    if seeds.is_empty() {
        return Err(HarnessError::Config {
            field: "seed".into(),
            reason: "sweep needs at least one seed".into(),
        });
    }
    base.validate()?;
    fs::create_dir_all(&base.out)?;

    let plan: Vec<(GuidanceMode, u64)> = guidances
        .iter()
        .flat_map(|&g| seeds.iter().map(move |&s| (g, s)))
        .collect();
    let run = |&(guidance, seed): &(GuidanceMode, u64)| {
        let mut config = base.clone();
        config.guidance = guidance;
        config.seed = seed;
        config.out = base.out.join(format!("{guidance}-seed{seed}"));
        let result = train_command(&config)
            .map(|outcome| outcome.final_return())
            .map_err(|e| e.to_string());
        SweepCell {
            guidance,
            seed,
            out: config.out,
            result,
        }
    };
    let cells: Vec<SweepCell> = if parallel {
        plan.par_iter().map(run).collect()
    } else {
        plan.iter().map(run).collect()
    };

    let mut summary = Vec::new();
    for &guidance in guidances {
        if summary.iter().any(|s: &GuidanceSummary| s.guidance == guidance) {
            continue;
        }
        let finals: Vec<f64> = cells
            .iter()
            .filter(|c| c.guidance == guidance)
            .filter_map(|c| c.result.as_ref().ok().copied())
            .collect();
        let failed = cells
            .iter()
            .filter(|c| c.guidance == guidance && c.result.is_err())
            .count();
        let (mean, std) = if finals.is_empty() {
            (None, None)
        } else {
            let n = finals.len() as f64;
            let mean = finals.iter().sum::<f64>() / n;
            let var = finals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
            (Some(mean), Some(var.sqrt()))
        };
        summary.push(GuidanceSummary {
            guidance,
            runs: finals.len(),
            failed,
            final_return_mean: mean,
            final_return_std: std,
        });
    }

    let summary_path = base.out.join(SUMMARY_FILE);
    let mut writer = csv::Writer::from_path(&summary_path)?;
    writer.write_record(["guidance", "runs", "failed", "final_return_mean", "final_return_std"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for s in &summary {
        writer.write_record([
            s.guidance.to_string(),
            s.runs.to_string(),
            s.failed.to_string(),
            opt(s.final_return_mean),
            opt(s.final_return_std),
        ])?;
    }
    writer.flush()?;

    Ok(SweepOutcome {
        cells,
        summary,
        summary_path,
    })
}
