//! Basic against block completion on two-block low-rank matrices.

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::clustering_error;
use crate::completion::{BlockCompletion, CompletionReport};
use crate::error::{Error, Result};
use crate::io::{ensure_dir, write_labels, write_mask, write_matrix_csv, write_toml};
use crate::mask::{bernoulli_mask, Mask};
use crate::matrix::{relative_error, uniform_random_matrix, DataMatrix};
use crate::seed::SeedSpec;

use super::config::{ExperimentConfig, ExperimentKind};
use super::fig1::trial_seed;
use super::table::{ResultTable, TrialRecord};

pub const FIG2_METRICS: [&str; 6] = [
    "basic_error",
    "block_error",
    "misclassified",
    "fallback",
    "basic_success",
    "block_success",
];

const TAG_BLOCKS: u64 = 20;
const TAG_PERMUTATION: u64 = 21;
const TAG_MASK: u64 = 22;
const TAG_COMPLETION: u64 = 23;

/// Ground truth of one trial: `k` stacked blocks, each an `m × r` uniform
/// matrix times an `r × n` uniform matrix, rows optionally permuted.
pub fn block_truth(cfg: &ExperimentConfig, seed: SeedSpec) -> Result<(DataMatrix, Vec<usize>)> {
    let base = seed.child(TAG_BLOCKS);
    let blocks = (0..cfg.k)
        .map(|b| {
            let left = uniform_random_matrix(cfg.m, cfg.r, base.child(2 * b as u64))?;
            let right = uniform_random_matrix(cfg.r, cfg.n, base.child(2 * b as u64 + 1))?;
            left.matmul(&right)
        })
        .collect::<Result<Vec<_>>>()?;
    let stacked = DataMatrix::vstack(&blocks.iter().collect::<Vec<_>>())?;
    let mut order: Vec<usize> = (0..stacked.rows()).collect();
    if cfg.permute {
        order.shuffle(&mut seed.child(TAG_PERMUTATION).rng());
    }
    let labels = order.iter().map(|&i| i / cfg.m).collect();
    Ok((stacked.select_rows(&order)?, labels))
}

/// Everything one completion trial produces.
pub struct CompletionTrial {
    pub truth: DataMatrix,
    pub labels: Vec<usize>,
    pub mask: Mask,
    pub report: CompletionReport,
    pub basic_error: f64,
    pub block_error: f64,
    pub misclassified: usize,
}

pub fn completion_trial(cfg: &ExperimentConfig, seed: SeedSpec, p: f64) -> Result<CompletionTrial> {
    let (truth, labels) = block_truth(cfg, seed)?;
    let mask = bernoulli_mask(truth.rows(), truth.cols(), p, seed.child(TAG_MASK))?;
    let solver = BlockCompletion {
        r_full: cfg.r_full(),
        r_block: cfg.r,
        kmeans: cfg.kmeans(seed),
        solver: cfg.solver(),
        strict_blocks: false,
    };
    let report = solver.run(&truth, &mask, seed.child(TAG_COMPLETION))?;
    // The whole-matrix stage of block completion is exactly basic completion
    // with the same seed, so its error is the basic-completion error.
    let basic_error = relative_error(&report.initial_completion, &truth)?;
    let block_error = relative_error(&report.completed, &truth)?;
    let misclassified = clustering_error(&report.assignment, &labels)?;
    Ok(CompletionTrial {
        truth,
        labels,
        mask,
        report,
        basic_error,
        block_error,
        misclassified,
    })
}

/// Completion sweep over sampling rates.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<ResultTable> {
    if cfg.experiment != ExperimentKind::Fig2 {
        return Err(Error::Config(format!("run_fig2 called with a {} config", cfg.experiment)));
    }
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.p_grid.len() * cfg.trials);
    for (g, &p) in cfg.p_grid.iter().enumerate() {
        let batch: Vec<TrialRecord> = (0..cfg.trials)
            .into_par_iter()
            .map(|i| {
                let start = Instant::now();
                let seed = trial_seed(cfg, i);
                let mut record = TrialRecord {
                    grid_index: g,
                    grid_value: p,
                    trial: i,
                    stream_id: seed.stream_id,
                    feasible: false,
                    metrics: vec![None; FIG2_METRICS.len()],
                    wall_time: Default::default(),
                };
                match completion_trial(cfg, seed, p) {
                    Ok(t) => {
                        let fallback = t.report.used_fallback();
                        let ok = |e: f64| e.is_finite() && e <= cfg.success_threshold;
                        let flag = |b: bool| Some(if b { 1.0 } else { 0.0 });
                        record.feasible = true;
                        record.metrics = vec![
                            Some(t.basic_error),
                            Some(t.block_error),
                            Some(t.misclassified as f64),
                            flag(fallback),
                            flag(ok(t.basic_error)),
                            flag(!fallback && ok(t.block_error)),
                        ];
                    }
                    Err(e) => log::warn!("p = {p}, trial {i}: {e}"),
                }
                record.wall_time = start.elapsed();
                record
            })
            .collect();
        records.extend(batch);
    }
    let mut table = ResultTable::from_records(
        ExperimentKind::Fig2,
        "p",
        FIG2_METRICS.to_vec(),
        &cfg.p_grid,
        records,
    );
    table.write_timings = cfg.timings;
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig3Summary {
    pub p: f64,
    pub master_seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub r_full: usize,
    pub r_block: usize,
    pub iters: usize,
    pub observed: usize,
    pub basic_error: f64,
    pub block_error: f64,
    pub misclassified: usize,
    pub fallback: bool,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

/// One instance of the completion setup at `fig3_p`, written out as
/// `truth.csv`, `basic.csv`, `block.csv`, `mask.csv`, `labels.csv` and
/// `meta.toml`. The instance is trial 0 of the completion sweep.
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<Fig3Summary> {
    if cfg.experiment != ExperimentKind::Fig3 {
        return Err(Error::Config(format!("run_fig3 called with a {} config", cfg.experiment)));
    }
    cfg.validate()?;
    let t = completion_trial(cfg, trial_seed(cfg, 0), cfg.fig3_p)?;
    let dir = &cfg.output_dir;
    ensure_dir(dir)?;
    write_matrix_csv(&dir.join("truth.csv"), &t.truth, false)?;
    write_matrix_csv(&dir.join("basic.csv"), &t.report.initial_completion, false)?;
    write_matrix_csv(&dir.join("block.csv"), &t.report.completed, false)?;
    write_mask(&dir.join("mask.csv"), &t.mask)?;
    write_labels(&dir.join("labels.csv"), &t.labels)?;
    let summary = Fig3Summary {
        p: cfg.fig3_p,
        master_seed: cfg.master_seed,
        rows: t.truth.rows(),
        cols: t.truth.cols(),
        r_full: cfg.r_full(),
        r_block: cfg.r,
        iters: cfg.iters,
        observed: t.mask.len(),
        basic_error: t.basic_error,
        block_error: t.block_error,
        misclassified: t.misclassified,
        fallback: t.report.used_fallback(),
        output_dir: dir.clone(),
    };
    write_toml(&dir.join("meta.toml"), &summary)?;
    Ok(summary)
}
