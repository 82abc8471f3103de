//! Clustering error against subspace correlation.

use std::time::Instant;

use rayon::prelude::*;

use crate::cluster::{cluster_via_nmf, clustering_error};
use crate::error::{Error, Result};
use crate::seed::SeedSpec;
use crate::subspace::{generate_block_dataset, max_feasible_t, model_generators, BlockModel};

use super::config::{ExperimentConfig, ExperimentKind};
use super::table::{ResultTable, TrialRecord};

pub const FIG1_METRICS: [&str; 3] = ["alpha", "t", "misclassified"];

const TAG_NMF: u64 = 10;
const TAG_KMEANS: u64 = 11;

pub(crate) fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> SeedSpec {
    cfg.master().child(trial as u64)
}

/// Rotation grid actually swept: explicit `t` values, or fractions of each
/// trial's largest feasible rotation.
enum Grid {
    Fixed(Vec<f64>),
    Fractions(Vec<f64>),
}

fn infeasible(err: &Error) -> bool {
    matches!(err, Error::RotationTooLarge { .. } | Error::Degenerate(_))
}

/// Clustering sweep over rotation strengths.
///
/// Every trial reuses its subspace and generator across the grid, so the
/// curve compares the same draws at different rotations.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<ResultTable> {
    if cfg.experiment != ExperimentKind::Fig1 {
        return Err(Error::Config(format!("run_fig1 called with a {} config", cfg.experiment)));
    }
    cfg.validate()?;
    let grid = match &cfg.t_grid {
        Some(ts) => Grid::Fixed(ts.clone()),
        None => Grid::Fractions(
            (0..cfg.feasible_points)
                .map(|j| j as f64 / (cfg.feasible_points - 1) as f64)
                .collect(),
        ),
    };
    let (grid_name, grid_values) = match &grid {
        Grid::Fixed(v) => ("t", v.clone()),
        Grid::Fractions(v) => ("t_fraction", v.clone()),
    };

    let t_max: Vec<Option<f64>> = match grid {
        Grid::Fixed(_) => vec![None; cfg.trials],
        Grid::Fractions(_) => (0..cfg.trials)
            .into_par_iter()
            .map(|i| {
                let (u, a) = model_generators(cfg.n, cfg.r, trial_seed(cfg, i))?;
                max_feasible_t(&u, &a).map(Some)
            })
            .collect::<Result<_>>()?,
    };

    let solver = cfg.solver();
    let mut records = Vec::with_capacity(grid_values.len() * cfg.trials);
    for (g, &value) in grid_values.iter().enumerate() {
        let batch: Vec<TrialRecord> = (0..cfg.trials)
            .into_par_iter()
            .map(|i| -> Result<TrialRecord> {
                let start = Instant::now();
                let seed = trial_seed(cfg, i);
                let t = t_max[i].map_or(value, |tm| value * tm);
                let model = BlockModel {
                    m: cfg.m,
                    n: cfg.n,
                    r: cfg.r,
                    t,
                    permute: cfg.permute,
                    negatives: cfg.negatives,
                };
                let mut record = TrialRecord {
                    grid_index: g,
                    grid_value: value,
                    trial: i,
                    stream_id: seed.stream_id,
                    feasible: false,
                    metrics: vec![None, Some(t), None],
                    wall_time: Default::default(),
                };
                let ds = match generate_block_dataset(&model, seed) {
                    Ok(ds) => ds,
                    Err(e) if infeasible(&e) => {
                        record.wall_time = start.elapsed();
                        return Ok(record);
                    }
                    Err(e) => return Err(e),
                };
                let found = cluster_via_nmf(
                    &ds.x,
                    cfg.r_full(),
                    &cfg.kmeans(seed.child(TAG_KMEANS)),
                    &solver,
                    seed.child(TAG_NMF),
                )?;
                let wrong = clustering_error(&found, &ds.true_labels)?;
                record.feasible = true;
                record.metrics = vec![Some(ds.alpha), Some(t), Some(wrong as f64)];
                record.wall_time = start.elapsed();
                Ok(record)
            })
            .collect::<Result<_>>()?;
        records.extend(batch);
    }

    let mut table = ResultTable::from_records(
        ExperimentKind::Fig1,
        grid_name,
        FIG1_METRICS.to_vec(),
        &grid_values,
        records,
    );
    table.write_timings = cfg.timings;
    Ok(table)
}
