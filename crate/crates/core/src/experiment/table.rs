use std::path::Path;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::io::ensure_dir;

use super::config::ExperimentKind;

/// Outcome of one trial at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub grid_index: usize,
    pub grid_value: f64,
    pub trial: usize,
    /// Stream id of the trial's seed.
    pub stream_id: u64,
    pub feasible: bool,
    /// Aligned with [`ResultTable::metric_names`]; `None` for infeasible trials.
    pub metrics: Vec<Option<f64>>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub grid_index: usize,
    pub grid_value: f64,
    /// Feasible trials aggregated into this row.
    pub trials: usize,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub kind: ExperimentKind,
    /// Column name of the swept parameter.
    pub grid_name: &'static str,
    pub metric_names: Vec<&'static str>,
    pub records: Vec<TrialRecord>,
    /// One row per grid point with at least one feasible trial.
    pub summaries: Vec<GridSummary>,
    /// Grid values at which no trial was feasible.
    pub infeasible: Vec<f64>,
    pub write_timings: bool,
}

impl ResultTable {
    /// Aggregates feasible records per grid point.
    pub fn from_records(
        kind: ExperimentKind,
        grid_name: &'static str,
        metric_names: Vec<&'static str>,
        grid: &[f64],
        mut records: Vec<TrialRecord>,
    ) -> Self {
        records.sort_by_key(|r| (r.grid_index, r.trial));
        let mut summaries = Vec::new();
        let mut infeasible = Vec::new();
        for (g, &value) in grid.iter().enumerate() {
            let rows: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.grid_index == g && r.feasible)
                .collect();
            if rows.is_empty() {
                infeasible.push(value);
                continue;
            }
            let (means, sds) = (0..metric_names.len())
                .map(|k| {
                    let vals: Vec<f64> = rows.iter().filter_map(|r| r.metrics[k]).collect();
                    mean_sd(&vals)
                })
                .unzip();
            summaries.push(GridSummary {
                grid_index: g,
                grid_value: value,
                trials: rows.len(),
                means,
                sds,
            });
        }
        Self {
            kind,
            grid_name,
            metric_names,
            records,
            summaries,
            infeasible,
            write_timings: false,
        }
    }

    pub fn metric_index(&self, name: &str) -> Option<usize> {
        self.metric_names.iter().position(|m| *m == name)
    }

    /// Mean of `metric` for every summary row, in grid order.
    pub fn means_of(&self, metric: &str) -> Vec<f64> {
        let k = self.metric_index(metric).expect("known metric");
        self.summaries.iter().map(|s| s.means[k]).collect()
    }

    pub fn digest(&self) -> Vec<String> {
        self.summaries
            .iter()
            .map(|s| {
                let stats: Vec<String> = self
                    .metric_names
                    .iter()
                    .zip(&s.means)
                    .map(|(name, mean)| format!("{name}={mean:.4}"))
                    .collect();
                let wall: Duration = self
                    .records
                    .iter()
                    .filter(|r| r.grid_index == s.grid_index)
                    .map(|r| r.wall_time)
                    .sum();
                format!(
                    "{} {}={:.4} trials={} {} ({:.1}s)",
                    self.kind,
                    self.grid_name,
                    s.grid_value,
                    s.trials,
                    stats.join(" "),
                    wall.as_secs_f64()
                )
            })
            .collect()
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_sd(vals: &[f64]) -> (f64, f64) {
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let sd = if vals.len() > 1 {
        (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `summary.csv` and `trials.csv` into `output_dir` and returns the
/// per-grid-point digest lines.
pub fn emit_results(table: &ResultTable, output_dir: &Path) -> Result<Vec<String>> {
    if table.summaries.is_empty() {
        return Err(Error::Parameter("result table has no feasible grid points".into()));
    }
    ensure_dir(output_dir)?;

    let path = output_dir.join("summary.csv");
    let err = csv_error(&path);
    let mut w = csv::Writer::from_path(&path).map_err(&err)?;
    let mut header = vec!["grid_index".to_string(), table.grid_name.to_string(), "trials".to_string()];
    for m in &table.metric_names {
        header.push(format!("mean_{m}"));
        header.push(format!("sd_{m}"));
    }
    w.write_record(&header).map_err(&err)?;
    for s in &table.summaries {
        let mut row = vec![s.grid_index.to_string(), s.grid_value.to_string(), s.trials.to_string()];
        for (mean, sd) in s.means.iter().zip(&s.sds) {
            row.push(mean.to_string());
            row.push(sd.to_string());
        }
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = output_dir.join("trials.csv");
    let err = csv_error(&path);
    let mut w = csv::Writer::from_path(&path).map_err(&err)?;
    let mut header: Vec<String> = ["grid_index", table.grid_name, "trial", "stream_id", "feasible"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(table.metric_names.iter().map(|m| m.to_string()));
    if table.write_timings {
        header.push("wall_seconds".into());
    }
    w.write_record(&header).map_err(&err)?;
    for r in &table.records {
        let mut row = vec![
            r.grid_index.to_string(),
            r.grid_value.to_string(),
            r.trial.to_string(),
            r.stream_id.to_string(),
            r.feasible.to_string(),
        ];
        row.extend(r.metrics.iter().map(|v| cell(*v)));
        if table.write_timings {
            row.push(r.wall_time.as_secs_f64().to_string());
        }
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    Ok(table.digest())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(g: usize, trial: usize, feasible: bool, v: f64) -> TrialRecord {
        TrialRecord {
            grid_index: g,
            grid_value: g as f64 * 0.5,
            trial,
            stream_id: trial as u64,
            feasible,
            metrics: vec![feasible.then_some(v)],
            wall_time: Duration::from_millis(3),
        }
    }

    #[test]
    fn summaries_skip_infeasible_points() {
        let recs = vec![
            record(0, 0, true, 1.0),
            record(0, 1, true, 3.0),
            record(1, 0, false, 0.0),
            record(2, 0, true, 0.25),
        ];
        let t = ResultTable::from_records(ExperimentKind::Fig1, "t", vec!["x"], &[0.0, 0.5, 1.0], recs);
        assert_eq!(t.summaries.len(), 2);
        assert_eq!(t.infeasible, vec![0.5]);
        assert_eq!(t.summaries[0].means, vec![2.0]);
        assert!((t.summaries[0].sds[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(t.digest().len(), 2);
    }

    #[test]
    fn summary_round_trip_and_empty_table() {
        let recs = vec![record(0, 0, true, 1.0 / 3.0), record(0, 1, true, 0.1)];
        let t = ResultTable::from_records(ExperimentKind::Fig2, "p", vec!["x"], &[0.0], recs);
        let dir = tempfile::tempdir().unwrap();
        let lines = emit_results(&t, dir.path()).unwrap();
        assert_eq!(lines.len(), 1);
        let mut r = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
        let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
        assert_eq!(rows.len(), t.summaries.len());
        let mean: f64 = rows[0][3].parse().unwrap();
        assert_eq!(mean, t.summaries[0].means[0]);

        let empty = ResultTable::from_records(ExperimentKind::Fig2, "p", vec!["x"], &[0.0], vec![record(0, 0, false, 0.0)]);
        let out = dir.path().join("never");
        assert!(matches!(emit_results(&empty, &out), Err(Error::Parameter(_))));
        assert!(!out.exists());
    }
}
