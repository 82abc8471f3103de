use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_toml;
use crate::kmeans::KMeansSettings;
use crate::nmf::SolverSettings;
use crate::seed::SeedSpec;
use crate::subspace::NegativeEntries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Fig1,
    Fig2,
    Fig3,
    /// Config files tagged `custom` load under any subcommand.
    Custom,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Custom => "custom",
        })
    }
}

/// Rotation grid for the clustering sweep under `negatives = "clamp"`.
/// Correlation drops from 1 to about 0.1 over this range for the default model.
pub const DEFAULT_CLAMP_T_GRID: [f64; 12] = [
    0.0, 0.0025, 0.005, 0.0075, 0.01, 0.015, 0.02, 0.03, 0.05, 0.1, 0.2, 0.4,
];
pub const DEFAULT_P_GRID: [f64; 8] = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
pub const DEFAULT_FIG3_P: f64 = 0.2;
pub const DEFAULT_FIG3_SEED: u64 = 0;
pub const QUICK_TRIALS: usize = 20;
pub const QUICK_ITERS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Rows per block.
    pub m: usize,
    pub n: usize,
    /// Dimension of each block (its rank).
    pub r: usize,
    /// Number of blocks / clusters.
    pub k: usize,
    /// Rank for whole-matrix solves; `r × k` when unset.
    pub r_full: Option<usize>,
    /// Explicit rotation grid. Unset with `negatives = "reject"` means
    /// `feasible_points` evenly spaced fractions of each trial's largest
    /// feasible rotation.
    pub t_grid: Option<Vec<f64>>,
    pub feasible_points: usize,
    pub negatives: NegativeEntries,
    pub p_grid: Vec<f64>,
    pub fig3_p: f64,
    pub trials: usize,
    pub iters: usize,
    pub kmeans_restarts: usize,
    pub kmeans_iters: usize,
    pub permute: bool,
    /// A completion counts as successful below this relative error.
    pub success_threshold: f64,
    pub master_seed: u64,
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    /// Write per-trial wall times (breaks byte reproducibility of trials.csv).
    pub timings: bool,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            m: 100,
            n: 80,
            r: 5,
            k: 2,
            r_full: None,
            t_grid: None,
            feasible_points: 12,
            negatives: NegativeEntries::Clamp,
            p_grid: DEFAULT_P_GRID.to_vec(),
            fig3_p: DEFAULT_FIG3_P,
            trials: 100,
            iters: 500,
            kmeans_restarts: 10,
            kmeans_iters: 300,
            permute: true,
            success_threshold: 0.5,
            master_seed: 0,
            output_dir: PathBuf::from(format!("results/{kind}")),
            timings: false,
        };
        match kind {
            ExperimentKind::Fig1 => Self {
                t_grid: Some(DEFAULT_CLAMP_T_GRID.to_vec()),
                permute: false,
                ..base
            },
            ExperimentKind::Fig3 => Self {
                master_seed: DEFAULT_FIG3_SEED,
                ..base
            },
            _ => base,
        }
    }

    /// Desk-scale budget.
    pub fn quick(mut self) -> Self {
        self.trials = QUICK_TRIALS;
        self.iters = QUICK_ITERS;
        self
    }

    /// Defaults for `kind` overlaid with a TOML config file.
    pub fn from_file(kind: ExperimentKind, path: &Path) -> Result<Self> {
        let file: ConfigFile = read_toml(path)?;
        let mut cfg = Self::defaults(kind);
        file.apply(&mut cfg)?;
        Ok(cfg)
    }

    pub fn r_full(&self) -> usize {
        self.r_full.unwrap_or(self.r * self.k)
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings::with_iters(self.iters)
    }

    pub fn kmeans(&self, seed: SeedSpec) -> KMeansSettings {
        KMeansSettings {
            k: self.k,
            restarts: self.kmeans_restarts,
            max_iters: self.kmeans_iters,
            seed,
        }
    }

    pub fn master(&self) -> SeedSpec {
        SeedSpec::from_master(self.master_seed)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 || self.n == 0 || self.r == 0 || self.k == 0 {
            return bad("m, n, r and k must all be positive".into());
        }
        if self.r_full() > self.n.min(self.m * self.k) {
            return bad(format!("r_full = {} exceeds the matrix dimensions", self.r_full()));
        }
        if self.r > self.n.min(self.m) {
            return bad(format!("r = {} exceeds the block dimensions", self.r));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.iters == 0 || self.kmeans_restarts == 0 || self.kmeans_iters == 0 {
            return bad("iteration counts and restarts must be at least 1".into());
        }
        match self.experiment {
            ExperimentKind::Fig1 => {
                match &self.t_grid {
                    Some(g) if g.is_empty() => return bad("t_grid is empty".into()),
                    Some(g) if g.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) => {
                        return bad("t_grid values must be finite and >= 0".into())
                    }
                    None if self.negatives == NegativeEntries::Clamp => {
                        return bad("negatives = \"clamp\" needs an explicit t_grid".into())
                    }
                    None if self.feasible_points < 2 => return bad("feasible_points must be at least 2".into()),
                    _ => {}
                }
                if self.k != 2 {
                    return bad("the clustering sweep generates exactly two subspaces (k = 2)".into());
                }
            }
            ExperimentKind::Fig2 => {
                if self.p_grid.is_empty() {
                    return bad("p_grid is empty".into());
                }
                if self.p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return bad("p_grid values must lie in [0, 1]".into());
                }
            }
            ExperimentKind::Fig3 => {
                if !(0.0..=1.0).contains(&self.fig3_p) {
                    return bad("fig3_p must lie in [0, 1]".into());
                }
            }
            ExperimentKind::Custom => {}
        }
        Ok(())
    }
}

/// On-disk config; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentKind>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub r: Option<usize>,
    pub k: Option<usize>,
    pub r_full: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub feasible_points: Option<usize>,
    pub negatives: Option<NegativeEntries>,
    pub p_grid: Option<Vec<f64>>,
    pub fig3_p: Option<f64>,
    pub trials: Option<usize>,
    pub iters: Option<usize>,
    pub kmeans_restarts: Option<usize>,
    pub kmeans_iters: Option<usize>,
    pub permute: Option<bool>,
    pub success_threshold: Option<f64>,
    pub master_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub timings: Option<bool>,
    /// Same as passing `--quick`; explicit trials/iters still win.
    pub quick: Option<bool>,
}

impl ConfigFile {
    pub fn apply(self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(kind) = self.experiment {
            if kind != ExperimentKind::Custom && kind != cfg.experiment {
                return Err(Error::Config(format!(
                    "config is for experiment {kind} but {} was requested",
                    cfg.experiment
                )));
            }
        }
        if self.quick == Some(true) {
            *cfg = cfg.clone().quick();
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        take!(m, n, r, k, feasible_points, negatives, p_grid, fig3_p, trials, iters,
              kmeans_restarts, kmeans_iters, permute, success_threshold, master_seed,
              output_dir, timings);
        if self.r_full.is_some() {
            cfg.r_full = self.r_full;
        }
        if self.t_grid.is_some() {
            cfg.t_grid = self.t_grid;
        } else if self.negatives == Some(NegativeEntries::Reject) {
            // switching to the literal model selects the feasible-fraction grid
            cfg.t_grid = None;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in [ExperimentKind::Fig1, ExperimentKind::Fig2, ExperimentKind::Fig3] {
            ExperimentConfig::defaults(kind).validate().unwrap();
            ExperimentConfig::defaults(kind).quick().validate().unwrap();
        }
        let cfg = ExperimentConfig::defaults(ExperimentKind::Fig2);
        assert_eq!(cfg.r_full(), 10);
        assert_eq!((cfg.m, cfg.n, cfg.r, cfg.trials, cfg.iters), (100, 80, 5, 100, 500));
    }

    #[test]
    fn file_overrides_and_rejections() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "experiment = \"fig2\"\ntrials = 7\np_grid = [0.5, 1.0]\nquick = true\n").unwrap();
        let cfg = ExperimentConfig::from_file(ExperimentKind::Fig2, &p).unwrap();
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.iters, QUICK_ITERS);
        assert_eq!(cfg.p_grid, vec![0.5, 1.0]);

        assert!(matches!(
            ExperimentConfig::from_file(ExperimentKind::Fig1, &p),
            Err(Error::Config(_))
        ));
        std::fs::write(&p, "bogus = 1\n").unwrap();
        assert!(matches!(
            ExperimentConfig::from_file(ExperimentKind::Fig2, &p),
            Err(Error::Config(_))
        ));
        std::fs::write(&p, "negatives = \"reject\"\n").unwrap();
        let cfg = ExperimentConfig::from_file(ExperimentKind::Fig1, &p).unwrap();
        assert!(cfg.t_grid.is_none());
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_grids() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Fig2);
        cfg.p_grid = vec![1.5];
        assert!(cfg.validate().is_err());
        cfg.p_grid.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Fig1);
        cfg.t_grid = Some(vec![]);
        assert!(cfg.validate().is_err());
        cfg.t_grid = None;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Fig3);
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
    }
}
