use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use nmf_subspace::experiment::config::ConfigFile;
use nmf_subspace::experiment::{emit_results, run_fig1, run_fig2, run_fig3, ExperimentConfig, ExperimentKind};
use nmf_subspace::io::{ensure_dir, read_mask, read_matrix_csv, read_toml, write_labels, write_mask, write_matrix_csv, write_toml};
use nmf_subspace::{
    bernoulli_mask, cluster_via_nmf, generate_block_dataset, BlockCompletion, BlockModel, Error, Mask,
    NegativeEntries,
};

#[derive(Parser)]
#[command(name = "nmf-subspace", version, about = "Subspace clustering and block matrix completion via NMF")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config overlaid on the subcommand defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reduced trial count and iteration budget.
    #[arg(long)]
    quick: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Also write per-trial wall times.
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Clustering error against subspace correlation.
    Fig1 {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Comma-separated rotation grid.
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        /// `reject` or `clamp`.
        #[arg(long)]
        negatives: Option<NegativeEntries>,
    },
    /// Basic against block completion over sampling rates.
    Fig2 {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Comma-separated sampling rates.
        #[arg(long, value_delimiter = ',')]
        p_grid: Option<Vec<f64>>,
    },
    /// One completion instance written out as matrices.
    Fig3 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Cluster the rows of a nonnegative CSV matrix; writes labels.csv.
    Cluster {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        /// The input has a header row.
        #[arg(long)]
        header: bool,
    },
    /// Block completion of a partially observed CSV matrix.
    Complete {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        /// Observed entries, one `row,col` per line.
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        header: bool,
        /// Error out instead of falling back when a cluster is too sparse.
        #[arg(long)]
        strict_blocks: bool,
    },
    /// Export a synthetic two-subspace dataset (X.csv, labels.csv, mask.csv, meta.toml).
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
        /// Sampling rate of the exported mask.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        #[arg(long, default_value = "clamp")]
        negatives: NegativeEntries,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Dimension of each block.
    #[arg(long)]
    r: Option<usize>,
    /// Rank of the whole-matrix factorization (defaults to r × k).
    #[arg(long)]
    r_full: Option<usize>,
    /// Number of clusters.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
}

enum Failure {
    Config(String),
    Data(String),
    Infeasible(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parameter(_) => Failure::Config(e.to_string()),
            e if e.is_data_error() => Failure::Data(e.to_string()),
            e => Failure::Other(e.to_string()),
        }
    }
}

impl Failure {
    fn code_and_message(self) -> (u8, String) {
        match self {
            Failure::Config(m) => (2, m),
            Failure::Data(m) => (3, m),
            Failure::Infeasible(m) => (4, m),
            Failure::Other(m) => (1, m),
        }
    }
}

type CliResult = Result<(), Failure>;

fn load(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::defaults(kind);
    if common.quick {
        cfg = cfg.quick();
    }
    if let Some(path) = &common.config {
        let file: ConfigFile = read_toml(path).map_err(|e| Failure::Config(e.to_string()))?;
        file.apply(&mut cfg).map_err(|e| Failure::Config(e.to_string()))?;
    }
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn apply_sweep(cfg: &mut ExperimentConfig, sweep: &SweepArgs) {
    if let Some(t) = sweep.trials {
        cfg.trials = t;
    }
    if let Some(i) = sweep.iters {
        cfg.iters = i;
    }
    cfg.timings |= sweep.timings;
}

fn apply_model(cfg: &mut ExperimentConfig, model: &ModelArgs) {
    if let Some(r) = model.r {
        cfg.r = r;
    }
    if model.r_full.is_some() {
        cfg.r_full = model.r_full;
    }
    if let Some(k) = model.k {
        cfg.k = k;
    }
    if let Some(i) = model.iters {
        cfg.iters = i;
    }
}

fn run_sweep(cfg: &ExperimentConfig) -> CliResult {
    cfg.validate()?;
    let table = match cfg.experiment {
        ExperimentKind::Fig1 => run_fig1(cfg)?,
        _ => run_fig2(cfg)?,
    };
    if table.summaries.is_empty() {
        return Err(Failure::Infeasible(format!(
            "no feasible trial at any of the {} grid points",
            table.infeasible.len()
        )));
    }
    for v in &table.infeasible {
        log::warn!("{}={v}: every trial infeasible", table.grid_name);
    }
    for line in emit_results(&table, &cfg.output_dir)? {
        println!("{line}");
    }
    write_toml(&cfg.output_dir.join("config.toml"), cfg)?;
    Ok(())
}

fn read_input(input: &Path, header: bool) -> Result<nmf_subspace::DataMatrix, Failure> {
    read_matrix_csv(input, header).map_err(|e| Failure::Data(e.to_string()))
}

#[derive(Serialize)]
struct GenerateMeta {
    m: usize,
    n: usize,
    r: usize,
    t: f64,
    alpha: f64,
    p: f64,
    negatives: NegativeEntries,
    permute: bool,
    master_seed: u64,
    observed: usize,
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Fig1 { sweep, t_grid, negatives } => {
            let mut cfg = load(ExperimentKind::Fig1, &sweep.common)?;
            apply_sweep(&mut cfg, &sweep);
            if let Some(n) = negatives {
                cfg.negatives = n;
                if n == NegativeEntries::Reject && t_grid.is_none() {
                    cfg.t_grid = None;
                }
            }
            if t_grid.is_some() {
                cfg.t_grid = t_grid;
            }
            run_sweep(&cfg)
        }
        Command::Fig2 { sweep, p_grid } => {
            let mut cfg = load(ExperimentKind::Fig2, &sweep.common)?;
            apply_sweep(&mut cfg, &sweep);
            if let Some(g) = p_grid {
                cfg.p_grid = g;
            }
            run_sweep(&cfg)
        }
        Command::Fig3 { common, p, iters } => {
            let mut cfg = load(ExperimentKind::Fig3, &common)?;
            if let Some(p) = p {
                cfg.fig3_p = p;
            }
            if let Some(i) = iters {
                cfg.iters = i;
            }
            let s = run_fig3(&cfg)?;
            println!(
                "fig3 p={} seed={} observed={} basic_error={:.4} block_error={:.4} misclassified={} -> {}",
                s.p,
                s.master_seed,
                s.observed,
                s.basic_error,
                s.block_error,
                s.misclassified,
                s.output_dir.display()
            );
            Ok(())
        }
        Command::Cluster {
            common,
            model,
            input,
            header,
        } => {
            let mut cfg = load(ExperimentKind::Custom, &common)?;
            apply_model(&mut cfg, &model);
            let x = read_input(&input, header)?;
            let seed = cfg.master();
            let found = cluster_via_nmf(&x, cfg.r_full(), &cfg.kmeans(seed.child(2)), &cfg.solver(), seed.child(1))?;
            ensure_dir(&cfg.output_dir)?;
            write_labels(&cfg.output_dir.join("labels.csv"), &found.labels)?;
            println!(
                "cluster rows={} k={} sizes={:?} -> {}",
                x.rows(),
                found.k,
                found.cluster_sizes(),
                cfg.output_dir.display()
            );
            Ok(())
        }
        Command::Complete {
            common,
            model,
            input,
            mask,
            header,
            strict_blocks,
        } => {
            let mut cfg = load(ExperimentKind::Custom, &common)?;
            apply_model(&mut cfg, &model);
            let x = read_input(&input, header)?;
            let mask = read_mask(&mask, x.rows(), x.cols()).map_err(|e| Failure::Data(e.to_string()))?;
            let solver = BlockCompletion {
                r_full: cfg.r_full(),
                r_block: cfg.r,
                kmeans: cfg.kmeans(cfg.master()),
                solver: cfg.solver(),
                strict_blocks,
            };
            let report = solver.run(&x, &mask, cfg.master())?;
            report.write_to_dir(&cfg.output_dir)?;
            println!(
                "complete rows={} cols={} observed={} fallback={} -> {}",
                x.rows(),
                x.cols(),
                mask.len(),
                report.used_fallback(),
                cfg.output_dir.display()
            );
            Ok(())
        }
        Command::Generate { common, t, p, negatives } => {
            let cfg = load(ExperimentKind::Custom, &common)?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Failure::Config(format!("p = {p} must lie in [0, 1]")));
            }
            let model = BlockModel {
                m: cfg.m,
                n: cfg.n,
                r: cfg.r,
                t,
                permute: cfg.permute,
                negatives,
            };
            let seed = cfg.master();
            let ds = generate_block_dataset(&model, seed)?;
            let mask = if p == 1.0 {
                Mask::full(ds.x.rows(), ds.x.cols())
            } else {
                bernoulli_mask(ds.x.rows(), ds.x.cols(), p, seed.child(50))?
            };
            let dir = &cfg.output_dir;
            ensure_dir(dir)?;
            write_matrix_csv(&dir.join("X.csv"), &ds.x, false)?;
            write_labels(&dir.join("labels.csv"), &ds.true_labels)?;
            write_mask(&dir.join("mask.csv"), &mask)?;
            write_toml(
                &dir.join("meta.toml"),
                &GenerateMeta {
                    m: cfg.m,
                    n: cfg.n,
                    r: cfg.r,
                    t,
                    alpha: ds.alpha,
                    p,
                    negatives,
                    permute: cfg.permute,
                    master_seed: cfg.master_seed,
                    observed: mask.len(),
                },
            )?;
            println!("generate alpha={:.6} observed={} -> {}", ds.alpha, mask.len(), dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = f.code_and_message();
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(args: &[&str]) -> u8 {
        let mut full = vec!["nmf-subspace"];
        full.extend(args);
        match Cli::try_parse_from(full) {
            Ok(cli) => run(cli).err().map_or(0, |f| f.code_and_message().0),
            Err(e) => e.exit_code() as u8,
        }
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

        std::fs::write(path("bad.toml"), "trials = \"many\"\n").unwrap();
        assert_eq!(code(&["fig2", "--config", &path("bad.toml")]), 2);
        assert_eq!(code(&["fig2", "--config", &path("missing.toml")]), 2);
        assert_eq!(code(&["fig2", "--p-grid", "1.5", "--out", &path("f2")]), 2);
        assert_eq!(code(&["cluster", "--out", &path("c")]), 2);

        assert_eq!(code(&["cluster", "--input", &path("absent.csv"), "--out", &path("c")]), 3);
        std::fs::write(path("neg.csv"), "1,2\n-3,4\n1,1\n2,2\n").unwrap();
        assert_eq!(code(&["cluster", "--input", &path("neg.csv"), "--r", "1", "--out", &path("c")]), 3);
        std::fs::write(path("ragged.csv"), "1,2\n3\n").unwrap();
        assert_eq!(code(&["cluster", "--input", &path("ragged.csv"), "--out", &path("c")]), 3);

        let huge = ["fig1", "--negatives", "reject", "--t-grid", "50", "--trials", "2", "--iters", "5"];
        let mut args = huge.to_vec();
        let out = path("f1");
        args.extend(["--out", &out]);
        assert_eq!(code(&args), 4);
        assert!(!dir.path().join("f1/summary.csv").exists());
    }

    #[test]
    fn generate_then_cluster_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
        assert_eq!(code(&["generate", "--t", "0.3", "--p", "0.7", "--seed", "4", "--out", &path("g")]), 0);
        for f in ["X.csv", "labels.csv", "mask.csv", "meta.toml"] {
            assert!(dir.path().join("g").join(f).is_file(), "{f}");
        }
        let x = path("g/X.csv");
        assert_eq!(code(&["cluster", "--input", &x, "--iters", "200", "--out", &path("c")]), 0);
        let labels = std::fs::read_to_string(dir.path().join("c/labels.csv")).unwrap();
        assert_eq!(labels.lines().count(), 201);
        let mask = path("g/mask.csv");
        assert_eq!(
            code(&["complete", "--input", &x, "--mask", &mask, "--iters", "100", "--out", &path("r")]),
            0
        );
        for f in ["completed.csv", "labels.csv", "report.toml"] {
            assert!(dir.path().join("r").join(f).is_file(), "{f}");
        }
        // a mask that does not fit the matrix is a data error
        std::fs::write(path("wide_mask.csv"), "0,500\n").unwrap();
        assert_eq!(code(&["complete", "--input", &x, "--mask", &path("wide_mask.csv"), "--out", &path("r2")]), 3);
    }
}
