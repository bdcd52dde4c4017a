//! Batch front end: `select`, `replay`, `whiten-test`, `simulate`, `bench`.

mod ingest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodel::{build_design, fit_anova, standardize, ObservationMatrix};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineResult, WhiteningMode};
use crate::selection::{StabilityOptions, ThresholdMode};
use crate::simulate::{
    run_comparison, summarize, timing_benchmark, write_tidy_csv, write_timing_csv, BenchConfig,
    Method, SimulationConfig,
};
use crate::whitening::{select_whitening, StrategyScore, WhiteningKind};

pub use ingest::{fmt_f64, ingest_csv, read_frequencies, write_frequencies, Dataset, FrequencyTable};

/// Significance level of the whiteness test in `whiten-test`.
pub const ALPHA: f64 = 0.05;

/// Exit status of `whiten-test` when the identity operator is rejected.
pub const EXIT_REJECTED: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "mvsel", version, about = "Whitened Lasso variable selection for one-way multivariate designs")]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full selection pipeline on a CSV file.
    Select {
        #[command(flatten)]
        settings: SelectSettings,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run `select` from the settings recorded in a run.json.
    Replay {
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// ANOVA residuals and whitening scores only; exits with status 1 when
    /// the identity operator is rejected at the 5% level.
    WhitenTest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "H", default_value_t = crate::whitening::DEFAULT_LAGS)]
        lags: usize,
        #[arg(long)]
        scale: bool,
        /// Also write whitening.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulation study comparing raw, AR(1), nonparametric and oracle
    /// whitening.
    Simulate {
        /// Flat JSON of simulation settings; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        resamples: usize,
        #[arg(long = "H", default_value_t = crate::whitening::DEFAULT_LAGS)]
        lags: usize,
    },
    /// Pipeline wall-clock over a grid of q and resample counts.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WhiteningArg {
    Auto,
    Identity,
    Ar1,
    Nonparam,
}

impl From<WhiteningArg> for WhiteningMode {
    fn from(w: WhiteningArg) -> Self {
        match w {
            WhiteningArg::Auto => WhiteningMode::Auto,
            WhiteningArg::Identity => WhiteningMode::Identity,
            WhiteningArg::Ar1 => WhiteningMode::Ar1,
            WhiteningArg::Nonparam => WhiteningMode::Nonparam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdArg {
    One,
    Maxpval,
}

impl From<ThresholdArg> for ThresholdMode {
    fn from(t: ThresholdArg) -> Self {
        match t {
            ThresholdArg::One => ThresholdMode::FixedOne,
            ThresholdArg::Maxpval => ThresholdMode::MaxPvalue,
        }
    }
}

/// Everything that determines the output of `select`, apart from the
/// input bytes and the binary version.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SelectSettings {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub whitening: WhiteningArg,
    /// Autocorrelation lags of the whiteness test.
    #[arg(long = "H", default_value_t = crate::whitening::DEFAULT_LAGS)]
    pub lags: usize,
    #[arg(long, default_value_t = 5000)]
    pub resamples: usize,
    #[arg(long, value_enum, default_value = "one")]
    pub threshold: ThresholdArg,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Divide every centered column by its standard deviation.
    #[arg(long)]
    pub scale: bool,
}

impl SelectSettings {
    fn validate(&self) -> Result<()> {
        if self.lags == 0 {
            return Err(Error::invalid("--H must be positive"));
        }
        if self.resamples == 0 {
            return Err(Error::invalid("--resamples must be positive"));
        }
        if !self.input.is_file() {
            return Err(Error::invalid(format!("input file {} not found", self.input.display())));
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig {
            whitening: self.whitening.into(),
            lags: self.lags,
            threshold: self.threshold.into(),
            ..Default::default()
        }
        .with_seed(self.seed);
        cfg.stability = StabilityOptions {
            n_resamples: self.resamples,
            ..cfg.stability
        };
        cfg
    }
}

/// Process exit status for an error: 2 input, 3 numerical, 4 non-convergence.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::InvalidInput(_)
        | Error::DimensionMismatch { .. }
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => 2,
        Error::NonConvergence { .. } | Error::ResampleFailures { .. } => 4,
        _ => 3,
    }
}

/// Runs a parsed command line and returns its exit status.
pub fn run(cli: Cli) -> Result<i32> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::invalid("--threads must be positive"));
        }
        // Fails only if a global pool already exists (e.g. a second call in
        // the same process); the existing pool is then used.
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            log::debug!("thread pool already initialized");
        }
    }
    match cli.command {
        Command::Select { settings, out } => run_select(&settings, &out).map(|_| 0),
        Command::Replay { run, out } => {
            let record: RunRecord = serde_json::from_slice(&fs::read(&run)?)?;
            if record.version != env!("CARGO_PKG_VERSION") {
                log::warn!("run.json was written by version {}", record.version);
            }
            run_select(&record.settings, &out).map(|_| 0)
        }
        Command::WhitenTest {
            input,
            lags,
            scale,
            out,
        } => run_whiten_test(&input, lags, scale, out.as_deref()),
        Command::Simulate {
            config,
            out,
            resamples,
            lags,
        } => run_simulate(config.as_deref(), &out, resamples, lags).map(|_| 0),
        Command::Bench { config, out } => run_bench(config.as_deref(), &out).map(|_| 0),
    }
}

fn read_json<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => Ok(serde_json::from_slice(&fs::read(p)?)?),
        None => Ok(T::default()),
    }
}

fn load(input: &Path, scale: bool) -> Result<(Dataset, ObservationMatrix)> {
    let data = ingest_csv(input).map_err(|e| e.at("ingest"))?;
    let y = standardize(data.values.view(), scale).map_err(|e| e.at("standardize"))?;
    for &j in &y.constant_columns {
        log::warn!("response {:?} is constant", data.responses[j]);
    }
    Ok((data, y))
}

fn check_lags(lags: usize, q: usize) -> Result<()> {
    if lags == 0 || lags >= q {
        return Err(Error::invalid(format!("--H = {lags} must lie in 1..{q} (number of responses)")));
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_whitening_csv(path: &Path, scores: &[StrategyScore], chosen: WhiteningKind) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["strategy", "statistic", "dof", "pvalue", "phi1", "regularization", "selected"])?;
    for s in scores {
        w.write_record([
            s.kind.name().to_string(),
            fmt_f64(s.test.statistic),
            s.test.dof.to_string(),
            fmt_f64(s.test.pvalue),
            opt(s.phi1),
            opt(s.regularization),
            (s.kind == chosen).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn print_scores(scores: &[StrategyScore], chosen: Option<WhiteningKind>) {
    println!("{:<10} {:>12} {:>8} {:>10}", "strategy", "statistic", "dof", "p-value");
    for s in scores {
        let mark = if Some(s.kind) == chosen { " *" } else { "" };
        println!(
            "{:<10} {:>12.4} {:>8} {:>10.4}{mark}",
            s.kind.name(),
            s.test.statistic,
            s.test.dof,
            s.test.pvalue
        );
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Seeds {
    root: u64,
    cv_folds: u64,
    resamples: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunRecord {
    version: String,
    settings: SelectSettings,
    threads: usize,
    seeds: Seeds,
    n: usize,
    p: usize,
    q: usize,
    levels: Vec<String>,
    whitening: WhiteningKind,
    phi1: Option<f64>,
    regularization: Option<f64>,
    lambda_max: f64,
    lambda_cv: f64,
    cv_index: usize,
    cv_points_evaluated: usize,
    resamples_failed: usize,
    threshold: f64,
    threshold_scores: Vec<crate::selection::ThresholdScore>,
    support_size: usize,
}

/// Runs `select` and writes whitening.csv, frequencies.csv, support.csv and
/// run.json into `out`.
pub fn run_select(settings: &SelectSettings, out: &Path) -> Result<PipelineResult> {
    settings.validate()?;
    fs::create_dir_all(out)?;
    let (data, y) = load(&settings.input, settings.scale)?;
    check_lags(settings.lags, y.q())?;
    let x = build_design(&data.labels)?;
    let cfg = settings.pipeline_config();
    let res = run_pipeline(&y, &x, &cfg)?;

    let chosen = res.whitening.operator.kind();
    write_whitening_csv(&out.join("whitening.csv"), &res.whitening.scores, chosen)?;
    let levels = data.labels.levels().to_vec();
    write_frequencies(
        &out.join("frequencies.csv"),
        &FrequencyTable {
            levels: levels.clone(),
            responses: data.responses.clone(),
            values: res.selection.stability.frequencies.clone(),
        },
    )?;
    let freq = &res.selection.stability.frequencies;
    let mut w = csv::Writer::from_path(out.join("support.csv"))?;
    w.write_record(["level", "response", "frequency"])?;
    for &(c, j) in &res.threshold.support {
        w.write_record([levels[c].as_str(), data.responses[j].as_str(), &fmt_f64(freq[[c, j]])])?;
    }
    w.flush()?;

    let score = res.whitening.scores.iter().find(|s| s.kind == chosen);
    let cv = &res.selection.cv;
    let record = RunRecord {
        version: env!("CARGO_PKG_VERSION").to_string(),
        settings: settings.clone(),
        threads: rayon::current_num_threads(),
        seeds: Seeds {
            root: settings.seed,
            cv_folds: cfg.cv.seed,
            resamples: cfg.stability.seed,
        },
        n: y.n(),
        p: x.p(),
        q: y.q(),
        levels: levels.clone(),
        whitening: chosen,
        phi1: res.whitening.operator.phi1(),
        regularization: score.and_then(|s| s.regularization),
        lambda_max: cv.grid[0],
        lambda_cv: cv.lambda_cv,
        cv_index: cv.index,
        cv_points_evaluated: cv.mean_error.len(),
        resamples_failed: res.selection.stability.n_failed,
        threshold: res.threshold.threshold,
        threshold_scores: res.threshold.scores.clone(),
        support_size: res.threshold.support.len(),
    };
    let mut f = fs::File::create(out.join("run.json"))?;
    serde_json::to_writer_pretty(&mut f, &record)?;
    writeln!(f)?;

    print_scores(&res.whitening.scores, Some(chosen));
    println!("lambda_cv {:.4} (grid point {} of {})", cv.lambda_cv, cv.index + 1, cv.grid.len());
    println!("threshold {:.2}, {} selected", res.threshold.threshold, res.threshold.support.len());
    let mut per_level = vec![0usize; levels.len()];
    for &(c, _) in &res.threshold.support {
        per_level[c] += 1;
    }
    for (l, k) in levels.iter().zip(per_level) {
        println!("  {l}: {k}");
    }
    Ok(res)
}

/// Whitening scores of the ANOVA residuals. Returns [`EXIT_REJECTED`] when
/// the identity operator's pooled p-value is below [`ALPHA`], 0 otherwise.
pub fn run_whiten_test(input: &Path, lags: usize, scale: bool, out: Option<&Path>) -> Result<i32> {
    let (data, y) = load(input, scale)?;
    check_lags(lags, y.q())?;
    let x = build_design(&data.labels)?;
    let (_, resid) = fit_anova(&y, &x).map_err(|e| e.at("anova"))?;
    let (best, scores) = select_whitening(&resid, lags).map_err(|e| e.at("whitening test"))?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_whitening_csv(&dir.join("whitening.csv"), &scores, best.kind())?;
    }
    print_scores(&scores, Some(best.kind()));
    let identity = scores
        .iter()
        .find(|s| s.kind == WhiteningKind::Identity)
        .expect("identity is always scored");
    let rejected = identity.test.pvalue < ALPHA;
    println!(
        "identity {} at alpha = {ALPHA}",
        if rejected { "rejected" } else { "not rejected" }
    );
    Ok(if rejected { EXIT_REJECTED } else { 0 })
}

pub fn run_simulate(config: Option<&Path>, out: &Path, resamples: usize, lags: usize) -> Result<()> {
    let sim: SimulationConfig = read_json(config)?;
    sim.validate()?;
    check_lags(lags, sim.q)?;
    if resamples == 0 {
        return Err(Error::invalid("--resamples must be positive"));
    }
    fs::create_dir_all(out)?;
    let mut pcfg = PipelineConfig {
        lags,
        ..Default::default()
    };
    pcfg.stability.n_resamples = resamples;
    let outcomes = run_comparison(&sim, &Method::ALL, &pcfg)?;
    write_tidy_csv(&outcomes, fs::File::create(out.join("outcomes.csv"))?)?;

    let summary = summarize(&outcomes);
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    w.write_record([
        "method",
        "replicates",
        "auc_mean",
        "auc_sd",
        "auc_median",
        "pvalue_mean",
        "pvalue_sd",
    ])?;
    println!("{:<18} {:>8} {:>8} {:>10}", "method", "auc", "sd", "p-value");
    for s in &summary {
        w.write_record([
            s.method.name().to_string(),
            s.replicates.to_string(),
            fmt_f64(s.auc_mean),
            fmt_f64(s.auc_sd),
            fmt_f64(s.auc_median),
            fmt_f64(s.pvalue_mean),
            fmt_f64(s.pvalue_sd),
        ])?;
        println!(
            "{:<18} {:>8.4} {:>8.4} {:>10.4}",
            s.method.name(),
            s.auc_mean,
            s.auc_sd,
            s.pvalue_mean
        );
    }
    w.flush()?;
    Ok(())
}

pub fn run_bench(config: Option<&Path>, out: &Path) -> Result<()> {
    let cfg: BenchConfig = read_json(config)?;
    if cfg.q_grid.is_empty() || cfg.resample_counts.is_empty() {
        return Err(Error::invalid("empty benchmark grid"));
    }
    fs::create_dir_all(out)?;
    let rows = timing_benchmark(&cfg, &PipelineConfig::default())?;
    write_timing_csv(&rows, fs::File::create(out.join("timing.csv"))?)?;
    for r in &rows {
        println!("q {:>5}  resamples {:>5}  {:>8.3} s  {}", r.q, r.resamples, r.seconds, r.whitening);
    }
    Ok(())
}
