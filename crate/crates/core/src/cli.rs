//! Command-line front end: argument parsing, dispatch and table output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use crate::bootstrap::{
    bootstrap_p_value, default_block_length, run_portmanteau_test, BandwidthChoice, BootstrapConfig, TestMeta,
    TestResult, DEFAULT_ALPHA,
};
use crate::curves::{demean, intraday_returns, load_curves, write_curves, Demean, LoadOptions, RowPolicy};
use crate::error::{Error, Result};
use crate::grid::{project_fourier, Grid1D, DEFAULT_BASIS_DIM};
use crate::mc::{
    estimate_norm_table, mc_rejection_rates, reference_norms, DeltaPolicy, Hypothesis, McReport, McSettings, NormRow,
    NormSettings,
};
use crate::seed::{derive_seed, STREAM_DATA};
use crate::simmodels::{ModelGenerator, ModelId, DEFAULT_BURN_IN};

/// Environment variable holding the default number of worker threads.
pub const THREADS_ENV: &str = "LSPORTMANTEAU_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lsportmanteau", version, about = "Portmanteau tests for locally stationary functional time series")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Tsv,
    Json,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Maximal lag H.
    #[arg(long, global = true, default_value_t = 4)]
    pub lags: usize,
    /// Bootstrap replicates K [default: 1000 for `test`, 200 for `mc`].
    #[arg(long, global = true)]
    pub boot: Option<usize>,
    /// Block length m [default: ⌊T^{1/3}⌋].
    #[arg(long, global = true)]
    pub block: Option<usize>,
    /// Centring window: `global`, `auto` (⌊T^{2/3}⌋) or a half-width
    /// [default: global for `test`; per model for `mc`].
    #[arg(long, global = true)]
    pub bandwidth: Option<BandwidthChoice>,
    #[arg(long, global = true, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Relevant thresholds: `D1,D2,..` explicitly, or `W1,W2,..:FILE` to use
    /// `Δ_h = w · mean_h` from a norm table written by `norms`, or
    /// `W1,W2,..:reference` for the built-in table of models A1-A4.
    #[arg(long, global = true)]
    pub delta: Option<String>,
    #[arg(long = "basis-dim", global = true, default_value_t = DEFAULT_BASIS_DIM)]
    pub basis_dim: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Mean removal before testing: `none`, `global` or `local:N`.
    #[arg(long, global = true, default_value = "none")]
    pub demean: Demean,
    /// Worker threads [default: $LSPORTMANTEAU_THREADS, else all cores].
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Tsv)]
    pub out: OutFormat,
    /// Write the result here instead of stdout.
    #[arg(short = 'o', long = "output", global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub model: ModelId,
    /// Series length T.
    #[arg(short = 'T', long = "length")]
    pub series_len: usize,
    /// Number of grid points per simulated curve.
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    #[arg(long = "burn-in", default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test observed curves (one per row) for serial correlation.
    Test {
        file: PathBuf,
        /// Treat rows as intraday prices and test cumulative log returns.
        #[arg(long)]
        returns: bool,
        /// The first line is a header.
        #[arg(long)]
        header: bool,
        /// The first column holds row labels.
        #[arg(long)]
        labels: bool,
        /// Fail on non-numeric rows instead of dropping them.
        #[arg(long)]
        strict: bool,
        /// Exit with status 1 when the null hypothesis is rejected.
        #[arg(long)]
        ci: bool,
    },
    /// Simulate one sample path of a model and write it as curves.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Monte Carlo rejection rates.
    Mc {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
    },
    /// Monte Carlo mean and variance of the lagged product-moment norms.
    Norms {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
    },
}

/// Parsed `--delta` value.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaSpec {
    Explicit(Vec<f64>),
    Weighted { weights: Vec<f64>, source: NormSource },
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormSource {
    Reference,
    File(PathBuf),
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| Error::invalid(format!("invalid number {v:?} in --delta")))
        })
        .collect()
}

impl std::str::FromStr for DeltaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None => Ok(DeltaSpec::Explicit(parse_list(s)?)),
            Some((w, src)) => {
                let source = if src == "reference" {
                    NormSource::Reference
                } else if src.is_empty() {
                    return Err(Error::invalid("--delta W:FILE needs a file name"));
                } else {
                    NormSource::File(PathBuf::from(src))
                };
                Ok(DeltaSpec::Weighted { weights: parse_list(w)?, source })
            }
        }
    }
}

impl DeltaSpec {
    pub fn to_policy(&self, model: Option<ModelId>) -> Result<DeltaPolicy> {
        match self {
            DeltaSpec::Explicit(d) => Ok(DeltaPolicy::Explicit(d.clone())),
            DeltaSpec::Weighted { weights, source } => {
                let norms = match source {
                    NormSource::Reference => {
                        let model = model.ok_or_else(|| Error::invalid("the reference norm table needs --model"))?;
                        reference_norms(model)
                            .ok_or_else(|| Error::invalid(format!("no reference norms for model {model}")))?
                            .to_vec()
                    }
                    NormSource::File(p) => read_norm_table(p)?,
                };
                Ok(DeltaPolicy::Scaled { weights: weights.clone(), norms })
            }
        }
    }
}

/// Reads the `mean` column of a norm table written by the `norms`
/// subcommand, ordered by `lag`.
pub fn read_norm_table(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').from_path(path).map_err(csv_error)?;
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            row: 1,
            column: 0,
            message: format!("norm table has no {name:?} column"),
        })
    };
    let (lag_col, mean_col) = (col("lag")?, col("mean")?);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let cell = |c: usize| {
            rec.get(c).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                row: i + 2,
                column: c + 1,
                message: "not a number".into(),
            })
        };
        rows.push((cell(lag_col)? as usize, cell(mean_col)?));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i + 1) {
        return Err(Error::Parse { row: 0, column: lag_col + 1, message: "lags must be 1, 2, ..".into() });
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

fn csv_error(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { row, column: 0, message: format!("{other:?}") },
    }
}

#[derive(Debug, Serialize)]
struct TestRow {
    hypothesis: Hypothesis,
    weight: Option<f64>,
    delta: Option<f64>,
    lag: usize,
    stat: f64,
    norm: f64,
    p_lag: f64,
    max_stat: f64,
    p_max: f64,
}

#[derive(Debug, Serialize)]
struct TestReport {
    meta: TestMeta,
    dropped_rows: Vec<usize>,
    reject: bool,
    rows: Vec<TestRow>,
}

fn test_rows(res: &TestResult, sets: &[(Option<f64>, Vec<f64>)]) -> Result<Vec<TestRow>> {
    let h_max = res.meta.max_lag;
    let column = |data: &[Vec<f64>], h: usize| data.iter().map(|r| r[h]).collect::<Vec<f64>>();
    let mut rows = Vec::new();
    let max_stats = res.classical.running_max();
    for h in 0..h_max {
        let stat = res.classical.per_lag[h];
        rows.push(TestRow {
            hypothesis: Hypothesis::Classical,
            weight: None,
            delta: None,
            lag: h + 1,
            stat,
            norm: res.classical.per_lag_norm[h],
            p_lag: bootstrap_p_value(stat, &column(&res.boot_norms, h)),
            max_stat: max_stats[h],
            p_max: res.p_classical[h],
        });
    }
    for (weight, thresholds) in sets {
        let stats =
            crate::lagcov::RelevantStats::from_norms(&res.classical.per_lag_norm, thresholds, res.meta.series_len)?;
        let p_max = res.relevant_p_values(thresholds)?;
        let running = stats.running_max();
        for h in 0..h_max {
            rows.push(TestRow {
                hypothesis: Hypothesis::Relevant,
                weight: *weight,
                delta: Some(thresholds[h]),
                lag: h + 1,
                stat: stats.per_lag[h],
                norm: res.classical.per_lag_norm[h],
                p_lag: bootstrap_p_value(stats.per_lag[h], &column(&res.boot_inners, h)),
                max_stat: running[h],
                p_max: p_max[h],
            });
        }
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

fn render_test(report: &TestReport, format: OutFormat) -> Result<String> {
    if format == OutFormat::Json {
        return Ok(serde_json::to_string_pretty(report).expect("serialisable") + "\n");
    }
    let mut s = String::from("hypothesis\tweight\tdelta\th\tstat\tnorm\tp_lag\tmax_stat\tp_max\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{:.8}\t{:.8}\t{:.6}\t{:.8}\t{:.6}",
            hypothesis_name(r.hypothesis),
            opt(r.weight),
            opt(r.delta),
            r.lag,
            r.stat,
            r.norm,
            r.p_lag,
            r.max_stat,
            r.p_max
        );
    }
    Ok(s)
}

fn hypothesis_name(h: Hypothesis) -> &'static str {
    match h {
        Hypothesis::Classical => "classical",
        Hypothesis::Relevant => "relevant",
    }
}

pub fn render_mc(report: &McReport, format: OutFormat) -> String {
    if format == OutFormat::Json {
        return serde_json::to_string_pretty(report).expect("serialisable") + "\n";
    }
    let mut s = String::from("model\tT\tH\tK\tbandwidth\tblock\talpha\treps\thypothesis\tweight\trate\tse\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.2}\t{:.2}",
            report.model,
            report.series_len,
            r.max_lag,
            report.replicates,
            report.bandwidth,
            report.block_len,
            report.alpha,
            report.reps,
            hypothesis_name(r.hypothesis),
            opt(r.weight),
            r.rate,
            r.std_error
        );
    }
    s
}

#[derive(Debug, Serialize)]
struct NormReport<'a> {
    model: ModelId,
    series_len: usize,
    basis_dim: usize,
    reps: usize,
    rows: &'a [NormRow],
}

fn render_norms(report: &NormReport<'_>, format: OutFormat) -> String {
    if format == OutFormat::Json {
        return serde_json::to_string_pretty(report).expect("serialisable") + "\n";
    }
    let mut s = String::from("model\tT\tD\treps\tlag\tmean\tvariance\n");
    for r in report.rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{:.8}\t{:.6e}",
            report.model, report.series_len, report.basis_dim, report.reps, r.lag, r.mean, r.variance
        );
    }
    s
}

fn emit(global: &GlobalArgs, text: &str) -> Result<()> {
    match &global.output {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn bootstrap_config(
    g: &GlobalArgs,
    series_len: usize,
    default_k: usize,
    bandwidth: BandwidthChoice,
) -> Result<BootstrapConfig> {
    let cfg = BootstrapConfig {
        replicates: g.boot.unwrap_or(default_k),
        block_len: g.block.unwrap_or_else(|| default_block_length(series_len)),
        bandwidth: bandwidth.resolve(series_len)?,
        alpha: g.alpha,
        seed: g.seed,
    };
    cfg.validate(series_len)?;
    for w in cfg.block_condition_warnings(series_len) {
        warn!("{w}");
    }
    Ok(cfg)
}

fn cmd_test(
    g: &GlobalArgs,
    file: &Path,
    returns: bool,
    header: bool,
    labels: bool,
    strict: bool,
    ci: bool,
) -> Result<i32> {
    let opts = LoadOptions {
        header,
        labels,
        policy: if strict { RowPolicy::Error } else { RowPolicy::Drop },
        ..Default::default()
    };
    let table = load_curves(file, &opts)?;
    let series = if returns { intraday_returns(&table)? } else { table.to_series()? };
    if g.demean != Demean::None {
        warn!("demeaning ({:?}) departs from the centred-data assumption of the test", g.demean);
    }
    let series = demean(&series, g.demean)?;
    let coef = project_fourier(&series, g.basis_dim)?;
    let cfg = bootstrap_config(g, coef.len(), 1000, g.bandwidth.unwrap_or(BandwidthChoice::Global))?;
    let sets = match &g.delta {
        Some(d) => d.parse::<DeltaSpec>()?.to_policy(None)?.threshold_sets(g.lags)?,
        None => Vec::new(),
    };
    if !sets.is_empty() && cfg.alpha >= 0.5 {
        return Err(Error::invalid("the relevant test requires alpha < 1/2"));
    }
    let res = run_portmanteau_test(&coef, g.lags, &cfg)?;
    let rows = test_rows(&res, &sets)?;
    // In CI mode the decision refers to the last requested hypothesis at H.
    let reject = rows.last().is_some_and(|r| r.p_max < cfg.alpha);
    let report = TestReport { meta: res.meta.clone(), dropped_rows: table.dropped.clone(), reject, rows };
    emit(g, &render_test(&report, g.out)?)?;
    Ok(if ci && reject { EXIT_REJECT } else { EXIT_OK })
}

fn cmd_simulate(g: &GlobalArgs, m: &ModelArgs) -> Result<i32> {
    let generator = ModelGenerator::new(m.model, m.series_len, Grid1D::new(m.grid)?, m.burn_in)?;
    let series = generator.generate(derive_seed(g.seed, STREAM_DATA, 0))?;
    let text = match g.out {
        OutFormat::Json => {
            let rows: Vec<&[f64]> = series.rows().collect();
            serde_json::to_string(&rows).expect("serialisable") + "\n"
        }
        OutFormat::Tsv => {
            let mut buf = Vec::new();
            write_curves(&mut buf, &series, None)?;
            String::from_utf8(buf).expect("ascii output")
        }
    };
    emit(g, &text)?;
    Ok(EXIT_OK)
}

fn cmd_mc(g: &GlobalArgs, m: &ModelArgs, reps: usize) -> Result<i32> {
    let settings = McSettings {
        model: m.model,
        series_len: m.series_len,
        grid_size: m.grid,
        burn_in: m.burn_in,
        basis_dim: g.basis_dim,
        max_lag: g.lags,
        reps,
        replicates: g.boot.unwrap_or(crate::bootstrap::DEFAULT_REPLICATES),
        block_len: g.block,
        bandwidth: g.bandwidth,
        alpha: g.alpha,
        seed: g.seed,
        delta: g.delta.as_deref().map(|d| d.parse::<DeltaSpec>()?.to_policy(Some(m.model))).transpose()?,
    };
    info!("running {reps} repetitions of model {} with T = {}", m.model, m.series_len);
    let report = mc_rejection_rates(&settings)?;
    emit(g, &render_mc(&report, g.out))?;
    Ok(EXIT_OK)
}

fn cmd_norms(g: &GlobalArgs, m: &ModelArgs, reps: usize) -> Result<i32> {
    let settings = NormSettings {
        model: m.model,
        series_len: m.series_len,
        grid_size: m.grid,
        burn_in: m.burn_in,
        basis_dim: g.basis_dim,
        max_lag: g.lags,
        reps,
        seed: g.seed,
    };
    let rows = estimate_norm_table(&settings)?;
    let report = NormReport { model: m.model, series_len: m.series_len, basis_dim: g.basis_dim, reps, rows: &rows };
    emit(g, &render_norms(&report, g.out))?;
    Ok(EXIT_OK)
}

fn worker_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::invalid(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(0),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> Result<i32> {
    let threads = worker_count(cli.global.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let g = &cli.global;
    pool.install(|| match &cli.command {
        Command::Test { file, returns, header, labels, strict, ci } => {
            cmd_test(g, file, *returns, *header, *labels, *strict, *ci)
        }
        Command::Simulate { model } => cmd_simulate(g, model),
        Command::Mc { model, reps } => cmd_mc(g, model, *reps),
        Command::Norms { model, reps } => cmd_norms(g, model, *reps),
    })
}

/// Entry point shared by the binary and the tests.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                EXIT_DATA
            } else {
                EXIT_USAGE
            }
        }
    }
}
