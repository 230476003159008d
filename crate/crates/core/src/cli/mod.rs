//! Command-line front end. `trendsense <command> --help` lists the flags.
//!
//! Settings resolve as defaults, then `--config FILE`, then flags. Exit codes:
//! 0 success, 2 input error, 3 degenerate estimation.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{merge, read_config_file, resolve, RunConfig, ScenarioSource};
pub use output::{Format, Outputs, SCHEMA_VERSION};

use crate::error::{Error, ErrorKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "trendsense", version, about = "DML difference-in-differences with parallel-trends sensitivity analysis")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for fold assignment and simulation draws.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "TRENDSENSE_THREADS")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// JSON config file (or an earlier output file) supplying defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "both")]
    pub format: Format,
}

fn parse_control(s: &str) -> Result<String, String> {
    match s {
        "never" | "never_treated" => Ok("never_treated".into()),
        "notyet" | "not_yet" | "not_yet_treated" => Ok("not_yet_treated".into()),
        _ => Err(format!("unknown control group `{s}` (never|notyet)")),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Long-format panel CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub unit: Option<String>,
    #[arg(long)]
    pub time: Option<String>,
    #[arg(long)]
    pub outcome: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// First-treated-period column (0 or empty = never treated).
    #[arg(long)]
    pub g_col: Option<String>,
    /// Per-row 0/1 treatment column.
    #[arg(long, conflicts_with = "g_col")]
    pub d_col: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct LearnerArgs {
    #[arg(long, value_parser = ["ols", "ridge"])]
    pub learner: Option<String>,
    #[arg(long)]
    pub ridge_lambda: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    /// Isotonic recalibration of the propensity score.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub calibrate: Option<bool>,
    /// In-sample normalized Riesz weights.
    #[arg(long)]
    pub normalized: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
pub struct DesignArgs {
    /// Anticipation periods.
    #[arg(long)]
    pub delta: Option<usize>,
    /// never | notyet
    #[arg(long, value_parser = parse_control)]
    pub control: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct CellArgs {
    /// Cohort of the analysed cell (multi-period panels).
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t_eval: Option<i64>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SensitivityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub cell: CellArgs,
    #[arg(long)]
    pub cf_y: Option<f64>,
    #[arg(long)]
    pub cf_d: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, value_parser = ["pretest", "benchmark"])]
    pub scenario_from: Option<String>,
    /// Multiplier for pre-test scenarios.
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub leave_out: Option<Vec<String>>,
    #[arg(long, allow_hyphen_values = true)]
    pub h0: Option<f64>,
    #[arg(long)]
    pub level: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub cell: CellArgs,
    /// Covariates treated as the omitted confounder.
    #[arg(long, value_delimiter = ',')]
    pub leave_out: Option<Vec<String>>,
}

#[derive(Debug, Args, Serialize)]
pub struct PretestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ContourArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub cell: CellArgs,
    #[arg(long)]
    pub cf_y_max: Option<f64>,
    #[arg(long)]
    pub cf_d_max: Option<f64>,
    #[arg(long)]
    pub n_grid: Option<usize>,
    #[arg(long, value_parser = ["lower", "upper"])]
    pub side: Option<String>,
    /// Contour confidence bounds at this level instead of plain bounds.
    #[arg(long)]
    pub contour_level: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// Also write contour.svg.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub svg: Option<bool>,
}

#[derive(Debug, Args, Serialize)]
pub struct DgpArgs {
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub sigma_eps: Option<f64>,
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long)]
    pub superpop_n: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta_a: Option<f64>,
    /// calibration.json from `trendsense calibrate`.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub dgp: DgpArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub learner: LearnerArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub dgp: DgpArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group-time ATT table (one row for a 2x2 panel).
    Estimate(EstimateArgs),
    /// Bias bounds and robustness values for one cell.
    Sensitivity(SensitivityArgs),
    /// Sensitivity parameters implied by leaving out observed covariates.
    Benchmark(BenchmarkArgs),
    /// Scenario from placebo pre-treatment estimates.
    Pretest(PretestArgs),
    /// Grid of bounds over (cf_y, cf_d).
    Contour(ContourArgs),
    /// Monte Carlo study on the simulation design.
    Simulate(SimulateArgs),
    /// Calibrate confounder loadings to target sensitivity values.
    Calibrate(CalibrateArgs),
}

impl Command {
    fn name_and_flags(&self) -> serde_json::Result<(&'static str, Value)> {
        Ok(match self {
            Command::Estimate(a) => ("estimate", serde_json::to_value(a)?),
            Command::Sensitivity(a) => ("sensitivity", serde_json::to_value(a)?),
            Command::Benchmark(a) => ("benchmark", serde_json::to_value(a)?),
            Command::Pretest(a) => ("pretest", serde_json::to_value(a)?),
            Command::Contour(a) => ("contour", serde_json::to_value(a)?),
            Command::Simulate(a) => ("simulate", serde_json::to_value(a)?),
            Command::Calibrate(a) => ("calibrate", serde_json::to_value(a)?),
        })
    }
}

fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Degenerate => EXIT_DEGENERATE,
        ErrorKind::Input | ErrorKind::Io => EXIT_INPUT,
    }
}

fn report_error(e: &Error) -> i32 {
    let doc = json!({"schema": SCHEMA_VERSION, "error": {"code": e.code(), "message": e.to_string()}});
    eprintln!("{doc}");
    exit_code(e)
}

/// Resolves the effective config from parsed arguments.
pub fn effective_config(cli: &Cli) -> crate::Result<RunConfig> {
    let (name, mut flags) = cli.command.name_and_flags()?;
    if let Value::Object(m) = &mut flags {
        m.insert("command".into(), Value::String(name.into()));
        if let Some(seed) = cli.global.seed {
            m.insert("seed".into(), json!(seed));
        }
    }
    let file = cli.global.config.as_deref().map(read_config_file).transpose()?;
    let cfg = resolve(file, flags)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> crate::Result<RunConfig> {
    let cfg = effective_config(cli)?;
    let mut out = Outputs::new(&cli.global.out, cli.global.format, &cfg)?;
    let run = |out: &mut Outputs| match cli.command {
        Command::Estimate(_) => commands::estimate(&cfg, out),
        Command::Sensitivity(_) => commands::sensitivity(&cfg, out),
        Command::Benchmark(_) => commands::benchmark_cmd(&cfg, out),
        Command::Pretest(_) => commands::pretest(&cfg, out),
        Command::Contour(_) => commands::contour(&cfg, out),
        Command::Simulate(_) => commands::simulate(&cfg, out),
        Command::Calibrate(_) => commands::calibrate(&cfg, out),
    };
    match cli.global.threads {
        Some(t) if t > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            pool.install(|| run(&mut out))?;
        }
        _ => run(&mut out)?,
    }
    for p in out.written() {
        println!("wrote {}", p.display());
    }
    Ok(cfg)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(_) => EXIT_OK,
        Err(e) => report_error(&e),
    }
}
