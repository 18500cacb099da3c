use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sis_core::experiment::{emit_figure_data, run_experiment, ExperimentConfig, FigureKind};
use sis_core::pipelines::{run_pipeline, PipelineName, PipelineSpec};
use sis_core::rng::{stream, Purpose};
use sis_core::screening::{itrrs_screen, sis_screen, ItrrsConfig, RidgeLambda};
use sis_core::simgen::{generate, SimulationSpec};
use sis_core::theory::{
    eigen_concentration_check, ks_critical_01, max_spurious_corr, min_model_size_to_cover,
    projection_diag_check, DistributionReport, SpuriousMode,
};
use sis_core::{n_over_log_n, standardize, Dataset, Error};

#[derive(Parser)]
#[command(name = "sis", version, about = "Variable screening and selection for ultrahigh-dimensional linear models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank predictors of a dataset and print the selected indices.
    Screen(ScreenArgs),
    /// Run a screening-plus-selection pipeline on a dataset.
    Fit(FitArgs),
    /// Generate synthetic instances from a simulation spec.
    Simulate(SimulateArgs),
    /// Run a replicated experiment and write its tables.
    Bench(BenchArgs),
    /// Monte Carlo checks of random-matrix facts.
    Theory(TheoryArgs),
}

#[derive(Args)]
struct Common {
    /// Output directory (stdout when omitted, where that makes sense).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScreenMethod {
    Sis,
    Itrrs,
}

#[derive(Args)]
struct ScreenArgs {
    /// Dataset CSV with a `y` column.
    #[arg(long)]
    data: PathBuf,
    /// Number of predictors to keep (default `[n/log n]`).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_enum, default_value = "sis")]
    method: ScreenMethod,
    /// Ridge parameter for ITRRS; omit for the λ = ∞ limit.
    #[arg(long)]
    lambda: Option<f64>,
    /// ITRRS shrink factor.
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV with a `y` column.
    #[arg(long)]
    data: PathBuf,
    /// Pipeline spec as JSON; overrides `--method`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pipeline name, e.g. SIS_SCAD.
    #[arg(long, default_value = "SIS_SCAD")]
    method: String,
    #[arg(long)]
    d: Option<usize>,
    /// Noise level for Dantzig stages (estimated when omitted).
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation spec as JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of instances.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment config as JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoryCheck {
    /// Projection-matrix diagonal against its Beta law.
    Projection,
    /// Extreme eigenvalues of p⁻¹ZZᵀ.
    Eigen,
    /// Maximum spurious correlation.
    Spurious,
    /// SIS model size needed to cover the true model.
    Cover,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(value_enum)]
    check: TheoryCheck,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Number of Monte Carlo draws.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pairwise maximum over at most this many pairs (spurious check only).
    #[arg(long)]
    pairwise_cap: Option<usize>,
    /// Simulation spec JSON (cover check only).
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_json(value: &serde_json::Value, out: Option<&Path>, file: &str) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize") + "\n";
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(file), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn pipeline_name(s: &str) -> CliResult<PipelineName> {
    serde_json::from_value(json!(s)).map_err(|_| CliError::Config(format!("unknown pipeline `{s}`")))
}

fn screen(args: ScreenArgs) -> CliResult<()> {
    let data = Dataset::load_csv(&args.data)?;
    let sd = standardize(&data);
    let d = args.d.unwrap_or_else(|| n_over_log_n(data.n(), 1.0).max(1));
    let result = match args.method {
        ScreenMethod::Sis => sis_screen(&sd, d)?,
        ScreenMethod::Itrrs => {
            let lambda = args.lambda.map_or(RidgeLambda::Infinite, RidgeLambda::Finite);
            itrrs_screen(&sd, &ItrrsConfig { lambda, delta: args.delta, d_final: d })?.result
        }
    };
    let names: Option<Vec<&str>> =
        data.feature_names().map(|f| result.selected.iter().map(|&j| f[j].as_str()).collect());
    write_json(
        &json!({ "d": result.d, "selected": result.selected, "names": names, "order": &result.ranking[..result.d] }),
        args.common.out.as_deref(),
        "screen.json",
    )
}

fn fit(args: FitArgs) -> CliResult<()> {
    let data = Dataset::load_csv(&args.data)?;
    let mut spec: PipelineSpec = match &args.config {
        Some(path) => read_json(path)?,
        None => PipelineSpec::new(pipeline_name(&args.method)?),
    };
    if args.d.is_some() {
        spec.d = args.d;
    }
    if args.sigma.is_some() {
        spec.dantzig.sigma = args.sigma;
    }
    let out = run_pipeline(&data, &spec)?;
    let coefficients: Vec<_> =
        out.final_estimate.support.iter().map(|&j| json!({ "index": j, "beta": out.final_estimate.beta[j] })).collect();
    write_json(
        &json!({
            "method": spec.label(),
            "support": out.final_estimate.support,
            "coefficients": coefficients,
            "screened": out.screened(),
            "stages": out.stage_trace,
            "converged": out.final_estimate.converged,
        }),
        args.common.out.as_deref(),
        "fit.json",
    )
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let mut spec: SimulationSpec = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let dir = args.common.out.ok_or_else(|| CliError::Config("simulate needs --out".into()))?;
    for r in 0..args.reps {
        let inst = generate(&spec, &mut stream(spec.seed, r as u64, Purpose::Instance))?;
        inst.export(&dir, &format!("instance_{r:04}"))?;
    }
    write_json(&serde_json::to_value(spec.resolved()).expect("spec serializes"), Some(&dir), "design.json")
}

fn bench(args: BenchArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.n_reps = reps;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    // `--out` is not written back into the config, so the echoed config
    // does not depend on where the outputs go.
    let dir = args
        .common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Config("bench needs --out or output_dir".into()))?;
    let report = run_experiment(&cfg)?;
    report.write_all(&dir, &cfg)?;
    report.write_summary_csv(std::io::stdout())?;
    Ok(())
}

fn report_json(r: &DistributionReport) -> serde_json::Value {
    json!({
        "reference": r.reference,
        "n_draws": r.n_draws,
        "median": r.median(),
        "mean": r.mean(),
        "ks_statistic": r.ks_statistic,
        "redraws": r.redraws,
    })
}

fn emit(dir: Option<&Path>, name: &str, r: &DistributionReport) -> CliResult<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        emit_figure_data(&r.sample, FigureKind::Sorted, &dir.join(format!("{name}.csv")))?;
        emit_figure_data(&r.sample, FigureKind::Histogram, &dir.join(format!("{name}_hist.csv")))?;
    }
    Ok(())
}

fn theory(args: TheoryArgs) -> CliResult<()> {
    let out = args.common.out.as_deref();
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| CliError::Config(format!("--{flag} is required")));
    let summary = match args.check {
        TheoryCheck::Projection => {
            let (n, p) = (need(args.n, "n")?, need(args.p, "p")?);
            let draws = args.reps.unwrap_or(10_000);
            let r = projection_diag_check(n, p, draws, args.seed)?;
            emit(out, "projection", &r)?;
            let mut s = report_json(&r);
            s["ks_critical_01"] = json!(ks_critical_01(draws));
            s
        }
        TheoryCheck::Eigen => {
            let (n, p) = (need(args.n, "n")?, need(args.p, "p")?);
            let r = eigen_concentration_check(n, p, args.reps.unwrap_or(1000), args.seed)?;
            emit(out, "sqrt_lambda_max", &r.sqrt_lambda_max)?;
            emit(out, "sqrt_lambda_min", &r.sqrt_lambda_min)?;
            json!({
                "sqrt_lambda_max": report_json(&r.sqrt_lambda_max),
                "sqrt_lambda_min": report_json(&r.sqrt_lambda_min),
                "limit_max": r.limit_max,
                "limit_min": r.limit_min,
            })
        }
        TheoryCheck::Spurious => {
            let (n, p) = (need(args.n, "n")?, need(args.p, "p")?);
            let mode = args.pairwise_cap.map_or(SpuriousMode::Designated, |cap| SpuriousMode::Pairwise { cap });
            let r = max_spurious_corr(n, p, args.reps.unwrap_or(500), args.seed, mode)?;
            emit(out, "max_corr", &r)?;
            report_json(&r)
        }
        TheoryCheck::Cover => {
            let path = args.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
            let spec: SimulationSpec = read_json(path)?;
            spec.validate()?;
            let draws = args.reps.unwrap_or(500);
            let sizes: Vec<f64> = (0..draws)
                .map(|r| {
                    let inst = generate(&spec, &mut stream(args.seed, r as u64, Purpose::Instance))?;
                    min_model_size_to_cover(&inst).map(|s| s as f64)
                })
                .collect::<sis_core::Result<_>>()?;
            let mut sorted = sizes.clone();
            sorted.sort_by(f64::total_cmp);
            if let Some(dir) = out {
                fs::create_dir_all(dir)?;
                emit_figure_data(&sorted, FigureKind::Sorted, &dir.join("min_model_size.csv"))?;
                emit_figure_data(&sorted, FigureKind::Histogram, &dir.join("min_model_size_hist.csv"))?;
            }
            let at_most = |k: f64| sorted.partition_point(|&v| v <= k) as f64 / draws as f64;
            json!({
                "n_draws": draws,
                "median": sorted[draws / 2],
                "p_le_50": at_most(50.0),
                "p_le_n_over_log_n": at_most(n_over_log_n(spec.n, 1.0) as f64),
            })
        }
    };
    write_json(&summary, out, "summary.json")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs = match &cli.command {
        Command::Screen(a) => a.common.jobs,
        Command::Fit(a) => a.common.jobs,
        Command::Simulate(a) => a.common.jobs,
        Command::Bench(a) => a.common.jobs,
        Command::Theory(a) => a.common.jobs,
    };
    if let Some(j) = jobs {
        if j == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().expect("thread pool is built once");
    }
    let result = match cli.command {
        Command::Screen(a) => screen(a),
        Command::Fit(a) => fit(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::Theory(a) => theory(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
