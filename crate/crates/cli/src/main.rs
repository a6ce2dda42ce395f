//! `commlim`: experiments on parameter estimation when each of `n` sensors
//! may write at most `k` bits to a shared blackboard.
//!
//! Every run is described by a single JSON config tagged with a `mode`
//! (`risk`, `scaling`, `verify-protocol-identities`, `verify-geometry`,
//! `oracle`, `bounds`) and produces three artifacts in the output
//! directory: a CSV table, a JSON report (config echo + results), and a
//! manifest tying both to a content hash of the config. Exit codes: 0 on
//! success, 1 when a run finished but a check failed (negative slack,
//! identity violation, missed expectation band) or a runtime error aborted
//! it, 2 for usage or config errors.

mod config;
mod report;
mod run;

use clap::{Args, Parser, Subcommand};
use commlim::bounds::{lower_rate, RateQuery, RateStatement};
use commlim::Error;
use config::Config;
use report::{ArtifactPaths, PlotKind, RunManifest};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "commlim",
    version,
    about = "Estimation under per-sensor bit budgets: Monte Carlo risk, exact \
             information oracles, and geometric bound verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a config file, dispatching on its `mode`
    Run(RunArgs),
    /// Execute an `oracle` config (exact information-chain checks)
    Oracle(RunArgs),
    /// Execute a `verify-geometry` config (bound slack tables)
    VerifyGeometry(RunArgs),
    /// Execute a `verify-protocol-identities` config (transcript factorization)
    VerifyProtocolIdentities(RunArgs),
    /// Execute a `bounds` config, or evaluate one rate from flags
    Bounds(BoundsArgs),
    /// Execute a `scaling` config (axis sweep plus log-risk exponent fit)
    Scaling(RunArgs),
    /// Flatten report JSONs into one tidy (x, y, series, se) CSV
    EmitPlotdata(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config
    config: PathBuf,
    /// Directory for CSV/JSON/manifest artifacts [default: .]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; precedence: this flag, config `threads`,
    /// COMMLIM_THREADS, then 1. Results are identical for any count.
    #[arg(long)]
    threads: Option<usize>,
    /// Replace the config's seed
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BoundsArgs {
    /// JSON `bounds` config; alternative to the one-off flags below
    config: Option<PathBuf>,
    /// Directory for CSV/JSON/manifest artifacts [default: .]
    #[arg(long, requires = "config")]
    out: Option<PathBuf>,
    /// One of: general, sub_gaussian, multinomial, gaussian_location,
    /// bernoulli_cube, bernoulli_simplex, sparse_gaussian
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    theorem: Option<String>,
    /// Number of sensors
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    n: Option<u64>,
    /// Parameter dimension
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    d: Option<u64>,
    /// Bits per sensor
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    k: Option<u32>,
    /// Sparsity (sparse_gaussian only)
    #[arg(long, conflicts_with = "config")]
    s: Option<u64>,
    /// Per-coordinate Fisher information (general only)
    #[arg(long, conflicts_with = "config")]
    i0: Option<f64>,
    /// Noise variance / squared sub-Gaussian norm (Gaussian statements)
    #[arg(long, conflicts_with = "config")]
    sigma2: Option<f64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Report JSON files produced by this tool's run modes
    inputs: Vec<PathBuf>,
    /// Output CSV path
    #[arg(long, default_value = "plotdata.csv")]
    out: PathBuf,
}

/// Which exit code a failure maps to: usage/config problems are 2, failures
/// of a run that was validly configured are 1.
enum Failure {
    Usage(Error),
    Runtime(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e.to_string(),
        }
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e)
}

fn usage_at(path: &str, message: impl Into<String>) -> Failure {
    Failure::Usage(Error::Config {
        path: path.to_string(),
        message: message.into(),
    })
}

fn main() -> ExitCode {
    // Clap itself exits with code 2 on malformed command lines.
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => execute(args, None),
        Command::Oracle(args) => execute(args, Some("oracle")),
        Command::VerifyGeometry(args) => execute(args, Some("verify-geometry")),
        Command::VerifyProtocolIdentities(args) => execute(args, Some("verify-protocol-identities")),
        Command::Scaling(args) => execute(args, Some("scaling")),
        Command::Bounds(args) => bounds_command(args),
        Command::EmitPlotdata(args) => emit_plotdata(args),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// Flag > config key > COMMLIM_THREADS > 1.
fn resolve_threads(flag: Option<usize>, from_config: Option<usize>) -> Result<usize, Failure> {
    let threads = match flag.or(from_config) {
        Some(t) => t,
        None => match std::env::var("COMMLIM_THREADS") {
            Err(_) => 1,
            Ok(raw) => raw.trim().parse::<usize>().map_err(|_| {
                usage_at(
                    "COMMLIM_THREADS",
                    format!("expected a positive integer, got `{raw}`"),
                )
            })?,
        },
    };
    if threads == 0 {
        return Err(usage_at("threads", "thread count must be ≥ 1"));
    }
    Ok(threads)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".to_string())
}

fn execute(args: &RunArgs, required_mode: Option<&str>) -> Result<u64, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| usage_at(&args.config.display().to_string(), format!("cannot read config: {e}")))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| usage_at(&args.config.display().to_string(), format!("invalid JSON: {e}")))?;
    let digest = report::config_digest(&value);
    let mut cfg: Config = serde_json::from_value(value.clone())
        .map_err(|e| usage_at(&args.config.display().to_string(), e.to_string()))?;
    if let Some(required) = required_mode {
        if cfg.mode() != required {
            return Err(usage_at(
                "mode",
                format!(
                    "this subcommand runs `{required}` configs, but the file declares mode `{}` (use `commlim run`)",
                    cfg.mode()
                ),
            ));
        }
    }
    if let Some(seed) = args.seed {
        cfg.override_seed(seed).map_err(usage)?;
    }
    let threads = resolve_threads(args.threads, cfg.threads())?;
    cfg.validate().map_err(usage)?;

    let experiment_id = cfg
        .experiment_id()
        .map(str::to_string)
        .unwrap_or_else(|| file_stem(&args.config));
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| usage_at(&out_dir.display().to_string(), format!("cannot create output directory: {e}")))?;
    let paths = ArtifactPaths::new(&out_dir, &experiment_id);
    let started = report::unix_ms();

    let outcome = match &cfg {
        Config::Risk(c) => run::run_risk(c, threads, &experiment_id),
        Config::Scaling(c) => run::run_scaling(c, threads, &experiment_id),
        Config::VerifyProtocolIdentities(c) => run::run_identities(c),
        Config::VerifyGeometry(c) => run::run_geometry(c),
        Config::Oracle(c) => run::run_oracle(c),
        Config::Bounds(c) => run::run_bounds(c),
    };

    let mut manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        experiment_id: experiment_id.clone(),
        mode: cfg.mode().to_string(),
        config_digest: digest.clone(),
        seed: cfg.seed(),
        threads,
        started_unix_ms: started,
        finished_unix_ms: 0,
        outputs: Vec::new(),
        status: String::new(),
        violations: 0,
        error: None,
    };

    let outcome = match outcome {
        Ok(o) => o,
        Err(e) => {
            // The run aborted: record what happened so partial artifacts
            // are flagged, then fail with the runtime code.
            manifest.finished_unix_ms = report::unix_ms();
            manifest.status = "error".to_string();
            manifest.error = Some(e.to_string());
            let _ = report::write_json(
                &paths.manifest,
                &serde_json::to_value(&manifest).unwrap_or_default(),
            );
            return Err(Failure::Runtime(e));
        }
    };

    let header: Vec<&str> = outcome.csv_header.to_vec();
    report::write_csv(&paths.csv, &header, &outcome.csv_rows).map_err(Failure::Runtime)?;
    let doc = report::report_document(cfg.mode(), &experiment_id, &digest, &value, &outcome.result)
        .map_err(Failure::Runtime)?;
    report::write_json(&paths.json, &doc).map_err(Failure::Runtime)?;

    manifest.finished_unix_ms = report::unix_ms();
    manifest.outputs = paths.names();
    manifest.violations = outcome.violations;
    manifest.status = if outcome.violations == 0 {
        "ok".to_string()
    } else {
        "check-failed".to_string()
    };
    let manifest_value = serde_json::to_value(&manifest).map_err(|e| Failure::Runtime(e.into()))?;
    report::write_json(&paths.manifest, &manifest_value).map_err(Failure::Runtime)?;

    println!(
        "{} `{}`: {} violation(s); artifacts: {}",
        cfg.mode(),
        experiment_id,
        outcome.violations,
        paths
            .names()
            .iter()
            .map(|n| format!("{}/{n}", out_dir.display()))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(outcome.violations)
}

fn parse_statement(s: &str) -> Option<RateStatement> {
    let all = [
        RateStatement::General,
        RateStatement::SubGaussian,
        RateStatement::Multinomial,
        RateStatement::GaussianLocation,
        RateStatement::BernoulliCube,
        RateStatement::BernoulliSimplex,
        RateStatement::SparseGaussian,
    ];
    all.into_iter().find(|r| r.name() == s)
}

/// With a config file the subcommand behaves like `run` restricted to
/// `bounds` mode; with flags it evaluates one rate and prints it.
fn bounds_command(args: &BoundsArgs) -> Result<u64, Failure> {
    match &args.config {
        Some(path) => execute(
            &RunArgs {
                config: path.clone(),
                out: args.out.clone(),
                threads: None,
                seed: None,
            },
            Some("bounds"),
        ),
        None => bounds_from_flags(args),
    }
}

fn bounds_from_flags(args: &BoundsArgs) -> Result<u64, Failure> {
    // Clap guarantees these are present whenever `config` is absent; the
    // fallbacks keep that contract local.
    let theorem = args
        .theorem
        .as_deref()
        .ok_or_else(|| usage_at("--theorem", "required without a config file"))?;
    let statement = parse_statement(theorem).ok_or_else(|| {
        usage_at(
            "--theorem",
            format!(
                "unknown statement `{theorem}`; expected one of general, sub_gaussian, \
                 multinomial, gaussian_location, bernoulli_cube, bernoulli_simplex, \
                 sparse_gaussian"
            ),
        )
    })?;
    let required = |name: &str, v: Option<u64>| {
        v.ok_or_else(|| usage_at(name, "required without a config file"))
    };
    let query = RateQuery {
        statement,
        n: required("--n", args.n)?,
        d: required("--d", args.d)?,
        k: args
            .k
            .ok_or_else(|| usage_at("--k", "required without a config file"))?,
        s: args.s,
        i0: args.i0,
        sigma2: args.sigma2,
    };
    // Bad flag values (k = 0, missing sigma2, ...) are usage errors.
    let result = lower_rate(&query).map_err(usage)?;
    let doc = serde_json::json!({
        "query": query,
        "rate": result.rate,
        "warnings": result.warnings,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&doc).map_err(|e| Failure::Runtime(e.into()))?
    );
    Ok(0)
}

fn emit_plotdata(args: &PlotArgs) -> Result<u64, Failure> {
    let mut kind: Option<PlotKind> = None;
    let mut rows = Vec::new();
    for path in &args.inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage_at(&path.display().to_string(), format!("cannot read report: {e}")))?;
        let doc: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| usage_at(&path.display().to_string(), format!("invalid JSON: {e}")))?;
        let (doc_kind, mut doc_rows) = report::plot_rows(&doc, path).map_err(usage)?;
        match kind {
            None => kind = Some(doc_kind),
            Some(k) if k == doc_kind => {}
            Some(_) => {
                return Err(usage_at(
                    &path.display().to_string(),
                    "mixing risk-curve and slack-table reports in one plot CSV",
                ));
            }
        }
        rows.append(&mut doc_rows);
    }
    let records: Vec<Vec<String>> = rows.iter().map(|r| r.to_record()).collect();
    report::write_csv(&args.out, &report::PLOT_CSV_HEADER, &records).map_err(Failure::Runtime)?;
    println!(
        "wrote {} row(s) from {} report(s) to {}",
        records.len(),
        args.inputs.len(),
        args.out.display()
    );
    Ok(0)
}
