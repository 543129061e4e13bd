use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Parser, ValueEnum};

use hamhopf_cli::config::{apply_tolerance_overrides, parse_config, RunConfig};
use hamhopf_cli::run::{config_failure, execute, Outcome, Overrides, Subcommand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "hamhopf", version, about = "Hamiltonian Hopf bifurcation analysis with symmetry")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// JSON run configuration; defaults to the coupled oscillator on [0.9, 1.1].
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the report (<subcommand>.json), CSV output and run metadata.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    /// Tolerance override, name=value. Repeatable.
    #[arg(long = "tol", global = true)]
    tol: Vec<String>,
    /// Worker threads for sweeps (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, clap::Subcommand)]
enum Cmd {
    /// Locate the Hopf point and report frame, coefficients and hypotheses.
    Analyze,
    /// Resonance space, harmonics and equivariance at λ∘.
    Resonance,
    /// Leading-order branch predictions.
    Branches {
        #[arg(long, allow_hyphen_values = true)]
        xi: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
    },
    /// Predict, refine and certify a relative periodic orbit.
    Verify {
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        xi: Option<f64>,
    },
    /// Spectrum and coefficients on a λ-grid.
    Sweep,
    /// Seeded property suites.
    Selftest,
}

fn load(cli: &Cli) -> Result<RunConfig, hamhopf_cli::ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| hamhopf_cli::ConfigError {
                code: "SCHEMA_ERROR".into(),
                errors: vec![hamhopf_cli::config::SchemaError {
                    pointer: String::new(),
                    message: format!("cannot read {}: {e}", p.display()),
                }],
            })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    apply_tolerance_overrides(&mut cfg.tolerances, &cli.tol)?;
    Ok(cfg)
}

fn write_outputs(cli: &Cli, out: &Outcome, started: SystemTime, elapsed_ms: u128) -> anyhow::Result<()> {
    let sub = serde_json::to_value(out.report.subcommand)?;
    let name = sub.as_str().unwrap_or("report");
    let json = out.report.to_json();
    match (cli.format, &out.csv) {
        (Format::Csv, Some(csv)) => print!("{csv}"),
        _ => print!("{json}"),
    }
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join(format!("{name}.json")), &json)?;
        if let Some(csv) = &out.csv {
            fs::write(dir.join(format!("{name}.csv")), csv)?;
        }
        let meta = serde_json::json!({
            "started_unix_ms": started.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0),
            "elapsed_ms": elapsed_ms,
        });
        fs::write(dir.join(format!("{name}.meta.json")), serde_json::to_string_pretty(&meta)? + "\n")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = SystemTime::now();
    let clock = Instant::now();
    let (sub, ov) = match cli.cmd {
        Cmd::Analyze => (Subcommand::Analyze, Overrides::default()),
        Cmd::Resonance => (Subcommand::Resonance, Overrides::default()),
        Cmd::Branches { xi, alpha } => (Subcommand::Branches, Overrides { xi, alpha, ..Default::default() }),
        Cmd::Verify { r, alpha, xi } => (Subcommand::Verify, Overrides { r, alpha, xi, ..Default::default() }),
        Cmd::Sweep => (Subcommand::Sweep, Overrides::default()),
        Cmd::Selftest => (Subcommand::Selftest, Overrides::default()),
    };
    let ov = Overrides { seed: cli.seed, jobs: cli.jobs, ..ov };
    let out = match load(&cli) {
        Ok(cfg) => execute(sub, &cfg, &ov),
        Err(e) => Outcome {
            report: config_failure(sub, &e),
            csv: None,
        },
    };
    if let Err(e) = write_outputs(&cli, &out, started, clock.elapsed().as_millis()) {
        eprintln!("hamhopf: {e:#}");
        return ExitCode::from(1);
    }
    if let Some(err) = &out.report.error {
        eprintln!("hamhopf: {}: {}", err.code, err.message);
    }
    ExitCode::from(out.report.exit_code() as u8)
}
