//! `abkit` - batch front end for the phase-shift toolkit.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numeric or verification
//! failure, 4 unwritable output.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use abkit_cli::config::{ExperimentKind, OutputFormat, RunConfig};
use abkit_cli::exit_codes;
use abkit_cli::{emit, runner};

#[derive(Parser)]
#[command(name = "abkit", version, about = "Phase-shift experiments: solenoid and capacitor models, sweeps, verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rotating-shell solenoid experiment.
    Magnetic(RunArgs),
    /// Charged-capacitor experiment (fixed or free plates).
    Electric(RunArgs),
    /// Interference-visibility budget.
    Visibility(RunArgs),
    /// Run the identity verification suite.
    Verify(RunArgs),
    /// Sweep one solenoid parameter.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output file (defaults to the config's [output] path, else stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json (overrides the config).
    #[arg(long)]
    format: Option<String>,
    /// Write a line chart of sweep results to this path.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Electric experiment variant: fixed or free (overrides the config).
    #[arg(long)]
    scenario: Option<String>,
}

fn expected_kind(command: &Command) -> ExperimentKind {
    match command {
        Command::Magnetic(_) => ExperimentKind::Magnetic,
        Command::Electric(_) => ExperimentKind::Electric,
        Command::Visibility(_) => ExperimentKind::Visibility,
        Command::Verify(_) => ExperimentKind::Verify,
        Command::Sweep(_) => ExperimentKind::Sweep,
    }
}

fn fail(code: i32, message: String) -> ExitCode {
    eprintln!("abkit: {message}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = expected_kind(&cli.command);
    let args = match cli.command {
        Command::Magnetic(a)
        | Command::Electric(a)
        | Command::Visibility(a)
        | Command::Verify(a)
        | Command::Sweep(a) => a,
    };

    let text = match std::fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(e) => return fail(exit_codes::CONFIG, format!("cannot read {}: {e}", args.config.display())),
    };
    let mut config = match RunConfig::parse(&text) {
        Ok(config) => config,
        Err(e) => return fail(exit_codes::CONFIG, e.to_string()),
    };
    if config.kind != kind {
        return fail(
            exit_codes::CONFIG,
            format!(
                "config declares kind = {}, but the `{}` subcommand was invoked",
                config.kind.name(),
                kind.name()
            ),
        );
    }

    // environment override of the quadrature tolerance
    if let Ok(raw) = std::env::var("ABKIT_TOL") {
        match raw.parse::<f64>() {
            Ok(tol) if tol > 0.0 => config.quad_tol = tol,
            _ => return fail(exit_codes::CONFIG, format!("ABKIT_TOL=`{raw}` is not a positive number")),
        }
    }

    if let Some(scenario) = &args.scenario {
        if kind != ExperimentKind::Electric {
            return fail(exit_codes::CONFIG, "--scenario only applies to the electric experiment".into());
        }
        match scenario.as_str() {
            "fixed" => {
                config.strings.insert("scenario".into(), "fixed".into());
            }
            "free" => {
                if !config.params.contains_key("v0") {
                    return fail(exit_codes::CONFIG, "free scenario needs `v0` in the config".into());
                }
                config.strings.insert("scenario".into(), "free".into());
            }
            other => return fail(exit_codes::CONFIG, format!("unknown scenario `{other}`")),
        }
    }

    // CLI flags override the config's [output] section
    if let Some(format) = &args.format {
        config.output_format = Some(match format.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => return fail(exit_codes::CONFIG, format!("unknown format `{other}`")),
        });
    }
    let out_path = args
        .out
        .clone()
        .or_else(|| config.output_path.as_ref().map(PathBuf::from));

    // verify prints its per-check report regardless of the outcome
    let report = if config.kind == ExperimentKind::Verify {
        let checks = runner::verify_checks(config.quad_tol);
        for check in &checks {
            let status = if check.passed { "PASS" } else { "FAIL" };
            println!("check {:<28} {status} - {}", check.name, check.detail);
        }
        if let Some(failed) = checks.iter().find(|c| !c.passed) {
            return fail(
                exit_codes::NUMERIC,
                format!("verification check `{}` failed", failed.name),
            );
        }
        runner::report_from_checks(&checks)
    } else {
        match runner::run(&config) {
            Ok(report) => report,
            Err(e) => return fail(exit_codes::NUMERIC, e.to_string()),
        }
    };

    let format = config.output_format.unwrap_or(OutputFormat::Csv);
    let rendered = match format {
        OutputFormat::Csv => emit::to_csv(&report),
        OutputFormat::Json => emit::to_json(&report),
    };

    match &out_path {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered) {
                return fail(exit_codes::IO, format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{rendered}"),
    }

    if let Some(svg_path) = &args.svg {
        match emit::to_svg(&report) {
            Some(svg) => {
                if let Err(e) = std::fs::write(svg_path, svg) {
                    return fail(exit_codes::IO, format!("cannot write {}: {e}", svg_path.display()));
                }
            }
            None => {
                return fail(
                    exit_codes::CONFIG,
                    "svg output needs sweep results (use the sweep experiment)".into(),
                )
            }
        }
    }

    ExitCode::from(exit_codes::OK as u8)
}
