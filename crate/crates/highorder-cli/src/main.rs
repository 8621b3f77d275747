//! Benchmark CLI: composes problems, methods and diagnostics from a JSON
//! config (optionally layered over a preset), emits per-method traces and a
//! cross-method summary.
//!
//! Exit codes: 0 success, 2 configuration/dataset errors, 3 method or
//! diagnostic failures.

mod config;
mod emit;
mod presets;
mod runner;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{merge_values, BenchmarkConfig, TraceFormat};
use emit::TraceDocument;
use runner::{run_benchmark, RunnerError};

#[derive(Parser)]
#[command(name = "highorder", about = "High-order optimization benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark described by a JSON config, optionally over a preset.
    Run {
        /// JSON config file; `{}` inherits everything from the preset.
        #[arg(long)]
        config: PathBuf,
        /// Preset name providing base settings (see `list-presets`).
        #[arg(long)]
        preset: Option<String>,
        /// Output directory override.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Restrict emitted trace formats.
        #[arg(long, value_enum)]
        format: Option<TraceFormat>,
        /// Enable diagnostics assertions in the exit code.
        #[arg(long)]
        check: bool,
    },
    /// List built-in presets.
    ListPresets,
    /// Replay rate diagnostics on a saved JSON trace.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        fstar: f64,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_METHOD: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            preset,
            out,
            format,
            check,
        } => cmd_run(&config, preset.as_deref(), out, format, check),
        Command::ListPresets => {
            for name in presets::PRESET_NAMES {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Verify { trace, fstar } => cmd_verify(&trace, fstar),
    }
}

fn load_config(path: &Path, preset: Option<&str>) -> Result<BenchmarkConfig, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let overlay: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("invalid config JSON: {e}"))?;
    let merged = match preset {
        Some(name) => {
            let base = presets::preset(name).ok_or_else(|| {
                format!(
                    "unknown preset `{name}` (available: {})",
                    presets::PRESET_NAMES.join(", ")
                )
            })?;
            let mut value = serde_json::to_value(&base).expect("presets serialize");
            merge_values(&mut value, overlay);
            value
        }
        None => overlay,
    };
    serde_json::from_value(merged).map_err(|e| format!("invalid config: {e}"))
}

fn cmd_run(
    config_path: &Path,
    preset: Option<&str>,
    out: Option<PathBuf>,
    format: Option<TraceFormat>,
    check: bool,
) -> ExitCode {
    let mut config = match load_config(config_path, preset) {
        Ok(c) => c,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(dir) = out {
        config.output.dir = dir.display().to_string();
    }
    if let Some(fmt) = format {
        config.output.formats = vec![fmt];
    }

    let outcome = match run_benchmark(&config, check) {
        Ok(outcome) => outcome,
        Err(RunnerError::Config(message)) => {
            eprintln!("error: {message}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let out_dir = PathBuf::from(&config.output.dir);
    if let Err(e) = fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create {}: {e}", out_dir.display());
        return ExitCode::from(EXIT_CONFIG);
    }

    for (label, trace, diagnostics) in &outcome.traces {
        if config.output.formats.contains(&TraceFormat::Csv) {
            let path = out_dir.join(format!("{label}.csv"));
            if let Err(e) = emit::write_csv(trace, outcome.fstar, &path) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        }
        if config.output.formats.contains(&TraceFormat::Json) {
            let document = TraceDocument {
                method: trace.method.clone(),
                label: label.clone(),
                config: config.clone(),
                fstar_hint: outcome.fstar,
                trace: trace.clone(),
                diagnostics: diagnostics.clone(),
            };
            let path = out_dir.join(format!("{label}.json"));
            if let Err(e) = emit::write_json(&document, &path) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    let summary_path = out_dir.join("summary.json");
    match serde_json::to_string_pretty(&outcome.summary) {
        Ok(text) => {
            if let Err(e) = fs::write(&summary_path, text) {
                eprintln!("error: writing {}: {e}", summary_path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        }
        Err(e) => {
            eprintln!("error: serializing summary: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    for m in &outcome.summary.methods {
        let gap = m
            .final_fgap
            .map(|g| format!(" fgap {g:.3e}"))
            .unwrap_or_default();
        println!(
            "{}: {} iters, f {:.12}{gap}, ||grad|| {:.3e}, {:.1} ms{}",
            m.label,
            m.iterations,
            m.final_f,
            m.final_grad_norm,
            m.wall_ms,
            m.error
                .as_ref()
                .map(|e| format!(" [error: {e}]"))
                .unwrap_or_default()
        );
    }
    for failure in &outcome.summary.check_failures {
        eprintln!("check failure: {failure}");
    }

    if outcome.any_method_error {
        ExitCode::from(EXIT_METHOD)
    } else {
        ExitCode::SUCCESS
    }
}

fn cmd_verify(trace_path: &Path, fstar: f64) -> ExitCode {
    let document = match emit::read_json(trace_path) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: cannot load trace {}: {e}", trace_path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match highorder::diagnostics::rate_series(&document.trace, fstar) {
        Ok(diag) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&diag).expect("diagnostics serialize")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_METHOD)
        }
    }
}
