//! Command-line entry point.
//!
//! `nvqr run --config sweep.cfg [overrides]` evaluates a parameter sweep and
//! writes a figure-ready dataset; `nvqr figures --out-dir DIR` regenerates
//! the bundled benchmark datasets with pinned seeds.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime infeasibility
//! (one or more points failed to evaluate).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nvqr::protocols::{Decoder, Engine};
use nvqr::timing::Protocol;
use nvqr_cli::config::{parse_config, OutputFormat};
use nvqr_cli::emit::write_dataset;
use nvqr_cli::figures::generate_figures;
use nvqr_cli::sweep::run_sweep;

#[derive(Parser)]
#[command(name = "nvqr", about = "NV-center quantum-repeater QKD rate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run a parameter sweep described by a config file.
    Run {
        /// Path to the key-value sweep configuration.
        #[arg(long)]
        config: PathBuf,

        /// Override the protocol list (comma separated, e.g. P1,P3).
        #[arg(long)]
        protocol: Option<String>,

        /// Override the engine: dense, pauli or approx-analytic.
        #[arg(long)]
        engine: Option<String>,

        /// Override the decoder: majority, error-detect or best-of-both.
        #[arg(long)]
        decoder: Option<String>,

        /// Override the Monte Carlo sample count.
        #[arg(long)]
        samples: Option<u64>,

        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,

        /// Worker-thread count (default: all cores).
        #[arg(long)]
        workers: Option<usize>,

        /// Output format: csv or json.
        #[arg(long)]
        format: Option<String>,

        /// Output path (default from config; `-` for stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the bundled benchmark datasets with pinned seeds.
    Figures {
        /// Output directory.
        #[arg(long, default_value = "figures")]
        out_dir: PathBuf,

        /// Monte Carlo sample count for sampled datasets.
        #[arg(long, default_value_t = 10_000)]
        samples: u64,

        /// Worker-thread count (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn build_pool(workers: Option<usize>) -> Result<(), String> {
    if let Some(w) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| format!("cannot configure {w} workers: {e}"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Commands::Run {
            config,
            protocol,
            engine,
            decoder,
            samples,
            seed,
            workers,
            format,
            out,
        } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("nvqr: cannot read {}: {e}", config.display());
                    return ExitCode::from(1);
                }
            };
            let mut spec = match parse_config(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("nvqr: {e}");
                    return ExitCode::from(1);
                }
            };
            // Flag overrides beat config-file values.
            if let Some(list) = protocol {
                let mut protocols = Vec::new();
                for s in list.split(',') {
                    match Protocol::parse(s) {
                        Some(p) => protocols.push(p),
                        None => {
                            eprintln!("nvqr: unknown protocol `{s}`");
                            return ExitCode::from(1);
                        }
                    }
                }
                spec.protocols = protocols;
            }
            if let Some(name) = engine {
                match Engine::parse(&name) {
                    Some(e) => spec.engine = e,
                    None => {
                        eprintln!("nvqr: unknown engine `{name}`");
                        return ExitCode::from(1);
                    }
                }
            }
            if let Some(name) = decoder {
                match Decoder::parse(&name) {
                    Some(d) => spec.decoder = d,
                    None => {
                        eprintln!("nvqr: unknown decoder `{name}`");
                        return ExitCode::from(1);
                    }
                }
            }
            if let Some(s) = samples {
                spec.samples = s;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(f) = format {
                spec.format = match f.as_str() {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => {
                        eprintln!("nvqr: unknown format `{other}`");
                        return ExitCode::from(1);
                    }
                };
            }
            if let Some(p) = out {
                spec.out = Some(p);
            }
            if let Err(e) = build_pool(workers.or(spec.workers)) {
                eprintln!("nvqr: {e}");
                return ExitCode::from(1);
            }

            let dataset = run_sweep(&spec);
            if dataset.any_scaled_attempts() {
                eprintln!(
                    "nvqr: note: the scaled N(M,q) branch was used for some waiting times"
                );
            }
            let outcome = match &spec.out {
                Some(path) if path.as_os_str() != "-" => {
                    write_dataset(&dataset, spec.format, path)
                }
                _ => {
                    let text = match spec.format {
                        OutputFormat::Csv => nvqr_cli::emit::emit_csv(&dataset),
                        OutputFormat::Json => nvqr_cli::emit::emit_json(&dataset),
                    };
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = outcome {
                eprintln!("nvqr: {e}");
                return ExitCode::from(2);
            }
            if dataset.any_failures() {
                eprintln!("nvqr: some points failed to evaluate (see messages above)");
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Commands::Figures { out_dir, samples, workers } => {
            if let Err(e) = build_pool(workers) {
                eprintln!("nvqr: {e}");
                return ExitCode::from(1);
            }
            match generate_figures(&out_dir, samples) {
                Ok(files) => {
                    for f in files {
                        eprintln!("nvqr: wrote {f}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("nvqr: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
