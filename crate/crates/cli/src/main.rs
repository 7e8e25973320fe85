use std::path::PathBuf;
use std::process::ExitCode;

use adiabat_cli::config::{load_model, load_model_config};
use adiabat_cli::spectrum::SpectrumOptions;
use adiabat_cli::{export_report, run_sweep, spectrum_command, SweepConfig};
use adiabat_core::bands::{prepare_band, BandSelector};
use adiabat_core::{sample_model, validate_model};
use anyhow::Context;
use clap::{Parser, Subcommand};

/// Thread count for the ε-parallel sweep; unset means one per core.
const THREADS_ENV: &str = "ADIABAT_THREADS";

#[derive(Parser)]
#[command(
    name = "adiabat",
    version,
    about = "Adiabatic-limit experiments on discretized fibre bundles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check every model invariant and print the diagnostics as JSON.
    Validate { model: PathBuf },
    /// Track and certify an eigenband and print it as JSON.
    Bands {
        model: PathBuf,
        #[arg(long, default_value_t = 1)]
        index: usize,
        #[arg(long, default_value_t = 1)]
        multiplicity: usize,
    },
    /// Run an ε-sweep, write report.json and norms.csv, exit non-zero if a claim fails.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lowest eigenvalues of H, H_a and H_eff at one ε.
    Spectrum {
        model: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 1)]
        index: usize,
        #[arg(long, default_value_t = 1)]
        multiplicity: usize,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Validate { model } => {
            let cfg = load_model_config(&model)?;
            let m = sample_model(&cfg)?;
            let report = validate_model(&m);
            print_json(&report)?;
            for c in report.failures() {
                eprintln!(
                    "FAIL {}: {:e} at {}",
                    c.name,
                    c.worst_violation,
                    c.location.as_deref().unwrap_or("-")
                );
            }
            Ok(report.passed())
        }
        Command::Bands {
            model,
            index,
            multiplicity,
        } => {
            let m = load_model(&model)?;
            let band = prepare_band(
                &m,
                BandSelector {
                    index,
                    multiplicity,
                },
            )?;
            print_json(&band.summary())?;
            Ok(true)
        }
        Command::Sweep { config, out } => {
            let cfg = SweepConfig::load(&config)?;
            let report = run_sweep(&cfg)?;
            let (json, csv) = export_report(&report, &out)?;
            for c in &report.claims {
                let fit = c
                    .fit
                    .map(|f| {
                        format!(
                            "slope {:.3} (R² {:.4}, {} pts)",
                            f.slope, f.r_squared, f.points
                        )
                    })
                    .unwrap_or_else(|| "no fit".into());
                println!(
                    "{:<22} {:?} threshold {:.3e}  {fit}",
                    c.label, c.status, c.threshold
                );
            }
            for f in &report.failures {
                println!("point ε = {:e} failed: {}", f.epsilon, f.message);
            }
            if report.exact_regime {
                println!("exact regime: all norms below the noise floor");
            }
            println!("wrote {} and {}", json.display(), csv.display());
            Ok(report.passed)
        }
        Command::Spectrum {
            model,
            eps,
            count,
            depth,
            index,
            multiplicity,
        } => {
            let m = load_model(&model)?;
            let opts = SpectrumOptions {
                band: BandSelector {
                    index,
                    multiplicity,
                },
                depth,
                cutoff: None,
            };
            let table = spectrum_command(&m, eps, count, opts)?;
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            let fmt = |v: Option<f64>| v.map(|v| format!("{v:.12}")).unwrap_or_else(|| "-".into());
            println!(
                "{:>4} {:>18} {:>18} {:>18} {:>12} {:>12}",
                "k", "H", "H_a", "H_eff", "|H-H_a|", "|H-H_eff|"
            );
            for r in &table.rows {
                let gap =
                    |v: Option<f64>| v.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
                println!(
                    "{:>4} {:>18.12} {:>18} {:>18} {:>12} {:>12}",
                    r.k,
                    r.h,
                    fmt(r.h_a),
                    fmt(r.h_eff),
                    gap(r.dist_h_ha),
                    gap(r.dist_h_heff)
                );
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
