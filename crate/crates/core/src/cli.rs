//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for usage errors and unreadable or malformed
//! input, 2 for numerical failures (unphysical states, non-convergence,
//! dependent angle sets, ...).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{is_physical, DensityMatrix, PHYSICAL_TOL};
use crate::pipeline::{self, io, ExperimentConfig, Mode};
use crate::splitter;
use crate::tomo;
use crate::entangle::MetricReport;

#[derive(Debug, Parser)]
#[command(name = "homtomo", version, about = "Two-photon interference, tomography and entanglement metrics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Experiment configuration (JSON); overrides --preset.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random draw; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Built-in configuration.
    #[arg(long, global = true, value_enum, default_value = "plasmonic")]
    preset: Mode,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expected coincidences against delay; writes hom_dip.csv.
    HomDip {
        /// Coincidences far from zero delay.
        #[arg(long, default_value_t = 1000.0)]
        baseline: f64,
        /// Largest |delay|, fs.
        #[arg(long, default_value_t = 200.0)]
        range: f64,
        /// Delay step, fs.
        #[arg(long, default_value_t = 2.0)]
        step: f64,
    },
    /// Fits the splitter phase to MZI fringes; writes mzi_fit.json.
    MziFit {
        /// Fringe CSV (phi_p2,i_r,i_t); synthesized from the configuration when absent.
        #[arg(long, value_name = "FILE")]
        fringes: Option<PathBuf>,
        /// Samples to synthesize.
        #[arg(long, default_value_t = 64)]
        samples: usize,
        /// Gaussian noise added to synthesized intensities.
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
    },
    /// Reconstructs the state from a counts CSV; writes density.json and tomo.json.
    Tomo {
        #[arg(long, value_name = "FILE")]
        counts: PathBuf,
        /// Angle-set CSV (id,a_qwp1,a_qwp2,a_hwp1); defaults to the built-in nine.
        #[arg(long, value_name = "FILE")]
        angles: Option<PathBuf>,
    },
    /// Synthesizes tomography counts; writes counts.csv, angles.csv and state.json.
    Simulate,
    /// Full chain with bootstrap errors; writes run_report.json.
    EndToEnd,
    /// Entanglement metrics of a density-matrix JSON; writes metrics.json.
    Metrics {
        #[arg(long, value_name = "FILE")]
        density: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command, returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn load_config(global: &Global) -> Result<ExperimentConfig> {
    let mut config = match &global.config {
        Some(path) => io::read_json::<ExperimentConfig>(path)?,
        None => ExperimentConfig::preset(global.preset),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn emit<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = out.join(name);
    io::write_json(&path, value)?;
    Ok(path)
}

fn emit_text(out: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = out.join(name);
    io::write_text(&path, text)?;
    Ok(path)
}

#[derive(Serialize)]
struct MziReport {
    phi: f64,
    residual_rms: f64,
    samples: usize,
}

#[derive(Serialize)]
struct TomoReport<'a> {
    #[serde(flatten)]
    metrics: &'a MetricReport,
    fidelity_at_phase: f64,
    fit: &'a pipeline::FitSummary,
}

fn execute(cli: &Cli) -> Result<()> {
    let out = cli.global.out.as_path();
    match &cli.command {
        Command::HomDip { baseline, range, step } => {
            let config = load_config(&cli.global)?;
            let delays = pipeline::delay_grid(*range, *step)?;
            let profile = pipeline::hom_dip(&config, *baseline, &delays)?;
            let path = emit_text(out, "hom_dip.csv", &io::profile_to_csv(&profile))?;
            println!(
                "tau_c = {:.3} fs, visibility = {:.4} -> {}",
                profile.tau_c,
                profile.observed_visibility().unwrap_or(f64::NAN),
                path.display()
            );
        }
        Command::MziFit { fringes, samples, noise } => {
            let config = load_config(&cli.global)?;
            let data = match fringes {
                Some(path) => io::fringes_from_csv(&io::read_text(path)?, &path.display().to_string())?,
                None => {
                    let data = splitter::synthesize_fringes(&config.splitter, *samples, *noise, config.seed)?;
                    emit_text(out, "fringes.csv", &io::fringes_to_csv(&data))?;
                    data
                }
            };
            let fit = splitter::fit_mzi_phase(&data, config.splitter.rmag, config.splitter.tmag)?;
            let path = emit(
                out,
                "mzi_fit.json",
                &MziReport {
                    phi: fit.phi,
                    residual_rms: fit.residual_rms,
                    samples: data.len(),
                },
            )?;
            println!("phi = {:.6} rad, rms = {:.3e} -> {}", fit.phi, fit.residual_rms, path.display());
        }
        Command::Tomo { counts, angles } => {
            let records = io::counts_from_csv(&io::read_text(counts)?, &counts.display().to_string())?;
            let sets = match angles {
                Some(path) => io::angles_from_csv(&io::read_text(path)?, &path.display().to_string())?,
                None => tomo::table1().to_vec(),
            };
            let opts = tomo::MleOptions {
                seed: cli.global.seed.unwrap_or(0),
                ..tomo::MleOptions::default()
            };
            let result = pipeline::run_tomography(&records, &sets, &opts)?;
            let path = emit(out, "density.json", &result.density_matrix)?;
            emit(
                out,
                "tomo.json",
                &TomoReport {
                    metrics: &result.metrics,
                    fidelity_at_phase: result.fidelity_at_phase,
                    fit: &result.fit,
                },
            )?;
            print_metrics(&result.metrics);
            println!("-> {}", path.display());
        }
        Command::Simulate => {
            let config = load_config(&cli.global)?;
            let records = pipeline::synthesize_counts(&config)?;
            let path = emit_text(out, "counts.csv", &io::counts_to_csv(&records))?;
            emit_text(out, "angles.csv", &io::angles_to_csv(&config.angle_sets))?;
            emit(out, "state.json", &pipeline::prepared_state(&config)?)?;
            let total: u64 = records.iter().map(|r| r.coincidences).sum();
            println!("{} settings, {} coincidences -> {}", records.len(), total, path.display());
        }
        Command::EndToEnd => {
            let config = load_config(&cli.global)?;
            let report = pipeline::end_to_end(&config)?;
            let path = emit(out, "run_report.json", &report)?;
            println!(
                "F = {:.4} ± {:.4}, C_nf = {:.4} ± {:.4}, P = {:.4} -> {}",
                report.fidelity_vs_ideal,
                report.uncertainties.std.fidelity,
                report.c_nf,
                report.uncertainties.std.c_nf,
                report.p,
                path.display()
            );
        }
        Command::Metrics { density } => {
            let rho: DensityMatrix = io::read_json(density)?;
            let report = is_physical(&rho, PHYSICAL_TOL);
            if !report.physical {
                return Err(Error::Unphysical(report.describe()));
            }
            let metrics = MetricReport::of(&rho)?;
            let path = emit(out, "metrics.json", &metrics)?;
            print_metrics(&metrics);
            println!("-> {}", path.display());
        }
    }
    Ok(())
}

fn print_metrics(m: &MetricReport) {
    println!(
        "populations (02, 11, 20) = ({:.4}, {:.4}, {:.4})",
        m.populations[0], m.populations[1], m.populations[2]
    );
    println!(
        "F = {:.4}, P = {:.4}, C = {:.4}, C_nf = {:.4}, phase = {:.3}",
        m.fidelity_vs_ideal, m.p, m.c, m.c_nf, m.phase_estimate
    );
}
