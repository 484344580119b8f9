use std::path::PathBuf;
use std::process::ExitCode;

use aqedc_cli::{run, with_threads, Experiment, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aqedc",
    version,
    about = "MPS code experiments: spectra, scaling scans, certificates and noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat JSON config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, env = "AQEDC_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Spectra and Jordan structure of magnon transfer matrices.
    Spectrum(Common),
    /// Decay of magnon matrix elements with ring size.
    MagnonScan(Common),
    /// Gauge residuals and norm law of excitation families.
    ExcitationScan(Common),
    /// Boundary-overlap decay and refutations for injective MPS.
    Nogo(Common),
    /// Knill–Laflamme deviation and (ε, δ) certificates for magnon codes.
    Certify(Common),
    /// Analytic and Monte-Carlo detection under Pauli noise.
    NoiseSim(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Spectrum(c) => (Experiment::Spectrum, c),
        Command::MagnonScan(c) => (Experiment::MagnonScan, c),
        Command::ExcitationScan(c) => (Experiment::ExcitationScan, c),
        Command::Nogo(c) => (Experiment::Nogo, c),
        Command::Certify(c) => (Experiment::Certify, c),
        Command::NoiseSim(c) => (Experiment::NoiseSim, c),
    };
    let outcome = ExperimentConfig::load(&common.config).and_then(|mut cfg| {
        if let Some(seed) = common.seed {
            cfg.seed = Some(seed);
        }
        with_threads(common.threads, || run(experiment, &cfg, &common.out))?
    });
    match outcome {
        Ok(o) => {
            eprintln!("wrote {} and {}", o.csv.display(), o.manifest_path.display());
            if o.ok() {
                ExitCode::SUCCESS
            } else {
                for v in &o.manifest.violations {
                    eprintln!("violation: {v}");
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
