use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use iontomo::experiments::{cmd_dist, cmd_ensemble, cmd_povm_dump, cmd_sweep, cmd_validate, ExperimentConfig};
use iontomo::Error;

#[derive(Parser, Debug)]
#[command(name = "iontomo", version, about = "Fuzzy-measurement tomography experiments for trapped-ion qubits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Compare headline numbers against the [check] section; exit 4 on violation.
    #[arg(long)]
    check: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Photon-count distributions and threshold error scan.
    Dist(Common),
    /// Loss statistics over a Haar ensemble.
    Ensemble(Common),
    /// Mean loss of both models along a time or T1 grid.
    Sweep(Common),
    /// Simulated reconstructions against the asymptotic loss distribution.
    Validate(Common),
    /// Single-qubit and register measurement operators.
    PovmDump(Common),
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::CheckViolation(_) => 4,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let common = match &cli.command {
        Command::Dist(c) | Command::Ensemble(c) | Command::Sweep(c) | Command::Validate(c) | Command::PovmDump(c) => c,
    };
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let out = config.out.clone();
    match &cli.command {
        Command::Dist(_) => {
            cmd_dist(&config, &out)?;
        }
        Command::Ensemble(_) => {
            let s = cmd_ensemble(&config, &out, common.check)?;
            println!(
                "{}: mean L = {:.4} ± {:.4} over {} states ({} failed)",
                s.model,
                s.mean_loss,
                s.stderr_loss,
                s.rows.len(),
                s.failures
            );
            if let (Some(m), Some(e)) = (s.mean_infidelity, s.stderr_infidelity) {
                println!("simulated mean 1-F = {m:.4e} ± {e:.2e}");
            }
        }
        Command::Sweep(_) => {
            let r = cmd_sweep(&config, &out, common.check)?;
            for kind in [iontomo::ModelKind::PhotonCount, iontomo::ModelKind::Threshold] {
                let p = r.minimum(kind);
                println!("{kind}: minimum mean L = {:.4} at {} = {}", p.loss(kind), r.axis.name(), p.value);
            }
        }
        Command::Validate(_) => {
            let r = cmd_validate(&config, &out, common.check)?;
            println!(
                "{}: mean 1-F = {:.4e} ± {:.2e} (theory {:.4e}), KS D = {:.4}, p = {:.4}",
                r.model,
                r.empirical_mean(),
                r.empirical_stderr(),
                r.theory_mean,
                r.ks_statistic,
                r.p_value
            );
        }
        Command::PovmDump(_) => {
            cmd_povm_dump(&config, &out)?;
        }
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
