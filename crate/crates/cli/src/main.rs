use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reduced_schwarz_cli::commands::{cmd_bench, cmd_offline, cmd_online, cmd_solution, cmd_spectrum, cmd_vanilla, RunReport};
use reduced_schwarz_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "solver", version, about = "Vanilla and reduced Schwarz experiments on strip decompositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Singular values of S, S̃ and A on one patch
    Spectrum(Common),
    /// Compress every patch map and write the archive
    Offline(Common),
    /// Run the reduced iteration from an archive
    Online(Common),
    /// Run the exact-solve iteration
    Vanilla(Common),
    /// Time offline/online stages against vanilla
    Bench(Common),
    /// Write the global field of the configured method
    Solution(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    archive: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "40,70,100,130")]
    ranks: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long, default_value_t = 3)]
    patch: usize,
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    p.as_deref().ok_or_else(|| CliError::Config(format!("{flag} is required for this command")))
}

fn print_run(label: &str, r: &RunReport) {
    println!(
        "{label}: {} iterations in {:.6} s, final rel_error {:e} (vs global solve {:e})",
        r.result.iterations, r.result.timings.online_seconds, r.final_rel_error, r.final_rel_error_global
    );
    println!(
        "exact local solves: loop {}, history {}, final {}",
        r.result.stats.loop_solves, r.result.stats.history_solves, r.result.stats.final_solves
    );
    for f in &r.files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (Command::Spectrum(a) | Command::Offline(a) | Command::Online(a) | Command::Vanilla(a) | Command::Bench(a) | Command::Solution(a)) = &cli.command;
    let (config, base) = ExperimentConfig::load(&a.config)?;
    let setup = config.validate(Some(&base))?;
    match &cli.command {
        Command::Spectrum(a) => {
            let out = required(&a.out, "--out")?;
            let r = cmd_spectrum(&setup, a.patch, out)?;
            println!("patch {}: {} singular values written to {}", a.patch, r.rows, out.display());
        }
        Command::Offline(a) => {
            let path = required(&a.archive, "--archive")?;
            let r = cmd_offline(&setup, path)?;
            println!("offline: {} maps in {:.6} s, archive {}", r.n_maps, r.seconds, path.display());
        }
        Command::Online(a) => {
            let r = cmd_online(&setup, required(&a.archive, "--archive")?, required(&a.out, "--out")?)?;
            print_run("online", &r);
        }
        Command::Vanilla(a) => {
            let r = cmd_vanilla(&setup, required(&a.out, "--out")?)?;
            print_run("vanilla", &r);
        }
        Command::Bench(a) => {
            let out = required(&a.out, "--out")?;
            let rows = cmd_bench(&setup, &a.ranks, a.repeat, out)?;
            for r in &rows {
                let label = r.k.map_or("vanilla".to_string(), |k| format!("reduced k={k}"));
                println!(
                    "{label}: offline {:.6} s, online {:.6} s, total {:.6} s, rel_error {:e}",
                    r.offline_s,
                    r.online_s,
                    r.total_s(),
                    r.final_rel_error
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Solution(a) => {
            let out = required(&a.out, "--out")?;
            cmd_solution(&setup, out, a.archive.as_deref())?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
