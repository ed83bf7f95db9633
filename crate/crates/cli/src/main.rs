use std::path::PathBuf;
use std::process::ExitCode;

use blowup_cli::commands::{cmd_all, cmd_exponents, cmd_lemmas, cmd_run, cmd_verify, judge};
use blowup_cli::config::RunConfig;
use blowup_cli::CliError;
use clap::{Parser, Subcommand};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "blowup", version, about = "Blow-up boundary regime laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario config (TOML); repeat for several scenarios. Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Vec<PathBuf>,
    /// Base output directory; each scenario writes to `<out>/<scenario>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scenarios processed concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Overrides the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Exponent table and admissibility checks.
    Exponents,
    /// Solve, tabulate energies and write run artifacts.
    Run,
    /// Check a finished run.
    Verify,
    /// Stampacchia fixtures and differential-inequality sweeps.
    Lemmas,
    /// All of the above.
    All,
}

fn scenario(command: Command, cfg: &RunConfig, out: Option<&PathBuf>) -> Result<(), CliError> {
    let dir = cfg.output_dir(out.map(|p| p.as_path()));
    match command {
        Command::Exponents => cmd_exponents(cfg, &dir).map(|_| ()),
        Command::Run => cmd_run(cfg, &dir).map(|_| ()),
        Command::Verify => judge(&cmd_verify(cfg, &dir)?),
        Command::Lemmas => {
            if cmd_lemmas(cfg, &dir)?.passed {
                Ok(())
            } else {
                Err(CliError::ChecksFailed(vec!["lemmas".into()]))
            }
        }
        Command::All => cmd_all(cfg, &dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut configs = Vec::new();
    if cli.config.is_empty() {
        configs.push(Ok(RunConfig::default()));
    }
    for path in &cli.config {
        configs.push(RunConfig::load(path));
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let results: Vec<(String, Result<(), CliError>)> = pool.install(|| {
        configs
            .into_par_iter()
            .map(|c| match c {
                Ok(mut cfg) => {
                    if let Some(seed) = cli.seed {
                        cfg.seed = seed;
                    }
                    (cfg.scenario.clone(), scenario(cli.command, &cfg, cli.out.as_ref()))
                }
                Err(e) => ("<config>".into(), Err(e)),
            })
            .collect()
    });
    let mut code = 0;
    for (name, r) in &results {
        match r {
            Ok(()) => eprintln!("[{name}] ok"),
            Err(e) => {
                eprintln!("[{name}] {e}");
                code = code.max(e.exit_code());
            }
        }
    }
    ExitCode::from(code as u8)
}
