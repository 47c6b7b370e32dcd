use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ultrametriclab_cli::config::config_args;
use ultrametriclab_cli::tables::heat_table;
use ultrametriclab_cli::{run_suite, CliError, Suite, SuiteConfig};

#[derive(Parser)]
#[command(name = "ultrametriclab", version, about = "Verification suites for Vladimirov-Taibleson calculus on p-adic groups")]
struct Cli {
    /// TOML file of flag = value pairs; flags on the command line win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite (also accepted without the `verify` word)
    #[command(args_override_self = true)]
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        config: SuiteConfig,
    },
    /// Heat kernel table as CSV, to stdout or DIR/heat_table.csv
    #[command(args_override_self = true)]
    HeatTable {
        #[command(flatten)]
        config: SuiteConfig,
    },
    /// List the suites
    List,
}

/// `ultrametriclab <suite> ...` becomes `ultrametriclab verify <suite> ...`,
/// and config-file flags are spliced in right after the subcommand so that
/// later command-line flags override them.
fn normalize(mut args: Vec<String>) -> Result<Vec<String>, CliError> {
    if args.get(1).is_some_and(|a| Suite::from_str(a, false).is_ok()) {
        args.insert(1, "verify".into());
    }
    let path = args.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            args.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_owned)
        }
    });
    let Some(path) = path else { return Ok(args) };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    let at = match args.get(1).map(String::as_str) {
        Some("verify") => 3,
        _ => 2,
    };
    let at = at.min(args.len());
    args.splice(at..at, config_args(&text)?);
    Ok(args)
}

fn run() -> Result<bool, CliError> {
    let args = normalize(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    match cli.command {
        Command::Verify { suite, config } => {
            let report = run_suite(suite, &config)?;
            report.print(std::io::stdout().lock())?;
            if let Some(dir) = &config.out {
                report.write_dir(dir)?;
            }
            Ok(report.all_passed())
        }
        Command::HeatTable { config } => {
            let table = heat_table(&config)?;
            match &config.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    std::fs::write(dir.join("heat_table.csv"), table)?;
                }
                None => std::io::stdout().lock().write_all(&table)?,
            }
            Ok(true)
        }
        Command::List => {
            for s in Suite::value_variants() {
                println!("{}", s.name());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
