use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geotransfer_cli::{builtin_fixtures, run, Scenario, Status, TaskReport};

#[derive(Parser)]
#[command(name = "geotransfer", version, about = "Run transfer-rule scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks of a scenario file.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Run the built-in reference scenario.
    Fixtures {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the scenario file itself.
        #[arg(long)]
        dump: bool,
    },
}

fn report(reports: &[TaskReport]) -> ExitCode {
    for r in reports {
        let tag = match r.status {
            Status::Ok => "ok",
            Status::Mismatch => "MISMATCH",
            Status::Error => "ERROR",
        };
        println!("{tag:8} {:36} {}", r.name, r.summary);
    }
    if reports.iter().all(|r| r.status == Status::Ok) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario: path,
            out,
            seed,
            tolerance,
        } => {
            let text = match fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            let mut scenario = match Scenario::parse(&text) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{}:{}:{}: {}", path.display(), e.line, e.column, e.message);
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            if let Some(tol) = tolerance {
                if !(tol.is_finite() && tol > 0.0) {
                    eprintln!("--tolerance must be positive, got {tol}");
                    return ExitCode::from(2);
                }
                scenario.tolerance = tol;
            }
            run(&scenario, &out)
        }
        Command::Fixtures { out, dump } => {
            let scenario = builtin_fixtures();
            if dump {
                let written = fs::create_dir_all(&out).and_then(|_| {
                    let text = serde_json::to_string_pretty(&scenario).expect("scenario serializes");
                    fs::write(out.join("scenario.json"), text + "\n")
                });
                if let Err(e) = written {
                    eprintln!("{}: {e}", out.display());
                    return ExitCode::from(2);
                }
            }
            run(&scenario, &out)
        }
    };
    match result {
        Ok(reports) => report(&reports),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
