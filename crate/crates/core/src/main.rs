use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ergolab::algebra::Element;
use ergolab::orlicz::OrliczFunction;
use ergolab::scenario::{exit_code, norm_rows, run_scenario, run_suite, seed_from_env, Scenario};
use ergolab::Error;

#[derive(Parser)]
#[command(name = "ergolab", version, about = "Weighted subsequential ergodic averages on tracial matrix algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its results directory.
    Run {
        scenario: PathBuf,
        /// Output directory (default: results/<scenario id>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every scenario in a directory and write suite_summary.csv.
    Suite {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "suite_results")]
        out: PathBuf,
    },
    /// Print norms of an element given as JSON.
    Norms {
        element: PathBuf,
        /// Orlicz function, `p:<r>` or `expm1`; repeatable.
        #[arg(long, default_value = "p:2")]
        phi: Vec<String>,
    },
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code(err) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed = match seed_from_env() {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    match cli.command {
        Command::Run { scenario, out } => {
            let out = match out {
                Some(o) => o,
                None => match Scenario::load(&scenario) {
                    Ok(s) => PathBuf::from("results").join(s.id),
                    Err(e) => return fail(&e),
                },
            };
            match run_scenario(&scenario, &out, seed) {
                Ok(report) => {
                    for p in &report.properties {
                        println!("{:<34} {}  {}", p.property, if p.passed { "pass" } else { "FAIL" }, p.detail);
                    }
                    println!("results in {}", report.dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Suite { dir, jobs, out } => match run_suite(&dir, &out, jobs, seed) {
            Ok(rows) => {
                let failed = rows.iter().filter(|r| r.status != "pass").count();
                println!("{} properties, {failed} failed; summary in {}", rows.len(), out.join("suite_summary.csv").display());
                if failed == 0 {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => fail(&e),
        },
        Command::Norms { element, phi } => {
            let run = || -> ergolab::Result<Vec<(String, f64)>> {
                let x = Element::from_json(&std::fs::read_to_string(&element)?).map_err(|e| match e {
                    Error::Json(j) => Error::Parse(format!("{}: {j}", element.display())),
                    other => other,
                })?;
                let phis = phi.iter().map(|s| OrliczFunction::parse(s)).collect::<ergolab::Result<Vec<_>>>()?;
                norm_rows(&x, &phis)
            };
            match run() {
                Ok(rows) => {
                    for (name, v) in rows {
                        println!("{name},{v}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
