//! Command-line front end: run catalogued scenarios, print the
//! residual/verdict report, and optionally write it as JSON.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mixcurv::identities::SignVariant;
use mixcurv::{catalog, runner, RunConfig};

#[derive(Parser)]
#[command(
    name = "mixcurv",
    version,
    about = "Verify divergence and curvature identities of almost-product metric \
             splittings on catalogued chart scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and report identity residuals, verdicts, and fact checks
    Verify(VerifyArgs),
    /// List the available scenarios
    Scenarios {
        /// Emit a JSON array of {name, description}
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct VerifyArgs {
    /// Scenario to run (repeatable); the whole catalog when omitted
    #[arg(long = "scenario", value_name = "NAME", conflicts_with = "all")]
    scenario: Vec<String>,
    /// Run every scenario in the catalog
    #[arg(long)]
    all: bool,
    /// Grid nodes per chart axis for the identity sweep
    #[arg(long, default_value_t = 33, value_name = "N")]
    grid: usize,
    /// Max |residual| an evaluated identity may reach and still pass
    #[arg(long, default_value_t = 1e-8, value_name = "X")]
    tol: f64,
    /// Hypothesis gate threshold for the specialized identities
    #[arg(long = "gate-tol", default_value_t = 1e-8, value_name = "X")]
    gate_tol: f64,
    /// Seeded random interior points added to each sweep
    #[arg(long, default_value_t = 100, value_name = "K")]
    points: usize,
    /// Seed for the random evaluation points
    #[arg(long, default_value_t = 42, value_name = "S")]
    seed: u64,
    /// Write the full JSON report to this path
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Sign of the squared horizontal mean-curvature term in the total
    /// divergence identity; auto lets the calibration probes decide
    #[arg(long = "xi-h-sign", value_enum, default_value_t = SignArg::Auto)]
    xi_h_sign: SignArg,
    /// Directory of extra scenario JSON files; same-name files replace
    /// catalog entries
    #[arg(long = "scenario-dir", value_name = "PATH")]
    scenario_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Auto,
    Plus,
    Minus,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Scenarios { json } => cmd_scenarios(json),
    };
    std::process::exit(code);
}

fn cmd_scenarios(json: bool) -> i32 {
    match catalog::all_builtin() {
        Ok(list) => {
            if json {
                let arr: Vec<_> = list
                    .iter()
                    .map(|s| {
                        serde_json::json!({
                            "name": s.name(),
                            "description": s.spec.description,
                        })
                    })
                    .collect();
                println!(
                    "{}",
                    serde_json::to_string_pretty(&arr).expect("listing serializes")
                );
            } else {
                for s in &list {
                    println!("{:<28} {}", s.name(), s.spec.description);
                }
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn cmd_verify(args: VerifyArgs) -> i32 {
    let config = RunConfig {
        scenario_names: if args.all || args.scenario.is_empty() {
            None
        } else {
            Some(args.scenario)
        },
        grid_n: args.grid,
        tol: args.tol,
        gate_tol: args.gate_tol,
        points: args.points,
        seed: args.seed,
        forced_sign: match args.xi_h_sign {
            SignArg::Auto => None,
            SignArg::Plus => Some(SignVariant::Plus),
            SignArg::Minus => Some(SignVariant::Minus),
        },
        scenario_dir: args.scenario_dir,
    };
    match runner::run(&config) {
        Ok(report) => {
            if let Some(path) = &args.json {
                if let Err(e) = std::fs::write(path, report.to_json()) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return 2;
                }
            }
            print!("{}", report.render_text());
            if report.overall_pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
