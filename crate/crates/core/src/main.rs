use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diffext::cli::{
    exit_code, parse_scenario, run_demo, run_scenario, Command, RunOptions, EXIT_PASS, EXIT_SCHEMA,
};

#[derive(Parser)]
#[command(
    name = "diffext",
    version,
    about = "Extend and glue diffeomorphisms of balls in ℝⁿ, with numerical verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Extend a ball diffeomorphism to all of ℝⁿ.
    Extend(Common),
    /// Make a ball diffeomorphism the identity near its center.
    Linearize(Common),
    /// Glue maps between disjoint balls into one diffeomorphism.
    Glue(Common),
    /// Insert an inner map inside a given diffeomorphism.
    Insert(Common),
    /// Run the scenario's checks on a named map.
    Verify(Common),
    /// Run the shipped worked examples.
    Demo(DemoArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    figure: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DemoArgs {
    /// Directory for one report per example.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn init_threads() {
    if let Some(n) = std::env::var("DIFFEXT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // failure only means a pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn run(command: Command, args: Common) -> u8 {
    let text = match std::fs::read(&args.scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.scenario.display());
            return EXIT_SCHEMA;
        }
    };
    let scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if scenario.command != command {
        eprintln!(
            "error: command: scenario is for `{}`, not `{}`",
            scenario.command.name(),
            command.name()
        );
        return EXIT_SCHEMA;
    }
    let opts = RunOptions {
        report: args.report,
        grid: args.grid,
        figure: args.figure,
        seed: args.seed,
    };
    match run_scenario(&scenario, &opts) {
        Ok(out) => {
            for c in &out.report.checks {
                let name = c.spec.name.as_deref().unwrap_or("check");
                let status = if c.passed { "pass" } else { "FAIL" };
                println!(
                    "{status}  {name:<28} worst {:.3e} (tol {:.1e}, {} samples)",
                    c.worst_value, c.spec.tol, c.samples_used
                );
                if let Some(e) = &c.error {
                    println!("      {e}");
                }
            }
            if let Some(e) = &out.report.pipeline_error {
                eprintln!("error: {e}");
            }
            for p in &out.written {
                println!("wrote {}", p.display());
            }
            out.exit
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let code = match cli.command {
        Sub::Extend(a) => run(Command::Extend, a),
        Sub::Linearize(a) => run(Command::Linearize, a),
        Sub::Glue(a) => run(Command::Glue, a),
        Sub::Insert(a) => run(Command::Insert, a),
        Sub::Verify(a) => run(Command::Verify, a),
        Sub::Demo(a) => match run_demo(a.report.as_deref(), a.seed) {
            Ok(entries) => {
                let mut worst = EXIT_PASS;
                for e in &entries {
                    println!(
                        "{}  {}",
                        if e.exit == EXIT_PASS { "pass" } else { "FAIL" },
                        e.name
                    );
                    worst = worst.max(e.exit);
                }
                worst
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
    };
    ExitCode::from(code)
}
