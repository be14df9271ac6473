//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input or I/O failure,
//! 3 verification failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use gsns::io::{load_instance, load_scenario_file, write_trace, TraceLayout};
use gsns::simulation::{run, RunSummary};
use gsns::sns::{sns_velocity, SnsOptions};
use gsns::verify::{verify_rollout, VerifyOptions};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "gsns", version, about = "SNS redundancy resolution with joint and Cartesian box constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full rollout, write the trace CSV and print a summary.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one SNS instance and print the joint velocity, scale and saturations.
    Solve {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Run the rollout and cross-check it against limits and the brute-force oracle.
    Verify {
        #[arg(long)]
        scenario: PathBuf,
        /// Oracle check every N steps (scaled steps are always checked).
        #[arg(long, default_value_t = 100)]
        stride: usize,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn input_error(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: e.to_string(),
    }
}

fn print_summary(s: &RunSummary) {
    println!("steps                         {}", s.steps);
    println!("max joint position violation  {:.3e}", s.max_joint_position_violation);
    println!("max joint velocity violation  {:.3e}", s.max_joint_velocity_violation);
    println!("max cp position violation     {:.3e}", s.max_cp_position_violation);
    println!("max cp velocity violation     {:.3e}", s.max_cp_velocity_violation);
    println!("max iterations                {}", s.max_iterations);
    println!("max error                     {:.3e}", s.max_error);
    println!("max error after 100 ms        {:.3e}", s.max_error_after_transient);
    println!("final error                   {:.3e}", s.final_error);
    println!("scaled steps                  {}", s.scaled_steps);
    match s.last_scaled_time {
        Some(t) => println!("last scaled step at           {t:.3} s"),
        None => println!("last scaled step at           -"),
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { scenario, out } => {
            let (file, scenario) = load_scenario_file(&scenario).map_err(input_error)?;
            let start = Instant::now();
            let rollout = run(&scenario).map_err(input_error)?;
            let elapsed = start.elapsed();
            write_trace(&out, &TraceLayout::for_model(&scenario.model), &rollout.rows)
                .map_err(input_error)?;
            println!("scenario                      {}", file.name);
            print_summary(&rollout.summary);
            println!("runtime                       {:.3} s", elapsed.as_secs_f64());
            println!("trace                         {}", out.display());
            Ok(())
        }
        Command::Solve { instance } => {
            let inst = load_instance(&instance).map_err(input_error)?;
            let res = sns_velocity(&inst.task, &inst.matrix, &inst.bounds, &SnsOptions::default())
                .map_err(input_error)?;
            let qdot: Vec<String> = res.qdot.iter().map(|v| format!("{v:.12}")).collect();
            println!("qdot        [{}]", qdot.join(", "));
            println!("scale       {:.12}", res.scale);
            println!("scaled      {}", res.scaled);
            println!("iterations  {}", res.iterations);
            if res.saturated.is_empty() {
                println!("saturated   -");
            }
            for s in &res.saturated {
                println!("saturated   row {} at {} = {:.12}", s.row, s.side.name(), s.value);
            }
            Ok(())
        }
        Command::Verify { scenario, stride } => {
            let (file, scenario) = load_scenario_file(&scenario).map_err(input_error)?;
            let rollout = run(&scenario).map_err(input_error)?;
            let opts = VerifyOptions {
                stride,
                ..VerifyOptions::default()
            };
            let report = verify_rollout(&scenario, &rollout, &opts).map_err(input_error)?;
            println!("scenario {}", file.name);
            for c in &report.checks {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                println!("{mark} {:<32} {}", c.name, c.detail);
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_VERIFY,
                    message: "verification failed".into(),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
