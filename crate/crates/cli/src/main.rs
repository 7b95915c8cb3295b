use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use dsdm_core::scenario::{actuator_ini, parse_scenario_with_warnings};
use dsdm_core::trace::write_csv;
use dsdm_core::verify::{self, Subject};
use dsdm_core::params::{
    TABLE_HF_INERTIA, TABLE_HS_INERTIA, TABLE_R1, TABLE_R2, TABLE_REFLECTED_RATIO,
};
use dsdm_core::{run_scenario, ActuatorParams, FittedInertias, ValidationError};

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_SIM: u8 = 3;
const EXIT_VERIFY: u8 = 4;

/// Dual-speed dual-motor actuator simulator.
#[derive(Parser)]
#[command(name = "dsdm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace as CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Step size, s. Overrides the scenario file.
        #[arg(long)]
        dt: Option<f64>,
        /// Simulated time, s. Overrides the scenario file.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Check the model against independent oracles on random instances.
    Verify {
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = verify::DEFAULT_CASES)]
        cases: usize,
    },
    /// Print the fitted default parameter file.
    FitParams,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            dt,
            duration,
        } => simulate(&scenario, &out, dt, duration),
        Command::Verify { seed, cases } => run_verify(seed, cases),
        Command::FitParams => fit_params(),
    }
}

fn simulate(
    scenario: &PathBuf,
    out: &PathBuf,
    dt: Option<f64>,
    duration: Option<f64>,
) -> ExitCode {
    let text = match fs::read_to_string(scenario) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("error: cannot read {}: {err}", scenario.display());
            return ExitCode::from(EXIT_PARSE);
        }
    };
    let (mut spec, warnings) = match parse_scenario_with_warnings(&text) {
        Ok(parsed) => parsed,
        Err(err) => {
            eprintln!("error: {}: {err}", scenario.display());
            return ExitCode::from(EXIT_PARSE);
        }
    };
    for warning in &warnings {
        eprintln!("warning: {}: {warning}", scenario.display());
    }
    if let Some(dt) = dt {
        spec.sim.dt = dt;
    }
    if let Some(duration) = duration {
        spec.sim.duration = duration;
    }
    let checked = spec.sim.validate().and_then(|()| {
        if spec.sim.duration > 0.0 {
            Ok(())
        } else {
            Err(ValidationError::new(&["duration"], "must be strictly positive"))
        }
    });
    if let Err(err) = checked {
        eprintln!("error: {err}");
        return ExitCode::from(EXIT_PARSE);
    }

    let output = match run_scenario(&spec.actuator, &spec.load, &spec.controller, &spec.sim) {
        Ok(output) => output,
        Err(err) => {
            eprintln!("error: simulation failed: {err}");
            return ExitCode::from(EXIT_SIM);
        }
    };

    let written = File::create(out).and_then(|file| write_csv(&output.trace, BufWriter::new(file)));
    if let Err(err) = written {
        eprintln!("error: cannot write {}: {err}", out.display());
        return ExitCode::from(EXIT_SIM);
    }

    let m = &output.metrics;
    if !spec.name.is_empty() {
        println!("scenario: {}", spec.name);
    }
    match m.shift_latency {
        Some(latency) => println!("shift_latency_ms: {:.1}", latency * 1e3),
        None => println!("shift_latency_ms: none"),
    }
    println!("w_o_dip_rad_s: {:.4}", m.w_o_dip);
    println!("peak_output_torque_nm: {:.3}", m.peak_output_torque);
    println!("time_in_sync_ms: {:.1}", m.time_in_sync * 1e3);
    println!("contact_events: {}", output.contacts.len());
    println!("rows: {}", output.trace.len());
    ExitCode::SUCCESS
}

fn run_verify(seed: u64, cases: usize) -> ExitCode {
    let report = verify::run_all(&Subject::default(), seed, cases);
    print!("{report}");
    if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VERIFY)
    }
}

fn fit_params() -> ExitCode {
    let fit = match FittedInertias::solve(
        TABLE_R1,
        TABLE_R2,
        TABLE_HS_INERTIA,
        TABLE_HF_INERTIA,
        TABLE_REFLECTED_RATIO,
    ) {
        Ok(fit) => fit,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_PARSE);
        }
    };
    let p = ActuatorParams {
        i_o: fit.i_o,
        i_1: fit.i_1,
        i_2: fit.i_2,
        ..ActuatorParams::prototype()
    };
    println!("# Inertias fitted to the prototype's per-mode reflected inertias.");
    println!("# I_o + R1^2 I_1 = {:.6}", p.hs_output_inertia());
    println!("# I_o + R2^2 I_2 = {:.6}", p.hf_output_inertia());
    println!(
        "# R2^2 I_2 / (R1^2 I_1) = {:.3}",
        p.m2_reflected_inertia() / p.m1_reflected_inertia()
    );
    print!("{}", actuator_ini(&p));
    ExitCode::SUCCESS
}
