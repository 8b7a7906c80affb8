//! Command-line front end: `generate`, `verify`, `evolve`, `compare` and
//! `gauge`.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for
//! usage or configuration errors, 3 when the result is inconclusive
//! because too much of the box is masked.

mod commands;
mod config;
mod store;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    build_scenario, compare, dynamics_inputs, evolve, gauge, generate, verify, DynamicsInputs, EvolutionHeader,
    BUDGET_FLOOR, EVOLUTION_FORMAT, GAUGE_MOTION_TOL,
};
pub use config::{
    apply_overrides, Case, Directive, DynamicsConfig, GaugeConfig, ModesConfig, NamedShift, ParticleEntry,
    ParticleSpec, PhaseSpec, RandomParticles, ScenarioConfig, ShiftConstant, ShiftSamples, ShiftSpec,
    ToleranceOverrides,
};
pub use store::{Calibration, ScenarioHeader, StoredScenario, SCENARIO_FORMAT};

use crate::verify::{Status, VerificationReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "semiclassical", version, about = "Build, verify and evolve semiclassical potential scenarios")]
struct Cli {
    /// Suppress the report table on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    /// Set a config value by dotted path, e.g. `dynamics.dt=0.0005`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a scenario from a JSON config and write it to a directory.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the residual checks of a stored scenario.
    Verify {
        scenario: PathBuf,
        /// Report path (default: <scenario>/report.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolve the scenario wave function with Crank-Nicolson.
    Evolve {
        scenario: PathBuf,
        /// Output directory (default: <scenario>/evolution).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate classical and Bohmian paths and compare them.
    Compare {
        scenario: PathBuf,
        /// Evolution directory (default: <scenario>/evolution).
        #[arg(long)]
        evolution: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add `δ x` to the classical potential (negative control).
        #[arg(long, value_name = "DELTA", allow_negative_numbers = true)]
        perturb: Option<f64>,
    },
    /// Apply an energy shift f(t) and check that the motion is unchanged.
    Gauge {
        scenario: PathBuf,
        #[command(flatten)]
        shift: ShiftArgs,
        /// Output directory (default: <scenario>/gauge).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct ShiftArgs {
    /// Constant shift f.
    #[arg(long, allow_negative_numbers = true)]
    constant: Option<f64>,
    /// f = K(t).
    #[arg(long)]
    add_quantum_potential: bool,
    /// f = -K(t).
    #[arg(long)]
    remove_quantum_potential: bool,
    /// JSON file with `times` and `f` samples.
    #[arg(long, value_name = "FILE")]
    samples: Option<PathBuf>,
}

impl ShiftArgs {
    fn spec(&self) -> crate::Result<Option<ShiftSpec>> {
        Ok(if let Some(c) = self.constant {
            if !c.is_finite() {
                return Err(crate::Error::InvalidArgument("--constant must be finite".into()));
            }
            Some(ShiftSpec::Constant(ShiftConstant { constant: c }))
        } else if self.add_quantum_potential {
            Some(ShiftSpec::Named(NamedShift::AddQuantumPotential))
        } else if self.remove_quantum_potential {
            Some(ShiftSpec::Named(NamedShift::RemoveQuantumPotential))
        } else if let Some(path) = &self.samples {
            Some(commands::read_shift_samples(path)?)
        } else {
            None
        })
    }
}

fn dispatch(cli: &Cli) -> crate::Result<VerificationReport> {
    let o = &cli.overrides;
    match &cli.command {
        Command::Generate { config, out } => generate(&ScenarioConfig::load(config, o)?, out),
        Command::Verify { scenario, out } => verify(scenario, o, out.as_deref()),
        Command::Evolve { scenario, out } => evolve(scenario, o, out.as_deref()),
        Command::Compare { scenario, evolution, out, perturb } => {
            compare(scenario, evolution.as_deref(), o, *perturb, out.as_deref())
        }
        Command::Gauge { scenario, shift, out } => gauge(scenario, shift.spec()?, o, out.as_deref()),
    }
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Pass => EXIT_PASS,
        Status::Fail => EXIT_FAIL,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match dispatch(&cli) {
        Ok(report) => {
            if !cli.quiet {
                print!("{report}");
            }
            exit_code(report.status())
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_check_failure() {
                EXIT_FAIL
            } else {
                EXIT_USAGE
            }
        }
    }
}
