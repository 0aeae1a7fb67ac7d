//! `mrav-hover`: static-hover analysis, classification, LHI maps and
//! step-response simulation for multirotors with tiltable propellers.

mod args;
mod commands;
mod output;

use args::{CliError, CliResult, CommonArgs, Format};
use clap::{Parser, Subcommand, ValueEnum};
use commands::{Calibrate, Experiment, MatrixKind, SimulateArgs};
use mrav_hover::sim::{ControllerGains, DEFAULT_DT};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "mrav-hover", version, about = "Static-hover analysis for multirotors with tiltable propellers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Orientation {
    /// Rotation about body x [deg].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phi: f64,
    /// Rotation about body y [deg].
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta: f64,
}

#[derive(Debug, Clone, clap::Args)]
struct CalibrateArgs {
    /// Fit mass and thrust-rate bounds so the LHI at the calibration
    /// orientation equals this value [N·m/s].
    #[arg(long)]
    calibrate: Option<f64>,
    #[arg(long = "calibrate-phi", default_value_t = 90.0, allow_negative_numbers = true)]
    calibrate_phi: f64,
    #[arg(long = "calibrate-theta", default_value_t = 0.0, allow_negative_numbers = true)]
    calibrate_theta: f64,
}

impl CalibrateArgs {
    fn get(&self) -> Option<Calibrate> {
        self.calibrate.map(|target| Calibrate {
            target,
            phi: self.calibrate_phi,
            theta: self.calibrate_theta,
        })
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentKind {
    MomentStep,
    ForceTrack,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ranks, actuation class, CSH flag, ODL and hover witness.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Hover control at one orientation.
    HoverSolve {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        at: Orientation,
    },
    /// Hover feasibility over an orientation grid.
    HoverMap {
        #[command(flatten)]
        common: CommonArgs,
        /// Grid step [deg].
        #[arg(long, default_value_t = 5.0)]
        step: f64,
    },
    /// Omnidirectional lift.
    Odl {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Zero-moment force set as a point cloud.
    ForceSet {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Local hovering index at one orientation.
    Lhi {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        at: Orientation,
        #[command(flatten)]
        cal: CalibrateArgs,
    },
    /// Local hovering index over an orientation grid.
    LhiMap {
        #[command(flatten)]
        common: CommonArgs,
        /// Grid step [deg].
        #[arg(long, default_value_t = 5.0)]
        step: f64,
        #[command(flatten)]
        cal: CalibrateArgs,
    },
    /// Moment set at hover and local moment set at one orientation.
    MomentSets {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        at: Orientation,
    },
    /// Wrench-rate controller response from hover.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        at: Orientation,
        #[arg(long, value_enum, default_value = "moment-step")]
        experiment: ExperimentKind,
        /// Moment-step axis (body frame).
        #[arg(long, value_enum, default_value = "x")]
        axis: Axis,
        /// Moment-step size [N·m].
        #[arg(long, default_value_t = 1.5, allow_negative_numbers = true)]
        magnitude: f64,
        /// Force-direction rotation about body x [deg].
        #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
        angle: f64,
        /// [s]
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// [s]
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        /// Wrench-error gain [1/s].
        #[arg(long, default_value_t = ControllerGains::default().k)]
        gain: f64,
        /// Pseudo-inverse damping.
        #[arg(long, default_value_t = ControllerGains::default().damping)]
        damping: f64,
    },
    /// Allocation matrix as CSV or JSON.
    DumpAllocation {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "reduced")]
        matrix: MatrixKind,
        #[command(flatten)]
        at: Orientation,
    },
    /// Built-in platforms.
    Presets {
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long = "out-dir", env = "MRAV_HOVER_OUT_DIR")]
        out_dir: Option<PathBuf>,
    },
}

impl Command {
    fn common(&self) -> Option<&CommonArgs> {
        match self {
            Self::Analyze { common }
            | Self::HoverSolve { common, .. }
            | Self::HoverMap { common, .. }
            | Self::Odl { common }
            | Self::ForceSet { common }
            | Self::Lhi { common, .. }
            | Self::LhiMap { common, .. }
            | Self::MomentSets { common, .. }
            | Self::Simulate { common, .. }
            | Self::DumpAllocation { common, .. } => Some(common),
            Self::Presets { .. } => None,
        }
    }
}

fn run(cmd: Command) -> CliResult<()> {
    if let Some(n) = cmd.common().and_then(|c| c.threads) {
        if n == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    match cmd {
        Command::Analyze { common } => commands::analyze(&common),
        Command::HoverSolve { common, at } => commands::hover_solve(&common, at.phi, at.theta),
        Command::HoverMap { common, step } => commands::hover_map(&common, step),
        Command::Odl { common } => commands::odl_cmd(&common),
        Command::ForceSet { common } => commands::force_set(&common),
        Command::Lhi { common, at, cal } => commands::lhi_cmd(&common, at.phi, at.theta, cal.get()),
        Command::LhiMap { common, step, cal } => commands::lhi_map_cmd(&common, step, cal.get()),
        Command::MomentSets { common, at } => commands::moment_sets(&common, at.phi, at.theta),
        Command::Simulate {
            common,
            at,
            experiment,
            axis,
            magnitude,
            angle,
            duration,
            dt,
            gain,
            damping,
        } => {
            let experiment = match experiment {
                ExperimentKind::MomentStep => Experiment::MomentStep {
                    axis: axis as usize,
                    magnitude,
                },
                ExperimentKind::ForceTrack => Experiment::ForceTrack { angle_deg: angle },
            };
            let a = SimulateArgs {
                experiment,
                phi: at.phi,
                theta: at.theta,
                duration,
                dt,
                gains: ControllerGains { k: gain, damping },
            };
            commands::simulate(&common, &a)
        }
        Command::DumpAllocation { common, matrix, at } => {
            commands::dump_allocation(&common, matrix, at.phi, at.theta)
        }
        Command::Presets { format, out_dir } => commands::presets(format, out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = run(cli.command);
    eprintln!("elapsed {:.3} s", start.elapsed().as_secs_f64());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
