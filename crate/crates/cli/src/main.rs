// Range checks are written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Per-meal cost of dietary data acquisition in RFID and CV smart canteens.
#[derive(Debug, Parser)]
#[command(name = "sgc-cost", version)]
pub struct Cli {
    /// Scenario file (TOML) with canteen, model and study sections.
    #[arg(long, global = true, value_name = "FILE")]
    pub scenario: Option<PathBuf>,

    /// Directory for CSV output.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,

    /// Replace the canteen features with a preset: baseline, enlarged,
    /// type-i, type-ii, type-iii or type-iv.
    #[arg(long, global = true, value_name = "PRESET")]
    pub canteen: Option<String>,

    /// Print the effective configuration to standard error.
    #[arg(long, global = true)]
    pub echo_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a CV deployment meal by meal and split ramp-up from steady state.
    Simulate {
        /// Meals to simulate.
        #[arg(long)]
        meals: Option<usize>,
        /// Random arrivals and photo yields from this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Learning coefficient; calibrated when omitted.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Minimum-EMH allocation of RFID staff effort for one target accuracy.
    Optimize {
        #[arg(long)]
        target: Option<f64>,
    },
    /// RFID cost-accuracy curve.
    Curve {
        #[command(flatten)]
        grid: GridArgs,
        /// billing-only or balanced.
        #[arg(long)]
        policy: Option<String>,
        /// Largest accuracy gain bought by checkout correction (balanced policy).
        #[arg(long)]
        max_improvement: Option<f64>,
    },
    /// Iso-accuracy contour of setting and labeling effort on a fixed menu.
    Contour {
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Vary one parameter and fit marginal slopes.
    Sweep {
        /// T, N, F, R, S_<procedure>, alpha_<procedure> or beta.
        #[arg(long)]
        parameter: Option<String>,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// rfid, cv or both, comma separated.
        #[arg(long, value_delimiter = ',')]
        systems: Option<Vec<String>>,
        /// RFID target accuracies.
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<f64>>,
    },
    /// RFID, CV and manual recording totals over an accuracy grid.
    Compare {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Fit the learning coefficient to a steady-state CV accuracy.
    Calibrate {
        #[arg(long)]
        sp_accuracy: Option<f64>,
    },
    /// Cost response to deviations of one model parameter.
    Sensitivity {
        /// S_label, alpha_label or beta.
        #[arg(long)]
        parameter: Option<String>,
        /// Relative deviations, e.g. -0.5,0,0.5.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        deviations: Option<Vec<f64>>,
    },
    /// Savings from a fixed menu without new or rotated dishes.
    Standardize,
    /// Efficient limit of CV checkout correction per canteen capacity.
    CorrectionBalance {
        #[arg(long, value_delimiter = ',')]
        capacities: Option<Vec<u32>>,
    },
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub start: Option<f64>,
    #[arg(long)]
    pub end: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<sgc_core::Error>() {
        Some(sgc_core::Error::Infeasible(_)) => 3,
        Some(sgc_core::Error::Usage(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("sgc-cost: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
