//! `redlab`: fluid-model analysis and packet-level experiments.
//!
//! Exit codes: 0 on success, 1 when a computation fails (diagnostic on
//! stderr), 2 on usage errors including unknown keys.

mod args;
mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{ModelArgs, ProfileArg};

#[derive(Debug, Parser)]
#[command(
    name = "redlab",
    version,
    about = "Fluid and packet models of Compound TCP over RED and threshold queues"
)]
struct Cli {
    /// Output file, or directory for packet-sim. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for stochastic runs; the first of consecutive seeds where several are run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "desk")]
    profile: ProfileArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium point and local-stability verdict.
    Equilibrium {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Hopf boundary of one parameter as another is swept.
    StabilityChart {
        #[command(flatten)]
        model: ModelArgs,
        /// Swept parameter, as name=start:stop:count.
        #[arg(long)]
        sweep: String,
        /// Parameter solved for at each sweep value.
        #[arg(long)]
        solve: String,
        /// Search interval for the solved parameter, lo:hi.
        #[arg(long, default_value = "0.001:20")]
        range: String,
        /// Log-spaced samples used to bracket the boundary.
        #[arg(long, default_value_t = 60)]
        samples: usize,
    },
    /// Normal-form classification of the Hopf bifurcation in κ, as JSON.
    HopfClassify {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Integrates the delay equations from a perturbed equilibrium.
    FluidSim {
        #[command(flatten)]
        model: ModelArgs,
        /// Run length in delays.
        #[arg(long, default_value_t = 300.0)]
        horizon_delays: f64,
        #[arg(long, default_value_t = 200)]
        steps_per_delay: usize,
        #[arg(long, default_value_t = 10)]
        record_every: usize,
        /// Relative offset of the constant history from the equilibrium.
        #[arg(long, default_value_t = 0.1)]
        perturbation: f64,
    },
    /// Post-transient extremes of the window as one parameter is swept.
    BifurcationDiagram {
        #[command(flatten)]
        model: ModelArgs,
        /// Swept parameter, as name=start:stop:count.
        #[arg(long)]
        sweep: String,
        #[arg(long, default_value_t = 1000.0)]
        horizon_delays: f64,
        #[arg(long, default_value_t = 900.0)]
        transient_delays: f64,
        #[arg(long, default_value_t = 200)]
        steps_per_delay: usize,
        #[arg(long, default_value_t = 0.1)]
        perturbation: f64,
    },
    /// One packet-level run; writes CSVs into the --out directory.
    PacketSim(commands::PacketArgs),
    /// Threshold against RED at matched configurations over several seeds.
    ComparePolicies(commands::CompareArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let ctx = commands::Context {
        out: cli.out,
        seed: cli.seed,
        profile: cli.profile,
    };
    let result = match cli.command {
        Command::Equilibrium { model } => commands::equilibrium(&ctx, &model),
        Command::StabilityChart {
            model,
            sweep,
            solve,
            range,
            samples,
        } => commands::stability_chart(&ctx, &model, &sweep, &solve, &range, samples),
        Command::HopfClassify { model } => commands::hopf_classify(&ctx, &model),
        Command::FluidSim {
            model,
            horizon_delays,
            steps_per_delay,
            record_every,
            perturbation,
        } => commands::fluid_sim(
            &ctx,
            &model,
            horizon_delays,
            steps_per_delay,
            record_every,
            perturbation,
        ),
        Command::BifurcationDiagram {
            model,
            sweep,
            horizon_delays,
            transient_delays,
            steps_per_delay,
            perturbation,
        } => {
            let opts = redlab::fluid::DiagramOptions {
                perturbation,
                horizon_delays,
                transient_delays,
                steps_per_delay,
            };
            commands::bifurcation_diagram(&ctx, &model, &sweep, opts)
        }
        Command::PacketSim(a) => commands::packet_sim(&ctx, &a),
        Command::ComparePolicies(a) => commands::compare_policies(&ctx, &a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("redlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
