//! `cdr`: dereverberation of two-microphone recordings by coherent-to-diffuse
//! ratio estimation, with room simulation and evaluation tools.

mod commands;
mod common;
mod error;
mod scenario;
mod wav;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{coherence, dereverb, evaluate, simulate, sweep};

#[derive(Debug, Parser)]
#[command(name = "cdr", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Enhance a two-channel 16 kHz recording with the CDR postfilter.
    Dereverb(dereverb::DereverbArgs),
    /// Render a scenario file into impulse responses, signals and sidecars.
    Simulate(simulate::SimulateArgs),
    /// Long-run spatial coherence with diffuse and 2-D isotropic model curves.
    AnalyzeCoherence(coherence::CoherenceArgs),
    /// Estimator output along the ideal coherence line, or under model errors.
    SweepBias(sweep::SweepArgs),
    /// ELR, fwSegSDR and diffuseness MSE report for a simulated signal set.
    Evaluate(evaluate::EvaluateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Dereverb(a) => dereverb::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::AnalyzeCoherence(a) => coherence::run(a),
        Command::SweepBias(a) => sweep::run(a),
        Command::Evaluate(a) => evaluate::run(a),
    };
    match result {
        Ok(()) => ExitCode::from(error::EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
