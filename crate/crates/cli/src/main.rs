//! `fraclab`: one subcommand per experiment, JSON or CSV results.

mod commands;
mod run;
mod sources;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{kplane, measures, projections, spectral, unions};
use run::{execute, Experiment, Failure, Format, Globals};

#[derive(Parser)]
#[command(name = "fraclab", version, about = "Experiments on projections, Fourier decay and unions of planes")]
struct Cli {
    /// JSON object overriding flags; may also set `command`, `output` and `format`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Result file; stdout when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a measure and write its atoms.
    MakeMeasure(measures::MakeMeasureArgs),
    /// Fit the Frostman exponent of a measure.
    Frostman(measures::FrostmanArgs),
    /// Check `<P_x p, xi> = <p, T_x xi>` on random instances.
    VerifyIdentity(projections::VerifyIdentityArgs),
    /// Sliced Frostman exponent of an embedded plane-parameter measure.
    SliceFrostman(projections::SliceFrostmanArgs),
    /// Fourier energy on dyadic shells.
    Shells(spectral::ShellsArgs),
    /// Sobolev dimension from weighted shell energies.
    SobolevDim(spectral::SobolevArgs),
    /// Decay of the projected shell integral against its predicted exponent.
    LemmaDecay(spectral::LemmaArgs),
    /// Mixed-norm bound ratios for the k-plane transform.
    KplaneRatio(kplane::KplaneRatioArgs),
    /// Solve for the exponent q of the mixed-norm bound.
    ComputeQ(kplane::ComputeQArgs),
    /// Occupancy of a union of planes across resolutions.
    UnionSweep(unions::UnionSweepArgs),
    /// Build the Cantor-row plane family and estimate its parameter dimension.
    Counterexample(unions::CounterexampleArgs),
    /// Box-counting dimension of a union of planes.
    UnionDim(unions::UnionDimArgs),
    /// Sobolev dimension of sumsets `A0 + x A1` for several `x`.
    Sumset(spectral::SumsetArgs),
}

fn dispatch<E: Experiment>(preset: &Option<String>, flags: &impl Serialize, globals: Globals) -> Result<Option<bool>, Failure> {
    execute::<E>(preset.as_deref(), flags, globals)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let failure = Failure::Validation(e.to_string().trim_end().to_string());
            eprintln!("{}", failure.to_json());
            return ExitCode::from(failure.exit_code() as u8);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", Failure::Runtime(e.to_string()).to_json());
            return ExitCode::from(1);
        }
    }
    let globals = Globals {
        config: cli.config,
        output: cli.output,
        format: cli.format,
    };
    use Command as C;
    let outcome = match &cli.command {
        C::MakeMeasure(a) => dispatch::<measures::MakeMeasure>(&a.preset, a, globals),
        C::Frostman(a) => dispatch::<measures::Frostman>(&a.preset, a, globals),
        C::VerifyIdentity(a) => dispatch::<projections::VerifyIdentity>(&a.preset, a, globals),
        C::SliceFrostman(a) => dispatch::<projections::SliceFrostman>(&a.preset, a, globals),
        C::Shells(a) => dispatch::<spectral::Shells>(&a.preset, a, globals),
        C::SobolevDim(a) => dispatch::<spectral::SobolevDim>(&a.preset, a, globals),
        C::LemmaDecay(a) => dispatch::<spectral::LemmaDecay>(&a.preset, a, globals),
        C::KplaneRatio(a) => dispatch::<kplane::KplaneRatio>(&a.preset, a, globals),
        C::ComputeQ(a) => dispatch::<kplane::ComputeQ>(&a.preset, a, globals),
        C::UnionSweep(a) => dispatch::<unions::UnionSweep>(&a.preset, a, globals),
        C::Counterexample(a) => dispatch::<unions::Counterexample>(&a.preset, a, globals),
        C::UnionDim(a) => dispatch::<unions::UnionDim>(&a.preset, a, globals),
        C::Sumset(a) => dispatch::<spectral::Sumset>(&a.preset, a, globals),
    };
    match outcome {
        Ok(Some(false)) => ExitCode::from(4),
        Ok(_) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
