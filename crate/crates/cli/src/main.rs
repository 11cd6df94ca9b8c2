//! `dynmod`: evaluate formulas over staged structures, compute horizons, and
//! run the Kripke and higher-order checks from the command line.
//!
//! Exit codes: 0 success, 2 parse or schema error, 3 semantic error,
//! 4 witness closure exhausted.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dynmod::holapprox::HolError;
use dynmod::kripke::KripkeError;
use dynmod::semantics::SemanticsError;
use dynmod::structures::StructureError;
use dynmod::syntax::SyntaxError;

#[derive(Parser, Debug)]
#[command(
    name = "dynmod",
    version,
    about = "Reflection semantics over staged finite structures"
)]
pub struct Cli {
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a formula and print its canonical form.
    Parse(ParseArgs),
    /// Evaluate formulas classically or under reflection.
    Eval(EvalArgs),
    /// Compute the witness-closed horizon of a formula set.
    Horizon(EvalArgs),
    /// Re-evaluate under seeded random choosers above the horizon.
    Independence(EvalArgs),
    /// Report the stages and contexts touched by an evaluation.
    Locality(EvalArgs),
    /// Load a structure, checking its laws, and classify a system map.
    Check(CheckArgs),
    /// Worked examples.
    #[command(subcommand)]
    Demo(Demo),
    /// Kripke models of staged structures.
    #[command(subcommand)]
    Kripke(KripkeCommand),
    /// Finite approximations of higher-order objects.
    #[command(subcommand)]
    Hol(Hol),
}

#[derive(Args, Debug)]
pub struct FormulaSource {
    /// Formula text.
    #[arg(long, conflicts_with = "formulas")]
    pub formula: Option<String>,
    /// File with one formula per line; blank lines and `#` comments skipped.
    #[arg(long)]
    pub formulas: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ParseArgs {
    #[command(flatten)]
    pub source: FormulaSource,
    /// Structure whose signature the formula must respect; without one the
    /// signature is inferred.
    #[arg(long)]
    pub structure: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Classical,
    Reflection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HorizonKind {
    /// Witness-closed horizon computed for the formulas.
    Closed,
    /// `h(C) = max(C) + 1`.
    Fallback,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub structure: PathBuf,
    #[command(flatten)]
    pub source: FormulaSource,
    #[arg(long, value_enum, default_value = "reflection")]
    pub mode: Mode,
    /// Stage used by classical evaluation; defaults to the headroom.
    #[arg(long)]
    pub bound: Option<u32>,
    /// Largest stage reflection may use; defaults to the structure's.
    #[arg(long)]
    pub headroom: Option<u32>,
    #[arg(long, value_enum, default_value = "closed")]
    pub horizon: HorizonKind,
    /// Comma-separated element labels for the free variables `y0, y1, ...`.
    #[arg(long)]
    pub valuation: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub structure: Option<PathBuf>,
    /// System map `{"pairs": [[i, a, i', a'], ...]}` to classify.
    #[arg(long)]
    pub system: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Demo {
    /// Compare stage `i` of the naturals with stage `j` of the evens.
    Paradox {
        #[arg(long)]
        i: u32,
        #[arg(long)]
        j: u32,
    },
}

#[derive(Subcommand, Debug)]
pub enum KripkeCommand {
    /// Load a frame and report persistence and coherence violations.
    Check {
        #[arg(long)]
        frame: PathBuf,
    },
    /// Force formulas at one node or at every node.
    Eval(KripkeEvalArgs),
}

#[derive(Args, Debug)]
pub struct KripkeEvalArgs {
    #[arg(long)]
    pub frame: PathBuf,
    #[command(flatten)]
    pub source: FormulaSource,
    /// Node to force at; every node when omitted.
    #[arg(long)]
    pub node: Option<String>,
    /// `classical` is textbook Kripke forcing at `--bound`.
    #[arg(long, value_enum, default_value = "reflection")]
    pub mode: Mode,
    #[arg(long)]
    pub bound: Option<u32>,
    #[arg(long)]
    pub headroom: Option<u32>,
}

#[derive(Subcommand, Debug)]
pub enum Hol {
    /// Restrict a function table to a smaller domain and codomain.
    Restrict {
        /// Comma-separated values `f(0), f(1), ...`.
        #[arg(long)]
        table: String,
        #[arg(long)]
        codomain: u32,
        #[arg(long)]
        i: u32,
        #[arg(long)]
        j: u32,
    },
    /// Check the index set `{(i, j) : j > max_{n<i} f(n)}` for `f`.
    Suitable {
        #[arg(long)]
        table: String,
        #[arg(long)]
        bound: u32,
    },
    /// The finite ordinal `n`, and its relation to `m`.
    Omega {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        m: Option<u32>,
    },
    /// Decimal approximant of the square root of two and its refinements.
    Sqrt2 {
        #[arg(long)]
        k: usize,
    },
}

/// Exit code for an error from the library.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(e) = cause.downcast_ref::<SemanticsError>() {
            return semantics_code(e);
        }
        if let Some(e) = cause.downcast_ref::<StructureError>() {
            return structure_code(e);
        }
        if let Some(e) = cause.downcast_ref::<KripkeError>() {
            return match e {
                KripkeError::Structure(e) => structure_code(e),
                KripkeError::Semantics(e) => semantics_code(e),
                _ => 2,
            };
        }
        if let Some(e) = cause.downcast_ref::<HolError>() {
            return match e {
                HolError::InvalidTable(_) | HolError::InvalidDecimal(_) => 2,
                _ => 3,
            };
        }
        if cause.downcast_ref::<SyntaxError>().is_some() {
            return 2;
        }
    }
    2
}

fn semantics_code(e: &SemanticsError) -> u8 {
    match e {
        SemanticsError::Syntax(_) => 2,
        SemanticsError::Structure(e) => structure_code(e),
        SemanticsError::Exhausted(_) => 4,
        _ => 3,
    }
}

fn structure_code(e: &StructureError) -> u8 {
    match e {
        StructureError::Range(_) | StructureError::HeadroomExceeded { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
