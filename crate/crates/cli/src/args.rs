use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "twistmod", version, about = "Construct and verify lower-bounded generalized twisted modules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the universal module and summarize its normal-form basis.
    Build(Common),
    /// Export the q-series character (JSON and CSV).
    Character {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = CharacterSource::Universal)]
        module: CharacterSource,
    },
    /// Run the axiom suite on a module.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = VerifySource::Fock)]
        module: VerifySource,
        /// Largest weight of V vectors whose vertex operators are checked.
        #[arg(long, default_value = "2")]
        vertex_weight: String,
    },
    /// Extend a seed map to the universal module and verify the extension.
    Map {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Target::Fock)]
        target: Target,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Algebra spec file, or the name of a built-in algebra.
    #[arg(long)]
    pub algebra: String,
    /// Seed spec file, or the name of a built-in seed.
    #[arg(long, default_value = "vacuum")]
    pub seed: String,
    /// Top weight Λ of the truncation.
    #[arg(long, allow_hyphen_values = true)]
    pub cutoff: String,
    /// Lower bound B on weights.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub lower_bound: String,
    /// Branch of the logarithm used for x^{-N} factors.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub branch: i64,
    /// Largest V weight among tails of the universal module (default: automatic).
    #[arg(long)]
    pub tail_cap: Option<String>,
    /// Worker threads; 0 means one per core.
    #[arg(long, env = "TWISTMOD_JOBS", default_value_t = 0)]
    pub jobs: usize,
    /// Directory for report files; reports go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CharacterSource {
    /// The universal module itself.
    Universal,
    /// The explicit Fock instance.
    Fock,
    /// The image of the universal module in the Fock instance.
    Image,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifySource {
    /// The explicit Fock instance.
    Fock,
    /// The universal module built from the seed.
    Universal,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// Seed vector to the Fock ground state.
    Fock,
    /// The universal module onto itself; the induced map must be the identity.
    Universal,
    /// The zero map into the Fock instance.
    Zero,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Build(c) => c,
            Command::Character { common, .. } | Command::Verify { common, .. } | Command::Map { common, .. } => common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Build(_) => "build",
            Command::Character { .. } => "character",
            Command::Verify { .. } => "verify",
            Command::Map { .. } => "map",
        }
    }
}
