//! `ualg`: structure categories, context structures, bounded deduction,
//! finite models and universal models from the command line.
//!
//! Exit codes: 0 success or proved, 1 inconclusive or refuted (the report
//! says which), 2 a failed check, 3 usage, file or parse errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "ualg", version, about = "Universal algebra over structure categories")]
struct Cli {
    /// Report format: plain text, or one JSON record per line.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads for model search and saturation.
    #[arg(long, global = true, env = "UALG_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Structure-category checks.
    Delta {
        #[command(subcommand)]
        cmd: DeltaCmd,
    },
    /// Context-structure queries.
    Ctx {
        #[command(subcommand)]
        cmd: CtxCmd,
    },
    /// Decide a goal by bounded saturation.
    Prove(ProveArgs),
    /// Search for a finite model, refuting a goal if one is given.
    Countermodel(CountermodelArgs),
    /// Partition a hom of the bounded universal model.
    Universal(UniversalArgs),
    /// Run the acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Subcommand)]
pub enum DeltaCmd {
    /// Verify the structure-category axioms for a family.
    Check {
        /// identities, bijections, strict-increasing, injections, surjections,
        /// left-surjections, right-surjections, all, increasing,
        /// delta-upper:<gens>, psi-lower:<gens> or psi-upper:<gens>.
        #[arg(long)]
        family: String,
        /// Largest domain and codomain checked.
        #[arg(long, default_value_t = 4)]
        max: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum CtxCmd {
    /// Whether the context governs the word.
    Rel {
        #[arg(long)]
        structure: String,
        /// Space-separated letters, each `name` or `name:Sort`.
        context: String,
        word: String,
    },
    /// The terminal context of a word.
    Terminal {
        #[arg(long)]
        structure: String,
        word: String,
    },
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Theory file.
    pub file: PathBuf,
    /// Replace the theory's declared structure.
    #[arg(long)]
    pub structure: Option<String>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Largest term depth in the saturation universe.
    #[arg(long = "depth", default_value_t = 3)]
    pub depth: usize,
    /// Longest context in the saturation universe.
    #[arg(long, default_value_t = 4)]
    pub ctx: usize,
    /// Saturation rounds.
    #[arg(long, default_value_t = 8)]
    pub rounds: usize,
}

#[derive(Debug, Args)]
pub struct ProveArgs {
    #[command(flatten)]
    pub theory: TheoryArgs,
    /// `lhs ~ rhs ctx [ x:S ... ]`.
    #[arg(long)]
    pub goal: String,
    #[command(flatten)]
    pub bounds: BoundArgs,
}

#[derive(Debug, Args)]
pub struct CountermodelArgs {
    #[command(flatten)]
    pub theory: TheoryArgs,
    #[arg(long)]
    pub goal: Option<String>,
    /// Largest carrier size tried.
    #[arg(long = "max-size", default_value_t = 3)]
    pub max_size: usize,
}

#[derive(Debug, Args)]
pub struct UniversalArgs {
    #[command(flatten)]
    pub theory: TheoryArgs,
    /// Hom to partition, as `S S -> S`.
    #[arg(long)]
    pub hom: String,
    /// Depth of the enumerated extended-signature terms.
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// A goal whose internalized sides join the partition.
    #[arg(long)]
    pub goal: Option<String>,
    #[arg(long = "term-depth", default_value_t = 3)]
    pub term_depth: usize,
    #[arg(long, default_value_t = 4)]
    pub ctx: usize,
    #[arg(long, default_value_t = 8)]
    pub rounds: usize,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Comma-separated criterion numbers; all eleven when omitted.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<usize>,
}

/// Exit statuses shared by every command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    Negative = 1,
    CheckFailed = 2,
    Usage = 3,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational =
                matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion);
            let _ = e.print();
            return ExitCode::from(if informational { Status::Success } else { Status::Usage } as u8);
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(Status::Usage as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(Status::Usage as u8);
        }
    }
    let out = commands::Output::new(cli.format);
    let result = match cli.command {
        Command::Delta { cmd } => commands::delta(&out, cmd),
        Command::Ctx { cmd } => commands::ctx(&out, cmd),
        Command::Prove(args) => commands::prove(&out, args),
        Command::Countermodel(args) => commands::countermodel(&out, args),
        Command::Universal(args) => commands::universal(&out, args),
        Command::Selftest(args) => commands::selftest(&out, args),
    };
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Status::Usage as u8)
        }
    }
}
