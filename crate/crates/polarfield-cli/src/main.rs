//! `polarfield` command line: validate, compute, compare, trace.

mod commands;
mod error;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "polarfield", version, about = "Directional fields with singularities anywhere on a triangle mesh")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the mesh and prescription without solving.
    Validate(RunArgs),
    /// Solve for the field and write it with a solver report.
    Compute(RunArgs),
    /// Solve and compare against the trivial-connection baseline (vertex singularities only).
    Compare(RunArgs),
    /// Trace streamlines of a previously computed field.
    Trace(TraceArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Triangle mesh (.obj or .off).
    #[arg(long)]
    pub mesh: PathBuf,
    /// Singularity prescription (JSON).
    #[arg(long)]
    pub prescription: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Jump-edge weight of the smoothness energy.
    #[arg(long = "lambda-j", default_value_t = 50.0)]
    pub lambda_j: f64,
    /// Isotropy weight.
    #[arg(long = "lambda-s", default_value_t = 50.0)]
    pub lambda_s: f64,
    /// Lower bound on the field magnitude.
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Field symmetry. Overrides the prescription's N when given; 1 when neither sets it.
    #[arg(long)]
    pub n: Option<u32>,
    /// Sample the field on a k×k sub-triangle grid per face into samples.csv.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Trace this many streamlines into streamlines.obj.
    #[arg(long = "trace-seeds")]
    pub trace_seeds: Option<usize>,
    /// Alignment curves (JSON list of polylines in barycentric coordinates).
    #[arg(long)]
    pub align: Option<PathBuf>,
    /// Also write operator matrices as coordinate triplets under matrices/.
    #[arg(long = "dump-matrices")]
    pub dump_matrices: bool,
    /// Also write the beveled complex debug dump (bevel.json).
    #[arg(long = "dump-bevel")]
    pub dump_bevel: bool,
}

#[derive(Args, Debug, Clone)]
pub struct TraceArgs {
    /// Triangle mesh the field was computed on.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Field export written by `compute`.
    #[arg(long)]
    pub field: PathBuf,
    /// Output directory for streamlines.obj.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long = "trace-seeds", default_value_t = 64)]
    pub trace_seeds: usize,
    /// Integration step relative to the mean edge length.
    #[arg(long, default_value_t = 0.2)]
    pub step: f64,
    /// Step cap per direction.
    #[arg(long = "max-steps", default_value_t = 2000)]
    pub max_steps: usize,
}

fn main() {
    let cli = Cli::parse();
    let threads = match commands::thread_count() {
        Ok(t) => t,
        Err(e) => {
            println!("{}", e.to_json());
            std::process::exit(e.code);
        }
    };
    polarfield::set_threads(threads);
    let result = match cli.command {
        Command::Validate(a) => commands::validate(&a),
        Command::Compute(a) => commands::compute(&a, threads),
        Command::Compare(a) => commands::compare(&a, threads),
        Command::Trace(a) => commands::trace(&a),
    };
    match result {
        Ok(summary) => println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes")),
        Err(e) => {
            println!("{}", e.to_json());
            std::process::exit(e.code);
        }
    }
}
