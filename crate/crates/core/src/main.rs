use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparsedict::experiment::{run, thread_pool, Command, ExperimentSpec};

/// Online sparse dictionary learning and patch-based image recovery.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn a dictionary from training images.
    Learn(Flags),
    /// Reconstruct images patch by patch with a dictionary.
    Reconstruct(Flags),
    /// Coefficient histograms, Gaussian fits, zero peaks and difference images.
    Analyze(Flags),
    /// Quality and sparsity over solver x mu x patch side.
    Sweep(Flags),
}

#[derive(Args)]
struct Flags {
    /// Input images (training images for learn and sweep).
    #[arg(long, num_args = 1..)]
    images: Vec<String>,
    /// Held-out images reconstructed by sweep.
    #[arg(long, num_args = 1..)]
    test: Vec<String>,
    /// Dictionary artifact.
    #[arg(long)]
    dict: Option<String>,
    /// Coefficient artifacts to analyze.
    #[arg(long, num_args = 1..)]
    codes: Vec<String>,
    /// ista, fista, fpcbb or twist (sweep accepts several).
    #[arg(long)]
    solver: Vec<String>,
    /// Sparsity penalty; repeatable, accepts `2^-4`.
    #[arg(long, allow_hyphen_values = true)]
    mu: Vec<String>,
    /// Patch side; sweep accepts several.
    #[arg(long)]
    patch: Vec<String>,
    #[arg(long)]
    stride: Option<String>,
    #[arg(long)]
    atoms: Option<String>,
    #[arg(long = "n-patches")]
    n_patches: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Solver tolerance while learning.
    #[arg(long)]
    eps1: Option<String>,
    /// Per-patch solver tolerance while reconstructing.
    #[arg(long)]
    eps2: Option<String>,
    #[arg(long = "max-iters")]
    max_iters: Option<String>,
    /// Dictionary-update sweeps per learning iteration.
    #[arg(long = "bcd-sweeps")]
    bcd_sweeps: Option<String>,
    /// Column-change tolerance ending the dictionary-update sweeps.
    #[arg(long = "bcd-tol")]
    bcd_tol: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Flags {
    fn overrides(self) -> (Option<PathBuf>, Vec<(String, Vec<String>)>) {
        let mut kv = Vec::new();
        let mut list = |k: &str, v: Vec<String>| {
            if !v.is_empty() {
                kv.push((k.to_string(), v));
            }
        };
        list("images", self.images);
        list("test", self.test);
        list("codes", self.codes);
        list("solver", self.solver);
        list("mu", self.mu);
        list("patch", self.patch);
        for (k, v) in [
            ("dict", self.dict),
            ("stride", self.stride),
            ("atoms", self.atoms),
            ("n-patches", self.n_patches),
            ("seed", self.seed),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("max-iters", self.max_iters),
            ("bcd-sweeps", self.bcd_sweeps),
            ("bcd-tol", self.bcd_tol),
            ("out", self.out),
        ] {
            list(k, v.into_iter().collect());
        }
        (self.config, kv)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Cmd::Learn(f) => (Command::Learn, f),
        Cmd::Reconstruct(f) => (Command::Reconstruct, f),
        Cmd::Analyze(f) => (Command::Analyze, f),
        Cmd::Sweep(f) => (Command::Sweep, f),
    };
    let (config, overrides) = flags.overrides();
    let result = ExperimentSpec::resolve(command, config.as_deref(), &overrides)
        .and_then(|spec| thread_pool().and_then(|pool| pool.install(|| run(&spec))));
    match result {
        Ok(summary) => {
            for name in &summary.outputs {
                println!("wrote {name}");
            }
            if summary.failed_cells > 0 {
                eprintln!("error: {} sweep cells failed (see the error column)", summary.failed_cells);
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
