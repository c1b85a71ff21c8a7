use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nodal_lab::{run, Command, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "nodal-lab", version, about = "Reproducible nodal-set experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Frequency profile beta(r) about a center.
    Freq(RunArgs),
    /// Doubling indices on balls and, optionally, a cube.
    Doubling(RunArgs),
    /// Zero-set measure by marching simplices and Crofton lines.
    Nodal(RunArgs),
    /// Subcube or hyperplane census of doubling indices.
    Census(RunArgs),
    /// Covering constants and the simplex lemma check.
    Simplex(RunArgs),
    /// Propagation of smallness from a face to the half cube.
    Smallness(RunArgs),
    /// Nodal volume against eigenvalue on the flat torus.
    Yau(RunArgs),
    /// Exponent of the bad-level recursion and tree simulations.
    Exponent(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel kernels.
    #[arg(long, env = "NODAL_LAB_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Freq(a) => (Command::Freq, a),
        Cmd::Doubling(a) => (Command::Doubling, a),
        Cmd::Nodal(a) => (Command::Nodal, a),
        Cmd::Census(a) => (Command::Census, a),
        Cmd::Simplex(a) => (Command::Simplex, a),
        Cmd::Smallness(a) => (Command::Smallness, a),
        Cmd::Yau(a) => (Command::Yau, a),
        Cmd::Exponent(a) => (Command::Exponent, a),
    };
    if let Some(k) = args.threads {
        if k == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: cannot configure {k} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let opts = RunOptions { command, config: args.config, out: args.out, seed: args.seed };
    match run(&opts) {
        Ok(m) => {
            for o in &m.outputs {
                println!("{}  {}", o.sha256, opts.out.join(&o.file).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, RunError::Degenerate(_) | RunError::Argument(_)) {
                eprintln!("partial outputs and the error record are in {}", opts.out.display());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
