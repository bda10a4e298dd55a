use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

use qsdlab::{with_threads, ExperimentConfig, RunError, Task};

/// Killed one-dimensional diffusions: boundary classification, criteria,
/// QSD estimation and the Q-process.
#[derive(Parser)]
#[command(name = "qsdlab", version)]
struct Cli {
    task: Task,
    #[arg(long)]
    config: PathBuf,
    /// Overrides `numerics.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "QSDLAB_THREADS")]
    threads: Option<usize>,
    /// Overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), RunError> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.numerics.seed = s;
    }
    if let Some(t) = cfg.task {
        if t != cli.task {
            eprintln!("note: config names task {}, running {}", t.name(), cli.task.name());
        }
    }
    let out = cli.out.unwrap_or_else(|| cfg.output.directory.clone());
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = with_threads(threads, || qsdlab::run_task(cli.task, &cfg, &out))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}: wrote {} files to {}", cli.task.name(), report.files.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
