use std::process::ExitCode;

use clap::Parser;
use cultsim::backend::Backend;
use cultsim::engine::{run_experiment, Progress};
use cultsim::results::{reanalyze, ResultsDir};
use cultsim_cli::args::{Cli, Command, RunArgs, ServeArgs};
use cultsim_cli::service::{serve, ServiceConfig};

fn run(args: &RunArgs) -> ExitCode {
    let config = match args.to_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let backend = match Backend::new(&config.backend, &config.params) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = ResultsDir::new(args.out_dir());
    let (n_seeds, n_generations) = (config.n_seeds, config.generations());
    let quiet = args.quiet;
    let progress = move |p: Progress| {
        if quiet {
            return;
        }
        match p {
            Progress::GenerationDone { seed_index, generation } => {
                eprintln!("seed {}/{n_seeds}: generation {}/{n_generations}", seed_index + 1, generation + 1)
            }
            Progress::SeedFinished { seed_index, ok: false } => eprintln!("seed {}/{n_seeds} failed", seed_index + 1),
            Progress::Analyzing => eprintln!("analyzing"),
            _ => {}
        }
    };
    match run_experiment(&config, &backend, Some(&out), &progress) {
        Ok(outcome) => {
            println!("{}", out.path().join("summary_metrics.json").display());
            if outcome.is_complete() {
                return ExitCode::SUCCESS;
            }
            for (seed_index, error) in &outcome.failures {
                eprintln!("error: seed folder {seed_index}: {error}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn analyze(dir: &std::path::Path) -> ExitCode {
    let out = ResultsDir::new(dir);
    match reanalyze(&out) {
        Ok(summary) => {
            println!("{}", out.path().join("summary_metrics.json").display());
            if summary.shortfall() > 0 {
                eprintln!("warning: seeds {:?} have incomplete stories and were skipped", summary.failed_seeds);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn serve_forever(args: &ServeArgs) -> ExitCode {
    let config = ServiceConfig {
        results_root: args.results.clone(),
        registry: args.registry.clone(),
        max_jobs: args.jobs,
        parallelism: args.parallelism,
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match runtime.block_on(serve(&args.bind, config)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => run(args),
        Command::Analyze { dir } => analyze(dir),
        Command::Serve(args) => serve_forever(args),
    }
}
