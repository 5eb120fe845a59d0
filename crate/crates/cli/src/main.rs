mod args;
mod commands;
mod config;
mod output;
mod reproduce;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use output::CliError;

fn init_pool(jobs: usize) -> Result<(), CliError> {
    if jobs == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| CliError::Config(format!("--jobs {jobs}: {e}")))
}

fn run(matches: &clap::ArgMatches) -> Result<(), CliError> {
    let cli = Cli::from_arg_matches(matches).unwrap_or_else(|e| e.exit());
    if let Command::Reproduce(a) = &cli.command {
        let sub = matches.subcommand_matches("reproduce").expect("reproduce matches");
        let (resolved, cfg_jobs) = reproduce::resolve(a, sub)?;
        let jobs = if sub.value_source("jobs") == Some(clap::parser::ValueSource::CommandLine) {
            cli.jobs
        } else {
            cfg_jobs.unwrap_or(cli.jobs)
        };
        init_pool(jobs)?;
        return reproduce::run(&resolved);
    }
    init_pool(cli.jobs)?;
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Label(a) => commands::label(a),
        Command::Prep(a) => commands::prep(a),
        Command::Resample(a) => commands::resample(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Tune(a) => commands::tune(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Ablate(a) => commands::ablate_cmd(a),
        Command::Explain(a) => commands::explain(a),
        Command::CohortStats(a) => commands::cohort_stats(a),
        Command::Reproduce(_) => unreachable!(),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = Cli::command().get_matches();
    if let Err(e) = run(&matches) {
        eprintln!("vapcast: {e}");
        std::process::exit(e.exit_code());
    }
}
