mod config;
mod experiments;
mod summarize;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use config::{Config, Job};
use experiments::Table;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Parser)]
#[command(name = "quantcurv", version, about = "Run and summarize quantization-curvature experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a config and write its CSV tables.
    Run {
        config: PathBuf,
        /// Experiments run concurrently on this many threads.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        workers: Option<u64>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print one verdict per experiment found in the given CSVs.
    Summarize {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

fn write_table(path: &Path, table: &Table) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut buf = format!("# generated by quantcurv {} at unix time {stamp}\n", env!("CARGO_PKG_VERSION")).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.header).and_then(|_| {
            table.rows.iter().try_for_each(|r| w.write_record(r))
        })
        .map_err(|e| CliError::Io(e.to_string()))?;
        w.flush().map_err(io)?;
    }
    // Write beside the target and rename, so readers never see half a file.
    let tmp = path.with_extension("csv.partial");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(&buf).and_then(|_| f.sync_all()).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn run(config_path: &Path, workers: Option<usize>, seed: Option<u64>) -> Result<bool, CliError> {
    let mut config = Config::load(config_path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let jobs: Vec<Job> = config.jobs(base)?;
    let threads = workers.or(config.workers).unwrap_or(1).min(jobs.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {threads} workers: {e}")))?;
    let results: Vec<_> = pool.install(|| jobs.par_iter().map(experiments::run).collect());

    let mut all_pass = true;
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(table) => {
                write_table(&job.output, &table)?;
                let failures = table.failures();
                all_pass &= failures == 0;
                println!(
                    "{} {} ({}): {} of {} rows pass -> {}",
                    if failures == 0 { "PASS" } else { "FAIL" },
                    job.name,
                    job.params.kind(),
                    table.rows.len() - failures,
                    table.rows.len(),
                    job.output.display()
                );
            }
            Err(e) => {
                all_pass = false;
                println!("FAIL {} ({}): {e}", job.name, job.params.kind());
            }
        }
    }
    Ok(all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, workers, seed } => run(&config, workers.map(|w| w as usize), seed),
        Command::Summarize { csv } => summarize::summarize(&csv).map(|report| {
            print!("{}", report.text);
            report.all_pass
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("quantcurv: {e}");
            ExitCode::from(2)
        }
    }
}
