use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use specrule::scenario::{emit_report, render, run_scenario, Format, ScenarioConfig, Suite, SUITES};
use specrule::tol;

/// Run a verification suite and report residuals and margins of every check.
#[derive(Debug, Parser)]
#[command(name = "verify", version)]
struct Args {
    /// Suite to run.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(SUITES))]
    suite: String,
    /// Scenario file in the flat key-value format.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for random instances; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides the config. Without one the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "text", value_parser = ["json", "csv", "text"])]
    format: String,
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = tol::init_from_env() {
        return usage_error(&e);
    }
    let suite = match Suite::parse(&args.suite) {
        Ok(s) => s,
        Err(e) => return usage_error(&e.to_string()),
    };
    let mut config = match &args.config {
        Some(path) => match ScenarioConfig::from_file(path, Some(suite)) {
            Ok(c) => c,
            Err(e) => return usage_error(&e.to_string()),
        },
        None => ScenarioConfig::new(suite),
    };
    config.suite = suite;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(o) = args.out {
        config.out_dir = Some(o);
    }
    let format = Format::parse(&args.format).expect("validated by clap");

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        if j == 0 {
            return usage_error("--jobs must be positive");
        }
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return usage_error(&e.to_string()),
    };
    let report = pool.install(|| run_scenario(&config));

    match &config.out_dir {
        Some(dir) => match emit_report(&report, format, dir) {
            Ok(files) => {
                for f in files {
                    eprintln!("wrote {}", f.display());
                }
                let s = report.summary;
                println!("suite {}: {} checks, {} pass, {} fail, {} skipped", report.suite, s.total, s.pass, s.fail, s.skipped);
            }
            Err(e) => return usage_error(&e.to_string()),
        },
        None => match render(&report, format) {
            Ok(text) => print!("{text}"),
            Err(e) => return usage_error(&e.to_string()),
        },
    }
    if report.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
