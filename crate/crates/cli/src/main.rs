//! `lamiflow <suite> [--config FILE] [--seed N] [--out DIR] [--print-config]`

mod config;
mod report;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lamiflow::Error;

use crate::config::ExperimentConfig;
use crate::report::Report;

const EXIT_BREACH: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "lamiflow", version, about = "Run a lamiflow experiment suite")]
struct Args {
    /// one of: kernel-identities, birkhoff-equidistribution, diffusion-ergodic,
    /// diffusion-mixing, skoda, linear-foliation-theta, tail-estimates
    suite: String,
    /// flat `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// overrides the `seed` key
    #[arg(long)]
    seed: Option<u64>,
    /// report directory (default `lamiflow-out/<suite>`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// print the effective configuration and exit
    #[arg(long)]
    print_config: bool,
}

fn load(args: &Args) -> Result<ExperimentConfig, String> {
    if !suites::SUITES.contains(&args.suite.as_str()) {
        return Err(format!("unknown suite {:?}; expected one of {}", args.suite, suites::SUITES.join(", ")));
    }
    let mut cfg = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            ExperimentConfig::parse(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.set("seed", &s.to_string()).map_err(|e| e.to_string())?;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("lamiflow: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if args.print_config {
        print!("{}", cfg.render());
        return ExitCode::SUCCESS;
    }
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("lamiflow-out").join(&args.suite));
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("lamiflow: {}: {e}", out.display());
        return ExitCode::from(EXIT_VALIDATION);
    }
    let mut rep = Report::new(&args.suite, cfg.seed("seed"), &out);
    let outcome = suites::run(&args.suite, &cfg, &mut rep);
    let error = outcome.as_ref().err().map(|e| e.to_string());
    if let Err(e) = rep.write(error) {
        eprintln!("lamiflow: writing report: {e}");
        return ExitCode::from(EXIT_NUMERIC);
    }
    for c in rep.criteria() {
        println!("{} {} measured {:e} tolerance {:e}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.measured, c.tolerance);
    }
    match outcome {
        Err(e @ (Error::Domain(_) | Error::Degenerate(_) | Error::Invariant(_))) => {
            eprintln!("lamiflow: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(e) => {
            eprintln!("lamiflow: {e}");
            ExitCode::from(EXIT_NUMERIC)
        }
        Ok(()) if rep.pass() => ExitCode::SUCCESS,
        Ok(()) => ExitCode::from(EXIT_BREACH),
    }
}
