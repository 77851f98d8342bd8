use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdiv::aep::Smoothed;
use qdiv_cli::commands::{self, ComputeArgs, Quantity, RandomKind, SweepKind};
use qdiv_cli::config::{RunConfig, CONFIG_ENV};
use qdiv_cli::instance;
use qdiv_cli::suites::{self, Suite, SuiteParams};

const PASS: u8 = 0;
const FAIL: u8 = 1;
const USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "qdiv", version, about = "Divergences of quantum states and channels")]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one quantity on states or channels from an instance file.
    Compute {
        quantity: Quantity,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "rho")]
        rho: String,
        #[arg(long, default_value = "sigma")]
        sigma: String,
        #[arg(long)]
        phi: Option<String>,
        #[arg(long)]
        psi: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_parser = parse_smoothed)]
        which: Option<Smoothed>,
        /// Write the JSON record here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a randomized verification suite.
    Verify {
        suite: Suite,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate exact per-copy rates against their expansions or bounds.
    Sweep {
        kind: SweepKind,
        /// State pair `rho`, `sigma`; a built-in pair when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Copies, as `a..b` or a single n.
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_parser = parse_smoothed, default_value = "hypothesis-testing")]
        which: Smoothed,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a reproducible random instance file.
    Random {
        kind: RandomKind,
        /// `d`, or `d_in:d_out` for channels.
        #[arg(long, default_value = "2")]
        dims: String,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 5)]
        length: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_smoothed(s: &str) -> Result<Smoothed, String> {
    match s {
        "hypothesis-testing" | "dh" => Ok(Smoothed::HypothesisTesting),
        "max-relative" | "dmax" => Ok(Smoothed::MaxRelative),
        _ => Err(format!("unknown quantity `{s}` (dh or dmax)")),
    }
}

fn write_output(config: &RunConfig, out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            let path = config.output_path(path);
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, bytes)?;
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
        }
    }
    Ok(())
}

fn run(cli: Cli, config: RunConfig) -> anyhow::Result<u8> {
    match cli.command {
        Command::Compute { quantity, spec, rho, sigma, phi, psi, alpha, epsilon, n, which, out } => {
            let inst = match instance::from_file(&spec) {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return Ok(USAGE);
                }
            };
            let args = ComputeArgs { rho, sigma, phi, psi, alpha, epsilon, n, which };
            let record = commands::compute(&inst, quantity, &args, &config)?;
            println!("{}", qdiv_cli::ext_real::to_value(record.value));
            let mut text = serde_json::to_vec_pretty(&record)?;
            text.push(b'\n');
            write_output(&config, out.as_deref(), &text)?;
            Ok(PASS)
        }
        Command::Verify { suite, trials, epsilon, alpha, out } => {
            let mut params = SuiteParams::new(suite, config.seed);
            params.trials = trials.unwrap_or(params.trials);
            params.epsilon = epsilon;
            params.alpha = alpha;
            params.config = config.clone();
            let report = suites::run(suite, &params);
            for r in report.records.iter().filter(|r| !r.pass) {
                let worst = r.checks.iter().filter(|c| !c.pass).map(|c| format!("{} ({:.3e} > {:.1e})", c.name, c.violation, c.tolerance));
                let what: Vec<String> = worst.chain(r.error.clone()).collect();
                eprintln!("trial {} failed: {}", r.trial, what.join("; "));
            }
            println!(
                "{}: {} trials={} failed={} max_violation={:.3e} seed={} time={:.1}s",
                suite.name(),
                if report.pass { "PASS" } else { "FAIL" },
                report.trials,
                report.failed_trials,
                report.max_violation,
                report.seed,
                report.wall_time_s
            );
            if let Some(path) = out {
                let mut text = serde_json::to_vec_pretty(&report)?;
                text.push(b'\n');
                write_output(&config, Some(&path), &text)?;
            }
            Ok(if report.pass { PASS } else { FAIL })
        }
        Command::Sweep { kind, spec, n, epsilon, which, out } => {
            let inst = match spec.as_deref().map(instance::from_file).transpose() {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return Ok(USAGE);
                }
            };
            let range = match n {
                Some(text) => commands::parse_range(&text)?,
                None => kind.default_range(),
            };
            let eps = epsilon.unwrap_or(kind.default_epsilon());
            let result = commands::sweep(inst.as_ref(), kind, range, eps, which, &config)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            write_output(&config, out.as_deref(), &result.csv)?;
            Ok(if result.pass { PASS } else { FAIL })
        }
        Command::Random { kind, dims, rank, length, out } => {
            let spec = commands::random_instance(kind, &dims, rank, length, config.seed)?;
            let mut text = serde_json::to_vec_pretty(&spec)?;
            text.push(b'\n');
            write_output(&config, out.as_deref(), &text)?;
            Ok(PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(USAGE);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(threads) = config.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    }
    match run(cli, config) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(FAIL)
        }
    }
}
