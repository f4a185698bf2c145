use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cwss::experiment::{run_montecarlo, run_sense, ExperimentConfig, Method};
use cwss::selftest::run_selftest;
use cwss::solve::measurement_bounds;

const EXIT_SELFTEST: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;

/// Compressive wideband spectrum sensing with LASSO and total-variation recovery.
#[derive(Parser)]
#[command(name = "cwss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One end-to-end sensing run; writes PSD CSVs and a JSON summary.
    Sense(ExperimentArgs),
    /// Monte Carlo sweep over sub-sampling rates.
    Montecarlo {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Worker threads (results do not depend on this).
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Sufficient measurement counts for LASSO and TV recovery.
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        delta: usize,
        #[arg(long, default_value_t = 1)]
        t: usize,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Operator oracles, TV equivalence, l0 agreement and adjoint checks.
    Selftest,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sub-sampling rate for `sense`.
    #[arg(long)]
    rate: Option<f64>,
    /// Comma-separated sub-sampling rates for `montecarlo`.
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<usize>,
    /// lasso, tvm or both.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Number of sensing periods.
    #[arg(long)]
    t: Option<usize>,
    /// Signal-to-noise ratio in dB; `inf` disables noise.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    mu_factor: Option<f64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

impl ExperimentArgs {
    fn resolve(&self) -> cwss::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.rate {
            c.rate = v;
        }
        if let Some(v) = &self.rates {
            c.subsample_rates = v.clone();
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = &self.method {
            c.method = v.parse::<Method>()?;
        }
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.t {
            c.t_periods = v;
        }
        if let Some(v) = self.snr_db {
            c.snr_db = v.is_finite().then_some(v);
        }
        if let Some(v) = self.mu_factor {
            c.mu_factor = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sense(args) => {
            let cfg = match args.resolve() {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let result = match run_sense(&cfg, Some(&args.out_dir)) {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            for run in &result.runs {
                println!(
                    "{:5}  converged={}  iterations={}  psd_rel_error={:.4}",
                    run.method.name(),
                    run.converged,
                    run.iterations,
                    run.psd_relative_error
                );
            }
            println!("wrote {}", args.out_dir.display());
            if result.all_converged() {
                ExitCode::SUCCESS
            } else {
                eprintln!("warning: solver did not converge");
                ExitCode::from(EXIT_NONCONVERGED)
            }
        }
        Command::Montecarlo { exp, workers } => {
            let cfg = match exp.resolve() {
                Ok(c) => c,
                Err(e) => return config_error(e),
            };
            let (report, timing) = match run_montecarlo(&cfg, workers, Some(&exp.out_dir)) {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
            println!("rate  method  p_f    p_d");
            for e in &report.entries {
                println!(
                    "{:<5} {:<7} {:<6} {}",
                    e.rate,
                    e.method.name(),
                    fmt(e.p_f),
                    fmt(e.p_d)
                );
            }
            let total: f64 = timing.iter().map(|t| t.seconds).sum();
            println!(
                "{} trials per rate in {total:.1} s; wrote {}",
                cfg.trials,
                exp.out_dir.display()
            );
            ExitCode::SUCCESS
        }
        Command::Bounds {
            n,
            s,
            k,
            delta,
            t,
            c,
            out_dir,
        } => {
            let report = match measurement_bounds(n, s, k, delta, t, c) {
                Ok(r) => r,
                Err(e) => return config_error(e),
            };
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            println!("{json}");
            if let Some(dir) = out_dir {
                if let Err(e) = fs::create_dir_all(&dir)
                    .and_then(|_| fs::write(dir.join("bounds.json"), json + "\n"))
                {
                    return config_error(e);
                }
            }
            ExitCode::SUCCESS
        }
        Command::Selftest => {
            let report = run_selftest();
            print!("{}", report.table());
            if report.elapsed_s > 60.0 {
                eprintln!(
                    "warning: selftest took {:.1} s (budget 60 s)",
                    report.elapsed_s
                );
            }
            if report.passed() {
                println!("all checks passed in {:.1} s", report.elapsed_s);
                ExitCode::SUCCESS
            } else {
                eprintln!("failed: {}", report.failures().join(", "));
                ExitCode::from(EXIT_SELFTEST)
            }
        }
    }
}
