use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use meanresp_cli::config::ScenarioConfig;
use meanresp_cli::plots::emit_plots_data;
use meanresp_cli::runner::run_scenario;
use meanresp_cli::suites::{run_suite, Overrides, SuiteName};

/// Coverage experiments for semiparametric Bayesian mean-response inference.
#[derive(Parser)]
#[command(name = "meanresp", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario from a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Fit the pilot on the inference data instead of a split.
        #[arg(long)]
        pilot_reuse: bool,
    },
    /// Run a canned suite: smoothness-grid, single-robustness,
    /// dp-vs-density or dp-laplace.
    Suite {
        name: String,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        pilot_reuse: bool,
    },
    /// Tidy per-cell aggregates into a plot-ready long CSV.
    Plots {
        /// Directory holding completed runs or suites.
        results: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse, validate and echo the normalized config.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> meanresp_cli::Result<()> {
    match cli.cmd {
        Cmd::Run {
            config,
            seed,
            out,
            jobs,
            pilot_reuse,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            if pilot_reuse {
                cfg.pilot_reuse = true;
            }
            let output = run_scenario(&cfg, &out, jobs, None)?;
            let s = &output.summary;
            println!(
                "{}: reps {} coverage {:.4} (se {:.4}) sd_ratio {:.3} median_ks {:.4}",
                cfg.name, s.reps, s.coverage, s.coverage_se, s.sd_ratio, s.median_ks
            );
            println!("rows: {}", output.csv_path.display());
            println!("aggregate: {}", output.json_path.display());
            Ok(())
        }
        Cmd::Suite {
            name,
            reps,
            n,
            seed,
            out,
            jobs,
            pilot_reuse,
        } => {
            let suite = SuiteName::from_str(&name)?;
            let ov = Overrides {
                reps,
                n,
                seed,
                pilot_reuse: pilot_reuse.then_some(true),
            };
            run_suite(suite, &ov, &out, jobs)?;
            println!("suite {name} finished; summary in {}", out.display());
            Ok(())
        }
        Cmd::Plots { results, out } => {
            let out = out.unwrap_or_else(|| results.join("plot_data.csv"));
            let rows = emit_plots_data(&results, &out)?;
            println!("{rows} rows -> {}", out.display());
            Ok(())
        }
        Cmd::ValidateConfig { config } => {
            let cfg = ScenarioConfig::load(&config)?;
            cfg.validate()?;
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
    }
}
