//! Experiment driver around the estimation library.
//!
//! Exit codes: 0 on success, 2 for configuration problems, 3 when the
//! offline learning phase fails (rank deficiency / interval inflation), and
//! 4 when a run violates the containment guarantee — the latter always
//! indicates a defect, either in declared noise bounds or in the library.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zonest::learn::learn_model_set;
use zonest::report::compare_csv;
use zonest::scenario::{
    generate_data, matrix_to_rows, montecarlo, run_scenario, ScenarioConfig, Variant,
};
use zonest::Error;

#[derive(Parser)]
#[command(
    name = "zonest",
    about = "Set-based state estimation for unknown linear systems, learned from noisy data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON scenario file; the built-in rotating-target benchmark when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the estimation horizon K.
    #[arg(long)]
    steps: Option<usize>,
    /// Output directory for CSV/JSON results.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl CommonArgs {
    fn load_config(&self) -> Result<ScenarioConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                ScenarioConfig::from_json(&text)?
            }
            None => ScenarioConfig::rotating_target(0),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(steps) = self.steps {
            cfg.steps = steps;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the offline phase and emit the learned model interval as JSON.
    Learn {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Full pipeline: learn, run the selected estimator variants and the
    /// filter baseline, write one CSV per variant plus a summary.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        /// z1, z2, cz1, cz2, or all.
        #[arg(long, default_value = "all")]
        variant: String,
    },
    /// Repeat the scenario over consecutive seeds and aggregate statistics.
    Montecarlo {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of seeded runs.
        #[arg(long)]
        runs: usize,
        /// z1, z2, cz1, cz2, or all.
        #[arg(long, default_value = "all")]
        variant: String,
    },
    /// Run every variant and print set sizes next to the Kalman baseline.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn parse_variants(s: &str) -> Result<Vec<Variant>, Error> {
    if s.eq_ignore_ascii_case("all") {
        Ok(Variant::ALL.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Config(_) | Error::InvalidArgument(_) => 2,
                Error::RankDeficient(_) | Error::Inflation(_) => 3,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Learn { common } => {
            let cfg = common.load_config()?;
            let (td, _) = generate_data(&cfg)?;
            let model = learn_model_set(&td, &cfg.noise_w.to_zonotope()?, cfg.m_bound)?;
            let json = serde_json::json!({
                "seed": cfg.seed,
                "train_len": cfg.train_len,
                "m_bound": model.m_bound,
                "model_lower": matrix_to_rows(model.m_sigma_interval.lower()),
                "model_upper": matrix_to_rows(model.m_sigma_interval.upper()),
                "warnings": model.warnings,
            });
            fs::create_dir_all(&common.out)?;
            let path = common.out.join("learn.json");
            fs::write(&path, serde_json::to_string_pretty(&json)?)?;
            println!("learned model interval written to {}", path.display());
            for w in &model.warnings {
                eprintln!("warning: {w}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { common, variant } => {
            let cfg = common.load_config()?;
            let variants = parse_variants(&variant)?;
            let report = run_scenario(&cfg, &variants)?;
            report.write_to_dir(&common.out)?;
            fs::write(common.out.join("config.json"), cfg.to_json()?)?;
            for v in &report.variants {
                println!(
                    "{:>4} ({}): containment {:>5.1}%  mean radius {:.4}  mean width {:.4}  {:.3} ms/step",
                    v.variant,
                    v.description,
                    100.0 * v.summary.containment_rate,
                    v.summary.mean_radius,
                    v.summary.mean_hull_width,
                    v.summary.mean_step_ms,
                );
            }
            for w in &report.model_warnings {
                eprintln!("warning: {w}");
            }
            if report.containment_ok() {
                println!("results written to {}", common.out.display());
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("containment violation: the true state escaped an estimated set");
                Ok(ExitCode::from(4))
            }
        }
        Command::Montecarlo {
            common,
            runs,
            variant,
        } => {
            let cfg = common.load_config()?;
            let variants = parse_variants(&variant)?;
            let report = montecarlo(&cfg, runs, &variants)?;
            report.write_to_dir(&common.out)?;
            for v in &report.variants {
                println!(
                    "{:>4}: containment {:>7.3}%  radius p50 {:.4}  p90 {:.4}  max {:.4}  {:.3} ms/step",
                    v.variant,
                    100.0 * v.containment_rate,
                    v.radius_p50,
                    v.radius_p90,
                    v.radius_max,
                    v.mean_step_ms,
                );
            }
            if report.variants.iter().all(|v| v.containment_rate >= 1.0) {
                println!("aggregate written to {}", common.out.display());
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("containment violation in at least one run");
                Ok(ExitCode::from(4))
            }
        }
        Command::Compare { common } => {
            let cfg = common.load_config()?;
            let report = run_scenario(&cfg, &Variant::ALL)?;
            report.write_to_dir(&common.out)?;
            fs::write(common.out.join("compare.csv"), compare_csv(&report))?;
            println!("set widths vs the filter's 3-sigma bounds (mean over steps):");
            for v in &report.variants {
                println!(
                    "  {:>4} mean hull width {:.4}",
                    v.variant, v.summary.mean_hull_width
                );
            }
            let n = report.baseline.first().map(|b| b.sigma3_axes.len()).unwrap_or(0);
            for i in 0..n {
                let mean_axis: f64 = report
                    .baseline
                    .iter()
                    .map(|b| 2.0 * b.sigma3_axes[i])
                    .sum::<f64>()
                    / report.baseline.len().max(1) as f64;
                println!("  kf 3-sigma extent, axis {}: {:.4}", i + 1, mean_axis);
            }
            println!("note: filter bounds carry no containment guarantee");
            if report.containment_ok() {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("containment violation: the true state escaped an estimated set");
                Ok(ExitCode::from(4))
            }
        }
    }
}
