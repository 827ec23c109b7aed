use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use edgemf::analysis::uniqueness_check;
use edgemf::balancer::project_simplex;
use edgemf::experiment::{
    calibrate_dmax, export_report, run_experiment, ExperimentConfig, OutputFormat, PRESETS,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "edgemf",
    version,
    about = "Mean-field bandit offloading experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment: calibration, baseline, optimization, final run.
    Run {
        #[command(flatten)]
        source: Source,
        /// Output directory (defaults to the config's `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace existing output files.
        #[arg(long)]
        overwrite: bool,
        /// `csv` writes the CSV series and report.json, `json` only report.json.
        #[arg(long)]
        format: Option<OutputFormat>,
    },
    /// Calibrate the deadline by probing the communication model.
    Calibrate {
        #[command(flatten)]
        source: Source,
    },
    /// Evaluate the steady-state uniqueness condition.
    CheckUniqueness {
        #[command(flatten)]
        source: Source,
    },
    /// Project a vector onto the probability simplex.
    Project {
        #[arg(required = true, allow_negative_numbers = true, num_args = 1..)]
        values: Vec<f64>,
    },
}

#[derive(Args)]
struct Source {
    /// Preset name or path to a TOML/JSON config file.
    #[arg(value_name = "PRESET|CONFIG")]
    experiment: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    agents: Option<usize>,
    /// Server count; switches to the published target for 2 or 8 servers.
    #[arg(long)]
    arms: Option<usize>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = if PRESETS.contains(&self.experiment.as_str()) {
            ExperimentConfig::preset(&self.experiment)?
        } else if Path::new(&self.experiment).is_file() {
            ExperimentConfig::load(Path::new(&self.experiment))?
        } else {
            return Err(edgemf::Error::UnknownPreset(self.experiment.clone()).into());
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(agents) = self.agents {
            cfg = cfg.with_agents(agents);
        }
        if let Some(arms) = self.arms {
            cfg = cfg.with_arms(arms)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            source,
            out,
            overwrite,
            format,
        } => {
            let mut cfg = source.load()?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(format) = format {
                cfg.format = format;
            }
            let report = run_experiment(&cfg)?;
            let files = export_report(&report, &cfg.output_dir, cfg.format, overwrite)
                .with_context(|| format!("writing results to {}", cfg.output_dir.display()))?;
            let last = report
                .optimizer
                .records
                .last()
                .expect("at least one iteration");
            print_json(&json!({
                "name": cfg.name,
                "deadline": report.network.deadline,
                "uniqueness_holds": report.uniqueness.holds,
                "baseline_profile": report.baseline_profile,
                "final_alpha": report.final_alpha,
                "final_profile": report.final_profile,
                "target": cfg.target,
                "iterations": report.optimizer.records.len(),
                "converged": report.optimizer.converged,
                "last_objective_sq": last.objective_sq,
                "seconds": report.timings.total_s,
                "files": files,
            }))
        }
        Command::Calibrate { source } => {
            let cfg = source.load()?;
            let network = cfg.network.resolve(1.0)?;
            let cal = calibrate_dmax(&network, cfg.probe_rounds, cfg.seed)?;
            print_json(&serde_json::to_value(cal)?)
        }
        Command::CheckUniqueness { source } => {
            let cfg = source.load()?;
            let network = match cfg.network.deadline {
                Some(_) => cfg.network.resolve(f64::NAN)?,
                None => {
                    let probe = cfg.network.resolve(1.0)?;
                    let cal = calibrate_dmax(&probe, cfg.probe_rounds, cfg.seed)?;
                    cfg.network.resolve(cal.deadline)?
                }
            };
            let report = uniqueness_check(&network);
            print_json(&json!({ "deadline": network.deadline, "report": report }))
        }
        Command::Project { values } => {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(edgemf::Error::InvalidConfig("values must be finite".into()).into());
            }
            print_json(&json!(project_simplex(&values).as_slice()))
        }
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    err.chain()
        .find_map(|e| e.downcast_ref::<edgemf::Error>())
        .map_or("error", edgemf::Error::kind)
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            // --help and --version
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => return fail("usage", err.to_string().trim_end().to_string()),
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => fail(error_kind(&err), format!("{err:#}")),
    }
}
