use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use flingopt::exec_stop::stopping_table_csv;
use flingopt::harness::{self, ExperimentConfig};
use flingopt::{Error, FlingParams, Result};

#[derive(Parser)]
#[command(
    name = "flingopt",
    version,
    about = "Bandit + CEM fling-parameter optimization on a synthetic garment simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the training family and write per-arm statistics.
    PriorBank(Common),
    /// Run the configured method on the test garment.
    Run {
        #[command(flatten)]
        common: Common,
        /// Also write the fling trajectory of the best action.
        #[arg(long)]
        emit_trajectory: bool,
    },
    /// Run every method on the test garment.
    Compare(Common),
    /// Bootstrap stopping-time curves for the execution rules.
    ExecStopping(Common),
    /// Trajectory samples and cycle timing for one parameter vector.
    Trajectory {
        #[command(flatten)]
        common: Common,
        /// Comma-separated parameter values; range midpoints when omitted.
        #[arg(long, allow_hyphen_values = true)]
        params: Option<String>,
    },
}

fn load_config(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", path.display()),
                ))
            })?;
            ExperimentConfig::from_toml_str(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    Ok((cfg, out))
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<String>) -> Result<()> {
    fs::write(&path, contents)?;
    written.push(path.display().to_string());
    Ok(())
}

fn trajectory_files(
    cfg: &ExperimentConfig,
    params: &FlingParams,
    dir: &Path,
    stem: &str,
    written: &mut Vec<String>,
) -> Result<()> {
    let (profile, timing) = harness::plan_trajectory(cfg, params)?;
    write(
        dir.join(format!("{stem}_trajectory.csv")),
        &profile.to_csv(),
        written,
    )?;
    let meta = json!({
        "params": params,
        "segment_durations": profile.segment_durations,
        "p3_time": profile.p3_time(),
        "waypoints": profile.plan.waypoints,
        "timing": timing,
    });
    write(
        dir.join(format!("{stem}_timing.json")),
        &format!("{}\n", serde_json::to_string_pretty(&meta).expect("json")),
        written,
    )
}

fn parse_params(text: &str) -> Result<FlingParams> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("parameter `{}`: {e}", f.trim())))
        })
        .collect::<Result<Vec<f64>>>()
        .map(FlingParams)
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    let mut written = Vec::new();
    match cli.command {
        Command::PriorBank(common) => {
            let (cfg, out) = load_config(&common)?;
            fs::create_dir_all(&out)?;
            let run = harness::build_prior_bank(&cfg)?;
            write(
                out.join(format!("{}_prior_bank.json", cfg.experiment_id)),
                &(run.bank.to_json_string() + "\n"),
                &mut written,
            )?;
            write(
                out.join(format!("{}_prior_bank_trials.csv", cfg.experiment_id)),
                &harness::prior_bank_trials_csv(&cfg.experiment_id, &run),
                &mut written,
            )?;
            Ok(
                json!({ "command": "prior-bank", "garments": run.bank.0.len(), "trials": run.log.len(), "files": written }),
            )
        }
        Command::Run {
            common,
            emit_trajectory,
        } => {
            let (cfg, out) = load_config(&common)?;
            let report = harness::run_pipeline(&cfg)?;
            let paths = harness::emit_report(&report, &out)?;
            written.push(paths.trials.display().to_string());
            written.push(paths.summary.display().to_string());
            if emit_trajectory {
                let stem = format!("{}_{}", cfg.experiment_id, cfg.method.as_str());
                trajectory_files(&cfg, &report.summary.best_params, &out, &stem, &mut written)?;
            }
            Ok(json!({ "command": "run", "summary": report.summary, "files": written }))
        }
        Command::Compare(common) => {
            let (cfg, out) = load_config(&common)?;
            let reports = harness::compare(&cfg, None)?;
            let mut table =
                String::from("method,total_trials,best_observed,true_mean,oracle_value\n");
            for r in &reports {
                let paths = harness::emit_report(r, &out)?;
                written.push(paths.trials.display().to_string());
                written.push(paths.summary.display().to_string());
                let s = &r.summary;
                table.push_str(&format!(
                    "{},{},{},{},{}\n",
                    s.method, s.total_trials, s.best_observed, s.true_mean, s.oracle_value
                ));
            }
            write(
                out.join(format!("{}_compare.csv", cfg.experiment_id)),
                &table,
                &mut written,
            )?;
            let summaries: Vec<_> = reports.iter().map(|r| &r.summary).collect();
            Ok(json!({ "command": "compare", "summaries": summaries, "files": written }))
        }
        Command::ExecStopping(common) => {
            let (cfg, out) = load_config(&common)?;
            fs::create_dir_all(&out)?;
            let analysis = harness::exec_stopping(&cfg, None)?;
            write(
                out.join(format!("{}_stopping.csv", cfg.experiment_id)),
                &stopping_table_csv(&analysis.rows),
                &mut written,
            )?;
            write(
                out.join(format!("{}_stopping.json", cfg.experiment_id)),
                &format!(
                    "{}\n",
                    serde_json::to_string_pretty(&analysis).expect("json")
                ),
                &mut written,
            )?;
            Ok(json!({ "command": "exec-stopping", "rows": analysis.rows, "files": written }))
        }
        Command::Trajectory { common, params } => {
            let (cfg, out) = load_config(&common)?;
            fs::create_dir_all(&out)?;
            let bounds = flingopt::ParamBounds::from_table(cfg.parameterization, &cfg.ranges)?;
            let p = match params {
                Some(text) => parse_params(&text)?,
                None => bounds.midpoint(),
            };
            trajectory_files(&cfg, &p, &out, &cfg.experiment_id, &mut written)?;
            Ok(json!({ "command": "trajectory", "files": written }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = json!({ "error": { "kind": "usage", "message": e.render().to_string() } });
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(v) => {
            // a closed stdout (e.g. piped into `head`) is not a failure
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&v).expect("json")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let err = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{err}");
            ExitCode::FAILURE
        }
    }
}
