//! CSV and JSON emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::trial::TrialRecord;

use super::pipeline::{ExperimentReport, PriorBankRun};

pub const TRIALS_HEADER: &str =
    "experiment_id,method,seed,phase,trial,arm,p1,p2,p3,p4,p5,p6,p7,p8,p9,\
reward,best_posterior_mean,max_ei,stopped_reason";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Appends one row per record. Parameters beyond the space's dimension are
/// left empty.
pub fn write_trial_rows(out: &mut String, experiment_id: &str, method: &str, rows: &[TrialRecord]) {
    for r in rows {
        let _ = write!(
            out,
            "{experiment_id},{method},{},{},{},{}",
            r.seed,
            r.phase.as_str(),
            r.trial,
            opt(r.arm)
        );
        for i in 0..9 {
            let _ = write!(out, ",{}", opt(r.params.values().get(i)));
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            r.reward,
            opt(r.best_posterior_mean),
            opt(r.max_ei),
            opt(r.stopped_reason.map(|s| s.as_str()))
        );
    }
}

pub fn trials_csv(report: &ExperimentReport) -> String {
    let mut out = format!("{TRIALS_HEADER}\n");
    write_trial_rows(
        &mut out,
        &report.experiment_id,
        report.method.as_str(),
        &report.rows,
    );
    out
}

pub fn summary_json(report: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub trials: PathBuf,
    pub summary: PathBuf,
}

/// Writes `<id>_<method>_trials.csv` and `<id>_<method>_summary.json`
/// into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<ReportPaths> {
    fs::create_dir_all(dir)?;
    let stem = format!("{}_{}", report.experiment_id, report.method.as_str());
    let paths = ReportPaths {
        trials: dir.join(format!("{stem}_trials.csv")),
        summary: dir.join(format!("{stem}_summary.json")),
    };
    fs::write(&paths.trials, trials_csv(report))?;
    fs::write(&paths.summary, summary_json(report))?;
    Ok(paths)
}

/// Training rows of a prior-bank build; the experiment id column carries
/// `<experiment_id>:<garment>`.
pub fn prior_bank_trials_csv(experiment_id: &str, run: &PriorBankRun) -> String {
    let mut out = format!("{TRIALS_HEADER}\n");
    let rows = run.log.records();
    let mut start = 0;
    while start < rows.len() {
        let garment = &run.garments[start];
        let end = start
            + run.garments[start..]
                .iter()
                .take_while(|g| *g == garment)
                .count();
        write_trial_rows(
            &mut out,
            &format!("{experiment_id}:{garment}"),
            "prior_bank",
            &rows[start..end],
        );
        start = end;
    }
    out
}
