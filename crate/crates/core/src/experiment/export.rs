use std::path::{Path, PathBuf};

use super::{ExperimentReport, OutputFormat};
use crate::balancer::OptimizationTrace;
use crate::bandit::SimulationTrace;
use crate::error::{Error, Result};

pub const PROFILES_CSV: &str = "profiles.csv";
pub const BASELINE_CSV: &str = "baseline_profiles.csv";
pub const OPTIMIZER_CSV: &str = "optimizer.csv";
pub const REPORT_JSON: &str = "report.json";

/// Positional decimal with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // Let the exponent come from the rounded value so 9.999999999 -> 10.0000000.
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

fn push_row(out: &mut String, fields: impl IntoIterator<Item = String>) {
    let mut first = true;
    for f in fields {
        if !first {
            out.push(',');
        }
        out.push_str(&f);
        first = false;
    }
    out.push('\n');
}

/// `round,f_1,...,f_n,mean_reward`, one row per round (0-based rounds).
pub fn profiles_csv(trace: &SimulationTrace, arms: usize) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        std::iter::once("round".to_string())
            .chain((1..=arms).map(|i| format!("f_{i}")))
            .chain(std::iter::once("mean_reward".to_string())),
    );
    for (t, (profile, reward)) in trace.profiles.iter().zip(&trace.mean_reward).enumerate() {
        push_row(
            &mut out,
            std::iter::once(t.to_string())
                .chain(profile.as_slice().iter().map(|&x| format_sig9(x)))
                .chain(std::iter::once(format_sig9(*reward))),
        );
    }
    out
}

/// `iter,objective_sq,objective,alpha_1..alpha_n,f_1..f_n`; `objective_sq`
/// is `|f - f*|^2` and `objective` is `|f - f*|`.
pub fn optimizer_csv(trace: &OptimizationTrace, arms: usize) -> String {
    let mut out = String::new();
    push_row(
        &mut out,
        ["iter", "objective_sq", "objective"]
            .into_iter()
            .map(String::from)
            .chain((1..=arms).map(|i| format!("alpha_{i}")))
            .chain((1..=arms).map(|i| format!("f_{i}"))),
    );
    for r in &trace.records {
        let mut row = vec![
            r.iteration.to_string(),
            format_sig9(r.objective_sq),
            format_sig9(r.distance),
        ];
        row.extend(r.alpha.iter().map(|&x| format_sig9(x)));
        row.extend(r.profile.iter().map(|&x| format_sig9(x)));
        push_row(&mut out, row);
    }
    out
}

/// Writes the report files into `dir` and returns their paths. Existing
/// files are only replaced when `overwrite` is set; the check happens
/// before anything is written.
pub fn export_report(
    report: &ExperimentReport,
    dir: &Path,
    format: OutputFormat,
    overwrite: bool,
) -> Result<Vec<PathBuf>> {
    let arms = report.network.servers;
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    if format == OutputFormat::Csv {
        files.push((dir.join(PROFILES_CSV), profiles_csv(&report.adjusted, arms)));
        files.push((dir.join(BASELINE_CSV), profiles_csv(&report.baseline, arms)));
        files.push((
            dir.join(OPTIMIZER_CSV),
            optimizer_csv(&report.optimizer, arms),
        ));
    }
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidConfig(format!("cannot serialize report: {e}")))?;
    files.push((dir.join(REPORT_JSON), json));

    if !overwrite {
        if let Some((path, _)) = files.iter().find(|(p, _)| p.exists()) {
            return Err(Error::WouldOverwrite(path.clone()));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (path, body) in files {
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
