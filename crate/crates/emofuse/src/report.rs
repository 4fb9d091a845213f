//! `report.txt`: comma-separated lines grouped by their first field.
//!
//! Stages only own some groups, so writing merges: groups a stage produces
//! replace what was there, every other line is kept. Groups always appear in
//! the order of [`GROUP_ORDER`]; unknown prefixes trail in file order.

use std::path::Path;

use emofuse_core::evaluate::Metrics;
use emofuse_core::interpret::PfiReport;

use crate::dataio::DataError;

pub const REPORT_NAME: &str = "report.txt";

pub const GROUP_ORDER: [&str; 5] = ["config", "weights", "metrics", "pfi", "contribution"];

fn group_of(line: &str) -> &str {
    line.split(',').next().unwrap_or("")
}

/// Merges `updates` (group name, replacement lines) into `existing`.
pub fn merge(existing: &str, updates: &[(&str, Vec<String>)]) -> String {
    let mut lines: Vec<&str> = existing.lines().filter(|l| !l.is_empty()).collect();
    lines.retain(|l| !updates.iter().any(|(g, _)| *g == group_of(l)));
    let mut out = String::new();
    for group in GROUP_ORDER {
        let kept = lines.iter().filter(|l| group_of(l) == group).copied();
        let fresh = updates
            .iter()
            .filter(|(g, _)| *g == group)
            .flat_map(|(_, v)| v.iter().map(String::as_str));
        for line in kept.chain(fresh) {
            out.push_str(line);
            out.push('\n');
        }
    }
    for line in lines.iter().filter(|l| !GROUP_ORDER.contains(&group_of(l))) {
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn update_report(out_dir: &Path, updates: &[(&str, Vec<String>)]) -> Result<(), DataError> {
    let path = out_dir.join(REPORT_NAME);
    let existing = match std::fs::read_to_string(&path) {
        Ok(text) => text,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(source) => return Err(DataError::Io { path, source }),
    };
    std::fs::write(&path, merge(&existing, updates))
        .map_err(|source| DataError::Io { path, source })
}

pub fn metrics_line(model: &str, m: &Metrics) -> String {
    format!(
        "metrics,{model},{:.4},{:.4},{:.4},{:.4}",
        m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1
    )
}

pub fn weights_line(w1: f64, w2: f64) -> String {
    format!("weights,{w1:.2},{w2:.2}")
}

pub fn pfi_lines(report: &PfiReport) -> Vec<String> {
    [("rppg", &report.rppg), ("visual", &report.visual)]
        .into_iter()
        .map(|(name, g)| {
            let mut line = format!("pfi,{name},{:.4}", g.mean_drop);
            for d in &g.per_repeat {
                line.push_str(&format!(",{d:.4}"));
            }
            line
        })
        .collect()
}

pub fn contribution_lines(report: &PfiReport) -> Vec<String> {
    let c = &report.contributions;
    vec![
        format!("contribution,rppg,{:.4}", c.rppg_pct),
        format!("contribution,visual,{:.4}", c.visual_pct),
    ]
}
