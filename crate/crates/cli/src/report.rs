//! Report files: JSON Lines records, a flat CSV table and a text summary.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::run::{Record, Status, CAVEAT};

pub const RECORDS_FILE: &str = "reports.jsonl";
pub const TABLE_FILE: &str = "table.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Serialize)]
struct Row<'a> {
    scenario: &'a str,
    mode: &'a str,
    p: f64,
    resolution: usize,
    status: &'a str,
    lhs: Option<f64>,
    rhs: Option<f64>,
    ratio: Option<f64>,
    lhs_hess: Option<f64>,
    t_laplacian: Option<f64>,
    t_du: Option<f64>,
    t_du_2p_sq: Option<f64>,
    t_dist: Option<f64>,
    r_hat: Option<f64>,
    centers: Option<usize>,
    multiplicity: Option<u32>,
    elapsed_ms: f64,
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Ok => "ok",
        Status::Error => "error",
        Status::Violated => "violated",
    }
}

pub fn jsonl(records: &[Record]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn csv_table(records: &[Record]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        let t = r.terms;
        w.serialize(Row {
            scenario: &r.scenario,
            mode: r.mode.name(),
            p: r.p,
            resolution: r.resolution,
            status: status_name(r.status),
            lhs: r.lhs,
            rhs: r.rhs,
            ratio: r.ratio,
            lhs_hess: t.map(|t| t.lhs_hess),
            t_laplacian: t.map(|t| t.t_laplacian),
            t_du: t.map(|t| t.t_du),
            t_du_2p_sq: t.map(|t| t.t_du_2p_sq),
            t_dist: t.map(|t| t.t_dist),
            r_hat: r.cover.as_ref().map(|c| c.r_hat),
            centers: r.cover.as_ref().map(|c| c.centers),
            multiplicity: r.cover.as_ref().map(|c| c.multiplicity),
            elapsed_ms: r.elapsed_ms,
        })?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn num(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |v| format!("{v:.6e}"))
}

/// Largest relative change of the ratio between consecutive ladder levels.
pub fn ratio_drift(records: &[&Record]) -> Option<f64> {
    let ratios: Vec<f64> = records.iter().filter(|r| r.status != Status::Error).filter_map(|r| r.ratio).collect();
    if ratios.len() < 2 {
        return None;
    }
    let drift = ratios
        .windows(2)
        .map(|w| {
            let scale = w[0].abs().max(w[1].abs());
            if scale == 0.0 {
                0.0
            } else {
                (w[1] - w[0]).abs() / scale
            }
        })
        .fold(0.0, f64::max);
    Some(drift)
}

/// Human-readable summary without timing, so reruns compare equal.
pub fn summary(records: &[Record]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<24} {:<10} {:>5} {:>5} {:<8} {:>13} {:>13} {:>13}", "scenario", "mode", "p", "res", "status", "lhs", "rhs", "ratio");
    for r in records {
        let _ = writeln!(
            s,
            "{:<24} {:<10} {:>5} {:>5} {:<8} {:>13} {:>13} {:>13}",
            r.scenario,
            r.mode.name(),
            r.p,
            r.resolution,
            status_name(r.status),
            num(r.lhs),
            num(r.rhs),
            num(r.ratio)
        );
        if let Some(e) = &r.error {
            let _ = writeln!(s, "    error: {e}");
        }
        for v in &r.violations {
            let _ = writeln!(s, "    violated: {v}");
        }
    }
    let mut groups: Vec<(String, String, f64)> = Vec::new();
    for r in records {
        let key = (r.scenario.clone(), r.mode.name().to_string(), r.p);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (scenario, mode, p) in groups {
        let members: Vec<&Record> =
            records.iter().filter(|r| r.scenario == scenario && r.mode.name() == mode && r.p == p).collect();
        if let Some(d) = ratio_drift(&members) {
            let levels: Vec<String> = members.iter().map(|r| r.resolution.to_string()).collect();
            let _ = writeln!(s, "ratio drift {scenario} {mode} p={p} over {}: {:.3}%", levels.join(" -> "), 100.0 * d);
        }
    }
    let errors = records.iter().filter(|r| r.status == Status::Error).count();
    let violated = records.iter().filter(|r| r.status == Status::Violated).count();
    let _ = writeln!(s, "{} runs, {errors} errored, {violated} violated invariants", records.len());
    let _ = writeln!(s, "note: {CAVEAT}");
    s
}

pub fn all_ok(records: &[Record]) -> bool {
    records.iter().all(|r| r.status == Status::Ok)
}

/// Writes through a temporary file and renames it into place.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_reports(dir: &Path, records: &[Record]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_atomic(&dir.join(RECORDS_FILE), &jsonl(records)?)?;
    write_atomic(&dir.join(TABLE_FILE), &csv_table(records)?)?;
    write_atomic(&dir.join(SUMMARY_FILE), &summary(records))?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).with_context(|| format!("{}:{}: malformed record", path.display(), k + 1))?;
        out.push(rec);
    }
    Ok(out)
}
