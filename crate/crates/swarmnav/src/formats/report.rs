//! Evaluation outputs: the report as JSON, raw trial records and the
//! crowdedness histogram as CSV.

use std::path::Path;

use serde::Serialize;
use swarmnav_core::eval::EvalReport;

use super::{fmt_f64, write_text};
use crate::error::Result;

pub const REPORT_FORMAT: &str = "swarmnav-report v1";
pub const RECORDS_HEADER: &str = "# swarmnav-records v1";
pub const CROWD_HEADER: &str = "# swarmnav-crowdedness v1";

#[derive(Serialize)]
struct ReportJson<'a> {
    format: &'static str,
    config_hash: &'a str,
    method: &'a str,
    scenario: &'a str,
    agents: usize,
    trials: u64,
    successes: u64,
    accidents: u64,
    timeouts: u64,
    success_rate: f64,
    collision_rate: f64,
    timeout_rate: f64,
    edp_mean: Option<f64>,
    edp_std: Option<f64>,
    crowd_samples: u64,
    world_steps: u64,
    wall_clock_secs: Option<f64>,
}

/// What was evaluated, for the report header.
pub struct ReportMeta<'a> {
    pub config_hash: &'a str,
    pub method: &'a str,
    pub scenario: &'a str,
    pub agents: usize,
}

pub fn report_json(r: &EvalReport, meta: &ReportMeta) -> String {
    let j = ReportJson {
        format: REPORT_FORMAT,
        config_hash: meta.config_hash,
        method: meta.method,
        scenario: meta.scenario,
        agents: meta.agents,
        trials: r.trials,
        successes: r.successes,
        accidents: r.accidents,
        timeouts: r.timeouts,
        success_rate: r.success_rate,
        collision_rate: r.collision_rate,
        timeout_rate: r.timeout_rate,
        edp_mean: r.edp_mean,
        edp_std: r.edp_std,
        crowd_samples: r.crowd_samples,
        world_steps: r.world_steps,
        wall_clock_secs: r.wall_clock_secs,
    };
    let mut s = serde_json::to_string_pretty(&j).expect("report serializes");
    s.push('\n');
    s
}

pub fn records_csv(r: &EvalReport, config_hash: &str) -> String {
    let mut out = format!("{RECORDS_HEADER} config_hash={config_hash}\nagent,outcome,distance,baseline_length,edp,step\n");
    for rec in &r.records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rec.agent,
            rec.outcome.name(),
            fmt_f64(rec.distance),
            fmt_f64(rec.baseline_length),
            rec.edp.map(fmt_f64).unwrap_or_default(),
            rec.step
        ));
    }
    out
}

pub fn crowdedness_csv(r: &EvalReport, config_hash: &str) -> String {
    let mut out = format!("{CROWD_HEADER} config_hash={config_hash}\nbin,count\n");
    for (bin, count) in r.crowdedness.iter().enumerate() {
        out.push_str(&format!("{bin},{count}\n"));
    }
    out
}

pub fn write_all(dir: &Path, r: &EvalReport, meta: &ReportMeta) -> Result<()> {
    write_text(&dir.join("report.json"), &report_json(r, meta))?;
    write_text(&dir.join("records.csv"), &records_csv(r, meta.config_hash))?;
    write_text(&dir.join("crowdedness.csv"), &crowdedness_csv(r, meta.config_hash))
}
