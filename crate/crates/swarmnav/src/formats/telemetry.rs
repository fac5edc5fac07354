//! Training telemetry: one CSV row per update, after a commented header
//! naming the format version and the run's config hash.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use swarmnav_core::ppo::UpdateReport;

use super::fmt_f64;
use crate::error::{CliError, Result};

pub const HEADER: &str = "# swarmnav-telemetry v1";
pub const COLUMNS: &str = "update,env_steps,learning_rate,surrogate,value_loss,entropy,clip_fraction,\
mean_advantage,mean_reward,window_reward,arrived,collided,timed_out";

pub fn row(r: &UpdateReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.update,
        r.env_steps,
        fmt_f64(r.learning_rate),
        fmt_f64(r.surrogate),
        fmt_f64(r.value_loss),
        fmt_f64(r.entropy),
        fmt_f64(r.clip_fraction),
        fmt_f64(r.mean_advantage),
        fmt_f64(r.mean_reward),
        fmt_f64(r.window_reward),
        r.episodes.arrived,
        r.episodes.collided,
        r.episodes.timed_out
    )
}

pub struct TelemetryWriter {
    path: PathBuf,
    file: File,
}

impl TelemetryWriter {
    pub fn create(path: &Path, config_hash: &str) -> Result<Self> {
        let mut file = File::create(path).map_err(CliError::io(path))?;
        writeln!(file, "{HEADER} config_hash={config_hash}\n{COLUMNS}").map_err(CliError::io(path))?;
        Ok(TelemetryWriter {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Reopens an existing file after checking it belongs to the same
    /// configuration, dropping rows past `updates` (written after the
    /// checkpoint being resumed).
    pub fn resume(path: &Path, config_hash: &str, updates: u64) -> Result<Self> {
        let reader = BufReader::new(File::open(path).map_err(CliError::io(path))?);
        let mut kept = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(CliError::io(path))?;
            if i == 0 && line != format!("{HEADER} config_hash={config_hash}") {
                return Err(CliError::Incompatible(format!(
                    "{} was written by a different configuration",
                    path.display()
                )));
            }
            let keep = i < 2
                || line
                    .split(',')
                    .next()
                    .and_then(|u| u.parse::<u64>().ok())
                    .is_some_and(|u| u <= updates);
            if keep {
                kept.push(line);
            }
        }
        let mut text = kept.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(CliError::io(path))?;
        let file = OpenOptions::new().append(true).open(path).map_err(CliError::io(path))?;
        Ok(TelemetryWriter {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn write(&mut self, r: &UpdateReport) -> Result<()> {
        writeln!(self.file, "{}", row(r)).map_err(CliError::io(&self.path))
    }
}
