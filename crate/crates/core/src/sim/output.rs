//! CSV output with a `#` metadata block.
//!
//! The first line is always `# generated_unix: <seconds>`; it is the only
//! line that changes between reruns of the same campaign.

use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use super::{format_snr, Campaign, Scenario};
use crate::error::Result;

pub const TIMESTAMP_KEY: &str = "generated_unix";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn for_campaign(c: &Campaign) -> Self {
        let mut m = Metadata::default();
        let snr: Vec<String> = c.snr_db.iter().map(|v| format_snr(*v)).collect();
        m.push("tool", concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")));
        m.push("scenario", c.scenario.name());
        m.push("config_sha256", c.digest());
        m.push("seed", c.seed.to_string());
        m.push("trials_per_point", c.trials.to_string());
        m.push("snr_db", snr.join(","));
        m.push("chirp", c.waveform.profile.name());
        m.push("estimator", c.estimator.name());
        m.push("detector", c.detector.name());
        m.push("is", if c.index_separation { "on" } else { "off" });
        match c.scenario {
            Scenario::Radar1Target | Scenario::Radar2Target => {
                m.push("rmse_matching", "estimates and targets paired by descending |coefficient|")
            }
            Scenario::CommAwgn | Scenario::CommFading => {
                m.push("equalizer", "conjugate composite response conj(h_k c_k), channel known")
            }
            _ => {}
        }
        for line in c.canonical().lines() {
            m.push("config", line);
        }
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

/// Write the metadata block and the rows (header row first).
pub fn write_csv<W: Write, T: Serialize>(mut out: W, meta: &Metadata, rows: &[T]) -> Result<()> {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    writeln!(out, "# {TIMESTAMP_KEY}: {now}")?;
    for (k, v) in &meta.entries {
        writeln!(out, "# {k}: {v}")?;
    }
    let mut writer = csv::Writer::from_writer(&mut out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// The file without its timestamp line, for rerun comparisons.
pub fn strip_timestamp(text: &str) -> String {
    let prefix = format!("# {TIMESTAMP_KEY}:");
    text.lines()
        .filter(|l| !l.starts_with(&prefix))
        .map(|l| format!("{l}\n"))
        .collect()
}
