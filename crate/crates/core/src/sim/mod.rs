//! Seeded Monte-Carlo campaigns.
//!
//! A [`Campaign`] is built from a flat `key = value` text file and/or
//! individual overrides (the CLI flags go through [`Campaign::set`] too), then
//! handed to one of the runners in [`run`]. Results are written by
//! [`output`] as CSV with a `#`-prefixed metadata block.
//!
//! Config keys (one per line, `#` starts a comment):
//!
//! | key | value |
//! |-----|-------|
//! | `scenario` | `radar-1target`, `radar-2target`, `comm-awgn`, `comm-fading`, `pmepr`, `smax-sweep`, `synthesize` |
//! | `preset` | `full` (default) or `desk` |
//! | `chirp` | `linear`, `sinusoidal` |
//! | `L`, `H`, `S` | scheme parameters; `S` overrides the IS choice |
//! | `is` | `on` / `off`: with IS, `S = s_max(M)` |
//! | `snr` | comma list in dB, `inf` allowed |
//! | `trials`, `seed` | trials per point, 64-bit base seed |
//! | `estimator` | `mf`, `lmmse` |
//! | `detector` | `ml`, `two-step` |
//! | `fading` | `delay_s:power_db:K,...` |
//! | `pmepr_L` | comma list of `L` values |
//! | `m_min`, `m_max` | range of the `s_max` sweep |
//! | `bits` | `0`/`1` string for `synthesize` (random when absent) |
//! | `N`, `N_CP`, `M`, `L_d`, `L_u`, `D`, `f_sample`, `f_c` | waveform overrides |

pub mod output;
pub mod run;

use std::fmt::Write as _;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::channel::{parse_fading_profile, FadingProfile};
use crate::codec::{s_max, SchemeParams};
use crate::comms::DetectorKind;
use crate::error::{Error, Result};
use crate::radar::EstimatorKind;
use crate::waveform::{ChirpProfile, WaveformConfig};

pub use output::{strip_timestamp, write_csv, Metadata};
pub use run::{
    mean_and_standard_error, run_campaign, run_comm_campaign, run_pmepr_campaign, run_radar_campaign, run_smax_sweep,
    synthesize_frame, wilson_interval,
    CampaignOutput, CommRow, PmeprRow, RadarRow, SmaxRow, TrialRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Radar1Target,
    Radar2Target,
    CommAwgn,
    CommFading,
    Pmepr,
    SmaxSweep,
    Synthesize,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Radar1Target,
        Scenario::Radar2Target,
        Scenario::CommAwgn,
        Scenario::CommFading,
        Scenario::Pmepr,
        Scenario::SmaxSweep,
        Scenario::Synthesize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Radar1Target => "radar-1target",
            Scenario::Radar2Target => "radar-2target",
            Scenario::CommAwgn => "comm-awgn",
            Scenario::CommFading => "comm-fading",
            Scenario::Pmepr => "pmepr",
            Scenario::SmaxSweep => "smax-sweep",
            Scenario::Synthesize => "synthesize",
        }
    }

    /// Scenarios that sweep over SNR points.
    pub fn is_sweep(self) -> bool {
        matches!(
            self,
            Scenario::Radar1Target | Scenario::Radar2Target | Scenario::CommAwgn | Scenario::CommFading
        )
    }

    fn default_snr(self) -> Vec<f64> {
        match self {
            Scenario::Radar1Target | Scenario::Radar2Target => vec![-24.0, -22.0, -20.0, -18.0, -16.0, -14.0],
            Scenario::CommAwgn | Scenario::CommFading => vec![-20.0, -18.0, -16.0, -14.0, -12.0, -10.0],
            _ => Vec::new(),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Full,
    Desk,
}

/// Everything needed to rerun a campaign.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub scenario: Scenario,
    pub preset: Preset,
    pub waveform: WaveformConfig,
    pub l: usize,
    pub h: usize,
    /// Explicit separation; `None` derives it from `index_separation`.
    pub s: Option<usize>,
    pub index_separation: bool,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub detector: DetectorKind,
    pub fading: FadingProfile,
    pub pmepr_l: Vec<usize>,
    pub m_range: (usize, usize),
    pub bits: Option<Vec<u8>>,
}

impl Campaign {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            preset: Preset::Full,
            waveform: WaveformConfig::ieee_80211ay(ChirpProfile::Linear),
            l: 2,
            h: 2,
            s: None,
            index_separation: false,
            snr_db: scenario.default_snr(),
            trials: 1000,
            seed: 1,
            estimator: EstimatorKind::Mf,
            detector: DetectorKind::Ml,
            fading: FadingProfile::indoor_three_path(),
            pmepr_l: vec![1, 2, 4],
            m_range: (8, 2048),
            bits: None,
        }
    }

    /// Parse a config file; `scenario` must be present unless given here.
    pub fn from_config_str(text: &str, scenario: Option<Scenario>) -> Result<Self> {
        let entries = parse_config(text)?;
        let scenario = match entries.iter().find(|e| e.key == "scenario") {
            Some(e) => Scenario::from_str(&e.value).map_err(|err| e.error(&err))?,
            None => scenario.ok_or_else(|| Error::Config("config does not name a scenario".into()))?,
        };
        let mut campaign = Campaign::new(scenario);
        // the preset replaces the whole waveform, so it goes first
        for e in entries.iter().filter(|e| e.key == "preset") {
            campaign.set(&e.key, &e.value).map_err(|err| e.error(&err))?;
        }
        for e in entries.iter().filter(|e| e.key != "preset" && e.key != "scenario") {
            campaign.set(&e.key, &e.value).map_err(|err| e.error(&err))?;
        }
        Ok(campaign)
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("key `{key}`: {what} `{value}`"));
        let uint = || value.parse::<usize>().map_err(|_| bad("expected a non-negative integer, got"));
        let float = || value.parse::<f64>().map_err(|_| bad("expected a number, got"));
        match key {
            "scenario" => self.scenario = value.parse()?,
            "preset" => {
                let profile = self.waveform.profile.clone();
                match value {
                    "full" => {
                        self.preset = Preset::Full;
                        self.waveform = WaveformConfig::ieee_80211ay(profile);
                    }
                    "desk" => {
                        self.preset = Preset::Desk;
                        self.waveform = WaveformConfig::desk_scale(profile);
                    }
                    _ => return Err(bad("expected `full` or `desk`, got")),
                }
            }
            "chirp" => self.waveform.profile = value.parse()?,
            "L" => self.l = uint()?,
            "H" => self.h = uint()?,
            "S" => self.s = Some(uint()?),
            "is" => self.index_separation = parse_switch(value).ok_or_else(|| bad("expected on/off, got"))?,
            "snr" => self.snr_db = parse_snr_list(value)?,
            "trials" => self.trials = uint()?,
            "seed" => self.seed = value.parse().map_err(|_| bad("expected a 64-bit unsigned integer, got"))?,
            "estimator" => self.estimator = value.parse()?,
            "detector" => self.detector = value.parse()?,
            "fading" => self.fading = parse_fading_profile(value)?,
            "pmepr_L" => {
                self.pmepr_l = value
                    .split(',')
                    .map(|v| v.trim().parse::<usize>().map_err(|_| bad("expected a list of integers, got")))
                    .collect::<Result<_>>()?
            }
            "m_min" => self.m_range.0 = uint()?,
            "m_max" => self.m_range.1 = uint()?,
            "bits" => {
                let bits = value
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0u8),
                        '1' => Ok(1u8),
                        _ => Err(bad("expected a string of 0 and 1, got")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.bits = Some(bits);
            }
            "N" => self.waveform.n = uint()?,
            "N_CP" => self.waveform.n_cp = uint()?,
            "M" => self.waveform.m = uint()?,
            "L_d" => self.waveform.l_d = value.parse().map_err(|_| bad("expected an integer, got"))?,
            "L_u" => self.waveform.l_u = value.parse().map_err(|_| bad("expected an integer, got"))?,
            "D" => self.waveform.d = float()?,
            "f_sample" => self.waveform.f_sample = float()?,
            "f_c" => self.waveform.f_c = float()?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Effective index separation.
    pub fn separation(&self) -> Result<usize> {
        match self.s {
            Some(s) => Ok(s),
            None if self.index_separation => {
                if self.l != 2 {
                    return Err(Error::Config(format!("index separation needs L = 2, got L = {}", self.l)));
                }
                s_max(self.waveform.m)
            }
            None => Ok(1),
        }
    }

    pub fn scheme(&self) -> Result<SchemeParams> {
        SchemeParams::new(self.waveform.m, self.l, self.h, self.separation()?)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.scenario.is_sweep() && self.snr_db.is_empty() {
            return Err(Error::Config("SNR list must not be empty".into()));
        }
        match self.scenario {
            Scenario::SmaxSweep => {
                let (lo, hi) = self.m_range;
                if lo < 2 || lo > hi {
                    return Err(Error::Config(format!("need 2 <= m_min <= m_max, got {lo}..{hi}")));
                }
            }
            Scenario::Pmepr => {
                self.waveform.validate()?;
                for &l in &self.pmepr_l {
                    SchemeParams::new(self.waveform.m, l, self.h, 1).map_err(|e| Error::Config(e.to_string()))?;
                }
            }
            _ => {
                self.waveform.validate()?;
                self.scheme()?;
            }
        }
        Ok(())
    }

    /// Canonical text of every effective setting; its digest identifies the run.
    pub fn canonical(&self) -> String {
        let w = &self.waveform;
        let mut out = String::new();
        let snr: Vec<String> = self.snr_db.iter().map(|v| format_snr(*v)).collect();
        let pmepr_l: Vec<String> = self.pmepr_l.iter().map(|v| v.to_string()).collect();
        let fading: Vec<String> = self
            .fading
            .taps()
            .iter()
            .map(|t| format!("{:e}:{}:{}", t.delay, t.power_db, t.rician_k))
            .collect();
        let _ = writeln!(out, "scenario={}", self.scenario.name());
        let _ = writeln!(out, "N={} N_CP={} M={} L_d={} L_u={} D={} f_sample={} f_c={} chirp={}",
            w.n, w.n_cp, w.m, w.l_d, w.l_u, w.d, w.f_sample, w.f_c, w.profile.name());
        let _ = writeln!(out, "L={} H={} S={} is={}", self.l, self.h,
            self.separation().map(|s| s.to_string()).unwrap_or_else(|_| "invalid".into()),
            if self.index_separation { "on" } else { "off" });
        let _ = writeln!(out, "snr={} trials={} seed={}", snr.join(","), self.trials, self.seed);
        let _ = writeln!(out, "estimator={} detector={}", self.estimator.name(), self.detector.name());
        let _ = writeln!(out, "fading={} pmepr_L={} m_range={}..{}", fading.join(","), pmepr_l.join(","),
            self.m_range.0, self.m_range.1);
        if let Some(bits) = &self.bits {
            let s: String = bits.iter().map(|b| char::from(b'0' + b)).collect();
            let _ = writeln!(out, "bits={s}");
        }
        out
    }

    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

pub fn format_snr(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

fn parse_switch(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Some(true),
        "off" | "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Comma-separated dB values; `inf` means noiseless.
pub fn parse_snr_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
            _ => match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Config(format!("bad SNR value `{s}`"))),
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl ConfigEntry {
    fn error(&self, err: &Error) -> Error {
        let msg = match err {
            Error::Config(m) | Error::InvalidArgument(m) => m.clone(),
            other => other.to_string(),
        };
        Error::Config(format!("line {}: key `{}`: {msg}", self.line, self.key))
    }
}

/// Split a config file into `key = value` entries.
pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut entries: Vec<ConfigEntry> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if let Some(prev) = entries.iter().find(|e| e.key == key) {
            return Err(Error::Config(format!(
                "line {}: key `{key}` already set on line {}",
                n + 1,
                prev.line
            )));
        }
        entries.push(ConfigEntry { line: n + 1, key: key.to_string(), value: value.trim().to_string() });
    }
    Ok(entries)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sub-seed of one trial: `seed ^ splitmix64(point << 32 | trial)`.
pub fn trial_seed(seed: u64, point: usize, trial: usize) -> u64 {
    seed ^ splitmix64(((point as u64) << 32) | trial as u64)
}

pub fn trial_rng(seed: u64, point: usize, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(seed, point, trial))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_context() {
        let text = "# radar run\nscenario = radar-1target\npreset = desk\nchirp = sinusoidal # comment\nis = on\nsnr = -10, inf\ntrials = 5\n";
        let c = Campaign::from_config_str(text, None).unwrap();
        assert_eq!(c.scenario, Scenario::Radar1Target);
        assert_eq!(c.waveform.m, 181);
        assert_eq!(c.separation().unwrap(), 45);
        assert_eq!(c.snr_db, vec![-10.0, f64::INFINITY]);
        assert_eq!(c.waveform.profile.name(), "sinusoidal");

        let err = Campaign::from_config_str("scenario = pmepr\ntrials = many\n", None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("trials"), "{msg}");
        let err = Campaign::from_config_str("scenario = pmepr\nbogus = 1\n", None).unwrap_err();
        assert!(err.to_string().contains("line 2") && err.to_string().contains("bogus"));
        assert!(Campaign::from_config_str("trials = 1\n", None).is_err());
        assert!(Campaign::from_config_str("scenario = pmepr\nno equals sign\n", None).is_err());
        assert!(Campaign::from_config_str("scenario = pmepr\ntrials = 1\ntrials = 2\n", None).is_err());
    }

    #[test]
    fn validation() {
        let mut c = Campaign::new(Scenario::Radar1Target);
        c.trials = 0;
        assert!(c.validate().is_err());
        c.trials = 1;
        c.snr_db.clear();
        assert!(c.validate().is_err());
        let mut c = Campaign::new(Scenario::CommAwgn);
        c.l = 4;
        c.index_separation = true;
        assert!(c.validate().is_err());
    }

    #[test]
    fn digest_tracks_settings() {
        let a = Campaign::new(Scenario::Pmepr);
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.set("seed", "2").unwrap();
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn trial_seeds_differ() {
        let s: std::collections::HashSet<u64> =
            (0..4).flat_map(|p| (0..1000).map(move |t| trial_seed(9, p, t))).collect();
        assert_eq!(s.len(), 4000);
    }

    #[test]
    fn snr_lists() {
        assert_eq!(parse_snr_list("1,2.5, inf").unwrap(), vec![1.0, 2.5, f64::INFINITY]);
        assert!(parse_snr_list("nan").is_err());
        assert!(parse_snr_list("x").is_err());
    }
}
