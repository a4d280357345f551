//! Campaign runners. Trials run on the rayon pool and are collected in trial
//! order, so the reduction (and the CSV) does not depend on the pool size.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{format_snr, trial_rng, trial_seed, Campaign, Scenario};
use crate::channel::{
    add_awgn, apply_multipath, apply_radar_channel, multipath_response, radar_cfr, realize_fading, snr_to_sigma2,
    RadarScene, Target,
};
use crate::codec::{count_constrained, s_max, Codec, IndexMessage, SchemeParams};
use crate::comms::{ml_detect, two_step_detect, DetectorKind, ErrorCounts, Receiver};
use crate::error::{Error, Result};
use crate::radar::{matched_squared_errors, DelayGrid, RangeEstimator};
use crate::waveform::{FrequencyFrame, TimeFrame, Waveform, PMEPR_OVERSAMPLE};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadarRow {
    pub snr_db: f64,
    pub rmse_m: f64,
    pub trials: usize,
    pub estimator: &'static str,
    pub is: &'static str,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub rmse_ci95_low: f64,
    pub rmse_ci95_high: f64,
    pub boundary_hits: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommRow {
    pub snr_db: f64,
    pub ber: f64,
    pub bler: f64,
    pub trials: usize,
    pub detector: &'static str,
    pub is: &'static str,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub ber_ci95_low: f64,
    pub ber_ci95_high: f64,
    pub bler_ci95_low: f64,
    pub bler_ci95_high: f64,
    pub bit_errors: u64,
    pub block_errors: u64,
    pub unused_codewords: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmeprRow {
    pub profile: String,
    #[serde(rename = "L")]
    pub l: usize,
    pub max_pmepr_db: f64,
    /// Mean of the per-message dB values.
    pub mean_pmepr_db: f64,
    pub messages: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmaxRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub s_max: usize,
    pub count_at_smax: u64,
    pub p1: u32,
}

/// One Monte-Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub scenario: &'static str,
    pub point: usize,
    pub trial: usize,
    pub seed: u64,
    pub snr_db: f64,
    /// Target ranges/coefficients, or the transmitted indices and bits.
    pub truth: String,
    pub estimate: String,
    /// Mean squared range error (m^2) or bit errors.
    pub metric: f64,
}

#[derive(Debug, Clone)]
pub enum CampaignOutput {
    Radar { rows: Vec<RadarRow>, trials: Vec<TrialRecord> },
    Comm { rows: Vec<CommRow>, trials: Vec<TrialRecord> },
    Pmepr(Vec<PmeprRow>),
    Smax(Vec<SmaxRow>),
    Frame { frame: TimeFrame, message: IndexMessage },
}

impl CampaignOutput {
    pub fn trial_records(&self) -> &[TrialRecord] {
        match self {
            CampaignOutput::Radar { trials, .. } | CampaignOutput::Comm { trials, .. } => trials,
            _ => &[],
        }
    }
}

pub fn run_campaign(campaign: &Campaign) -> Result<CampaignOutput> {
    match campaign.scenario {
        Scenario::Radar1Target | Scenario::Radar2Target => {
            let (rows, trials) = run_radar_campaign(campaign)?;
            Ok(CampaignOutput::Radar { rows, trials })
        }
        Scenario::CommAwgn | Scenario::CommFading => {
            let (rows, trials) = run_comm_campaign(campaign)?;
            Ok(CampaignOutput::Comm { rows, trials })
        }
        Scenario::Pmepr => run_pmepr_campaign(campaign).map(CampaignOutput::Pmepr),
        Scenario::SmaxSweep => run_smax_sweep(campaign.m_range.0, campaign.m_range.1).map(CampaignOutput::Smax),
        Scenario::Synthesize => {
            let (frame, message) = synthesize_frame(campaign)?;
            Ok(CampaignOutput::Frame { frame, message })
        }
    }
}

fn random_message<R: Rng + ?Sized>(codec: &Codec, rng: &mut R) -> Result<IndexMessage> {
    let bits: Vec<u8> = (0..codec.capacity().p).map(|_| rng.random_range(0..2u8)).collect();
    codec.encode(&bits)
}

fn bit_string(bits: &[u8]) -> String {
    bits.iter().map(|b| char::from(b'0' + b)).collect()
}

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn is_label(campaign: &Campaign, s: usize) -> &'static str {
    if campaign.index_separation || s > 1 {
        "on"
    } else {
        "off"
    }
}

/// Draw a scene for the radar scenarios.
pub fn draw_scene<R: Rng + ?Sized>(scenario: Scenario, rng: &mut R) -> Result<RadarScene> {
    match scenario {
        Scenario::Radar1Target => RadarScene::new(vec![Target::new(rng.random_range(0.5..6.5), -1.0)]),
        Scenario::Radar2Target => RadarScene::new(vec![
            Target::new(rng.random_range(1.3..3.3), -1.0),
            Target::new(rng.random_range(3.6..5.6), -0.5),
        ]),
        other => Err(Error::Config(format!("{} is not a radar scenario", other.name()))),
    }
}

struct RadarTrial {
    squared: Vec<f64>,
    boundary: bool,
    record: TrialRecord,
}

/// Range RMSE per SNR point.
pub fn run_radar_campaign(campaign: &Campaign) -> Result<(Vec<RadarRow>, Vec<TrialRecord>)> {
    campaign.validate()?;
    let scenario = campaign.scenario;
    if !matches!(scenario, Scenario::Radar1Target | Scenario::Radar2Target) {
        return Err(Error::Config(format!("{} is not a radar scenario", scenario.name())));
    }
    let config = &campaign.waveform;
    let codec = Codec::new(campaign.scheme()?)?;
    let waveform = Waveform::new(config.clone())?;
    let estimator = RangeEstimator::new(config.clone(), DelayGrid::for_config(config))?;
    let targets = if scenario == Scenario::Radar1Target { 1 } else { 2 };

    let mut rows = Vec::with_capacity(campaign.snr_db.len());
    let mut records = Vec::new();
    for (point, &snr) in campaign.snr_db.iter().enumerate() {
        let trials: Vec<RadarTrial> = (0..campaign.trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = trial_rng(campaign.seed, point, trial);
                let msg = random_message(&codec, &mut rng)?;
                let w = waveform.frequency_symbols(&msg)?;
                let scene = draw_scene(scenario, &mut rng)?;
                let h = radar_cfr(&scene, config)?;
                let sigma2 = snr_to_sigma2(snr, &w)?;
                let b = apply_radar_channel(&w, &h, sigma2, &mut rng)?;
                let estimates = estimator.estimate_multi(&b, &w, targets, sigma2, campaign.estimator)?;
                let squared = matched_squared_errors(&estimates, &scene)?;
                let record = TrialRecord {
                    scenario: scenario.name(),
                    point,
                    trial,
                    seed: trial_seed(campaign.seed, point, trial),
                    snr_db: snr,
                    truth: join(scene.targets().iter().map(|t| format!("{}@{}", t.distance, t.coefficient))),
                    estimate: join(estimates.iter().map(|e| format!("{}@{}", e.range_hat, e.a_hat))),
                    metric: squared.iter().sum::<f64>() / squared.len() as f64,
                };
                Ok(RadarTrial { squared, boundary: estimates.iter().any(|e| e.at_boundary), record })
            })
            .collect::<Result<_>>()?;
        let per_trial: Vec<f64> = trials.iter().map(|t| t.record.metric).collect();
        let (mse, se) = mean_and_standard_error(&per_trial);
        let count: usize = trials.iter().map(|t| t.squared.len()).sum();
        let total: f64 = trials.iter().flat_map(|t| &t.squared).sum();
        rows.push(RadarRow {
            snr_db: snr,
            rmse_m: (total / count as f64).sqrt(),
            trials: campaign.trials,
            estimator: campaign.estimator.name(),
            is: is_label(campaign, codec.params().s()),
            l: campaign.l,
            s: codec.params().s(),
            rmse_ci95_low: (mse - Z95 * se).max(0.0).sqrt(),
            rmse_ci95_high: (mse + Z95 * se).sqrt(),
            boundary_hits: trials.iter().filter(|t| t.boundary).count(),
            seed: campaign.seed,
        });
        records.extend(trials.into_iter().map(|t| t.record));
    }
    Ok((rows, records))
}

/// Sample mean and its standard error.
pub fn mean_and_standard_error(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0.0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

struct CommTrial {
    counts: ErrorCounts,
    unused: bool,
    record: TrialRecord,
}

/// BER/BLER per SNR point over AWGN or the configured fading profile.
pub fn run_comm_campaign(campaign: &Campaign) -> Result<(Vec<CommRow>, Vec<TrialRecord>)> {
    campaign.validate()?;
    let scenario = campaign.scenario;
    let fading = match scenario {
        Scenario::CommAwgn => false,
        Scenario::CommFading => true,
        other => return Err(Error::Config(format!("{} is not a communication scenario", other.name()))),
    };
    if campaign.detector == DetectorKind::TwoStep && campaign.l != 2 {
        return Err(Error::Config("the two-step detector needs L = 2".into()));
    }
    let config = &campaign.waveform;
    let codec = Codec::new(campaign.scheme()?)?;
    let waveform = Waveform::new(config.clone())?;
    let receiver = Receiver::new(config.clone())?;
    let p = codec.capacity().p as usize;
    let flat = FrequencyFrame::from_fn(config, |_| Complex64::new(1.0, 0.0));

    let mut rows = Vec::with_capacity(campaign.snr_db.len());
    let mut records = Vec::new();
    for (point, &snr) in campaign.snr_db.iter().enumerate() {
        let trials: Vec<CommTrial> = (0..campaign.trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = trial_rng(campaign.seed, point, trial);
                let msg = random_message(&codec, &mut rng)?;
                let w = waveform.frequency_symbols(&msg)?;
                let clean = waveform.frame_from_spectrum(&w);
                let (mut frame, h) = if fading {
                    let taps = realize_fading(&campaign.fading, config, &mut rng)?;
                    (apply_multipath(&clean, &taps), multipath_response(&taps, config))
                } else {
                    (clean, flat.clone())
                };
                let sigma2 = snr_to_sigma2(snr, &w)?;
                add_awgn(&mut frame, sigma2 * config.n as f64, &mut rng)?;
                let y = receiver.demodulate(&frame)?;
                let x = receiver.equalize_despread(&y, &h, waveform.fdss())?;
                let det = match campaign.detector {
                    DetectorKind::Ml => ml_detect(&x, &codec)?,
                    DetectorKind::TwoStep => two_step_detect(&x, &codec)?,
                };
                let counts = ErrorCounts::compare(&det.bits, msg.bits(), p)?;
                let record = TrialRecord {
                    scenario: scenario.name(),
                    point,
                    trial,
                    seed: trial_seed(campaign.seed, point, trial),
                    snr_db: snr,
                    truth: format!("{}/{}", join(msg.indices()), bit_string(msg.bits())),
                    estimate: format!("{}/{}", join(&det.indices), bit_string(&det.bits)),
                    metric: counts.bit_errors as f64,
                };
                Ok(CommTrial { counts, unused: det.unused_codeword, record })
            })
            .collect::<Result<_>>()?;
        let counts = trials.iter().fold(ErrorCounts::default(), |acc, t| acc.merge(t.counts));
        let (ber_lo, ber_hi) = wilson_interval(counts.bit_errors, counts.bits);
        let (bler_lo, bler_hi) = wilson_interval(counts.block_errors, counts.blocks);
        rows.push(CommRow {
            snr_db: snr,
            ber: counts.ber(),
            bler: counts.bler(),
            trials: campaign.trials,
            detector: campaign.detector.name(),
            is: is_label(campaign, codec.params().s()),
            l: campaign.l,
            s: codec.params().s(),
            ber_ci95_low: ber_lo,
            ber_ci95_high: ber_hi,
            bler_ci95_low: bler_lo,
            bler_ci95_high: bler_hi,
            bit_errors: counts.bit_errors,
            block_errors: counts.block_errors,
            unused_codewords: trials.iter().filter(|t| t.unused).count(),
            seed: campaign.seed,
        });
        records.extend(trials.into_iter().map(|t| t.record));
    }
    Ok((rows, records))
}

/// Maximum and mean PMEPR over `trials` random messages for each `L`.
pub fn run_pmepr_campaign(campaign: &Campaign) -> Result<Vec<PmeprRow>> {
    campaign.validate()?;
    let waveform = Waveform::new(campaign.waveform.clone())?;
    campaign
        .pmepr_l
        .iter()
        .enumerate()
        .map(|(point, &l)| {
            let codec = Codec::new(SchemeParams::new(campaign.waveform.m, l, campaign.h, 1)?)?;
            let values: Vec<f64> = (0..campaign.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(campaign.seed, point, trial);
                    waveform.pmepr(&random_message(&codec, &mut rng)?, PMEPR_OVERSAMPLE)
                })
                .collect::<Result<_>>()?;
            Ok(PmeprRow {
                profile: campaign.waveform.profile.name().to_string(),
                l,
                max_pmepr_db: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_pmepr_db: values.iter().sum::<f64>() / values.len() as f64,
                messages: values.len(),
                seed: campaign.seed,
            })
        })
        .collect()
}

/// `s_max(M)` and the pair count at that separation for every `M` in range.
pub fn run_smax_sweep(m_min: usize, m_max: usize) -> Result<Vec<SmaxRow>> {
    if m_min < 2 || m_min > m_max {
        return Err(Error::Config(format!("need 2 <= m_min <= m_max, got {m_min}..{m_max}")));
    }
    (m_min..=m_max)
        .into_par_iter()
        .map(|m| {
            let s = s_max(m)?;
            let count = count_constrained(m, s)?;
            let p1 = count.floor_log2().ok_or_else(|| Error::Numerical(format!("no codewords at M = {m}")))?;
            let count_at_smax =
                u64::try_from(count.value()).map_err(|_| Error::Overflow("pair count at s_max"))?;
            Ok(SmaxRow { m, s_max: s, count_at_smax, p1 })
        })
        .collect()
}

/// One transmit frame from `bits` or, without them, from a seeded random message.
pub fn synthesize_frame(campaign: &Campaign) -> Result<(TimeFrame, IndexMessage)> {
    campaign.validate()?;
    let codec = Codec::new(campaign.scheme()?)?;
    let message = match &campaign.bits {
        Some(bits) => codec.encode(bits).map_err(|e| Error::Config(format!("key `bits`: {e}")))?,
        None => random_message(&codec, &mut trial_rng(campaign.seed, 0, 0))?,
    };
    let frame = Waveform::new(campaign.waveform.clone())?.synthesize(&message)?;
    Ok((frame, message))
}

impl std::fmt::Display for RadarRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "snr {:>6} dB  rmse {:.4e} m  [{:.3e}, {:.3e}]  {} trials",
            format_snr(self.snr_db),
            self.rmse_m,
            self.rmse_ci95_low,
            self.rmse_ci95_high,
            self.trials
        )
    }
}

impl std::fmt::Display for CommRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "snr {:>6} dB  ber {:.3e}  bler {:.3e}  {} frames",
            format_snr(self.snr_db),
            self.ber,
            self.bler,
            self.trials
        )
    }
}
