//! Range estimation from the received occupied-bin symbols.
//!
//! With the transmitted symbols `w` known at the radar receiver, a single
//! reflector is found by maximising `|Re{t_tau^H W^H b}|` over the delay,
//! where `t_tau` is the delay steering vector including the carrier phase.
//! Several reflectors are peeled off one at a time by subtracting
//! `a_hat W t_tau_hat` from the residual. The LMMSE variant replaces `W^H b`
//! by the regularised per-bin channel estimate before the delay search.
//!
//! The search statistic oscillates at the carrier, so it is not scanned
//! directly. A coarse grid and the first refinement stages maximise the
//! carrier-free envelope `|t_tau^H W^H b|`; once the step is below a
//! twentieth of a carrier period the signed statistic takes over. All stages
//! live on one integer lattice so that different statistics peaking at the
//! same delay land on the same grid point.

use num_complex::Complex64;

use crate::channel::{RadarScene, SPEED_OF_LIGHT};
use crate::dsp::FftCache;
use crate::error::{invalid, Error, Result};
use crate::waveform::{Cfr, FrequencyFrame, WaveformConfig};

use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    /// Matched filter on `W^H b`.
    Mf,
    /// Matched filter on the LMMSE channel estimate.
    Lmmse,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Mf => "mf",
            EstimatorKind::Lmmse => "lmmse",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mf" | "ml" => Ok(EstimatorKind::Mf),
            "lmmse" | "mmse" => Ok(EstimatorKind::Lmmse),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Delay search grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub coarse_step: f64,
    pub refine_factor: u32,
    /// Envelope refinement stages after the coarse scan.
    pub refine_stages: u32,
    /// Signed-statistic refinement stages after the carrier-resolving stage.
    pub fine_stages: u32,
}

impl DelayGrid {
    /// `[0, T_CP]`, coarse step `T_sample / 2`, refinement by 10 until the
    /// step resolves the carrier, then two more signed stages.
    pub fn for_config(config: &WaveformConfig) -> Self {
        let coarse_step = config.t_sample() / 2.0;
        let carrier_step = 1.0 / (20.0 * config.f_c);
        let mut refine_stages = 0;
        while coarse_step / 10f64.powi(refine_stages as i32) > carrier_step {
            refine_stages += 1;
        }
        Self {
            t_min: 0.0,
            t_max: config.t_cp(),
            coarse_step,
            refine_factor: 10,
            refine_stages,
            fine_stages: 2,
        }
    }

    pub fn validate(&self, config: &WaveformConfig) -> Result<()> {
        if !(self.t_min >= 0.0 && self.t_min < self.t_max && self.t_max <= config.t_cp() * (1.0 + 1e-12)) {
            return Err(invalid("delay grid must satisfy 0 <= t_min < t_max <= T_CP"));
        }
        if self.coarse_step.is_nan() || self.coarse_step <= 0.0 || self.refine_factor < 2 {
            return Err(invalid("coarse step must be positive and refine factor at least 2"));
        }
        if self.carrier_step() > 1.0 / (20.0 * config.f_c) * (1.0 + 1e-9) {
            return Err(invalid("refinement never reaches a twentieth of the carrier period"));
        }
        Ok(())
    }

    fn total_stages(&self) -> u32 {
        self.refine_stages + self.fine_stages
    }

    /// Step of the stage where the signed statistic takes over.
    pub fn carrier_step(&self) -> f64 {
        self.coarse_step / (self.refine_factor as f64).powi(self.refine_stages as i32)
    }

    pub fn final_step(&self) -> f64 {
        self.coarse_step / (self.refine_factor as f64).powi(self.total_stages() as i32)
    }

    /// Range spacing of the final stage, `final_step * c / 2`.
    pub fn final_range_resolution(&self) -> f64 {
        self.final_step() * SPEED_OF_LIGHT / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetEstimate {
    pub tau_hat: f64,
    pub a_hat: f64,
    pub range_hat: f64,
    /// The search ended on an edge of `[t_min, t_max]`.
    pub at_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Envelope,
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageResult {
    pub objective: Objective,
    pub step: f64,
    pub points: usize,
    pub best_tau: f64,
    pub best_value: f64,
}

/// Outcome of one delay search, with the per-stage history.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySearch {
    pub estimate: TargetEstimate,
    pub stages: Vec<StageResult>,
}

/// Delay steering vector `t_tau` over `L_d..=L_u`.
pub fn delay_vector(tau: f64, config: &WaveformConfig) -> Result<FrequencyFrame> {
    if tau.is_nan() || tau < 0.0 {
        return Err(invalid(format!("delay must be non-negative, got {tau}")));
    }
    let t_chirp = config.t_chirp();
    Ok(FrequencyFrame::from_fn(config, |k| {
        Complex64::from_polar(1.0, -TAU * (config.f_c + k as f64 / t_chirp) * tau)
    }))
}

/// `(|t^H W^H b|, Re{t^H W^H b})` at one delay.
pub fn mf_objective(tau: f64, w: &FrequencyFrame, b: &FrequencyFrame, config: &WaveformConfig) -> Result<(f64, f64)> {
    w.check_aligned(b)?;
    let z: Vec<Complex64> = w.values().iter().zip(b.values()).map(|(w, b)| w.conj() * b).collect();
    let v = correlate(&z, w.first_bin(), tau, config);
    Ok((v.norm(), v.re))
}

/// LMMSE channel estimate `conj(w_k) b_k / (|w_k|^2 + sigma2)`.
///
/// The second value lists bins where `w_k = 0` and `sigma2 = 0`; those are
/// set to zero instead of dividing by zero.
pub fn lmmse_channel(b: &FrequencyFrame, w: &FrequencyFrame, sigma2: f64) -> Result<(Cfr, Vec<i64>)> {
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(invalid(format!("noise variance must be non-negative, got {sigma2}")));
    }
    w.check_aligned(b)?;
    let mut flagged = Vec::new();
    let values = w
        .iter()
        .zip(b.values())
        .map(|((k, wk), &bk)| {
            let denom = wk.norm_sqr() + sigma2;
            if denom == 0.0 {
                flagged.push(k);
                Complex64::new(0.0, 0.0)
            } else {
                wk.conj() * bk / denom
            }
        })
        .collect();
    Ok((FrequencyFrame::new(w.first_bin(), values), flagged))
}

/// `sum_k z_k exp(j 2 pi (f_c + k / T) tau)`
fn correlate(z: &[Complex64], first_bin: i64, tau: f64, config: &WaveformConfig) -> Complex64 {
    let t_chirp = config.t_chirp();
    let rot = Complex64::from_polar(1.0, TAU * tau / t_chirp);
    let mut phasor = Complex64::from_polar(1.0, TAU * (config.f_c + first_bin as f64 / t_chirp) * tau);
    let mut acc = Complex64::new(0.0, 0.0);
    for &zk in z {
        acc += zk * phasor;
        phasor *= rot;
    }
    acc
}

/// Range estimator bound to one waveform configuration and grid.
#[derive(Debug)]
pub struct RangeEstimator {
    config: WaveformConfig,
    grid: DelayGrid,
    fft: FftCache,
}

impl RangeEstimator {
    pub fn new(config: WaveformConfig, grid: DelayGrid) -> Result<Self> {
        config.validate()?;
        grid.validate(&config)?;
        Ok(Self { config, grid, fft: FftCache::default() })
    }

    pub fn config(&self) -> &WaveformConfig {
        &self.config
    }

    pub fn grid(&self) -> &DelayGrid {
        &self.grid
    }

    /// Search statistic vector for the chosen estimator.
    fn statistic(&self, b: &FrequencyFrame, w: &FrequencyFrame, sigma2: f64, kind: EstimatorKind) -> Result<Vec<Complex64>> {
        match kind {
            EstimatorKind::Mf => Ok(w.values().iter().zip(b.values()).map(|(w, b)| w.conj() * b).collect()),
            EstimatorKind::Lmmse => Ok(lmmse_channel(b, w, sigma2)?.0.into_values()),
        }
    }

    /// Full search with stage history.
    pub fn search(&self, b: &FrequencyFrame, w: &FrequencyFrame, sigma2: f64, kind: EstimatorKind) -> Result<DelaySearch> {
        w.check_aligned(b)?;
        if w.first_bin() != self.config.l_d || w.len() != self.config.m {
            return Err(invalid("frequency vectors do not cover L_d..=L_u"));
        }
        let w_energy = w.energy();
        if w_energy == 0.0 {
            return Err(Error::DegenerateWaveform);
        }
        if sigma2.is_nan() || sigma2 < 0.0 {
            return Err(invalid(format!("noise variance must be non-negative, got {sigma2}")));
        }
        let z = self.statistic(b, w, sigma2, kind)?;
        let first = self.config.l_d;
        let cfg = &self.config;
        let grid = &self.grid;

        let factor = grid.refine_factor as i64;
        let total = grid.total_stages();
        let unit = grid.final_step();
        let units = |stage: u32| factor.pow(total - stage);
        let p_min = (grid.t_min / unit).ceil() as i64;
        let p_max = (grid.t_max / unit).floor() as i64;
        let tau_of = |p: i64| p as f64 * unit;

        let mut stages = Vec::with_capacity(total as usize + 2);

        // coarse envelope scan
        let u0 = units(0);
        let j_lo = p_min.div_euclid(u0) + i64::from(p_min.rem_euclid(u0) != 0);
        let j_hi = p_max.div_euclid(u0);
        let coarse = self.coarse_envelope(&z, first, j_lo, j_hi);
        let (mut best_j, mut best_val) = (j_lo, f64::NEG_INFINITY);
        for (j, v) in (j_lo..=j_hi).zip(&coarse) {
            if *v > best_val {
                best_val = *v;
                best_j = j;
            }
        }
        let mut best_p = best_j * u0;
        let mut at_boundary = best_j == j_lo || best_j == j_hi;
        stages.push(StageResult {
            objective: Objective::Envelope,
            step: grid.coarse_step,
            points: coarse.len(),
            best_tau: tau_of(best_p),
            best_value: best_val,
        });

        let eval = |p: i64, objective: Objective| {
            let v = correlate(&z, first, tau_of(p), cfg);
            match objective {
                Objective::Envelope => v.norm(),
                Objective::Signed => v.re.abs(),
            }
        };
        // (position, value) on the lattice `center + i * step_units`, |i| <= half_width
        let scan = |center: i64, step_units: i64, half_width: i64, objective: Objective| -> Vec<(i64, f64)> {
            (-half_width..=half_width)
                .map(|i| center + i * step_units)
                .filter(|p| (p_min..=p_max).contains(p))
                .map(|p| (p, eval(p, objective)))
                .collect()
        };
        let argmax = |values: &[(i64, f64)]| {
            values.iter().fold((0, f64::NEG_INFINITY), |best, &(p, v)| if v > best.1 { (p, v) } else { best })
        };
        let record = |objective: Objective, step_units: i64, values: &[(i64, f64)], best: (i64, f64)| StageResult {
            objective,
            step: step_units as f64 * unit,
            points: values.len(),
            best_tau: tau_of(best.0),
            best_value: best.1,
        };

        for s in 1..=grid.refine_stages {
            let values = scan(best_p, units(s), factor, Objective::Envelope);
            let best = argmax(&values);
            stages.push(record(Objective::Envelope, units(s), &values, best));
            best_p = best.0;
        }

        // carrier-resolving stage: |Re| over one carrier period each side. Its
        // local maxima sit half a carrier period apart with nearly equal
        // heights, so each one is refined and the best refined value wins.
        let carrier_units = units(grid.refine_stages);
        let half = ((1.0 / cfg.f_c) / (carrier_units as f64 * unit)).ceil() as i64;
        let values = scan(best_p, carrier_units, half.max(factor), Objective::Signed);
        let carrier_best = argmax(&values);
        stages.push(record(Objective::Signed, carrier_units, &values, carrier_best));
        let mut candidates: Vec<i64> = (0..values.len())
            .filter(|&i| {
                let v = values[i].1;
                (i == 0 || values[i - 1].1 <= v) && (i + 1 == values.len() || values[i + 1].1 < v)
            })
            .map(|i| values[i].0)
            .collect();
        if candidates.is_empty() {
            candidates.push(carrier_best.0);
        }
        let mut winner: Option<(f64, i64, Vec<StageResult>)> = None;
        for start in candidates {
            let mut p = start;
            let mut value = eval(p, Objective::Signed);
            let mut fine = Vec::new();
            for s in grid.refine_stages + 1..=total {
                let values = scan(p, units(s), factor, Objective::Signed);
                let best = argmax(&values);
                fine.push(record(Objective::Signed, units(s), &values, best));
                (p, value) = best;
            }
            if winner.as_ref().is_none_or(|w| value > w.0) {
                winner = Some((value, p, fine));
            }
        }
        let (_, p, fine) = winner.expect("at least one candidate");
        best_p = p;
        stages.extend(fine);
        at_boundary |= best_p <= p_min || best_p >= p_max;

        let tau_hat = tau_of(best_p);
        let mf = correlate(
            &w.values().iter().zip(b.values()).map(|(w, b)| w.conj() * b).collect::<Vec<_>>(),
            first,
            tau_hat,
            cfg,
        );
        let denom = match kind {
            EstimatorKind::Mf => w_energy,
            EstimatorKind::Lmmse => w_energy + sigma2,
        };
        let a_hat = mf.re / denom;
        Ok(DelaySearch {
            estimate: TargetEstimate { tau_hat, a_hat, range_hat: tau_hat * SPEED_OF_LIGHT / 2.0, at_boundary },
            stages,
        })
    }

    /// Envelope on the coarse lattice `j * coarse_step`, `j` in `j_lo..=j_hi`.
    fn coarse_envelope(&self, z: &[Complex64], first: i64, j_lo: i64, j_hi: i64) -> Vec<f64> {
        let step = self.grid.coarse_step;
        let per_chirp = self.config.t_chirp() / step;
        let size = per_chirp.round();
        let on_fft_grid = (per_chirp - size).abs() < 1e-6 && size as usize >= z.len();
        if !on_fft_grid {
            return (j_lo..=j_hi)
                .map(|j| correlate(z, first, j as f64 * step, &self.config).norm())
                .collect();
        }
        // exp(j 2 pi k j / Q): inverse FFT of z placed at bins k mod Q
        let q = size as usize;
        let mut buf = vec![Complex64::new(0.0, 0.0); q];
        for (i, &zk) in z.iter().enumerate() {
            buf[WaveformConfig::bin_position(first + i as i64, q)] = zk;
        }
        self.fft.inverse(q).process(&mut buf);
        (j_lo..=j_hi)
            .map(|j| buf[j.rem_euclid(q as i64) as usize].norm())
            .collect()
    }

    pub fn estimate_single(
        &self,
        b: &FrequencyFrame,
        w: &FrequencyFrame,
        sigma2: f64,
        kind: EstimatorKind,
    ) -> Result<TargetEstimate> {
        Ok(self.search(b, w, sigma2, kind)?.estimate)
    }

    /// Successive estimation and cancellation of `r_known` reflectors.
    pub fn estimate_multi(
        &self,
        b: &FrequencyFrame,
        w: &FrequencyFrame,
        r_known: usize,
        sigma2: f64,
        kind: EstimatorKind,
    ) -> Result<Vec<TargetEstimate>> {
        if r_known == 0 {
            return Err(invalid("at least one target must be expected"));
        }
        let mut residual = b.clone();
        let mut out = Vec::with_capacity(r_known);
        for n in 0..r_known {
            let est = self.estimate_single(&residual, w, sigma2, kind)?;
            if n + 1 < r_known {
                let t = delay_vector(est.tau_hat, &self.config)?;
                for ((r, wk), tk) in residual.values_mut().iter_mut().zip(w.values()).zip(t.values()) {
                    *r -= est.a_hat * wk * tk;
                }
            }
            out.push(est);
        }
        Ok(out)
    }
}

/// One-shot single-target estimate with a fresh estimator.
pub fn estimate_single(
    b: &FrequencyFrame,
    w: &FrequencyFrame,
    grid: &DelayGrid,
    config: &WaveformConfig,
    sigma2: f64,
    kind: EstimatorKind,
) -> Result<TargetEstimate> {
    RangeEstimator::new(config.clone(), grid.clone())?.estimate_single(b, w, sigma2, kind)
}

/// One-shot multi-target estimate with a fresh estimator.
pub fn estimate_multi(
    b: &FrequencyFrame,
    w: &FrequencyFrame,
    r_known: usize,
    grid: &DelayGrid,
    config: &WaveformConfig,
    sigma2: f64,
    kind: EstimatorKind,
) -> Result<Vec<TargetEstimate>> {
    RangeEstimator::new(config.clone(), grid.clone())?.estimate_multi(b, w, r_known, sigma2, kind)
}

/// Squared range errors of one trial, estimates matched to truth by
/// descending coefficient magnitude.
pub fn matched_squared_errors(estimates: &[TargetEstimate], truth: &RadarScene) -> Result<Vec<f64>> {
    if estimates.len() != truth.len() {
        return Err(invalid(format!(
            "{} estimates for {} targets",
            estimates.len(),
            truth.len()
        )));
    }
    let mut est: Vec<&TargetEstimate> = estimates.iter().collect();
    est.sort_by(|a, b| b.a_hat.abs().total_cmp(&a.a_hat.abs()));
    let mut tru: Vec<_> = truth.targets().iter().collect();
    tru.sort_by(|a, b| b.coefficient.abs().total_cmp(&a.coefficient.abs()));
    Ok(est.iter().zip(tru).map(|(e, t)| (e.range_hat - t.distance).powi(2)).collect())
}

/// Root-mean-square range error over trials and targets.
pub fn rmse(estimates: &[Vec<TargetEstimate>], truth: &[RadarScene]) -> Result<f64> {
    if estimates.len() != truth.len() || estimates.is_empty() {
        return Err(invalid("need one estimate list per trial and at least one trial"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (e, t) in estimates.iter().zip(truth) {
        let sq = matched_squared_errors(e, t)?;
        count += sq.len();
        sum += sq.iter().sum::<f64>();
    }
    Ok((sum / count as f64).sqrt())
}
