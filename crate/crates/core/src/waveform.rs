//! Circularly-shifted chirps through a DFT-s-OFDM transmitter.
//!
//! A chirp `beta_0(t) = exp(j theta(t))` of duration `T_chirp` is expanded in
//! its Fourier series over bins `L_d..=L_u`. Spreading the sparse data vector
//! with an `M`-point DFT, shaping every bin with the chirp coefficients
//! (frequency-domain spectral shaping, FDSS) and taking an `N`-point inverse
//! DFT yields the sum of the selected circular shifts `beta_0(t - m T_chirp/M)`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::codec::IndexMessage;
use crate::dsp::{energy, FftCache};
use crate::error::{invalid, Error, Result};

/// Lower bound on the chirp energy captured by bins `L_d..=L_u`.
pub const MIN_CAPTURED_ENERGY: f64 = 0.98;

/// Phase law of the mother chirp as a function of normalized time `u = t / T_chirp`.
#[derive(Clone)]
pub enum ChirpProfile {
    /// `theta = pi D u^2 - pi D u`: frequency sweeps linearly from `-D/2` to `+D/2` bins.
    Linear,
    /// `theta = -(D/2) cos(2 pi u)`: frequency `(D/2) sin(2 pi u)` bins.
    Sinusoidal,
    /// Arbitrary phase law `theta(u, D)`, `u` in `[0, 1)`.
    Custom {
        name: String,
        phase: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    },
}

impl ChirpProfile {
    pub fn name(&self) -> &str {
        match self {
            ChirpProfile::Linear => "linear",
            ChirpProfile::Sinusoidal => "sinusoidal",
            ChirpProfile::Custom { name, .. } => name,
        }
    }

    /// Phase at normalized time `u` for deviation index `d`.
    pub fn phase(&self, u: f64, d: f64) -> f64 {
        match self {
            ChirpProfile::Linear => PI * d * u * u - PI * d * u,
            ChirpProfile::Sinusoidal => -0.5 * d * (TAU * u).cos(),
            ChirpProfile::Custom { phase, .. } => phase(u, d),
        }
    }
}

impl fmt::Debug for ChirpProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ChirpProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "lin" => Ok(ChirpProfile::Linear),
            "sinusoidal" | "sin" => Ok(ChirpProfile::Sinusoidal),
            other => Err(Error::Config(format!("unknown chirp profile `{other}`"))),
        }
    }
}

/// Static waveform and system parameters.
#[derive(Debug, Clone)]
pub struct WaveformConfig {
    /// IDFT size, samples per chirp.
    pub n: usize,
    /// Cyclic-prefix samples.
    pub n_cp: usize,
    /// Spreading DFT size, number of circular shifts.
    pub m: usize,
    /// Lowest occupied bin (negative).
    pub l_d: i64,
    /// Highest occupied bin (positive).
    pub l_u: i64,
    /// Two-sided frequency deviation in bins.
    pub d: f64,
    /// Sample rate in Hz.
    pub f_sample: f64,
    /// Carrier frequency in Hz.
    pub f_c: f64,
    pub profile: ChirpProfile,
}

impl WaveformConfig {
    /// 802.11ay OFDM mode with four bonded channels.
    pub fn ieee_80211ay(profile: ChirpProfile) -> Self {
        Self {
            n: 2048,
            n_cp: 512,
            m: 1448,
            l_d: -723,
            l_u: 724,
            d: 1300.0,
            f_sample: 10.56e9,
            f_c: 64.8e9,
            profile,
        }
    }

    /// Reduced preset for quick runs: same CP ratio, one eighth of the bandwidth.
    pub fn desk_scale(profile: ChirpProfile) -> Self {
        Self {
            n: 256,
            n_cp: 64,
            m: 181,
            l_d: -90,
            l_u: 90,
            d: 160.0,
            f_sample: 1.32e9,
            f_c: 64.8e9,
            profile,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let span = self.l_u - self.l_d + 1;
        if span != self.m as i64 {
            return Err(Error::Config(format!(
                "M = {} does not match L_u - L_d + 1 = {span}",
                self.m
            )));
        }
        if !(self.n > self.m && (self.m as f64) > self.d && self.d > 0.0) {
            return Err(Error::Config("need N > M > D > 0".into()));
        }
        if !((self.l_d as f64) < -self.d / 2.0 && self.d / 2.0 < self.l_u as f64) {
            return Err(Error::Config("need L_d < -D/2 and D/2 < L_u".into()));
        }
        if self.n_cp >= self.n {
            return Err(Error::Config("cyclic prefix must be shorter than the symbol".into()));
        }
        if !(self.f_sample > 0.0 && self.f_c >= 0.0) {
            return Err(Error::Config("sample rate must be positive and carrier non-negative".into()));
        }
        Ok(())
    }

    pub fn t_sample(&self) -> f64 {
        1.0 / self.f_sample
    }

    pub fn t_chirp(&self) -> f64 {
        self.n as f64 / self.f_sample
    }

    pub fn t_cp(&self) -> f64 {
        self.n_cp as f64 / self.f_sample
    }

    /// `c * T_CP / 2`
    pub fn max_range(&self) -> f64 {
        crate::channel::SPEED_OF_LIGHT * self.t_cp() / 2.0
    }

    pub fn bins(&self) -> std::ops::RangeInclusive<i64> {
        self.l_d..=self.l_u
    }

    /// FFT bin holding Fourier index `k` in a transform of size `len`.
    #[inline]
    pub fn bin_position(k: i64, len: usize) -> usize {
        k.rem_euclid(len as i64) as usize
    }
}

/// Complex values over the occupied bins `L_d..=L_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFrame {
    first_bin: i64,
    values: Vec<Complex64>,
}

/// Channel frequency response over the occupied bins.
pub type Cfr = FrequencyFrame;

impl FrequencyFrame {
    pub fn new(first_bin: i64, values: Vec<Complex64>) -> Self {
        Self { first_bin, values }
    }

    pub fn zeros(config: &WaveformConfig) -> Self {
        Self::new(config.l_d, vec![Complex64::new(0.0, 0.0); config.m])
    }

    pub fn from_fn(config: &WaveformConfig, f: impl FnMut(i64) -> Complex64) -> Self {
        Self::new(config.l_d, config.bins().map(f).collect())
    }

    pub fn first_bin(&self) -> i64 {
        self.first_bin
    }

    pub fn last_bin(&self) -> i64 {
        self.first_bin + self.values.len() as i64 - 1
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: i64) -> Option<Complex64> {
        let idx = usize::try_from(k - self.first_bin).ok()?;
        self.values.get(idx).copied()
    }

    /// `(k, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.first_bin + i as i64, v))
    }

    pub fn energy(&self) -> f64 {
        energy(&self.values)
    }

    pub(crate) fn check_aligned(&self, other: &FrequencyFrame) -> Result<()> {
        if self.first_bin != other.first_bin || self.len() != other.len() {
            return Err(invalid("frequency vectors are not aligned on the same bins"));
        }
        Ok(())
    }
}

/// Fourier coefficients `c_k` of the mother chirp on `L_d..=L_u`.
#[derive(Debug, Clone)]
pub struct FdssCoefficients {
    coeffs: FrequencyFrame,
    oversample: usize,
}

impl FdssCoefficients {
    pub fn coeffs(&self) -> &FrequencyFrame {
        &self.coeffs
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    /// `sum |c_k|^2`, the fraction of the unit chirp power kept in band.
    pub fn captured_energy(&self) -> f64 {
        self.coeffs.energy()
    }
}

/// Chirp phase at time `t` (seconds) within one chirp period.
pub fn chirp_phase(profile: &ChirpProfile, t: f64, config: &WaveformConfig) -> Result<f64> {
    let t_chirp = config.t_chirp();
    if !(0.0..t_chirp).contains(&t) {
        return Err(invalid(format!("t = {t} s outside [0, {t_chirp})")));
    }
    Ok(profile.phase(t / t_chirp, config.d))
}

/// Fourier coefficients of `beta_0` from an `oversample * N` point DFT.
pub fn compute_fdss(config: &WaveformConfig, oversample: usize) -> Result<FdssCoefficients> {
    compute_fdss_with(&FftCache::default(), config, oversample)
}

fn compute_fdss_with(fft: &FftCache, config: &WaveformConfig, oversample: usize) -> Result<FdssCoefficients> {
    config.validate()?;
    if oversample < 4 {
        return Err(invalid(format!("FDSS oversampling must be at least 4, got {oversample}")));
    }
    let len = oversample * config.n;
    let mut buf: Vec<Complex64> = (0..len)
        .map(|n| Complex64::from_polar(1.0, config.profile.phase(n as f64 / len as f64, config.d)))
        .collect();
    fft.forward(len).process(&mut buf);
    let scale = 1.0 / len as f64;
    let coeffs = FrequencyFrame::from_fn(config, |k| buf[WaveformConfig::bin_position(k, len)] * scale);
    let fdss = FdssCoefficients { coeffs, oversample };
    let captured = fdss.captured_energy();
    if captured < MIN_CAPTURED_ENERGY {
        return Err(Error::Config(format!(
            "bins {}..={} keep only {captured:.4} of the chirp energy (D too close to the band edges)",
            config.l_d, config.l_u
        )));
    }
    Ok(fdss)
}

/// Time-domain symbol with its cyclic prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrame {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub cp_len: usize,
}

impl TimeFrame {
    pub fn payload(&self) -> &[Complex64] {
        &self.samples[self.cp_len..]
    }

    pub fn cyclic_prefix(&self) -> &[Complex64] {
        &self.samples[..self.cp_len]
    }
}

/// DFT-s-OFDM chirp transmitter for one configuration.
#[derive(Debug)]
pub struct Waveform {
    config: WaveformConfig,
    fdss: FdssCoefficients,
    fft: FftCache,
}

/// Oversampling used for the FDSS projection.
pub const FDSS_OVERSAMPLE: usize = 8;
/// Oversampling used for envelope (PMEPR) measurements.
pub const PMEPR_OVERSAMPLE: usize = 4;

impl Waveform {
    pub fn new(config: WaveformConfig) -> Result<Self> {
        let fft = FftCache::default();
        let fdss = compute_fdss_with(&fft, &config, FDSS_OVERSAMPLE)?;
        Ok(Self { config, fdss, fft })
    }

    pub fn with_fdss(config: WaveformConfig, fdss: FdssCoefficients) -> Result<Self> {
        config.validate()?;
        if fdss.coeffs.first_bin() != config.l_d || fdss.coeffs.len() != config.m {
            return Err(invalid("FDSS coefficients do not cover L_d..=L_u"));
        }
        Ok(Self { config, fdss, fft: FftCache::default() })
    }

    pub fn config(&self) -> &WaveformConfig {
        &self.config
    }

    pub fn fdss(&self) -> &FdssCoefficients {
        &self.fdss
    }

    /// Mean envelope power of the signal ensemble, `sum |c_k|^2`.
    ///
    /// With unit-modulus PSK and the `1/sqrt(L)` scaling this is the average
    /// of the instantaneous power over time and over all messages.
    pub fn ensemble_power(&self) -> f64 {
        self.fdss.captured_energy()
    }

    fn check_message(&self, msg: &IndexMessage) -> Result<()> {
        if msg.indices().iter().any(|&i| i >= self.config.m) {
            return Err(invalid(format!("message index out of range for M = {}", self.config.m)));
        }
        Ok(())
    }

    /// Per-bin transmitted symbols `w_k = c_k * DFT_M(d)_k / sqrt(L)`.
    pub fn frequency_symbols(&self, msg: &IndexMessage) -> Result<FrequencyFrame> {
        self.check_message(msg)?;
        let m = self.config.m;
        let mut spread = vec![Complex64::new(0.0, 0.0); m];
        for (&i, &s) in msg.indices().iter().zip(msg.psk_symbols()) {
            spread[i] = s;
        }
        self.fft.forward(m).process(&mut spread);
        let scale = 1.0 / (msg.l() as f64).sqrt();
        Ok(FrequencyFrame::from_fn(&self.config, |k| {
            self.fdss.coeffs.values[(k - self.config.l_d) as usize]
                * spread[WaveformConfig::bin_position(k, m)]
                * scale
        }))
    }

    /// Band-limited payload sampled at `oversample * f_sample` (no CP).
    pub fn oversampled_payload(&self, msg: &IndexMessage, oversample: usize) -> Result<Vec<Complex64>> {
        if oversample == 0 {
            return Err(invalid("oversampling factor must be positive"));
        }
        let w = self.frequency_symbols(msg)?;
        Ok(self.place_and_invert(&w, oversample * self.config.n))
    }

    fn place_and_invert(&self, w: &FrequencyFrame, len: usize) -> Vec<Complex64> {
        let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
        for (k, v) in w.iter() {
            spectrum[WaveformConfig::bin_position(k, len)] = v;
        }
        self.fft.inverse(len).process(&mut spectrum);
        spectrum
    }

    /// Transmit frame: `N`-point IDFT of the shaped spectrum with the CP prepended.
    pub fn synthesize(&self, msg: &IndexMessage) -> Result<TimeFrame> {
        let w = self.frequency_symbols(msg)?;
        Ok(self.frame_from_spectrum(&w))
    }

    /// Build a CP-prefixed frame from arbitrary occupied-bin values.
    pub fn frame_from_spectrum(&self, w: &FrequencyFrame) -> TimeFrame {
        let n = self.config.n;
        let n_cp = self.config.n_cp;
        let payload = self.place_and_invert(w, n);
        let mut samples = Vec::with_capacity(n + n_cp);
        samples.extend_from_slice(&payload[n - n_cp..]);
        samples.extend_from_slice(&payload);
        TimeFrame { samples, sample_rate: self.config.f_sample, cp_len: n_cp }
    }

    /// Reference synthesis straight from the sum of shifted chirps, sampled at
    /// `oversample * f_sample` over one chirp period (no CP).
    pub fn synthesize_direct(&self, msg: &IndexMessage, oversample: usize) -> Result<Vec<Complex64>> {
        self.check_message(msg)?;
        if oversample == 0 {
            return Err(invalid("oversampling factor must be positive"));
        }
        let len = (oversample * self.config.n) as i64;
        let m = self.config.m as i64;
        let period = len * m;
        let scale = 1.0 / (msg.l() as f64).sqrt();
        let profile = &self.config.profile;
        let d = self.config.d;
        Ok((0..len)
            .map(|n| {
                msg.indices()
                    .iter()
                    .zip(msg.psk_symbols())
                    .map(|(&i, &s)| {
                        // u = (n / len - i / M) mod 1, in exact integer arithmetic
                        let num = (n * m - i as i64 * len).rem_euclid(period);
                        s * Complex64::from_polar(1.0, profile.phase(num as f64 / period as f64, d))
                    })
                    .sum::<Complex64>()
                    * scale
            })
            .collect())
    }

    /// Mean power of this particular message's payload.
    pub fn message_power(&self, msg: &IndexMessage) -> Result<f64> {
        Ok(self.frequency_symbols(msg)?.energy())
    }

    /// Peak-to-mean envelope power ratio in dB.
    ///
    /// The peak is taken over the oversampled payload (CP excluded); the mean
    /// is the ensemble envelope power [`Waveform::ensemble_power`].
    pub fn pmepr(&self, msg: &IndexMessage, oversample: usize) -> Result<f64> {
        let x = self.oversampled_payload(msg, oversample)?;
        let peak = x.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        Ok(10.0 * (peak / self.ensemble_power()).log10())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::IndexMessage;

    fn small(profile: ChirpProfile) -> WaveformConfig {
        WaveformConfig {
            n: 128,
            n_cp: 32,
            m: 64,
            l_d: -31,
            l_u: 32,
            d: 40.0,
            f_sample: 1.0e9,
            f_c: 60.0e9,
            profile,
        }
    }

    #[test]
    fn presets_are_valid() {
        WaveformConfig::ieee_80211ay(ChirpProfile::Linear).validate().unwrap();
        WaveformConfig::desk_scale(ChirpProfile::Sinusoidal).validate().unwrap();
        let cfg = WaveformConfig::ieee_80211ay(ChirpProfile::Linear);
        assert!((cfg.t_chirp() - 193.939e-9).abs() < 1e-12);
        assert!((cfg.t_cp() - 48.485e-9).abs() < 1e-12);
    }

    #[test]
    fn config_rejects_inconsistent_bins() {
        let mut cfg = small(ChirpProfile::Linear);
        cfg.l_u = 40;
        assert!(cfg.validate().is_err());
        let mut cfg = small(ChirpProfile::Linear);
        cfg.d = 63.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn linear_phase_points() {
        let cfg = WaveformConfig::ieee_80211ay(ChirpProfile::Linear);
        assert_eq!(chirp_phase(&ChirpProfile::Linear, 0.0, &cfg).unwrap(), 0.0);
        let mid = chirp_phase(&ChirpProfile::Linear, cfg.t_chirp() / 2.0, &cfg).unwrap();
        assert!((mid + PI * cfg.d / 4.0).abs() < 1e-9);
        assert!(chirp_phase(&ChirpProfile::Linear, cfg.t_chirp(), &cfg).is_err());
        assert!(chirp_phase(&ChirpProfile::Linear, -1e-12, &cfg).is_err());
    }

    #[test]
    fn sinusoidal_peak_frequency() {
        // finite-difference instantaneous frequency, max over a fine grid
        let cfg = WaveformConfig::ieee_80211ay(ChirpProfile::Sinusoidal);
        let t = cfg.t_chirp();
        let steps = 200_000;
        let h = t / steps as f64;
        let mut peak = 0.0f64;
        for i in 0..steps - 1 {
            let a = chirp_phase(&cfg.profile, i as f64 * h, &cfg).unwrap();
            let b = chirp_phase(&cfg.profile, (i + 1) as f64 * h, &cfg).unwrap();
            peak = peak.max(((b - a) / h / TAU).abs());
        }
        let bound = cfg.d / (2.0 * t);
        assert!((peak - bound).abs() / bound < 1e-9, "{peak} vs {bound}");
    }

    #[test]
    fn fdss_degenerates_to_dc_without_deviation() {
        let mut cfg = small(ChirpProfile::Sinusoidal);
        cfg.d = 1e-9;
        let fdss = compute_fdss(&cfg, 8).unwrap();
        for (k, c) in fdss.coeffs().iter() {
            let expected = if k == 0 { 1.0 } else { 0.0 };
            assert!((c - Complex64::new(expected, 0.0)).norm() < 1e-8, "k = {k}: {c}");
        }
    }

    #[test]
    fn fdss_rejects_low_oversampling_and_heavy_truncation() {
        let cfg = small(ChirpProfile::Linear);
        assert!(compute_fdss(&cfg, 2).is_err());
        // sweeps three times the nominal deviation, so most energy falls outside the band
        let wide = ChirpProfile::Custom { name: "wide".into(), phase: Arc::new(|u, d| 3.0 * PI * d * (u * u - u)) };
        let cfg = small(wide);
        assert!(matches!(compute_fdss(&cfg, 8), Err(Error::Config(_))));
    }

    #[test]
    fn cyclic_prefix_copies_the_tail() {
        let wf = Waveform::new(small(ChirpProfile::Linear)).unwrap();
        let msg = IndexMessage::from_phases(vec![3, 40], vec![0, 1], 64, 2).unwrap();
        let frame = wf.synthesize(&msg).unwrap();
        assert_eq!(frame.samples.len(), 160);
        assert_eq!(frame.cyclic_prefix(), &frame.samples[128..160]);
    }

    #[test]
    fn single_chirp_has_unit_envelope_in_direct_synthesis() {
        let wf = Waveform::new(small(ChirpProfile::Linear)).unwrap();
        let msg = IndexMessage::from_phases(vec![17], vec![1], 64, 2).unwrap();
        for v in wf.synthesize_direct(&msg, 3).unwrap() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn antipodal_pair_peak_is_bounded() {
        let wf = Waveform::new(small(ChirpProfile::Sinusoidal)).unwrap();
        let msg = IndexMessage::from_phases(vec![0, 32], vec![0, 0], 64, 2).unwrap();
        let peak = wf.synthesize_direct(&msg, 4).unwrap().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        assert!(peak <= 2.0 + 1e-12);
    }

    #[test]
    fn rejects_out_of_range_message() {
        let wf = Waveform::new(small(ChirpProfile::Linear)).unwrap();
        let msg = IndexMessage::from_phases(vec![70], vec![0], 128, 2).unwrap();
        assert!(wf.synthesize(&msg).is_err());
    }
}
