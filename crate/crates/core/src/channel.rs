//! Radar and communication channels.
//!
//! The radar link is modelled per occupied bin, `b_k = w_k H_k + eta_k`, with
//! the CFR of a set of point reflectors. The communication link runs in the
//! time domain through a realized multipath tap set and AWGN.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dsp::FftCache;
use crate::error::{invalid, Error, Result};
use crate::waveform::{Cfr, FrequencyFrame, TimeFrame, WaveformConfig};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Round-trip delay of a reflector at `distance` meters.
pub fn round_trip_delay(distance: f64) -> f64 {
    2.0 * distance / SPEED_OF_LIGHT
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub distance: f64,
    pub coefficient: f64,
}

impl Target {
    pub fn new(distance: f64, coefficient: f64) -> Self {
        Self { distance, coefficient }
    }

    pub fn delay(&self) -> f64 {
        round_trip_delay(self.distance)
    }
}

/// Point reflectors ordered by distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarScene {
    targets: Vec<Target>,
}

impl RadarScene {
    pub fn new(targets: Vec<Target>) -> Result<Self> {
        if targets.iter().any(|t| !(t.distance >= 0.0 && t.distance.is_finite() && t.coefficient.is_finite())) {
            return Err(invalid("target distances must be finite and non-negative"));
        }
        if targets.windows(2).any(|w| w[0].distance >= w[1].distance) {
            return Err(invalid("target distances must be strictly increasing"));
        }
        Ok(Self { targets })
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Fails if any echo arrives after the cyclic prefix.
    pub fn check_range(&self, config: &WaveformConfig) -> Result<()> {
        let t_cp = config.t_cp();
        match self.targets.iter().find(|t| t.delay() > t_cp) {
            Some(t) => Err(invalid(format!(
                "target at {} m exceeds the maximum range {:.4} m",
                t.distance,
                config.max_range()
            ))),
            None => Ok(()),
        }
    }
}

/// `H_k = sum_i a_i exp(-j 2 pi f_c tau_i) exp(-j 2 pi k tau_i / T_chirp)`.
pub fn radar_cfr(scene: &RadarScene, config: &WaveformConfig) -> Result<Cfr> {
    scene.check_range(config)?;
    let t_chirp = config.t_chirp();
    let mut h = FrequencyFrame::zeros(config);
    for target in scene.targets() {
        let tau = target.delay();
        let carrier = Complex64::from_polar(target.coefficient, -std::f64::consts::TAU * config.f_c * tau);
        for (v, k) in h.values_mut().iter_mut().zip(config.bins()) {
            *v += carrier * Complex64::from_polar(1.0, -std::f64::consts::TAU * k as f64 * tau / t_chirp);
        }
    }
    Ok(h)
}

/// Circularly-symmetric complex Gaussian sample with variance `sigma2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> Complex64 {
    let scale = (sigma2 / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// `b_k = w_k h_k + eta_k`, `eta_k ~ CN(0, sigma2)`.
pub fn apply_radar_channel<R: Rng + ?Sized>(
    w: &FrequencyFrame,
    h: &Cfr,
    sigma2: f64,
    rng: &mut R,
) -> Result<FrequencyFrame> {
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(invalid(format!("noise variance must be non-negative, got {sigma2}")));
    }
    w.check_aligned(h)?;
    let values = w
        .values()
        .iter()
        .zip(h.values())
        .map(|(&wk, &hk)| {
            let clean = wk * hk;
            if sigma2 > 0.0 {
                clean + complex_gaussian(rng, sigma2)
            } else {
                clean
            }
        })
        .collect();
    Ok(FrequencyFrame::new(w.first_bin(), values))
}

/// Per-bin noise variance for a target SNR relative to the mean occupied-bin
/// symbol energy. An infinite SNR gives zero noise.
pub fn snr_to_sigma2(snr_db: f64, w: &FrequencyFrame) -> Result<f64> {
    if snr_db.is_nan() {
        return Err(invalid("SNR must not be NaN"));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let mean = w.energy() / w.len() as f64;
    Ok(mean / 10f64.powf(snr_db / 10.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingTap {
    pub delay: f64,
    pub power_db: f64,
    /// Rician K-factor (linear). Zero is Rayleigh, infinity is a fixed path.
    pub rician_k: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingProfile {
    taps: Vec<FadingTap>,
}

impl FadingProfile {
    pub fn new(taps: Vec<FadingTap>) -> Result<Self> {
        if taps.is_empty() {
            return Err(invalid("fading profile needs at least one tap"));
        }
        for t in &taps {
            if !(t.delay >= 0.0 && t.delay.is_finite()) || !t.power_db.is_finite() || t.rician_k.is_nan() || t.rician_k < 0.0 {
                return Err(invalid(format!("invalid fading tap {t:?}")));
            }
        }
        Ok(Self { taps })
    }

    /// Three-path indoor profile: 0/-10/-20 dB at 0/10/20 ns, K = 10/0/0.
    pub fn indoor_three_path() -> Self {
        Self {
            taps: vec![
                FadingTap { delay: 0.0, power_db: 0.0, rician_k: 10.0 },
                FadingTap { delay: 10e-9, power_db: -10.0, rician_k: 0.0 },
                FadingTap { delay: 20e-9, power_db: -20.0, rician_k: 0.0 },
            ],
        }
    }

    pub fn taps(&self) -> &[FadingTap] {
        &self.taps
    }

    /// Linear tap powers scaled to unit sum.
    pub fn normalized_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.taps.iter().map(|t| 10f64.powf(t.power_db / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealizedTap {
    pub delay: f64,
    pub gain: Complex64,
}

/// Draw one channel realization:
/// `g = sqrt(P) (sqrt(K/(K+1)) + sqrt(1/(K+1)) CN(0,1))`.
pub fn realize_fading<R: Rng + ?Sized>(
    profile: &FadingProfile,
    config: &WaveformConfig,
    rng: &mut R,
) -> Result<Vec<RealizedTap>> {
    let t_cp = config.t_cp();
    if let Some(t) = profile.taps.iter().find(|t| t.delay >= t_cp) {
        return Err(invalid(format!("tap delay {} s is not shorter than the CP", t.delay)));
    }
    Ok(profile
        .taps
        .iter()
        .zip(profile.normalized_powers())
        .map(|(tap, power)| {
            let (los, diffuse) = if tap.rician_k.is_infinite() {
                (1.0, 0.0)
            } else {
                let k = tap.rician_k;
                ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
            };
            let scatter = if diffuse > 0.0 { complex_gaussian(rng, 1.0) * diffuse } else { Complex64::new(0.0, 0.0) };
            RealizedTap { delay: tap.delay, gain: (Complex64::new(los, 0.0) + scatter) * power.sqrt() }
        })
        .collect())
}

/// Per-bin response `sum_i g_i exp(-j 2 pi k tau_i / T_chirp)` of a tap set.
pub fn multipath_response(taps: &[RealizedTap], config: &WaveformConfig) -> Cfr {
    let t_chirp = config.t_chirp();
    FrequencyFrame::from_fn(config, |k| {
        taps.iter()
            .map(|t| t.gain * Complex64::from_polar(1.0, -std::f64::consts::TAU * k as f64 * t.delay / t_chirp))
            .sum()
    })
}

/// Pass a frame through a multipath channel.
///
/// Tap delays may be fractional; each is applied as a linear phase on a
/// zero-padded spectrum of the frame, so the output is the linear (not
/// circular) convolution truncated to the input length.
pub fn apply_multipath(frame: &TimeFrame, taps: &[RealizedTap]) -> TimeFrame {
    let fft = FftCache::default();
    let len = frame.samples.len();
    let max_delay = taps.iter().map(|t| t.delay * frame.sample_rate).fold(0.0, f64::max);
    let padded = (2 * len + max_delay.ceil() as usize).next_power_of_two();
    let mut spectrum = vec![Complex64::new(0.0, 0.0); padded];
    spectrum[..len].copy_from_slice(&frame.samples);
    fft.forward(padded).process(&mut spectrum);
    for (bin, v) in spectrum.iter_mut().enumerate() {
        // signed frequency index so the phase ramp is the band-limited delay
        let k = if bin <= padded / 2 { bin as f64 } else { bin as f64 - padded as f64 };
        let response: Complex64 = taps
            .iter()
            .map(|t| {
                t.gain * Complex64::from_polar(1.0, -std::f64::consts::TAU * k * t.delay * frame.sample_rate / padded as f64)
            })
            .sum();
        *v *= response / padded as f64;
    }
    fft.inverse(padded).process(&mut spectrum);
    spectrum.truncate(len);
    TimeFrame { samples: spectrum, sample_rate: frame.sample_rate, cp_len: frame.cp_len }
}

/// Add `CN(0, sigma2)` noise to every sample.
pub fn add_awgn<R: Rng + ?Sized>(frame: &mut TimeFrame, sigma2: f64, rng: &mut R) -> Result<()> {
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(invalid(format!("noise variance must be non-negative, got {sigma2}")));
    }
    if sigma2 > 0.0 {
        for s in &mut frame.samples {
            *s += complex_gaussian(rng, sigma2);
        }
    }
    Ok(())
}

/// Parse `delay_s:power_db:k` triples separated by commas.
pub fn parse_fading_profile(spec: &str) -> Result<FadingProfile> {
    let taps = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|tap| {
            let fields: Vec<&str> = tap.split(':').map(str::trim).collect();
            let [delay, power, k] = fields.as_slice() else {
                return Err(Error::Config(format!("fading tap `{tap}` must be delay:power_db:K")));
            };
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Config(format!("bad number `{s}` in tap `{tap}`")));
            Ok(FadingTap { delay: num(delay)?, power_db: num(power)?, rician_k: num(k)? })
        })
        .collect::<Result<Vec<_>>>()?;
    FadingProfile::new(taps).map_err(|e| Error::Config(e.to_string()))
}

/// Parse `distance_m:coefficient` pairs separated by commas.
pub fn parse_scene(spec: &str) -> Result<RadarScene> {
    let targets = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|t| {
            let (d, a) = t
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("target `{t}` must be distance:coefficient")))?;
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{s}` in target `{t}`")));
            Ok(Target::new(num(d)?, num(a)?))
        })
        .collect::<Result<Vec<_>>>()?;
    RadarScene::new(targets).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::ChirpProfile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> WaveformConfig {
        WaveformConfig::ieee_80211ay(ChirpProfile::Linear)
    }

    #[test]
    fn zero_distance_target_is_flat() {
        let scene = RadarScene::new(vec![Target::new(0.0, 1.0)]).unwrap();
        let h = radar_cfr(&scene, &cfg()).unwrap();
        assert!(h.values().iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn three_meter_delay() {
        let tau = Target::new(3.0, -1.0).delay();
        assert!((tau - 20.013_845_711_889_2e-9).abs() < 1e-21, "{tau}");
    }

    #[test]
    fn cfr_is_linear_in_targets() {
        let c = cfg();
        let a = RadarScene::new(vec![Target::new(2.0, -1.0)]).unwrap();
        let b = RadarScene::new(vec![Target::new(5.0, -0.5)]).unwrap();
        let ab = RadarScene::new(vec![Target::new(2.0, -1.0), Target::new(5.0, -0.5)]).unwrap();
        let (ha, hb, hab) = (radar_cfr(&a, &c).unwrap(), radar_cfr(&b, &c).unwrap(), radar_cfr(&ab, &c).unwrap());
        for ((x, y), z) in ha.values().iter().zip(hb.values()).zip(hab.values()) {
            assert!((x + y - z).norm() < 1e-12);
        }
        for v in ha.values() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_target_beyond_cp() {
        let c = cfg();
        let scene = RadarScene::new(vec![Target::new(c.max_range() + 0.01, 1.0)]).unwrap();
        assert!(radar_cfr(&scene, &c).is_err());
        assert!(RadarScene::new(vec![Target::new(3.0, 1.0), Target::new(2.0, 1.0)]).is_err());
    }

    #[test]
    fn noiseless_channel_is_exact() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = FrequencyFrame::from_fn(&c, |k| Complex64::new(k as f64, 1.0));
        let flat = FrequencyFrame::from_fn(&c, |_| Complex64::new(1.0, 0.0));
        assert_eq!(apply_radar_channel(&w, &flat, 0.0, &mut rng).unwrap(), w);
        let h = radar_cfr(&RadarScene::new(vec![Target::new(4.2, -0.7)]).unwrap(), &c).unwrap();
        let b = apply_radar_channel(&w, &h, 0.0, &mut rng).unwrap();
        for ((bk, wk), hk) in b.values().iter().zip(w.values()).zip(h.values()) {
            assert!((bk.norm() - 0.7 * wk.norm()).abs() < 1e-9);
            assert!((bk / wk - hk).norm() < 1e-12);
        }
        assert!(apply_radar_channel(&w, &h, -1.0, &mut rng).is_err());
    }

    #[test]
    fn snr_conversion() {
        let c = cfg();
        let unit = FrequencyFrame::from_fn(&c, |_| Complex64::new(0.0, 1.0));
        assert!((snr_to_sigma2(0.0, &unit).unwrap() - 1.0).abs() < 1e-15);
        assert!((snr_to_sigma2(10.0, &unit).unwrap() - 0.1).abs() < 1e-15);
        assert!((snr_to_sigma2(3.0103, &unit).unwrap() - 0.5).abs() < 1e-6);
        assert_eq!(snr_to_sigma2(f64::INFINITY, &unit).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_tap_without_scatter() {
        let profile = FadingProfile::new(vec![
            FadingTap { delay: 0.0, power_db: 0.0, rician_k: f64::INFINITY },
            FadingTap { delay: 5e-9, power_db: 0.0, rician_k: f64::INFINITY },
        ])
        .unwrap();
        let taps = realize_fading(&profile, &cfg(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for t in taps {
            assert!((t.gain - Complex64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn fading_rejects_taps_beyond_cp() {
        let profile = FadingProfile::new(vec![FadingTap { delay: 60e-9, power_db: 0.0, rician_k: 0.0 }]).unwrap();
        assert!(realize_fading(&profile, &cfg(), &mut ChaCha8Rng::seed_from_u64(3)).is_err());
    }

    #[test]
    fn integer_delay_multipath_matches_shift() {
        let frame = TimeFrame {
            samples: (0..64).map(|i| Complex64::new((i as f64 * 0.3).sin(), (i as f64 * 0.17).cos())).collect(),
            sample_rate: 1.0,
            cp_len: 0,
        };
        let taps = [RealizedTap { delay: 3.0, gain: Complex64::new(0.0, 2.0) }];
        let out = apply_multipath(&frame, &taps);
        for n in 0..64 {
            let expected = if n >= 3 { frame.samples[n - 3] * Complex64::new(0.0, 2.0) } else { Complex64::new(0.0, 0.0) };
            assert!((out.samples[n] - expected).norm() < 1e-10, "n = {n}");
        }
    }

    #[test]
    fn parse_profiles_and_scenes() {
        let p = parse_fading_profile("0:0:10, 10e-9:-10:0, 20e-9:-20:0").unwrap();
        assert_eq!(p, FadingProfile::indoor_three_path());
        assert!(parse_fading_profile("0:0").is_err());
        let s = parse_scene("2.0:-1, 5:-0.5").unwrap();
        assert_eq!(s.targets(), &[Target::new(2.0, -1.0), Target::new(5.0, -0.5)]);
        assert!(parse_scene("5:-1, 2:-1").is_err());
    }
}
