use std::f64::consts::TAU;

use chirp_dfrc::frame_io::{read_frame, write_frame, FRAME_MAGIC, HEADER_LEN};
use chirp_dfrc::waveform::compute_fdss;
use chirp_dfrc::{ChirpProfile, Codec, IndexMessage, SchemeParams, Waveform, WaveformConfig};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(profile: ChirpProfile, d: f64) -> WaveformConfig {
    WaveformConfig { n: 128, n_cp: 32, m: 64, l_d: -31, l_u: 32, d, f_sample: 1.0e9, f_c: 60.0e9, profile }
}

fn rel_rms(a: &[Complex64], b: &[Complex64]) -> f64 {
    let err: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let norm: f64 = b.iter().map(|v| v.norm_sqr()).sum();
    (err / norm).sqrt()
}

/// Sum of shifted band-limited chirps evaluated term by term.
fn fourier_series_oracle(wf: &Waveform, msg: &IndexMessage) -> Vec<Complex64> {
    let cfg = wf.config();
    let c = wf.fdss().coeffs();
    let scale = 1.0 / (msg.l() as f64).sqrt();
    (0..cfg.n)
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&i, &s) in msg.indices().iter().zip(msg.psk_symbols()) {
                for (k, ck) in c.iter() {
                    let u = n as f64 / cfg.n as f64 - i as f64 / cfg.m as f64;
                    acc += s * ck * Complex64::from_polar(1.0, TAU * k as f64 * u);
                }
            }
            acc * scale
        })
        .collect()
}

fn random_msg(codec: &Codec, rng: &mut ChaCha8Rng) -> IndexMessage {
    let bits: Vec<u8> = (0..codec.capacity().p).map(|_| rng.random_range(0..2)).collect();
    codec.encode(&bits).unwrap()
}

#[test]
fn dft_spread_chain_equals_fourier_series_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for profile in [ChirpProfile::Linear, ChirpProfile::Sinusoidal] {
        let wf = Waveform::new(small(profile, 40.0)).unwrap();
        for l in [1, 2, 3] {
            let codec = Codec::new(SchemeParams::new(64, l, 4, 1).unwrap()).unwrap();
            for _ in 0..5 {
                let msg = random_msg(&codec, &mut rng);
                let frame = wf.synthesize(&msg).unwrap();
                assert!(rel_rms(frame.payload(), &fourier_series_oracle(&wf, &msg)) < 1e-12);
            }
        }
    }
}

#[test]
fn sinusoidal_direct_synthesis_agrees_at_full_scale() {
    let wf = Waveform::new(WaveformConfig::ieee_80211ay(ChirpProfile::Sinusoidal)).unwrap();
    let codec = Codec::new(SchemeParams::new(1448, 2, 2, 362).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let msg = random_msg(&codec, &mut rng);
        let frame = wf.synthesize(&msg).unwrap();
        assert!(rel_rms(frame.payload(), &wf.synthesize_direct(&msg, 1).unwrap()) < 1e-9);
    }
}

#[test]
fn linear_chirp_truncation_error_matches_lost_energy() {
    // the residual of the direct comparison is the out-of-band part of the chirp
    let wf = Waveform::new(small(ChirpProfile::Linear, 40.0)).unwrap();
    let msg = IndexMessage::from_phases(vec![7], vec![0], 64, 2).unwrap();
    let dft = wf.oversampled_payload(&msg, 8).unwrap();
    let direct = wf.synthesize_direct(&msg, 8).unwrap();
    let lost = 1.0 - wf.fdss().captured_energy();
    let err = rel_rms(&dft, &direct);
    assert!((err * err - lost).abs() < 0.05 * lost + 1e-6, "{} vs {lost}", err * err);
}

#[test]
fn cyclic_prefix_and_length() {
    let wf = Waveform::new(WaveformConfig::desk_scale(ChirpProfile::Linear)).unwrap();
    let msg = IndexMessage::from_phases(vec![3, 90], vec![1, 0], 181, 2).unwrap();
    let frame = wf.synthesize(&msg).unwrap();
    assert_eq!(frame.samples.len(), 256 + 64);
    assert_eq!(frame.cyclic_prefix(), &frame.samples[256..]);
    assert_eq!(frame.sample_rate, 1.32e9);
}

#[test]
fn fdss_matches_direct_projection_and_converges() {
    let cfg = small(ChirpProfile::Sinusoidal, 40.0);
    let fdss = compute_fdss(&cfg, 8).unwrap();
    // c_k = (1/K) sum_n exp(j theta(n/K)) exp(-j 2 pi k n / K)
    let len = 8 * cfg.n;
    for k in [-31i64, -5, 0, 1, 20, 32] {
        let direct: Complex64 = (0..len)
            .map(|n| {
                let u = n as f64 / len as f64;
                Complex64::from_polar(1.0, cfg.profile.phase(u, cfg.d) - TAU * k as f64 * u)
            })
            .sum::<Complex64>()
            / len as f64;
        assert!((fdss.coeffs().get(k).unwrap() - direct).norm() < 1e-12);
    }
    for (cfg, tol) in [
        (WaveformConfig::ieee_80211ay(ChirpProfile::Sinusoidal), 1e-6),
        (WaveformConfig::ieee_80211ay(ChirpProfile::Linear), 1e-3),
    ] {
        let a = compute_fdss(&cfg, 8).unwrap();
        let b = compute_fdss(&cfg, 16).unwrap();
        let diff: f64 = a.coeffs().values().iter().zip(b.coeffs().values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < tol, "{}: {diff}", cfg.profile.name());
        assert!(a.captured_energy() >= 0.98);
    }
}

#[test]
fn message_power_is_ensemble_power_plus_cross_term() {
    let wf = Waveform::new(small(ChirpProfile::Linear, 40.0)).unwrap();
    let e = wf.ensemble_power();
    let c = wf.fdss().coeffs();
    let mut ensemble = 0.0;
    let mut count = 0;
    for i in 0..64 {
        for j in i + 1..64 {
            for (q1, q2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let msg = IndexMessage::from_phases(vec![i, j], vec![q1, q2], 64, 2).unwrap();
                let p = wf.message_power(&msg).unwrap();
                let s = msg.psk_symbols()[0] * msg.psk_symbols()[1].conj();
                let r: Complex64 = c
                    .iter()
                    .map(|(k, ck)| ck.norm_sqr() * Complex64::from_polar(1.0, -TAU * k as f64 * (i as f64 - j as f64) / 64.0))
                    .sum();
                assert!((p - (e + (s * r).re)).abs() < 1e-12);
                // Parseval: mean power of the (unnormalized IDFT) payload
                let frame = wf.synthesize(&msg).unwrap();
                let mean = frame.payload().iter().map(|v| v.norm_sqr()).sum::<f64>() / 128.0;
                assert!((mean - p).abs() < 1e-9);
                ensemble += p;
                count += 1;
            }
        }
    }
    assert!((ensemble / count as f64 - e).abs() < 1e-12);
}

#[test]
fn sinusoidal_single_chirp_has_constant_envelope() {
    let wf = Waveform::new(WaveformConfig::ieee_80211ay(ChirpProfile::Sinusoidal)).unwrap();
    let msg = IndexMessage::from_phases(vec![500], vec![1], 1448, 2).unwrap();
    assert!(wf.pmepr(&msg, 4).unwrap().abs() < 1e-6);
}

#[test]
fn frame_file_round_trip() {
    let wf = Waveform::new(WaveformConfig::desk_scale(ChirpProfile::Sinusoidal)).unwrap();
    let msg = IndexMessage::from_phases(vec![10, 100], vec![0, 1], 181, 2).unwrap();
    let frame = wf.synthesize(&msg).unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    write_frame(std::fs::File::create(file.path()).unwrap(), &frame).unwrap();
    let bytes = std::fs::read(file.path()).unwrap();
    assert_eq!(bytes.len(), HEADER_LEN + 16 * frame.samples.len());
    assert_eq!(u32::from_le_bytes(bytes[0..4].try_into().unwrap()), FRAME_MAGIC);
    assert_eq!(&bytes[0..4], b"CRFD");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize, frame.samples.len());
    assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 1_320_000_000);
    let re = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let im = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    assert_eq!(Complex64::new(re, im), frame.samples[0]);
    let back = read_frame(std::fs::File::open(file.path()).unwrap()).unwrap();
    assert_eq!(back.samples, frame.samples);
    assert_eq!(back.sample_rate, frame.sample_rate);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sinusoidal_pmepr_bound(i in 0usize..64, j in 0usize..64, k in 0usize..64, q in 0usize..8) {
        let wf = Waveform::new(small(ChirpProfile::Sinusoidal, 40.0)).unwrap();
        let mut idx = vec![i, j, k];
        idx.sort_unstable();
        idx.dedup();
        let l = idx.len();
        let phases: Vec<usize> = (0..l).map(|n| (q >> n) & 1).collect();
        let msg = IndexMessage::from_phases(idx, phases, 64, 2).unwrap();
        let pmepr = wf.pmepr(&msg, 8).unwrap();
        prop_assert!(pmepr <= 10.0 * (l as f64).log10() + 0.1, "{pmepr}");
    }

    #[test]
    fn synthesis_is_linear_in_the_symbols(i in 0usize..64, j in 0usize..64, qi in 0usize..4, qj in 0usize..4) {
        prop_assume!(i != j);
        let wf = Waveform::new(small(ChirpProfile::Linear, 40.0)).unwrap();
        let (a, b) = (i.min(j), i.max(j));
        let (qa, qb) = if i < j { (qi, qj) } else { (qj, qi) };
        let pair = wf.synthesize(&IndexMessage::from_phases(vec![a, b], vec![qa, qb], 64, 4).unwrap()).unwrap();
        let one = wf.synthesize(&IndexMessage::from_phases(vec![a], vec![qa], 64, 4).unwrap()).unwrap();
        let two = wf.synthesize(&IndexMessage::from_phases(vec![b], vec![qb], 64, 4).unwrap()).unwrap();
        for ((p, x), y) in pair.samples.iter().zip(&one.samples).zip(&two.samples) {
            prop_assert!((p * 2f64.sqrt() - x - y).norm() < 1e-12);
        }
    }
}
