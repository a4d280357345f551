//! End-to-end link: encode, synthesize, AWGN or fading channel, demodulate,
//! despread and detect with both detectors.
//!
//!     cargo run --release --example comm_link

use chirp_dfrc::channel::{add_awgn, apply_multipath, multipath_response, realize_fading, snr_to_sigma2, FadingProfile};
use chirp_dfrc::comms::{ml_detect, two_step_detect, ErrorCounts, Receiver};
use chirp_dfrc::{ChirpProfile, Codec, FrequencyFrame, SchemeParams, Waveform, WaveformConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> chirp_dfrc::Result<()> {
    let config = WaveformConfig::ieee_80211ay(ChirpProfile::Linear);
    let waveform = Waveform::new(config.clone())?;
    let receiver = Receiver::new(config.clone())?;
    let codec = Codec::new(SchemeParams::new(config.m, 2, 2, 362)?)?;
    let p = codec.capacity().p as usize;
    let profile = FadingProfile::indoor_three_path();
    let mut rng = ChaCha8Rng::seed_from_u64(11);

    for fading in [false, true] {
        for snr in [-20.0, -18.0, -16.0, -14.0] {
            let (mut ml, mut two) = (ErrorCounts::default(), ErrorCounts::default());
            for _ in 0..500 {
                let bits: Vec<u8> = (0..p).map(|_| rng.random_range(0..2)).collect();
                let msg = codec.encode(&bits)?;
                let w = waveform.frequency_symbols(&msg)?;
                let mut frame = waveform.frame_from_spectrum(&w);
                let h = if fading {
                    let taps = realize_fading(&profile, &config, &mut rng)?;
                    frame = apply_multipath(&frame, &taps);
                    multipath_response(&taps, &config)
                } else {
                    FrequencyFrame::from_fn(&config, |_| Complex64::new(1.0, 0.0))
                };
                add_awgn(&mut frame, snr_to_sigma2(snr, &w)? * config.n as f64, &mut rng)?;
                let y = receiver.demodulate(&frame)?;
                let x = receiver.equalize_despread(&y, &h, waveform.fdss())?;
                ml = ml.merge(ErrorCounts::compare(&ml_detect(&x, &codec)?.bits, &bits, p)?);
                two = two.merge(ErrorCounts::compare(&two_step_detect(&x, &codec)?.bits, &bits, p)?);
            }
            println!(
                "{:>6} {snr:>5} dB  ML ber {:.2e} bler {:.2e} | two-step ber {:.2e} bler {:.2e}",
                if fading { "fading" } else { "awgn" },
                ml.ber(),
                ml.bler(),
                two.ber(),
                two.bler()
            );
        }
    }
    Ok(())
}
