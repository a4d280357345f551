//! Synthesize one frame, compare it with the sum of shifted chirps and dump
//! it in the binary frame format.
//!
//!     cargo run --release --example waveform_synthesis -- [out.bin]

use chirp_dfrc::frame_io::{read_frame, write_frame};
use chirp_dfrc::waveform::FDSS_OVERSAMPLE;
use chirp_dfrc::{ChirpProfile, Codec, SchemeParams, Waveform, WaveformConfig};

fn main() -> chirp_dfrc::Result<()> {
    let codec = Codec::new(SchemeParams::new(1448, 2, 2, 362)?)?;
    let bits: Vec<u8> = (0..21).map(|i| (i % 3 == 0) as u8).collect();
    let msg = codec.encode(&bits)?;

    for profile in [ChirpProfile::Linear, ChirpProfile::Sinusoidal] {
        let wf = Waveform::new(WaveformConfig::ieee_80211ay(profile.clone()))?;
        let frame = wf.synthesize(&msg)?;
        let direct = wf.synthesize_direct(&msg, 1)?;
        let payload = frame.payload();
        let err: f64 = payload.iter().zip(&direct).map(|(a, b)| (a - b).norm_sqr()).sum();
        let norm: f64 = direct.iter().map(|v| v.norm_sqr()).sum();
        println!(
            "{:>10}: FDSS keeps {:.5} of the chirp energy (oversample {}), DFT-s-OFDM vs direct rel. RMS {:.2e}, PMEPR {:.2} dB",
            profile.name(),
            wf.fdss().captured_energy(),
            FDSS_OVERSAMPLE,
            (err / norm).sqrt(),
            wf.pmepr(&msg, 4)?
        );
    }

    let path = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("frame.bin"));
    let wf = Waveform::new(WaveformConfig::ieee_80211ay(ChirpProfile::Sinusoidal))?;
    let frame = wf.synthesize(&msg)?;
    write_frame(std::fs::File::create(&path)?, &frame)?;
    let back = read_frame(std::fs::File::open(&path)?)?;
    assert_eq!(back.samples, frame.samples);
    println!("wrote {} samples ({} CP) to {}", frame.samples.len(), frame.cp_len, path.display());
    Ok(())
}
