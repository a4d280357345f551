//! Index-modulated circularly-shifted chirps for joint radar sensing and
//! communication over DFT-s-OFDM.
//!
//! The pipeline is split into small modules that can be used on their own:
//!
//! * [`codec`]: bits to chirp-index sets and PSK symbols, and back.
//! * [`waveform`]: FDSS coefficients and time-domain frame synthesis.
//! * [`channel`]: radar reflector scenes, multipath fading and AWGN.
//! * [`radar`]: matched-filter and LMMSE range estimation.
//! * [`comms`]: demodulation, despreading and index/PSK detection.
//! * [`sim`]: seeded Monte-Carlo campaigns with CSV output.

pub mod channel;
pub mod codec;
pub mod comms;
mod dsp;
pub mod error;
pub mod frame_io;
pub mod radar;
pub mod sim;
pub mod waveform;

pub use codec::{Codec, IndexMessage, SchemeParams};
pub use error::{Error, Result};
pub use waveform::{ChirpProfile, FrequencyFrame, TimeFrame, Waveform, WaveformConfig};
