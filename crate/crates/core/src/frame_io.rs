//! Binary frame dump.
//!
//! Layout, all little-endian: `u32` magic `0x44465243` (bytes `CRFD` on disk), `u32` total
//! sample count, `u64` sample rate in Hz, then interleaved `f64` (re, im)
//! pairs.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::waveform::TimeFrame;

pub const FRAME_MAGIC: u32 = 0x4446_5243;
pub const HEADER_LEN: usize = 16;

pub fn write_frame<W: Write>(mut out: W, frame: &TimeFrame) -> Result<()> {
    let count = u32::try_from(frame.samples.len()).map_err(|_| invalid("frame too long for the dump header"))?;
    let rate = frame.sample_rate.round();
    if !(rate >= 0.0 && rate < u64::MAX as f64) {
        return Err(invalid("sample rate not representable as u64 Hz"));
    }
    out.write_all(&FRAME_MAGIC.to_le_bytes())?;
    out.write_all(&count.to_le_bytes())?;
    out.write_all(&(rate as u64).to_le_bytes())?;
    for s in &frame.samples {
        out.write_all(&s.re.to_le_bytes())?;
        out.write_all(&s.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Read a dump back. The CP length is not stored, so the returned frame has
/// `cp_len = 0` unless the caller sets it.
pub fn read_frame<R: Read>(mut input: R) -> Result<TimeFrame> {
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header)?;
    let magic = u32::from_le_bytes(header[0..4].try_into().unwrap());
    if magic != FRAME_MAGIC {
        return Err(invalid(format!("bad frame magic {magic:#010x}")));
    }
    let count = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let rate = u64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut body = vec![0u8; count * 16];
    input.read_exact(&mut body)?;
    let samples = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok(TimeFrame { samples, sample_rate: rate as f64, cp_len: 0 })
}
