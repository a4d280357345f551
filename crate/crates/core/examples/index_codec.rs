//! Bits to chirp indices and back, with and without index separation.
//!
//!     cargo run --example index_codec

use chirp_dfrc::codec::{bit_capacity, count_constrained, s_max, spectral_efficiency};
use chirp_dfrc::{Codec, SchemeParams};

fn main() -> chirp_dfrc::Result<()> {
    let m = 1448;
    for l in [1, 2, 4] {
        let params = SchemeParams::new(m, l, 2, 1)?;
        let cap = bit_capacity(&params)?;
        println!("M={m} L={l} H=2: p1={} p2={} p={} SE={:.5}", cap.p1, cap.p2, cap.p, spectral_efficiency(&params)?);
    }

    let smax = s_max(m)?;
    println!("s_max({m}) = {smax}, C = {}", count_constrained(m, smax)?);

    let codec = Codec::new(SchemeParams::new(m, 2, 2, smax)?)?;
    let bits: Vec<u8> = "110100101110001011010".bytes().map(|b| b - b'0').collect();
    let msg = codec.encode(&bits)?;
    println!("bits {:?}", String::from_utf8(bits.iter().map(|b| b + b'0').collect()).unwrap());
    println!("  -> indices {:?}, phases {:?}", msg.indices(), msg.phases());
    let back = codec.decode(&msg)?;
    assert_eq!(back, bits);
    println!("  -> decoded back to the same {} bits", back.len());
    Ok(())
}
