//! Largest index separation that keeps the pair-selection bit count, for a
//! range of `M`. Writes CSV to stdout.
//!
//!     cargo run --release --example smax_curve -- 8 2048 > smax.csv

use chirp_dfrc::sim::run_smax_sweep;

fn main() -> chirp_dfrc::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (lo, hi) = match args.as_slice() {
        [lo, hi] => (*lo, *hi),
        _ => (8, 2048),
    };
    println!("M,s_max,count_at_smax,p1");
    for row in run_smax_sweep(lo, hi)? {
        println!("{},{},{},{}", row.m, row.s_max, row.count_at_smax, row.p1);
    }
    Ok(())
}
