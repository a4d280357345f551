//! Peak-to-mean envelope power over random messages for both chirp shapes.
//!
//!     cargo run --release --example pmepr -- [messages]

use chirp_dfrc::sim::{run_pmepr_campaign, Campaign, Scenario};

fn main() -> chirp_dfrc::Result<()> {
    let messages = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2000);
    for chirp in ["linear", "sinusoidal"] {
        let mut c = Campaign::new(Scenario::Pmepr);
        c.set("chirp", chirp)?;
        c.trials = messages;
        for row in run_pmepr_campaign(&c)? {
            println!(
                "{:>10} L={}: max {:5.2} dB, mean {:5.2} dB over {} messages (bound {:.2} dB for sinusoidal)",
                row.profile,
                row.l,
                row.max_pmepr_db,
                row.mean_pmepr_db,
                row.messages,
                10.0 * (row.l as f64).log10()
            );
        }
    }
    Ok(())
}
