//! Run a campaign from a config file and write the CSV, the same path the
//! `dfrc-sim` binary takes.
//!
//!     cargo run --release --example campaign -- crates/core/examples/configs/radar-1target.cfg [out.csv]

use chirp_dfrc::sim::{run_campaign, write_csv, Campaign, CampaignOutput, Metadata};

fn main() -> chirp_dfrc::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "crates/core/examples/configs/radar-1target.cfg".into());
    let campaign = Campaign::from_config_str(&std::fs::read_to_string(&path)?, None)?;
    campaign.validate()?;
    println!("{} ({} trials/point, seed {}), config digest {}", campaign.scenario.name(), campaign.trials, campaign.seed, campaign.digest());

    let meta = Metadata::for_campaign(&campaign);
    let out: Box<dyn std::io::Write> = match args.next() {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    match run_campaign(&campaign)? {
        CampaignOutput::Radar { rows, .. } => write_csv(out, &meta, &rows),
        CampaignOutput::Comm { rows, .. } => write_csv(out, &meta, &rows),
        CampaignOutput::Pmepr(rows) => write_csv(out, &meta, &rows),
        CampaignOutput::Smax(rows) => write_csv(out, &meta, &rows),
        CampaignOutput::Frame { frame, .. } => chirp_dfrc::frame_io::write_frame(out, &frame),
    }
}
