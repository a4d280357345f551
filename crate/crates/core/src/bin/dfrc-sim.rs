use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use chirp_dfrc::frame_io::write_frame;
use chirp_dfrc::sim::{run_campaign, write_csv, Campaign, CampaignOutput, Metadata, Scenario};
use chirp_dfrc::{Error, Result};

/// Monte-Carlo campaigns for index-modulated chirp DFRC.
#[derive(Parser, Debug)]
#[command(name = "dfrc-sim", version)]
struct Cli {
    /// radar-1target, radar-2target, comm-awgn, comm-fading, pmepr, smax-sweep or synthesize
    #[arg(value_name = "SCENARIO")]
    scenario_pos: Option<String>,
    #[arg(long)]
    scenario: Option<String>,
    /// key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// comma-separated SNR points in dB (`inf` for noiseless)
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV (or frame file for `synthesize`); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// per-trial records as CSV
    #[arg(long)]
    trials_out: Option<PathBuf>,
    #[arg(long = "is", overrides_with = "no_is")]
    is: bool,
    #[arg(long = "no-is")]
    no_is: bool,
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    detector: Option<String>,
    #[arg(long)]
    chirp: Option<String>,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long = "H")]
    h: Option<usize>,
    #[arg(long = "S")]
    s: Option<usize>,
    #[arg(long)]
    m_min: Option<usize>,
    #[arg(long)]
    m_max: Option<usize>,
    /// N=256, N_CP=64, M=181, D=160, 1.32 Gsps
    #[arg(long)]
    desk_scale: bool,
}

fn build_campaign(cli: &Cli) -> Result<Campaign> {
    let scenario = match (&cli.scenario_pos, &cli.scenario) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!("scenario given twice: `{a}` and `{b}`")));
        }
        (Some(s), _) | (None, Some(s)) => Some(s.parse::<Scenario>()?),
        (None, None) => None,
    };
    let mut campaign = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let mut c = Campaign::from_config_str(&text, scenario)?;
            if let Some(s) = scenario {
                c.scenario = s;
            }
            c
        }
        None => Campaign::new(scenario.ok_or_else(|| Error::Config("no scenario given".into()))?),
    };
    if cli.desk_scale {
        campaign.set("preset", "desk")?;
    }
    let mut overrides: Vec<(&str, String)> = Vec::new();
    let mut push = |k, v: Option<String>| {
        if let Some(v) = v {
            overrides.push((k, v));
        }
    };
    push("chirp", cli.chirp.clone());
    push("snr", cli.snr.clone());
    push("trials", cli.trials.map(|v| v.to_string()));
    push("seed", cli.seed.map(|v| v.to_string()));
    push("estimator", cli.estimator.clone());
    push("detector", cli.detector.clone());
    push("L", cli.l.map(|v| v.to_string()));
    push("H", cli.h.map(|v| v.to_string()));
    push("S", cli.s.map(|v| v.to_string()));
    push("m_min", cli.m_min.map(|v| v.to_string()));
    push("m_max", cli.m_max.map(|v| v.to_string()));
    if cli.is {
        push("is", Some("on".into()));
    } else if cli.no_is {
        push("is", Some("off".into()));
    }
    for (k, v) in overrides {
        campaign.set(k, &v).map_err(|e| Error::Config(format!("--{k}: {}", strip_prefix(&e))))?;
    }
    campaign.validate()?;
    Ok(campaign)
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: &Cli) -> Result<()> {
    let campaign = build_campaign(cli)?;
    let output = run_campaign(&campaign)?;
    let meta = Metadata::for_campaign(&campaign);
    match &output {
        CampaignOutput::Radar { rows, .. } => {
            rows.iter().for_each(|r| eprintln!("{r}"));
            write_csv(sink(&cli.out)?, &meta, rows)?;
        }
        CampaignOutput::Comm { rows, .. } => {
            rows.iter().for_each(|r| eprintln!("{r}"));
            write_csv(sink(&cli.out)?, &meta, rows)?;
        }
        CampaignOutput::Pmepr(rows) => write_csv(sink(&cli.out)?, &meta, rows)?,
        CampaignOutput::Smax(rows) => write_csv(sink(&cli.out)?, &meta, rows)?,
        CampaignOutput::Frame { frame, message } => {
            let path = cli.out.as_ref().ok_or_else(|| Error::Config("synthesize needs --out".into()))?;
            let mut file = BufWriter::new(File::create(path)?);
            write_frame(&mut file, frame)?;
            file.flush()?;
            eprintln!(
                "wrote {} samples to {} (indices {:?}, phases {:?})",
                frame.samples.len(),
                path.display(),
                message.indices(),
                message.phases()
            );
        }
    }
    if let Some(path) = &cli.trials_out {
        write_csv(sink(&Some(path.clone()))?, &meta, output.trial_records())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
