//! `simulate`: runs an SER sweep from a configuration file, writes the CSV
//! and a manifest next to it, and prints the report.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dcdiv::config::{apply_entry, parse_config_str};
use dcdiv::report::{emit_csv, emit_report, RunManifest};
use dcdiv::sim::Simulator;

#[derive(Parser, Debug)]
#[command(
    name = "simulate",
    version,
    about = "SER sweeps for Doppler-compensated beam diversity schemes"
)]
struct Args {
    /// Configuration file (`key = value` lines; empty means defaults).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; the manifest goes to `<path>.manifest`.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Scheme list, overriding `scheme` (e.g. `ssd_dc_k4,nodiv_dc`).
    #[arg(long)]
    scheme: Option<String>,
    /// SNR grid in dB, overriding `snr_db_list` (e.g. `0,10,20`).
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
}

fn run(args: Args) -> dcdiv::Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = parse_config_str(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &args.scheme {
        apply_entry(&mut cfg, "scheme", s)?;
    }
    if let Some(s) = &args.snr {
        apply_entry(&mut cfg, "snr_db_list", s)?;
    }
    let sim = Simulator::new(cfg.clone())?;
    let result = sim.run_sweep()?;
    emit_csv(&result, &args.out)?;
    let mut manifest_path = args.out.clone().into_os_string();
    manifest_path.push(".manifest");
    RunManifest::new(cfg).write(PathBuf::from(manifest_path))?;
    print!("{}", emit_report(&result));
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("simulate: {e}");
            ExitCode::FAILURE
        }
    }
}
