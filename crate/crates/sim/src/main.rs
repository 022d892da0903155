use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use gansched::config::{self, ExperimentConfig};
use gansched::online::{self, RunMetrics};
use gansched::{io, reports};

#[derive(Parser, Debug)]
#[command(name = "gansched", version, about = "Data-driven actuator scheduling over correlated Rayleigh fading")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file (`key = value` lines)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Frame budget N
    #[arg(long, global = true)]
    frames: Option<usize>,
    /// Slots per frame M
    #[arg(long, global = true)]
    slots: Option<usize>,
    /// GAN training epochs E
    #[arg(long, global = true)]
    epochs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form conditional outage table
    Table1,
    /// Empirical, closed-form and GAN CDFs of one cell
    Fig1,
    /// Outage versus SNR for every payload
    Fig2,
    /// Proposed versus baseline outage versus SNR
    Fig3,
    /// One online run at the configured operating point
    Online,
    /// Closed-form optimal schedule for every quality vector
    Oracle,
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut c = match &common.config {
        Some(path) => config::parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if let Some(n) = common.frames {
        c.frames = n;
    }
    if let Some(m) = common.slots {
        c.slots = m;
    }
    if let Some(e) = common.epochs {
        c.gan.epochs = e;
    }
    c.validate()?;
    Ok(c)
}

fn progress(snr: f64, payload: f64, m: &RunMetrics) {
    eprintln!("{payload} bytes, {snr} dB: frame {} done", m.frames_run);
}

fn write_partial(out: &Path, err: &online::OnlineError) {
    let dir = out.join("partial");
    match io::write_online(&dir, &err.partial) {
        Ok(()) => eprintln!("partial metrics written to {}", dir.display()),
        Err(e) => eprintln!("could not write partial metrics: {e:#}"),
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = load(&cli.common)?;
    let out = &cli.common.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match cli.command {
        Command::Table1 => {
            let rows = reports::table1_report(&c)?;
            io::write_table1(&out.join("table1.csv"), &rows)?;
            for r in &rows {
                println!("B={} tau={:>3}  log10 outage {:.3}", r.quality, r.instant, r.outage.log10());
            }
        }
        Command::Fig1 => {
            let report = reports::fig1_report(&c)?;
            io::write_fig1(out, &report)?;
            for k in &report.ks {
                println!("samples {:>6} epochs {:>4}  ks {:.4}", k.samples, k.epochs, k.ks_empirical);
            }
        }
        Command::Fig2 | Command::Fig3 => {
            let fig2 = matches!(cli.command, Command::Fig2);
            let result = if fig2 {
                reports::fig2_report(&c, &mut progress)
            } else {
                reports::fig3_report(&c, &mut progress)
            };
            let rows = match result {
                Ok(rows) => rows,
                Err(reports::ReportError::Online { source, snr_db, payload_bytes }) => {
                    write_partial(out, &source);
                    anyhow::bail!("online run at {snr_db} dB, {payload_bytes} bytes: {source}");
                }
                Err(e) => return Err(e.into()),
            };
            let name = if fig2 { "fig2.csv" } else { "fig3.csv" };
            io::write_outage_rows(&out.join(name), &rows)?;
            for r in &rows {
                println!(
                    "{:>5} bytes {:>4} dB B={}  optimal {:.3e} proposed {:.3e} predicted {}{:.3e} baseline {:.3e}",
                    r.payload_bytes,
                    r.snr_db,
                    r.quality,
                    r.optimal,
                    r.proposed,
                    if r.predicted_below_floor { "<" } else { "" },
                    r.predicted,
                    r.baseline
                );
            }
        }
        Command::Online => {
            let m = match online::run_online_at(&c, c.online_snr_db, c.online_payload_bytes, &mut |m| {
                progress(c.online_snr_db, c.online_payload_bytes, m)
            }) {
                Ok(m) => m,
                Err(e) => {
                    write_partial(out, &e);
                    return Err(e.into());
                }
            };
            io::write_online(out, &m)?;
            for r in m.final_qualities() {
                println!(
                    "b={} schedule {} achieved {:?}",
                    io::join(&r.quality),
                    io::join(m.schedules[r.argmax_schedule].instants()),
                    r.achieved
                );
            }
        }
        Command::Oracle => {
            let rows = reports::oracle_report(&c)?;
            io::write_oracle(&out.join("oracle.csv"), &rows)?;
            for r in &rows {
                println!("b={} schedule {} outage {:?}", io::join(&r.quality), io::join(r.schedule.instants()), r.outages);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
