//! CSV reports, generator model files and raw sample files.
//!
//! Every CSV has a header row. Actuators and instants are 1-based in files,
//! quality levels 0-based. Vectors are written joined with `-`.
//!
//! Generator model text format, one item per line:
//!
//! ```text
//! gansched-generator 1
//! layers 4 8 1
//! leaky_slope 0.2
//! output tanh
//! cap 40
//! parameters 49
//! <one parameter per line>
//! ```
//!
//! Parameters are stored per layer: the weight matrix row-major
//! (output-major), then the bias vector.
//!
//! Sample files are flat arrays of little-endian `f64`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{Context, Result, bail, ensure};
use gansched_core::gan::{Mlp, OutputActivation, TrainedGenerator};
use gansched_core::scheduler::SchedulingVector;

use crate::online::RunMetrics;
use crate::reports::{Fig1Report, OracleRow, OutageRow, Table1Row};

pub fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("-")
}

fn sci(x: f64) -> String {
    format!("{x:e}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    csv::Writer::from_path(path).with_context(|| format!("opening {}", path.display()))
}

/// `quality,instant,outage,log10_outage`.
pub fn write_table1(path: &Path, rows: &[Table1Row]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["quality", "instant", "outage", "log10_outage"])?;
    for r in rows {
        w.write_record([r.quality.to_string(), r.instant.to_string(), sci(r.outage), format!("{:.4}", r.outage.log10())])?;
    }
    w.flush()?;
    Ok(())
}

/// `payload_bytes,snr_db,actuator,quality,optimal,proposed,proposed_mixture,predicted,predicted_below_floor,baseline,frames`.
pub fn write_outage_rows(path: &Path, rows: &[OutageRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "payload_bytes",
        "snr_db",
        "actuator",
        "quality",
        "optimal",
        "proposed",
        "proposed_mixture",
        "predicted",
        "predicted_below_floor",
        "baseline",
        "frames",
    ])?;
    for r in rows {
        w.write_record([
            r.payload_bytes.to_string(),
            r.snr_db.to_string(),
            (r.actuator + 1).to_string(),
            r.quality.to_string(),
            sci(r.optimal),
            sci(r.proposed),
            sci(r.proposed_mixture),
            sci(r.predicted),
            r.predicted_below_floor.to_string(),
            sci(r.baseline),
            r.frames.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `fig1_cdf.csv`: `series,samples,epochs,x,cdf` where series is
/// `empirical`, `analytic` or `gan`; `fig1_ks.csv`:
/// `samples,epochs,ks_empirical,ks_analytic_grid`.
pub fn write_fig1(dir: &Path, report: &Fig1Report) -> Result<()> {
    let mut w = writer(&dir.join("fig1_cdf.csv"))?;
    w.write_record(["series", "samples", "epochs", "x", "cdf"])?;
    for c in &report.curves {
        for (x, f) in report.grid.iter().zip(&c.cdf) {
            w.write_record([
                c.series.to_string(),
                c.samples.to_string(),
                c.epochs.to_string(),
                sci(*x),
                sci(*f),
            ])?;
        }
    }
    w.flush()?;
    let mut w = writer(&dir.join("fig1_ks.csv"))?;
    w.write_record(["samples", "epochs", "ks_empirical", "ks_analytic_grid"])?;
    for k in &report.ks {
        w.write_record([k.samples.to_string(), k.epochs.to_string(), sci(k.ks_empirical), sci(k.ks_analytic_grid)])?;
    }
    w.flush()?;
    for (samples, epochs, draws) in &report.synthetic {
        write_samples(&dir.join(format!("fig1_synthetic_n{samples}_e{epochs}.bin")), draws)?;
    }
    Ok(())
}

/// `quality,schedule_id,instants,actuator,instant,outage`.
pub fn write_oracle(path: &Path, rows: &[OracleRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["quality", "schedule_id", "instants", "actuator", "instant", "outage"])?;
    for r in rows {
        for (k, (&tau, &p)) in r.schedule.instants().iter().zip(&r.outages).enumerate() {
            w.write_record([
                join(&r.quality),
                r.schedule_id.to_string(),
                join(r.schedule.instants()),
                (k + 1).to_string(),
                tau.to_string(),
                sci(p),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `schedule_id,instants`.
pub fn write_schedules(path: &Path, schedules: &[SchedulingVector]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["schedule_id", "instants"])?;
    for (i, s) in schedules.iter().enumerate() {
        w.write_record([i.to_string(), join(s.instants())])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-frame tables of an online run into `dir`:
///
/// * `online_quality.csv`: `frame,quality,actuator,argmax_schedule,instant,predicted,achieved,mixture,optimal,baseline`
/// * `online_cells.csv`: `frame,actuator,instant,quality,samples,predicted_outage,analytic_outage,ks`
/// * `online_counts.csv`: `frame,actuator,quality,attempts,failures`
/// * `policy.csv`: `b,schedule_id,probability,frame`, one row per entry of
///   every policy row after each frame, where `frame` is the index of the
///   policy (the frame it will be used in)
/// * `schedules.csv`
pub fn write_online(dir: &Path, m: &RunMetrics) -> Result<()> {
    let mut w = writer(&dir.join("online_quality.csv"))?;
    w.write_record([
        "frame",
        "quality",
        "actuator",
        "argmax_schedule",
        "instant",
        "predicted",
        "achieved",
        "mixture",
        "optimal",
        "baseline",
    ])?;
    for r in &m.qualities {
        let s = &m.schedules[r.argmax_schedule];
        for k in 0..r.quality.len() {
            w.write_record([
                r.frame.to_string(),
                join(&r.quality),
                (k + 1).to_string(),
                r.argmax_schedule.to_string(),
                s.instants()[k].to_string(),
                sci(r.predicted[k]),
                sci(r.achieved[k]),
                sci(r.mixture[k]),
                sci(r.optimal[k]),
                sci(r.baseline[k]),
            ])?;
        }
    }
    w.flush()?;

    let mut w = writer(&dir.join("online_cells.csv"))?;
    w.write_record(["frame", "actuator", "instant", "quality", "samples", "predicted_outage", "analytic_outage", "ks"])?;
    for c in &m.cells {
        w.write_record([
            c.frame.to_string(),
            (c.cell.actuator + 1).to_string(),
            c.cell.instant.to_string(),
            c.cell.quality.to_string(),
            c.samples.to_string(),
            sci(c.predicted_outage),
            sci(c.analytic_outage),
            c.ks.map(sci).unwrap_or_default(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(&dir.join("online_counts.csv"))?;
    w.write_record(["frame", "actuator", "quality", "attempts", "failures"])?;
    for c in &m.counts {
        w.write_record([
            c.frame.to_string(),
            (c.actuator + 1).to_string(),
            c.quality.to_string(),
            c.attempts.to_string(),
            c.failures.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(&dir.join("policy.csv"))?;
    w.write_record(["b", "schedule_id", "probability", "frame"])?;
    for r in &m.qualities {
        for (s, p) in r.policy.iter().enumerate() {
            w.write_record([join(&r.quality), s.to_string(), sci(*p), (r.frame + 1).to_string()])?;
        }
    }
    w.flush()?;

    write_schedules(&dir.join("schedules.csv"), &m.schedules)?;
    for (cell, g) in &m.generators {
        let name = format!("generator_k{}_t{}_b{}.txt", cell.actuator + 1, cell.instant, cell.quality);
        save_generator(&dir.join("models").join(name), g)?;
    }
    Ok(())
}

pub fn save_generator(path: &Path, g: &TrainedGenerator) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let net = g.generator();
    writeln!(f, "gansched-generator 1")?;
    writeln!(f, "layers {}", join_spaced(net.layer_sizes()))?;
    writeln!(f, "leaky_slope {:?}", net.leaky_slope())?;
    writeln!(f, "output tanh")?;
    writeln!(f, "cap {:?}", g.normalization_cap())?;
    writeln!(f, "parameters {}", net.num_parameters())?;
    for p in net.parameters() {
        writeln!(f, "{p:?}")?;
    }
    f.flush()?;
    Ok(())
}

fn join_spaced(v: &[usize]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn load_generator(path: &Path) -> Result<TrainedGenerator> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();
    let mut next = |what: &str| -> Result<String> {
        lines.next().with_context(|| format!("{}: missing {what}", path.display()))?.map_err(Into::into)
    };
    let field = |line: String, key: &str| -> Result<String> {
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => bail!("{}: expected `{key} ...`, found {line:?}", path.display()),
        }
    };
    ensure!(next("header")? == "gansched-generator 1", "{}: not a generator model file", path.display());
    let layers: Vec<usize> = field(next("layers")?, "layers")?
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let slope: f64 = field(next("leaky_slope")?, "leaky_slope")?.parse()?;
    let output = field(next("output")?, "output")?;
    ensure!(output == "tanh", "{}: generator output must be tanh", path.display());
    let cap: f64 = field(next("cap")?, "cap")?.parse()?;
    let count: usize = field(next("parameters")?, "parameters")?.parse()?;
    let params = (0..count)
        .map(|_| next("parameter").and_then(|l| l.trim().parse::<f64>().map_err(Into::into)))
        .collect::<Result<Vec<_>>>()?;
    let net = Mlp::from_parameters(&layers, params, slope, OutputActivation::Tanh)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    TrainedGenerator::new(net, cap).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

pub fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for s in samples {
        f.write_all(&s.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut bytes)?;
    ensure!(bytes.len() % 8 == 0, "{}: length is not a multiple of 8", path.display());
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}
