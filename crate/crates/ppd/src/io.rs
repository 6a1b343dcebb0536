//! Scenario files and output artifacts.
//!
//! | file                 | columns / shape                                                      |
//! |----------------------|----------------------------------------------------------------------|
//! | `events.csv`         | `k,node_id,in_logic,op,out_logic,buffer_action,buffer_charge`        |
//! | `ledger*.csv`        | `k,mode,source_in,stored_delta,dissipated,load_delivered`            |
//! | `heatmap.csv`        | first row `row,<k>:<segment>...`, then `input` and `output` rows     |
//! | `trace_*.csv`        | `k,input,demand,chosen_op,V1_r,V2_r,V1_l,V2_l,abs_err`               |
//! | `summary.json`       | `{seed, p, slots, avg_err_with, avg_err_without}`                    |
//! | `metrics.json`       | full metrics including energy totals                                 |
//! | `models.json`        | continuous and discrete model per mode, row-major                    |
//!
//! Every number in a CSV is written with 9 significant digits.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ppd_core::circuit::{discretize, mode_matrices, CircuitParams, ContinuousModel, DiscreteModel, EnergyLedger, Mode};
use ppd_core::correction::TrackingRun;
use ppd_core::logic::UnaryOp;
use ppd_core::packet::TdmSchedule;
use ppd_core::router::RouterEvent;
use ppd_core::sim::{CircuitSlot, HeatMap, Scenario, Segment};
use ppd_core::SimError;
use serde::Serialize;
use thiserror::Error;

use crate::format::sig9;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot parse scenario {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid scenario {path}: {source}")]
    Invalid { path: PathBuf, source: SimError },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub fn parse_scenario(text: &str) -> Result<Scenario, serde_json::Error> {
    serde_json::from_str(text)
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.into(), source })?;
    let sc = parse_scenario(&text).map_err(|source| IoError::Parse { path: path.into(), source })?;
    sc.validate().map_err(|source| IoError::Invalid { path: path.into(), source })?;
    Ok(sc)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn op_name(op: UnaryOp) -> &'static str {
    match op {
        UnaryOp::Through => "through",
        UnaryOp::Not => "not",
    }
}

pub fn write_events<W: Write>(w: W, events: &[RouterEvent]) -> Result<(), IoError> {
    let mut out = csv_writer(w);
    out.write_record(["k", "node_id", "in_logic", "op", "out_logic", "buffer_action", "buffer_charge"])?;
    for e in events {
        out.write_record([
            e.k.to_string(),
            e.node_id.to_string(),
            e.in_logic.to_string(),
            e.op.name().to_string(),
            e.out_logic.map(|v| v.to_string()).unwrap_or_default(),
            e.buffer_action.as_str().to_string(),
            sig9(e.buffer_charge),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_ledger<W: Write>(w: W, rows: impl IntoIterator<Item = (u64, Mode, EnergyLedger)>) -> Result<(), IoError> {
    let mut out = csv_writer(w);
    out.write_record(["k", "mode", "source_in", "stored_delta", "dissipated", "load_delivered"])?;
    for (k, mode, l) in rows {
        out.write_record([
            k.to_string(),
            mode.as_str().to_string(),
            sig9(l.source_in),
            sig9(l.stored_delta),
            sig9(l.dissipated),
            sig9(l.load_delivered),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn circuit_ledger_rows(slots: &[CircuitSlot]) -> impl Iterator<Item = (u64, Mode, EnergyLedger)> + '_ {
    slots.iter().map(|s| (s.k, s.mode, s.ledger))
}

pub fn tracking_ledger_rows<'a>(
    run: &'a TrackingRun,
    ledgers: &'a [EnergyLedger],
) -> impl Iterator<Item = (u64, Mode, EnergyLedger)> + 'a {
    run.records.iter().zip(ledgers).map(|(r, l)| (r.k, r.mode, *l))
}

pub fn write_heatmap<W: Write>(w: W, map: &HeatMap, columns: &[(u64, Segment)]) -> Result<(), IoError> {
    let mut out = csv_writer(w);
    let mut header = vec!["row".to_string()];
    header.extend(columns.iter().map(|(k, seg)| format!("{k}:{}", seg.as_str())));
    out.write_record(&header)?;
    for (name, row) in [("input", &map.input), ("output", &map.output)] {
        let mut rec = vec![name.to_string()];
        rec.extend(row.iter().copied().map(sig9));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace<W: Write>(w: W, run: &TrackingRun) -> Result<(), IoError> {
    let mut out = csv_writer(w);
    out.write_record(["k", "input", "demand", "chosen_op", "V1_r", "V2_r", "V1_l", "V2_l", "abs_err"])?;
    for r in &run.records {
        out.write_record([
            r.k.to_string(),
            r.input.to_string(),
            r.demand.to_string(),
            op_name(r.chosen).to_string(),
            sig9(r.actual.0[0]),
            sig9(r.actual.0[1]),
            sig9(r.target.0[0]),
            sig9(r.target.0[1]),
            sig9(r.abs_err),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Continuous and discretized model of one mode.
#[derive(Debug, Clone, Serialize)]
pub struct ModelPair {
    pub continuous: ContinuousModel,
    pub discrete: DiscreteModel,
}

pub fn mode_models(params: &CircuitParams, period: f64) -> Result<BTreeMap<&'static str, ModelPair>, SimError> {
    let mut out = BTreeMap::new();
    for mode in Mode::ALL {
        let continuous = mode_matrices(params, mode);
        let discrete = discretize(&continuous, period)?;
        out.insert(mode.as_str(), ModelPair { continuous, discrete });
    }
    Ok(out)
}

pub fn schedule_to_json(schedule: &TdmSchedule) -> Result<String, serde_json::Error> {
    to_json(schedule)
}

pub fn schedule_from_json(text: &str) -> Result<TdmSchedule, serde_json::Error> {
    serde_json::from_str(text)
}

pub fn ensure_dir(dir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn write_file_with<F>(path: &Path, f: F) -> Result<(), IoError>
where
    F: FnOnce(File) -> Result<(), IoError>,
{
    f(File::create(path)?)
}
