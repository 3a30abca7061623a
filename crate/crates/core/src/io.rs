//! CSV readers and writers for every file the toolkit consumes or emits.
//!
//! | file | header |
//! |------|--------|
//! | observations | `frame,timestamp_s,marker_id,x_px` |
//! | decision trace | `frame,mode,theta_t,theta_r,theta_ref,steps,theta_o` |
//! | power trace | `mode,position_index,rx_x_m,rx_y_m,power_db` |
//! | outage curve | `threshold_db,ccdf` |
//! | AoA table | `measured_deg,est_2m,est_3m,est_4m[,err_2m,err_3m,err_4m]` |
//! | fit samples | `distance,power_db` |
//! | fitted line | `distance,log10_distance,power_db,fitted_db` |
//! | error stats | `distance_m,n,mean_abs_err_deg,max_abs_err_deg,max_abs_err_at_deg,boresight_err_deg` |
//!
//! Empty fields stand for absent values.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AoATableRow, ErrorStats, OutageCurve};
use crate::controller::{ControlDecision, DecisionMode};
use crate::geometry::PlanarPoint;
use crate::linkbudget::{self, LogDistanceFit};
use crate::simulator::{Mode, PowerSample, PowerTrace};
use crate::vision::{FrameObservations, MarkerObservation};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed rows:\n{}", .0.join("\n"))]
    Malformed(Vec<String>),
    #[error("frame {frame}: marker id {marker_id} appears more than once")]
    DuplicateMarker { frame: u64, marker_id: u32 },
    #[error("{0}")]
    Empty(&'static str),
}

/// Deserializes every record, collecting per-line failures instead of
/// stopping at the first one.
fn read_records<T, R>(reader: R) -> Result<Vec<(u64, T)>, IoError>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.headers()?;
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    for (i, result) in rdr.deserialize::<T>().enumerate() {
        match result {
            Ok(rec) => rows.push((i as u64 + 2, rec)),
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(i as u64 + 2);
                problems.push(format!("line {line}: {e}"));
            }
        }
    }
    if !problems.is_empty() {
        return Err(IoError::Malformed(problems));
    }
    Ok(rows)
}

fn write_records<T: Serialize, W: Write>(writer: W, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<(), IoError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(header)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ObservationRecord {
    frame: u64,
    timestamp_s: f64,
    marker_id: u32,
    x_px: f64,
}

pub const OBSERVATION_HEADER: [&str; 4] = ["frame", "timestamp_s", "marker_id", "x_px"];

/// Groups detections into frames ordered by frame index. Repeated marker IDs
/// within a frame are rejected.
pub fn read_observations<R: Read>(reader: R) -> Result<Vec<FrameObservations>, IoError> {
    let mut frames: BTreeMap<u64, Vec<MarkerObservation>> = BTreeMap::new();
    for (_, r) in read_records::<ObservationRecord, _>(reader)? {
        let obs = frames.entry(r.frame).or_default();
        if obs.iter().any(|o| o.marker_id == r.marker_id) {
            return Err(IoError::DuplicateMarker {
                frame: r.frame,
                marker_id: r.marker_id,
            });
        }
        obs.push(MarkerObservation {
            marker_id: r.marker_id,
            centroid_x_px: r.x_px,
            timestamp_s: r.timestamp_s,
        });
    }
    Ok(frames
        .into_iter()
        .map(|(frame_index, observations)| FrameObservations {
            frame_index,
            observations,
        })
        .collect())
}

pub fn write_observations<W: Write>(writer: W, frames: &[FrameObservations]) -> Result<(), IoError> {
    let rows = frames.iter().flat_map(|f| {
        f.observations.iter().map(move |o| ObservationRecord {
            frame: f.frame_index,
            timestamp_s: o.timestamp_s,
            marker_id: o.marker_id,
            x_px: o.centroid_x_px,
        })
    });
    write_records(writer, &OBSERVATION_HEADER, rows)
}

#[derive(Debug, Serialize, Deserialize)]
struct DecisionRecord {
    frame: u64,
    mode: String,
    theta_t: Option<f64>,
    theta_r: Option<f64>,
    theta_ref: Option<f64>,
    steps: i64,
    theta_o: f64,
}

pub const DECISION_HEADER: [&str; 7] = ["frame", "mode", "theta_t", "theta_r", "theta_ref", "steps", "theta_o"];

pub fn write_decisions<W: Write>(writer: W, decisions: &[ControlDecision]) -> Result<(), IoError> {
    let rows = decisions.iter().map(|d| DecisionRecord {
        frame: d.frame_index,
        mode: d.mode.as_str().to_string(),
        theta_t: d.theta_t,
        theta_r: d.theta_r,
        theta_ref: d.theta_ref,
        steps: d.steps_commanded,
        theta_o: d.new_theta_o,
    });
    write_records(writer, &DECISION_HEADER, rows)
}

pub fn read_decisions<R: Read>(reader: R) -> Result<Vec<ControlDecision>, IoError> {
    let mut out = Vec::new();
    let mut problems = Vec::new();
    for (line, r) in read_records::<DecisionRecord, _>(reader)? {
        let mode = match r.mode.as_str() {
            "active" => DecisionMode::Active,
            "static_fallback" => DecisionMode::StaticFallback,
            other => {
                problems.push(format!("line {line}: unknown decision mode '{other}'"));
                continue;
            }
        };
        out.push(ControlDecision {
            frame_index: r.frame,
            theta_t: r.theta_t,
            theta_r: r.theta_r,
            theta_ref: r.theta_ref,
            steps_commanded: r.steps,
            new_theta_o: r.theta_o,
            mode,
        });
    }
    if !problems.is_empty() {
        return Err(IoError::Malformed(problems));
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRecord {
    mode: String,
    position_index: usize,
    rx_x_m: f64,
    rx_y_m: f64,
    power_db: f64,
}

pub const TRACE_HEADER: [&str; 5] = ["mode", "position_index", "rx_x_m", "rx_y_m", "power_db"];

pub fn write_trace<W: Write>(writer: W, trace: &PowerTrace) -> Result<(), IoError> {
    let rows = trace.samples.iter().map(|s| TraceRecord {
        mode: trace.mode.as_str().to_string(),
        position_index: s.position_index,
        rx_x_m: s.rx_position.x,
        rx_y_m: s.rx_position.y,
        power_db: s.power_db,
    });
    write_records(writer, &TRACE_HEADER, rows)
}

/// Reads one or more traces; rows are grouped by mode in order of first appearance.
pub fn read_traces<R: Read>(reader: R) -> Result<Vec<PowerTrace>, IoError> {
    let mut traces: Vec<PowerTrace> = Vec::new();
    let mut problems = Vec::new();
    for (line, r) in read_records::<TraceRecord, _>(reader)? {
        let mode: Mode = match r.mode.parse() {
            Ok(m) => m,
            Err(e) => {
                problems.push(format!("line {line}: {e}"));
                continue;
            }
        };
        let sample = PowerSample {
            position_index: r.position_index,
            rx_position: PlanarPoint::new(r.rx_x_m, r.rx_y_m),
            power_db: r.power_db,
        };
        match traces.iter_mut().find(|t| t.mode == mode) {
            Some(t) => t.samples.push(sample),
            None => traces.push(PowerTrace {
                mode,
                samples: vec![sample],
            }),
        }
    }
    if !problems.is_empty() {
        return Err(IoError::Malformed(problems));
    }
    Ok(traces)
}

#[derive(Debug, Serialize, Deserialize)]
struct CcdfRecord {
    threshold_db: f64,
    ccdf: f64,
}

pub fn write_outage_curve<W: Write>(writer: W, curve: &OutageCurve) -> Result<(), IoError> {
    let rows = curve
        .thresholds_db
        .iter()
        .zip(&curve.ccdf)
        .map(|(&threshold_db, &ccdf)| CcdfRecord { threshold_db, ccdf });
    write_records(writer, &["threshold_db", "ccdf"], rows)
}

pub fn read_outage_curve<R: Read>(reader: R) -> Result<OutageCurve, IoError> {
    let (thresholds_db, ccdf) = read_records::<CcdfRecord, _>(reader)?
        .into_iter()
        .map(|(_, r)| (r.threshold_db, r.ccdf))
        .unzip();
    Ok(OutageCurve { thresholds_db, ccdf })
}

#[derive(Debug, Deserialize)]
struct AoARecord {
    measured_deg: f64,
    est_2m: Option<f64>,
    est_3m: Option<f64>,
    est_4m: Option<f64>,
    #[serde(default)]
    err_2m: Option<f64>,
    #[serde(default)]
    err_3m: Option<f64>,
    #[serde(default)]
    err_4m: Option<f64>,
}

/// Reads the AoA table. The printed error columns are optional.
pub fn read_aoa_table<R: Read>(reader: R) -> Result<Vec<AoATableRow>, IoError> {
    let rows: Vec<AoATableRow> = read_records::<AoARecord, _>(reader)?
        .into_iter()
        .map(|(_, r)| AoATableRow {
            measured_deg: r.measured_deg,
            est_2m: r.est_2m,
            est_3m: r.est_3m,
            est_4m: r.est_4m,
            printed_err_2m: r.err_2m,
            printed_err_3m: r.err_3m,
            printed_err_4m: r.err_4m,
        })
        .collect();
    if rows.is_empty() {
        return Err(IoError::Empty("AoA table has no rows"));
    }
    Ok(rows)
}

#[derive(Debug, Serialize, Deserialize)]
struct ErrorStatsRecord {
    distance_m: f64,
    n: usize,
    mean_abs_err_deg: f64,
    max_abs_err_deg: f64,
    max_abs_err_at_deg: f64,
    boresight_err_deg: Option<f64>,
}

pub fn write_error_stats<W: Write>(writer: W, stats: &[ErrorStats]) -> Result<(), IoError> {
    let rows = stats.iter().map(|s| ErrorStatsRecord {
        distance_m: s.distance_m,
        n: s.n,
        mean_abs_err_deg: s.mean_abs_err_deg,
        max_abs_err_deg: s.max_abs_err_deg,
        max_abs_err_at_deg: s.max_abs_err_at_deg,
        boresight_err_deg: s.boresight_err_deg,
    });
    write_records(
        writer,
        &["distance_m", "n", "mean_abs_err_deg", "max_abs_err_deg", "max_abs_err_at_deg", "boresight_err_deg"],
        rows,
    )
}

pub fn read_error_stats<R: Read>(reader: R) -> Result<Vec<ErrorStats>, IoError> {
    Ok(read_records::<ErrorStatsRecord, _>(reader)?
        .into_iter()
        .map(|(_, r)| ErrorStats {
            distance_m: r.distance_m,
            n: r.n,
            mean_abs_err_deg: r.mean_abs_err_deg,
            max_abs_err_deg: r.max_abs_err_deg,
            max_abs_err_at_deg: r.max_abs_err_at_deg,
            boresight_err_deg: r.boresight_err_deg,
        })
        .collect())
}

#[derive(Debug, Deserialize)]
struct FitSampleRecord {
    distance: f64,
    power_db: f64,
}

pub fn read_fit_samples<R: Read>(reader: R) -> Result<Vec<(f64, f64)>, IoError> {
    Ok(read_records::<FitSampleRecord, _>(reader)?
        .into_iter()
        .map(|(_, r)| (r.distance, r.power_db))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedPoint {
    pub distance: f64,
    pub log10_distance: f64,
    pub power_db: f64,
    pub fitted_db: f64,
}

/// Samples alongside the fitted line, sorted by distance.
pub fn fitted_line(samples: &[(f64, f64)], fit: &LogDistanceFit) -> Vec<FittedPoint> {
    let mut pts: Vec<FittedPoint> = samples
        .iter()
        .map(|&(distance, power_db)| FittedPoint {
            distance,
            log10_distance: distance.log10(),
            power_db,
            fitted_db: linkbudget::log_distance_power(fit, distance).unwrap_or(f64::NAN),
        })
        .collect();
    pts.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    pts
}

pub fn write_fitted_line<W: Write>(writer: W, points: &[FittedPoint]) -> Result<(), IoError> {
    write_records(writer, &["distance", "log10_distance", "power_db", "fitted_db"], points.iter())
}

pub fn read_fitted_line<R: Read>(reader: R) -> Result<Vec<FittedPoint>, IoError> {
    Ok(read_records::<FittedPoint, _>(reader)?.into_iter().map(|(_, r)| r).collect())
}
