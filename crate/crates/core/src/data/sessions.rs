use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{line_of, open, DataError};

/// A charging session quantized to the slot grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    /// First slot the vehicle is plugged in for.
    pub arrival_slot: usize,
    /// Slot at which the vehicle has left.
    pub departure_slot: usize,
    pub kwh_requested: f64,
    /// Charger or site identifier from the source data.
    pub charger_id: String,
}

const FORMATS: [&str; 4] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"];

fn parse_ts(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads a session CSV with columns `arrival,departure,kwh_requested,charger_id`.
///
/// Slots count from midnight of `origin`, or of the earliest arrival date when
/// `origin` is `None`. Arrivals round up and departures round down to the
/// slot grid; sessions left with no whole slot are dropped.
pub fn load_sessions(path: &Path, dt_hours: f64, origin: Option<NaiveDate>) -> Result<Vec<SessionRecord>, DataError> {
    parse_sessions(open(path)?, dt_hours, origin)
}

pub fn parse_sessions<R: Read>(r: R, dt_hours: f64, origin: Option<NaiveDate>) -> Result<Vec<SessionRecord>, DataError> {
    if !(dt_hours > 0.0) {
        return Err(DataError::Invalid("slot length must be positive".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut raw = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let row = |msg: String| DataError::Row { line, msg };
        if rec.len() < 4 {
            return Err(row(format!("expected 4 fields, found {}", rec.len())));
        }
        let arrival = parse_ts(&rec[0]).ok_or_else(|| row(format!("bad arrival timestamp `{}`", &rec[0])))?;
        let departure = parse_ts(&rec[1]).ok_or_else(|| row(format!("bad departure timestamp `{}`", &rec[1])))?;
        let kwh: f64 = rec[2].parse().map_err(|_| row(format!("bad energy `{}`", &rec[2])))?;
        if departure <= arrival {
            return Err(row(format!("departure {departure} not after arrival {arrival}")));
        }
        if !(kwh >= 0.0) || !kwh.is_finite() {
            return Err(row(format!("energy must be non-negative, got {kwh}")));
        }
        raw.push((arrival, departure, kwh, rec[3].to_string()));
    }
    let Some(first) = raw.iter().map(|r| r.0).min() else {
        return Ok(Vec::new());
    };
    let origin = origin.unwrap_or(first.date()).and_hms_opt(0, 0, 0).unwrap();
    let slot_secs = dt_hours * 3600.0;
    let mut out = Vec::with_capacity(raw.len());
    for (arrival, departure, kwh, charger_id) in raw {
        let a = (arrival - origin).num_seconds() as f64 / slot_secs;
        let d = (departure - origin).num_seconds() as f64 / slot_secs;
        if a < 0.0 {
            return Err(DataError::Invalid(format!("arrival {arrival} precedes origin {origin}")));
        }
        // Tolerate float noise on exact slot boundaries.
        let arrival_slot = (a - 1e-9).ceil().max(0.0) as usize;
        let departure_slot = (d + 1e-9).floor() as usize;
        if departure_slot > arrival_slot {
            out.push(SessionRecord {
                arrival_slot,
                departure_slot,
                kwh_requested: kwh,
                charger_id,
            });
        }
    }
    Ok(out)
}

/// Writes records back as timestamps on the slot grid starting at `origin`.
pub fn write_sessions<W: Write>(w: W, records: &[SessionRecord], dt_hours: f64, origin: NaiveDate) -> Result<(), DataError> {
    let base = origin.and_hms_opt(0, 0, 0).unwrap();
    let at = |slot: usize| {
        let secs = (slot as f64 * dt_hours * 3600.0).round() as i64;
        (base + Duration::seconds(secs)).format("%Y-%m-%d %H:%M:%S").to_string()
    };
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["arrival", "departure", "kwh_requested", "charger_id"])?;
    for r in records {
        wtr.write_record([
            at(r.arrival_slot),
            at(r.departure_slot),
            r.kwh_requested.to_string(),
            r.charger_id.clone(),
        ])?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}
