use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{line_of, open, DataError};

/// Unit of the value column, declared by its header name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolarUnit {
    /// `slot,output`: fraction of the PV rating.
    Normalized,
    /// `slot,kw`: absolute output.
    Kw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weather {
    Sunny,
    Cloudy,
}

/// Reads a solar CSV and scales it to kW for a plant rated `pv_capacity`.
pub fn load_solar(path: &Path, pv_capacity: f64, horizon: Option<usize>) -> Result<Vec<f64>, DataError> {
    parse_solar(open(path)?, pv_capacity, horizon)
}

pub fn parse_solar<R: Read>(r: R, pv_capacity: f64, horizon: Option<usize>) -> Result<Vec<f64>, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let unit = match headers.get(1) {
        Some("output") => SolarUnit::Normalized,
        Some("kw") => SolarUnit::Kw,
        other => {
            return Err(DataError::Invalid(format!(
                "solar header must be `slot,output` or `slot,kw`, found {other:?}"
            )))
        }
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let row = |msg: String| DataError::Row { line, msg };
        let slot: usize = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| row("bad slot index".into()))?;
        if slot != out.len() {
            return Err(row(format!("expected slot {}, found {slot}", out.len())));
        }
        let v: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| row("bad solar value".into()))?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(row(format!("solar output must be non-negative, got {v}")));
        }
        out.push(match unit {
            SolarUnit::Normalized => v * pv_capacity,
            SolarUnit::Kw => v,
        });
    }
    if let Some(h) = horizon {
        if out.len() != h {
            return Err(DataError::Invalid(format!("solar trace has {} slots, expected {h}", out.len())));
        }
    }
    Ok(out)
}

pub fn write_solar<W: Write>(w: W, values: &[f64], unit: SolarUnit) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(w);
    let col = match unit {
        SolarUnit::Normalized => "output",
        SolarUnit::Kw => "kw",
    };
    wtr.write_record(["slot", col])?;
    for (i, v) in values.iter().enumerate() {
        wtr.write_record([i.to_string(), v.to_string()])?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// Normalized clear-sky output for `slots` slots of `dt_hours` starting at midnight.
///
/// Each slot takes the value at its midpoint of a sine arch between 06:00 and 18:00.
pub fn clear_sky_profile(slots: usize, dt_hours: f64) -> Vec<f64> {
    (0..slots)
        .map(|s| {
            let h = ((s as f64 + 0.5) * dt_hours) % 24.0;
            if (6.0..18.0).contains(&h) {
                (std::f64::consts::PI * (h - 6.0) / 12.0).sin().powf(1.2)
            } else {
                0.0
            }
        })
        .collect()
}

/// Normalized sunny or cloudy fixture over `days` days.
///
/// Cloudy slots are the clear-sky value attenuated by a seeded factor in
/// `[0.15, 0.55]`, so a cloudy profile never exceeds the sunny one.
pub fn weather_profile(weather: Weather, days: usize, dt_hours: f64, seed: u64) -> Vec<f64> {
    let slots = (days as f64 * 24.0 / dt_hours).round() as usize;
    let clear = clear_sky_profile(slots, dt_hours);
    match weather {
        Weather::Sunny => clear,
        Weather::Cloudy => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            clear.into_iter().map(|v| v * rng.random_range(0.15..=0.55)).collect()
        }
    }
}
