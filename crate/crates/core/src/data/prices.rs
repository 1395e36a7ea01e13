use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{line_of, open, DataError};

/// A named time-of-use band covering `[start_hour, end_hour)`; wraps past
/// midnight when `start_hour > end_hour`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouBand {
    pub name: String,
    pub start_hour: f64,
    pub end_hour: f64,
    pub rate: f64,
}

/// Energy price source (currency/kWh).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriceSchedule {
    Tou { bands: Vec<TouBand> },
    Flat { rate: f64 },
    Trace { rates: Vec<f64> },
}

impl PriceSchedule {
    /// Artifact default purchase tariff: 0.12 off-peak (22:00 to 07:00), 0.30 otherwise.
    pub fn default_tou() -> Self {
        Self::Tou {
            bands: vec![
                TouBand {
                    name: "off-peak".into(),
                    start_hour: 22.0,
                    end_hour: 7.0,
                    rate: 0.12,
                },
                TouBand {
                    name: "peak".into(),
                    start_hour: 7.0,
                    end_hour: 22.0,
                    rate: 0.30,
                },
            ],
        }
    }

    /// Artifact default sell price: a flat wholesale rate.
    pub fn default_sell() -> Self {
        Self::Flat { rate: 0.08 }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad_rate = |r: f64| !(r >= 0.0) || !r.is_finite();
        match self {
            Self::Flat { rate } if bad_rate(*rate) => Err(DataError::Invalid(format!("negative rate {rate}"))),
            Self::Flat { .. } => Ok(()),
            Self::Trace { rates } => match rates.iter().find(|r| bad_rate(**r)) {
                Some(r) => Err(DataError::Invalid(format!("negative rate {r} in trace"))),
                None => Ok(()),
            },
            Self::Tou { bands } => validate_bands(bands),
        }
    }
}

fn validate_bands(bands: &[TouBand]) -> Result<(), DataError> {
    let mut spans = Vec::new();
    for b in bands {
        if !(b.rate >= 0.0) || !b.rate.is_finite() {
            return Err(DataError::Invalid(format!("band `{}` has negative rate", b.name)));
        }
        let in_day = |h: f64| (0.0..=24.0).contains(&h);
        if !in_day(b.start_hour) || !in_day(b.end_hour) || b.start_hour == b.end_hour {
            return Err(DataError::Invalid(format!("band `{}` has invalid hours", b.name)));
        }
        if b.start_hour < b.end_hour {
            spans.push((b.start_hour, b.end_hour, &b.name));
        } else {
            spans.push((b.start_hour, 24.0, &b.name));
            spans.push((0.0, b.end_hour, &b.name));
        }
    }
    spans.retain(|s| s.1 > s.0);
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cursor = 0.0;
    for (start, end, name) in spans {
        if (start - cursor).abs() > 1e-9 {
            let what = if start > cursor { "gap" } else { "overlap" };
            return Err(DataError::Invalid(format!("TOU {what} at hour {cursor} (band `{name}`)")));
        }
        cursor = end;
    }
    if (cursor - 24.0).abs() > 1e-9 {
        return Err(DataError::Invalid(format!("TOU gap at hour {cursor}")));
    }
    Ok(())
}

fn band_rate(bands: &[TouBand], hour: f64) -> Option<f64> {
    bands
        .iter()
        .find(|b| {
            if b.start_hour < b.end_hour {
                hour >= b.start_hour && hour < b.end_hour
            } else {
                hour >= b.start_hour || hour < b.end_hour
            }
        })
        .map(|b| b.rate)
}

/// Expands a schedule to one rate per slot; a TOU slot takes the band at its start time.
pub fn build_price_series(sched: &PriceSchedule, horizon: usize, dt_hours: f64) -> Result<Vec<f64>, DataError> {
    sched.validate()?;
    match sched {
        PriceSchedule::Flat { rate } => Ok(vec![*rate; horizon]),
        PriceSchedule::Trace { rates } => {
            if rates.len() < horizon {
                return Err(DataError::Invalid(format!(
                    "price trace has {} slots, horizon needs {horizon}",
                    rates.len()
                )));
            }
            Ok(rates.clone())
        }
        PriceSchedule::Tou { bands } => (0..horizon)
            .map(|s| {
                let hour = (s as f64 * dt_hours).rem_euclid(24.0);
                band_rate(bands, hour).ok_or_else(|| DataError::Invalid(format!("no TOU band covers hour {hour}")))
            })
            .collect(),
    }
}

/// Reads a `slot,rate` CSV into a trace schedule.
pub fn load_price_trace(path: &Path) -> Result<PriceSchedule, DataError> {
    parse_price_trace(open(path)?)
}

fn parse_price_trace<R: Read>(r: R) -> Result<PriceSchedule, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut rates = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let rate: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DataError::Row {
                line,
                msg: "bad rate".into(),
            })?;
        rates.push(rate);
    }
    let sched = PriceSchedule::Trace { rates };
    sched.validate()?;
    Ok(sched)
}
