//! Loading and synthesizing EV sessions, solar traces and price series, and
//! cutting them into per-day episodes.

mod episodes;
mod prices;
mod sessions;
mod solar;
mod synth;

pub use episodes::{build_episodes, EpisodeConfig, EpisodeSet, EpisodeSpec};
pub use prices::{build_price_series, load_price_trace, PriceSchedule, TouBand};
pub use sessions::{load_sessions, parse_sessions, write_sessions, SessionRecord};
pub use solar::{clear_sky_profile, load_solar, parse_solar, weather_profile, write_solar, SolarUnit, Weather};
pub use synth::{synth_sessions, synth_solar, SynthParams};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Row { line: u64, msg: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn open(path: &std::path::Path) -> Result<std::fs::File, DataError> {
    std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}
