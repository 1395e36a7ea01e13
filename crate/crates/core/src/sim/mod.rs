//! Charging-station environment: configuration, power dispatch, battery
//! physics, rewards and the episode ledger.

mod config;
mod env;
mod ledger;
pub mod physics;
pub mod reward;
mod trace;
mod types;

pub use config::StationConfig;
pub use env::{Departure, Station, StepOutcome};
pub use ledger::{episode_objective, EpisodeLedger};
pub use physics::{cycle_aging, dispatch, dissatisfaction, project_action, soc_update};
pub use reward::{
    completed_average_power, grid_penalty, reward_cost, reward_total, reward_user, CostTerms,
    RewardBreakdown,
};
pub use trace::{trace_rows, write_trace_csv, TraceRow};
pub use types::{
    BatteryDefaults, ChargerState, Dispatch, EvSession, ExoRow, ExogenousSeries, JointAction,
    StationState,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid station config `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("invalid session #{index}: {reason}")]
    InvalidSession { index: usize, reason: String },
    #[error("invalid exogenous series: {0}")]
    InvalidSeries(String),
    #[error("episode exhausted at slot {t} (horizon {horizon})")]
    EpisodeExhausted { t: usize, horizon: usize },
    #[error("expected {expected} actions, got {got}")]
    ActionArity { expected: usize, got: usize },
    #[error("charger {charger}: energy {energy} kWh outside [0, {capacity}] (unprojected action)")]
    SocBounds { charger: usize, energy: f64, capacity: f64 },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(String),
}
