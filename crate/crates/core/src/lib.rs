//! Decentralized energy management for an EV charging station with solar PV
//! and vehicle-to-grid, learned with LSTM-based multi-agent actor-critic
//! training and executed one charger at a time.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64` for ordinary use.

pub mod num;
pub mod data;
pub mod faults;
pub mod marl;
pub mod neural;
pub mod scenario;
pub mod sim;

pub use num::Scalar;

pub type StationConfig = sim::StationConfig<f64>;
pub type Station = sim::Station<f64>;
pub type EvSession = sim::EvSession<f64>;
pub type EpisodeLedger = sim::EpisodeLedger<f64>;
