//! Multi-agent learners for the station: decentralized actors with
//! centralized critics, a centralized discrete Q baseline, replay, training,
//! evaluation and checkpoints.

mod buffer;
mod checkpoint;
mod eval;
mod maddpg;
mod madqn;
mod nets;
mod obs;
mod policy;
mod train;

pub use buffer::{ReplayBuffer, Transition};
pub use checkpoint::{write_atomic, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use eval::{
    charging_in_high_pv, charging_in_slots, evaluate, high_pv_slots, median_iqr, write_trace_csv, EpisodeMetrics, EvalReport,
    EvalTraceRow,
};
pub use maddpg::{actor_act, target_actions, update_actor, update_critic, ActionMap, AgentNets, Maddpg};
pub use madqn::{action_levels, argmax, Madqn, QNet};
pub use nets::{ActionValue, ActorCache, ActorNet, CriticCache, CriticNet, Encoder, NetShape};
pub use obs::{FeatureScale, Features, GlobalObs, LocalObs, LocalView, EXO_FEATURES, LOCAL_FEATURES};
pub use policy::Policy;
pub use train::{train, write_curves_csv, Algorithm, CurvePoint, TrainConfig, TrainOutcome};

use crate::neural::NeuralError;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum MarlError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("non-finite {0}; update aborted")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
