use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition};
use super::maddpg::{ActionMap, Maddpg};
use super::madqn::Madqn;
use super::nets::NetShape;
use super::obs::{FeatureScale, GlobalObs};
use super::policy::Policy;
use super::MarlError;
use crate::neural::AdamConfig;
use crate::num::Scalar;
use crate::sim::{JointAction, SimError, Station, StationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Actor-critic with recurrent window encoders.
    LstmMaddpg,
    /// Actor-critic reading only the newest exogenous row.
    Maddpg,
    /// Centralized discrete Q-learning.
    Madqn,
    Zero,
    Greedy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::LstmMaddpg,
        Algorithm::Maddpg,
        Algorithm::Madqn,
        Algorithm::Zero,
        Algorithm::Greedy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::LstmMaddpg => "lstm-maddpg",
            Algorithm::Maddpg => "maddpg",
            Algorithm::Madqn => "madqn",
            Algorithm::Zero => "zero",
            Algorithm::Greedy => "greedy",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub tau: f64,
    /// Exploration noise standard deviation as a fraction of full power.
    pub noise_start: f64,
    /// Per-episode multiplicative decay of the noise.
    pub noise_decay: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Weight of the squared pre-squash actor output in the actor loss.
    pub actor_reg: f64,
    pub seed: u64,
    /// Environment steps between updates.
    pub update_every: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    pub grad_clip: Option<f64>,
    pub shape: NetShape,
    /// Discrete levels per charger for the Q-learning baseline.
    pub levels: usize,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::LstmMaddpg,
            episodes: 200,
            batch_size: 256,
            buffer_capacity: 100_000,
            gamma: 0.99,
            tau: 0.01,
            noise_start: 0.3,
            noise_decay: 0.999,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            actor_reg: 1e-3,
            seed: 0,
            update_every: 1,
            warmup: 1000,
            grad_clip: None,
            shape: NetShape::default(),
            levels: 11,
            epsilon_start: 1.0,
            epsilon_decay: 0.99,
            epsilon_min: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        let bad = |field: &str, why: &str| Err(MarlError::Config(format!("{field}: {why}")));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau", "must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("batch_size", "batch and buffer must be positive");
        }
        if self.batch_size > self.buffer_capacity {
            return bad("batch_size", "must not exceed buffer_capacity");
        }
        if self.update_every == 0 {
            return bad("update_every", "must be at least 1");
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("actor_lr", "learning rates must be positive");
        }
        if !(self.actor_reg >= 0.0 && self.actor_reg.is_finite()) {
            return bad("actor_reg", "must be non-negative");
        }
        if !(self.noise_start >= 0.0 && self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return bad("noise_decay", "noise must be non-negative with decay in (0, 1]");
        }
        if self.levels < 2 {
            return bad("levels", "need at least 2");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_min) {
            return bad("epsilon_start", "exploration rates must lie in [0, 1]");
        }
        if self.shape.lstm_hidden == Some(0) {
            return bad("lstm_hidden", "must be positive");
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            clip_norm: self.grad_clip,
            ..AdamConfig::with_lr(lr)
        }
    }
}

/// Per-episode training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    /// Sum over slots of the per-charger mean reward.
    pub mean_reward: f64,
    pub energy_cost: f64,
    pub unfinished_demand: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<F> {
    pub policy: Policy<F>,
    pub curves: Vec<CurvePoint>,
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

/// Trains `cfg.algorithm` on stations produced by `make_env(episode)`.
///
/// Everything random derives from `cfg.seed`, so a fixed seed and factory
/// give identical curves and parameters.
pub fn train<F: Scalar, E>(
    cfg: &TrainConfig,
    station: &StationConfig<F>,
    scale: FeatureScale<F>,
    mut make_env: E,
) -> Result<TrainOutcome<F>, MarlError>
where
    E: FnMut(usize) -> Result<Station<F>, SimError>,
{
    cfg.validate()?;
    station.validate()?;
    let n = station.n_chargers;
    let map = ActionMap::from_config(station);
    let mut init = stream(cfg.seed, 0);
    match cfg.algorithm {
        Algorithm::Zero => Ok(TrainOutcome {
            policy: Policy::Zero,
            curves: vec![],
        }),
        Algorithm::Greedy => Ok(TrainOutcome {
            policy: Policy::Greedy { p_ch: station.p_ch_max },
            curves: vec![],
        }),
        Algorithm::LstmMaddpg | Algorithm::Maddpg => {
            let mut shape = cfg.shape.clone();
            if cfg.algorithm == Algorithm::Maddpg {
                shape.lstm_hidden = None;
            } else if shape.lstm_hidden.is_none() {
                shape.lstm_hidden = NetShape::default().lstm_hidden;
            }
            let nets = Maddpg::new(n, &shape, scale, map, cfg.adam(cfg.actor_lr), cfg.adam(cfg.critic_lr), &mut init)?;
            train_maddpg(cfg, nets, &mut make_env)
        }
        Algorithm::Madqn => {
            let nets = Madqn::new(n, cfg.levels, &cfg.shape, scale, &map, cfg.adam(cfg.critic_lr), &mut init)?;
            train_madqn(cfg, nets, &mut make_env)
        }
    }
}

fn curve_point<F: Scalar>(episode: usize, reward: F, st: &Station<F>) -> CurvePoint {
    CurvePoint {
        episode,
        mean_reward: reward.as_f64(),
        energy_cost: st.ledger().energy_cost.as_f64(),
        unfinished_demand: st.ledger().unfinished_demand.as_f64(),
    }
}

fn train_maddpg<F: Scalar, E>(cfg: &TrainConfig, mut nets: Maddpg<F>, make_env: &mut E) -> Result<TrainOutcome<F>, MarlError>
where
    E: FnMut(usize) -> Result<Station<F>, SimError>,
{
    let mut explore = stream(cfg.seed, 1);
    let mut buffer: ReplayBuffer<Transition<F>> = ReplayBuffer::new(cfg.buffer_capacity, cfg.seed ^ 0x5eed_b0ff);
    let (gamma, tau, reg) = (F::lit(cfg.gamma), F::lit(cfg.tau), F::lit(cfg.actor_reg));
    let mut curves = Vec::with_capacity(cfg.episodes);
    let mut steps = 0usize;
    for ep in 0..cfg.episodes {
        let mut env = make_env(ep)?;
        let n_inv = F::one() / F::from_usize(env.config().n_chargers).unwrap();
        let noise = cfg.noise_start * cfg.noise_decay.powi(ep as i32);
        let mut obs = GlobalObs::from_state(env.state());
        let mut feat = nets.scale.features(&obs);
        let mut reward = F::zero();
        while !env.is_done() {
            let a = nets.act(&obs, noise, &mut explore)?;
            let out = env.step(&JointAction(a.clone()))?;
            reward += out.rewards.r_total.iter().copied().sum::<F>() * n_inv;
            obs = GlobalObs::from_state(&out.next);
            let next = nets.scale.features(&obs);
            buffer.push(Transition {
                s: std::mem::replace(&mut feat, next.clone()),
                a,
                r: out.rewards.r_total,
                s_next: next,
                done: out.done,
            });
            steps += 1;
            if buffer.len() >= cfg.warmup.max(cfg.batch_size) && steps % cfg.update_every == 0 {
                let batch = buffer.sample(cfg.batch_size);
                nets.update(&batch, gamma, tau, reg)?;
            }
        }
        curves.push(curve_point(ep, reward, &env));
    }
    Ok(TrainOutcome {
        policy: Policy::Maddpg(nets),
        curves,
    })
}

fn train_madqn<F: Scalar, E>(cfg: &TrainConfig, mut nets: Madqn<F>, make_env: &mut E) -> Result<TrainOutcome<F>, MarlError>
where
    E: FnMut(usize) -> Result<Station<F>, SimError>,
{
    let mut explore = stream(cfg.seed, 1);
    let mut buffer: ReplayBuffer<Transition<F, usize>> = ReplayBuffer::new(cfg.buffer_capacity, cfg.seed ^ 0x5eed_b0ff);
    let (gamma, tau) = (F::lit(cfg.gamma), F::lit(cfg.tau));
    let mut curves = Vec::with_capacity(cfg.episodes);
    let mut steps = 0usize;
    for ep in 0..cfg.episodes {
        let mut env = make_env(ep)?;
        let n_inv = F::one() / F::from_usize(env.config().n_chargers).unwrap();
        let eps = (cfg.epsilon_start * cfg.epsilon_decay.powi(ep as i32)).max(cfg.epsilon_min);
        let mut obs = GlobalObs::from_state(env.state());
        let mut feat = nets.scale.features(&obs);
        let mut reward = F::zero();
        while !env.is_done() {
            let idx = nets.act(&obs, eps, &mut explore)?;
            let out = env.step(&JointAction(nets.to_kw(&idx)))?;
            reward += out.rewards.r_total.iter().copied().sum::<F>() * n_inv;
            obs = GlobalObs::from_state(&out.next);
            let next = nets.scale.features(&obs);
            buffer.push(Transition {
                s: std::mem::replace(&mut feat, next.clone()),
                a: idx,
                r: out.rewards.r_total,
                s_next: next,
                done: out.done,
            });
            steps += 1;
            if buffer.len() >= cfg.warmup.max(cfg.batch_size) && steps % cfg.update_every == 0 {
                let batch = buffer.sample(cfg.batch_size);
                nets.update(&batch, gamma, tau)?;
            }
        }
        curves.push(curve_point(ep, reward, &env));
    }
    Ok(TrainOutcome {
        policy: Policy::Madqn(nets),
        curves,
    })
}

/// Writes `episode,mean_reward,energy_cost,unfinished_demand` rows.
pub fn write_curves_csv<W: std::io::Write>(w: W, curves: &[CurvePoint]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["episode", "mean_reward", "energy_cost", "unfinished_demand"])?;
    for c in curves {
        wr.write_record([
            c.episode.to_string(),
            c.mean_reward.to_string(),
            c.energy_cost.to_string(),
            c.unfinished_demand.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
