//! Experiment configuration: one TOML document describing the station, where
//! episodes come from, and how to train and evaluate on them.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    build_episodes, build_price_series, load_sessions, load_solar, synth_sessions, synth_solar, weather_profile,
    DataError, EpisodeConfig, EpisodeSpec, PriceSchedule, SynthParams, Weather,
};
use crate::faults::FaultMode;
use crate::marl::{FeatureScale, MarlError, TrainConfig};
use crate::num::Scalar;
use crate::sim::{SimError, Station, StationConfig};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Marl(#[from] MarlError),
}

impl ScenarioError {
    /// Problems with the configuration itself, as opposed to runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            ScenarioError::Parse(_)
                | ScenarioError::Invalid(_)
                | ScenarioError::Sim(SimError::InvalidConfig { .. })
                | ScenarioError::Marl(MarlError::Config(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub station: StationConfig<f64>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub episodes: EpisodeConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataConfig {
    Synthetic(SyntheticData),
    Files(FileData),
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig::Synthetic(SyntheticData::default())
    }
}

/// Seeded synthetic sessions and solar. Evaluation days follow the training days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticData {
    pub days: usize,
    pub eval_days: usize,
    pub seed: u64,
    pub buy: PriceSchedule,
    pub sell: PriceSchedule,
    pub params: SynthParams,
}

impl Default for SyntheticData {
    fn default() -> Self {
        Self {
            days: 14,
            eval_days: 4,
            seed: 0,
            buy: PriceSchedule::default_tou(),
            sell: PriceSchedule::default_sell(),
            params: SynthParams::default(),
        }
    }
}

/// Session and solar files; the last `eval_days` episodes are held out.
/// Relative paths are resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileData {
    pub sessions: PathBuf,
    pub solar: PathBuf,
    #[serde(default)]
    pub origin: Option<NaiveDate>,
    #[serde(default = "PriceSchedule::default_tou")]
    pub buy: PriceSchedule,
    #[serde(default = "PriceSchedule::default_sell")]
    pub sell: PriceSchedule,
    #[serde(default)]
    pub eval_days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub fault_count: usize,
    pub fault_seed: u64,
    pub fault_mode: FaultMode,
    /// Seed of the attenuation in cloudy evaluation profiles.
    pub weather_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            fault_count: 2,
            fault_seed: 0,
            fault_mode: FaultMode::Corrupt,
            weather_seed: 0,
        }
    }
}

/// Built episodes and everything needed to drive them.
#[derive(Debug, Clone)]
pub struct Scenario<F: Scalar> {
    pub station: StationConfig<F>,
    pub train: Vec<EpisodeSpec<F>>,
    pub eval: Vec<EpisodeSpec<F>>,
    pub scale: FeatureScale<F>,
    /// Sessions that could not be placed.
    pub dropped_sessions: usize,
}

impl<F: Scalar> Scenario<F> {
    /// Station for training episode `ep`: the training days in a fresh seeded
    /// order on every pass.
    pub fn train_env(&self, ep: usize, seed: u64) -> Result<Station<F>, SimError> {
        let n = self.train.len();
        if n == 0 {
            return Err(SimError::InvalidSeries("scenario has no training episodes".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((ep / n) as u64);
        order.shuffle(&mut rng);
        self.train[order[ep % n]].station(&self.station)
    }

    /// Evaluation episodes, or the training episodes when none are held out.
    pub fn eval_episodes(&self) -> &[EpisodeSpec<F>] {
        if self.eval.is_empty() {
            &self.train
        } else {
            &self.eval
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `path` and resolves relative data paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (DataConfig::Files(f), Some(dir)) = (&mut cfg.data, path.parent()) {
            for p in [&mut f.sessions, &mut f.solar] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.station.validate()?;
        self.train.validate()?;
        let e = &self.episodes;
        if e.slots_per_episode == 0 || e.history_len == 0 {
            return Err(ScenarioError::Invalid("episodes.slots_per_episode and episodes.history_len must be positive".into()));
        }
        let slots_per_day = 24.0 / self.station.dt;
        if (slots_per_day - slots_per_day.round()).abs() > 1e-9 {
            return Err(ScenarioError::Invalid("station.dt must divide 24 hours".into()));
        }
        match &self.data {
            DataConfig::Synthetic(s) => {
                if s.days == 0 {
                    return Err(ScenarioError::Invalid("data.days must be at least 1".into()));
                }
                s.buy.validate()?;
                s.sell.validate()?;
            }
            DataConfig::Files(f) => {
                f.buy.validate()?;
                f.sell.validate()?;
            }
        }
        Ok(())
    }

    fn slots_per_day(&self) -> usize {
        (24.0 / self.station.dt).round() as usize
    }

    /// Builds every episode. `weather` replaces the solar profile of the
    /// evaluation days with a sunny or cloudy fixture.
    pub fn build<F: Scalar>(&self, weather: Option<Weather>) -> Result<Scenario<F>, ScenarioError> {
        let dt = self.station.dt;
        let n = self.station.n_chargers;
        let cap = self.station.pv_capacity;
        let spd = self.slots_per_day();
        let (sessions, mut solar, buy_s, sell_s, train_days, eval_days) = match &self.data {
            DataConfig::Synthetic(s) => {
                let days = s.days + s.eval_days;
                let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
                let sessions = synth_sessions(&mut rng, n, days, &s.params, dt);
                let solar: Vec<f64> = synth_solar(&mut rng, days, dt, s.params.cloudy_day_probability)
                    .into_iter()
                    .map(|v| v * cap)
                    .collect();
                (sessions, solar, &s.buy, &s.sell, s.days, s.eval_days)
            }
            DataConfig::Files(f) => {
                let sessions = load_sessions(&f.sessions, dt, f.origin)?;
                let solar = load_solar(&f.solar, cap, None)?;
                let days = solar.len() / spd;
                if f.eval_days >= days {
                    return Err(ScenarioError::Invalid(format!(
                        "data.eval_days = {} leaves no training day out of {days}",
                        f.eval_days
                    )));
                }
                (sessions, solar, &f.buy, &f.sell, days - f.eval_days, f.eval_days)
            }
        };
        if let Some(w) = weather {
            let start = train_days * spd;
            let fixture = weather_profile(w, eval_days, dt, self.eval.weather_seed);
            for (dst, v) in solar[start..].iter_mut().zip(fixture) {
                *dst = v * cap;
            }
        }
        let horizon = solar.len();
        let buy = build_price_series(buy_s, horizon, dt)?;
        let sell = build_price_series(sell_s, horizon, dt)?;
        let set = build_episodes::<F>(&sessions, &solar, &buy, &sell, n, &self.episodes)?;
        let per_day = self.episodes.slots_per_episode;
        let split = (train_days * spd) / per_day;
        let mut train = set.episodes;
        let eval = train.split_off(split.min(train.len()));
        let price = buy.iter().chain(&sell).copied().fold(0.0, f64::max);
        let station: StationConfig<F> = self.station.cast();
        let scale = FeatureScale::new(&station, F::lit(self.episodes.battery.e_cap), per_day, F::lit(price));
        Ok(Scenario {
            station,
            train,
            eval,
            scale,
            dropped_sessions: set.dropped_overflow + set.dropped_outside,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ScenarioConfig::from_toml_str("[station]\nn_chargers = 3\n").unwrap();
        assert_eq!(cfg.data, DataConfig::default());
        let sc = cfg.build::<f64>(None).unwrap();
        assert_eq!(sc.train.len(), 14);
        assert_eq!(sc.eval.len(), 4);
    }

    #[test]
    fn missing_key_is_named() {
        let err = ScenarioConfig::from_toml_str("[station]\ndt = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("n_chargers"), "{err}");
        assert!(err.is_config());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ScenarioConfig::from_toml_str("[station]\nn_chargers = 2\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn weather_changes_only_eval_solar() {
        let cfg = ScenarioConfig::from_toml_str("[station]\nn_chargers = 2\n[data]\nsource = \"synthetic\"\ndays = 3\neval_days = 2\n").unwrap();
        let sunny = cfg.build::<f64>(Some(Weather::Sunny)).unwrap();
        let cloudy = cfg.build::<f64>(Some(Weather::Cloudy)).unwrap();
        assert_eq!(sunny.train, cloudy.train);
        for (s, c) in sunny.eval.iter().zip(&cloudy.eval) {
            assert_eq!(s.sessions, c.sessions);
            assert!(s.exo.pv_gen.iter().zip(&c.exo.pv_gen).all(|(a, b)| a >= b));
            assert!(s.exo.pv_gen.iter().sum::<f64>() > c.exo.pv_gen.iter().sum::<f64>());
        }
    }

    #[test]
    fn every_pass_visits_each_training_day_once() {
        let cfg = ScenarioConfig::from_toml_str("[station]\nn_chargers = 2\n").unwrap();
        let sc = cfg.build::<f64>(None).unwrap();
        let pass = |p: usize| {
            (p * 14..(p + 1) * 14)
                .map(|e| {
                    let env = sc.train_env(e, 3).unwrap();
                    sc.train.iter().position(|d| &d.exo == env.exogenous()).unwrap()
                })
                .collect::<Vec<_>>()
        };
        let (a, b) = (pass(0), pass(1));
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..14).collect::<Vec<_>>());
        assert_ne!(a, b);
    }
}
