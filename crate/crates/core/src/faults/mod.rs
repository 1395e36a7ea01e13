//! Partial charger faults: corrupted reports from chosen chargers, and paired
//! normal/faulty rollouts that measure how far healthy chargers' actions move.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::EpisodeSpec;
use crate::marl::{evaluate, GlobalObs, MarlError, Policy};
use crate::num::Scalar;
use crate::sim::StationConfig;

/// What a fault does to a charger.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultMode {
    /// The charger keeps operating but its reported observation is replaced by noise.
    #[default]
    Corrupt,
    /// The charger stops delivering power; observations stay truthful.
    Offline,
}

/// Which chargers fail, how, and the seed of the corruption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultModel {
    pub faulty: Vec<usize>,
    pub seed: u64,
    #[serde(default)]
    pub mode: FaultMode,
}

impl FaultModel {
    /// # Errors
    /// Duplicate or out-of-range ids.
    pub fn new(mut faulty: Vec<usize>, n_chargers: usize, seed: u64) -> Result<Self, MarlError> {
        faulty.sort_unstable();
        let fm = Self {
            faulty,
            seed,
            mode: FaultMode::Corrupt,
        };
        fm.validate(n_chargers)?;
        Ok(fm)
    }

    /// `count` distinct chargers chosen with `seed`.
    pub fn random(count: usize, n_chargers: usize, seed: u64) -> Result<Self, MarlError> {
        if count > n_chargers {
            return Err(MarlError::Config(format!("{count} faulty chargers requested, station has {n_chargers}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(sample(&mut rng, n_chargers, count).into_vec(), n_chargers, seed)
    }

    /// Two faulty chargers, or all of them on smaller stations.
    pub fn default_for(n_chargers: usize, seed: u64) -> Result<Self, MarlError> {
        Self::random(2.min(n_chargers), n_chargers, seed)
    }

    pub fn with_mode(mut self, mode: FaultMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self, n_chargers: usize) -> Result<(), MarlError> {
        for (k, &i) in self.faulty.iter().enumerate() {
            if i >= n_chargers {
                return Err(MarlError::Config(format!("faulty charger {i} outside 0..{n_chargers}")));
            }
            if self.faulty[..k].contains(&i) {
                return Err(MarlError::Config(format!("faulty charger {i} listed twice")));
            }
        }
        Ok(())
    }

    pub fn is_faulty(&self, i: usize) -> bool {
        self.faulty.contains(&i)
    }

    pub fn healthy(&self, n_chargers: usize) -> Vec<usize> {
        (0..n_chargers).filter(|&i| !self.is_faulty(i)).collect()
    }
}

/// Upper bounds of the uniform corruption draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ObsBounds<F> {
    /// kWh, bound of remaining demand.
    pub energy: F,
    /// Hours, bound of remaining time.
    pub time: F,
}

impl<F: Scalar> ObsBounds<F> {
    /// Largest battery in the episode (60 kWh when empty) and the episode duration.
    pub fn for_episode(spec: &EpisodeSpec<F>, cfg: &StationConfig<F>) -> Self {
        let energy = spec
            .sessions
            .iter()
            .map(|s| s.e_cap)
            .fold(None, |m: Option<F>, x| Some(m.map_or(x, |m| m.max(x))))
            .unwrap_or_else(|| F::lit(60.0));
        Self {
            energy,
            time: F::from_usize(spec.length).unwrap() * cfg.dt,
        }
    }
}

/// Replaces every field of each faulty charger's report with an independent
/// uniform draw inside its range. Healthy entries and the window are copied.
pub fn corrupt_observation<F: Scalar, R: Rng>(
    obs: &GlobalObs<F>,
    fm: &FaultModel,
    bounds: &ObsBounds<F>,
    rng: &mut R,
) -> GlobalObs<F> {
    let mut out = obs.clone();
    let mut draw = |hi: F| F::lit(rng.random_range(0.0..=hi.as_f64()));
    for &i in &fm.faulty {
        if let Some(o) = out.locals.get_mut(i) {
            o.e_remaining = draw(bounds.energy);
            o.t_remaining = draw(bounds.time);
            o.soc = draw(F::one());
            o.connected = draw(F::one());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargerDeviation {
    pub charger: usize,
    /// Largest |action_faulty - action_normal| over all slots (kW).
    pub max_abs_kw: f64,
    /// Episodes with at least one nonzero deviation.
    pub episodes_deviating: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub energy_cost: f64,
    pub unfinished_demand: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub centralized: bool,
    pub faulty: Vec<usize>,
    pub episodes: usize,
    /// One entry per healthy charger.
    pub healthy: Vec<ChargerDeviation>,
    /// Episodes in which any healthy charger deviated.
    pub episodes_with_healthy_deviation: usize,
    pub normal: LedgerSummary,
    pub faulty_mode: LedgerSummary,
    /// Faulty minus normal.
    pub delta: LedgerSummary,
}

impl RobustnessReport {
    pub fn max_healthy_deviation(&self) -> f64 {
        self.healthy.iter().map(|d| d.max_abs_kw).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultTraceRow {
    pub episode: usize,
    pub slot: usize,
    pub charger: usize,
    pub action_normal: f64,
    pub action_faulty: f64,
}

/// Paired rollouts over the same episodes with and without `fm`.
pub fn robustness_compare<F: Scalar>(
    policy: &Policy<F>,
    episodes: &[EpisodeSpec<F>],
    cfg: &StationConfig<F>,
    fm: &FaultModel,
) -> Result<(RobustnessReport, Vec<FaultTraceRow>), MarlError> {
    let normal = evaluate(policy, episodes, cfg, None)?;
    let faulty = evaluate(policy, episodes, cfg, Some(fm))?;
    let n = cfg.n_chargers;
    let mut per: BTreeMap<usize, (f64, Vec<bool>)> = fm
        .healthy(n)
        .into_iter()
        .map(|i| (i, (0.0, vec![false; episodes.len()])))
        .collect();
    let mut rows = Vec::with_capacity(normal.traces.len());
    for (a, b) in normal.traces.iter().zip(&faulty.traces) {
        debug_assert_eq!((a.episode, a.slot, a.charger), (b.episode, b.slot, b.charger));
        if let Some((max, eps)) = per.get_mut(&a.charger) {
            let d = (b.action_kw - a.action_kw).abs();
            *max = max.max(d);
            eps[a.episode] |= d > 0.0;
        }
        rows.push(FaultTraceRow {
            episode: a.episode,
            slot: a.slot,
            charger: a.charger,
            action_normal: a.action_kw,
            action_faulty: b.action_kw,
        });
    }
    let episodes_with_healthy_deviation = (0..episodes.len())
        .filter(|&e| per.values().any(|(_, eps)| eps[e]))
        .count();
    let summary = |l: &crate::sim::EpisodeLedger<F>| LedgerSummary {
        energy_cost: l.energy_cost.as_f64(),
        unfinished_demand: l.unfinished_demand.as_f64(),
        objective: l.objective.as_f64(),
    };
    let (sn, sf) = (summary(&normal.ledger), summary(&faulty.ledger));
    let delta = LedgerSummary {
        energy_cost: sf.energy_cost - sn.energy_cost,
        unfinished_demand: sf.unfinished_demand - sn.unfinished_demand,
        objective: sf.objective - sn.objective,
    };
    let report = RobustnessReport {
        centralized: policy.is_centralized(),
        faulty: fm.faulty.clone(),
        episodes: episodes.len(),
        healthy: per
            .into_iter()
            .map(|(charger, (max_abs_kw, eps))| ChargerDeviation {
                charger,
                max_abs_kw,
                episodes_deviating: eps.iter().filter(|&&x| x).count(),
            })
            .collect(),
        episodes_with_healthy_deviation,
        normal: sn,
        faulty_mode: sf,
        delta,
    };
    Ok((report, rows))
}

pub fn write_fault_trace_csv<W: Write>(w: W, rows: &[FaultTraceRow]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
