use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::obs::GlobalObs;
use super::policy::Policy;
use super::MarlError;
use crate::data::EpisodeSpec;
use crate::faults::{corrupt_observation, FaultMode, FaultModel, ObsBounds};
use crate::num::Scalar;
use crate::sim::{soc_update, EpisodeLedger, JointAction, StationConfig};

/// One charger in one slot of an evaluation rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTraceRow {
    pub episode: usize,
    pub slot: usize,
    pub charger: usize,
    /// Policy output before projection (kW).
    pub action_kw: f64,
    /// Power actually flowing after projection and dispatch (kW).
    pub realized_kw: f64,
    pub g2v: f64,
    pub pvev: f64,
    pub pv_kw: f64,
    /// Stored energy after the slot, as a fraction of capacity.
    pub soc: f64,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub energy_cost: f64,
    pub unfinished_demand: f64,
    pub objective: f64,
    pub total_demand: f64,
    /// Sum over slots of the per-charger mean reward.
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport<F> {
    /// Sum over every evaluated episode.
    pub ledger: EpisodeLedger<F>,
    pub episodes: Vec<EpisodeMetrics>,
    pub traces: Vec<EvalTraceRow>,
}

/// Seed of the corruption stream for one episode.
pub(crate) fn fault_rng(fm: &FaultModel, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(fm.seed);
    rng.set_stream(episode as u64);
    rng
}

/// Noise-free rollouts of `policy` over `episodes`.
///
/// With a corrupting fault model, the reported observation of every faulty
/// charger is replaced each slot and the physical station is never touched.
/// An offline fault model instead holds the faulty chargers at zero power.
pub fn evaluate<F: Scalar>(
    policy: &Policy<F>,
    episodes: &[EpisodeSpec<F>],
    cfg: &StationConfig<F>,
    faults: Option<&FaultModel>,
) -> Result<EvalReport<F>, MarlError> {
    if let Some(fm) = faults {
        fm.validate(cfg.n_chargers)?;
    }
    let mut report = EvalReport {
        ledger: EpisodeLedger::zero(),
        episodes: Vec::with_capacity(episodes.len()),
        traces: Vec::new(),
    };
    for (e, spec) in episodes.iter().enumerate() {
        let mut station = spec.station(cfg)?;
        let bounds = ObsBounds::for_episode(spec, cfg);
        let mut rng = faults.map(|fm| fault_rng(fm, e));
        let n_inv = F::one() / F::from_usize(cfg.n_chargers).unwrap();
        let mut reward = F::zero();
        while !station.is_done() {
            let st = station.state().clone();
            let truth = GlobalObs::from_state(&st);
            let reported = match (faults, rng.as_mut()) {
                (Some(fm), Some(r)) if fm.mode == FaultMode::Corrupt => corrupt_observation(&truth, fm, &bounds, r),
                _ => truth.clone(),
            };
            let mut a = policy.act(&truth, &reported)?;
            if let Some(fm) = faults.filter(|fm| fm.mode == FaultMode::Offline) {
                for &i in &fm.faulty {
                    a[i] = F::zero();
                }
            }
            let slot = st.t;
            let out = station.step(&JointAction(a.clone()))?;
            reward += out.rewards.r_total.iter().copied().sum::<F>() * n_inv;
            let pv = spec.exo.pv_gen[slot].as_f64();
            for (i, cs) in st.chargers.iter().enumerate() {
                let soc = soc_update(cs, out.dispatch.action[i], cfg)?.soc_fraction().as_f64();
                report.traces.push(EvalTraceRow {
                    episode: e,
                    slot,
                    charger: i,
                    action_kw: a[i].as_f64(),
                    realized_kw: out.dispatch.action[i].as_f64(),
                    g2v: out.dispatch.g2v[i].as_f64(),
                    pvev: out.dispatch.pvev[i].as_f64(),
                    pv_kw: pv,
                    soc,
                    connected: truth.locals[i].is_connected(),
                });
            }
        }
        let l = station.ledger().clone();
        report.episodes.push(EpisodeMetrics {
            episode: e,
            energy_cost: l.energy_cost.as_f64(),
            unfinished_demand: l.unfinished_demand.as_f64(),
            objective: l.objective.as_f64(),
            total_demand: spec.total_demand().as_f64(),
            mean_reward: reward.as_f64(),
        });
        report.ledger += l;
    }
    Ok(report)
}

/// Median and interquartile range (linear interpolation between order statistics).
pub fn median_iqr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    (q(0.5), q(0.75) - q(0.25))
}

/// `(episode, slot)` pairs whose PV output is positive and at or above the
/// given quantile of all traced rows.
pub fn high_pv_slots(rows: &[EvalTraceRow], quantile: f64) -> BTreeSet<(usize, usize)> {
    let mut pv: Vec<f64> = rows.iter().map(|r| r.pv_kw).collect();
    if pv.is_empty() {
        return BTreeSet::new();
    }
    pv.sort_by(f64::total_cmp);
    let thr = pv[((pv.len() - 1) as f64 * quantile).round() as usize];
    rows.iter()
        .filter(|r| r.pv_kw >= thr && r.pv_kw > 0.0)
        .map(|r| (r.episode, r.slot))
        .collect()
}

/// Charging energy (kWh) delivered in the listed slots; discharge is ignored.
pub fn charging_in_slots(rows: &[EvalTraceRow], dt: f64, slots: &BTreeSet<(usize, usize)>) -> f64 {
    rows.iter()
        .filter(|r| slots.contains(&(r.episode, r.slot)))
        .map(|r| r.realized_kw.max(0.0) * dt)
        .sum()
}

/// Charging energy (kWh) delivered in the trace's own high-PV slots.
pub fn charging_in_high_pv(rows: &[EvalTraceRow], dt: f64, quantile: f64) -> f64 {
    charging_in_slots(rows, dt, &high_pv_slots(rows, quantile))
}

pub fn write_trace_csv<W: std::io::Write>(w: W, rows: &[EvalTraceRow]) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
