use serde::{Deserialize, Serialize};

use super::{DataError, SessionRecord};
use crate::num::Scalar;
use crate::sim::{BatteryDefaults, EvSession, ExogenousSeries, SimError, Station, StationConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub slots_per_episode: usize,
    pub history_len: usize,
    /// State of charge on arrival, as a fraction of capacity.
    pub init_soc: f64,
    pub battery: BatteryDefaults<f64>,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            slots_per_episode: 24,
            history_len: 24,
            init_soc: 0.2,
            battery: BatteryDefaults::default(),
        }
    }
}

/// One reproducible episode: sessions already mapped to chargers, slot
/// indices relative to the episode start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct EpisodeSpec<F> {
    pub start_slot: usize,
    pub length: usize,
    pub sessions: Vec<EvSession<F>>,
    pub exo: ExogenousSeries<F>,
}

impl<F: Scalar> EpisodeSpec<F> {
    pub fn station(&self, cfg: &StationConfig<F>) -> Result<Station<F>, SimError> {
        Station::new(cfg.clone(), self.exo.clone(), self.sessions.clone(), self.length)
    }

    /// Total requested energy over all sessions (kWh).
    pub fn total_demand(&self) -> F {
        self.sessions.iter().map(|s| s.e_demand).sum()
    }

    /// Sessions fit inside the episode and never share a charger slot.
    pub fn check(&self, n_chargers: usize) -> Result<(), String> {
        let mut busy = vec![vec![false; self.length]; n_chargers];
        for s in &self.sessions {
            s.validate()?;
            if s.t_depart > self.length || s.charger_id >= n_chargers {
                return Err(format!("session {s:?} outside episode"));
            }
            for t in s.t_arrive..s.t_depart {
                if std::mem::replace(&mut busy[s.charger_id][t], true) {
                    return Err(format!("charger {} double-booked at slot {t}", s.charger_id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSet<F> {
    pub episodes: Vec<EpisodeSpec<F>>,
    /// Sessions dropped because every charger was busy on arrival.
    pub dropped_overflow: usize,
    /// Sessions dropped because they crossed an episode boundary or the data range.
    pub dropped_outside: usize,
}

/// Cuts aligned per-slot inputs into consecutive episodes and assigns each
/// session to the lowest-numbered free charger, in arrival order.
pub fn build_episodes<F: Scalar>(
    sessions: &[SessionRecord],
    solar_kw: &[f64],
    price_buy: &[f64],
    price_sell: &[f64],
    n_chargers: usize,
    cfg: &EpisodeConfig,
) -> Result<EpisodeSet<F>, DataError> {
    let len = cfg.slots_per_episode;
    if len == 0 || cfg.history_len == 0 {
        return Err(DataError::Invalid("episode length and history must be positive".into()));
    }
    if price_buy.len() < solar_kw.len() || price_sell.len() < solar_kw.len() {
        return Err(DataError::Invalid(format!(
            "price series ({} buy, {} sell) shorter than solar series ({})",
            price_buy.len(),
            price_sell.len(),
            solar_kw.len()
        )));
    }
    if !(0.0..=1.0).contains(&cfg.init_soc) {
        return Err(DataError::Invalid("init_soc must lie in [0, 1]".into()));
    }
    let n_episodes = solar_kw.len() / len;
    let mut ordered: Vec<&SessionRecord> = sessions.iter().collect();
    ordered.sort_by(|a, b| {
        (a.arrival_slot, a.departure_slot, &a.charger_id).cmp(&(b.arrival_slot, b.departure_slot, &b.charger_id))
    });

    let battery = BatteryDefaults {
        e_cap: F::lit(cfg.battery.e_cap),
        eta_ch: F::lit(cfg.battery.eta_ch),
        eta_disch: F::lit(cfg.battery.eta_disch),
        l_cyc: F::lit(cfg.battery.l_cyc),
    };
    let e_init = cfg.init_soc * cfg.battery.e_cap;
    let headroom = cfg.battery.e_cap - e_init;

    let mut per_episode: Vec<Vec<EvSession<F>>> = vec![Vec::new(); n_episodes];
    let mut busy_until: Vec<Vec<usize>> = vec![vec![0; n_chargers]; n_episodes];
    let mut dropped_overflow = 0;
    let mut dropped_outside = 0;
    for r in ordered {
        let ep = r.arrival_slot / len;
        let start = ep * len;
        if ep >= n_episodes || r.departure_slot > start + len {
            dropped_outside += 1;
            continue;
        }
        let (a, d) = (r.arrival_slot - start, r.departure_slot - start);
        match (0..n_chargers).find(|&c| busy_until[ep][c] <= a) {
            Some(c) => {
                busy_until[ep][c] = d;
                per_episode[ep].push(EvSession::new(
                    c,
                    a,
                    d,
                    F::lit(r.kwh_requested.min(headroom)),
                    F::lit(e_init),
                    &battery,
                ));
            }
            None => dropped_overflow += 1,
        }
    }

    let to_f = |xs: &[f64]| xs.iter().map(|&x| F::lit(x)).collect::<Vec<F>>();
    let episodes = per_episode
        .into_iter()
        .enumerate()
        .map(|(ep, sessions)| {
            let range = ep * len..(ep + 1) * len;
            EpisodeSpec {
                start_slot: range.start,
                length: len,
                sessions,
                exo: ExogenousSeries {
                    price_buy: to_f(&price_buy[range.clone()]),
                    price_sell: to_f(&price_sell[range.clone()]),
                    pv_gen: to_f(&solar_kw[range]),
                    history_len: cfg.history_len,
                },
            }
        })
        .collect();
    Ok(EpisodeSet {
        episodes,
        dropped_overflow,
        dropped_outside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(a: usize, d: usize) -> SessionRecord {
        SessionRecord {
            arrival_slot: a,
            departure_slot: d,
            kwh_requested: 10.0,
            charger_id: "x".into(),
        }
    }

    fn flat(days: usize) -> Vec<f64> {
        vec![0.1; days * 24]
    }

    #[test]
    fn one_day_one_session() {
        let set = build_episodes::<f64>(&[rec(8, 12)], &flat(1), &flat(1), &flat(1), 2, &EpisodeConfig::default()).unwrap();
        assert_eq!(set.episodes.len(), 1);
        assert_eq!(set.episodes[0].sessions.len(), 1);
        assert_eq!(set.episodes[0].sessions[0].charger_id, 0);
        assert_eq!(set.dropped_overflow, 0);
    }

    #[test]
    fn overflow_is_dropped_first_fit() {
        let recs = [rec(8, 12), rec(9, 13), rec(10, 14)];
        let set = build_episodes::<f64>(&recs, &flat(1), &flat(1), &flat(1), 2, &EpisodeConfig::default()).unwrap();
        assert_eq!(set.dropped_overflow, 1);
        let s = &set.episodes[0].sessions;
        assert_eq!((s[0].charger_id, s[1].charger_id), (0, 1));
        // A later arrival reuses the charger freed first.
        let recs = [rec(8, 10), rec(9, 13), rec(10, 14)];
        let set = build_episodes::<f64>(&recs, &flat(1), &flat(1), &flat(1), 2, &EpisodeConfig::default()).unwrap();
        assert_eq!(set.dropped_overflow, 0);
        assert_eq!(set.episodes[0].sessions[2].charger_id, 0);
    }

    #[test]
    fn thirty_days_thirty_episodes() {
        let set = build_episodes::<f64>(&[], &flat(30), &flat(30), &flat(30), 2, &EpisodeConfig::default()).unwrap();
        assert_eq!(set.episodes.len(), 30);
        assert_eq!(set.episodes[29].start_slot, 29 * 24);
    }

    #[test]
    fn boundary_crossing_sessions_are_dropped() {
        let set = build_episodes::<f64>(&[rec(20, 27)], &flat(2), &flat(2), &flat(2), 2, &EpisodeConfig::default()).unwrap();
        assert_eq!(set.dropped_outside, 1);
        assert!(set.episodes.iter().all(|e| e.sessions.is_empty()));
    }

    #[test]
    fn relative_slots_and_station_construction() {
        let set = build_episodes::<f64>(&[rec(30, 40)], &flat(2), &flat(2), &flat(2), 1, &EpisodeConfig::default()).unwrap();
        let s = &set.episodes[1].sessions[0];
        assert_eq!((s.t_arrive, s.t_depart), (6, 16));
        set.episodes[1].check(1).unwrap();
        set.episodes[1].station(&StationConfig::new(1)).unwrap();
    }
}
