use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::solar::clear_sky_profile;
use super::SessionRecord;

/// Distributions for synthetic session generation. Hours are local clock hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    /// Expected sessions per charger per day (Poisson rate).
    pub sessions_per_day: f64,
    pub arrival_start_hour: f64,
    pub arrival_end_hour: f64,
    pub min_duration_hours: f64,
    pub max_duration_hours: f64,
    /// Latest departure within a day.
    pub day_end_hour: f64,
    pub min_kwh: f64,
    pub max_kwh: f64,
    /// Limits used to keep every demand deliverable.
    pub p_ch_max: f64,
    pub eta_ch: f64,
    pub e_cap: f64,
    pub init_soc: f64,
    /// Probability that a synthetic solar day is cloudy.
    pub cloudy_day_probability: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            sessions_per_day: 1.2,
            arrival_start_hour: 6.0,
            arrival_end_hour: 11.0,
            min_duration_hours: 4.0,
            max_duration_hours: 10.0,
            day_end_hour: 23.0,
            min_kwh: 8.0,
            max_kwh: 40.0,
            p_ch_max: 22.0,
            eta_ch: 0.95,
            e_cap: 60.0,
            init_soc: 0.2,
            cloudy_day_probability: 0.5,
        }
    }
}

/// Draws sessions for `n_chargers` chargers over `days` days.
///
/// Sessions on one charger never overlap and never cross midnight; each
/// demand is capped at what the charger can deliver in the session and at the
/// battery headroom above `init_soc`.
pub fn synth_sessions<R: Rng>(
    rng: &mut R,
    n_chargers: usize,
    days: usize,
    params: &SynthParams,
    dt_hours: f64,
) -> Vec<SessionRecord> {
    let mut out = Vec::new();
    if !(params.sessions_per_day > 0.0) {
        return out;
    }
    let poisson = Poisson::new(params.sessions_per_day).expect("positive rate");
    let slots_per_day = (24.0 / dt_hours).round() as usize;
    let to_slot = |h: f64| (h / dt_hours).ceil() as usize;
    let headroom = params.e_cap * (1.0 - params.init_soc);
    for day in 0..days {
        let day0 = day * slots_per_day;
        let day_end = day0 + to_slot(params.day_end_hour).min(slots_per_day);
        for c in 0..n_chargers {
            let k = poisson.sample(rng) as usize;
            let mut cursor = rng.random_range(params.arrival_start_hour..=params.arrival_end_hour);
            for _ in 0..k {
                let arrival = day0 + to_slot(cursor);
                let dur_h = rng.random_range(params.min_duration_hours..=params.max_duration_hours);
                let departure = (arrival + to_slot(dur_h).max(1)).min(day_end);
                if departure <= arrival {
                    break;
                }
                let hours = (departure - arrival) as f64 * dt_hours;
                let want = rng.random_range(params.min_kwh..=params.max_kwh);
                let kwh = want.min(params.p_ch_max * params.eta_ch * hours).min(headroom);
                out.push(SessionRecord {
                    arrival_slot: arrival,
                    departure_slot: departure,
                    kwh_requested: kwh,
                    charger_id: format!("synth-{c}"),
                });
                cursor = (departure - day0) as f64 * dt_hours + rng.random_range(0.5..=3.0);
            }
        }
    }
    out.sort_by(|a, b| (a.arrival_slot, &a.charger_id).cmp(&(b.arrival_slot, &b.charger_id)));
    out
}

/// Normalized solar trace mixing sunny and cloudy days.
pub fn synth_solar<R: Rng>(rng: &mut R, days: usize, dt_hours: f64, cloudy_day_probability: f64) -> Vec<f64> {
    let slots_per_day = (24.0 / dt_hours).round() as usize;
    let clear = clear_sky_profile(slots_per_day, dt_hours);
    let mut out = Vec::with_capacity(days * slots_per_day);
    for _ in 0..days {
        let cloudy = rng.random_bool(cloudy_day_probability.clamp(0.0, 1.0));
        for &v in &clear {
            let f = if cloudy {
                rng.random_range(0.15..=0.55)
            } else {
                rng.random_range(0.85..=1.0)
            };
            out.push(v * f);
        }
    }
    out
}
