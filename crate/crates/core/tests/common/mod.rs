#![allow(dead_code)]

use evmarl::sim::{BatteryDefaults, Dispatch, EvSession, ExogenousSeries, Station, StationConfig};
use rand::Rng;

/// Station with random prices, PV and non-overlapping sessions.
pub fn random_station<R: Rng>(rng: &mut R, cfg: &StationConfig<f64>, horizon: usize) -> Station<f64> {
    let exo = ExogenousSeries {
        price_buy: (0..horizon).map(|_| rng.random_range(0.0..0.5)).collect(),
        price_sell: (0..horizon).map(|_| rng.random_range(0.0..0.3)).collect(),
        pv_gen: (0..horizon).map(|_| rng.random_range(0.0..=cfg.pv_capacity)).collect(),
        history_len: 3,
    };
    let mut sessions = Vec::new();
    for c in 0..cfg.n_chargers {
        let mut t = rng.random_range(0..=2);
        while t + 1 < horizon {
            let depart = rng.random_range(t + 1..=horizon.min(t + 8));
            let battery = BatteryDefaults {
                e_cap: rng.random_range(20.0..80.0),
                eta_ch: rng.random_range(0.8..=1.0),
                eta_disch: rng.random_range(0.8..=1.0),
                l_cyc: rng.random_range(1000.0..5000.0),
            };
            let e_init = rng.random_range(0.0..=battery.e_cap);
            let e_demand = rng.random_range(0.0..=battery.e_cap - e_init);
            sessions.push(EvSession::new(c, t, depart, e_demand, e_init, &battery));
            t = depart + rng.random_range(0..3);
        }
    }
    Station::new(cfg.clone(), exo, sessions, horizon).expect("valid random station")
}

/// Largest violation of the station's power-flow constraints by `d`:
/// per-charger balance, PV budget, import and export caps, non-negativity.
pub fn flow_residual(d: &Dispatch<f64>, pv_gen: f64, g_max: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let pos = |x: f64| x.max(0.0);
    for i in 0..d.action.len() {
        let ch = d.action[i].max(0.0);
        worst = worst.max((ch - d.g2v[i] - d.pvev[i]).abs());
        worst = worst.max(pos(-d.g2v[i])).max(pos(-d.pvev[i]));
        if d.action[i] < 0.0 {
            worst = worst.max(d.g2v[i].abs()).max(d.pvev[i].abs());
        }
    }
    let pv_used: f64 = d.pvev.iter().sum::<f64>() + d.pvg;
    worst = worst.max(pos(pv_used - pv_gen)).max(pos(-d.pvg));
    let import: f64 = d.g2v.iter().sum();
    worst = worst.max(pos(import - g_max));
    let export: f64 = d.action.iter().map(|&a| (-a).max(0.0)).sum::<f64>() + d.pvg;
    worst.max(pos(export - g_max))
}
