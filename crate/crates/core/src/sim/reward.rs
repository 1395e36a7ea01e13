//! Per-agent reward terms.

use serde::{Deserialize, Serialize};

use super::{ChargerState, Dispatch, StationConfig};
use crate::num::Scalar;

/// Reward components for one transition.
///
/// Disconnected chargers carry zeros in every per-agent field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RewardBreakdown<F> {
    pub r_cost: Vec<F>,
    pub r_cdb: Vec<F>,
    /// PV feed-in revenue for the slot, shared among connected chargers.
    pub r_pv: F,
    pub n_connected: usize,
    pub r_user: Vec<F>,
    /// Grid-violation penalty charged to each connected charger.
    pub r_grid: F,
    /// Departure penalty, non-zero only with `terminal_ds_penalty`.
    pub r_terminal: Vec<F>,
    pub r_total: Vec<F>,
    pub age: Vec<F>,
    pub ds_terminal: Vec<F>,
    pub connected: Vec<bool>,
}

/// Energy (kWh) still needed per remaining hour; zero once no time is left.
pub fn completed_average_power<F: Scalar>(cs: &ChargerState<F>) -> F {
    if !cs.is_connected() || cs.t_remaining <= F::zero() {
        return F::zero();
    }
    cs.e_remaining / cs.t_remaining
}

/// Negative gap between the required and the applied charging power, paid
/// only when the required power is urgent.
pub fn reward_user<F: Scalar>(cap: F, a: F, cfg: &StationConfig<F>) -> F {
    if cap > cfg.cap_urgency_fraction * cfg.p_ch_max && a < cap {
        -(cap - a)
    } else {
        F::zero()
    }
}

/// Cost terms of one charger for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms<F> {
    pub r_cdb: F,
    pub r_pv: F,
    pub r_cost: F,
}

/// Sign-flipped charging/discharging/degradation cost plus the charger's share
/// of PV feed-in revenue. With no connected charger the PV share is skipped.
pub fn reward_cost<F: Scalar>(
    i: usize,
    d: &Dispatch<F>,
    (price_buy, price_sell): (F, F),
    age_cost_i: F,
    n_connected: usize,
    cfg: &StationConfig<F>,
) -> CostTerms<F> {
    let r_cdb = (d.g2v[i] * price_buy - d.discharge(i) * price_sell) * cfg.dt + age_cost_i;
    let r_pv = d.pvg * price_sell * cfg.dt;
    let share = if n_connected > 0 {
        r_pv / F::from_usize(n_connected).unwrap()
    } else {
        F::zero()
    };
    CostTerms {
        r_cdb,
        r_pv,
        r_cost: -r_cdb + share,
    }
}

/// Penalty for importing or exporting beyond the grid cap.
pub fn grid_penalty<F: Scalar>(d: &Dispatch<F>, cfg: &StationConfig<F>) -> F {
    cfg.grid_penalty_rate * (d.import_violation + d.export_violation)
}

pub fn reward_total<F: Scalar>(r_cost: F, r_user: F, r_grid: F) -> F {
    debug_assert!(r_grid >= F::zero());
    r_cost + r_user - r_grid
}
