//! Per-slot physics: action projection, power dispatch, SOC integration,
//! battery cycle aging and departure dissatisfaction.

use super::{ChargerState, Dispatch, EvSession, JointAction, SimError, StationConfig};
use crate::num::Scalar;

/// Clamps a raw action to the charger's power limits and SOC headroom.
///
/// Disconnected chargers and non-finite inputs map to zero.
pub fn project_action<F: Scalar>(a_raw: F, cs: &ChargerState<F>, cfg: &StationConfig<F>) -> F {
    let Some(s) = &cs.session else {
        return F::zero();
    };
    if !a_raw.is_finite() {
        return F::zero();
    }
    let a = a_raw.max(-cfg.p_disch_max).min(cfg.p_ch_max);
    if a > F::zero() {
        let headroom = ((s.e_cap - cs.e_now) / (s.eta_ch * cfg.dt)).max(F::zero());
        a.min(headroom)
    } else if a < F::zero() {
        let available = (cs.e_now * s.eta_disch / cfg.dt).max(F::zero());
        a.max(-available)
    } else {
        F::zero()
    }
}

/// Splits projected actions into grid and PV flows and enforces the grid cap.
///
/// PV is allocated to charging chargers in proportion to their power and the
/// remainder is exported. Import above `g_max` scales every grid draw (and the
/// matching charge power) down; export above `g_max` curtails PV export first
/// and then scales discharges. The pre-curtailment excess is reported as a
/// violation.
pub fn dispatch<F: Scalar>(a: &JointAction<F>, pv_gen_t: F, cfg: &StationConfig<F>) -> Dispatch<F> {
    let zero = F::zero();
    let n = a.len();
    let mut action: Vec<F> = a.0.iter().map(|&x| if x.is_finite() { x } else { zero }).collect();
    let pv = pv_gen_t.max(zero);

    let load: F = action.iter().filter(|&&x| x > zero).copied().sum();
    let share = if load > zero { pv.min(load) / load } else { zero };

    let mut pvev = vec![zero; n];
    let mut g2v = vec![zero; n];
    for i in 0..n {
        if action[i] > zero {
            pvev[i] = action[i] * share;
            g2v[i] = (action[i] - pvev[i]).max(zero);
        }
    }
    let pv_used: F = pvev.iter().copied().sum();
    let mut pvg = (pv - pv_used).max(zero);

    let import: F = g2v.iter().copied().sum();
    let mut import_violation = zero;
    if import > cfg.g_max {
        import_violation = import - cfg.g_max;
        let scale = cfg.g_max / import;
        for i in 0..n {
            if action[i] > zero {
                g2v[i] = g2v[i] * scale;
                action[i] = pvev[i] + g2v[i];
            }
        }
    }

    let discharge: F = action.iter().filter(|&&x| x < zero).map(|&x| -x).sum();
    let mut export_violation = zero;
    if discharge + pvg > cfg.g_max {
        let excess = discharge + pvg - cfg.g_max;
        export_violation = excess;
        let curtail = pvg.min(excess);
        pvg = pvg - curtail;
        if excess > curtail && discharge > zero {
            let scale = ((cfg.g_max - pvg) / discharge).max(zero).min(F::one());
            for x in action.iter_mut().filter(|x| **x < zero) {
                *x = *x * scale;
            }
        }
    }

    Dispatch {
        action,
        g2v,
        pvev,
        pvg,
        import_violation,
        export_violation,
    }
}

/// Integrates one slot of charge (`a >= 0`) or discharge (`a < 0`).
///
/// `t_remaining` advances by one slot. A result outside `[0, e_cap]` beyond
/// rounding tolerance means the action was not projected and is an error.
pub fn soc_update<F: Scalar>(
    cs: &ChargerState<F>,
    a: F,
    cfg: &StationConfig<F>,
) -> Result<ChargerState<F>, SimError> {
    let Some(s) = &cs.session else {
        return Ok(cs.clone());
    };
    let delta = if a >= F::zero() {
        a * s.eta_ch * cfg.dt
    } else {
        a * cfg.dt / s.eta_disch
    };
    let e = cs.e_now + delta;
    let tol = F::epsilon().sqrt() * s.e_cap.max(F::one());
    if e < -tol || e > s.e_cap + tol || !e.is_finite() {
        return Err(SimError::SocBounds {
            charger: s.charger_id,
            energy: e.as_f64(),
            capacity: s.e_cap.as_f64(),
        });
    }
    let mut next = cs.clone();
    next.e_now = e.max(F::zero()).min(s.e_cap);
    next.e_remaining = (s.e_demand - next.delivered()).max(F::zero());
    next.t_remaining = (cs.t_remaining - cfg.dt).max(F::zero());
    Ok(next)
}

/// Fraction of battery life consumed by one slot of throughput.
pub fn cycle_aging<F: Scalar>(a: F, s: &EvSession<F>, dt: F) -> F {
    let a_ch = a.max(F::zero());
    let a_disch = (-a).max(F::zero());
    let throughput = (a_ch * s.eta_ch * dt - a_disch * dt / s.eta_disch).abs();
    throughput / (F::lit(2.0) * s.e_cap * s.l_cyc)
}

/// Unmet demand at departure (kWh), measured against energy delivered since arrival.
pub fn dissatisfaction<F: Scalar>(s: &EvSession<F>, e_at_departure: F) -> F {
    let delivered = e_at_departure - s.e_init;
    if delivered < s.e_demand {
        s.e_demand - delivered
    } else {
        F::zero()
    }
}
