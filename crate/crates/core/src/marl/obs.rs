use serde::{Deserialize, Serialize};

use crate::num::Scalar;
use crate::sim::{ChargerState, ExoRow, StationConfig, StationState};

/// Scalars per charger in an observation.
pub const LOCAL_FEATURES: usize = 4;
/// Columns of each exogenous window row: buy price, sell price, PV output.
pub const EXO_FEATURES: usize = 3;

/// What one charger knows about itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LocalObs<F> {
    /// Remaining demand (kWh).
    pub e_remaining: F,
    /// Remaining connection time (h).
    pub t_remaining: F,
    /// State of charge as a fraction of capacity.
    pub soc: F,
    /// 1 when a vehicle is plugged in.
    pub connected: F,
}

impl<F: Scalar> LocalObs<F> {
    pub fn from_charger(cs: &ChargerState<F>) -> Self {
        Self {
            e_remaining: cs.e_remaining,
            t_remaining: cs.t_remaining,
            soc: cs.soc_fraction(),
            connected: if cs.is_connected() { F::one() } else { F::zero() },
        }
    }

    pub fn to_array(&self) -> [F; LOCAL_FEATURES] {
        [self.e_remaining, self.t_remaining, self.soc, self.connected]
    }

    pub fn is_connected(&self) -> bool {
        self.connected > F::lit(0.5)
    }
}

/// The joint observation: every charger's local fields plus the shared window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GlobalObs<F> {
    pub t: usize,
    pub locals: Vec<LocalObs<F>>,
    pub window: Vec<ExoRow<F>>,
}

impl<F: Scalar> GlobalObs<F> {
    pub fn from_state(st: &StationState<F>) -> Self {
        Self {
            t: st.t,
            locals: st.chargers.iter().map(LocalObs::from_charger).collect(),
            window: st.exo_window.clone(),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.locals.len()
    }

    /// Charger `i`'s decentralized view. Nothing about other chargers is reachable from it.
    pub fn view(&self, i: usize) -> LocalView<'_, F> {
        LocalView {
            local: &self.locals[i],
            window: &self.window,
        }
    }
}

/// Input of a decentralized actor.
#[derive(Debug, Clone, Copy)]
pub struct LocalView<'a, F> {
    pub local: &'a LocalObs<F>,
    pub window: &'a [ExoRow<F>],
}

/// Reference magnitudes used to bring observation fields to order one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct FeatureScale<F> {
    /// kWh; also the upper bound of energy fields.
    pub energy: F,
    /// Hours; also the upper bound of time fields.
    pub time: F,
    pub price: F,
    pub pv: F,
}

impl<F: Scalar> FeatureScale<F> {
    /// Scales for `cfg` with batteries of capacity `e_cap`, episodes of
    /// `horizon` slots and prices up to `price`.
    pub fn new(cfg: &StationConfig<F>, e_cap: F, horizon: usize, price: F) -> Self {
        let one = F::one();
        let pos = |x: F| if x > F::zero() { x } else { one };
        Self {
            energy: pos(e_cap),
            time: pos(F::from_usize(horizon).unwrap() * cfg.dt),
            price: pos(price),
            pv: pos(cfg.pv_capacity),
        }
    }

    pub fn local(&self, o: &LocalObs<F>) -> [F; LOCAL_FEATURES] {
        [o.e_remaining / self.energy, o.t_remaining / self.time, o.soc, o.connected]
    }

    /// Flattened `[M, 3]` normalized window.
    pub fn window(&self, w: &[ExoRow<F>]) -> Vec<F> {
        w.iter()
            .flat_map(|r| [r[0] / self.price, r[1] / self.price, r[2] / self.pv])
            .collect()
    }

    pub fn features(&self, obs: &GlobalObs<F>) -> Features<F> {
        Features {
            window: self.window(&obs.window),
            locals: obs.locals.iter().flat_map(|o| self.local(o)).collect(),
        }
    }
}

/// Normalized joint observation as stored in the replay buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Features<F> {
    /// `[M, 3]` row-major.
    pub window: Vec<F>,
    /// `[N, 4]` row-major.
    pub locals: Vec<F>,
}

impl<F: Scalar> Features<F> {
    pub fn local(&self, i: usize) -> &[F] {
        &self.locals[i * LOCAL_FEATURES..(i + 1) * LOCAL_FEATURES]
    }

    pub fn connected(&self, i: usize) -> bool {
        self.local(i)[3] > F::lit(0.5)
    }
}
