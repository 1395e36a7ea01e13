use serde::{Deserialize, Serialize};

use super::SimError;
use crate::num::Scalar;

/// Battery parameters applied to sessions whose data source carries none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct BatteryDefaults<F> {
    pub e_cap: F,
    pub eta_ch: F,
    pub eta_disch: F,
    pub l_cyc: F,
}

impl<F: Scalar> Default for BatteryDefaults<F> {
    fn default() -> Self {
        Self {
            e_cap: F::lit(60.0),
            eta_ch: F::lit(0.95),
            eta_disch: F::lit(0.95),
            l_cyc: F::lit(3000.0),
        }
    }
}

/// One vehicle's plug-in episode at a charger.
///
/// The vehicle can be controlled during slots `t_arrive..t_depart`; its
/// energy is measured against the demand at the start of slot `t_depart`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct EvSession<F> {
    pub charger_id: usize,
    pub t_arrive: usize,
    pub t_depart: usize,
    /// Energy the user wants delivered (kWh).
    pub e_demand: F,
    /// Stored energy on arrival (kWh).
    pub e_init: F,
    pub e_cap: F,
    pub eta_ch: F,
    pub eta_disch: F,
    pub l_cyc: F,
}

impl<F: Scalar> EvSession<F> {
    pub fn new(
        charger_id: usize,
        t_arrive: usize,
        t_depart: usize,
        e_demand: F,
        e_init: F,
        battery: &BatteryDefaults<F>,
    ) -> Self {
        Self {
            charger_id,
            t_arrive,
            t_depart,
            e_demand,
            e_init,
            e_cap: battery.e_cap,
            eta_ch: battery.eta_ch,
            eta_disch: battery.eta_disch,
            l_cyc: battery.l_cyc,
        }
    }

    pub fn duration_slots(&self) -> usize {
        self.t_depart - self.t_arrive
    }

    pub fn validate(&self) -> Result<(), String> {
        let z = F::zero();
        let o = F::one();
        if self.t_arrive >= self.t_depart {
            return Err(format!(
                "t_arrive {} must precede t_depart {}",
                self.t_arrive, self.t_depart
            ));
        }
        let all = [self.e_demand, self.e_init, self.e_cap, self.eta_ch, self.eta_disch, self.l_cyc];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("battery parameters must be finite".into());
        }
        if self.e_init < z || self.e_init > self.e_cap {
            return Err(format!("e_init {} outside [0, {}]", self.e_init, self.e_cap));
        }
        if self.e_demand < z || self.e_demand > self.e_cap {
            return Err(format!("e_demand {} outside [0, {}]", self.e_demand, self.e_cap));
        }
        if !(self.eta_ch > z && self.eta_ch <= o) || !(self.eta_disch > z && self.eta_disch <= o) {
            return Err("efficiencies must lie in (0, 1]".into());
        }
        if self.l_cyc <= z {
            return Err("l_cyc must be positive".into());
        }
        Ok(())
    }
}

/// Connection and energy status of one charger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ChargerState<F> {
    pub session: Option<EvSession<F>>,
    /// Stored energy (kWh).
    pub e_now: F,
    /// Demand still to deliver (kWh).
    pub e_remaining: F,
    /// Hours until departure.
    pub t_remaining: F,
}

impl<F: Scalar> ChargerState<F> {
    pub fn empty() -> Self {
        Self {
            session: None,
            e_now: F::zero(),
            e_remaining: F::zero(),
            t_remaining: F::zero(),
        }
    }

    /// Plugs a vehicle in at slot `t`.
    pub fn attach(session: EvSession<F>, t: usize, dt: F) -> Self {
        let mut cs = Self {
            e_now: session.e_init,
            session: Some(session),
            e_remaining: F::zero(),
            t_remaining: F::zero(),
        };
        cs.refresh(t, dt);
        cs
    }

    pub fn is_connected(&self) -> bool {
        self.session.is_some()
    }

    /// Energy delivered since arrival (kWh).
    pub fn delivered(&self) -> F {
        self.session
            .as_ref()
            .map_or(F::zero(), |s| self.e_now - s.e_init)
    }

    pub fn soc_fraction(&self) -> F {
        self.session
            .as_ref()
            .map_or(F::zero(), |s| self.e_now / s.e_cap)
    }

    /// Recomputes the derived remaining-demand and remaining-time fields at slot `t`.
    pub fn refresh(&mut self, t: usize, dt: F) {
        match &self.session {
            Some(s) => {
                self.e_remaining = (s.e_demand - self.delivered()).max(F::zero());
                let slots = s.t_depart.saturating_sub(t);
                self.t_remaining = F::from_usize(slots).unwrap() * dt;
            }
            None => {
                self.e_now = F::zero();
                self.e_remaining = F::zero();
                self.t_remaining = F::zero();
            }
        }
    }
}

/// Exogenous prices and PV generation, one entry per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ExogenousSeries<F> {
    pub price_buy: Vec<F>,
    pub price_sell: Vec<F>,
    pub pv_gen: Vec<F>,
    /// Length of the trailing window exposed in the state.
    pub history_len: usize,
}

/// One slot of the exogenous window: `[price_buy, price_sell, pv_gen]`.
pub type ExoRow<F> = [F; 3];

impl<F: Scalar> ExogenousSeries<F> {
    pub fn len(&self) -> usize {
        self.pv_gen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pv_gen.is_empty()
    }

    pub fn validate(&self, horizon: usize) -> Result<(), SimError> {
        let n = self.pv_gen.len();
        if self.price_buy.len() != n || self.price_sell.len() != n {
            return Err(SimError::InvalidSeries(format!(
                "series lengths differ: buy {}, sell {}, pv {}",
                self.price_buy.len(),
                self.price_sell.len(),
                n
            )));
        }
        if n < horizon {
            return Err(SimError::InvalidSeries(format!(
                "series length {n} shorter than episode length {horizon}"
            )));
        }
        if self.history_len == 0 {
            return Err(SimError::InvalidSeries("history_len must be at least 1".into()));
        }
        let ok = |v: &F| v.is_finite() && *v >= F::zero();
        if !self.price_buy.iter().all(ok) || !self.price_sell.iter().all(ok) {
            return Err(SimError::InvalidSeries("prices must be finite and non-negative".into()));
        }
        if !self.pv_gen.iter().all(ok) {
            return Err(SimError::InvalidSeries("pv_gen must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn row(&self, t: usize) -> ExoRow<F> {
        [self.price_buy[t], self.price_sell[t], self.pv_gen[t]]
    }

    /// Trailing window of `history_len` rows ending at `t` (inclusive), zero-padded
    /// at the front when fewer slots exist. Slots past the series end are zero too.
    pub fn window(&self, t: usize) -> Vec<ExoRow<F>> {
        let m = self.history_len;
        (0..m)
            .map(|k| {
                let back = m - 1 - k;
                match t.checked_sub(back) {
                    Some(s) if s < self.len() => self.row(s),
                    _ => [F::zero(); 3],
                }
            })
            .collect()
    }
}

/// Joint state of the station at slot `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct StationState<F> {
    pub t: usize,
    pub chargers: Vec<ChargerState<F>>,
    pub exo_window: Vec<ExoRow<F>>,
}

impl<F: Scalar> StationState<F> {
    pub fn n_connected(&self) -> usize {
        self.chargers.iter().filter(|c| c.is_connected()).count()
    }
}

/// Signed power per charger: positive charges, negative discharges (kW).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct JointAction<F>(pub Vec<F>);

impl<F: Scalar> JointAction<F> {
    pub fn zeros(n: usize) -> Self {
        Self(vec![F::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Realized power flows for one slot after feasibility enforcement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Dispatch<F> {
    /// Realized signed power per charger after grid-cap curtailment.
    pub action: Vec<F>,
    pub g2v: Vec<F>,
    pub pvev: Vec<F>,
    pub pvg: F,
    /// Import above `g_max` requested before curtailment (kW).
    pub import_violation: F,
    /// Export above `g_max` requested before curtailment (kW).
    pub export_violation: F,
}

impl<F: Scalar> Dispatch<F> {
    pub fn discharge(&self, i: usize) -> F {
        (-self.action[i]).max(F::zero())
    }

    pub fn charge(&self, i: usize) -> F {
        self.action[i].max(F::zero())
    }
}
