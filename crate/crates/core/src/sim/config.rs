use serde::{Deserialize, Serialize};

use super::SimError;
use crate::num::Scalar;

/// Station-wide physical and economic parameters.
///
/// Only `n_chargers` is required when deserializing; every other key falls
/// back to the defaults listed on [`StationConfig::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar", deny_unknown_fields)]
pub struct StationConfig<F> {
    /// Number of chargers (agents).
    pub n_chargers: usize,
    /// Slot length in hours.
    #[serde(default = "default_dt")]
    pub dt: F,
    /// Grid connection capacity in kW, shared by import and export.
    #[serde(default = "default_g_max")]
    pub g_max: F,
    /// Per-charger maximum charging power (kW).
    #[serde(default = "default_p_max")]
    pub p_ch_max: F,
    /// Per-charger maximum discharging power (kW).
    #[serde(default = "default_p_max")]
    pub p_disch_max: F,
    /// Peak PV rating in kW.
    #[serde(default = "default_pv_capacity")]
    pub pv_capacity: F,
    /// Fraction of `p_ch_max` above which the completed average power counts as urgent.
    #[serde(default = "default_cap_urgency")]
    pub cap_urgency_fraction: F,
    /// Battery replacement cost per full equivalent life.
    #[serde(default = "default_kappa_batt")]
    pub kappa_batt: F,
    /// Penalty per kW of grid-capacity violation.
    #[serde(default = "default_grid_penalty")]
    pub grid_penalty_rate: F,
    /// Currency per kWh of unmet demand in the objective.
    #[serde(default = "default_one")]
    pub dissatisfaction_weight: F,
    /// Include the urgency-based user reward in the per-step reward.
    #[serde(default = "default_true")]
    pub dense_reward: bool,
    /// Subtract `dissatisfaction_weight * ds` from the reward at departure.
    #[serde(default)]
    pub terminal_ds_penalty: bool,
}

fn default_dt<F: Scalar>() -> F {
    F::one()
}
fn default_g_max<F: Scalar>() -> F {
    F::lit(200.0)
}
fn default_p_max<F: Scalar>() -> F {
    F::lit(22.0)
}
fn default_pv_capacity<F: Scalar>() -> F {
    F::lit(32.0)
}
fn default_cap_urgency<F: Scalar>() -> F {
    F::lit(0.8)
}
fn default_kappa_batt<F: Scalar>() -> F {
    F::lit(9000.0)
}
fn default_grid_penalty<F: Scalar>() -> F {
    F::lit(0.1)
}
fn default_one<F: Scalar>() -> F {
    F::one()
}
fn default_true() -> bool {
    true
}

impl<F: Scalar> StationConfig<F> {
    /// Defaults: 1 h slots, 200 kW grid cap, 22 kW charge/discharge, 32 kW PV,
    /// urgency at 80 % of the charge limit, 9000 per battery life,
    /// grid penalty 0.1 per kW, dissatisfaction weight 1 per kWh, dense reward on.
    pub fn new(n_chargers: usize) -> Self {
        Self {
            n_chargers,
            dt: default_dt(),
            g_max: default_g_max(),
            p_ch_max: default_p_max(),
            p_disch_max: default_p_max(),
            pv_capacity: default_pv_capacity(),
            cap_urgency_fraction: default_cap_urgency(),
            kappa_batt: default_kappa_batt(),
            grid_penalty_rate: default_grid_penalty(),
            dissatisfaction_weight: default_one(),
            dense_reward: true,
            terminal_ds_penalty: false,
        }
    }

    /// Same parameters in another scalar type.
    pub fn cast<G: Scalar>(&self) -> StationConfig<G> {
        let c = |x: F| G::lit(x.as_f64());
        StationConfig {
            n_chargers: self.n_chargers,
            dt: c(self.dt),
            g_max: c(self.g_max),
            p_ch_max: c(self.p_ch_max),
            p_disch_max: c(self.p_disch_max),
            pv_capacity: c(self.pv_capacity),
            cap_urgency_fraction: c(self.cap_urgency_fraction),
            kappa_batt: c(self.kappa_batt),
            grid_penalty_rate: c(self.grid_penalty_rate),
            dissatisfaction_weight: c(self.dissatisfaction_weight),
            dense_reward: self.dense_reward,
            terminal_ds_penalty: self.terminal_ds_penalty,
        }
    }

    /// Reward variant with the urgency term removed and unmet demand charged at departure.
    pub fn sparse(mut self) -> Self {
        self.dense_reward = false;
        self.terminal_ds_penalty = true;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field: &'static str, reason: &str| {
            Err(SimError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        let finite = [
            ("dt", self.dt),
            ("g_max", self.g_max),
            ("p_ch_max", self.p_ch_max),
            ("p_disch_max", self.p_disch_max),
            ("pv_capacity", self.pv_capacity),
            ("cap_urgency_fraction", self.cap_urgency_fraction),
            ("kappa_batt", self.kappa_batt),
            ("grid_penalty_rate", self.grid_penalty_rate),
            ("dissatisfaction_weight", self.dissatisfaction_weight),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return bad(name, "must be finite");
            }
        }
        if self.n_chargers == 0 {
            return bad("n_chargers", "must be at least 1");
        }
        if self.dt <= F::zero() {
            return bad("dt", "must be positive");
        }
        if self.g_max <= F::zero() {
            return bad("g_max", "must be positive");
        }
        if self.p_ch_max <= F::zero() {
            return bad("p_ch_max", "must be positive");
        }
        if self.p_disch_max < F::zero() {
            return bad("p_disch_max", "must be non-negative");
        }
        if self.pv_capacity < F::zero() {
            return bad("pv_capacity", "must be non-negative");
        }
        if !(self.cap_urgency_fraction > F::zero() && self.cap_urgency_fraction <= F::one()) {
            return bad("cap_urgency_fraction", "must lie in (0, 1]");
        }
        if self.kappa_batt < F::zero() {
            return bad("kappa_batt", "must be non-negative");
        }
        if self.grid_penalty_rate < F::zero() {
            return bad("grid_penalty_rate", "must be non-negative");
        }
        if self.dissatisfaction_weight < F::zero() {
            return bad("dissatisfaction_weight", "must be non-negative");
        }
        Ok(())
    }
}
