use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::StationConfig;
use crate::num::Scalar;

/// Accumulated economic outcome of an episode (or of a single step when used
/// as a delta).
///
/// `energy_cost` nets grid purchases against V2G and PV feed-in revenue and
/// adds degradation; `objective` adds weighted unmet demand on top.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct EpisodeLedger<F> {
    pub purchase_cost: F,
    pub v2g_revenue: F,
    pub pv_revenue: F,
    pub degradation_cost: F,
    pub energy_cost: F,
    /// Sum of departure dissatisfaction (kWh).
    pub unfinished_demand: F,
    pub objective: F,
}

impl<F: Scalar> EpisodeLedger<F> {
    pub fn zero() -> Self {
        Self {
            purchase_cost: F::zero(),
            v2g_revenue: F::zero(),
            pv_revenue: F::zero(),
            degradation_cost: F::zero(),
            energy_cost: F::zero(),
            unfinished_demand: F::zero(),
            objective: F::zero(),
        }
    }

    /// Builds a ledger from its primitive terms, deriving the two totals.
    pub fn from_terms(
        purchase_cost: F,
        v2g_revenue: F,
        pv_revenue: F,
        degradation_cost: F,
        unfinished_demand: F,
        cfg: &StationConfig<F>,
    ) -> Self {
        let energy_cost = purchase_cost - v2g_revenue - pv_revenue + degradation_cost;
        Self {
            purchase_cost,
            v2g_revenue,
            pv_revenue,
            degradation_cost,
            energy_cost,
            unfinished_demand,
            objective: energy_cost + cfg.dissatisfaction_weight * unfinished_demand,
        }
    }
}

impl<F: Scalar> AddAssign for EpisodeLedger<F> {
    fn add_assign(&mut self, rhs: Self) {
        self.purchase_cost += rhs.purchase_cost;
        self.v2g_revenue += rhs.v2g_revenue;
        self.pv_revenue += rhs.pv_revenue;
        self.degradation_cost += rhs.degradation_cost;
        self.energy_cost += rhs.energy_cost;
        self.unfinished_demand += rhs.unfinished_demand;
        self.objective += rhs.objective;
    }
}

/// Station objective recomputed from the primitive ledger terms: net energy
/// purchases, degradation and weighted unmet demand minus PV feed-in revenue.
pub fn episode_objective<F: Scalar>(ledger: &EpisodeLedger<F>, cfg: &StationConfig<F>) -> F {
    (ledger.purchase_cost - ledger.v2g_revenue)
        + ledger.degradation_cost
        + cfg.dissatisfaction_weight * ledger.unfinished_demand
        - ledger.pv_revenue
}
