use serde::{Deserialize, Serialize};

use super::maddpg::Maddpg;
use super::madqn::Madqn;
use super::obs::GlobalObs;
use super::MarlError;
use crate::num::Scalar;

/// A deployable controller for the whole station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar", tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Policy<F> {
    /// Never charges or discharges.
    Zero,
    /// Full charging power whenever a connected vehicle still needs energy.
    Greedy { p_ch: F },
    Maddpg(Maddpg<F>),
    Madqn(Madqn<F>),
}

impl<F: Scalar> Policy<F> {
    /// True when one charger's action can depend on other chargers' reports.
    pub fn is_centralized(&self) -> bool {
        matches!(self, Policy::Madqn(_))
    }

    /// Number of chargers the parameters were built for, if fixed.
    pub fn n_agents(&self) -> Option<usize> {
        match self {
            Policy::Zero | Policy::Greedy { .. } => None,
            Policy::Maddpg(m) => Some(m.n_agents()),
            Policy::Madqn(m) => Some(m.n_agents()),
        }
    }

    /// Noise-free joint action in kW.
    ///
    /// Decentralized policies read charger `i`'s own entry of `truth` and the
    /// shared window only. The centralized policy reads `reported`, which
    /// may carry corrupted entries for faulty chargers.
    pub fn act(&self, truth: &GlobalObs<F>, reported: &GlobalObs<F>) -> Result<Vec<F>, MarlError> {
        let n = truth.n_agents();
        if let Some(k) = self.n_agents() {
            if k != n {
                return Err(MarlError::Config(format!("policy built for {k} chargers, station has {n}")));
            }
        }
        match self {
            Policy::Zero => Ok(vec![F::zero(); n]),
            Policy::Greedy { p_ch } => Ok((0..n)
                .map(|i| {
                    let o = truth.view(i).local;
                    if o.is_connected() && o.e_remaining > F::zero() {
                        *p_ch
                    } else {
                        F::zero()
                    }
                })
                .collect()),
            Policy::Maddpg(m) => m.act_noise_free(truth),
            Policy::Madqn(m) => {
                let idx = m.greedy(&m.scale.features(reported))?;
                Ok(m.to_kw(&idx))
            }
        }
    }
}
