use serde::{Deserialize, Serialize};

use super::physics::{cycle_aging, dispatch, dissatisfaction, project_action, soc_update};
use super::reward::{completed_average_power, grid_penalty, reward_cost, reward_total, reward_user};
use super::{
    ChargerState, Dispatch, EpisodeLedger, EvSession, ExogenousSeries, JointAction,
    RewardBreakdown, SimError, StationConfig, StationState,
};
use crate::num::Scalar;

/// A vehicle leaving at the end of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Departure<F> {
    pub charger_id: usize,
    /// Unmet demand at departure (kWh).
    pub ds: F,
}

/// Everything produced by one transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct StepOutcome<F> {
    pub next: StationState<F>,
    pub rewards: RewardBreakdown<F>,
    pub ledger: EpisodeLedger<F>,
    pub dispatch: Dispatch<F>,
    pub departures: Vec<Departure<F>>,
    /// Per-charger episode-termination flags.
    pub done: Vec<bool>,
}

/// Charging-station environment for one episode.
#[derive(Debug, Clone)]
pub struct Station<F: Scalar> {
    cfg: StationConfig<F>,
    exo: ExogenousSeries<F>,
    horizon: usize,
    sessions: Vec<EvSession<F>>,
    /// `arrivals[t]` holds indices into `sessions` arriving at slot `t`.
    arrivals: Vec<Vec<usize>>,
    state: StationState<F>,
    ledger: EpisodeLedger<F>,
}

impl<F: Scalar> Station<F> {
    /// Validates the configuration, exogenous series and session schedule.
    ///
    /// Sessions must lie inside `0..=horizon` and must not overlap on a charger.
    pub fn new(
        cfg: StationConfig<F>,
        exo: ExogenousSeries<F>,
        mut sessions: Vec<EvSession<F>>,
        horizon: usize,
    ) -> Result<Self, SimError> {
        cfg.validate()?;
        if horizon == 0 {
            return Err(SimError::InvalidSeries("episode length must be at least 1".into()));
        }
        exo.validate(horizon)?;
        sessions.sort_by_key(|s| (s.t_arrive, s.charger_id));
        let mut busy_until = vec![0usize; cfg.n_chargers];
        let mut arrivals = vec![Vec::new(); horizon];
        for (idx, s) in sessions.iter().enumerate() {
            let invalid = |reason: String| SimError::InvalidSession { index: idx, reason };
            s.validate().map_err(invalid)?;
            if s.charger_id >= cfg.n_chargers {
                return Err(invalid(format!(
                    "charger {} out of range for {} chargers",
                    s.charger_id, cfg.n_chargers
                )));
            }
            if s.t_depart > horizon {
                return Err(invalid(format!(
                    "departs at {} after episode end {horizon}",
                    s.t_depart
                )));
            }
            if s.t_arrive < busy_until[s.charger_id] {
                return Err(invalid(format!("overlaps another session on charger {}", s.charger_id)));
            }
            busy_until[s.charger_id] = s.t_depart;
            arrivals[s.t_arrive].push(idx);
        }
        let mut station = Self {
            state: StationState {
                t: 0,
                chargers: Vec::new(),
                exo_window: Vec::new(),
            },
            ledger: EpisodeLedger::zero(),
            cfg,
            exo,
            horizon,
            sessions,
            arrivals,
        };
        station.reset();
        Ok(station)
    }

    pub fn config(&self) -> &StationConfig<F> {
        &self.cfg
    }

    pub fn exogenous(&self) -> &ExogenousSeries<F> {
        &self.exo
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn sessions(&self) -> &[EvSession<F>] {
        &self.sessions
    }

    pub fn state(&self) -> &StationState<F> {
        &self.state
    }

    pub fn ledger(&self) -> &EpisodeLedger<F> {
        &self.ledger
    }

    pub fn is_done(&self) -> bool {
        self.state.t >= self.horizon
    }

    /// Rewinds to slot 0 with the sessions arriving at slot 0 attached.
    pub fn reset(&mut self) -> &StationState<F> {
        let mut chargers = vec![ChargerState::empty(); self.cfg.n_chargers];
        for &idx in &self.arrivals[0] {
            let s = self.sessions[idx].clone();
            let c = s.charger_id;
            chargers[c] = ChargerState::attach(s, 0, self.cfg.dt);
        }
        self.state = StationState {
            t: 0,
            chargers,
            exo_window: self.exo.window(0),
        };
        self.ledger = EpisodeLedger::zero();
        &self.state
    }

    /// Applies `a_raw` and advances the internal state.
    pub fn step(&mut self, a_raw: &JointAction<F>) -> Result<StepOutcome<F>, SimError> {
        let out = self.transition(&self.state, a_raw)?;
        self.state = out.next.clone();
        self.ledger += out.ledger;
        Ok(out)
    }

    /// Pure transition from `st` under `a_raw`.
    ///
    /// Order: projection, dispatch, aging, SOC update, rewards, then departures
    /// and arrivals for slot `t + 1`.
    pub fn transition(
        &self,
        st: &StationState<F>,
        a_raw: &JointAction<F>,
    ) -> Result<StepOutcome<F>, SimError> {
        let cfg = &self.cfg;
        let n = cfg.n_chargers;
        if st.t >= self.horizon {
            return Err(SimError::EpisodeExhausted {
                t: st.t,
                horizon: self.horizon,
            });
        }
        if a_raw.len() != n || st.chargers.len() != n {
            return Err(SimError::ActionArity {
                expected: n,
                got: a_raw.len(),
            });
        }
        let t = st.t;
        let zero = F::zero();
        let (price_buy, price_sell, pv_t) = (self.exo.price_buy[t], self.exo.price_sell[t], self.exo.pv_gen[t]);

        let projected = JointAction(
            st.chargers
                .iter()
                .zip(&a_raw.0)
                .map(|(cs, &a)| project_action(a, cs, cfg))
                .collect(),
        );
        let d = dispatch(&projected, pv_t, cfg);

        let connected: Vec<bool> = st.chargers.iter().map(|c| c.is_connected()).collect();
        let n_connected = connected.iter().filter(|&&c| c).count();
        let r_grid_shared = grid_penalty(&d, cfg);

        let mut rewards = RewardBreakdown {
            r_cost: vec![zero; n],
            r_cdb: vec![zero; n],
            r_pv: d.pvg * price_sell * cfg.dt,
            n_connected,
            r_user: vec![zero; n],
            r_grid: if n_connected > 0 { r_grid_shared } else { zero },
            r_terminal: vec![zero; n],
            r_total: vec![zero; n],
            age: vec![zero; n],
            ds_terminal: vec![zero; n],
            connected: connected.clone(),
        };

        let mut chargers = Vec::with_capacity(n);
        let mut degradation = zero;
        for (i, cs) in st.chargers.iter().enumerate() {
            let Some(s) = &cs.session else {
                chargers.push(ChargerState::empty());
                continue;
            };
            let a = d.action[i];
            let age = cycle_aging(a, s, cfg.dt);
            let age_cost = age * cfg.kappa_batt;
            degradation += age_cost;
            rewards.age[i] = age;
            if cfg.dense_reward {
                rewards.r_user[i] = reward_user(completed_average_power(cs), a, cfg);
            }
            let cost = reward_cost(i, &d, (price_buy, price_sell), age_cost, n_connected, cfg);
            rewards.r_cdb[i] = cost.r_cdb;
            rewards.r_cost[i] = cost.r_cost;
            rewards.r_total[i] = reward_total(cost.r_cost, rewards.r_user[i], rewards.r_grid);
            chargers.push(soc_update(cs, a, cfg)?);
        }

        let t_next = t + 1;
        let mut departures = Vec::new();
        let mut unfinished = zero;
        for (i, cs) in chargers.iter_mut().enumerate() {
            let departing = cs.session.as_ref().is_some_and(|s| s.t_depart == t_next);
            if departing {
                let s = cs.session.as_ref().unwrap();
                let ds = dissatisfaction(s, cs.e_now);
                unfinished += ds;
                rewards.ds_terminal[i] = ds;
                if cfg.terminal_ds_penalty {
                    rewards.r_terminal[i] = cfg.dissatisfaction_weight * ds;
                    rewards.r_total[i] -= rewards.r_terminal[i];
                }
                departures.push(Departure { charger_id: i, ds });
                *cs = ChargerState::empty();
            } else {
                cs.refresh(t_next, cfg.dt);
            }
        }
        if t_next < self.horizon {
            for &idx in &self.arrivals[t_next] {
                let s = self.sessions[idx].clone();
                let c = s.charger_id;
                chargers[c] = ChargerState::attach(s, t_next, cfg.dt);
            }
        }

        let purchase: F = d.g2v.iter().map(|&g| g * price_buy * cfg.dt).sum();
        let v2g: F = (0..n).map(|i| d.discharge(i) * price_sell * cfg.dt).sum();
        let ledger = EpisodeLedger::from_terms(purchase, v2g, rewards.r_pv, degradation, unfinished, cfg);

        let done = vec![t_next >= self.horizon; n];
        Ok(StepOutcome {
            next: StationState {
                t: t_next,
                chargers,
                exo_window: self.exo.window(t_next),
            },
            rewards,
            ledger,
            dispatch: d,
            departures,
            done,
        })
    }
}
