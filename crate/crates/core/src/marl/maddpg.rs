use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::buffer::Transition;
use super::nets::{ActionValue, ActorNet, CriticNet, NetShape};
use super::obs::{FeatureScale, GlobalObs, LocalView};
use super::MarlError;
use crate::neural::{soft_update, Adam, AdamConfig, ParamSet};
use crate::num::Scalar;
use crate::sim::StationConfig;

/// Maps a squashed actor output in [-1, 1] to signed kW and back to the
/// normalized action seen by critics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ActionMap<F> {
    pub p_ch: F,
    pub p_disch: F,
}

impl<F: Scalar> ActionMap<F> {
    pub fn from_config(cfg: &StationConfig<F>) -> Self {
        Self {
            p_ch: cfg.p_ch_max,
            p_disch: cfg.p_disch_max,
        }
    }

    /// `u >= 0` scales to charging power, `u < 0` to discharging power.
    pub fn to_kw(&self, u: F) -> F {
        if u >= F::zero() {
            u * self.p_ch
        } else {
            u * self.p_disch
        }
    }

    /// d kW / d u.
    pub fn slope(&self, u: F) -> F {
        if u >= F::zero() {
            self.p_ch
        } else {
            self.p_disch
        }
    }

    pub fn clamp(&self, kw: F) -> F {
        kw.max(-self.p_disch).min(self.p_ch)
    }

    /// Largest power magnitude; critics see actions divided by it.
    pub fn reference(&self) -> F {
        self.p_ch.max(self.p_disch)
    }

    pub fn normalize(&self, kw: F) -> F {
        kw / self.reference()
    }
}

/// One charger's learner: online and target actor and critic plus optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct AgentNets<F> {
    pub actor: ActorNet<F>,
    pub critic: CriticNet<F>,
    pub actor_target: ActorNet<F>,
    pub critic_target: CriticNet<F>,
    pub actor_opt: Adam<F>,
    pub critic_opt: Adam<F>,
}

impl<F: Scalar> AgentNets<F> {
    pub fn new<R: Rng>(
        shape: &NetShape,
        n_agents: usize,
        actor_opt: AdamConfig,
        critic_opt: AdamConfig,
        rng: &mut R,
    ) -> Result<Self, MarlError> {
        let actor = ActorNet::new(shape, rng)?;
        let critic = CriticNet::new(shape, n_agents, rng)?;
        Ok(Self {
            actor_opt: Adam::new(&actor, actor_opt),
            critic_opt: Adam::new(&critic, critic_opt),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
        })
    }

    pub fn soft_update_targets(&mut self, tau: F) -> Result<(), MarlError> {
        soft_update(&mut self.actor_target, &self.actor, tau)?;
        soft_update(&mut self.critic_target, &self.critic, tau)?;
        Ok(())
    }
}

/// Decentralized action for one charger, in kW.
///
/// Only `view` reaches the network. Gaussian noise with standard deviation
/// `noise * max(P_ch, P_disch)` is added before clamping.
pub fn actor_act<F: Scalar, R: Rng>(
    actor: &ActorNet<F>,
    view: LocalView<'_, F>,
    scale: &FeatureScale<F>,
    map: &ActionMap<F>,
    noise: f64,
    rng: &mut R,
) -> Result<F, MarlError> {
    let u = actor.forward(&scale.window(view.window), &scale.local(view.local))?;
    let mut kw = map.to_kw(u);
    if noise > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        kw += F::lit(z * noise) * map.reference();
    }
    Ok(map.clamp(kw))
}

/// Normalized target-actor actions at every `s_next` of the batch.
pub fn target_actions<F: Scalar>(
    agents: &[AgentNets<F>],
    batch: &[&Transition<F>],
    map: &ActionMap<F>,
) -> Result<Vec<Vec<F>>, MarlError> {
    batch
        .iter()
        .map(|tr| {
            agents
                .iter()
                .enumerate()
                .map(|(j, ag)| {
                    let u = ag.actor_target.forward(&tr.s_next.window, tr.s_next.local(j))?;
                    Ok(map.normalize(map.to_kw(u)))
                })
                .collect()
        })
        .collect()
}

/// One TD step on agent `agent`'s critic. Returns the mean squared TD error
/// before the step.
pub fn update_critic<F: Scalar>(
    critic: &mut CriticNet<F>,
    opt: &mut Adam<F>,
    target: &CriticNet<F>,
    batch: &[&Transition<F>],
    next_actions: &[Vec<F>],
    agent: usize,
    gamma: F,
    map: &ActionMap<F>,
) -> Result<F, MarlError> {
    if batch.is_empty() {
        return Ok(F::zero());
    }
    let bsz = F::from_usize(batch.len()).unwrap();
    let mut grads = critic.zeros_like();
    let mut loss = F::zero();
    for (tr, a_next) in batch.iter().zip(next_actions) {
        let cont = if tr.done[agent] { F::zero() } else { gamma };
        let y = if cont == F::zero() {
            tr.r[agent]
        } else {
            tr.r[agent] + cont * target.q(&tr.s_next, a_next)?
        };
        let a: Vec<F> = tr.a.iter().map(|&x| map.normalize(x)).collect();
        let (q, cache) = critic.forward_cached(&tr.s, &a)?;
        let e = q - y;
        loss += e * e;
        critic.backward_into(&cache, F::lit(2.0) * e / bsz, &mut grads)?;
    }
    let loss = loss / bsz;
    if !loss.is_finite() {
        return Err(MarlError::NonFinite("critic loss"));
    }
    opt.step(critic, &grads)?;
    Ok(loss)
}

/// One deterministic policy-gradient step on agent `agent`'s actor against a
/// fixed critic. Other agents' actions come from the batch; samples where the
/// agent has no vehicle carry no signal and are skipped. `reg` weights a
/// penalty on the squared pre-squash output, which keeps the actor out of
/// the flat tails of tanh. Returns the mean critic value at the actor's
/// actions before the step.
pub fn update_actor<F: Scalar, C: ActionValue<F>>(
    actor: &mut ActorNet<F>,
    opt: &mut Adam<F>,
    critic: &C,
    batch: &[&Transition<F>],
    agent: usize,
    map: &ActionMap<F>,
    reg: F,
) -> Result<F, MarlError> {
    if batch.is_empty() {
        return Ok(F::zero());
    }
    let bsz = F::from_usize(batch.len()).unwrap();
    let mut grads = actor.zeros_like();
    let mut q_sum = F::zero();
    let mut used = 0usize;
    for tr in batch {
        if !tr.s.connected(agent) {
            continue;
        }
        let (u, cache) = actor.forward_cached(&tr.s.window, tr.s.local(agent))?;
        let mut a: Vec<F> = tr.a.iter().map(|&x| map.normalize(x)).collect();
        a[agent] = map.normalize(map.to_kw(u));
        let (q, dq) = critic.value_and_action_grad(&tr.s, &a, agent)?;
        q_sum += q;
        used += 1;
        let du = -dq * map.slope(u) / map.reference() / bsz;
        let dpre = du * (F::one() - u * u) + F::lit(2.0) * reg * cache.pre / bsz;
        actor.backward_pre_into(&cache, dpre, &mut grads)?;
    }
    if used == 0 {
        return Ok(F::zero());
    }
    if !grads.all_finite() {
        return Err(MarlError::NonFinite("actor gradient"));
    }
    opt.step(actor, &grads)?;
    Ok(q_sum / F::from_usize(used).unwrap())
}

/// Decentralized actors with centralized critics, one learner per charger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Maddpg<F> {
    pub agents: Vec<AgentNets<F>>,
    pub scale: FeatureScale<F>,
    pub map: ActionMap<F>,
}

impl<F: Scalar> Maddpg<F> {
    pub fn new<R: Rng>(
        n_agents: usize,
        shape: &NetShape,
        scale: FeatureScale<F>,
        map: ActionMap<F>,
        actor_opt: AdamConfig,
        critic_opt: AdamConfig,
        rng: &mut R,
    ) -> Result<Self, MarlError> {
        let agents = (0..n_agents)
            .map(|_| AgentNets::new(shape, n_agents, actor_opt, critic_opt, rng))
            .collect::<Result<_, _>>()?;
        Ok(Self { agents, scale, map })
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Every charger acting on its own view of `obs`.
    pub fn act<R: Rng>(&self, obs: &GlobalObs<F>, noise: f64, rng: &mut R) -> Result<Vec<F>, MarlError> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, ag)| actor_act(&ag.actor, obs.view(i), &self.scale, &self.map, noise, rng))
            .collect()
    }

    /// Deterministic actions, no exploration.
    pub fn act_noise_free(&self, obs: &GlobalObs<F>) -> Result<Vec<F>, MarlError> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, ag)| {
                let view = obs.view(i);
                let u = ag.actor.forward(&self.scale.window(view.window), &self.scale.local(view.local))?;
                Ok(self.map.clamp(self.map.to_kw(u)))
            })
            .collect()
    }

    /// Critic then actor step for every agent, followed by target blending.
    /// Returns the mean critic loss.
    pub fn update(&mut self, batch: &[&Transition<F>], gamma: F, tau: F, reg: F) -> Result<F, MarlError> {
        let next = target_actions(&self.agents, batch, &self.map)?;
        let mut loss = F::zero();
        for i in 0..self.agents.len() {
            let ag = &mut self.agents[i];
            loss += update_critic(
                &mut ag.critic,
                &mut ag.critic_opt,
                &ag.critic_target,
                batch,
                &next,
                i,
                gamma,
                &self.map,
            )?;
            update_actor(&mut ag.actor, &mut ag.actor_opt, &ag.critic, batch, i, &self.map, reg)?;
        }
        for ag in &mut self.agents {
            ag.soft_update_targets(tau)?;
        }
        Ok(loss / F::from_usize(self.agents.len().max(1)).unwrap())
    }
}
