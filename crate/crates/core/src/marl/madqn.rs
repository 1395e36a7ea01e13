use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::Transition;
use super::maddpg::ActionMap;
use super::nets::{Encoder, NetShape};
use super::obs::{FeatureScale, Features, GlobalObs, LOCAL_FEATURES};
use super::MarlError;
use crate::neural::{soft_update, Activation, Adam, AdamConfig, LstmCache, Mlp, MlpCache, NeuralError, ParamSet, Tensor};
use crate::num::Scalar;

/// `k` evenly spaced power levels from `-P_disch` to `P_ch`.
pub fn action_levels<F: Scalar>(k: usize, map: &ActionMap<F>) -> Vec<F> {
    match k {
        0 => vec![],
        1 => vec![F::zero()],
        _ => {
            let span = map.p_ch + map.p_disch;
            let steps = F::from_usize(k - 1).unwrap();
            (0..k)
                .map(|j| {
                    if j == k - 1 {
                        map.p_ch
                    } else {
                        -map.p_disch + span * F::from_usize(j).unwrap() / steps
                    }
                })
                .collect()
        }
    }
}

/// Index of the largest entry; the first one on ties.
pub fn argmax<F: Scalar>(xs: &[F]) -> usize {
    let mut best = 0;
    for (j, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = j;
        }
    }
    best
}

/// Shared global-state trunk with one block of `k` Q values per charger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct QNet<F> {
    pub encoder: Encoder<F>,
    pub mlp: Mlp<F>,
    n_agents: usize,
    k: usize,
}

#[derive(Debug, Clone)]
pub struct QCache<F> {
    enc: Option<LstmCache<F>>,
    mlp: MlpCache<F>,
}

impl<F: Scalar> QNet<F> {
    pub fn new<R: Rng>(shape: &NetShape, n_agents: usize, k: usize, rng: &mut R) -> Result<Self, NeuralError> {
        let encoder = Encoder::new(shape.lstm_hidden, rng);
        let mut sizes = vec![encoder.output_size() + n_agents * LOCAL_FEATURES];
        sizes.extend(&shape.critic_hidden);
        sizes.push(n_agents * k);
        let mut acts = vec![Activation::Relu; sizes.len() - 2];
        acts.push(Activation::Identity);
        Ok(Self {
            mlp: Mlp::new(&sizes, &acts, rng)?,
            encoder,
            n_agents,
            k,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn levels(&self) -> usize {
        self.k
    }

    fn input(h: Vec<F>, s: &Features<F>) -> Vec<F> {
        let mut x = h;
        x.extend_from_slice(&s.locals);
        x
    }

    /// All `N * K` values, agent-major.
    pub fn q_all(&self, s: &Features<F>) -> Result<Vec<F>, NeuralError> {
        let h = self.encoder.encode(&s.window)?;
        self.mlp.predict(&Self::input(h, s))
    }

    pub fn forward_cached(&self, s: &Features<F>) -> Result<(Vec<F>, QCache<F>), NeuralError> {
        let (h, enc) = self.encoder.encode_cached(&s.window)?;
        let (y, mlp) = self.mlp.forward(&Self::input(h, s))?;
        Ok((y, QCache { enc, mlp }))
    }

    pub fn backward_into(&self, cache: &QCache<F>, dq: &[F], grads: &mut Self) -> Result<(), NeuralError> {
        let dx = self.mlp.backward_into(&cache.mlp, dq, &mut grads.mlp)?;
        let k = self.encoder.output_size();
        match (&self.encoder, cache.enc.as_ref(), &mut grads.encoder) {
            (Encoder::Lstm(l), Some(c), Encoder::Lstm(g)) => {
                l.backward_into(c, None, &dx[..k], None, g)?;
                Ok(())
            }
            (Encoder::Last, None, Encoder::Last) => Ok(()),
            _ => Err(NeuralError::StaleCache),
        }
    }
}

impl<F: Scalar> ParamSet<F> for QNet<F> {
    fn tensors(&self) -> Vec<&Tensor<F>> {
        let mut t = self.encoder.tensors();
        t.extend(self.mlp.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.mlp.tensors_mut());
        t
    }

    fn mark_updated(&mut self) {
        self.encoder.mark_updated();
        self.mlp.mark_updated();
    }
}

/// Centralized discrete-action baseline: one network reads the whole
/// reported station state and picks every charger's level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Madqn<F> {
    pub online: QNet<F>,
    pub target: QNet<F>,
    pub opt: Adam<F>,
    pub levels: Vec<F>,
    pub scale: FeatureScale<F>,
}

impl<F: Scalar> Madqn<F> {
    pub fn new<R: Rng>(
        n_agents: usize,
        k: usize,
        shape: &NetShape,
        scale: FeatureScale<F>,
        map: &ActionMap<F>,
        opt: AdamConfig,
        rng: &mut R,
    ) -> Result<Self, MarlError> {
        if k < 2 {
            return Err(MarlError::Config(format!("need at least 2 action levels, got {k}")));
        }
        let online = QNet::new(shape, n_agents, k, rng)?;
        Ok(Self {
            opt: Adam::new(&online, opt),
            target: online.clone(),
            online,
            levels: action_levels(k, map),
            scale,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.online.n_agents()
    }

    /// Per-charger argmax over the online heads.
    pub fn greedy(&self, s: &Features<F>) -> Result<Vec<usize>, MarlError> {
        let q = self.online.q_all(s)?;
        Ok(q.chunks_exact(self.levels.len()).map(argmax).collect())
    }

    /// ε-greedy level indices from the (reported) global state.
    pub fn act<R: Rng>(&self, obs: &GlobalObs<F>, epsilon: f64, rng: &mut R) -> Result<Vec<usize>, MarlError> {
        let greedy = if epsilon < 1.0 {
            self.greedy(&self.scale.features(obs))?
        } else {
            vec![0; self.n_agents()]
        };
        let k = self.levels.len();
        Ok(greedy
            .into_iter()
            .map(|g| if epsilon > 0.0 && rng.random_bool(epsilon.min(1.0)) { rng.random_range(0..k) } else { g })
            .collect())
    }

    pub fn to_kw(&self, idx: &[usize]) -> Vec<F> {
        idx.iter().map(|&j| self.levels[j]).collect()
    }

    /// One TD step over all heads, then target blending. Returns the mean
    /// squared TD error before the step.
    pub fn update(&mut self, batch: &[&Transition<F, usize>], gamma: F, tau: F) -> Result<F, MarlError> {
        if batch.is_empty() {
            return Ok(F::zero());
        }
        let (n, k) = (self.n_agents(), self.levels.len());
        let denom = F::from_usize(batch.len() * n).unwrap();
        let mut grads = self.online.zeros_like();
        let mut loss = F::zero();
        for tr in batch {
            let q_next = self.target.q_all(&tr.s_next)?;
            let (q, cache) = self.online.forward_cached(&tr.s)?;
            let mut dq = vec![F::zero(); n * k];
            for i in 0..n {
                let best = q_next[i * k..(i + 1) * k].iter().copied().fold(F::neg_infinity(), F::max);
                let y = if tr.done[i] { tr.r[i] } else { tr.r[i] + gamma * best };
                let idx = i * k + tr.a[i];
                let e = q[idx] - y;
                loss += e * e;
                dq[idx] = F::lit(2.0) * e / denom;
            }
            self.online.backward_into(&cache, &dq, &mut grads)?;
        }
        let loss = loss / denom;
        if !loss.is_finite() {
            return Err(MarlError::NonFinite("q loss"));
        }
        self.opt.step(&mut self.online, &grads)?;
        soft_update(&mut self.target, &self.online, tau)?;
        Ok(loss)
    }
}
