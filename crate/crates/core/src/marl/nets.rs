use rand::Rng;
use serde::{Deserialize, Serialize};

use super::obs::{Features, EXO_FEATURES, LOCAL_FEATURES};
use crate::neural::{Activation, Lstm, LstmCache, LstmState, Mlp, MlpCache, NeuralError, ParamSet, Tensor};
use crate::num::Scalar;

/// Layer sizes for actors, critics and the centralized Q network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetShape {
    /// Hidden width of the window encoder; `None` feeds only the newest
    /// window row to the dense layers.
    pub lstm_hidden: Option<usize>,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
}

impl Default for NetShape {
    fn default() -> Self {
        Self {
            lstm_hidden: Some(32),
            actor_hidden: vec![64],
            critic_hidden: vec![128, 64],
        }
    }
}

/// Turns the exogenous window into a fixed-width vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub enum Encoder<F> {
    Lstm(Lstm<F>),
    /// Passes the newest row through.
    Last,
}

impl<F: Scalar> Encoder<F> {
    pub fn new<R: Rng>(hidden: Option<usize>, rng: &mut R) -> Self {
        match hidden {
            Some(h) => Encoder::Lstm(Lstm::new(EXO_FEATURES, h, rng)),
            None => Encoder::Last,
        }
    }

    pub fn output_size(&self) -> usize {
        match self {
            Encoder::Lstm(l) => l.hidden_size(),
            Encoder::Last => EXO_FEATURES,
        }
    }

    fn last_row(window: &[F]) -> Result<Vec<F>, NeuralError> {
        if window.len() < EXO_FEATURES || window.len() % EXO_FEATURES != 0 {
            return Err(NeuralError::Shape {
                what: "exogenous window",
                expected: EXO_FEATURES,
                got: window.len(),
            });
        }
        Ok(window[window.len() - EXO_FEATURES..].to_vec())
    }

    pub fn encode(&self, window: &[F]) -> Result<Vec<F>, NeuralError> {
        match self {
            Encoder::Lstm(l) => l.encode(window),
            Encoder::Last => Self::last_row(window),
        }
    }

    pub fn encode_cached(&self, window: &[F]) -> Result<(Vec<F>, Option<LstmCache<F>>), NeuralError> {
        match self {
            Encoder::Lstm(l) => {
                let (_, last, cache) = l.forward(window, &LstmState::zeros(l.hidden_size()))?;
                Ok((last.h, Some(cache)))
            }
            Encoder::Last => Ok((Self::last_row(window)?, None)),
        }
    }

    fn backward_into(&self, cache: Option<&LstmCache<F>>, dh: &[F], grads: &mut Self) -> Result<(), NeuralError> {
        match (self, cache, grads) {
            (Encoder::Lstm(l), Some(c), Encoder::Lstm(g)) => {
                l.backward_into(c, None, dh, None, g)?;
                Ok(())
            }
            (Encoder::Last, None, Encoder::Last) => Ok(()),
            (_, _, _) => Err(NeuralError::StaleCache),
        }
    }
}

impl<F: Scalar> ParamSet<F> for Encoder<F> {
    fn tensors(&self) -> Vec<&Tensor<F>> {
        match self {
            Encoder::Lstm(l) => l.tensors(),
            Encoder::Last => vec![],
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        match self {
            Encoder::Lstm(l) => l.tensors_mut(),
            Encoder::Last => vec![],
        }
    }

    fn mark_updated(&mut self) {
        if let Encoder::Lstm(l) = self {
            l.mark_updated();
        }
    }
}

fn hidden_stack(sizes: &[usize], hidden: Activation, out: Activation) -> Vec<Activation> {
    let mut acts = vec![hidden; sizes.len().saturating_sub(2)];
    acts.push(out);
    acts
}

/// Decentralized actor: window encoding and own local scalars to a value in (-1, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ActorNet<F> {
    pub encoder: Encoder<F>,
    pub mlp: Mlp<F>,
}

#[derive(Debug, Clone)]
pub struct ActorCache<F> {
    enc: Option<LstmCache<F>>,
    mlp: MlpCache<F>,
    /// Output before the tanh squash.
    pub pre: F,
    pub u: F,
}

impl<F: Scalar> ActorNet<F> {
    pub fn new<R: Rng>(shape: &NetShape, rng: &mut R) -> Result<Self, NeuralError> {
        let encoder = Encoder::new(shape.lstm_hidden, rng);
        let mut sizes = vec![encoder.output_size() + LOCAL_FEATURES];
        sizes.extend(&shape.actor_hidden);
        sizes.push(1);
        let acts = hidden_stack(&sizes, Activation::Relu, Activation::Identity);
        Ok(Self {
            mlp: Mlp::new(&sizes, &acts, rng)?,
            encoder,
        })
    }

    fn input(h: Vec<F>, local: &[F]) -> Vec<F> {
        let mut x = h;
        x.extend_from_slice(local);
        x
    }

    /// Squashed output for a normalized window and local feature vector.
    pub fn forward(&self, window: &[F], local: &[F]) -> Result<F, NeuralError> {
        let h = self.encoder.encode(window)?;
        Ok(self.mlp.predict(&Self::input(h, local))?[0].tanh())
    }

    pub fn forward_cached(&self, window: &[F], local: &[F]) -> Result<(F, ActorCache<F>), NeuralError> {
        let (h, enc) = self.encoder.encode_cached(window)?;
        let (y, mlp) = self.mlp.forward(&Self::input(h, local))?;
        let u = y[0].tanh();
        Ok((u, ActorCache { enc, mlp, pre: y[0], u }))
    }

    /// Adds the parameter gradient for upstream `du` into `grads`.
    pub fn backward_into(&self, cache: &ActorCache<F>, du: F, grads: &mut Self) -> Result<(), NeuralError> {
        self.backward_pre_into(cache, du * (F::one() - cache.u * cache.u), grads)
    }

    /// Same as [`ActorNet::backward_into`] with the upstream gradient taken
    /// with respect to the pre-squash output.
    pub fn backward_pre_into(&self, cache: &ActorCache<F>, dpre: F, grads: &mut Self) -> Result<(), NeuralError> {
        let dx = self.mlp.backward_into(&cache.mlp, &[dpre], &mut grads.mlp)?;
        let k = self.encoder.output_size();
        self.encoder.backward_into(cache.enc.as_ref(), &dx[..k], &mut grads.encoder)
    }
}

impl<F: Scalar> ParamSet<F> for ActorNet<F> {
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

/// Anything that scores a joint action and differentiates that score with
/// respect to one agent's (normalized) action.
pub trait ActionValue<F: Scalar> {
    fn value_and_action_grad(&self, s: &Features<F>, actions: &[F], agent: usize) -> Result<(F, F), NeuralError>;
}

/// Centralized critic over the window encoding, every charger's local scalars
/// and every charger's normalized action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct CriticNet<F> {
    pub encoder: Encoder<F>,
    pub mlp: Mlp<F>,
    n_agents: usize,
}

#[derive(Debug, Clone)]
pub struct CriticCache<F> {
    enc: Option<LstmCache<F>>,
    mlp: MlpCache<F>,
}

impl<F: Scalar> CriticNet<F> {
    pub fn new<R: Rng>(shape: &NetShape, n_agents: usize, rng: &mut R) -> Result<Self, NeuralError> {
        let encoder = Encoder::new(shape.lstm_hidden, rng);
        let mut sizes = vec![encoder.output_size() + n_agents * (LOCAL_FEATURES + 1)];
        sizes.extend(&shape.critic_hidden);
        sizes.push(1);
        let acts = hidden_stack(&sizes, Activation::Relu, Activation::Identity);
        Ok(Self {
            mlp: Mlp::new(&sizes, &acts, rng)?,
            encoder,
            n_agents,
        })
    }

    pub fn from_parts(encoder: Encoder<F>, mlp: Mlp<F>, n_agents: usize) -> Result<Self, NeuralError> {
        let expected = encoder.output_size() + n_agents * (LOCAL_FEATURES + 1);
        if mlp.input_size() != expected || mlp.output_size() != 1 {
            return Err(NeuralError::Shape {
                what: "critic input",
                expected,
                got: mlp.input_size(),
            });
        }
        Ok(Self { encoder, mlp, n_agents })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    fn input(&self, h: Vec<F>, s: &Features<F>, actions: &[F]) -> Result<Vec<F>, NeuralError> {
        if actions.len() != self.n_agents {
            return Err(NeuralError::Shape {
                what: "critic actions",
                expected: self.n_agents,
                got: actions.len(),
            });
        }
        let mut x = h;
        x.extend_from_slice(&s.locals);
        x.extend_from_slice(actions);
        Ok(x)
    }

    fn action_offset(&self) -> usize {
        self.encoder.output_size() + self.n_agents * LOCAL_FEATURES
    }

    pub fn q(&self, s: &Features<F>, actions: &[F]) -> Result<F, NeuralError> {
        let h = self.encoder.encode(&s.window)?;
        Ok(self.mlp.predict(&self.input(h, s, actions)?)?[0])
    }

    pub fn forward_cached(&self, s: &Features<F>, actions: &[F]) -> Result<(F, CriticCache<F>), NeuralError> {
        let (h, enc) = self.encoder.encode_cached(&s.window)?;
        let (y, mlp) = self.mlp.forward(&self.input(h, s, actions)?)?;
        Ok((y[0], CriticCache { enc, mlp }))
    }

    pub fn backward_into(&self, cache: &CriticCache<F>, dq: F, grads: &mut Self) -> Result<(), NeuralError> {
        let dx = self.mlp.backward_into(&cache.mlp, &[dq], &mut grads.mlp)?;
        let k = self.encoder.output_size();
        self.encoder.backward_into(cache.enc.as_ref(), &dx[..k], &mut grads.encoder)
    }
}

impl<F: Scalar> ActionValue<F> for CriticNet<F> {
    fn value_and_action_grad(&self, s: &Features<F>, actions: &[F], agent: usize) -> Result<(F, F), NeuralError> {
        let h = self.encoder.encode(&s.window)?;
        let (y, cache) = self.mlp.forward(&self.input(h, s, actions)?)?;
        let dx = self.mlp.backward_input(&cache, &[F::one()])?;
        Ok((y[0], dx[self.action_offset() + agent]))
    }
}

impl<F: Scalar> ParamSet<F> for CriticNet<F> {
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
