use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{check_congruent, fresh_version};
use super::{uniform, NeuralError, ParamSet, Tensor};
use crate::num::{axpy, dot, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply<F: Scalar>(self, z: F) -> F {
        match self {
            Self::Tanh => z.tanh(),
            Self::Relu => z.max(F::zero()),
            Self::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn grad_from_output<F: Scalar>(self, y: F) -> F {
        match self {
            Self::Tanh => F::one() - y * y,
            Self::Relu => {
                if y > F::zero() {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Self::Identity => F::one(),
        }
    }
}

/// Fully connected layer `y = act(W x + b)` with `W` shaped `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Dense<F> {
    pub w: Tensor<F>,
    pub b: Tensor<F>,
    pub act: Activation,
}

impl<F: Scalar> Dense<F> {
    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    pub fn output_size(&self) -> usize {
        self.b.len()
    }
}

/// Stack of dense layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Mlp<F> {
    layers: Vec<Dense<F>>,
    #[serde(skip, default = "fresh_version")]
    version: u64,
}

impl<F: PartialEq> PartialEq for Mlp<F> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

#[derive(Debug, Clone)]
pub struct MlpCache<F> {
    version: u64,
    /// Input of each layer followed by the final output.
    activations: Vec<Vec<F>>,
}

impl<F: Scalar> Mlp<F> {
    /// `sizes = [in, hidden.., out]`, one activation per layer. Weights are drawn
    /// from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng>(sizes: &[usize], acts: &[Activation], rng: &mut R) -> Result<Self, NeuralError> {
        if sizes.len() < 2 || acts.len() != sizes.len() - 1 {
            return Err(NeuralError::Shape {
                what: "mlp activations",
                expected: sizes.len().saturating_sub(1),
                got: acts.len(),
            });
        }
        let layers = sizes
            .windows(2)
            .zip(acts)
            .map(|(io, &act)| {
                let bound = 1.0 / (io[0] as f64).sqrt();
                Dense {
                    w: uniform(&[io[1], io[0]], bound, rng),
                    b: uniform(&[io[1]], bound, rng),
                    act,
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<Dense<F>>) -> Result<Self, NeuralError> {
        for (k, l) in layers.iter().enumerate() {
            if l.w.shape().len() != 2 || l.w.shape()[0] != l.b.len() {
                return Err(NeuralError::Shape {
                    what: "dense bias",
                    expected: l.w.shape()[0],
                    got: l.b.len(),
                });
            }
            if let Some(next) = layers.get(k + 1) {
                if next.input_size() != l.output_size() {
                    return Err(NeuralError::Shape {
                        what: "layer chain",
                        expected: l.output_size(),
                        got: next.input_size(),
                    });
                }
            }
        }
        Ok(Self {
            layers,
            version: fresh_version(),
        })
    }

    pub fn layers(&self) -> &[Dense<F>] {
        &self.layers
    }

    /// Mutable access to the layers; marks the parameters as changed.
    pub fn layers_mut(&mut self) -> &mut [Dense<F>] {
        self.version = fresh_version();
        &mut self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().unwrap().output_size()
    }

    fn check_input(&self, x: &[F]) -> Result<(), NeuralError> {
        if x.len() != self.input_size() {
            return Err(NeuralError::Shape {
                what: "mlp input",
                expected: self.input_size(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn layer_forward(l: &Dense<F>, x: &[F]) -> Vec<F> {
        (0..l.output_size())
            .map(|o| l.act.apply(dot(l.w.row(o), x) + l.b.data()[o]))
            .collect()
    }

    /// Inference without a cache.
    pub fn predict(&self, x: &[F]) -> Result<Vec<F>, NeuralError> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for l in &self.layers {
            h = Self::layer_forward(l, &h);
        }
        Ok(h)
    }

    pub fn forward(&self, x: &[F]) -> Result<(Vec<F>, MlpCache<F>), NeuralError> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for l in &self.layers {
            let y = Self::layer_forward(l, activations.last().unwrap());
            activations.push(y);
        }
        let y = activations.last().unwrap().clone();
        Ok((
            y,
            MlpCache {
                version: self.version,
                activations,
            },
        ))
    }

    fn check_cache(&self, cache: &MlpCache<F>, dy: &[F]) -> Result<(), NeuralError> {
        if cache.version != self.version || cache.activations.len() != self.layers.len() + 1 {
            return Err(NeuralError::StaleCache);
        }
        if dy.len() != self.output_size() {
            return Err(NeuralError::Shape {
                what: "mlp upstream gradient",
                expected: self.output_size(),
                got: dy.len(),
            });
        }
        Ok(())
    }

    fn backprop(&self, cache: &MlpCache<F>, dy: &[F], mut grads: Option<&mut Mlp<F>>) -> Vec<F> {
        let mut delta = dy.to_vec();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let x = &cache.activations[k];
            let y = &cache.activations[k + 1];
            let dz: Vec<F> = delta
                .iter()
                .zip(y)
                .map(|(&d, &yy)| d * l.act.grad_from_output(yy))
                .collect();
            if let Some(g) = grads.as_deref_mut() {
                let gl = &mut g.layers[k];
                for (o, &d) in dz.iter().enumerate() {
                    if d != F::zero() {
                        axpy(d, x, gl.w.row_mut(o));
                    }
                    gl.b.data_mut()[o] += d;
                }
            }
            let mut dx = vec![F::zero(); x.len()];
            for (o, &d) in dz.iter().enumerate() {
                if d != F::zero() {
                    axpy(d, l.w.row(o), &mut dx);
                }
            }
            delta = dx;
        }
        delta
    }

    /// Gradients of a scalar loss with respect to every parameter and the input,
    /// given `dy = dL/dy`.
    pub fn backward(&self, cache: &MlpCache<F>, dy: &[F]) -> Result<(Mlp<F>, Vec<F>), NeuralError> {
        let mut grads = self.zeros_like();
        let dx = self.backward_into(cache, dy, &mut grads)?;
        Ok((grads, dx))
    }

    /// Like [`Mlp::backward`] but adds into an existing gradient bundle.
    pub fn backward_into(&self, cache: &MlpCache<F>, dy: &[F], grads: &mut Mlp<F>) -> Result<Vec<F>, NeuralError> {
        self.check_cache(cache, dy)?;
        check_congruent(self, grads)?;
        Ok(self.backprop(cache, dy, Some(grads)))
    }

    /// Input gradient only.
    pub fn backward_input(&self, cache: &MlpCache<F>, dy: &[F]) -> Result<Vec<F>, NeuralError> {
        self.check_cache(cache, dy)?;
        Ok(self.backprop(cache, dy, None))
    }
}

impl<F: Scalar> ParamSet<F> for Mlp<F> {
    fn tensors(&self) -> Vec<&Tensor<F>> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }

    fn mark_updated(&mut self) {
        self.version = fresh_version();
    }
}
