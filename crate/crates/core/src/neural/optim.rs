use serde::{Deserialize, Serialize};

use super::params::check_congruent;
use super::{NeuralError, ParamSet};
use crate::num::Scalar;

/// Adaptive-moment optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale the whole gradient to this global L2 norm when it is larger.
    pub clip_norm: Option<f64>,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
        }
    }
}

/// Adam with bias-corrected moments, one moment pair per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Adam<F> {
    pub cfg: AdamConfig,
    t: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new<P: ParamSet<F>>(params: &P, cfg: AdamConfig) -> Self {
        let zeros: Vec<Vec<F>> = params.tensors().iter().map(|t| vec![F::zero(); t.len()]).collect();
        Self {
            cfg,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<F>] {
        &self.m
    }

    /// One update. Non-finite gradients are rejected before anything changes.
    pub fn step<P: ParamSet<F>>(&mut self, params: &mut P, grads: &P) -> Result<(), NeuralError> {
        check_congruent(params, grads)?;
        if self.m.len() != grads.tensors().len() {
            return Err(NeuralError::Incongruent);
        }
        if !grads.all_finite() {
            return Err(NeuralError::NonFinite("gradient"));
        }
        let mut scale = F::one();
        if let Some(max) = self.cfg.clip_norm {
            let norm = grads
                .tensors()
                .iter()
                .flat_map(|t| t.data().iter())
                .map(|&g| g * g)
                .sum::<F>()
                .sqrt();
            let max = F::lit(max);
            if norm > max {
                scale = max / norm;
            }
        }
        self.t += 1;
        let (b1, b2) = (F::lit(self.cfg.beta1), F::lit(self.cfg.beta2));
        let t = self.t as i32;
        let bc1 = F::one() - b1.powi(t);
        let bc2 = F::one() - b2.powi(t);
        let lr = F::lit(self.cfg.lr);
        let eps = F::lit(self.cfg.eps);
        for (k, (p, g)) in params.tensors_mut().into_iter().zip(grads.tensors()).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for ((w, &gi), (mi, vi)) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut().zip(v.iter_mut())) {
                let gi = gi * scale;
                *mi = b1 * *mi + (F::one() - b1) * gi;
                *vi = b2 * *vi + (F::one() - b2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        params.mark_updated();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, Dense, Mlp, Tensor};

    fn scalar(w: f64) -> Mlp<f64> {
        Mlp::from_layers(vec![Dense {
            w: Tensor::from_vec(vec![1, 1], vec![w]).unwrap(),
            b: Tensor::zeros(&[1]),
            act: Activation::Identity,
        }])
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar(1.0);
        let mut opt = Adam::new(&p, AdamConfig::default());
        let z = p.zeros_like();
        opt.step(&mut p, &z).unwrap();
        assert_eq!(p.flat(), vec![1.0, 0.0]);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn moments_decay_under_zero_gradient() {
        let mut p = scalar(1.0);
        let mut opt = Adam::new(&p, AdamConfig::default());
        let mut g = p.zeros_like();
        g.layers_mut()[0].w.data_mut()[0] = 2.0;
        opt.step(&mut p, &g).unwrap();
        let m1 = opt.first_moments()[0][0];
        let z = p.zeros_like();
        opt.step(&mut p, &z).unwrap();
        assert!((opt.first_moments()[0][0] - 0.9 * m1).abs() < 1e-15);
    }

    #[test]
    fn descends_on_square() {
        // f(w) = w^2, f'(w) = 2w
        let mut p = scalar(1.0);
        let mut opt = Adam::new(&p, AdamConfig::with_lr(0.1));
        let mut g = p.zeros_like();
        g.layers_mut()[0].w.data_mut()[0] = 2.0;
        opt.step(&mut p, &g).unwrap();
        assert!(p.flat()[0].abs() < 1.0);
    }

    #[test]
    fn identical_state_identical_result() {
        let p0 = scalar(0.7);
        let mut g = p0.zeros_like();
        g.layers_mut()[0].w.data_mut()[0] = -0.3;
        let run = || {
            let mut p = p0.clone();
            let mut opt = Adam::new(&p, AdamConfig::default());
            opt.step(&mut p, &g).unwrap();
            opt.step(&mut p, &g).unwrap();
            (p.flat(), opt)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_is_rejected_untouched() {
        let mut p = scalar(1.0);
        let mut opt = Adam::new(&p, AdamConfig::default());
        let mut g = p.zeros_like();
        g.layers_mut()[0].w.data_mut()[0] = f64::NAN;
        assert!(matches!(opt.step(&mut p, &g), Err(NeuralError::NonFinite(_))));
        assert_eq!(p.flat()[0], 1.0);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn clipping_bounds_the_first_step() {
        let mut p = scalar(0.0);
        let mut opt = Adam::new(
            &p,
            AdamConfig {
                clip_norm: Some(1.0),
                ..AdamConfig::with_lr(0.1)
            },
        );
        let mut g = p.zeros_like();
        g.layers_mut()[0].w.data_mut()[0] = 100.0;
        opt.step(&mut p, &g).unwrap();
        assert!((p.flat()[0] + 0.1).abs() < 1e-6);
    }
}
