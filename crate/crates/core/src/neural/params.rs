use std::sync::atomic::{AtomicU64, Ordering};

use super::{NeuralError, Tensor};
use crate::num::Scalar;

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

/// Process-unique tag identifying one set of parameter values; forward caches
/// record it so backward can reject a cache from stale parameters.
pub(crate) fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// A bundle of trainable tensors. Gradients use the same type as the
/// parameters they differentiate.
pub trait ParamSet<F: Scalar>: Clone {
    fn tensors(&self) -> Vec<&Tensor<F>>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>>;
    /// Marks the values as changed, invalidating outstanding forward caches.
    fn mark_updated(&mut self);

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(F::zero());
        }
        z.mark_updated();
        z
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// Flattened copy of every value, in `tensors()` order.
    fn flat(&self) -> Vec<F> {
        self.tensors().iter().flat_map(|t| t.data().iter().copied()).collect()
    }

    fn scale(&mut self, k: F) {
        for t in self.tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x *= k);
        }
    }
}

pub(crate) fn check_congruent<F: Scalar, P: ParamSet<F>>(a: &P, b: &P) -> Result<(), NeuralError> {
    let (ta, tb) = (a.tensors(), b.tensors());
    if ta.len() != tb.len() || ta.iter().zip(&tb).any(|(x, y)| !x.same_shape(y)) {
        return Err(NeuralError::Incongruent);
    }
    Ok(())
}

/// Blends `target` toward `online`: `target = tau * online + (1 - tau) * target`.
pub fn soft_update<F: Scalar, P: ParamSet<F>>(target: &mut P, online: &P, tau: F) -> Result<(), NeuralError> {
    if !(tau >= F::zero() && tau <= F::one()) {
        return Err(NeuralError::Tau(tau.as_f64()));
    }
    check_congruent(target, online)?;
    let keep = F::one() - tau;
    for (t, o) in target.tensors_mut().into_iter().zip(online.tensors()) {
        for (x, &y) in t.data_mut().iter_mut().zip(o.data()) {
            *x = if tau == F::one() { y } else { tau * y + keep * *x };
        }
    }
    target.mark_updated();
    Ok(())
}

/// `acc += g` over congruent bundles.
pub fn accumulate<F: Scalar, P: ParamSet<F>>(acc: &mut P, g: &P) -> Result<(), NeuralError> {
    check_congruent(acc, g)?;
    for (a, b) in acc.tensors_mut().into_iter().zip(g.tensors()) {
        for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
            *x += y;
        }
    }
    Ok(())
}
