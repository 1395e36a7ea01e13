use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{check_congruent, fresh_version};
use super::{uniform, NeuralError, ParamSet, Tensor};
use crate::num::{axpy, dot, Scalar};

/// Single-layer LSTM. Gate rows are stacked in the order input, forget,
/// candidate, output: `w_x` is `[4H, I]`, `w_h` is `[4H, H]`, `b` is `[4H]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Lstm<F> {
    input_size: usize,
    hidden_size: usize,
    pub w_x: Tensor<F>,
    pub w_h: Tensor<F>,
    pub b: Tensor<F>,
    #[serde(skip, default = "fresh_version")]
    version: u64,
}

impl<F: PartialEq> PartialEq for Lstm<F> {
    fn eq(&self, other: &Self) -> bool {
        self.input_size == other.input_size
            && self.hidden_size == other.hidden_size
            && self.w_x == other.w_x
            && self.w_h == other.w_h
            && self.b == other.b
    }
}

/// Hidden and cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<F> {
    pub h: Vec<F>,
    pub c: Vec<F>,
}

impl<F: Scalar> LstmState<F> {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: vec![F::zero(); hidden],
            c: vec![F::zero(); hidden],
        }
    }
}

#[derive(Debug, Clone)]
struct StepCache<F> {
    x: Vec<F>,
    h_prev: Vec<F>,
    c_prev: Vec<F>,
    /// Activated gates `[i, f, g, o]`.
    gates: Vec<F>,
    tanh_c: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct LstmCache<F> {
    version: u64,
    steps: Vec<StepCache<F>>,
}

impl<F> LstmCache<F> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Gradients flowing out of the LSTM toward its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmInputGrads<F> {
    /// Row-major `[M, I]`.
    pub dx: Vec<F>,
    pub dh0: Vec<F>,
    pub dc0: Vec<F>,
}

#[inline]
fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

impl<F: Scalar> Lstm<F> {
    /// Weights and biases drawn from `U(-1/sqrt(H), 1/sqrt(H))`.
    pub fn new<R: Rng>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let g = 4 * hidden_size;
        Self {
            input_size,
            hidden_size,
            w_x: uniform(&[g, input_size], bound, rng),
            w_h: uniform(&[g, hidden_size], bound, rng),
            b: uniform(&[g], bound, rng),
            version: fresh_version(),
        }
    }

    pub fn from_parts(w_x: Tensor<F>, w_h: Tensor<F>, b: Tensor<F>) -> Result<Self, NeuralError> {
        let g = b.len();
        let hidden_size = g / 4;
        let input_size = w_x.cols();
        let shape = |what, expected: usize, got: usize| NeuralError::Shape { what, expected, got };
        if g % 4 != 0 || g == 0 {
            return Err(shape("lstm bias", 4 * (g / 4).max(1), g));
        }
        if w_x.shape() != [g, input_size] {
            return Err(shape("lstm w_x rows", g, w_x.shape()[0]));
        }
        if w_h.shape() != [g, hidden_size] {
            return Err(shape("lstm w_h", g * hidden_size, w_h.len()));
        }
        Ok(Self {
            input_size,
            hidden_size,
            w_x,
            w_h,
            b,
            version: fresh_version(),
        })
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    fn check_seq(&self, x_seq: &[F], state0: &LstmState<F>) -> Result<usize, NeuralError> {
        if self.input_size == 0 || x_seq.len() % self.input_size != 0 {
            return Err(NeuralError::Shape {
                what: "lstm sequence",
                expected: self.input_size,
                got: x_seq.len(),
            });
        }
        if state0.h.len() != self.hidden_size || state0.c.len() != self.hidden_size {
            return Err(NeuralError::Shape {
                what: "lstm state",
                expected: self.hidden_size,
                got: state0.h.len(),
            });
        }
        Ok(x_seq.len() / self.input_size)
    }

    /// One recurrence step; returns the activated gates and the new state.
    #[inline]
    fn cell(&self, x: &[F], h: &[F], c: &[F]) -> (Vec<F>, Vec<F>, Vec<F>, Vec<F>) {
        let hs = self.hidden_size;
        let mut gates = vec![F::zero(); 4 * hs];
        for (r, g) in gates.iter_mut().enumerate() {
            let z = self.b.data()[r] + dot(self.w_x.row(r), x) + dot(self.w_h.row(r), h);
            *g = if (2 * hs..3 * hs).contains(&r) { z.tanh() } else { sigmoid(z) };
        }
        let mut c_new = vec![F::zero(); hs];
        let mut h_new = vec![F::zero(); hs];
        let mut tanh_c = vec![F::zero(); hs];
        for k in 0..hs {
            let (i, f, g, o) = (gates[k], gates[hs + k], gates[2 * hs + k], gates[3 * hs + k]);
            c_new[k] = f * c[k] + i * g;
            tanh_c[k] = c_new[k].tanh();
            h_new[k] = o * tanh_c[k];
        }
        (gates, h_new, c_new, tanh_c)
    }

    /// Runs the sequence (`M` rows of `I` inputs, row-major) from `state0`.
    ///
    /// Returns every hidden state (`[M, H]` row-major), the final state and a
    /// cache for [`Lstm::backward`]. An empty sequence returns `state0`.
    pub fn forward(
        &self,
        x_seq: &[F],
        state0: &LstmState<F>,
    ) -> Result<(Vec<F>, LstmState<F>, LstmCache<F>), NeuralError> {
        let m = self.check_seq(x_seq, state0)?;
        let mut h = state0.h.clone();
        let mut c = state0.c.clone();
        let mut h_seq = Vec::with_capacity(m * self.hidden_size);
        let mut steps = Vec::with_capacity(m);
        for x in x_seq.chunks_exact(self.input_size) {
            let (gates, h_new, c_new, tanh_c) = self.cell(x, &h, &c);
            h_seq.extend_from_slice(&h_new);
            steps.push(StepCache {
                x: x.to_vec(),
                h_prev: std::mem::replace(&mut h, h_new),
                c_prev: std::mem::replace(&mut c, c_new),
                gates,
                tanh_c,
            });
        }
        Ok((
            h_seq,
            LstmState { h, c },
            LstmCache {
                version: self.version,
                steps,
            },
        ))
    }

    /// Final hidden state from a zero initial state, without a cache.
    pub fn encode(&self, x_seq: &[F]) -> Result<Vec<F>, NeuralError> {
        let zero = LstmState::zeros(self.hidden_size);
        self.check_seq(x_seq, &zero)?;
        let (mut h, mut c) = (zero.h, zero.c);
        for x in x_seq.chunks_exact(self.input_size) {
            let (_, h_new, c_new, _) = self.cell(x, &h, &c);
            h = h_new;
            c = c_new;
        }
        Ok(h)
    }

    /// Backpropagation through time.
    ///
    /// `dh_seq` (optional, `[M, H]`) is the loss gradient on every hidden
    /// output; `dh_final` and `dc_final` act on the final state.
    pub fn backward(
        &self,
        cache: &LstmCache<F>,
        dh_seq: Option<&[F]>,
        dh_final: &[F],
        dc_final: Option<&[F]>,
    ) -> Result<(Lstm<F>, LstmInputGrads<F>), NeuralError> {
        let mut grads = self.zeros_like();
        let dx = self.backward_into(cache, dh_seq, dh_final, dc_final, &mut grads)?;
        Ok((grads, dx))
    }

    pub fn backward_into(
        &self,
        cache: &LstmCache<F>,
        dh_seq: Option<&[F]>,
        dh_final: &[F],
        dc_final: Option<&[F]>,
        grads: &mut Lstm<F>,
    ) -> Result<LstmInputGrads<F>, NeuralError> {
        let hs = self.hidden_size;
        if cache.version != self.version {
            return Err(NeuralError::StaleCache);
        }
        check_congruent(self, grads)?;
        let m = cache.steps.len();
        let shape = |what, expected: usize, got: usize| NeuralError::Shape { what, expected, got };
        if dh_final.len() != hs {
            return Err(shape("lstm dh_final", hs, dh_final.len()));
        }
        if let Some(d) = dh_seq {
            if d.len() != m * hs {
                return Err(shape("lstm dh_seq", m * hs, d.len()));
            }
        }
        if let Some(d) = dc_final {
            if d.len() != hs {
                return Err(shape("lstm dc_final", hs, d.len()));
            }
        }
        let mut dh_next = dh_final.to_vec();
        let mut dc_next = dc_final.map_or_else(|| vec![F::zero(); hs], <[F]>::to_vec);
        let mut dx = vec![F::zero(); m * self.input_size];
        let mut dz = vec![F::zero(); 4 * hs];
        for (t, st) in cache.steps.iter().enumerate().rev() {
            let mut dh_prev = vec![F::zero(); hs];
            for k in 0..hs {
                let dh = dh_next[k] + dh_seq.map_or(F::zero(), |d| d[t * hs + k]);
                let (i, f, g, o) = (st.gates[k], st.gates[hs + k], st.gates[2 * hs + k], st.gates[3 * hs + k]);
                let tc = st.tanh_c[k];
                let dc = dc_next[k] + dh * o * (F::one() - tc * tc);
                dz[k] = dc * g * i * (F::one() - i);
                dz[hs + k] = dc * st.c_prev[k] * f * (F::one() - f);
                dz[2 * hs + k] = dc * i * (F::one() - g * g);
                dz[3 * hs + k] = dh * tc * o * (F::one() - o);
                dc_next[k] = dc * f;
            }
            let dx_t = &mut dx[t * self.input_size..(t + 1) * self.input_size];
            for (r, &d) in dz.iter().enumerate() {
                if d == F::zero() {
                    continue;
                }
                axpy(d, &st.x, grads.w_x.row_mut(r));
                axpy(d, &st.h_prev, grads.w_h.row_mut(r));
                grads.b.data_mut()[r] += d;
                axpy(d, self.w_x.row(r), dx_t);
                axpy(d, self.w_h.row(r), &mut dh_prev);
            }
            dh_next = dh_prev;
        }
        Ok(LstmInputGrads {
            dx,
            dh0: dh_next,
            dc0: dc_next,
        })
    }
}

impl<F: Scalar> ParamSet<F> for Lstm<F> {
    fn tensors(&self) -> Vec<&Tensor<F>> {
        vec![&self.w_x, &self.w_h, &self.b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.b]
    }

    fn mark_updated(&mut self) {
        self.version = fresh_version();
    }
}
