//! Parameterized building blocks. Each layer only stores [`ParamId`]s; the
//! values live in a [`ParamStore`] so models can be cast, saved and optimized
//! as one flat collection.

use rand::Rng;

use crate::error::Result;
use crate::params::{ParamId, ParamStore};
use crate::rng::{kaiming_uniform, xavier_uniform};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    KaimingUniform,
    XavierUniform,
    Zeros,
}

#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub din: usize,
    pub dout: usize,
}

impl Linear {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        din: usize,
        dout: usize,
        init: Init,
        rng: &mut impl Rng,
    ) -> Self {
        let w = match init {
            Init::KaimingUniform => kaiming_uniform(rng, din, din * dout),
            Init::XavierUniform => xavier_uniform(rng, din, dout, din * dout),
            Init::Zeros => vec![T::zero(); din * dout],
        };
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::new(&[din, dout], w).unwrap(),
        );
        let bias = Some(store.add(format!("{name}.bias"), Tensor::zeros(&[dout])));
        Self {
            weight,
            bias,
            din,
            dout,
        }
    }

    /// Same as [`Linear::new`] without a bias vector.
    pub fn without_bias<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        din: usize,
        dout: usize,
        init: Init,
        rng: &mut impl Rng,
    ) -> Self {
        let w = match init {
            Init::KaimingUniform => kaiming_uniform(rng, din, din * dout),
            Init::XavierUniform => xavier_uniform(rng, din, dout, din * dout),
            Init::Zeros => vec![T::zero(); din * dout],
        };
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::new(&[din, dout], w).unwrap(),
        );
        Self {
            weight,
            bias: None,
            din,
            dout,
        }
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        x: Var,
    ) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = self.bias.map(|b| tape.param(store, b));
        tape.linear(x, w, b)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Conv2d {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        cin: usize,
        cout: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = cin * 9;
        let w = kaiming_uniform(rng, fan_in, cout * fan_in);
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::new(&[cout, cin, 3, 3], w).unwrap(),
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[cout]));
        Self { weight, bias }
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        x: Var,
    ) -> Result<Var> {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        tape.conv2d(x, w, b)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, dim: usize) -> Self {
        let gamma = store.add(format!("{name}.gamma"), Tensor::full(&[dim], T::one()));
        let beta = store.add(format!("{name}.beta"), Tensor::zeros(&[dim]));
        Self { gamma, beta }
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        x: Var,
    ) -> Result<Var> {
        let g = tape.param(store, self.gamma);
        let b = tape.param(store, self.beta);
        tape.layer_norm(x, g, b)
    }
}

/// Multi-head attention with learned Q/K/V/output projections (Xavier init).
/// The key projection has no bias: a key bias shifts every score in a softmax
/// row by the same amount, so its gradient is identically zero.
#[derive(Clone, Copy, Debug)]
pub struct MultiHeadAttention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub out: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        dim: usize,
        heads: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let q = Linear::new(
            store,
            &format!("{name}.q"),
            dim,
            dim,
            Init::XavierUniform,
            rng,
        );
        let k = Linear::without_bias(
            store,
            &format!("{name}.k"),
            dim,
            dim,
            Init::XavierUniform,
            rng,
        );
        let v = Linear::new(
            store,
            &format!("{name}.v"),
            dim,
            dim,
            Init::XavierUniform,
            rng,
        );
        let out = Linear::new(
            store,
            &format!("{name}.out"),
            dim,
            dim,
            Init::XavierUniform,
            rng,
        );
        Self {
            q,
            k,
            v,
            out,
            heads,
        }
    }

    /// `query: [B, Tq, D]`, `context: [B, Tk, D]`; pass the same var twice for self-attention.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        query: Var,
        context: Var,
        causal: bool,
    ) -> Result<Var> {
        let q = self.q.forward(tape, store, query)?;
        let k = self.k.forward(tape, store, context)?;
        let v = self.v.forward(tape, store, context)?;
        let a = tape.attention(q, k, v, self.heads, causal)?;
        self.out.forward(tape, store, a)
    }
}

/// Position-wise `Linear → ReLU → Linear`.
#[derive(Clone, Copy, Debug)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let up = Linear::new(
            store,
            &format!("{name}.up"),
            dim,
            hidden,
            Init::KaimingUniform,
            rng,
        );
        let down = Linear::new(
            store,
            &format!("{name}.down"),
            hidden,
            dim,
            Init::KaimingUniform,
            rng,
        );
        Self { up, down }
    }

    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        store: &ParamStore<T>,
        x: Var,
    ) -> Result<Var> {
        let h = self.up.forward(tape, store, x)?;
        let h = tape.relu(h);
        self.down.forward(tape, store, h)
    }
}

/// Sinusoidal position table `[len, dim]`.
pub fn sinusoidal_positions<T: Scalar>(len: usize, dim: usize) -> Tensor<T> {
    let mut data = vec![T::zero(); len * dim];
    for pos in 0..len {
        for i in (0..dim).step_by(2) {
            let angle = pos as f64 / 10000f64.powf(i as f64 / dim as f64);
            data[pos * dim + i] = T::from_f64(angle.sin());
            if i + 1 < dim {
                data[pos * dim + i + 1] = T::from_f64(angle.cos());
            }
        }
    }
    Tensor::new(&[len, dim], data).unwrap()
}
