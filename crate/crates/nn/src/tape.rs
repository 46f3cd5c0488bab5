//! Reverse-mode autodiff over a linear tape of tensor operations.

use rand::Rng;

use crate::error::{shape_err, NnError, Result};
use crate::ops::{attention, conv, loss, norm, pool};
use crate::params::{ParamId, ParamStore};
use crate::rng::stream_rng;
use crate::scalar::{gemm, MatMut, MatRef, Scalar};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Param(ParamId),
    Reshape(Var),
    /// `a + tile(b)`; `b` repeats over the leading elements of `a`.
    Add(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Dropout(Var, Vec<T>),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        dims: conv::ConvDims,
    },
    MaxPool2 {
        x: Var,
        argmax: Vec<u32>,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        cache: norm::LayerNormCache<T>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        dims: attention::AttnDims,
        probs: Vec<T>,
    },
    SoftmaxCe {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<T>,
    },
    Bce {
        probs: Var,
        targets: Vec<T>,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

#[derive(Clone, Copy, Debug)]
struct DropoutStream {
    seed: u64,
    next: u64,
}

/// Records operations as they execute so gradients can be propagated back.
///
/// A tape is single-use: build the forward pass, call [`Tape::backward`] once,
/// then read gradients or push them into a [`ParamStore`].
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    dropout: Option<DropoutStream>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    /// Evaluation-mode tape: dropout is the identity.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            dropout: None,
        }
    }

    /// Training-mode tape. Dropout masks come from the counter-based stream
    /// `(seed, stream_base + k)` for the k-th dropout call on this tape.
    pub fn training(seed: u64, stream_base: u64) -> Self {
        Self {
            nodes: Vec::new(),
            dropout: Some(DropoutStream {
                seed,
                next: stream_base,
            }),
        }
    }

    /// Switches an existing tape into training mode (see [`Tape::training`]).
    pub fn set_dropout_stream(&mut self, seed: u64, stream_base: u64) {
        self.dropout = Some(DropoutStream {
            seed,
            next: stream_base,
        });
    }

    pub fn is_training(&self) -> bool {
        self.dropout.is_some()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad
    }

    fn out(&self, data: Vec<T>, shape: &[usize], inputs: &[Var]) -> Tensor<T> {
        let mut t = Tensor::new(shape, data).expect("op produced consistent shape");
        t.requires_grad = inputs.iter().any(|&v| self.needs(v));
        t
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last `backward` target with respect to a leaf or parameter node.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad.as_deref()
    }

    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        let mut t = store.get(id).clone();
        t.grad = None;
        t.requires_grad = true;
        self.push(t, Op::Param(id))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.value(x).numel() {
            return shape_err("reshape", format!("{:?} -> {shape:?}", self.shape(x)));
        }
        let out = self.out(self.value(x).data().to_vec(), shape, &[x]);
        Ok(self.push(out, Op::Reshape(x)))
    }

    /// Elementwise sum; `b` may be smaller than `a` if its size divides `a`'s
    /// (it is tiled, e.g. a positional table added to every batch item).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, nb) = (self.value(a).numel(), self.value(b).numel());
        if nb == 0 || na % nb != 0 {
            return shape_err("add", format!("{:?} + {:?}", self.shape(a), self.shape(b)));
        }
        let bv = self.value(b).data();
        let data: Vec<T> = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bv[i % nb])
            .collect();
        let shape = self.shape(a).to_vec();
        let out = self.out(data, &shape, &[a, b]);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| v.max(T::zero()))
            .collect();
        let shape = self.shape(x).to_vec();
        let out = self.out(data, &shape, &[x]);
        self.push(out, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| T::one() / (T::one() + (-v).exp()))
            .collect();
        let shape = self.shape(x).to_vec();
        let out = self.out(data, &shape, &[x]);
        self.push(out, Op::Sigmoid(x))
    }

    /// Inverted dropout: survivors are scaled by `1/(1-rate)`; identity in eval mode.
    pub fn dropout(&mut self, x: Var, rate: f64) -> Var {
        let Some(stream) = self.dropout.as_mut() else {
            return x;
        };
        if rate <= 0.0 {
            return x;
        }
        let mut rng = stream_rng(stream.seed, stream.next);
        stream.next += 1;
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value(x).numel())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = self
            .value(x)
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let shape = self.shape(x).to_vec();
        let out = self.out(data, &shape, &[x]);
        self.push(out, Op::Dropout(x, mask))
    }

    /// Affine map over the last dimension: `x[.., din] · w[din, dout] + b[dout]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let wshape = self.shape(w).to_vec();
        if wshape.len() != 2 {
            return shape_err("linear", format!("weight must be 2-D, got {wshape:?}"));
        }
        let (din, dout) = (wshape[0], wshape[1]);
        let xshape = self.shape(x).to_vec();
        if xshape.last() != Some(&din) {
            return shape_err("linear", format!("input {xshape:?} vs weight {wshape:?}"));
        }
        if let Some(b) = b {
            if self.value(b).numel() != dout {
                return shape_err(
                    "linear",
                    format!("bias {:?} vs {dout} outputs", self.shape(b)),
                );
            }
        }
        let rows = self.value(x).numel() / din;
        let mut data = vec![T::zero(); rows * dout];
        if let Some(b) = b {
            let bv = self.value(b).data();
            data.chunks_mut(dout).for_each(|r| r.copy_from_slice(bv));
        }
        gemm(
            T::one(),
            MatRef::dense(self.value(x).data(), 0, rows, din),
            MatRef::dense(self.value(w).data(), 0, din, dout),
            T::one(),
            MatMut::dense(&mut data, 0, rows, dout),
        );
        let mut shape = xshape;
        *shape.last_mut().unwrap() = dout;
        let inputs: Vec<Var> = [Some(x), Some(w), b].into_iter().flatten().collect();
        let out = self.out(data, &shape, &inputs);
        Ok(self.push(out, Op::Linear { x, w, b }))
    }

    /// 3×3 convolution, stride 1, zero padding 1. `x: [N, Cin, H, W]`, `w: [Cout, Cin, 3, 3]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() != 4 || ws.len() != 4 || ws[2] != conv::K || ws[3] != conv::K || ws[1] != xs[1]
        {
            return shape_err("conv2d", format!("input {xs:?} vs kernels {ws:?}"));
        }
        if self.value(b).numel() != ws[0] {
            return shape_err(
                "conv2d",
                format!("bias {:?} vs {} filters", self.shape(b), ws[0]),
            );
        }
        let dims = conv::ConvDims {
            batch: xs[0],
            cin: xs[1],
            cout: ws[0],
            h: xs[2],
            w: xs[3],
        };
        let data = conv::forward(
            dims,
            self.value(x).data(),
            self.value(w).data(),
            self.value(b).data(),
        );
        let out = self.out(data, &[dims.batch, dims.cout, dims.h, dims.w], &[x, w, b]);
        Ok(self.push(out, Op::Conv2d { x, w, b, dims }))
    }

    /// 2×2 max pooling over the trailing two dimensions.
    pub fn max_pool2d(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        if xs.len() < 2 {
            return shape_err("max_pool2d", format!("{xs:?}"));
        }
        let (h, w) = (xs[xs.len() - 2], xs[xs.len() - 1]);
        if h % 2 != 0 || w % 2 != 0 {
            return Err(NnError::OddDimensions { h, w });
        }
        let planes = self.value(x).numel() / (h * w);
        let (data, argmax) = pool::forward(self.value(x).data(), planes, h, w);
        let mut shape = xs;
        let n = shape.len();
        shape[n - 2] = h / 2;
        shape[n - 1] = w / 2;
        let out = self.out(data, &shape, &[x]);
        Ok(self.push(out, Op::MaxPool2 { x, argmax }))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let dim = *self.shape(x).last().unwrap_or(&0);
        if self.value(gamma).numel() != dim || self.value(beta).numel() != dim {
            return shape_err(
                "layer_norm",
                format!(
                    "input {:?} vs affine {:?}",
                    self.shape(x),
                    self.shape(gamma)
                ),
            );
        }
        let (data, cache) = norm::forward(
            self.value(x).data(),
            dim,
            self.value(gamma).data(),
            self.value(beta).data(),
        );
        let shape = self.shape(x).to_vec();
        let out = self.out(data, &shape, &[x, gamma, beta]);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                cache,
            },
        ))
    }

    /// Scaled dot-product attention split over `heads`. `q: [B, Tq, D]`,
    /// `k, v: [B, Tk, D]`. With `causal`, query `i` sees keys `0..=i` only.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, causal: bool) -> Result<Var> {
        let (qs, ks, vs) = (
            self.shape(q).to_vec(),
            self.shape(k).to_vec(),
            self.shape(v).to_vec(),
        );
        if qs.len() != 3 || ks.len() != 3 || ks != vs || qs[0] != ks[0] || qs[2] != ks[2] {
            return shape_err("attention", format!("q {qs:?}, k {ks:?}, v {vs:?}"));
        }
        if heads == 0 || qs[2] % heads != 0 {
            return shape_err(
                "attention",
                format!("dim {} not divisible by {heads} heads", qs[2]),
            );
        }
        if causal && qs[1] > ks[1] {
            return shape_err("attention", "causal mask needs Tq <= Tk".to_string());
        }
        let dims = attention::AttnDims {
            batch: qs[0],
            tq: qs[1],
            tk: ks[1],
            dim: qs[2],
            heads,
            causal,
        };
        let (data, probs) = attention::forward(
            dims,
            self.value(q).data(),
            self.value(k).data(),
            self.value(v).data(),
        );
        let out = self.out(data, &qs, &[q, k, v]);
        Ok(self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                dims,
                probs,
            },
        ))
    }

    /// Attention probabilities `[B, H, Tq, Tk]` recorded by an attention node.
    pub fn attention_probs(&self, v: Var) -> Option<&[T]> {
        match &self.nodes[v.0].op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Mean softmax cross-entropy of `logits: [N, K]` against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let ls = self.shape(logits).to_vec();
        if ls.len() != 2 || ls[0] != labels.len() {
            return shape_err(
                "softmax_cross_entropy",
                format!("logits {ls:?} vs {} labels", labels.len()),
            );
        }
        let (l, probs) = loss::softmax_ce_forward(self.value(logits).data(), ls[1], labels)?;
        let out = self.out(vec![l], &[1], &[logits]);
        Ok(self.push(
            out,
            Op::SoftmaxCe {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Mean binary cross-entropy of probabilities against 0/1 targets.
    pub fn binary_cross_entropy(&mut self, probs: Var, targets: &[T]) -> Result<Var> {
        if self.value(probs).numel() != targets.len() {
            return shape_err(
                "binary_cross_entropy",
                format!("probs {:?} vs {} targets", self.shape(probs), targets.len()),
            );
        }
        let l = loss::bce_forward(self.value(probs).data(), targets);
        let out = self.out(vec![l], &[1], &[probs]);
        Ok(self.push(
            out,
            Op::Bce {
                probs,
                targets: targets.to_vec(),
            },
        ))
    }

    /// Propagates d(target)/d(node) back through the tape. Gradients are kept
    /// on leaf and parameter nodes.
    pub fn backward(&mut self, target: Var) -> Result<()> {
        if self.value(target).numel() != 1 {
            return shape_err(
                "backward",
                format!("target must be scalar, got {:?}", self.shape(target)),
            );
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[target.0] = Some(vec![T::one()]);
        for i in (0..=target.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].value.requires_grad {
                continue;
            }
            self.backprop_node(i, &g, &mut grads);
            if matches!(self.nodes[i].op, Op::Leaf | Op::Param(_)) {
                self.nodes[i].value.grad = Some(g);
            }
        }
        Ok(())
    }

    fn backprop_node(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Reshape(x) => self.acc(grads, *x, |buf| add_into(buf, g)),
            Op::Add(a, b) => {
                self.acc(grads, *a, |buf| add_into(buf, g));
                self.acc(grads, *b, |buf| {
                    let nb = buf.len();
                    for (j, &x) in g.iter().enumerate() {
                        buf[j % nb] += x;
                    }
                });
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                self.acc(grads, *x, |buf| {
                    for ((d, &gg), &v) in buf.iter_mut().zip(g).zip(xv) {
                        if v > T::zero() {
                            *d += gg;
                        }
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                self.acc(grads, *x, |buf| {
                    for ((d, &gg), &s) in buf.iter_mut().zip(g).zip(y) {
                        *d += gg * s * (T::one() - s);
                    }
                });
            }
            Op::Dropout(x, mask) => self.acc(grads, *x, |buf| {
                for ((d, &gg), &m) in buf.iter_mut().zip(g).zip(mask) {
                    *d += gg * m;
                }
            }),
            Op::Linear { x, w, b } => {
                let wt = self.value(*w);
                let (din, dout) = (wt.shape()[0], wt.shape()[1]);
                let rows = g.len() / dout;
                let xv = self.value(*x).data();
                self.acc(grads, *x, |buf| {
                    gemm(
                        T::one(),
                        MatRef::dense(g, 0, rows, dout),
                        MatRef::dense(wt.data(), 0, din, dout).t(),
                        T::one(),
                        MatMut::dense(buf, 0, rows, din),
                    )
                });
                self.acc(grads, *w, |buf| {
                    gemm(
                        T::one(),
                        MatRef::dense(xv, 0, rows, din).t(),
                        MatRef::dense(g, 0, rows, dout),
                        T::one(),
                        MatMut::dense(buf, 0, din, dout),
                    )
                });
                if let Some(b) = b {
                    self.acc(grads, *b, |buf| {
                        for row in g.chunks(dout) {
                            add_into(buf, row);
                        }
                    });
                }
            }
            Op::Conv2d { x, w, b, dims } => {
                let (xv, wv) = (self.value(*x).data(), self.value(*w).data());
                let mut dx = self.needs(*x).then(|| vec![T::zero(); xv.len()]);
                let mut dw = self.needs(*w).then(|| vec![T::zero(); wv.len()]);
                let mut db = self.needs(*b).then(|| vec![T::zero(); dims.cout]);
                conv::backward(
                    *dims,
                    xv,
                    wv,
                    g,
                    dx.as_deref_mut(),
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                );
                for (v, d) in [(*x, dx), (*w, dw), (*b, db)] {
                    if let Some(d) = d {
                        self.acc(grads, v, |buf| add_into(buf, &d));
                    }
                }
            }
            Op::MaxPool2 { x, argmax } => self.acc(grads, *x, |buf| pool::backward(g, argmax, buf)),
            Op::LayerNorm {
                x,
                gamma,
                beta,
                cache,
            } => {
                let dim = self.value(*gamma).numel();
                let gv = self.value(*gamma).data();
                let mut dx = self.needs(*x).then(|| vec![T::zero(); g.len()]);
                let mut dg = self.needs(*gamma).then(|| vec![T::zero(); dim]);
                let mut dbt = self.needs(*beta).then(|| vec![T::zero(); dim]);
                norm::backward(
                    g,
                    dim,
                    gv,
                    cache,
                    dx.as_deref_mut(),
                    dg.as_deref_mut(),
                    dbt.as_deref_mut(),
                );
                for (v, d) in [(*x, dx), (*gamma, dg), (*beta, dbt)] {
                    if let Some(d) = d {
                        self.acc(grads, v, |buf| add_into(buf, &d));
                    }
                }
            }
            Op::Attention {
                q,
                k,
                v,
                dims,
                probs,
            } => {
                let (qv, kv, vv) = (
                    self.value(*q).data(),
                    self.value(*k).data(),
                    self.value(*v).data(),
                );
                let mut dq = self.needs(*q).then(|| vec![T::zero(); qv.len()]);
                let mut dk = self.needs(*k).then(|| vec![T::zero(); kv.len()]);
                let mut dv = self.needs(*v).then(|| vec![T::zero(); vv.len()]);
                attention::backward(
                    *dims,
                    qv,
                    kv,
                    vv,
                    probs,
                    g,
                    dq.as_deref_mut(),
                    dk.as_deref_mut(),
                    dv.as_deref_mut(),
                );
                // q, k, v may alias the same node (self-attention on one projection)
                for (var, d) in [(*q, dq), (*k, dk), (*v, dv)] {
                    if let Some(d) = d {
                        self.acc(grads, var, |buf| add_into(buf, &d));
                    }
                }
            }
            Op::SoftmaxCe {
                logits,
                labels,
                probs,
            } => {
                let classes = self.shape(*logits)[1];
                let d = loss::softmax_ce_backward(probs, classes, labels, g[0]);
                self.acc(grads, *logits, |buf| add_into(buf, &d));
            }
            Op::Bce { probs, targets } => {
                let d = loss::bce_backward(self.value(*probs).data(), targets, g[0]);
                self.acc(grads, *probs, |buf| add_into(buf, &d));
            }
        }
    }

    fn acc(&self, grads: &mut [Option<Vec<T>>], v: Var, f: impl FnOnce(&mut [T])) {
        if !self.needs(v) {
            return;
        }
        let n = self.value(v).numel();
        let buf = grads[v.0].get_or_insert_with(|| vec![T::zero(); n]);
        f(buf);
    }

    /// Adds every parameter node's gradient into the matching store entry.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore<T>) {
        for node in &self.nodes {
            if let (Op::Param(id), Some(g)) = (&node.op, node.value.grad.as_deref()) {
                store.get_mut(*id).accumulate_grad(g);
            }
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
