//! Finite-difference checks for every differentiable op (float64).

use midistring_nn::layers::{Conv2d, FeedForward, Init, LayerNorm, Linear, MultiHeadAttention};
use midistring_nn::rng::{stream_rng, uniform};
use midistring_nn::{gradient_check, GradCheckConfig, ParamStore, Result, Tape, Tensor, Var};
use proptest::prelude::*;

const TOL: f64 = 1e-4;

fn random(seed: u64, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, uniform(&mut stream_rng(seed, 0), 1.0, n)).unwrap()
}

/// Σ cᵢ·yᵢ with fixed pseudo-random coefficients; turns any output into a scalar.
fn project(tape: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let n = tape.value(y).numel();
    let flat = tape.reshape(y, &[1, n])?;
    let c = tape.input(random(seed ^ 0xabc, &[n, 1]));
    let s = tape.linear(flat, c, None)?;
    tape.reshape(s, &[1])
}

fn check(
    store: &ParamStore<f64>,
    f: impl Fn(&mut Tape<f64>, &ParamStore<f64>) -> Result<Var>,
) -> f64 {
    let r = gradient_check(store, f, GradCheckConfig::default()).unwrap();
    assert!(r.max_rel_error < TOL, "{r:?}");
    r.max_rel_error
}

#[test]
fn linear_is_exact() {
    let mut store = ParamStore::new();
    let mut rng = stream_rng(1, 0);
    let lin = Linear::new(&mut store, "lin", 5, 3, Init::KaimingUniform, &mut rng);
    let x = store.add("x", random(2, &[4, 5]));
    let err = check(&store, |t, s| {
        let xv = t.param(s, x);
        let y = lin.forward(t, s, xv)?;
        project(t, y, 3)
    });
    assert!(err < 1e-6, "{err}");
}

#[test]
fn conv2d_gradients() {
    let mut store = ParamStore::new();
    let conv = Conv2d::new(&mut store, "conv", 2, 3, &mut stream_rng(4, 0));
    let x = store.add("x", random(5, &[2, 2, 5, 4]));
    check(&store, |t, s| {
        let xv = t.param(s, x);
        let y = conv.forward(t, s, xv)?;
        project(t, y, 6)
    });
}

#[test]
fn max_pool_gradients_on_tie_free_input() {
    let mut store = ParamStore::new();
    let x = store.add("x", random(7, &[2, 3, 4, 6]));
    check(&store, |t, s| {
        let xv = t.param(s, x);
        let y = t.max_pool2d(xv)?;
        project(t, y, 8)
    });
}

#[test]
fn layer_norm_gradients() {
    let mut store = ParamStore::new();
    let ln = LayerNorm::new(&mut store, "ln", 6);
    // non-trivial affine parameters
    *store.get_mut(ln.gamma) = random(9, &[6]);
    *store.get_mut(ln.beta) = random(10, &[6]);
    let x = store.add("x", random(11, &[3, 6]));
    check(&store, |t, s| {
        let xv = t.param(s, x);
        let y = ln.forward(t, s, xv)?;
        project(t, y, 12)
    });
}

#[test]
fn attention_gradients_causal_and_cross() {
    for causal in [false, true] {
        let mut store = ParamStore::new();
        let mha = MultiHeadAttention::new(&mut store, "mha", 8, 4, &mut stream_rng(13, 0));
        let q = store.add("q", random(14, &[2, 4, 8]));
        let ctx = store.add("ctx", random(15, &[2, 4, 8]));
        check(&store, |t, s| {
            let qv = t.param(s, q);
            let cv = if causal { qv } else { t.param(s, ctx) };
            let y = mha.forward(t, s, qv, cv, causal)?;
            project(t, y, 16)
        });
    }
}

#[test]
fn softmax_cross_entropy_gradients() {
    let mut store = ParamStore::new();
    let logits = store.add("logits", random(17, &[4, 13]));
    check(&store, |t, s| {
        let l = t.param(s, logits);
        t.softmax_cross_entropy(l, &[0, 12, 5, 5])
    });
}

#[test]
fn sigmoid_bce_gradients() {
    let mut store = ParamStore::new();
    let z = store.add("z", random(18, &[3, 7]));
    let targets: Vec<f64> = (0..21)
        .map(|i| if i % 3 == 0 { 1.0 } else { 0.0 })
        .collect();
    check(&store, |t, s| {
        let zv = t.param(s, z);
        let p = t.sigmoid(zv);
        t.binary_cross_entropy(p, &targets)
    });
}

#[test]
fn feed_forward_dropout_and_broadcast_add_gradients() {
    let mut store = ParamStore::new();
    let ff = FeedForward::new(&mut store, "ff", 4, 6, &mut stream_rng(19, 0));
    let x = store.add("x", random(20, &[2, 3, 4]));
    let pos = store.add("pos", random(21, &[3, 4]));
    check(&store, |t, s| {
        // fixed stream: every evaluation draws the same mask
        t.set_dropout_stream(99, 0);
        let xv = t.param(s, x);
        let pv = t.param(s, pos);
        let h = t.add(xv, pv)?;
        let h = t.dropout(h, 0.5);
        let y = ff.forward(t, s, h)?;
        project(t, y, 22)
    });
}

/// Smallest gap between the largest and second-largest value of any 2×2 window.
fn min_window_gap(x: &[f64], h: usize, w: usize) -> f64 {
    let mut gap = f64::INFINITY;
    for plane in x.chunks(h * w) {
        for y in (0..h).step_by(2) {
            for xx in (0..w).step_by(2) {
                let mut v = [
                    plane[y * w + xx],
                    plane[y * w + xx + 1],
                    plane[(y + 1) * w + xx],
                    plane[(y + 1) * w + xx + 1],
                ];
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
                gap = gap.min(v[0] - v[1]);
            }
        }
    }
    gap
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_pool_stack_on_random_shapes(
        n in 1usize..3, cin in 1usize..4, cout in 1usize..4, hh in 1usize..4, ww in 1usize..4, seed in 0u64..1000,
    ) {
        let (h, w) = (2 * hh, 2 * ww);
        let mut store = ParamStore::new();
        let conv = Conv2d::new(&mut store, "c", cin, cout, &mut stream_rng(seed, 1));
        let x = store.add("x", random(seed, &[n, cin, h, w]));
        // max pooling is only differentiable away from ties
        let mut probe = Tape::new();
        let xv = probe.param(&store, x);
        let y = conv.forward(&mut probe, &store, xv).unwrap();
        prop_assume!(min_window_gap(probe.value(y).data(), h, w) > 1e-3);
        let r = gradient_check(&store, |t, s| {
            let xv = t.param(s, x);
            let y = conv.forward(t, s, xv)?;
            let y = t.max_pool2d(y)?;
            project(t, y, seed + 1)
        }, GradCheckConfig::default()).unwrap();
        prop_assert!(r.max_rel_error < TOL, "{:?}", r);
    }

    #[test]
    fn attention_block_on_random_shapes(
        b in 1usize..3, tq in 1usize..5, heads in 1usize..3, head_dim in 3usize..6, causal: bool, seed in 0u64..1000,
    ) {
        let dim = heads * head_dim;
        let mut store = ParamStore::new();
        let mha = MultiHeadAttention::new(&mut store, "a", dim, heads, &mut stream_rng(seed, 2));
        let ln = LayerNorm::new(&mut store, "ln", dim);
        let x = store.add("x", random(seed, &[b, tq, dim]));
        let r = gradient_check(&store, |t, s| {
            let xv = t.param(s, x);
            let a = mha.forward(t, s, xv, xv, causal)?;
            let h = t.add(a, xv)?;
            let y = ln.forward(t, s, h)?;
            project(t, y, seed + 3)
        }, GradCheckConfig::default()).unwrap();
        prop_assert!(r.max_rel_error < TOL, "{:?}", r);
    }

    #[test]
    fn linear_losses_on_random_shapes(n in 1usize..5, din in 1usize..6, k in 2usize..8, seed in 0u64..1000) {
        let mut store = ParamStore::new();
        let lin = Linear::new(&mut store, "l", din, k, Init::KaimingUniform, &mut stream_rng(seed, 3));
        let x = store.add("x", random(seed, &[n, din]));
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % k).collect();
        let targets: Vec<f64> = (0..n * k).map(|i| ((i + seed as usize) % 3 == 0) as u8 as f64).collect();
        let r = gradient_check(&store, |t, s| {
            let xv = t.param(s, x);
            let z = lin.forward(t, s, xv)?;
            let ce = t.softmax_cross_entropy(z, &labels)?;
            let p = t.sigmoid(z);
            let bce = t.binary_cross_entropy(p, &targets)?;
            t.add(ce, bce)
        }, GradCheckConfig::default()).unwrap();
        prop_assert!(r.max_rel_error < TOL, "{:?}", r);
    }
}
