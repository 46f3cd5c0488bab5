use midistring_nn::layers::{Init, Linear};
use midistring_nn::rng::stream_rng;
use midistring_nn::{
    AdamConfig, AdamState, Checkpoint, NnError, ParamStore, RngState, Tape, Tensor,
};

#[test]
fn identity_kernel_copies_input() {
    let mut t = Tape::<f64>::new();
    let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
    let xv = t.input(Tensor::new(&[1, 1, 3, 4], x.clone()).unwrap());
    let mut k = vec![0.0; 9];
    k[4] = 1.0;
    let w = t.input(Tensor::new(&[1, 1, 3, 3], k).unwrap());
    let b = t.input(Tensor::zeros(&[1]));
    let y = t.conv2d(xv, w, b).unwrap();
    assert_eq!(t.value(y).data(), &x[..]);
}

#[test]
fn linear_identity_and_constant_bias() {
    let mut t = Tape::<f64>::new();
    let x = t.input(Tensor::new(&[2, 3], vec![1.0, -2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
    let mut eye = vec![0.0; 9];
    (0..3).for_each(|i| eye[i * 4] = 1.0);
    let w = t.input(Tensor::new(&[3, 3], eye).unwrap());
    let zero = t.input(Tensor::zeros(&[3]));
    let y = t.linear(x, w, Some(zero)).unwrap();
    assert_eq!(t.value(y).data(), t.value(x).data());

    let wz = t.input(Tensor::zeros(&[3, 2]));
    let c = t.input(Tensor::new(&[2], vec![0.5, -1.5]).unwrap());
    let y = t.linear(x, wz, Some(c)).unwrap();
    assert_eq!(t.value(y).data(), &[0.5, -1.5, 0.5, -1.5]);
}

#[test]
fn shape_errors_are_reported() {
    let mut t = Tape::<f32>::new();
    let x = t.input(Tensor::zeros(&[2, 3]));
    let w = t.input(Tensor::zeros(&[4, 2]));
    assert!(matches!(
        t.linear(x, w, None),
        Err(NnError::ShapeMismatch { .. })
    ));
    let odd = t.input(Tensor::zeros(&[1, 1, 3, 4]));
    assert!(matches!(
        t.max_pool2d(odd),
        Err(NnError::OddDimensions { h: 3, w: 4 })
    ));
    let q = t.input(Tensor::zeros(&[1, 2, 6]));
    assert!(t.attention(q, q, q, 4, false).is_err());
}

#[test]
fn dropout_is_identity_in_eval_and_scaled_in_training() {
    let ones = Tensor::<f64>::full(&[20_000], 1.0);
    let mut eval = Tape::new();
    let x = eval.input(ones.clone());
    let y = eval.dropout(x, 0.5);
    assert_eq!(eval.value(y).data(), ones.data());

    let mut train = Tape::training(5, 0);
    let x = train.input(ones);
    let y = train.dropout(x, 0.5);
    let vals = train.value(y).data();
    assert!(vals.iter().all(|&v| v == 0.0 || v == 2.0));
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!((mean - 1.0).abs() < 0.03, "mean {mean}");
}

fn trained_store(seed: u64) -> (ParamStore<f32>, AdamState<f32>) {
    let mut store = ParamStore::new();
    let lin = Linear::new(
        &mut store,
        "lin",
        4,
        3,
        Init::KaimingUniform,
        &mut stream_rng(seed, 0),
    );
    let mut adam = AdamState::new(&store, AdamConfig::default());
    for step in 0..20 {
        let mut t = Tape::training(seed, step * 16);
        let x =
            t.input(Tensor::new(&[2, 4], vec![0.1, 0.2, -0.3, 0.4, 1.0, 0.0, -1.0, 0.5]).unwrap());
        let x = t.dropout(x, 0.5);
        let z = lin.forward(&mut t, &store, x).unwrap();
        let l = t.softmax_cross_entropy(z, &[0, 2]).unwrap();
        t.backward(l).unwrap();
        store.zero_grads();
        t.accumulate_param_grads(&mut store);
        adam.step(&mut store).unwrap();
    }
    (store, adam)
}

#[test]
fn training_is_bit_reproducible() {
    let (a, _) = trained_store(3);
    let (b, _) = trained_store(3);
    let (c, _) = trained_store(4);
    for ((pa, pb), pc) in a.iter().zip(b.iter()).zip(c.iter()) {
        let bits = |t: &Tensor<f32>| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&pa.tensor), bits(&pb.tensor));
        assert_ne!(bits(&pa.tensor), bits(&pc.tensor));
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let (mut store, adam) = trained_store(11);
    store.zero_grads();
    let ck = Checkpoint {
        kind: "toy".into(),
        metadata: "{\"k\":1}".into(),
        params: store,
        optimizer: Some(adam),
        rng: RngState {
            seed: 11,
            counter: 320,
        },
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.ckpt");
    ck.save(&path).unwrap();
    let back = Checkpoint::<f32>::load(&path).unwrap();
    assert_eq!(back.to_bytes(), ck.to_bytes());
    assert_eq!(back.kind, "toy");
    assert_eq!(back.rng, ck.rng);
    assert_eq!(back.params, ck.params);

    let bytes = ck.to_bytes();
    assert!(Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    assert!(Checkpoint::<f64>::from_bytes(&bytes).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(Checkpoint::<f32>::from_bytes(&bad).is_err());
}

#[test]
fn backward_through_tape_reaches_inputs() {
    let mut t = Tape::<f64>::new();
    let x = t.input(Tensor::new(&[1, 2], vec![0.0, 0.0]).unwrap().with_grad());
    let l = t.softmax_cross_entropy(x, &[1]).unwrap();
    t.backward(l).unwrap();
    let g = t.grad(x).unwrap();
    assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] + 0.5).abs() < 1e-12);
}
