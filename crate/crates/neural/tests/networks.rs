use dupliq_neural::{
    architecture_spec, build_architecture, evaluate_network, gradient_check, train_network, BranchSpec, Dims,
    Error, GradCheckOptions, LayerSpec, Mode, Network, NetworkSpec, Tensor, TrainConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn random_tensor(shape: Vec<usize>, seed: u64, scale: f64) -> Tensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| r.gen_range(-scale..scale)).collect()).unwrap()
}

fn random_indices(rows: usize, len: usize, vocab: usize, seed: u64) -> Tensor {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let idx: Vec<Vec<u32>> = (0..rows)
        .map(|_| (0..len).map(|_| r.gen_range(0..vocab as u32)).collect())
        .collect();
    Tensor::from_indices(&idx).unwrap()
}

fn single_branch(input: Vec<usize>, layers: Vec<LayerSpec>, head: Vec<LayerSpec>) -> NetworkSpec {
    NetworkSpec {
        inputs: vec![input],
        branches: vec![BranchSpec { input: 0, layers }],
        head,
    }
}

fn unit_head(width: usize) -> Vec<LayerSpec> {
    vec![LayerSpec::Dense { input_dim: width, units: 1 }, LayerSpec::Sigmoid]
}

fn micro_net(w: [f64; 2], b: f64) -> Network {
    let mut net = Network::new(single_branch(vec![2], vec![], unit_head(2)), 0).unwrap();
    net.layers_mut()[0].params_mut()[0].data_mut().copy_from_slice(&w);
    net.layers_mut()[0].params_mut()[1].data_mut()[0] = b;
    net
}

fn check(net: &Network, inputs: &[Tensor], labels: &[u8]) -> f64 {
    let report = gradient_check(net, inputs, labels, &GradCheckOptions::default()).unwrap();
    for g in &report.groups {
        assert!(g.checked > 0, "{g:?}");
    }
    assert!(nonsmooth(&report) <= 1, "{:#?}", report.groups);
    report.max_rel_error
}

fn nonsmooth(report: &dupliq_neural::GradCheckReport) -> usize {
    report.groups.iter().map(|g| g.nonsmooth).sum()
}

// closed-form parameter arithmetic per layer
fn emb(v: usize, d: usize) -> usize {
    v * d
}
fn lstm(d: usize, u: usize) -> usize {
    4 * (d * u + u * u + u)
}
fn dense(i: usize, o: usize) -> usize {
    i * o + o
}

#[test]
fn arch1_default_shapes_and_counts() {
    let v = 500;
    let spec = architecture_spec(1, v, &Dims::default()).unwrap();
    assert_eq!(spec.inputs, vec![vec![40], vec![40]]);
    let net = Network::new(spec, 0).unwrap();
    assert_eq!(net.merge_width(), 600);
    let trainable = 2 * (emb(v, 300) + lstm(300, 300)) + 2 * 600 + dense(600, 300) + 300 + 2 * 300 + dense(300, 1);
    let frozen = 2 * 600 + 2 * 300;
    let count = net.param_count();
    assert_eq!((count.trainable, count.non_trainable), (trainable, frozen));
    let stored: usize = net.layers().iter().flat_map(|l| l.params()).map(Tensor::len).sum();
    assert_eq!(stored, count.total());
}

#[test]
fn arch4_default_has_six_branches() {
    let spec = architecture_spec(4, 50, &Dims::default()).unwrap();
    assert_eq!(spec.branches.len(), 6);
    assert_eq!(spec.validate().unwrap(), vec![300; 6]);
    let kinds = spec.layer_kinds();
    assert!(kinds.contains(&"conv1d") && kinds.contains(&"global_max_pool") && kinds.contains(&"concat"));
    assert_eq!(kinds.iter().filter(|&&k| k == "dense").count(), 2 + 8 + 1);
}

#[test]
fn toy_arch1_counts_and_accepts_short_inputs() {
    let (v, dims) = (30, Dims::toy(5, 8));
    let net = build_architecture(1, v, None, Some(dims), 3).unwrap();
    let u = 8;
    let trainable = 2 * (emb(v, 8) + lstm(8, u)) + 2 * 16 + dense(16, 8) + 8 + 2 * 8 + dense(8, 1);
    assert_eq!(net.param_count().trainable, trainable);
    assert_eq!(net.param_count().non_trainable, 2 * 16 + 2 * 8);
    let x = random_indices(3, 5, v, 1);
    let p = net.predict(&[x.clone(), x]).unwrap();
    assert_eq!(p.len(), 3);
    assert!(p.iter().all(|q| (0.0..=1.0).contains(q)));
    let long = random_indices(3, 6, v, 1);
    assert!(matches!(net.predict(&[long.clone(), long]), Err(Error::Shape(_))));
}

#[test]
fn toy_layout_counts_2_to_4() {
    let (v, dims) = (20, Dims::toy(4, 6));
    let glove = random_tensor(vec![v, 6], 9, 1.0);
    let w = dims.width;
    let f = dims.conv_filters;
    let lstm_branch = emb(v, 6) + lstm(6, w);
    let sum_branch_train = dense(6, w);
    let conv_branch_train = 3 * 6 * f + f + 3 * f * f + f + 2 * f + dense(f, w);
    for id in 2..=4u8 {
        let net = build_architecture(id, v, Some(&glove), Some(dims.clone()), 0).unwrap();
        let branches = if id == 4 { 6 } else { 4 };
        let merge = branches * w;
        let mut trainable = 2 * lstm_branch + 2 * sum_branch_train + 2 * merge;
        let mut frozen = 2 * emb(v, 6) + 2 * merge;
        match id {
            2 => {
                trainable += dense(merge, w) + w + 2 * w + dense(w, 1);
                frozen += 2 * w;
            }
            3 => {
                trainable += dense(merge, w) + 3 * dense(w, w) + 4 * (w + 2 * w) + dense(w, 1);
                frozen += 4 * 2 * w;
            }
            _ => {
                trainable += 2 * conv_branch_train;
                frozen += 2 * emb(v, 6) + 2 * 2 * f;
                trainable += dense(merge, w) + 7 * dense(w, w) + 8 * 2 * w + dense(w, 1);
                frozen += 8 * 2 * w;
            }
        }
        let count = net.param_count();
        assert_eq!((count.trainable, count.non_trainable), (trainable, frozen), "arch {id}");
        // frozen embeddings hold the supplied vectors
        let copied = net
            .layers()
            .iter()
            .filter(|l| matches!(l.spec(), LayerSpec::Embedding { trainable: false, .. }))
            .all(|l| l.params()[0] == glove);
        assert!(copied);
    }
}

#[test]
fn zero_weights_give_one_half() {
    let glove = random_tensor(vec![12, 6], 2, 1.0);
    let mut net = build_architecture(2, 12, Some(&glove), Some(Dims::toy(4, 6)), 0).unwrap();
    for layer in net.layers_mut() {
        let shapes = layer.spec().param_shapes();
        for (p, s) in layer.params_mut().iter_mut().zip(shapes) {
            if s.trainable || matches!(s.name.as_str(), "moving_mean") {
                p.data_mut().fill(0.0);
            }
        }
    }
    let x = random_indices(5, 4, 12, 3);
    assert!(net.predict(&[x.clone(), x]).unwrap().iter().all(|&p| p == 0.5));
}

#[test]
fn micro_net_forward_by_hand() {
    let net = micro_net([0.7, -1.3], 0.2);
    let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, -0.5, 0.25]).unwrap();
    let p = net.predict(&[x]).unwrap();
    assert!((p[0] - sig(0.7 - 2.6 + 0.2)).abs() < 1e-15);
    assert!((p[1] - sig(-0.35 - 0.325 + 0.2)).abs() < 1e-15);
}

#[test]
fn zero_dropout_train_equals_infer() {
    let spec = single_branch(
        vec![3],
        vec![
            LayerSpec::Dense { input_dim: 3, units: 4 },
            LayerSpec::Prelu { width: 4 },
            LayerSpec::Dropout { rate: 0.0 },
        ],
        unit_head(4),
    );
    let net = Network::new(spec, 5).unwrap();
    let x = vec![random_tensor(vec![6, 3], 1, 2.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(net.forward(&x, Mode::Train, &mut rng).unwrap(), net.predict(&x).unwrap());
}

#[test]
fn infer_is_pure() {
    let net = build_architecture(1, 15, None, Some(Dims::toy(4, 5)), 2).unwrap();
    let x = random_indices(4, 4, 15, 8);
    let a = net.predict(&[x.clone(), x.clone()]).unwrap();
    let b = net.predict(&[x.clone(), x]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn one_adam_step_by_hand() {
    let mut net = micro_net([0.5, -0.25], 0.1);
    let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, -1.0]).unwrap();
    let y = [1u8, 0];
    let lr = 0.01;
    let config = TrainConfig {
        batch_size: 2,
        epochs: 1,
        learning_rate: lr,
        ..TrainConfig::default()
    };
    // gradient of mean BCE: (p - y) x / n
    let z = [0.5 - 0.5 + 0.1, 1.5 + 0.25 + 0.1];
    let r = [sig(z[0]) - 1.0, sig(z[1])];
    let g = [
        (r[0] * 1.0 + r[1] * 3.0) / 2.0,
        (r[0] * 2.0 - r[1]) / 2.0,
        (r[0] + r[1]) / 2.0,
    ];
    // first Adam step: m̂ = g, v̂ = g²
    let step = |w: f64, g: f64| {
        let m = 0.1 * g / (1.0 - 0.9);
        let v = 0.001 * g * g / (1.0 - 0.999);
        w - lr * m / (v.sqrt() + 1e-8)
    };
    train_network(&mut net, &[x], &y, &config).unwrap();
    let k = net.layers()[0].params()[0].data();
    let b = net.layers()[0].params()[1].data()[0];
    assert!((k[0] - step(0.5, g[0])).abs() < 1e-15);
    assert!((k[1] - step(-0.25, g[1])).abs() < 1e-15);
    assert!((b - step(0.1, g[2])).abs() < 1e-15);
}

#[test]
fn zero_learning_rate_keeps_trainable_weights() {
    let mut net = build_architecture(1, 10, None, Some(Dims::toy(3, 4)), 0).unwrap();
    let before = net.clone();
    let x = random_indices(12, 3, 10, 0);
    let y: Vec<u8> = (0..12).map(|i| (i % 2) as u8).collect();
    let config = TrainConfig {
        batch_size: 5,
        epochs: 3,
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    train_network(&mut net, &[x.clone(), x], &y, &config).unwrap();
    for (a, b) in before.layers().iter().zip(net.layers()) {
        for ((pa, pb), s) in a.params().iter().zip(b.params()).zip(a.spec().param_shapes()) {
            if s.trainable {
                assert_eq!(pa, pb, "{}", s.name);
            }
        }
    }
}

#[test]
fn small_steps_decrease_full_batch_loss() {
    let mut net = micro_net([0.3, -0.2], 0.0);
    let x = random_tensor(vec![40, 2], 4, 1.0);
    let y: Vec<u8> = x.data().chunks(2).map(|r| u8::from(r[0] + r[1] > 0.0)).collect();
    let config = TrainConfig {
        batch_size: 40,
        epochs: 25,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let history = train_network(&mut net, &[x], &y, &config).unwrap();
    let losses: Vec<f64> = history.epochs.iter().map(|e| e.loss).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]), "{losses:?}");
}

#[test]
fn nan_loss_aborts() {
    let mut net = micro_net([f64::NAN, 0.0], 0.0);
    let x = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let err = train_network(&mut net, &[x], &[1, 0], &TrainConfig::default()).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { epoch: 0, batch: 0, .. }), "{err}");
}

#[test]
fn bad_training_inputs() {
    let mut net = micro_net([0.0, 0.0], 0.0);
    let x = Tensor::zeros(vec![3, 2]);
    assert!(train_network(&mut net, std::slice::from_ref(&x), &[1, 0], &TrainConfig::default()).is_err());
    assert!(train_network(&mut net, std::slice::from_ref(&x), &[1, 0, 2], &TrainConfig::default()).is_err());
    let zero_batch = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    assert!(train_network(&mut net, &[x], &[1, 0, 1], &zero_batch).is_err());
}

#[test]
fn gradcheck_dense_sigmoid() {
    let net = micro_net([0.4, -0.9], 0.3);
    let x = random_tensor(vec![5, 2], 1, 1.5);
    let err = check(&net, &[x], &[1, 0, 0, 1, 1]);
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn gradcheck_lstm_three_steps() {
    let spec = single_branch(
        vec![3],
        vec![
            LayerSpec::Embedding { vocab_size: 7, dim: 4, trainable: true },
            LayerSpec::Lstm { input_dim: 4, units: 5, recurrent_dropout: 0.2 },
        ],
        unit_head(5),
    );
    let mut net = Network::new(spec, 11).unwrap();
    // larger embeddings so the gates see non-trivial inputs
    for v in net.layers_mut()[0].params_mut()[0].data_mut() {
        *v *= 20.0;
    }
    let x = random_indices(4, 3, 7, 2);
    let err = check(&net, &[x], &[1, 0, 1, 0]);
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn gradcheck_conv_max_pool() {
    let spec = single_branch(
        vec![6, 3],
        vec![
            LayerSpec::Conv1d { input_dim: 3, filters: 4, kernel: 3 },
            LayerSpec::Dropout { rate: 0.3 },
            LayerSpec::Conv1d { input_dim: 4, filters: 4, kernel: 3 },
            LayerSpec::GlobalMaxPool,
        ],
        unit_head(4),
    );
    let net = Network::new(spec, 4).unwrap();
    let x = random_tensor(vec![3, 6, 3], 5, 1.0);
    let err = check(&net, &[x], &[0, 1, 1]);
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn gradcheck_time_distributed_sum_and_norm_head() {
    let spec = single_branch(
        vec![4, 3],
        vec![LayerSpec::TimeDistributedDense { input_dim: 3, units: 5 }, LayerSpec::LambdaSum],
        vec![
            LayerSpec::batch_norm(5),
            LayerSpec::Dense { input_dim: 5, units: 4 },
            LayerSpec::Prelu { width: 4 },
            LayerSpec::Dropout { rate: 0.5 },
            LayerSpec::batch_norm(4),
            LayerSpec::Dense { input_dim: 4, units: 1 },
            LayerSpec::Sigmoid,
        ],
    );
    let net = Network::new(spec, 6).unwrap();
    let x = random_tensor(vec![6, 4, 3], 7, 1.0);
    let err = check(&net, &[x], &[0, 1, 1, 0, 1, 0]);
    assert!(err <= 1e-4, "{err}");
}

#[test]
fn gradcheck_toy_layouts() {
    let v = 14;
    let dims = Dims::toy(4, 6);
    let glove = random_tensor(vec![v, 6], 12, 1.0);
    let q1 = random_indices(6, 4, v, 21);
    let q2 = random_indices(6, 4, v, 22);
    let y = [1, 0, 0, 1, 1, 0];
    for id in 1..=4u8 {
        let net = build_architecture(id, v, Some(&glove), Some(dims.clone()), u64::from(id)).unwrap();
        let report = gradient_check(&net, &[q1.clone(), q2.clone()], &y, &GradCheckOptions::default()).unwrap();
        let kinds: Vec<&str> = report.groups.iter().map(|g| g.kind.as_str()).collect();
        assert!(kinds.contains(&"lstm") && kinds.contains(&"batch_norm"));
        assert!(report.max_rel_error <= 1e-4, "arch {id}: {:#?}", report.groups);
        let checked: usize = report.groups.iter().map(|g| g.checked).sum();
        assert!(nonsmooth(&report) * 50 <= checked, "arch {id}: {:#?}", report.groups);
    }
}

fn separable_pairs(n: usize, seq: usize, seed: u64) -> (Tensor, Tensor, Vec<u8>) {
    // duplicates draw words from 1..=8, the rest from 9..=16
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut q1 = Vec::new();
    let mut q2 = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = (i % 2) as u8;
        let lo = if label == 1 { 1 } else { 9 };
        let mut q = || -> Vec<u32> {
            let len = r.gen_range(2..=seq);
            let mut s: Vec<u32> = (0..len).map(|_| r.gen_range(lo..lo + 8)).collect();
            s.resize(seq, 0);
            s
        };
        q1.push(q());
        q2.push(q());
        y.push(label);
    }
    (Tensor::from_indices(&q1).unwrap(), Tensor::from_indices(&q2).unwrap(), y)
}

#[test]
fn toy_arch1_overfits_separable_pairs() {
    let (q1, q2, y) = separable_pairs(200, 5, 3);
    let mut net = build_architecture(1, 17, None, Some(Dims::toy(5, 8)), 0).unwrap();
    let config = TrainConfig {
        batch_size: 20,
        epochs: 150,
        seed: 1,
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let history = train_network(&mut net, &[q1.clone(), q2.clone()], &y, &config).unwrap();
    assert!(start.elapsed().as_secs() < 300);
    assert_eq!(history.epochs.len(), 150);
    let (_, acc) = evaluate_network(&net, &[q1, q2], &y).unwrap();
    assert!(acc >= 0.95, "train accuracy {acc}");
}

#[test]
fn training_is_seeded() {
    let (q1, q2, y) = separable_pairs(40, 4, 9);
    let config = TrainConfig {
        batch_size: 8,
        epochs: 3,
        seed: 5,
        ..TrainConfig::default()
    };
    let run = || {
        let mut net = build_architecture(1, 17, None, Some(Dims::toy(4, 4)), 0).unwrap();
        let h = train_network(&mut net, &[q1.clone(), q2.clone()], &y, &config).unwrap();
        (net, h)
    };
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(ha, hb);
    assert_eq!(a, b);
}

#[test]
fn save_and_load_round_trip() {
    let glove = random_tensor(vec![9, 4], 3, 1.0);
    let net = build_architecture(4, 9, Some(&glove), Some(Dims::toy(3, 4)), 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    net.save(&path).unwrap();
    assert!(dir.path().join("net.bin").exists());
    let back = Network::load(&path).unwrap();
    assert_eq!(back, net);

    let bin = dir.path().join("net.bin");
    let bytes = std::fs::read(&bin).unwrap();
    std::fs::write(&bin, &bytes[..bytes.len() - 8]).unwrap();
    assert!(Network::load(&path).is_err());
    assert!(Network::load(dir.path().join("missing.json")).unwrap_err().is_io());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn batch_norm_train_output_is_standardised(seed in 0u64..1000, rows in 8usize..40, scale in 1.0f64..50.0) {
        let spec = single_branch(vec![3], vec![LayerSpec::batch_norm(3)], unit_head(3));
        let mut net = Network::new(spec, 0).unwrap();
        net.layers_mut()[1].params_mut()[0].data_mut().copy_from_slice(&[1.0, 0.0, 0.0]);
        net.layers_mut()[1].params_mut()[1].data_mut()[0] = 0.0;
        let x = random_tensor(vec![rows, 3], seed, scale);
        // a single-column readout exposes the first normalised feature as the logit
        let (logits, _) = net.forward_trace(&[x], Mode::Train, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let n = rows as f64;
        let mean = logits.iter().sum::<f64>() / n;
        let var = logits.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() <= 1e-6);
        prop_assert!((var - 1.0).abs() <= 1e-4, "{}", var);
    }

    #[test]
    fn predictions_are_probabilities(seed in 0u64..500) {
        let net = build_architecture(1, 11, None, Some(Dims::toy(3, 4)), seed).unwrap();
        let x = random_indices(3, 3, 11, seed + 1);
        for p in net.predict(&[x.clone(), x]).unwrap() {
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
