//! Central finite-difference checks. Each check returns the norm-relative
//! error of every gradient it compares, keyed by tensor name.

use bearing_pinn::model::{
    physics_informed_loss, ArchConfig, ModelInput, MultimodalNet, PenaltyMode, PhysicsFeatures, PhysicsLossConfig,
};
use bearing_pinn::nn::{softmax_cross_entropy, Gradients, LayerSpec, Network, ParamStore, Sequential, Tensor};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-4;
pub const TOL: f64 = 1e-4;

pub type Errors = Vec<(String, f64)>;

/// ‖a − n‖ / (‖a‖ + ‖n‖), zero when both vanish.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn worst(errors: &Errors) -> (String, f64) {
    errors
        .iter()
        .cloned()
        .fold((String::new(), 0.0), |acc, e| if e.1 > acc.1 { e } else { acc })
}

fn central<F: FnMut(f64) -> f64>(x0: f64, mut f: F) -> f64 {
    (f(x0 + EPS) - f(x0 - EPS)) / (2.0 * EPS)
}

/// Values on a 0.01 grid in random order: distinct enough that a ±EPS nudge
/// never reorders a max-pool window, and away from the ReLU kink.
fn spaced_values(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0) * 0.01 + 0.005).collect();
    v.shuffle(rng);
    v
}

/// One case per layer kind plus a composed stack.
pub fn layer_cases() -> Vec<(&'static str, Vec<LayerSpec>, Vec<usize>)> {
    vec![
        ("conv1d", vec![LayerSpec::Conv1d { out_channels: 3, kernel: 4, stride: 1 }], vec![2, 17]),
        ("conv1d_strided", vec![LayerSpec::Conv1d { out_channels: 4, kernel: 5, stride: 3 }], vec![3, 23]),
        ("maxpool1d", vec![LayerSpec::MaxPool1d { size: 3, stride: None }], vec![2, 15]),
        ("maxpool1d_overlap", vec![LayerSpec::MaxPool1d { size: 4, stride: Some(2) }], vec![2, 16]),
        ("dense", vec![LayerSpec::Dense { units: 5 }], vec![7]),
        ("relu", vec![LayerSpec::Relu], vec![2, 9]),
        ("flatten", vec![LayerSpec::Flatten, LayerSpec::Dense { units: 3 }], vec![2, 6]),
        ("softmax", vec![LayerSpec::Softmax], vec![6]),
        (
            "conv_pool_dense",
            vec![
                LayerSpec::Conv1d { out_channels: 3, kernel: 4, stride: 2 },
                LayerSpec::Relu,
                LayerSpec::MaxPool1d { size: 2, stride: None },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 4 },
            ],
            vec![1, 30],
        ),
    ]
}

/// Checks `L = Σ r ⊙ stack(x)` with a fixed random projection `r`, for the
/// input and every parameter.
pub fn check_stack(specs: &[LayerSpec], input_shape: &[usize], seed: u64) -> Errors {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let stack = Sequential::build(specs, input_shape, &mut store, "t", &mut rng).unwrap();
    let n_in: usize = input_shape.iter().product();
    let mut x = Tensor::new(input_shape.to_vec(), spaced_values(n_in, &mut rng)).unwrap();
    let out_shape = stack.output_shape().to_vec();
    let n_out: usize = out_shape.iter().product();
    let r = Tensor::new(out_shape, (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();

    let loss = |store: &ParamStore, x: &Tensor| -> f64 {
        let y = stack.infer(store, x).unwrap();
        y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    };

    let (_, trace) = stack.forward(&store, &x).unwrap();
    let mut grads = Gradients::zeros_like(&store);
    let gx = stack.backward(&store, &trace, &r, &mut grads).unwrap();

    let mut numeric = Vec::with_capacity(n_in);
    for k in 0..n_in {
        let x0 = x.data()[k];
        numeric.push(central(x0, |v| {
            x.data_mut()[k] = v;
            let l = loss(&store, &x);
            x.data_mut()[k] = x0;
            l
        }));
    }
    let mut errors = vec![("input".to_string(), rel_error(gx.data(), &numeric))];

    let names: Vec<String> = store.iter().map(|p| p.name.clone()).collect();
    for name in names {
        let id = store.id_of(&name).unwrap();
        let len = store.value(id).len();
        let mut numeric = Vec::with_capacity(len);
        for k in 0..len {
            let w0 = store.value(id).data()[k];
            numeric.push(central(w0, |v| {
                store.get_mut(id).value.data_mut()[k] = v;
                let l = loss(&store, &x);
                store.get_mut(id).value.data_mut()[k] = w0;
                l
            }));
        }
        errors.push((name, rel_error(grads.get(id).data(), &numeric)));
    }
    errors
}

/// Dense → ReLU → Dense trained through softmax cross-entropy.
pub fn cross_entropy_network(seed: u64) -> Errors {
    let specs = [LayerSpec::Dense { units: 6 }, LayerSpec::Relu, LayerSpec::Dense { units: 3 }];
    let mut net = Network::new(&specs, &[4], seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let inputs: Vec<Tensor> = (0..5)
        .map(|_| Tensor::vector((0..4).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    let labels = [0, 2, 1, 1, 0];
    let logits = net.forward(&inputs).unwrap();
    let (_, g) = softmax_cross_entropy(&logits, &labels).unwrap();
    let grads = net.backward(&g).unwrap();
    let names: Vec<String> = net.store().iter().map(|p| p.name.clone()).collect();
    let mut errors = Vec::new();
    for name in names {
        let id = net.store().id_of(&name).unwrap();
        let len = net.store().value(id).len();
        let mut numeric = Vec::new();
        for k in 0..len {
            let w0 = net.store().value(id).data()[k];
            numeric.push(central(w0, |v| {
                net.store_mut().get_mut(id).value.data_mut()[k] = v;
                let rows: Vec<f64> = inputs.iter().flat_map(|x| net.predict(x).unwrap().into_data()).collect();
                let l = softmax_cross_entropy(&Tensor::new(vec![5, 3], rows).unwrap(), &labels).unwrap().0;
                net.store_mut().get_mut(id).value.data_mut()[k] = w0;
                l
            }));
        }
        errors.push((name, rel_error(grads.get(id).data(), &numeric)));
    }
    errors
}

pub fn soft_cfg() -> PhysicsLossConfig {
    PhysicsLossConfig {
        lambda: 0.8,
        t_bpfo: 0.6,
        t_bpfi: 0.5,
        threshold_percentile: 10.0,
        gating: PenaltyMode::SoftProbability,
    }
}

/// Logit gradient of the soft physics-informed loss.
pub fn soft_loss_logits(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let mut logits = Tensor::new(vec![n, 3], (0..3 * n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    // Mix of samples below, above and straddling both thresholds.
    let feats: Vec<PhysicsFeatures> = (0..n)
        .map(|_| PhysicsFeatures::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)))
        .collect();
    let cfg = soft_cfg();
    let analytic = physics_informed_loss(&logits, &labels, &feats, &cfg).unwrap().grad;
    let mut numeric = Vec::new();
    for k in 0..3 * n {
        let z0 = logits.data()[k];
        numeric.push(central(z0, |v| {
            logits.data_mut()[k] = v;
            let l = physics_informed_loss(&logits, &labels, &feats, &cfg).unwrap().total;
            logits.data_mut()[k] = z0;
            l
        }));
    }
    rel_error(analytic.data(), &numeric)
}

/// Every parameter of a small three-branch network under the soft loss.
pub fn multimodal_soft(seed: u64) -> Errors {
    let arch = ArchConfig {
        window_len: 40,
        signal_branch: vec![
            LayerSpec::Conv1d { out_channels: 2, kernel: 4, stride: 2 },
            LayerSpec::Relu,
            LayerSpec::MaxPool1d { size: 2, stride: None },
            LayerSpec::Flatten,
        ],
        physics_branch: vec![LayerSpec::Dense { units: 3 }, LayerSpec::Relu],
        head: vec![LayerSpec::Dense { units: 5 }, LayerSpec::Relu, LayerSpec::Dense { units: 3 }],
        seed,
    };
    let mut net = MultimodalNet::new(&arch).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let inputs: Vec<ModelInput> = (0..3)
        .map(|_| ModelInput {
            signals: [0, 1, 2].map(|_| Tensor::signal(&spaced_values(40, &mut rng).iter().map(|v| v * 4.0).collect::<Vec<_>>())),
            physics: Tensor::vector(vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]),
        })
        .collect();
    let feats: Vec<PhysicsFeatures> = inputs
        .iter()
        .map(|x| PhysicsFeatures::new(x.physics.data()[0], x.physics.data()[1]))
        .collect();
    let labels = [0, 1, 2];
    let cfg = soft_cfg();
    let batch: Vec<&ModelInput> = inputs.iter().collect();
    let logits = net.forward_batch(&batch).unwrap();
    let l = physics_informed_loss(&logits, &labels, &feats, &cfg).unwrap();
    let grads = net.backward(&l.grad).unwrap();

    let names: Vec<String> = net.store().iter().map(|p| p.name.clone()).collect();
    let mut errors = Vec::new();
    for name in names {
        let id = net.store().id_of(&name).unwrap();
        let len = net.store().value(id).len();
        let mut numeric = Vec::new();
        for k in 0..len {
            let w0 = net.store().value(id).data()[k];
            numeric.push(central(w0, |v| {
                net.store_mut().get_mut(id).value.data_mut()[k] = v;
                let z = net.logits(&batch).unwrap();
                let l = physics_informed_loss(&z, &labels, &feats, &cfg).unwrap().total;
                net.store_mut().get_mut(id).value.data_mut()[k] = w0;
                l
            }));
        }
        errors.push((name, rel_error(grads.get(id).data(), &numeric)));
    }
    errors
}
