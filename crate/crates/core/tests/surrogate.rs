use plasmo::materials::Metal;
use plasmo::surrogate::{
    evaluate, from_bytes, load_model, metrics, save_model, to_bytes, train, Architecture,
    CnnArchitecture, Dense, Layer, MlpArchitecture, Network, RawInput, Shape, Surrogate,
    TrainConfig, TrainData,
};
use plasmo::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_batch(rows: usize, width: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows * width)
        .map(|_| rng.gen_range(-1.5..1.5))
        .collect()
}

/// MSE of a training-mode forward pass (no dropout in the networks used here).
fn loss(net: &mut Network, x: &[f64], t: &[f64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y = net.forward_train(x, &mut rng).unwrap();
    y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

/// Analytic gradients for every (tensor, index) pair.
fn analytic(net: &mut Network, x: &[f64], t: &[f64]) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y = net.forward_train(x, &mut rng).unwrap();
    let scale = 2.0 / y.len() as f64;
    let g: Vec<f64> = y.iter().zip(t).map(|(a, b)| scale * (a - b)).collect();
    net.backward(&g).unwrap();
    net.params_mut()
        .into_iter()
        .map(|(_, g)| g.clone())
        .collect()
}

fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / (a.abs() + n.abs()).max(1e-7)
}

/// Central differences with h = 1e-5 on the chosen (tensor, index) pairs.
fn check_gradients(net: &mut Network, x: &[f64], t: &[f64], picks: &[(usize, usize)]) -> f64 {
    let grads = analytic(net, x, t);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for &(p, k) in picks {
        let orig = net.params_mut()[p].0[k];
        net.params_mut()[p].0[k] = orig + h;
        let up = loss(net, x, t);
        net.params_mut()[p].0[k] = orig - h;
        let down = loss(net, x, t);
        net.params_mut()[p].0[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let err = relative_error(grads[p][k], numeric);
        assert!(
            err < 1e-4,
            "tensor {p} index {k}: analytic {} numeric {numeric}",
            grads[p][k]
        );
        worst = worst.max(err);
    }
    worst
}

fn all_indices(net: &mut Network) -> Vec<(usize, usize)> {
    net.params_mut()
        .iter()
        .enumerate()
        .flat_map(|(p, (t, _))| (0..t.len()).map(move |k| (p, k)))
        .collect()
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let arch = Architecture::Mlp(MlpArchitecture {
        inputs: 4,
        hidden: vec![16],
        outputs: 2,
        dropout: 0.0,
        batch_norm: true,
    });
    let mut net = Network::build(&arch, 3).unwrap();
    let x = random_batch(6, 4, 1);
    let t = random_batch(6, 2, 2);
    let picks = all_indices(&mut net);
    check_gradients(&mut net, &x, &t, &picks);
}

#[test]
fn deep_mlp_gradients_match_finite_differences() {
    let arch = Architecture::Mlp(MlpArchitecture {
        inputs: 4,
        hidden: vec![12, 10, 8],
        outputs: 2,
        dropout: 0.0,
        batch_norm: true,
    });
    let mut net = Network::build(&arch, 5).unwrap();
    let x = random_batch(7, 4, 3);
    let t = random_batch(7, 2, 4);
    let picks = all_indices(&mut net);
    check_gradients(&mut net, &x, &t, &picks);
}

#[test]
fn cnn_gradients_match_finite_differences() {
    let arch = Architecture::Cnn(CnnArchitecture {
        inputs: 4,
        coarse: [4, 3, 3],
        stage_channels: vec![4],
        dropout: 0.0,
    });
    let mut net = Network::build(&arch, 7).unwrap();
    assert_eq!(net.output_width(), 8 * 6);
    // zero-initialised biases put pixels with an all-zero receptive field
    // exactly on the ReLU kink, where central differences are meaningless
    let mut jitter = ChaCha8Rng::seed_from_u64(13);
    for layer in net.layers_mut() {
        if let Layer::Conv(c) = layer {
            c.b.iter_mut().for_each(|b| *b = jitter.gen_range(0.1..0.5));
        }
    }
    let x = random_batch(3, 4, 5);
    let t = random_batch(3, 48, 6);
    let all = all_indices(&mut net);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut picks: Vec<(usize, usize)> =
        (0..50).map(|_| all[rng.gen_range(0..all.len())]).collect();
    // every tensor class (dense, conv, batch-norm scale and shift) at least once
    for p in 0..net.params_mut().len() {
        picks.push((p, 0));
    }
    check_gradients(&mut net, &x, &t, &picks);
}

#[test]
fn zero_residual_gives_zero_gradients() {
    let arch = Architecture::Mlp(MlpArchitecture {
        inputs: 4,
        hidden: vec![8],
        outputs: 2,
        dropout: 0.0,
        batch_norm: true,
    });
    let mut net = Network::build(&arch, 1).unwrap();
    let x = random_batch(5, 4, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let y = net.forward_train(&x, &mut rng).unwrap();
    for g in analytic(&mut net, &x, &y) {
        assert!(g.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn backward_without_forward_is_a_usage_error() {
    let mut net = Network::build(&Architecture::Mlp(MlpArchitecture::default()), 0).unwrap();
    assert!(matches!(net.backward(&[0.0, 0.0]), Err(Error::Usage(_))));
}

#[test]
fn zero_weights_give_zero_output() {
    let mut net = Network::build(&Architecture::Mlp(MlpArchitecture::default()), 0).unwrap();
    for (p, _) in net.params_mut() {
        p.iter_mut().for_each(|v| *v = 0.0);
    }
    let y = net.predict(&random_batch(3, 4, 1)).unwrap();
    assert!(y.iter().all(|v| *v == 0.0), "{y:?}");
}

#[test]
fn single_dense_layer_is_wx_plus_b() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut dense = Dense::new(2, 2, &mut rng);
    dense.w = vec![1.0, 2.0, 3.0, 4.0];
    dense.b = vec![0.5, -0.5];
    let net = Network::new(Shape::flat(2), vec![Layer::Dense(dense)]).unwrap();
    assert_eq!(
        net.predict(&[1.0, -1.0, 2.0, 0.5]).unwrap(),
        vec![-0.5, -1.5, 3.5, 7.5]
    );
}

#[test]
fn shape_mismatch_names_the_layer() {
    let net = Network::build(&Architecture::Mlp(MlpArchitecture::default()), 0).unwrap();
    match net.predict(&[1.0, 2.0, 3.0]) {
        Err(Error::Shape {
            layer,
            expected,
            got,
        }) => assert_eq!((layer.as_str(), expected, got), ("input", 4, 3)),
        other => panic!("expected shape error, got {other:?}"),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let bad = Network::new(
        Shape::flat(4),
        vec![Layer::Dense(Dense::new(3, 2, &mut rng))],
    );
    assert!(matches!(bad, Err(Error::Shape { .. })));
}

#[test]
fn inference_is_deterministic_and_batch_independent() {
    let net = Network::build(&Architecture::Cnn(CnnArchitecture::default()), 2).unwrap();
    let x = random_batch(1, 4, 3);
    let a = net.predict(&x).unwrap();
    assert_eq!(a, net.predict(&x).unwrap());
    let batch: Vec<f64> = x.iter().cycle().take(4 * 5).copied().collect();
    let y = net.predict(&batch).unwrap();
    for row in y.chunks(a.len()) {
        assert_eq!(row, a.as_slice());
    }
}

fn toy_data(n: usize) -> TrainData {
    let x = random_batch(n, 4, 21);
    let y: Vec<f64> = x
        .chunks(4)
        .flat_map(|r| [r[0] * r[1] + 0.5 * r[2], (r[3] - r[0]).sin()])
        .collect();
    TrainData::new(x, y, 4, 2).unwrap()
}

fn overfit_config() -> TrainConfig {
    TrainConfig {
        max_epochs: 2000,
        batch_size: 16,
        early_stopping_patience: 2000,
        plateau_patience: 50,
        min_learning_rate: 1e-6,
        learning_rate: 3e-3,
        ..TrainConfig::mlp()
    }
}

#[test]
fn toy_overfit_reaches_mse_below_1e_5() {
    let data = toy_data(16);
    let arch = Architecture::Mlp(MlpArchitecture {
        inputs: 4,
        hidden: vec![64, 64],
        outputs: 2,
        dropout: 0.0,
        batch_norm: true,
    });
    let idx: Vec<usize> = (0..16).collect();
    let net = Network::build(&arch, 1).unwrap();
    let (net, report) = train(net, &data, &idx, &idx, &overfit_config()).unwrap();
    let (x, y) = data.rows(&idx);
    let final_mse = plasmo::surrogate::mse(&net.predict(&x).unwrap(), &y);
    assert!(final_mse < 1e-5, "mse {final_mse:e}");
    assert!(report.epochs[199].train_loss < report.epochs[0].train_loss);
}

#[test]
fn training_is_seed_deterministic() {
    let data = toy_data(40);
    let arch = Architecture::Mlp(MlpArchitecture {
        inputs: 4,
        hidden: vec![16, 16],
        outputs: 2,
        dropout: 0.2,
        batch_norm: true,
    });
    let idx: Vec<usize> = (0..30).collect();
    let val: Vec<usize> = (30..40).collect();
    let cfg = TrainConfig {
        max_epochs: 30,
        batch_size: 8,
        ..TrainConfig::mlp()
    };
    let run = || train(Network::build(&arch, 4).unwrap(), &data, &idx, &val, &cfg).unwrap();
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(ra, rb);
    assert_eq!(a, b);
}

#[test]
fn early_stopping_restores_best_weights() {
    let data = toy_data(60);
    let arch = Architecture::Mlp(MlpArchitecture {
        inputs: 4,
        hidden: vec![32],
        outputs: 2,
        dropout: 0.2,
        batch_norm: true,
    });
    let idx: Vec<usize> = (0..20).collect();
    let val: Vec<usize> = (20..60).collect();
    let cfg = TrainConfig {
        max_epochs: 400,
        batch_size: 8,
        ..TrainConfig::mlp()
    };
    let (net, report) = train(Network::build(&arch, 4).unwrap(), &data, &idx, &val, &cfg).unwrap();
    let (vx, vy) = data.rows(&val);
    let restored = plasmo::surrogate::mse(&net.predict(&vx).unwrap(), &vy);
    let best = &report.epochs[report.best_epoch - 1];
    assert_eq!(restored, best.val_loss);
    for e in &report.epochs[report.best_epoch..] {
        assert!(restored <= e.val_loss);
    }
    assert!(report.stopped_epoch <= cfg.max_epochs);
    assert!(report
        .epochs
        .iter()
        .all(|e| e.train_loss.is_finite() && e.val_loss.is_finite()));
}

#[test]
fn divergence_reports_epoch_and_batch() {
    let mut data = toy_data(16);
    data.y[5] = f64::NAN;
    let arch = Architecture::Mlp(MlpArchitecture {
        inputs: 4,
        hidden: vec![8],
        outputs: 2,
        dropout: 0.0,
        batch_norm: true,
    });
    let idx: Vec<usize> = (0..16).collect();
    let cfg = TrainConfig {
        max_epochs: 3,
        batch_size: 16,
        ..TrainConfig::mlp()
    };
    let result = train(Network::build(&arch, 0).unwrap(), &data, &idx, &idx, &cfg);
    assert!(matches!(
        result,
        Err(Error::TrainingDivergence { epoch: 1, batch: 0 })
    ));
}

#[test]
fn dropout_average_matches_inference() {
    // dropout directly before a linear read-out: the training-mode mean over
    // masks equals the inference output
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layers = vec![
        Layer::Dense(Dense::new(4, 32, &mut rng)),
        Layer::Relu,
        Layer::Dropout(0.2),
        Layer::Dense(Dense::new(32, 1, &mut rng)),
    ];
    let mut net = Network::new(Shape::flat(4), layers).unwrap();
    let x = [0.3, -0.7, 1.1, 0.2];
    let infer = net.predict(&x).unwrap()[0];
    let n = 10_000;
    let samples: Vec<f64> = (0..n)
        .map(|_| net.forward_train(&x, &mut rng).unwrap()[0])
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!(
        (mean - infer).abs() < 2.0 * se,
        "mean {mean} infer {infer} se {se}"
    );
}

#[test]
fn batch_norm_infer_gives_identical_rows() {
    let net = Network::build(&Architecture::Mlp(MlpArchitecture::default()), 8).unwrap();
    let row = [0.1, 0.2, 1.0, 0.0];
    let batch: Vec<f64> = row.iter().cycle().take(4 * 8).copied().collect();
    let y = net.predict(&batch).unwrap();
    for r in y.chunks(2) {
        assert_eq!(r, &y[..2]);
    }
}

fn tiny_model() -> Surrogate {
    let records: Vec<plasmo::dataset::SampleRecord> = [Metal::Au, Metal::Ag]
        .iter()
        .flat_map(|&m| {
            [10.0, 20.0, 30.0].into_iter().flat_map(move |t| {
                [400.0, 600.0, 800.0, 1000.0].into_iter().map(move |w| {
                    plasmo::dataset::SampleRecord {
                        material: m,
                        thickness_nm: t,
                        wavelength_nm: w,
                        absorbed_power: (t / 50.0) * (w / 1000.0),
                        absorbed_flux: t / 100.0,
                        map_path: None,
                        valid: true,
                        imputed: false,
                    }
                })
            })
        })
        .collect();
    let arch = MlpArchitecture {
        hidden: vec![8, 8],
        ..MlpArchitecture::default()
    };
    let cfg = TrainConfig {
        max_epochs: 5,
        batch_size: 8,
        ..TrainConfig::mlp()
    };
    plasmo::surrogate::train_mlp(&records, arch, &cfg)
        .unwrap()
        .0
}

fn random_inputs(n: usize) -> Vec<RawInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    (0..n)
        .map(|_| RawInput {
            material: if rng.gen::<bool>() {
                Metal::Au
            } else {
                Metal::Ag
            },
            thickness_nm: rng.gen_range(10.0..50.0),
            wavelength_nm: rng.gen_range(300.0..1500.0),
        })
        .collect()
}

#[test]
fn save_load_round_trip_is_bit_identical() {
    let model = tiny_model();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mlp.bin");
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);
    let inputs = random_inputs(100);
    let a = model.predict(&inputs).unwrap();
    let b = loaded.predict(&inputs).unwrap();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn damaged_files_are_format_errors() {
    let bytes = to_bytes(&tiny_model()).unwrap();
    for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(
            matches!(from_bytes(&bytes[..cut]), Err(Error::Format(_))),
            "cut at {cut}"
        );
    }
    let mut flipped = bytes.clone();
    flipped[40] ^= 1;
    assert!(matches!(from_bytes(&flipped), Err(Error::Format(_))));
    let mut versioned = bytes[..bytes.len() - 32].to_vec();
    versioned[8] = 9;
    let digest = <sha2::Sha256 as sha2::Digest>::digest(&versioned);
    versioned.extend_from_slice(&digest);
    match from_bytes(&versioned) {
        Err(Error::Format(m)) => assert!(m.contains("version")),
        other => panic!("expected version error, got {other:?}"),
    }
}

#[test]
fn raw_inputs_match_prescaled_pipeline() {
    let model = tiny_model();
    let inputs = random_inputs(20);
    let raw = model.predict(&inputs).unwrap();
    let mut x = Vec::new();
    for r in &inputs {
        let oh = if r.material == Metal::Au {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        };
        x.extend([
            (r.thickness_nm - model.input_scalers.thickness.mean)
                / model.input_scalers.thickness.std,
            (r.wavelength_nm - model.input_scalers.wavelength.mean)
                / model.input_scalers.wavelength.std,
            oh[0],
            oh[1],
        ]);
    }
    let scaled = model.network.predict(&x).unwrap();
    for (row, (a, b)) in raw.chunks(2).zip(scaled.chunks(2)).enumerate() {
        for k in 0..2 {
            let expect = b[k] * model.target_scalers[k].std + model.target_scalers[k].mean;
            assert!((a[k] - expect).abs() < 1e-12, "row {row}");
        }
    }
}

#[test]
fn metrics_examples() {
    let m = metrics(&[0.0, 0.0], &[0.0, 1.0], 1).unwrap();
    assert_eq!(m.mae, vec![0.5]);
    assert_eq!(m.mse, vec![0.5]);
    let m2 = metrics(&[0.0, 0.0], &[1.0, 0.0], 1).unwrap();
    assert_eq!(m, m2);
    assert!(matches!(metrics(&[], &[], 1), Err(Error::Evaluation(_))));
    let model = tiny_model();
    assert!(matches!(
        evaluate(&model, &[], &[]),
        Err(Error::Evaluation(_))
    ));
    let inputs = random_inputs(5);
    let exact = model.predict(&inputs).unwrap();
    assert_eq!(evaluate(&model, &inputs, &exact).unwrap().overall_mae, 0.0);
}
