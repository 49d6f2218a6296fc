//! Training loop, transfer extension and network-level contracts.
#![allow(clippy::single_range_in_vec_init)]

use proptest::prelude::*;
use voxhomog_core::nn::arch::{ConvSpec, FcSpec};
use voxhomog_core::nn::*;
use voxhomog_core::voxel::PhaseGrid;

fn tiny_arch() -> NetworkArch {
    NetworkArch {
        input_n: 9,
        convs: vec![ConvSpec { filters: 2, kernel: 3, pool: true }],
        fcs: vec![
            FcSpec { width: 6, activation: Activation::Sigmoid },
            FcSpec { width: OUTPUT_DIM, activation: Activation::Sigmoid },
        ],
    }
}

fn volume(n: usize, k: usize) -> Vec<f32> {
    (0..n * n * n).map(|i| ((i * 31 + k * 17) % 7 < 2) as u8 as f32).collect()
}

fn target(k: usize) -> Vec<f32> {
    (0..OUTPUT_DIM).map(|l| 0.2 + 0.05 * ((l + 3 * k) % 9) as f32).collect()
}

struct Toy {
    xs: Vec<Vec<f32>>,
    ts: Vec<Vec<f32>>,
}

impl Toy {
    fn new(n: usize, count: usize, offset: usize) -> Self {
        Toy {
            xs: (0..count).map(|k| volume(n, k + offset)).collect(),
            ts: (0..count).map(|k| target(k + offset)).collect(),
        }
    }
    fn x(&self) -> Vec<&[f32]> {
        self.xs.iter().map(|v| v.as_slice()).collect()
    }
    fn t(&self) -> Vec<&[f32]> {
        self.ts.iter().map(|v| v.as_slice()).collect()
    }
}

fn run(net: &mut Network<f32>, train_set: &Toy, val: &Toy, cfg: &TrainConfig) -> TrainOutcome<f32> {
    train(net, &train_set.x(), &train_set.t(), &val.x(), &val.t(), cfg, None, &mut |_| {}).unwrap()
}

#[test]
fn one_step_reduces_training_loss() {
    let data = Toy::new(9, 2, 0);
    let mut net = Network::<f32>::new(tiny_arch(), 3).unwrap();
    let before = net.loss_from(0, &data.x(), &data.t()).unwrap();
    let (_, g) = net.batch_gradient(0, &data.x(), &data.t()).unwrap();
    let mut adam = AdamState::new(AdamConfig::default(), net.n_params());
    let n = net.n_params();
    adam.update(net.params_mut(), &g, &[0..n]).unwrap();
    let after = net.loss_from(0, &data.x(), &data.t()).unwrap();
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn training_is_deterministic_and_keeps_best_epoch() {
    let train_set = Toy::new(9, 12, 0);
    let val = Toy::new(9, 4, 100);
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 5,
        patience: None,
        seed: 9,
        ..Default::default()
    };
    let mut a = Network::<f32>::new(tiny_arch(), 1).unwrap();
    let mut b = Network::<f32>::new(tiny_arch(), 1).unwrap();
    let ra = run(&mut a, &train_set, &val, &cfg);
    let rb = run(&mut b, &train_set, &val, &cfg);
    assert_eq!(ra.log, rb.log);
    assert_eq!(a.params(), b.params());
    assert_eq!(ra.log.epochs.len(), 30);

    let best = ra.log.epochs[ra.log.best_epoch - 1].val_loss;
    assert_eq!(best, ra.log.best_val_loss);
    assert!(ra.log.epochs.iter().all(|e| e.val_loss >= best));
    assert!(best <= ra.log.epochs.last().unwrap().val_loss);
    // The network holds the best epoch's parameters.
    let v = a.loss_from(0, &val.x(), &val.t()).unwrap() as f64;
    assert_eq!(v, best);
    assert!(ra.log.epochs.last().unwrap().train_loss < ra.log.epochs[0].train_loss);
}

#[test]
fn patience_stops_training() {
    let train_set = Toy::new(9, 6, 0);
    let val = Toy::new(9, 3, 50);
    let cfg = TrainConfig {
        epochs: 500,
        batch_size: 6,
        patience: Some(3),
        adam: AdamConfig {
            lr: 0.5,
            ..Default::default()
        },
        seed: 2,
    };
    let mut net = Network::<f32>::new(tiny_arch(), 4).unwrap();
    let out = run(&mut net, &train_set, &val, &cfg);
    assert!(out.log.stopped_early);
    assert_eq!(out.log.epochs.len(), out.log.best_epoch + 3);
}

#[test]
fn empty_splits_are_rejected() {
    let data = Toy::new(9, 2, 0);
    let mut net = Network::<f32>::new(tiny_arch(), 4).unwrap();
    let r = train(&mut net, &[], &[], &data.x(), &data.t(), &TrainConfig::default(), None, &mut |_| {});
    assert!(matches!(r, Err(voxhomog_core::Error::EmptySplit(_))));
    let r = train(&mut net, &data.x(), &data.t(), &[], &[], &TrainConfig::default(), None, &mut |_| {});
    assert!(matches!(r, Err(voxhomog_core::Error::EmptySplit(_))));
}

#[test]
fn untrained_desk_network_golden_output() {
    let arch = Preset::Desk.arch(33, &Pooling::Every, Activation::Sigmoid).unwrap();
    let net = Network::<f32>::new(arch, 2024).unwrap();
    let mut grid = PhaseGrid::filled(33, 1.0, 0).unwrap();
    for k in 10..20 {
        for j in 5..25 {
            for i in 12..16 {
                grid.set(i, j, k, 1);
            }
        }
    }
    let y = net.predict_grid(&grid).unwrap();
    assert_eq!(y.len(), OUTPUT_DIM);
    assert_eq!(y, net.predict_grid(&grid.clone()).unwrap());
    let golden = [
        0.5075774, 0.22515133, 0.5226825, 0.45730254, 0.40248433, 0.46832922, 0.36899418, 0.6332015, 0.6048891,
        0.441375, 0.40932387, 0.6629738,
    ];
    for (a, g) in y.iter().zip(golden) {
        assert!((a - g).abs() <= 1e-6, "{a} vs {g}");
    }
}

#[test]
fn transfer_extension_copies_and_freezes() {
    let base_arch = Preset::Desk.arch(33, &Pooling::Every, Activation::Sigmoid).unwrap();
    let base = Network::<f32>::new(base_arch, 7).unwrap();
    let spec = TransferSpec::default();
    let tl = extend_for_transfer(&base, &spec, 8).unwrap();
    let arch = tl.arch();
    assert_eq!(arch.convs.len(), 3);
    assert!(!arch.convs[2].pool);
    assert_eq!(tl.trace().flatten, 32);
    assert_eq!(tl.trainable(), &[false, false, true, false, true, true]);
    let (bl, nl) = (base.layout(), tl.layout());
    for s in 0..2 {
        assert_eq!(&base.params()[bl[s].range()], &tl.params()[nl[s].range()]);
    }
    // FC 2000 -> 32 cannot be copied; FC 32 -> 16 and the output can.
    assert_ne!(nl[3].weights.len(), bl[2].weights.len());
    assert_eq!(&base.params()[bl[3].range()], &tl.params()[nl[4].range()]);
    assert_eq!(&base.params()[bl[4].range()], &tl.params()[nl[5].range()]);

    // From scratch with the same seed differs only in copied stages.
    let ts = Network::<f32>::new(arch.clone(), 8).unwrap();
    assert_eq!(&ts.params()[nl[2].range()], &tl.params()[nl[2].range()]);
    assert_eq!(&ts.params()[nl[3].range()], &tl.params()[nl[3].range()]);

    let small = Preset::Desk.arch(33, &Pooling::Every, Activation::Sigmoid).unwrap();
    let too_big = TransferSpec { kernel: 7, ..spec };
    assert!(matches!(
        extend_for_transfer(&Network::<f32>::new(small, 1).unwrap(), &too_big, 1),
        Err(voxhomog_core::Error::ShapeMismatch(_))
    ));
}

#[test]
fn frozen_stages_stay_bit_identical() {
    let base = Network::<f32>::new(tiny_arch(), 5).unwrap();
    let spec = TransferSpec {
        filters: 3,
        kernel: 3,
        scope: TrainableScope::Head,
    };
    let mut tl = extend_for_transfer(&base, &spec, 6).unwrap();
    let before = tl.params().to_vec();
    let train_set = Toy::new(9, 8, 0);
    let val = Toy::new(9, 3, 40);
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 4,
        patience: None,
        seed: 1,
        ..Default::default()
    };
    run(&mut tl, &train_set, &val, &cfg);
    for (l, &t) in tl.layout().iter().zip(tl.trainable()) {
        let same = before[l.range()] == tl.params()[l.range()];
        assert_eq!(same, !t);
    }
}

proptest! {
    #[test]
    fn scaling_round_trip(raw in prop::collection::vec(
        (prop::array::uniform6(1.0f64..500.0), prop::array::uniform6(0.01f64..0.49)), 2..20)
    ) {
        let labels: Vec<[f64; 12]> = raw.iter().map(|(m, p)| {
            let mut l = [0.0; 12];
            l[..6].copy_from_slice(m);
            l[6..].copy_from_slice(p);
            l
        }).collect();
        match LabelScaler::fit(&labels) {
            Ok(s) => {
                for l in &labels {
                    let back = s.unscale(&s.scale(l));
                    for (a, b) in back.iter().zip(l) {
                        prop_assert!((a - b).abs() <= 1e-6 * b.abs());
                    }
                    prop_assert!(s.scale(l).iter().all(|v| (0.0..=1.0).contains(v)));
                }
            }
            Err(e) => prop_assert_eq!(e, voxhomog_core::Error::DegenerateRange("moduli")),
        }
    }

    #[test]
    fn loss_is_permutation_invariant(
        rows in prop::collection::vec((prop::array::uniform12(0.0f64..1.0), prop::array::uniform12(0.0f64..1.0)), 1..12),
        seed in any::<u64>(),
    ) {
        let pred: Vec<[f64; 12]> = rows.iter().map(|r| r.0).collect();
        let truth: Vec<[f64; 12]> = rows.iter().map(|r| r.1).collect();
        let mut idx: Vec<usize> = (0..rows.len()).collect();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(&mut idx[..], &mut rng);
        let p2: Vec<[f64; 12]> = idx.iter().map(|&i| pred[i]).collect();
        let t2: Vec<[f64; 12]> = idx.iter().map(|&i| truth[i]).collect();
        let a = mse_loss(&pred, &truth).unwrap();
        let b = mse_loss(&p2, &t2).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }
}
