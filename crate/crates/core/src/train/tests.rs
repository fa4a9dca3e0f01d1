use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trainer::validate;
use super::*;
use crate::error::Error;
use crate::model::{checkpoint, forward, ArchConfig, ModelParams};
use crate::spectral::{default_response, gen_synthetic_scene, render_rgb, Dataset};
use crate::tensor::{Graph, Tensor};

fn l1(pred: &[f32], gt: &[f32]) -> f32 {
    let mut g = Graph::new();
    let p = g.constant(Tensor::new([1, 1, 1, pred.len()], pred.to_vec()).unwrap());
    let t = g.constant(Tensor::new([1, 1, 1, gt.len()], gt.to_vec()).unwrap());
    let loss = l1_loss(&mut g, p, t).unwrap();
    g.value(loss).data()[0]
}

#[test]
fn l1_loss_cases() {
    assert_eq!(l1(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
    assert!((l1(&[1.25, 0.5], &[1.0, 0.25]) - 0.25).abs() < 1e-7);
    assert_eq!(l1(&[1.0, 2.0], &[2.0, 4.0]), 1.5);
    let mut g = Graph::<f32>::new();
    let a = g.constant(Tensor::zeros([1, 1, 1, 2]));
    let b = g.constant(Tensor::zeros([1, 1, 1, 3]));
    assert!(matches!(l1_loss(&mut g, a, b), Err(Error::Shape(_))));
}

#[test]
fn lr_schedule_values() {
    assert_eq!(lr_at(0, 1e-4, 3000), 1e-4);
    assert_eq!(lr_at(2999, 1e-4, 3000), 1e-4);
    assert_eq!(lr_at(3000, 1e-4, 3000), 5e-5);
    assert_eq!(lr_at(6000, 1e-4, 3000), 2.5e-5);
    let cfg = TrainConfig::default();
    assert_eq!((cfg.lr_at(99), cfg.lr_at(100)), (1e-3, 5e-4));
}

proptest! {
    #[test]
    fn lr_schedule_matches_repeated_halving(epoch in 0u64..=1_000_000, half in 1100u64..10_000) {
        let mut lr = 1e-4;
        for _ in 0..epoch / half {
            lr /= 2.0;
        }
        prop_assert_eq!(lr_at(epoch, 1e-4, half), lr);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged(seed in any::<u64>(), steps in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = BTreeMap::new();
        params.insert("a".to_string(), Tensor::<f32>::uniform([2, 3, 1, 1], -1.0, 1.0, &mut rng));
        params.insert("b".to_string(), Tensor::<f32>::uniform([1, 1, 1, 1], -1.0, 1.0, &mut rng));
        let before = params.clone();
        let mut state = AdamState::new(&params);
        state.t = steps;
        let grads: HashMap<String, Tensor<f32>> = params.iter().map(|(k, v)| (k.clone(), Tensor::zeros(v.shape()))).collect();
        adam_step(&mut params, &grads, &mut state, 1e-3, &AdamConfig::default()).unwrap();
        prop_assert_eq!(&params, &before);
        adam_step(&mut params, &HashMap::new(), &mut state, 1e-3, &AdamConfig::default()).unwrap();
        prop_assert_eq!(params, before);
    }
}

#[test]
fn first_adam_step_by_hand() {
    let mut params = BTreeMap::new();
    params.insert("theta".to_string(), Tensor::<f64>::scalar(1.0));
    let mut grads = HashMap::new();
    grads.insert("theta".to_string(), Tensor::<f64>::scalar(1.0));
    let mut state = AdamState::new(&params);
    adam_step(&mut params, &grads, &mut state, 1e-4, &AdamConfig::default()).unwrap();
    // m̂ = 1 and v̂ = 1 after bias correction.
    let expected = 1.0 - 1e-4 / (1.0 + 1e-8);
    assert!((params["theta"].data()[0] - expected).abs() < 1e-15);
    assert_eq!(state.t, 1);
    assert_eq!(state.m["theta"], vec![0.5]);
    assert!((state.v["theta"][0] - 0.001).abs() < 1e-15);
}

#[test]
fn non_finite_gradient_names_the_parameter() {
    let mut params = BTreeMap::new();
    params.insert("level1.head.bias".to_string(), Tensor::<f32>::zeros([2, 1, 1, 1]));
    let before = params.clone();
    let mut grads = HashMap::new();
    grads.insert("level1.head.bias".to_string(), Tensor::new([2, 1, 1, 1], vec![0.0, f32::NAN]).unwrap());
    let mut state = AdamState::new(&params);
    match adam_step(&mut params, &grads, &mut state, 1e-4, &AdamConfig::default()) {
        Err(Error::Training(m)) => assert!(m.contains("level1.head.bias"), "{m}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(params, before);
    assert_eq!(state.t, 0);
}

fn record(epoch: u64, mrae: f64) -> EpochRecord {
    EpochRecord {
        epoch,
        loss: 0.1,
        lr: 1e-4,
        mrae,
        rmse: 0.0,
        bpmrae: 0.0,
        path: None,
    }
}

fn log_of(mraes: &[f64]) -> TrainLog {
    let mut log = TrainLog::default();
    for (i, &m) in mraes.iter().enumerate() {
        log.push(record(i as u64 + 1, m)).unwrap();
    }
    log
}

#[test]
fn best_epoch_selection() {
    assert_eq!(select_best_epoch(&log_of(&[0.7])).unwrap().epoch, 1);
    assert_eq!(select_best_epoch(&log_of(&[0.5, 0.3, 0.4])).unwrap().epoch, 2);
    assert_eq!(select_best_epoch(&log_of(&[0.3, 0.3])).unwrap().epoch, 2);
    assert_eq!(select_best_epoch(&log_of(&[0.4, f64::NAN])).unwrap().epoch, 1);
    assert!(matches!(select_best_epoch(&TrainLog::default()), Err(Error::Config(_))));
}

#[test]
fn log_csv_round_trip() {
    let mut log = log_of(&[0.5, 0.25]);
    log.records[1].path = Some("runs/epoch_00002.hrck".into());
    let mut buf = Vec::new();
    log.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("epoch,loss,lr,mrae,rmse,bpmrae,path\n"), "{text}");
    assert_eq!(TrainLog::read_csv(buf.as_slice()).unwrap(), log);
    assert!(log.push(record(2, 0.1)).is_err());
}

#[test]
fn config_parsing() {
    let cfg = RunConfig::from_toml("").unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.arch.base_width, 16);
    assert_eq!((cfg.train.epochs, cfg.train.lr_half_every, cfg.train.batch_size, cfg.train.patch_size), (300, 100, 4, 32));
    assert_eq!((cfg.train.adam.beta1, cfg.train.adam.beta2, cfg.train.adam.eps), (0.5, 0.999, 1e-8));
    let custom = RunConfig::from_toml(
        "[train]\nepochs = 5\ntrack = \"real\"\n[train.adam]\nbeta1 = 0.9\n[arch]\nwidth_scale = 0.25\n",
    )
    .unwrap();
    assert_eq!(custom.train.epochs, 5);
    assert_eq!(custom.train.adam.beta1, 0.9);
    assert_eq!(custom.arch.width_scale, crate::model::WidthScale::Quarter);
    assert_eq!(RunConfig::from_toml(&custom.to_toml()).unwrap(), custom);
    assert!(matches!(RunConfig::from_toml("[train]\nepoch = 5\n"), Err(Error::Config(_))));
    let bad = TrainConfig {
        patch_size: 12,
        ..TrainConfig::default()
    };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
}

fn tiny_set(seeds: std::ops::Range<u64>, size: usize) -> Dataset {
    let resp = default_response();
    let cubes: Vec<_> = seeds.clone().map(|s| gen_synthetic_scene(s, size, size).unwrap()).collect();
    let rgb = cubes.iter().map(|c| render_rgb(c, &resp)).collect();
    Dataset::new(seeds.map(|s| format!("scene{s}")).collect(), rgb, cubes, resp).unwrap()
}

fn tiny_cfg(epochs: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        base_lr: 1e-3,
        lr_half_every: 2,
        batch_size: 2,
        patch_size: 16,
        seed: 5,
        checkpoint_every: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_returns_initial_parameters() {
    let arch = ArchConfig::tiny();
    let out = train_on(&tiny_cfg(0), &arch, &tiny_set(0..2, 16), &tiny_set(10..11, 16), |_| {}).unwrap();
    assert!(out.log.records.is_empty());
    assert_eq!(out.final_params, ModelParams::init(&arch, 5).unwrap());
    assert_eq!(out.best_params, out.final_params);
}

#[test]
fn training_is_reproducible_and_logged() {
    let arch = ArchConfig::tiny();
    let (train_set, val_set) = (tiny_set(0..4, 24), tiny_set(10..12, 16));
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        out_dir: Some(dir.path().to_path_buf()),
        ..tiny_cfg(3)
    };
    let mut seen = Vec::new();
    let a = train_on(&cfg, &arch, &train_set, &val_set, |r| seen.push(r.epoch)).unwrap();
    let b = train_on(&tiny_cfg(3), &arch, &train_set, &val_set, |_| {}).unwrap();
    assert_eq!(seen, [1, 2, 3]);
    assert_eq!(a.final_params, b.final_params);
    assert_ne!(a.final_params, ModelParams::init(&arch, 5).unwrap());
    for r in &a.log.records {
        assert_eq!(r.lr, cfg.lr_at(r.epoch - 1));
        assert!(r.loss.is_finite() && r.mrae.is_finite());
    }
    let paths: Vec<_> = a.log.records.iter().map(|r| r.path.is_some()).collect();
    assert_eq!(paths, [false, true, true]);
    let last = checkpoint::load(a.log.records[2].path.as_ref().unwrap()).unwrap();
    assert_eq!(last, a.final_params);
    let best = checkpoint::load(&dir.path().join(BEST_FILE)).unwrap();
    assert_eq!(best, a.best_params);
    let chosen = select_best_epoch(&a.log).unwrap();
    let rescored = validate(&a.best_params, &val_set, cfg.metric_eps).unwrap();
    assert_eq!(rescored.mrae, chosen.mrae);
    assert_eq!(TrainLog::load(&dir.path().join(LOG_FILE)).unwrap(), a.log);
}

#[test]
fn training_rejects_bad_inputs() {
    let arch = ArchConfig::tiny();
    let set = tiny_set(0..2, 16);
    let big_patch = TrainConfig {
        patch_size: 24,
        ..tiny_cfg(1)
    };
    assert!(matches!(train_on(&big_patch, &arch, &set, &set, |_| {}), Err(Error::Shape(_))));
    let empty = Dataset::new(vec![], vec![], vec![], default_response()).unwrap();
    assert!(matches!(train_on(&tiny_cfg(1), &arch, &empty, &set, |_| {}), Err(Error::Config(_))));
    let missing = TrainConfig {
        train_data: "/nonexistent/train".into(),
        ..tiny_cfg(1)
    };
    assert!(matches!(train(&missing, &arch, |_| {}), Err(Error::Io { .. })));
}

fn batch_loss(params: &ModelParams<f32>, x: &Tensor<f32>, y: &Tensor<f32>) -> (f64, HashMap<String, Tensor<f32>>) {
    let mut g = Graph::new();
    let bound = params.bind_graph(&mut g, true);
    let xv = g.constant(x.clone());
    let yv = g.constant(y.clone());
    let pred = forward(&mut g, &params.arch, &bound, &xv).unwrap();
    let loss = l1_loss(&mut g, pred, yv).unwrap();
    let value = g.value(loss).data()[0] as f64;
    let mut grads = g.backward(loss).unwrap();
    let grads = bound.into_iter().filter_map(|(k, v)| grads.take(v).map(|t| (k, t))).collect();
    (value, grads)
}

#[test]
fn one_small_step_does_not_increase_batch_loss() {
    let arch = ArchConfig::tiny();
    let resp = default_response();
    let mut failures = 0;
    for case in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(case);
        let params = ModelParams::<f32>::init(&arch, case).unwrap();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for _ in 0..2 {
            let cube = gen_synthetic_scene(rng.random(), 16, 16).unwrap();
            xs.push(render_rgb(&cube, &resp).to_tensor());
            ys.push(cube.to_tensor());
        }
        let (x, y) = (Tensor::stack(&xs).unwrap(), Tensor::stack(&ys).unwrap());
        let (before, grads) = batch_loss(&params, &x, &y);
        let mut stepped = params.clone();
        let mut state = AdamState::new(&stepped.tensors);
        adam_step(&mut stepped.tensors, &grads, &mut state, 1e-5, &AdamConfig::default()).unwrap();
        let (after, _) = batch_loss(&stepped, &x, &y);
        if after > before {
            failures += 1;
        }
    }
    assert!(failures <= 1, "{failures} of 20 steps increased the loss");
}
