use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sarcon::data::cbf;
use sarcon::nn::{Mode, Parameterized};
use sarcon::train::{
    class_weights, load_checkpoint, save_checkpoint, weighted_cross_entropy, AdamState, Checkpoint, Monitor,
    PlateauSchedule, TrainConfig, Trainer,
};
use sarcon::{Architecture, ConvSpec, Error, ModelConfig, SarconModel, Tape, Tensor};

fn small_config(length: usize) -> ModelConfig {
    ModelConfig {
        conv_layers: vec![
            ConvSpec { filters: 4, width: 8 },
            ConvSpec { filters: 6, width: 5 },
            ConvSpec { filters: 4, width: 3 },
        ],
        lstm_hidden: 4,
        attention_hidden: 6,
        attention_hops: 3,
        dense_hidden: 12,
        ssa_features: 4,
        ..ModelConfig::new(length, 3)
    }
}

fn quick_train_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn schedule_matches_repeated_cube_root_division() {
    let mut expected = 1e-3;
    for k in 0..=10 {
        let got = PlateauSchedule::rate_after(1e-3, k);
        assert!((got - expected).abs() <= 1e-15 * expected, "k={k}: {got} vs {expected}");
        expected /= 2f64.cbrt();
    }
    assert!(PlateauSchedule::rate_after(1e-3, 9) >= 1e-4);
    assert!(PlateauSchedule::rate_after(1e-3, 10) < 1e-4);
}

#[test]
fn schedule_never_exceeds_ten_reductions() {
    let mut s = PlateauSchedule::new(1e-3, 1e-4, 1);
    let mut seen = vec![s.rate()];
    for _ in 0..100 {
        let r = s.observe(5.0);
        if r != *seen.last().unwrap() {
            seen.push(r);
        }
    }
    assert_eq!(seen.len(), 11);
    for (k, r) in seen.iter().enumerate() {
        assert_eq!(*r, PlateauSchedule::rate_after(1e-3, k as u32));
    }
}

proptest! {
    #[test]
    fn class_weights_balance_exactly(labels in proptest::collection::vec(0usize..4, 4..60)) {
        let classes = 4;
        prop_assume!((0..classes).all(|c| labels.contains(&c)));
        let w: Vec<BigRational> = class_weights(&labels, classes).unwrap();
        let mut total = BigRational::zero();
        for (c, wc) in w.iter().enumerate() {
            let n_c = labels.iter().filter(|&&y| y == c).count();
            total += wc * BigRational::from_integer(n_c.into());
        }
        prop_assert_eq!(total, BigRational::from_integer(labels.len().into()));
        let wf: Vec<f64> = class_weights(&labels, classes).unwrap();
        let sum: f64 = wf.iter().enumerate().map(|(c, w)| w * labels.iter().filter(|&&y| y == c).count() as f64).sum();
        prop_assert!((sum - labels.len() as f64).abs() < 1e-9);
    }
}

#[test]
fn balanced_weights_are_one_in_rationals() {
    let w: Vec<BigRational> = class_weights(&[0, 1, 2, 2, 1, 0], 3).unwrap();
    assert!(w.iter().all(One::is_one));
}

#[test]
fn zero_epochs_leave_the_model_untouched() {
    let data = cbf(4, 32, 1).unwrap();
    let model = SarconModel::<f64>::build(small_config(32), 2).unwrap();
    let mut trainer = Trainer::new(model.clone(), quick_train_config(0)).unwrap();
    trainer.fit(&data).unwrap();
    assert_eq!(trainer.model, model);
    assert!(trainer.history.is_empty());
}

#[test]
fn mismatched_dataset_is_a_config_error() {
    let data = cbf(4, 40, 1).unwrap();
    let model = SarconModel::<f64>::build(small_config(32), 2).unwrap();
    let mut trainer = Trainer::new(model, quick_train_config(1)).unwrap();
    assert!(matches!(trainer.fit(&data), Err(Error::Config(_))));
}

#[test]
fn same_seed_gives_identical_history() {
    let data = cbf(6, 32, 3).unwrap();
    let run = || {
        let model = SarconModel::<f32>::build(small_config(32), 9).unwrap();
        let mut t = Trainer::new(model, quick_train_config(3)).unwrap();
        t.fit(&data).unwrap();
        (t.history.to_delimited(), t.model)
    };
    let (h1, m1) = run();
    let (h2, m2) = run();
    assert_eq!(h1, h2);
    assert_eq!(m1, m2);
    assert_eq!(h1.lines().count(), 4);
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let data = cbf(4, 32, 4).unwrap();
    let model = SarconModel::<f64>::build(small_config(32), 1).unwrap();
    let mut t = Trainer::new(model, quick_train_config(2)).unwrap();
    t.fit(&data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.ckpt");
    save_checkpoint(&path, &t.checkpoint()).unwrap();
    let loaded: Checkpoint<f64> = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, t.checkpoint());
    let again = dir.path().join("b.ckpt");
    save_checkpoint(&again, &loaded).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let model = SarconModel::<f64>::build(small_config(16), 1).unwrap();
    let bytes = Trainer::new(model, quick_train_config(1)).unwrap().checkpoint().to_bytes().unwrap();

    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xff;
    assert!(matches!(Checkpoint::<f64>::from_bytes(&bad_magic), Err(Error::Format { .. })));

    let truncated = &bytes[..bytes.len() - 3];
    assert!(matches!(Checkpoint::<f64>::from_bytes(truncated), Err(Error::Format { .. })));

    let mut bad_version = bytes.clone();
    bad_version[8] = 99;
    assert!(matches!(Checkpoint::<f64>::from_bytes(&bad_version), Err(Error::Version(_))));

    assert!(matches!(Checkpoint::<f32>::from_bytes(&bytes), Err(Error::Version(_))));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let data = cbf(6, 32, 8).unwrap();
    let build = || SarconModel::<f32>::build(small_config(32), 21).unwrap();

    let mut straight = Trainer::new(build(), quick_train_config(5)).unwrap();
    straight.fit(&data).unwrap();

    let mut first = Trainer::new(build(), quick_train_config(5)).unwrap();
    first.fit_for(&data, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.ckpt");
    save_checkpoint(&path, &first.checkpoint()).unwrap();
    drop(first);
    let mut resumed = Trainer::from_checkpoint(load_checkpoint::<f32>(&path).unwrap()).unwrap();
    resumed.fit(&data).unwrap();

    assert_eq!(resumed.history, straight.history);
    assert_eq!(resumed.model, straight.model);
}

#[test]
fn training_loss_monitor_uses_all_series() {
    let data = cbf(3, 32, 2).unwrap();
    let model = SarconModel::<f64>::build(small_config(32), 2).unwrap();
    let config = TrainConfig {
        monitor: Monitor::TrainingLoss,
        ..quick_train_config(1)
    };
    let mut t = Trainer::new(model, config).unwrap();
    t.fit(&data).unwrap();
    let r = &t.history.records[0];
    assert_eq!(r.val_score, r.loss);
}

#[test]
fn fixed_batch_loss_does_not_increase_with_small_steps() {
    let data = cbf(4, 64, 6).unwrap();
    for arch in [Architecture::Sarcon, Architecture::FcnOnly] {
        let mut model = SarconModel::<f64>::build(ModelConfig { architecture: arch, ..small_config(64) }, 3).unwrap();
        let mut adam = AdamState::new(model.parameters());
        let mut previous = f64::INFINITY;
        for step in 0..20 {
            let tape = Tape::new();
            let vars = model.bind(&tape, true).unwrap();
            let inputs: Vec<_> = data
                .series()
                .iter()
                .map(|s| tape.constant(Tensor::from_f64(&[1, 64], s).unwrap()))
                .collect();
            // A fixed dropout mask keeps the objective identical across steps.
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let logits = model.forward(&vars, &inputs, Mode::Train, &mut rng).unwrap();
            let loss = weighted_cross_entropy(logits.softmax(1).unwrap(), data.labels(), None)
                .unwrap()
                .scale(1.0 / data.len() as f64)
                .unwrap();
            let value = loss.value().data()[0];
            assert!(value <= previous, "{arch:?} step {step}: {value} > {previous}");
            previous = value;
            let mut grads = tape.backward(loss).unwrap();
            let g: Vec<_> = vars.leaves().iter().map(|&v| grads.take(v).unwrap()).collect();
            adam.step(model.parameters_mut(), &g, 1e-4).unwrap();
        }
    }
}
