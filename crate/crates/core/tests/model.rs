use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarcon::gradcheck::{self, Coords};
use sarcon::nn::{Mode, Parameterized};
use sarcon::train::weighted_cross_entropy;
use sarcon::{Architecture, ConvSpec, ModelConfig, SarconModel, Tape, Tensor};

fn small(arch: Architecture) -> ModelConfig {
    ModelConfig {
        architecture: arch,
        conv_layers: vec![
            ConvSpec { filters: 4, width: 8 },
            ConvSpec { filters: 6, width: 5 },
            ConvSpec { filters: 4, width: 3 },
        ],
        lstm_hidden: 4,
        attention_hidden: 6,
        attention_hops: 3,
        dense_hidden: 10,
        ssa_features: 4,
        dropout: 0.5,
        ..ModelConfig::new(12, 3)
    }
}

fn series(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
}

/// Puts every batch-norm layer through one train-mode update so infer
/// mode is available.
fn warm_up(model: &mut SarconModel<f64>, xs: &[Vec<f64>]) {
    let tape = Tape::new();
    let vars = model.bind(&tape, false).unwrap();
    let inputs: Vec<_> = xs.iter().map(|s| model.input(&tape, s).unwrap()).collect();
    model.forward(&vars, &inputs, Mode::Train, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
}

#[test]
fn default_fcn_branch_parameter_count() {
    let model = SarconModel::<f32>::build(ModelConfig::new(64, 2), 0).unwrap();
    let closed_form = (8 * 128 + 128) + (128 * 5 * 256 + 256) + (256 * 3 * 128 + 128) + 2 * (128 + 256 + 128);
    let enumerated: usize = model.blocks.iter().flat_map(|b| b.parameters()).map(|p| p.len()).sum();
    assert_eq!(model.fcn_parameter_count(), closed_form);
    assert_eq!(enumerated, closed_form);
    assert_eq!(model.config.embedding_width(), 3840);
    assert_eq!(model.ssa.as_ref().unwrap().dense_hidden.inputs(), 3840);
    assert_eq!(model.head.as_ref().unwrap().inputs(), 256);
    assert_eq!(model.head.as_ref().unwrap().outputs(), 2);
}

#[test]
fn probabilities_are_normalised_and_infer_is_pure() {
    let mut model = SarconModel::<f64>::build(small(Architecture::Sarcon), 3).unwrap();
    let xs = series(5, 12, 1);
    warm_up(&mut model, &xs);
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let p = model.predict_proba(&refs).unwrap();
    for row in p.data().chunks(3) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
    assert_eq!(p, model.predict_proba(&refs).unwrap());
}

#[test]
fn zero_head_gives_uniform_probabilities() {
    let mut model = SarconModel::<f64>::build(small(Architecture::Sarcon), 4).unwrap();
    let xs = series(2, 12, 2);
    warm_up(&mut model, &xs);
    let head = model.head.as_mut().unwrap();
    head.weight = Tensor::zeros(head.weight.shape());
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    for &v in model.predict_proba(&refs).unwrap().data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn fcn_only_shares_the_pooled_features() {
    let mut full = SarconModel::<f64>::build(small(Architecture::Sarcon), 5).unwrap();
    let xs = series(3, 12, 3);
    warm_up(&mut full, &xs);
    let mut fcn = SarconModel::<f64>::build(small(Architecture::FcnOnly), 99).unwrap();
    fcn.blocks = full.blocks.clone();
    fcn.fcn_head = full.fcn_head.clone();

    let tape = Tape::new();
    let fv = full.bind(&tape, false).unwrap();
    let ov = fcn.bind(&tape, false).unwrap();
    let inputs: Vec<_> = xs.iter().map(|s| full.input(&tape, s).unwrap()).collect();
    let a = full.trace_infer(&fv, &inputs, Architecture::Sarcon).unwrap();
    let b = fcn.trace_infer(&ov, &inputs, Architecture::FcnOnly).unwrap();
    assert_eq!(a.fcn_pooled.value(), b.fcn_pooled.value());
    let c = full.trace_infer(&fv, &inputs, Architecture::FcnOnly).unwrap();
    assert_eq!(b.logits.value(), c.logits.value());
}

#[test]
fn empty_series_is_rejected() {
    let model = SarconModel::<f64>::build(small(Architecture::Sarcon), 1).unwrap();
    assert!(model.logits(&[&[]]).is_err());
}

#[test]
fn end_to_end_gradients_on_sampled_parameters() {
    for arch in [Architecture::Sarcon, Architecture::FcnOnly] {
        let model = SarconModel::<f64>::build(small(arch), 11).unwrap();
        let xs = series(3, 12, 4);
        let labels = [0, 2, 1];
        let params: Vec<Tensor<f64>> = model.parameters().into_iter().cloned().collect();
        let coords = Coords::Sample { fraction: 0.01, seed: 1 };
        let report = gradcheck::check(&params, 1e-5, coords, |tape, leaves| {
            let mut m = model.clone();
            let vars = m.bind_leaves(tape, leaves.to_vec())?;
            let inputs = xs.iter().map(|s| m.input(tape, s)).collect::<sarcon::Result<Vec<_>>>()?;
            // Same dropout mask on every evaluation.
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let logits = m.forward(&vars, &inputs, Mode::Train, &mut rng)?;
            weighted_cross_entropy(logits.softmax(1)?, &labels, Some(&[1.0, 1.5, 0.7]))
        })
        .unwrap();
        assert!(!report.probes.is_empty());
        assert!(report.max_relative_error() < 1e-3, "{arch:?}: {:?}", report.worst());
    }
}
