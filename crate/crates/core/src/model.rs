//! The two-branch network and its FCN-only baseline.
//!
//! SSA branch: LSTM over the raw series, structured self-attention,
//! flattened sequence embedding, dense(2000) + ReLU + dropout, dense(128).
//! FCN branch: three conv blocks and global average pooling. The two
//! feature vectors are concatenated (SSA first) and fed to the softmax
//! classifier head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    self, attention_matrix, dense_forward, dropout_forward, global_avg_pool, lstm_forward, sequence_embedding,
    AttentionParams, AttentionVars, BatchNormState, ConvBlockParams, ConvBlockVars, DenseParams, DenseVars,
    LstmParams, LstmVariant, LstmVars, Mode, Parameterized,
};
use crate::scalar::Scalar;
use crate::tensor::{kernels, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// SSA and FCN branches joined at the classifier.
    #[default]
    Sarcon,
    /// FCN branch with its own classifier.
    FcnOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_length: usize,
    pub classes: usize,
    pub architecture: Architecture,
    pub conv_layers: Vec<ConvSpec>,
    pub lstm_hidden: usize,
    pub lstm_variant: LstmVariant,
    /// Hidden attention size `s`.
    pub attention_hidden: usize,
    /// Number of attention rows `t`.
    pub attention_hops: usize,
    pub dense_hidden: usize,
    pub ssa_features: usize,
    pub dropout: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl ModelConfig {
    /// Default architecture for the given series length and class count.
    pub fn new(input_length: usize, classes: usize) -> Self {
        ModelConfig {
            input_length,
            classes,
            architecture: Architecture::Sarcon,
            conv_layers: vec![
                ConvSpec { filters: 128, width: 8 },
                ConvSpec { filters: 256, width: 5 },
                ConvSpec { filters: 128, width: 3 },
            ],
            lstm_hidden: 128,
            lstm_variant: LstmVariant::Standard,
            attention_hidden: 350,
            attention_hops: 30,
            dense_hidden: 2000,
            ssa_features: 128,
            dropout: 0.8,
            bn_eps: 1e-5,
            bn_momentum: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let extents = [
            ("input_length", self.input_length),
            ("lstm_hidden", self.lstm_hidden),
            ("attention_hidden", self.attention_hidden),
            ("attention_hops", self.attention_hops),
            ("dense_hidden", self.dense_hidden),
            ("ssa_features", self.ssa_features),
        ];
        if let Some((name, _)) = extents.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.classes)));
        }
        if self.conv_layers.is_empty() || self.conv_layers.iter().any(|c| c.filters == 0 || c.width == 0) {
            return Err(Error::Config("conv layers need positive filters and widths".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if !(self.bn_eps > 0.0) || !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(Error::Config("batch-norm eps must be positive and momentum in [0, 1)".into()));
        }
        Ok(())
    }

    /// Width of the flattened sequence embedding, `t * n`.
    pub fn embedding_width(&self) -> usize {
        self.attention_hops * self.lstm_hidden
    }

    pub fn fcn_features(&self) -> usize {
        self.conv_layers.last().map_or(0, |c| c.filters)
    }

    /// Input width of the joint classifier head.
    pub fn head_width(&self) -> usize {
        self.ssa_features + self.fcn_features()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsaBranch<T> {
    pub lstm: LstmParams<T>,
    pub attention: AttentionParams<T>,
    pub dense_hidden: DenseParams<T>,
    pub dense_out: DenseParams<T>,
}

impl<T: Scalar> Parameterized<T> for SsaBranch<T> {
    fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut p = self.lstm.parameters();
        p.extend(self.attention.parameters());
        p.extend(self.dense_hidden.parameters());
        p.extend(self.dense_out.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = self.lstm.parameters_mut();
        p.extend(self.attention.parameters_mut());
        p.extend(self.dense_hidden.parameters_mut());
        p.extend(self.dense_out.parameters_mut());
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SarconModel<T> {
    pub config: ModelConfig,
    /// Present for [`Architecture::Sarcon`].
    pub ssa: Option<SsaBranch<T>>,
    pub blocks: Vec<ConvBlockParams<T>>,
    /// Joint head over `[ssa features | fcn features]`; present with `ssa`.
    pub head: Option<DenseParams<T>>,
    /// Dedicated head over the pooled FCN features.
    pub fcn_head: DenseParams<T>,
}

/// Pieces of a forward pass needed by the interpretability tools.
pub struct Trace<'t, T> {
    pub logits: Var<'t, T>,
    /// Last conv block output per series, `[K, T]`.
    pub fcn_maps: Vec<Var<'t, T>>,
    /// Pooled FCN features, `[B, K]`.
    pub fcn_pooled: Var<'t, T>,
    /// Attention matrix per series, `[t, l]` (SSA branch only).
    pub attention: Vec<Var<'t, T>>,
}

impl<T: Scalar> SarconModel<T> {
    /// Deterministic construction from `seed`.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ssa = (config.architecture == Architecture::Sarcon).then(|| SsaBranch {
            lstm: LstmParams::init(config.lstm_hidden, 1, &mut rng),
            attention: AttentionParams::init(config.lstm_hidden, config.attention_hidden, config.attention_hops, &mut rng),
            dense_hidden: DenseParams::init(config.embedding_width(), config.dense_hidden, &mut rng),
            dense_out: DenseParams::init(config.dense_hidden, config.ssa_features, &mut rng),
        });
        let mut c_in = 1;
        let blocks = config
            .conv_layers
            .iter()
            .map(|spec| {
                let block = ConvBlockParams::init(c_in, spec.filters, spec.width, config.bn_eps, config.bn_momentum, &mut rng);
                c_in = spec.filters;
                block
            })
            .collect();
        let head = ssa
            .is_some()
            .then(|| DenseParams::init(config.head_width(), config.classes, &mut rng));
        let fcn_head = DenseParams::init(config.fcn_features(), config.classes, &mut rng);
        let model = SarconModel {
            config,
            ssa,
            blocks,
            head,
            fcn_head,
        };
        model.check_structure()?;
        Ok(model)
    }

    /// Verifies that every tensor agrees with the configuration.
    pub fn check_structure(&self) -> Result<()> {
        let cfg = &self.config;
        let bad = |what: &str| Err(Error::Config(format!("parameter shapes disagree with config: {what}")));
        if let Some(ssa) = &self.ssa {
            ssa.lstm.validate()?;
            if ssa.lstm.hidden() != cfg.lstm_hidden || ssa.lstm.input() != 1 {
                return bad("lstm");
            }
            if ssa.attention.w1.shape() != [cfg.attention_hidden, cfg.lstm_hidden]
                || ssa.attention.w2.shape() != [cfg.attention_hops, cfg.attention_hidden]
            {
                return bad("attention");
            }
            if ssa.dense_hidden.inputs() != cfg.embedding_width() {
                return bad("flattened embedding width differs from hops x hidden");
            }
            if ssa.dense_hidden.outputs() != cfg.dense_hidden
                || ssa.dense_out.inputs() != cfg.dense_hidden
                || ssa.dense_out.outputs() != cfg.ssa_features
            {
                return bad("ssa dense layers");
            }
            match &self.head {
                Some(h) if h.inputs() == cfg.head_width() && h.outputs() == cfg.classes => {}
                _ => return bad("classifier head"),
            }
        } else if cfg.architecture == Architecture::Sarcon || self.head.is_some() {
            return bad("architecture");
        }
        if self.blocks.len() != cfg.conv_layers.len() {
            return bad("conv block count");
        }
        let mut c_in = 1;
        for (block, spec) in self.blocks.iter().zip(&cfg.conv_layers) {
            if block.kernels.shape() != [spec.filters, spec.width, c_in] || block.bias.len() != spec.filters {
                return bad("conv kernels");
            }
            c_in = spec.filters;
        }
        if self.fcn_head.inputs() != cfg.fcn_features() || self.fcn_head.outputs() != cfg.classes {
            return bad("fcn head");
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    /// Trainable parameter count of the FCN branch (conv kernels, biases
    /// and batch-norm scale/shift).
    pub fn fcn_parameter_count(&self) -> usize {
        self.blocks.iter().map(|b| b.num_parameters()).sum()
    }

    /// Every tensor the model owns, active or not, in a fixed order.
    pub fn all_parameters(&self) -> Vec<&Tensor<T>> {
        let mut p = Vec::new();
        if let Some(ssa) = &self.ssa {
            p.extend(ssa.parameters());
        }
        for b in &self.blocks {
            p.extend(b.parameters());
        }
        if let Some(h) = &self.head {
            p.extend(h.parameters());
        }
        p.extend(self.fcn_head.parameters());
        p
    }

    pub fn all_parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = Vec::new();
        if let Some(ssa) = &mut self.ssa {
            p.extend(ssa.parameters_mut());
        }
        for b in &mut self.blocks {
            p.extend(b.parameters_mut());
        }
        if let Some(h) = &mut self.head {
            p.extend(h.parameters_mut());
        }
        p.extend(self.fcn_head.parameters_mut());
        p
    }

    pub fn bn_states(&self) -> Vec<BatchNormState<T>> {
        self.blocks.iter().map(|b| b.bn.clone()).collect()
    }

    pub fn set_bn_states(&mut self, states: Vec<BatchNormState<T>>) {
        for (block, state) in self.blocks.iter_mut().zip(states) {
            block.bn = state;
        }
    }

    /// Registers the parameters on `tape`.
    pub fn bind<'t>(&self, tape: &'t Tape<T>, trainable: bool) -> Result<ModelVars<'t, T>> {
        let leaves: Vec<Var<'t, T>> = self.parameters().into_iter().map(|p| nn::bind_one(tape, p, trainable)).collect();
        self.bind_leaves(tape, leaves)
    }

    /// Uses caller-registered vars for the trainable parameters (in
    /// [`Parameterized::parameters`] order); inactive tensors become
    /// constants on `tape`.
    pub fn bind_leaves<'t>(&self, tape: &'t Tape<T>, leaves: Vec<Var<'t, T>>) -> Result<ModelVars<'t, T>> {
        let expected = self.parameters();
        if leaves.len() != expected.len() {
            return Err(Error::Contract(format!("expected {} parameter vars, got {}", expected.len(), leaves.len())));
        }
        if let Some((i, _)) = leaves.iter().zip(&expected).enumerate().find(|(_, (v, p))| v.shape() != p.shape()) {
            return Err(Error::dim("bind", format!("parameter {i} has shape {:?}, expected {:?}", leaves[i].shape(), expected[i].shape())));
        }
        let mut it = leaves.iter().copied();
        let mut next = || it.next().expect("count checked");
        let dense = |w: Var<'t, T>, b: Var<'t, T>| DenseVars { weight: w, bias: b };
        let arch = self.config.architecture;
        let ssa = match (&self.ssa, arch) {
            (Some(_), Architecture::Sarcon) => Some(SsaVars {
                lstm: LstmVars::from_leaves((0..12).map(|_| next()).collect())?,
                attention: AttentionVars { w1: next(), w2: next() },
                dense_hidden: dense(next(), next()),
                dense_out: dense(next(), next()),
            }),
            _ => None,
        };
        let blocks = self
            .blocks
            .iter()
            .map(|b| ConvBlockVars {
                kernels: next(),
                bias: next(),
                gamma: next(),
                beta: next(),
                padding: b.padding,
            })
            .collect();
        let (head, fcn_head) = match arch {
            Architecture::Sarcon => (
                Some(dense(next(), next())),
                self.fcn_head.bind(tape, false),
            ),
            Architecture::FcnOnly => (None, dense(next(), next())),
        };
        Ok(ModelVars {
            leaves,
            ssa,
            blocks,
            head,
            fcn_head,
        })
    }

    /// Converts raw series values into the `[1, l]` input var.
    pub fn input<'t>(&self, tape: &'t Tape<T>, series: &[f64]) -> Result<Var<'t, T>> {
        if series.is_empty() {
            return Err(Error::Contract("empty series".into()));
        }
        Ok(tape.constant(Tensor::from_f64(&[1, series.len()], series)?))
    }

    fn run_fcn<'t>(
        &self,
        vars: &ModelVars<'t, T>,
        bn: &mut [BatchNormState<T>],
        series: &[Var<'t, T>],
        mode: Mode,
    ) -> Result<(Vec<Var<'t, T>>, Var<'t, T>)> {
        let mut acts = series.to_vec();
        for (block, state) in vars.blocks.iter().zip(bn.iter_mut()) {
            acts = nn::conv_block_forward_batch(block, state, &acts, mode)?;
        }
        let k = self.config.fcn_features();
        let pooled = acts
            .iter()
            .map(|a| global_avg_pool(*a)?.reshape(&[1, k]))
            .collect::<Result<Vec<_>>>()?;
        Ok((acts, Var::concat(&pooled, 0)?))
    }

    fn run_ssa<'t>(
        &self,
        vars: &SsaVars<'t, T>,
        series: &[Var<'t, T>],
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<(Var<'t, T>, Vec<Var<'t, T>>)> {
        let width = self.config.embedding_width();
        let mut rows = Vec::with_capacity(series.len());
        let mut attention = Vec::with_capacity(series.len());
        for &s in series {
            let h = lstm_forward(&vars.lstm, s, self.config.lstm_variant)?;
            let a = attention_matrix(&vars.attention, h)?;
            rows.push(sequence_embedding(a, h)?.reshape(&[1, width])?);
            attention.push(a);
        }
        let q = Var::concat(&rows, 0)?;
        let hidden = dense_forward(&vars.dense_hidden, q)?.relu()?;
        let hidden = dropout_forward(hidden, self.config.dropout, mode, rng)?;
        Ok((dense_forward(&vars.dense_out, hidden)?, attention))
    }

    fn run<'t>(
        &self,
        vars: &ModelVars<'t, T>,
        bn: &mut [BatchNormState<T>],
        series: &[Var<'t, T>],
        mode: Mode,
        architecture: Architecture,
        rng: &mut impl Rng,
    ) -> Result<Trace<'t, T>> {
        if series.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        for s in series {
            let shape = s.shape();
            if shape.len() != 2 || shape[0] != 1 {
                return Err(Error::dim("forward", format!("series must be [1, l], got {shape:?}")));
            }
        }
        let (fcn_maps, fcn_pooled) = self.run_fcn(vars, bn, series, mode)?;
        match architecture {
            Architecture::FcnOnly => Ok(Trace {
                logits: dense_forward(&vars.fcn_head, fcn_pooled)?,
                fcn_maps,
                fcn_pooled,
                attention: Vec::new(),
            }),
            Architecture::Sarcon => {
                let (Some(ssa), Some(head)) = (&vars.ssa, &vars.head) else {
                    return Err(Error::Config("model has no SSA branch".into()));
                };
                let (ssa_features, attention) = self.run_ssa(ssa, series, mode, rng)?;
                let joined = Var::concat(&[ssa_features, fcn_pooled], 1)?;
                Ok(Trace {
                    logits: dense_forward(head, joined)?,
                    fcn_maps,
                    fcn_pooled,
                    attention,
                })
            }
        }
    }

    /// Forward pass of the configured architecture over a batch of `[1, l]`
    /// series; returns logits `[B, C]`. Train mode updates the batch-norm
    /// running statistics.
    pub fn forward<'t>(
        &mut self,
        vars: &ModelVars<'t, T>,
        series: &[Var<'t, T>],
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<Var<'t, T>> {
        let arch = self.config.architecture;
        Ok(self.trace(vars, series, mode, arch, rng)?.logits)
    }

    /// Forward pass through the FCN branch and its dedicated head.
    pub fn forward_fcn_only<'t>(
        &mut self,
        vars: &ModelVars<'t, T>,
        series: &[Var<'t, T>],
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<Var<'t, T>> {
        Ok(self.trace(vars, series, mode, Architecture::FcnOnly, rng)?.logits)
    }

    /// Forward pass that also returns the intermediate maps.
    pub fn trace<'t>(
        &mut self,
        vars: &ModelVars<'t, T>,
        series: &[Var<'t, T>],
        mode: Mode,
        architecture: Architecture,
        rng: &mut impl Rng,
    ) -> Result<Trace<'t, T>> {
        let mut bn = self.bn_states();
        let trace = self.run(vars, &mut bn, series, mode, architecture, rng)?;
        if mode == Mode::Train {
            self.set_bn_states(bn);
        }
        Ok(trace)
    }

    /// Inference-mode trace that leaves the model untouched.
    pub fn trace_infer<'t>(
        &self,
        vars: &ModelVars<'t, T>,
        series: &[Var<'t, T>],
        architecture: Architecture,
    ) -> Result<Trace<'t, T>> {
        let mut bn = self.bn_states();
        // Dropout is inactive in infer mode; the generator is never drawn.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.run(vars, &mut bn, series, Mode::Infer, architecture, &mut rng)
    }

    /// Attention matrix `[t, l]` of one series. Needs no batch-norm
    /// statistics.
    pub fn attention(&self, series: &[f64]) -> Result<Tensor<T>> {
        let ssa = self
            .ssa
            .as_ref()
            .ok_or_else(|| Error::Contract("model has no attention branch".into()))?;
        let tape = Tape::new();
        let lstm = ssa.lstm.bind(&tape, false)?;
        let attention = ssa.attention.bind(&tape, false)?;
        let h = lstm_forward(&lstm, self.input(&tape, series)?, self.config.lstm_variant)?;
        Ok(attention_matrix(&attention, h)?.value())
    }

    /// Inference-mode logits `[B, C]` for raw series.
    pub fn logits(&self, series: &[&[f64]]) -> Result<Tensor<T>> {
        let tape = Tape::new();
        let vars = self.bind(&tape, false)?;
        let inputs = series.iter().map(|s| self.input(&tape, s)).collect::<Result<Vec<_>>>()?;
        Ok(self.trace_infer(&vars, &inputs, self.config.architecture)?.logits.value())
    }

    /// Inference-mode class probabilities `[B, C]`.
    pub fn predict_proba(&self, series: &[&[f64]]) -> Result<Tensor<T>> {
        kernels::softmax(&self.logits(series)?, 1)
    }

    /// Inference-mode arg-max class per series.
    pub fn predict(&self, series: &[&[f64]]) -> Result<Vec<usize>> {
        let logits = self.logits(series)?;
        let c = self.classes();
        Ok(logits
            .data()
            .chunks(c)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, T::neg_infinity()), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
                    .0
            })
            .collect())
    }
}

impl<T: Scalar> Parameterized<T> for SarconModel<T> {
    /// Parameters the configured architecture trains.
    fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut p = Vec::new();
        match self.config.architecture {
            Architecture::Sarcon => {
                if let Some(ssa) = &self.ssa {
                    p.extend(ssa.parameters());
                }
                for b in &self.blocks {
                    p.extend(b.parameters());
                }
                if let Some(h) = &self.head {
                    p.extend(h.parameters());
                }
            }
            Architecture::FcnOnly => {
                for b in &self.blocks {
                    p.extend(b.parameters());
                }
                p.extend(self.fcn_head.parameters());
            }
        }
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut p = Vec::new();
        match self.config.architecture {
            Architecture::Sarcon => {
                if let Some(ssa) = &mut self.ssa {
                    p.extend(ssa.parameters_mut());
                }
                for b in &mut self.blocks {
                    p.extend(b.parameters_mut());
                }
                if let Some(h) = &mut self.head {
                    p.extend(h.parameters_mut());
                }
            }
            Architecture::FcnOnly => {
                for b in &mut self.blocks {
                    p.extend(b.parameters_mut());
                }
                p.extend(self.fcn_head.parameters_mut());
            }
        }
        p
    }
}

struct SsaVars<'t, T> {
    lstm: LstmVars<'t, T>,
    attention: AttentionVars<'t, T>,
    dense_hidden: DenseVars<'t, T>,
    dense_out: DenseVars<'t, T>,
}

/// Tape bindings of a [`SarconModel`].
pub struct ModelVars<'t, T> {
    leaves: Vec<Var<'t, T>>,
    ssa: Option<SsaVars<'t, T>>,
    blocks: Vec<ConvBlockVars<'t, T>>,
    head: Option<DenseVars<'t, T>>,
    fcn_head: DenseVars<'t, T>,
}

impl<'t, T: Scalar> ModelVars<'t, T> {
    /// Vars of the trainable parameters in [`Parameterized::parameters`] order.
    pub fn leaves(&self) -> &[Var<'t, T>] {
        &self.leaves
    }
}
#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(arch: Architecture) -> ModelConfig {
        ModelConfig {
            architecture: arch,
            conv_layers: vec![ConvSpec { filters: 3, width: 3 }, ConvSpec { filters: 4, width: 2 }],
            lstm_hidden: 3,
            attention_hidden: 4,
            attention_hops: 2,
            dense_hidden: 5,
            ssa_features: 3,
            ..ModelConfig::new(6, 3)
        }
    }

    #[test]
    fn default_config_matches_published_setup() {
        let c = ModelConfig::new(128, 2);
        assert_eq!(c.embedding_width(), 3840);
        assert_eq!(c.head_width(), 256);
        assert_eq!(c.dropout, 0.8);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(matches!(SarconModel::<f32>::build(ModelConfig::new(10, 1), 0), Err(Error::Config(_))));
        let mut c = ModelConfig::new(10, 2);
        c.dropout = 1.0;
        assert!(SarconModel::<f32>::build(c, 0).is_err());
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = SarconModel::<f64>::build(tiny(Architecture::Sarcon), 7).unwrap();
        let b = SarconModel::<f64>::build(tiny(Architecture::Sarcon), 7).unwrap();
        assert_eq!(a, b);
        let c = SarconModel::<f64>::build(tiny(Architecture::Sarcon), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn leaves_follow_parameter_order() {
        for arch in [Architecture::Sarcon, Architecture::FcnOnly] {
            let model = SarconModel::<f64>::build(tiny(arch), 1).unwrap();
            let tape = Tape::new();
            let vars = model.bind(&tape, true).unwrap();
            let leaves = vars.leaves();
            let params = model.parameters();
            assert_eq!(leaves.len(), params.len());
            for (l, p) in leaves.iter().zip(params) {
                assert_eq!(&l.value(), p);
            }
        }
    }

    #[test]
    fn tampered_embedding_width_is_a_construction_error() {
        let mut model = SarconModel::<f64>::build(tiny(Architecture::Sarcon), 1).unwrap();
        model.config.attention_hops = 3;
        assert!(model.check_structure().is_err());
    }
}
