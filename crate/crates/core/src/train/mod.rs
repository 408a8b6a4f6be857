//! End-to-end optimisation: weighted cross-entropy, Adam, the plateau
//! learning-rate schedule, the epoch loop and checkpoints.

mod adam;
mod checkpoint;
mod schedule;
mod trainer;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Var;

pub use adam::AdamState;
pub use checkpoint::{checkpoint_scalar_bytes, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use schedule::PlateauSchedule;
pub use trainer::{evaluate_dataset, train, EpochRecord, History, Trainer};

/// Quantity watched by the plateau schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Monitor {
    /// Loss on a stratified hold-out taken from the training set.
    #[default]
    ValidationLoss,
    /// Mean training loss of the epoch; no hold-out.
    TrainingLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub lr_floor: f64,
    pub class_weighting: bool,
    pub monitor: Monitor,
    pub validation_fraction: f64,
    pub seed: u64,
    /// Global gradient-norm clip; off when `None`.
    pub clip_norm: Option<f64>,
    /// Stop once inference-mode accuracy on the training portion reaches
    /// this value.
    pub target_train_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1500,
            batch_size: 32,
            learning_rate: 1e-3,
            patience: 100,
            lr_floor: 1e-4,
            class_weighting: true,
            monitor: Monitor::ValidationLoss,
            validation_fraction: 0.2,
            seed: 0,
            clip_norm: None,
            target_train_accuracy: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lr_floor > 0.0 && self.lr_floor < self.learning_rate) {
            return Err(Error::Config(format!(
                "need 0 < lr_floor ({}) < learning_rate ({})",
                self.lr_floor, self.learning_rate
            )));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.monitor == Monitor::ValidationLoss && !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!("validation_fraction {} outside (0, 1)", self.validation_fraction)));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip_norm {c} must be positive")));
            }
        }
        Ok(())
    }
}

/// Inverse-frequency weights `w_c = N / (C N_c)`; balanced labels give all
/// ones.
pub fn class_weights<N>(labels: &[usize], classes: usize) -> Result<Vec<N>>
where
    N: Num + FromPrimitive + Clone,
{
    let mut counts = vec![0usize; classes];
    for &y in labels {
        if y >= classes {
            return Err(Error::Contract(format!("label {y} outside 0..{classes}")));
        }
        counts[y] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("class {c} has no training samples")));
    }
    let total = N::from_usize(labels.len()).expect("representable");
    counts
        .iter()
        .map(|&n| {
            let denom = N::from_usize(classes * n).expect("representable");
            Ok(total.clone() / denom)
        })
        .collect()
}

/// `-Σ_n w_{y_n} ln p_{n, y_n}` over `[N, C]` probabilities; `weights`
/// defaults to all ones.
pub fn weighted_cross_entropy<'t, T: Scalar>(
    probs: Var<'t, T>,
    labels: &[usize],
    weights: Option<&[T]>,
) -> Result<Var<'t, T>> {
    let classes = probs.value().dims2().1;
    match weights {
        Some(w) => probs.weighted_cross_entropy(labels, w),
        None => probs.weighted_cross_entropy(labels, &vec![T::one(); classes]),
    }
}
