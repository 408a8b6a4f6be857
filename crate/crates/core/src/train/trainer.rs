use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{batch_iter, stratified_split, Dataset};
use crate::error::{Error, Result};
use crate::model::SarconModel;
use crate::nn::{Mode, Parameterized};
use crate::scalar::Scalar;
use crate::tensor::{kernels, Tape, Tensor};

use super::{class_weights, weighted_cross_entropy, AdamState, Checkpoint, Monitor, PlateauSchedule, TrainConfig};

/// Stream id of the generator that draws the validation split.
const SPLIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean weighted cross-entropy over the epoch's training batches.
    pub loss: f64,
    /// Accuracy of the train-mode predictions made during the epoch.
    pub train_acc: f64,
    /// Monitored score handed to the schedule.
    pub val_score: f64,
    /// Rate used during the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub const HEADER: &'static str = "epoch,loss,train_acc,val_score,lr";

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Comma-separated table; floats are written in shortest round-trip
    /// form.
    pub fn to_delimited(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{},{}", r.epoch, r.loss, r.train_acc, r.val_score, r.lr);
        }
        out
    }

    pub fn parse_delimited(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::HEADER) {
            return Err(Error::format("history", "missing header"));
        }
        let records = lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let bad = || Error::format("history", format!("line {}: {line:?}", i + 2));
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(bad());
                }
                let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
                Ok(EpochRecord {
                    epoch: f[0].parse().map_err(|_| bad())?,
                    loss: num(f[1])?,
                    train_acc: num(f[2])?,
                    val_score: num(f[3])?,
                    lr: num(f[4])?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(History { records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_delimited()).map_err(|e| Error::io(path, e))
    }
}

/// Training data converted once to model precision.
struct Prepared<T> {
    train_x: Vec<Tensor<T>>,
    train_y: Vec<usize>,
    val_x: Vec<Tensor<T>>,
    val_y: Vec<usize>,
    weights: Vec<T>,
}

/// Owns a model during training together with the optimiser and schedule.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: SarconModel<T>,
    pub config: TrainConfig,
    pub adam: AdamState<T>,
    pub schedule: PlateauSchedule,
    /// Epochs completed.
    pub epoch: usize,
    pub history: History,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: SarconModel<T>, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = AdamState::new(model.parameters());
        let schedule = PlateauSchedule::new(config.learning_rate, config.lr_floor, config.patience);
        Ok(Trainer {
            model,
            config,
            adam,
            schedule,
            epoch: 0,
            history: History::default(),
        })
    }

    pub fn from_checkpoint(checkpoint: Checkpoint<T>) -> Result<Self> {
        checkpoint.train_config.validate()?;
        if checkpoint.adam.m.len() != checkpoint.model.parameters().len() {
            return Err(Error::Version("optimiser state does not match the model".into()));
        }
        Ok(Trainer {
            model: checkpoint.model,
            config: checkpoint.train_config,
            adam: checkpoint.adam,
            schedule: checkpoint.schedule,
            epoch: checkpoint.epoch,
            history: checkpoint.history,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            model: self.model.clone(),
            train_config: self.config.clone(),
            adam: self.adam.clone(),
            schedule: self.schedule.clone(),
            epoch: self.epoch,
            history: self.history.clone(),
        }
    }

    fn prepare(&self, data: &Dataset) -> Result<Prepared<T>> {
        let cfg = &self.model.config;
        if data.length() != cfg.input_length {
            return Err(Error::Config(format!(
                "dataset length {} differs from model input length {}",
                data.length(),
                cfg.input_length
            )));
        }
        if data.num_classes() != cfg.classes {
            return Err(Error::Config(format!(
                "dataset has {} classes, model has {}",
                data.num_classes(),
                cfg.classes
            )));
        }
        let (train_idx, val_idx) = match self.config.monitor {
            Monitor::TrainingLoss => ((0..data.len()).collect(), Vec::new()),
            Monitor::ValidationLoss => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
                rng.set_stream(SPLIT_STREAM);
                let split = stratified_split(data, self.config.validation_fraction, &mut rng)?;
                if split.part_b.is_empty() {
                    return Err(Error::Data("validation split is empty; use the training-loss monitor".into()));
                }
                (split.part_a, split.part_b)
            }
        };
        let to_tensor = |i: &usize| Tensor::from_f64(&[1, data.length()], &data.series()[*i]);
        let train_y: Vec<usize> = train_idx.iter().map(|&i| data.labels()[i]).collect();
        let weights = if self.config.class_weighting {
            class_weights::<f64>(&train_y, cfg.classes)?.into_iter().map(T::lit).collect()
        } else {
            vec![T::one(); cfg.classes]
        };
        Ok(Prepared {
            train_x: train_idx.iter().map(to_tensor).collect::<Result<_>>()?,
            train_y,
            val_x: val_idx.iter().map(to_tensor).collect::<Result<_>>()?,
            val_y: val_idx.iter().map(|&i| data.labels()[i]).collect(),
            weights,
        })
    }

    /// Trains until `config.epochs` epochs are complete or the accuracy
    /// target is met.
    pub fn fit(&mut self, data: &Dataset) -> Result<()> {
        self.fit_for(data, usize::MAX)
    }

    /// Like [`Trainer::fit`] but runs at most `max_epochs` further epochs.
    pub fn fit_for(&mut self, data: &Dataset, max_epochs: usize) -> Result<()> {
        if self.epoch >= self.config.epochs || max_epochs == 0 {
            return Ok(());
        }
        let prepared = self.prepare(data)?;
        let mut remaining = max_epochs;
        while self.epoch < self.config.epochs && remaining > 0 {
            let epoch = self.epoch + 1;
            let record = self.run_epoch(&prepared, epoch).map_err(|e| match e {
                Error::NumericFault { .. } => Error::Diverged { epoch },
                other => other,
            })?;
            self.schedule.observe(record.val_score);
            self.history.records.push(record);
            self.epoch = epoch;
            remaining -= 1;
            if let Some(target) = self.config.target_train_accuracy {
                let (_, acc) = evaluate(&self.model, &prepared.train_x, &prepared.train_y, &prepared.weights, self.config.batch_size)?;
                if acc >= target {
                    break;
                }
            }
        }
        Ok(())
    }

    fn run_epoch(&mut self, data: &Prepared<T>, epoch: usize) -> Result<EpochRecord> {
        let lr = self.schedule.rate();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(epoch as u64);
        let batches = batch_iter(data.train_x.len(), self.config.batch_size, &mut rng)?;
        let mut total_loss = 0.0;
        let mut correct = 0;
        for batch in batches {
            let tape = Tape::new();
            let vars = self.model.bind(&tape, true)?;
            let inputs: Vec<_> = batch.iter().map(|&i| tape.constant(data.train_x[i].clone())).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| data.train_y[i]).collect();
            let probs = self.model.forward(&vars, &inputs, Mode::Train, &mut rng)?.softmax(1)?;
            correct += count_correct(&probs.value(), &labels);
            let batch_loss = weighted_cross_entropy(probs, &labels, Some(&data.weights))?;
            total_loss += batch_loss.value().data()[0].to_f64_lossy();
            let loss = batch_loss.scale(T::lit(1.0 / batch.len() as f64))?;
            let mut grads = tape.backward(loss)?;
            let mut g: Vec<Tensor<T>> = vars
                .leaves()
                .iter()
                .map(|&v| grads.take(v).expect("leaf gradient"))
                .collect();
            if let Some(max) = self.config.clip_norm {
                clip_global_norm(&mut g, max);
            }
            self.adam.step(self.model.parameters_mut(), &g, lr)?;
        }
        let n = data.train_x.len() as f64;
        let loss = total_loss / n;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let val_score = match self.config.monitor {
            Monitor::TrainingLoss => loss,
            Monitor::ValidationLoss => {
                evaluate(&self.model, &data.val_x, &data.val_y, &data.weights, self.config.batch_size)?.0
            }
        };
        Ok(EpochRecord {
            epoch,
            loss,
            train_acc: correct as f64 / n,
            val_score,
            lr,
        })
    }

    /// Inference-mode mean unweighted loss and accuracy of the current
    /// model over all of `data`.
    pub fn evaluate(&self, data: &Dataset) -> Result<(f64, f64)> {
        evaluate_dataset(&self.model, data, self.config.batch_size)
    }
}

/// Inference-mode mean unweighted loss and accuracy of `model` on `data`.
pub fn evaluate_dataset<T: Scalar>(model: &SarconModel<T>, data: &Dataset, batch: usize) -> Result<(f64, f64)> {
    let xs = data
        .series()
        .iter()
        .map(|s| Tensor::from_f64(&[1, s.len()], s))
        .collect::<Result<Vec<_>>>()?;
    evaluate(model, &xs, data.labels(), &vec![T::one(); model.classes()], batch.max(1))
}

fn count_correct<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> usize {
    let c = probs.dims2().1;
    probs
        .data()
        .chunks(c)
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count()
}

pub(crate) fn argmax<T: Scalar>(row: &[T]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Mean weighted loss and accuracy in inference mode, in chunks of
/// `batch`.
fn evaluate<T: Scalar>(
    model: &SarconModel<T>,
    xs: &[Tensor<T>],
    ys: &[usize],
    weights: &[T],
    batch: usize,
) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut total = 0.0;
    let mut correct = 0;
    for (chunk_x, chunk_y) in xs.chunks(batch).zip(ys.chunks(batch)) {
        let tape = Tape::new();
        let vars = model.bind(&tape, false)?;
        let inputs: Vec<_> = chunk_x.iter().map(|x| tape.constant(x.clone())).collect();
        let logits = model.trace_infer(&vars, &inputs, model.config.architecture)?.logits.value();
        let probs = kernels::softmax(&logits, 1)?;
        correct += count_correct(&probs, chunk_y);
        let p = tape.constant(probs);
        total += weighted_cross_entropy(p, chunk_y, Some(weights))?.value().data()[0].to_f64_lossy();
    }
    let n = xs.len() as f64;
    Ok((total / n, correct as f64 / n))
}

fn clip_global_norm<T: Scalar>(grads: &mut [Tensor<T>], max: f64) {
    let norm = grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|v| v.to_f64_lossy().powi(2))
        .sum::<f64>()
        .sqrt();
    if norm > max {
        let factor = T::lit(max / norm);
        for g in grads {
            g.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Trains a fresh trainer over `data` and returns the model and history.
pub fn train<T: Scalar>(model: SarconModel<T>, data: &Dataset, config: TrainConfig) -> Result<(SarconModel<T>, History)> {
    let mut trainer = Trainer::new(model, config)?;
    trainer.fit(data)?;
    Ok((trainer.model, trainer.history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_round_trip() {
        let h = History {
            records: vec![EpochRecord {
                epoch: 1,
                loss: 0.1 + 0.2,
                train_acc: 1.0 / 3.0,
                val_score: 0.5,
                lr: 1e-3,
            }],
        };
        assert_eq!(History::parse_delimited(&h.to_delimited()).unwrap(), h);
        assert!(History::parse_delimited("nope\n").is_err());
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = vec![Tensor::<f64>::new(&[2], vec![3.0, 4.0]).unwrap()];
        clip_global_norm(&mut g, 1.0);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-15);
    }
}
