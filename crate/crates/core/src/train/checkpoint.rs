//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "SARCONCK"
//! version    u32
//! scalar     u8       bytes per element (4 or 8)
//! meta_len   u64
//! meta       meta_len bytes of UTF-8 JSON (configs, schedule, epoch,
//!            history, Adam step and hyperparameters, batch-norm counters)
//! count      u64      number of tensors
//! tensor*    rank u32, dims u64 x rank, elements (scalar bytes each)
//! ```
//!
//! Tensor order: every model parameter (`SarconModel::all_parameters`),
//! then running mean and variance of each conv block, then Adam first
//! moments, then Adam second moments.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, SarconModel};
use crate::nn::Parameterized;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{AdamState, History, PlateauSchedule, TrainConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SARCONCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub model: SarconModel<T>,
    pub train_config: TrainConfig,
    pub adam: AdamState<T>,
    pub schedule: PlateauSchedule,
    /// Epochs completed.
    pub epoch: usize,
    pub history: History,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    model: ModelConfig,
    train: TrainConfig,
    schedule: PlateauSchedule,
    epoch: usize,
    history: History,
    adam_step: u64,
    adam_beta1: f64,
    adam_beta2: f64,
    adam_eps: f64,
    bn_updates: Vec<u64>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = Meta {
            model: self.model.config.clone(),
            train: self.train_config.clone(),
            schedule: self.schedule.clone(),
            epoch: self.epoch,
            history: self.history.clone(),
            adam_step: self.adam.step,
            adam_beta1: self.adam.beta1,
            adam_beta2: self.adam.beta2,
            adam_eps: self.adam.eps,
            bn_updates: self.model.blocks.iter().map(|b| b.bn.updates).collect(),
        };
        let meta = serde_json::to_vec(&meta).map_err(|e| Error::format("checkpoint", e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(T::BYTES as u8);
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);

        let mut tensors: Vec<&Tensor<T>> = self.model.all_parameters();
        for b in &self.model.blocks {
            tensors.push(&b.bn.running_mean);
            tensors.push(&b.bn.running_var);
        }
        tensors.extend(&self.adam.m);
        tensors.extend(&self.adam.v);
        out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
        for t in tensors {
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in t.data() {
                v.write_le(&mut out);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::format("checkpoint", "bad magic bytes"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version(format!(
                "checkpoint format {version}, this build reads {CHECKPOINT_VERSION}"
            )));
        }
        let width = r.take(1)?[0] as usize;
        if width != T::BYTES {
            return Err(Error::Version(format!(
                "checkpoint holds {width}-byte scalars, loader expects {} ({})",
                T::BYTES,
                T::NAME
            )));
        }
        let meta_len = r.len()?;
        let meta: Meta =
            serde_json::from_slice(r.take(meta_len)?).map_err(|e| Error::format("checkpoint", e.to_string()))?;

        let mut model = SarconModel::<T>::build(meta.model, 0)?;
        let count = r.len()?;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            tensors.push(r.tensor::<T>()?);
        }
        if r.pos != bytes.len() {
            return Err(Error::format("checkpoint", format!("{} trailing bytes", bytes.len() - r.pos)));
        }

        let n_params = model.all_parameters().len();
        let n_blocks = model.blocks.len();
        let n_trainable = model.parameters().len();
        let expected = n_params + 2 * n_blocks + 2 * n_trainable;
        if tensors.len() != expected || meta.bn_updates.len() != n_blocks {
            return Err(Error::format(
                "checkpoint",
                format!("{} tensors present, model needs {expected}", tensors.len()),
            ));
        }
        let mut it = tensors.into_iter();
        for (slot, t) in model.all_parameters_mut().into_iter().zip(it.by_ref()) {
            replace(slot, t)?;
        }
        for (block, updates) in model.blocks.iter_mut().zip(&meta.bn_updates) {
            replace(&mut block.bn.running_mean, it.next().expect("counted"))?;
            replace(&mut block.bn.running_var, it.next().expect("counted"))?;
            block.bn.updates = *updates;
        }
        let mut adam = AdamState::new(model.parameters());
        for slot in adam.m.iter_mut() {
            replace(slot, it.next().expect("counted"))?;
        }
        for slot in adam.v.iter_mut() {
            replace(slot, it.next().expect("counted"))?;
        }
        adam.step = meta.adam_step;
        adam.beta1 = meta.adam_beta1;
        adam.beta2 = meta.adam_beta2;
        adam.eps = meta.adam_eps;
        Ok(Checkpoint {
            model,
            train_config: meta.train,
            adam,
            schedule: meta.schedule,
            epoch: meta.epoch,
            history: meta.history,
        })
    }
}

fn replace<T: Scalar>(slot: &mut Tensor<T>, t: Tensor<T>) -> Result<()> {
    if slot.shape() != t.shape() {
        return Err(Error::format(
            "checkpoint",
            format!("tensor shape {:?} where {:?} was expected", t.shape(), slot.shape()),
        ));
    }
    *slot = t;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format("checkpoint", format!("truncated at byte {} (needed {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::format("checkpoint", "length overflows usize"))
    }

    fn tensor<T: Scalar>(&mut self) -> Result<Tensor<T>> {
        let rank = self.u32()? as usize;
        if rank == 0 || rank > 8 {
            return Err(Error::format("checkpoint", format!("implausible tensor rank {rank}")));
        }
        let shape = (0..rank).map(|_| self.len()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::format("checkpoint", "tensor size overflows"))?;
        let raw = self.take(n.checked_mul(T::BYTES).ok_or_else(|| Error::format("checkpoint", "tensor size overflows"))?)?;
        let data = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
        Tensor::new(&shape, data).map_err(|e| Error::format("checkpoint", e.to_string()))
    }
}

/// Scalar width in bytes recorded in a serialized checkpoint header.
pub fn checkpoint_scalar_bytes(bytes: &[u8]) -> Result<usize> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::format("checkpoint", "bad magic bytes"));
    }
    r.u32()?;
    Ok(r.take(1)?[0] as usize)
}

pub fn save_checkpoint<T: Scalar>(path: impl AsRef<Path>, checkpoint: &Checkpoint<T>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(|e| match e {
        Error::Format { detail, .. } => Error::format(path.display().to_string(), detail),
        other => other,
    })
}
