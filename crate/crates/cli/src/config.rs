use std::path::{Path, PathBuf};

use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sarcon::nn::LstmVariant;
use sarcon::train::{Monitor, TrainConfig};
use sarcon::{Architecture, ConvSpec, Error, ModelConfig, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Parses a flag value through the same names the config file accepts.
fn parse_named<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Every knob of a run. Each field may come from a flag or from the
/// config file; unset fields take the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Training file in UCR format.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test file in UCR format.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Directory receiving every output of the run.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Checkpoint to read; defaults to the one in the run directory.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Results table that evaluate appends to.
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_named::<Precision>)]
    pub precision: Option<Precision>,
    /// Standardise each series before use.
    #[arg(long)]
    pub znormalize: Option<bool>,

    #[arg(long, value_parser = parse_named::<Architecture>)]
    pub architecture: Option<Architecture>,
    #[arg(long, value_delimiter = ',')]
    pub conv_filters: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub conv_widths: Option<Vec<usize>>,
    #[arg(long)]
    pub lstm_hidden: Option<usize>,
    #[arg(long, value_parser = parse_named::<LstmVariant>)]
    pub lstm_variant: Option<LstmVariant>,
    #[arg(long)]
    pub attention_hidden: Option<usize>,
    #[arg(long)]
    pub attention_hops: Option<usize>,
    #[arg(long)]
    pub dense_hidden: Option<usize>,
    #[arg(long)]
    pub ssa_features: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,

    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr_floor: Option<f64>,
    #[arg(long)]
    pub class_weighting: Option<bool>,
    #[arg(long, value_parser = parse_named::<Monitor>)]
    pub monitor: Option<Monitor>,
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub target_train_accuracy: Option<f64>,
}

impl RunConfig {
    pub fn parse_toml(text: &str, source: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{source}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_toml(&text, &path.display().to_string())
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn over(&self, lower: &RunConfig) -> RunConfig {
        let mut merged = serde_json::to_value(lower).expect("plain data");
        let top = serde_json::to_value(self).expect("plain data");
        let (Some(m), Some(t)) = (merged.as_object_mut(), top.as_object()) else {
            unreachable!("struct serializes to a map")
        };
        for (k, v) in t {
            if !v.is_null() {
                m.insert(k.clone(), v.clone());
            }
        }
        serde_json::from_value(merged).expect("same shape")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("run"))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out_dir().join(crate::CHECKPOINT_FILE))
    }

    pub fn results_path(&self) -> PathBuf {
        self.results.clone().unwrap_or_else(|| self.out_dir().join(crate::RESULTS_FILE))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn model_config(&self, input_length: usize, classes: usize) -> Result<ModelConfig> {
        let mut c = ModelConfig::new(input_length, classes);
        if self.conv_filters.is_some() || self.conv_widths.is_some() {
            let filters = self
                .conv_filters
                .clone()
                .unwrap_or_else(|| c.conv_layers.iter().map(|l| l.filters).collect());
            let widths = self
                .conv_widths
                .clone()
                .unwrap_or_else(|| c.conv_layers.iter().map(|l| l.width).collect());
            if filters.len() != widths.len() {
                return Err(Error::Config(format!(
                    "{} conv filter counts but {} widths",
                    filters.len(),
                    widths.len()
                )));
            }
            c.conv_layers = filters
                .into_iter()
                .zip(widths)
                .map(|(filters, width)| ConvSpec { filters, width })
                .collect();
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(architecture, lstm_hidden, lstm_variant, attention_hidden, attention_hops, dense_hidden, ssa_features, dropout);
        c.validate()?;
        Ok(c)
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let mut c = TrainConfig {
            seed: self.seed(),
            ..TrainConfig::default()
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { c.$f = v; } )* };
        }
        set!(epochs, batch_size, learning_rate, patience, lr_floor, class_weighting, monitor, validation_fraction);
        if self.clip_norm.is_some() {
            c.clip_norm = self.clip_norm;
        }
        if self.target_train_accuracy.is_some() {
            c.target_train_accuracy = self.target_train_accuracy;
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_library_defaults() {
        let rc = RunConfig::parse_toml("", "t").unwrap();
        assert_eq!(rc.model_config(100, 3).unwrap(), ModelConfig::new(100, 3));
        assert_eq!(rc.train_config().unwrap(), TrainConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse_toml("epochz = 3\n", "run.toml").unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("epochz")), "{err}");
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let file = RunConfig::parse_toml("epochs = 7\nbatch_size = 4\narchitecture = \"fcn-only\"\n", "t").unwrap();
        let flags = RunConfig {
            epochs: Some(9),
            ..RunConfig::default()
        };
        let merged = flags.over(&file);
        let tc = merged.train_config().unwrap();
        assert_eq!((tc.epochs, tc.batch_size, tc.patience), (9, 4, 100));
        assert_eq!(merged.model_config(10, 2).unwrap().architecture, Architecture::FcnOnly);
    }

    #[test]
    fn conv_lists_must_pair_up() {
        let rc = RunConfig {
            conv_filters: Some(vec![4, 4]),
            conv_widths: Some(vec![3]),
            ..RunConfig::default()
        };
        assert!(rc.model_config(10, 2).is_err());
    }
}
