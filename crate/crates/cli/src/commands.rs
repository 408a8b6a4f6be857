use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sarcon::data::{load_ucr, znormalize, Dataset, Delimiter};
use sarcon::eval::{accuracy, per_class_error, pce, MetricsReport, ResultTable};
use sarcon::explain::{explain, ExportFormat};
use sarcon::train::{
    checkpoint_scalar_bytes, load_checkpoint, save_checkpoint, TrainConfig, Trainer, CHECKPOINT_VERSION,
};
use sarcon::{Error, ModelConfig, Result, SarconModel, Scalar};

use crate::config::{Precision, RunConfig};
use crate::{CHECKPOINT_FILE, HISTORY_FILE, MANIFEST_FILE, RESULTS_HEADER};

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub checkpoint_format: u32,
    pub config: RunConfig,
    pub model: Option<ModelConfig>,
    pub train: Option<TrainConfig>,
    /// Raw label of each class index, in index order.
    pub label_values: Option<Vec<f64>>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    fn new(command: &str, config: &RunConfig) -> Self {
        Manifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            checkpoint_format: CHECKPOINT_VERSION,
            config: config.clone(),
            model: None,
            train: None,
            label_values: None,
            outputs: Vec::new(),
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::format("manifest", e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_data(path: Option<&PathBuf>, what: &str, config: &RunConfig) -> Result<Dataset> {
    let path = path.ok_or_else(|| Error::Config(format!("no {what} file given")))?;
    let data = load_ucr(path, Delimiter::Auto)?;
    Ok(if config.znormalize.unwrap_or(false) { znormalize(&data) } else { data })
}

/// Manifest written by `train` next to a checkpoint, if any.
fn training_manifest(checkpoint: &Path) -> Result<Option<Manifest>> {
    let path = checkpoint.with_file_name(MANIFEST_FILE);
    if path.exists() {
        Manifest::read(&path).map(Some)
    } else {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub dataset: String,
    pub series: usize,
    pub epochs: usize,
    pub train_accuracy: f64,
    pub out_dir: PathBuf,
}

pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary> {
    match config.precision.unwrap_or_default() {
        Precision::F32 => train_as::<f32>(config),
        Precision::F64 => train_as::<f64>(config),
    }
}

fn train_as<T: Scalar>(config: &RunConfig) -> Result<TrainSummary> {
    let data = load_data(config.train.as_ref(), "training", config)?;
    let model_config = config.model_config(data.length(), data.num_classes())?;
    let train_config = config.train_config()?;
    let out = config.out_dir();
    create_dir(&out)?;

    let model = SarconModel::<T>::build(model_config.clone(), config.seed())?;
    let mut trainer = Trainer::new(model, train_config.clone())?;
    trainer.fit(&data)?;
    let (_, train_accuracy) = trainer.evaluate(&data)?;

    let checkpoint = out.join(CHECKPOINT_FILE);
    let history = out.join(HISTORY_FILE);
    save_checkpoint(&checkpoint, &trainer.checkpoint())?;
    trainer.history.save(&history)?;
    let mut manifest = Manifest::new("train", config);
    manifest.model = Some(model_config);
    manifest.train = Some(train_config);
    manifest.label_values = Some(data.label_values().to_vec());
    manifest.outputs = vec![checkpoint, history];
    manifest.write(&out.join(MANIFEST_FILE))?;

    Ok(TrainSummary {
        dataset: data.name.clone(),
        series: data.len(),
        epochs: trainer.epoch,
        train_accuracy,
        out_dir: out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSummary {
    pub name: String,
    pub series: usize,
    /// Raw label of each class index.
    pub label_values: Vec<f64>,
    pub accuracy: f64,
    pub per_class_error: Vec<f64>,
    pub pce: f64,
}

pub fn cmd_evaluate(config: &RunConfig) -> Result<EvaluationSummary> {
    let path = config.checkpoint_path();
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    match checkpoint_scalar_bytes(&bytes).map_err(|e| relabel_source(e, &path))? {
        4 => evaluate_as::<f32>(config, &path),
        8 => evaluate_as::<f64>(config, &path),
        w => Err(Error::Version(format!("{}: unsupported {w}-byte scalars", path.display()))),
    }
}

fn relabel_source(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { detail, .. } => Error::format(path.display().to_string(), detail),
        other => other,
    }
}

/// Loads a checkpoint's model and the named data file with class indices
/// aligned to training.
fn model_and_data<T: Scalar>(config: &RunConfig, path: &Path, data_path: Option<&PathBuf>) -> Result<(SarconModel<T>, Dataset)> {
    let model = load_checkpoint::<T>(path)?.model;
    let mut data = load_data(data_path, "test", config)?;
    if let Some(values) = training_manifest(path)?.and_then(|m| m.label_values) {
        data = data.with_label_values(&values)?;
    }
    if data.length() != model.config.input_length || data.num_classes() > model.classes() {
        return Err(Error::Version(format!(
            "{} holds a model for length {} and {} classes; {} has length {} and {} classes",
            path.display(),
            model.config.input_length,
            model.classes(),
            data.name,
            data.length(),
            data.num_classes()
        )));
    }
    Ok((model, data))
}

fn evaluate_as<T: Scalar>(config: &RunConfig, path: &Path) -> Result<EvaluationSummary> {
    let (model, data) = model_and_data::<T>(config, path, config.test.as_ref())?;
    let mut predictions = Vec::with_capacity(data.len());
    for chunk in data.series().chunks(64) {
        let refs: Vec<&[f64]> = chunk.iter().map(Vec::as_slice).collect();
        predictions.extend(model.predict(&refs)?);
    }
    let acc = accuracy(&predictions, data.labels())?;
    let per_class = per_class_error(&predictions, data.labels(), model.classes())?;
    let pce = pce(1.0 - acc, model.classes())?;

    let label_values = data.label_values().to_vec();

    let results = config.results_path();
    if let Some(dir) = results.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let fresh = !results.exists();
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results)
        .map_err(|e| Error::io(&results, e))?;
    let mut row = String::new();
    if fresh {
        row.push_str(RESULTS_HEADER);
        row.push('\n');
    }
    row.push_str(&format!("{},{acc},{},{},{pce}\n", data.name, 1.0 - acc, model.classes()));
    file.write_all(row.as_bytes()).map_err(|e| Error::io(&results, e))?;

    let out = config.out_dir();
    create_dir(&out)?;
    let mut manifest = Manifest::new("evaluate", config);
    manifest.outputs = vec![results];
    manifest.write(&out.join("manifest-evaluate.json"))?;

    Ok(EvaluationSummary {
        series: data.len(),
        label_values,
        name: data.name,
        accuracy: acc,
        per_class_error: per_class,
        pce,
    })
}

pub fn cmd_metrics(config: &RunConfig, table: &Path) -> Result<MetricsReport> {
    let text = fs::read_to_string(table).map_err(|e| Error::io(table, e))?;
    let table_data = ResultTable::parse_delimited(&text, &table.display().to_string())?;
    let report = MetricsReport::compute(&table_data)?;
    let delimited = report.to_delimited();

    let out = config.out_dir();
    create_dir(&out)?;
    let path = out.join("metrics.csv");
    fs::write(&path, &delimited).map_err(|e| Error::io(&path, e))?;
    let mut manifest = Manifest::new("metrics", config);
    manifest.outputs = vec![table.to_path_buf(), path];
    manifest.write(&out.join("manifest-metrics.json"))?;
    Ok(report)
}

/// Paths of the delimited, structured and plot exports.
pub fn cmd_explain(config: &RunConfig, index: usize, class: usize) -> Result<[PathBuf; 3]> {
    let path = config.checkpoint_path();
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    match checkpoint_scalar_bytes(&bytes).map_err(|e| relabel_source(e, &path))? {
        4 => explain_as::<f32>(config, &path, index, class),
        8 => explain_as::<f64>(config, &path, index, class),
        w => Err(Error::Version(format!("{}: unsupported {w}-byte scalars", path.display()))),
    }
}

fn explain_as<T: Scalar>(config: &RunConfig, path: &Path, index: usize, class: usize) -> Result<[PathBuf; 3]> {
    let source = config.test.as_ref().or(config.train.as_ref());
    let (model, data) = model_and_data::<T>(config, path, source)?;
    let series = data.series().get(index).ok_or_else(|| {
        Error::Contract(format!("series index {index} outside 0..{} of {}", data.len(), data.name))
    })?;
    let e = explain(&model, series, &format!("{}[{index}]", data.name), class)?;

    let out = config.out_dir();
    create_dir(&out)?;
    let stem = format!("explain_{index}_class{class}");
    let files = [
        out.join(format!("{stem}.csv")),
        out.join(format!("{stem}.json")),
        out.join(format!("{stem}.svg")),
    ];
    e.export(ExportFormat::Delimited, &files[0])?;
    e.export(ExportFormat::Json, &files[1])?;
    e.emit_plot(&files[2])?;
    let mut manifest = Manifest::new("explain", config);
    manifest.outputs = files.to_vec();
    manifest.write(&out.join(format!("manifest-{stem}.json")))?;
    Ok(files)
}
