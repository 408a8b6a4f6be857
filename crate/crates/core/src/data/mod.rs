//! UCR-format datasets: loading, metadata checks, splitting and batching.

mod meta;
mod synthetic;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use meta::{validate_meta, DatasetMeta, MetaReport, Mismatch, TABLE1};
pub use synthetic::cbf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    Comma,
    Tab,
    /// Comma when the line has one, otherwise any whitespace.
    #[default]
    Auto,
}

/// Fixed-length univariate series with labels remapped to `0..C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    length: usize,
    series: Vec<Vec<f64>>,
    labels: Vec<usize>,
    /// Original label value of each class index, ascending.
    label_values: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from raw label values; classes are numbered in
    /// ascending label order.
    pub fn from_raw(name: &str, split: Split, series: Vec<Vec<f64>>, raw_labels: &[f64]) -> Result<Self> {
        let mut values: Vec<f64> = raw_labels.to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let labels = raw_labels
            .iter()
            .map(|v| values.binary_search_by(|x| x.total_cmp(v)).expect("value present"))
            .collect();
        Dataset::new(name, split, series, labels, values)
    }

    pub fn new(name: &str, split: Split, series: Vec<Vec<f64>>, labels: Vec<usize>, label_values: Vec<f64>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Data(format!("{name}: no series")));
        }
        if series.len() != labels.len() {
            return Err(Error::Data(format!("{name}: {} series but {} labels", series.len(), labels.len())));
        }
        let length = series[0].len();
        if length == 0 {
            return Err(Error::Data(format!("{name}: empty series")));
        }
        if let Some(i) = series.iter().position(|s| s.len() != length) {
            return Err(Error::Data(format!("{name}: series {i} has length {}, expected {length}", series[i].len())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= label_values.len()) {
            return Err(Error::Data(format!("{name}: label {bad} outside 0..{}", label_values.len())));
        }
        Ok(Dataset {
            name: name.to_string(),
            split,
            length,
            series,
            labels,
            label_values,
        })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Series length `l`.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn num_classes(&self) -> usize {
        self.label_values.len()
    }

    pub fn series(&self) -> &[Vec<f64>] {
        &self.series
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_values(&self) -> &[f64] {
        &self.label_values
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// The rows at `indices`, keeping the full class numbering.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Contract(format!("index {bad} out of range for {} series", self.len())));
        }
        Dataset::new(
            &self.name,
            self.split,
            indices.iter().map(|&i| self.series[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.label_values.clone(),
        )
    }

    /// UCR text: original label, then the values, comma separated.
    /// Re-indexes the labels against another file's label values, so that
    /// class indices agree across splits.
    pub fn with_label_values(&self, values: &[f64]) -> Result<Self> {
        let labels = self
            .labels
            .iter()
            .map(|&y| {
                let raw = self.label_values[y];
                values
                    .iter()
                    .position(|&v| v == raw)
                    .ok_or_else(|| Error::Data(format!("label {raw} of {} is not among {values:?}", self.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(&self.name, self.split, self.series.clone(), labels, values.to_vec())
    }

    pub fn to_ucr_text(&self) -> String {
        let mut out = String::new();
        for (s, &y) in self.series.iter().zip(&self.labels) {
            out.push_str(&format_value(self.label_values[y]));
            for v in s {
                out.push(',');
                out.push_str(&format_value(*v));
            }
            out.push('\n');
        }
        out
    }
}

fn format_value(v: f64) -> String {
    // `{}` prints the shortest representation that parses back exactly.
    format!("{v}")
}

/// Name and split from a file stem such as `Car_TRAIN`.
fn name_and_split(path: &Path) -> (String, Split) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    let upper = stem.to_ascii_uppercase();
    for (suffix, split) in [("_TRAIN", Split::Train), ("_TEST", Split::Test)] {
        if upper.ends_with(suffix) {
            return (stem[..stem.len() - suffix.len()].to_string(), split);
        }
    }
    (stem.to_string(), Split::Train)
}

/// Parses UCR text (one series per line, label first).
pub fn parse_ucr(text: &str, name: &str, split: Split, delimiter: Delimiter) -> Result<Dataset> {
    let mut series = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = match delimiter {
            Delimiter::Comma => line.split(',').collect(),
            Delimiter::Tab => line.split('\t').collect(),
            Delimiter::Auto if line.contains(',') => line.split(',').collect(),
            Delimiter::Auto => line.split_whitespace().collect(),
        };
        let values = tokens
            .iter()
            .enumerate()
            .map(|(col, t)| {
                t.trim().parse::<f64>().map_err(|_| {
                    Error::format(name, format!("line {line_no}, column {}: not a number: {t:?}", col + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() < 2 {
            return Err(Error::format(name, format!("line {line_no}: needs a label and at least one value")));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::format(
                    name,
                    format!("line {line_no}: {} values, expected {}", values.len() - 1, w - 1),
                ))
            }
            _ => {}
        }
        labels.push(values[0]);
        series.push(values[1..].to_vec());
    }
    if series.is_empty() {
        return Err(Error::format(name, "no data rows"));
    }
    Dataset::from_raw(name, split, series, &labels)
}

pub fn load_ucr(path: impl AsRef<Path>, delimiter: Delimiter) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (name, split) = name_and_split(path);
    parse_ucr(&text, &name, split, delimiter).map_err(|e| match e {
        Error::Format { detail, .. } => Error::format(path.display().to_string(), detail),
        other => other,
    })
}

pub fn save_ucr(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset.to_ucr_text()).map_err(|e| Error::io(path, e))
}

/// Per-series standardisation; constant series become zeros.
pub fn znormalize(dataset: &Dataset) -> Dataset {
    const VARIANCE_FLOOR: f64 = 1e-8;
    let mut out = dataset.clone();
    for s in &mut out.series {
        let n = s.len() as f64;
        let mean = s.iter().sum::<f64>() / n;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        if var < VARIANCE_FLOOR {
            s.iter_mut().for_each(|v| *v = 0.0);
        } else {
            let sd = var.sqrt();
            s.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        }
    }
    out
}

/// Index partition produced by [`stratified_split`].
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedSplit {
    pub part_a: Vec<usize>,
    pub part_b: Vec<usize>,
    /// Classes too small to split (kept whole in `part_a`).
    pub warnings: Vec<String>,
}

/// Sends about `fraction` of every class to `part_b`, the rest to
/// `part_a`. Both index lists are ascending.
pub fn stratified_split(dataset: &Dataset, fraction: f64, rng: &mut impl Rng) -> Result<StratifiedSplit> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Contract(format!("split fraction {fraction} outside (0, 1)")));
    }
    let mut split = StratifiedSplit {
        part_a: Vec::new(),
        part_b: Vec::new(),
        warnings: Vec::new(),
    };
    for class in 0..dataset.num_classes() {
        let mut members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels[i] == class).collect();
        if members.len() < 2 {
            if !members.is_empty() {
                split
                    .warnings
                    .push(format!("class {class} has {} sample(s); not split", members.len()));
            }
            split.part_a.extend(members);
            continue;
        }
        members.shuffle(rng);
        let take = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        split.part_b.extend_from_slice(&members[..take]);
        split.part_a.extend_from_slice(&members[take..]);
    }
    split.part_a.sort_unstable();
    split.part_b.sort_unstable();
    Ok(split)
}

/// One shuffled pass over `0..n` in batches of at most `batch`.
pub fn batch_iter(n: usize, batch: usize, rng: &mut impl Rng) -> Result<Vec<Vec<usize>>> {
    if batch == 0 {
        return Err(Error::Contract("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    Ok(order.chunks(batch).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimal_file() {
        let d = parse_ucr("1,0.0,1.0\n2,1.0,0.0\n", "t", Split::Train, Delimiter::Auto).unwrap();
        assert_eq!((d.len(), d.length(), d.num_classes()), (2, 2, 2));
        assert_eq!(d.labels(), &[0, 1]);
    }

    #[test]
    fn labels_remap_in_sorted_order() {
        let d = parse_ucr("1 5\n-1 6\n1 7\n", "t", Split::Train, Delimiter::Auto).unwrap();
        assert_eq!(d.labels(), &[1, 0, 1]);
        assert_eq!(d.label_values(), &[-1.0, 1.0]);
    }

    #[test]
    fn ragged_row_reports_its_line() {
        let err = parse_ucr("1,0,1,2\n2,1,0\n", "t", Split::Train, Delimiter::Comma).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_ucr("1,0,x\n", "t", Split::Train, Delimiter::Comma).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn empty_text_is_a_format_error() {
        assert!(matches!(parse_ucr("\n\n", "t", Split::Test, Delimiter::Auto), Err(Error::Format { .. })));
    }

    #[test]
    fn file_stem_gives_name_and_split() {
        assert_eq!(name_and_split(Path::new("/x/Car_TRAIN.txt")), ("Car".into(), Split::Train));
        assert_eq!(name_and_split(Path::new("Car_TEST")), ("Car".into(), Split::Test));
    }

    #[test]
    fn znormalize_cases() {
        let d = Dataset::from_raw("z", Split::Train, vec![vec![0.0, 2.0], vec![3.0, 3.0]], &[0.0, 1.0]).unwrap();
        let z = znormalize(&d);
        assert_eq!(z.series()[0], vec![-1.0, 1.0]);
        assert_eq!(z.series()[1], vec![0.0, 0.0]);
    }

    #[test]
    fn balanced_half_split() {
        let series = vec![vec![0.0]; 100];
        let labels: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let d = Dataset::from_raw("b", Split::Train, series, &labels).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = stratified_split(&d, 0.5, &mut rng).unwrap();
        for part in [&s.part_a, &s.part_b] {
            let ones = part.iter().filter(|&&i| d.labels()[i] == 1).count();
            assert_eq!((part.len(), ones), (50, 25));
        }
    }

    #[test]
    fn singleton_class_stays_in_part_a() {
        let d = Dataset::from_raw("s", Split::Train, vec![vec![0.0]; 5], &[0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = stratified_split(&d, 0.2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(s.part_a.contains(&4));
        assert_eq!(s.warnings.len(), 1);
    }
}
