use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Dataset, Split};

/// Expected shape of a benchmark dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub train: usize,
    pub test: usize,
    pub length: usize,
    pub classes: usize,
}

impl DatasetMeta {
    pub fn lookup(name: &str) -> Option<DatasetMeta> {
        TABLE1.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)).map(|(_, m)| *m)
    }

    pub fn size(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Test => self.test,
        }
    }
}

/// The 24 benchmark datasets: train size, test size, length, classes.
#[rustfmt::skip]
pub const TABLE1: [(&str, DatasetMeta); 24] = [
    ("Car", DatasetMeta { train: 60, test: 60, length: 577, classes: 4 }),
    ("Computers", DatasetMeta { train: 250, test: 250, length: 720, classes: 2 }),
    ("FordA", DatasetMeta { train: 1320, test: 3601, length: 500, classes: 2 }),
    ("FordB", DatasetMeta { train: 3636, test: 810, length: 500, classes: 2 }),
    ("HandOutlines", DatasetMeta { train: 1000, test: 370, length: 2709, classes: 2 }),
    ("Haptics", DatasetMeta { train: 155, test: 308, length: 1092, classes: 5 }),
    ("Herring", DatasetMeta { train: 64, test: 64, length: 512, classes: 2 }),
    ("InlineSkate", DatasetMeta { train: 100, test: 550, length: 1882, classes: 7 }),
    ("LargeKitApp", DatasetMeta { train: 375, test: 375, length: 720, classes: 3 }),
    ("Lighting2", DatasetMeta { train: 60, test: 61, length: 637, classes: 2 }),
    ("Mallat", DatasetMeta { train: 2345, test: 55, length: 1024, classes: 8 }),
    ("NonECG1", DatasetMeta { train: 1800, test: 1965, length: 750, classes: 42 }),
    ("NonECG2", DatasetMeta { train: 1800, test: 1965, length: 750, classes: 42 }),
    ("OliveOil", DatasetMeta { train: 30, test: 30, length: 570, classes: 4 }),
    ("Phoneme", DatasetMeta { train: 1896, test: 214, length: 1024, classes: 39 }),
    ("RefDevices", DatasetMeta { train: 375, test: 375, length: 720, classes: 2 }),
    ("ScreenType", DatasetMeta { train: 375, test: 375, length: 720, classes: 2 }),
    ("ShapesAll", DatasetMeta { train: 600, test: 600, length: 512, classes: 60 }),
    ("SmallKitApp", DatasetMeta { train: 375, test: 375, length: 720, classes: 3 }),
    ("StarLCurves", DatasetMeta { train: 8236, test: 1000, length: 1024, classes: 3 }),
    ("Strawberry", DatasetMeta { train: 613, test: 370, length: 235, classes: 2 }),
    ("uWavGestAll", DatasetMeta { train: 3582, test: 896, length: 945, classes: 8 }),
    ("Worms", DatasetMeta { train: 181, test: 77, length: 900, classes: 5 }),
    ("WormsTwoClass", DatasetMeta { train: 181, test: 77, length: 900, classes: 2 }),];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub field: &'static str,
    pub expected: usize,
    pub actual: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MetaReport {
    pub dataset: String,
    pub split: Split,
    pub mismatches: Vec<Mismatch>,
}

impl MetaReport {
    pub fn is_match(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn to_text(&self) -> String {
        let split = match self.split {
            Split::Train => "train",
            Split::Test => "test",
        };
        if self.is_match() {
            return format!("{} ({split}): matches metadata\n", self.dataset);
        }
        let mut out = format!("{} ({split}): {} mismatch(es)\n", self.dataset, self.mismatches.len());
        for m in &self.mismatches {
            let _ = writeln!(out, "  {}: expected {}, found {}", m.field, m.expected, m.actual);
        }
        out
    }

    /// `dataset,field,expected,actual` rows with a header.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("dataset,field,expected,actual\n");
        for m in &self.mismatches {
            let _ = writeln!(out, "{},{},{},{}", self.dataset, m.field, m.expected, m.actual);
        }
        out
    }
}

/// Compares (N, l, C) with `meta`; N is checked against the size for the
/// dataset's split.
pub fn validate_meta(dataset: &Dataset, meta: &DatasetMeta) -> MetaReport {
    let checks = [
        ("N", meta.size(dataset.split), dataset.len()),
        ("l", meta.length, dataset.length()),
        ("C", meta.classes, dataset.num_classes()),
    ];
    MetaReport {
        dataset: dataset.name.clone(),
        split: dataset.split,
        mismatches: checks
            .into_iter()
            .filter(|(_, e, a)| e != a)
            .map(|(field, expected, actual)| Mismatch { field, expected, actual })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(DatasetMeta::lookup("car").unwrap().length, 577);
        assert!(DatasetMeta::lookup("Nope").is_none());
    }

    #[test]
    fn wrong_class_count_is_one_mismatch() {
        let d = Dataset::from_raw("X", Split::Test, vec![vec![0.0; 3]; 2], &[1.0, 2.0]).unwrap();
        let meta = DatasetMeta { train: 9, test: 2, length: 3, classes: 3 };
        let r = validate_meta(&d, &meta);
        assert_eq!(r.mismatches, vec![Mismatch { field: "C", expected: 3, actual: 2 }]);
        assert_eq!(r.to_delimited().lines().count(), 2);
    }
}
