//! Comparison metrics over per-dataset accuracy tables: wins, arithmetic
//! and geometric rank, per-class error.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::DatasetMeta;
use crate::error::{Error, Result};

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() || labels.is_empty() {
        return Err(Error::Contract(format!(
            "accuracy needs equal non-empty lengths, got {} and {}",
            predictions.len(),
            labels.len()
        )));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Error rate of each true class.
pub fn per_class_error(predictions: &[usize], labels: &[usize], classes: usize) -> Result<Vec<f64>> {
    accuracy(predictions, labels)?;
    let mut seen = vec![0usize; classes];
    let mut wrong = vec![0usize; classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if y >= classes {
            return Err(Error::Contract(format!("label {y} outside 0..{classes}")));
        }
        seen[y] += 1;
        wrong[y] += usize::from(p != y);
    }
    Ok(seen
        .iter()
        .zip(&wrong)
        .map(|(&n, &w)| if n == 0 { 0.0 } else { w as f64 / n as f64 })
        .collect())
}

/// Error divided by the class count.
pub fn pce(error: f64, classes: usize) -> Result<f64> {
    if classes < 2 {
        return Err(Error::Contract(format!("per-class error needs at least 2 classes, got {classes}")));
    }
    if !(0.0..=1.0).contains(&error) {
        return Err(Error::Contract(format!("error rate {error} outside [0, 1]")));
    }
    Ok(error / classes as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieRank {
    /// Tied entries share the mean of the positions they cover.
    #[default]
    Mid,
    /// Tied entries all take the best position they cover.
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// Every classifier attaining the maximum gets a win.
    #[default]
    AwardAll,
    /// A dataset with a tied maximum gives no win.
    AwardNone,
}

/// Accuracy of each classifier (columns) on each dataset (rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub classifiers: Vec<String>,
    pub datasets: Vec<String>,
    pub accuracy: Vec<Vec<f64>>,
    pub classes: Vec<usize>,
}

impl ResultTable {
    pub fn new(classifiers: Vec<String>, datasets: Vec<String>, accuracy: Vec<Vec<f64>>, classes: Vec<usize>) -> Result<Self> {
        if classifiers.is_empty() || datasets.is_empty() {
            return Err(Error::Contract("result table needs at least one classifier and one dataset".into()));
        }
        if accuracy.len() != datasets.len() || classes.len() != datasets.len() {
            return Err(Error::Contract("result table rows disagree with dataset names".into()));
        }
        for (d, row) in accuracy.iter().enumerate() {
            if row.len() != classifiers.len() {
                return Err(Error::Contract(format!("row {} has {} cells", datasets[d], row.len())));
            }
            if let Some((c, v)) = row.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Contract(format!(
                    "accuracy {v} for {} on {} outside [0, 1]",
                    classifiers[c], datasets[d]
                )));
            }
        }
        if let Some(d) = classes.iter().position(|&c| c < 2) {
            return Err(Error::Contract(format!("{} has fewer than 2 classes", datasets[d])));
        }
        Ok(ResultTable {
            classifiers,
            datasets,
            accuracy,
            classes,
        })
    }

    /// Parses a comma-separated table. The header starts with the dataset
    /// column; a column named `classes` (any case) gives class counts,
    /// otherwise they are looked up among the known benchmark datasets.
    pub fn parse_delimited(text: &str, source: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::format(source, "empty table"))?;
        let header: Vec<String> = header.split(',').map(|h| h.trim().to_string()).collect();
        if header.len() < 2 {
            return Err(Error::format(source, "header needs a dataset column and at least one classifier"));
        }
        let class_col = header.iter().position(|h| h.eq_ignore_ascii_case("classes"));
        let value_cols: Vec<usize> = (1..header.len()).filter(|&c| Some(c) != class_col).collect();
        let classifiers: Vec<String> = value_cols.iter().map(|&c| header[c].clone()).collect();

        let mut datasets = Vec::new();
        let mut accuracy = Vec::new();
        let mut classes = Vec::new();
        let mut missing = Vec::new();
        let mut problems = Vec::new();
        for (i, line) in lines {
            let line_no = i + 1;
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let name = cells[0].to_string();
            let cell = |c: usize| cells.get(c).copied().filter(|s| !s.is_empty());
            let mut row = Vec::with_capacity(value_cols.len());
            for &c in &value_cols {
                match cell(c) {
                    None => missing.push(format!("({name}, {})", header[c])),
                    Some(s) => match s.parse::<f64>() {
                        Ok(v) => row.push(v),
                        Err(_) => problems.push(format!("line {line_no}, column {}: {s:?} is not a number", header[c])),
                    },
                }
            }
            if cells.len() > header.len() {
                problems.push(format!("line {line_no}: {} cells for {} columns", cells.len(), header.len()));
            }
            let count = match class_col {
                Some(c) => match cell(c) {
                    None => {
                        missing.push(format!("({name}, {})", header[c]));
                        0
                    }
                    Some(s) => s.parse::<usize>().unwrap_or_else(|_| {
                        problems.push(format!("line {line_no}: class count {s:?} is not an integer"));
                        0
                    }),
                },
                None => match DatasetMeta::lookup(&name) {
                    Some(m) => m.classes,
                    None => {
                        problems.push(format!("line {line_no}: no class count for unknown dataset {name:?}"));
                        0
                    }
                },
            };
            datasets.push(name);
            accuracy.push(row);
            classes.push(count);
        }
        if !missing.is_empty() {
            return Err(Error::format(source, format!("missing cells at {}", missing.join(", "))));
        }
        if !problems.is_empty() {
            return Err(Error::format(source, problems.join("; ")));
        }
        ResultTable::new(classifiers, datasets, accuracy, classes).map_err(|e| Error::format(source, e.to_string()))
    }

    pub fn to_delimited(&self) -> String {
        let mut out = format!("dataset,classes,{}\n", self.classifiers.join(","));
        for ((name, row), c) in self.datasets.iter().zip(&self.accuracy).zip(&self.classes) {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{name},{c},{}", cells.join(","));
        }
        out
    }
}

/// Rank of each classifier on each dataset; rank 1 is the highest accuracy.
pub fn ranks(table: &ResultTable, rule: TieRank) -> Vec<Vec<f64>> {
    table
        .accuracy
        .iter()
        .map(|row| {
            row.iter()
                .map(|&a| {
                    let better = row.iter().filter(|&&b| b > a).count();
                    let tied = row.iter().filter(|&&b| b == a).count();
                    match rule {
                        TieRank::Min => (better + 1) as f64,
                        TieRank::Mid => better as f64 + (tied + 1) as f64 / 2.0,
                    }
                })
                .collect()
        })
        .collect()
}

fn columns(ranks: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = ranks.first().map_or(0, Vec::len);
    (0..k).map(|c| ranks.iter().map(|r| r[c]).collect()).collect()
}

pub fn arithmetic_rank(ranks: &[Vec<f64>]) -> Vec<f64> {
    columns(ranks)
        .iter()
        .map(|col| col.iter().sum::<f64>() / col.len() as f64)
        .collect()
}

pub fn geometric_rank(ranks: &[Vec<f64>]) -> Vec<f64> {
    columns(ranks)
        .iter()
        .map(|col| (col.iter().map(|r| r.ln()).sum::<f64>() / col.len() as f64).exp())
        .collect()
}

pub fn wins(table: &ResultTable, policy: TiePolicy) -> Vec<usize> {
    let mut wins = vec![0; table.classifiers.len()];
    for row in &table.accuracy {
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..row.len()).filter(|&c| row[c] == best).collect();
        if winners.len() == 1 || policy == TiePolicy::AwardAll {
            for c in winners {
                wins[c] += 1;
            }
        }
    }
    wins
}

/// Mean over datasets of `(1 - accuracy) / classes`, per classifier.
pub fn mpce(table: &ResultTable) -> Result<Vec<f64>> {
    let m = table.datasets.len() as f64;
    (0..table.classifiers.len())
        .map(|c| {
            let total = table
                .accuracy
                .iter()
                .zip(&table.classes)
                .map(|(row, &k)| pce(1.0 - row[c], k))
                .sum::<Result<f64>>()?;
            Ok(total / m)
        })
        .collect()
}

/// Every table-level metric, one value per classifier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub classifiers: Vec<String>,
    pub wins_award_all: Vec<usize>,
    pub wins_award_none: Vec<usize>,
    pub ar_mid: Vec<f64>,
    pub gr_mid: Vec<f64>,
    pub ar_min: Vec<f64>,
    pub gr_min: Vec<f64>,
    pub mpce: Vec<f64>,
}

impl MetricsReport {
    pub fn compute(table: &ResultTable) -> Result<Self> {
        let mid = ranks(table, TieRank::Mid);
        let min = ranks(table, TieRank::Min);
        Ok(MetricsReport {
            classifiers: table.classifiers.clone(),
            wins_award_all: wins(table, TiePolicy::AwardAll),
            wins_award_none: wins(table, TiePolicy::AwardNone),
            ar_mid: arithmetic_rank(&mid),
            gr_mid: geometric_rank(&mid),
            ar_min: arithmetic_rank(&min),
            gr_min: geometric_rank(&min),
            mpce: mpce(table)?,
        })
    }

    pub fn classifier(&self, name: &str) -> Option<usize> {
        self.classifiers.iter().position(|c| c == name)
    }

    /// One row per metric, one column per classifier.
    pub fn to_delimited(&self) -> String {
        let mut out = format!("metric,{}\n", self.classifiers.join(","));
        let ints = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let reals = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "wins_award_all,{}", ints(&self.wins_award_all));
        let _ = writeln!(out, "wins_award_none,{}", ints(&self.wins_award_none));
        let _ = writeln!(out, "ar_mid,{}", reals(&self.ar_mid));
        let _ = writeln!(out, "gr_mid,{}", reals(&self.gr_mid));
        let _ = writeln!(out, "ar_min,{}", reals(&self.ar_min));
        let _ = writeln!(out, "gr_min,{}", reals(&self.gr_min));
        let _ = writeln!(out, "mpce,{}", reals(&self.mpce));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[f64]]) -> ResultTable {
        let k = rows[0].len();
        ResultTable::new(
            (0..k).map(|c| format!("c{c}")).collect(),
            (0..rows.len()).map(|d| format!("d{d}")).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
            vec![2; rows.len()],
        )
        .unwrap()
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn rank_conventions() {
        assert_eq!(ranks(&table(&[&[0.9, 0.8, 0.7]]), TieRank::Mid), vec![vec![1.0, 2.0, 3.0]]);
        assert_eq!(ranks(&table(&[&[0.9, 0.9, 0.7]]), TieRank::Mid), vec![vec![1.5, 1.5, 3.0]]);
        assert_eq!(ranks(&table(&[&[0.9, 0.9, 0.7]]), TieRank::Min), vec![vec![1.0, 1.0, 3.0]]);
    }

    #[test]
    fn single_dataset_means_equal_rank() {
        let r = ranks(&table(&[&[0.5, 0.9, 0.7]]), TieRank::Mid);
        assert_eq!(arithmetic_rank(&r), vec![3.0, 1.0, 2.0]);
        let g = geometric_rank(&r);
        for (a, b) in g.iter().zip([3.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tie_policies() {
        let t = table(&[&[0.9, 0.9, 0.1], &[0.2, 0.3, 0.1]]);
        assert_eq!(wins(&t, TiePolicy::AwardAll), vec![1, 2, 0]);
        assert_eq!(wins(&t, TiePolicy::AwardNone), vec![0, 1, 0]);
    }

    #[test]
    fn pce_cases() {
        assert_eq!(pce(0.0, 3).unwrap(), 0.0);
        assert!(matches!(pce(0.1, 1), Err(Error::Contract(_))));
    }

    #[test]
    fn per_class_errors() {
        let e = per_class_error(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(e, vec![0.0, 1.0 / 3.0]);
    }

    #[test]
    fn missing_cells_list_coordinates() {
        let err = ResultTable::parse_delimited("dataset,classes,A,B\nX,2,0.5,\nY,3,,0.1\n", "t").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(X, B)") && msg.contains("(Y, A)"), "{msg}");
    }

    #[test]
    fn class_counts_fall_back_to_known_datasets() {
        let t = ResultTable::parse_delimited("dataset,A\nCar,0.5\n", "t").unwrap();
        assert_eq!(t.classes, vec![4]);
        assert!(ResultTable::parse_delimited("dataset,A\nMystery,0.5\n", "t").is_err());
    }

    #[test]
    fn delimited_round_trip() {
        let t = table(&[&[0.25, 0.5], &[1.0, 0.0]]);
        assert_eq!(ResultTable::parse_delimited(&t.to_delimited(), "t").unwrap(), t);
    }
}
