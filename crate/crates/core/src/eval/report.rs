//! Accuracy and contingency reports in JSON and plain-text table form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierSpec, FoldOutcome};
use crate::error::{Error, Result};
use crate::features::FeatureFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissimilarityReference {
    /// Columns reference the training fold only.
    TrainingFold,
    /// Columns reference every profile of the dataset.
    AllProfiles,
}

/// Results of one (family, classifier) grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub family: FeatureFamily,
    pub classifier: String,
    pub spec: ClassifierSpec,
    /// `fold_accuracy[repeat][fold]`.
    pub fold_accuracy: Vec<Vec<f64>>,
    pub repeat_mean: Vec<f64>,
    pub mean: f64,
    /// `predictions[repeat][fold]`: label indices for the fold's test
    /// profiles in dataset order.
    pub predictions: Vec<Vec<Vec<usize>>>,
}

pub(crate) fn indices_of(labels: &[String], label_set: &[String]) -> Vec<usize> {
    labels
        .iter()
        .map(|l| label_set.iter().position(|s| s == l).unwrap_or(usize::MAX))
        .collect()
}

impl CellReport {
    pub fn id(&self) -> String {
        format!("{}/{}", self.family, self.classifier)
    }

    pub(crate) fn from_outcomes(
        family: FeatureFamily,
        spec: &ClassifierSpec,
        outcomes: &[Vec<FoldOutcome>],
        label_set: &[String],
    ) -> Self {
        let fold_accuracy: Vec<Vec<f64>> = outcomes
            .iter()
            .map(|folds| folds.iter().map(|o| o.accuracy).collect())
            .collect();
        let repeat_mean: Vec<f64> = fold_accuracy
            .iter()
            .map(|f| f.iter().sum::<f64>() / f.len() as f64)
            .collect();
        let mean = repeat_mean.iter().sum::<f64>() / repeat_mean.len() as f64;
        CellReport {
            family,
            classifier: spec.name.clone(),
            spec: spec.clone(),
            fold_accuracy,
            repeat_mean,
            mean,
            predictions: outcomes
                .iter()
                .map(|folds| {
                    folds
                        .iter()
                        .map(|o| indices_of(&o.predictions, label_set))
                        .collect()
                })
                .collect(),
        }
    }

    /// Mean accuracy of fold `f` over repeats.
    pub fn fold_mean(&self, f: usize) -> f64 {
        self.fold_accuracy.iter().map(|r| r[f]).sum::<f64>() / self.fold_accuracy.len() as f64
    }
}

/// A requested 2x2 comparison between two cells, by `family/classifier` id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    #[serde(default)]
    pub repeat: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub label_set: Vec<String>,
    pub ids: Vec<String>,
    pub truth: Vec<usize>,
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub dissimilarity_reference: DissimilarityReference,
    /// `assignment[repeat][profile]` = fold index.
    pub assignment: Vec<Vec<usize>>,
    pub cells: Vec<CellReport>,
    #[serde(default)]
    pub comparisons: Vec<Comparison>,
}

impl CvReport {
    pub fn cell(&self, id: &str) -> Result<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.id() == id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn test_indices(&self, repeat: usize, fold: usize) -> Vec<usize> {
        (0..self.ids.len())
            .filter(|&i| self.assignment[repeat][i] == fold)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Joint correctness counts of two prediction sets on one fold.
/// `tf` counts items A gets right and B gets wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Contingency {
    pub tt: usize,
    pub tf: usize,
    pub ft: usize,
    pub ff: usize,
}

impl Contingency {
    pub fn total(&self) -> usize {
        self.tt + self.tf + self.ft + self.ff
    }

    /// Accuracy of condition A.
    pub fn accuracy_a(&self) -> f64 {
        (self.tt + self.tf) as f64 / self.total() as f64
    }

    pub fn accuracy_b(&self) -> f64 {
        (self.tt + self.ft) as f64 / self.total() as f64
    }
}

pub fn contingency<T: PartialEq>(preds_a: &[T], preds_b: &[T], truth: &[T]) -> Result<Contingency> {
    if preds_a.len() != truth.len() || preds_b.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: if preds_a.len() != truth.len() {
                preds_a.len()
            } else {
                preds_b.len()
            },
        });
    }
    let mut c = Contingency::default();
    for ((a, b), t) in preds_a.iter().zip(preds_b).zip(truth) {
        match (a == t, b == t) {
            (true, true) => c.tt += 1,
            (true, false) => c.tf += 1,
            (false, true) => c.ft += 1,
            (false, false) => c.ff += 1,
        }
    }
    Ok(c)
}

/// Per-fold contingency tables of two cells for one repeat.
pub fn compare_cells(report: &CvReport, a: &str, b: &str, repeat: usize) -> Result<Vec<Contingency>> {
    if repeat >= report.repeats {
        return Err(Error::Config(format!(
            "repeat {repeat} out of range (report has {})",
            report.repeats
        )));
    }
    let (ca, cb) = (report.cell(a)?, report.cell(b)?);
    (0..report.k)
        .map(|f| {
            let truth: Vec<usize> = report
                .test_indices(repeat, f)
                .iter()
                .map(|&i| report.truth[i])
                .collect();
            contingency(&ca.predictions[repeat][f], &cb.predictions[repeat][f], &truth)
        })
        .collect()
}

fn family_title(f: FeatureFamily) -> &'static str {
    match f {
        FeatureFamily::Derived => "DERIVED",
        FeatureFamily::Proposed => "PROPOSED",
        FeatureFamily::Dissimilarity => "DISSIMILARITY",
    }
}

/// Accuracy tables (folds x classifiers, percent) per family followed by the
/// requested contingency tables.
pub fn render_text(report: &CvReport, comparisons: &[Comparison]) -> Result<String> {
    if report.cells.is_empty() {
        return Err(Error::NothingToRender);
    }
    let mut out = String::new();
    let mut families: Vec<FeatureFamily> = Vec::new();
    for c in &report.cells {
        if !families.contains(&c.family) {
            families.push(c.family);
        }
    }
    for family in families {
        let cells: Vec<&CellReport> = report.cells.iter().filter(|c| c.family == family).collect();
        let width = cells.iter().map(|c| c.classifier.len()).max().unwrap_or(0).max(7) + 2;
        writeln!(
            out,
            "ACCURACY OF TEST RECOGNITION ON THE {} FEATURES (%)",
            family_title(family)
        )
        .unwrap();
        if family == FeatureFamily::Dissimilarity {
            let note = match report.dissimilarity_reference {
                DissimilarityReference::TrainingFold => "columns reference the training fold",
                DissimilarityReference::AllProfiles => "columns reference all profiles",
            };
            writeln!(out, "({note})").unwrap();
        }
        write!(out, "{:<10}", "Classifier").unwrap();
        for c in &cells {
            write!(out, "{:>width$}", c.classifier).unwrap();
        }
        writeln!(out).unwrap();
        for f in 0..report.k {
            write!(out, "{:<10}", format!("Fold{}", f + 1)).unwrap();
            for c in &cells {
                write!(out, "{:>width$.2}", 100.0 * c.fold_mean(f)).unwrap();
            }
            writeln!(out).unwrap();
        }
        write!(out, "{:<10}", "Average").unwrap();
        for c in &cells {
            write!(out, "{:>width$.2}", 100.0 * c.mean).unwrap();
        }
        writeln!(out).unwrap();
        writeln!(out).unwrap();
    }
    for cmp in comparisons {
        out.push_str(&render_contingency(report, cmp)?);
        writeln!(out).unwrap();
    }
    Ok(out)
}

/// One 2x2 table per fold for the comparison's repeat.
pub fn render_contingency(report: &CvReport, cmp: &Comparison) -> Result<String> {
    let mut out = String::new();
    let tables = compare_cells(report, &cmp.a, &cmp.b, cmp.repeat)?;
    writeln!(
        out,
        "CONTINGENCY TABLE: rows {} / columns {} (repeat {}; T: true label, F: false label)",
        cmp.a,
        cmp.b,
        cmp.repeat + 1
    )
    .unwrap();
    write!(out, "{:<4}", "").unwrap();
    for f in 0..tables.len() {
        write!(out, "{:>14}", format!("Fold {}", f + 1)).unwrap();
    }
    writeln!(out).unwrap();
    write!(out, "{:<4}", "").unwrap();
    for _ in &tables {
        write!(out, "{:>7}{:>7}", "T", "F").unwrap();
    }
    writeln!(out).unwrap();
    for (name, row) in [("T", 0), ("F", 1)] {
        write!(out, "{name:<4}").unwrap();
        for t in &tables {
            let (x, y) = if row == 0 { (t.tt, t.tf) } else { (t.ft, t.ff) };
            write!(out, "{x:>7}{y:>7}").unwrap();
        }
        writeln!(out).unwrap();
    }
    Ok(out)
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn render_report(report: &CvReport, comparisons: &[Comparison], dir: &Path) -> Result<()> {
    let text = render_text(report, comparisons)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    fs::write(&json_path, report.to_json()?).map_err(|e| Error::io(&json_path, e))?;
    let txt_path = dir.join("report.txt");
    fs::write(&txt_path, text).map_err(|e| Error::io(&txt_path, e))
}
