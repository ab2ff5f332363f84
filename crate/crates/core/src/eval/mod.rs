//! Stratified repeated cross-validation over (feature family x classifier).

mod classifier;
mod report;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use classifier::{Classifier, ClassifierKind, ClassifierSpec, Predictor, SvmSpec};
pub use report::{
    compare_cells, contingency, render_contingency, render_report, render_text, CellReport, Comparison, Contingency,
    CvReport, DissimilarityReference,
};

use crate::dtw::{dissimilarity_columns, DissimilarityMatrix, DtwConfig};
use crate::error::{Error, Result};
use crate::features::{extract, FeatureFamily, FeatureMatrix};
use crate::knn::sorted_labels;
use crate::rng::{derive_seed, role, substream};
use crate::signal::Dataset;

/// Fold assignment for every repeat: `assignment[r][i]` is the fold of
/// profile `i` in repeat `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub assignment: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn test_indices(&self, repeat: usize, fold: usize) -> Vec<usize> {
        (0..self.assignment[repeat].len())
            .filter(|&i| self.assignment[repeat][i] == fold)
            .collect()
    }

    pub fn train_indices(&self, repeat: usize, fold: usize) -> Vec<usize> {
        (0..self.assignment[repeat].len())
            .filter(|&i| self.assignment[repeat][i] != fold)
            .collect()
    }

    /// Profiles whose fold is in `folds`, in dataset order.
    pub fn indices_in(&self, repeat: usize, folds: &[usize]) -> Vec<usize> {
        (0..self.assignment[repeat].len())
            .filter(|&i| folds.contains(&self.assignment[repeat][i]))
            .collect()
    }
}

/// Per repeat, shuffles each label's profiles with the substream
/// `(seed, FOLDS, repeat, label)` and deals them round-robin into `k` folds.
/// The deal continues across labels, so fold sizes also differ by at most 1.
pub fn stratified_folds(labels: &[String], k: usize, repeats: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need k >= 2 folds, got {k}")));
    }
    if repeats == 0 {
        return Err(Error::Config("need at least one repeat".into()));
    }
    let label_set = sorted_labels(labels);
    let members: Vec<Vec<usize>> = label_set
        .iter()
        .map(|l| (0..labels.len()).filter(|&i| &labels[i] == l).collect())
        .collect();
    for (l, m) in label_set.iter().zip(&members) {
        if m.len() < k {
            return Err(Error::LabelTooSmall {
                label: l.clone(),
                count: m.len(),
                k,
            });
        }
    }
    let assignment = (0..repeats)
        .map(|r| {
            let mut fold_of = vec![0usize; labels.len()];
            let mut next = 0;
            for (li, m) in members.iter().enumerate() {
                let mut m = m.clone();
                m.shuffle(&mut substream(seed, &[role::FOLDS, r as u64, li as u64]));
                for i in m {
                    fold_of[i] = next % k;
                    next += 1;
                }
            }
            fold_of
        })
        .collect();
    Ok(FoldPlan {
        k,
        repeats,
        seed,
        assignment,
    })
}

/// Where a family's fold matrices come from.
#[derive(Debug, Clone)]
pub enum FamilyData<'a> {
    /// Fold-independent per-profile features.
    Fixed(FeatureMatrix),
    /// Columns sliced from a DTW matrix per fold.
    Dissimilarity {
        matrix: &'a DissimilarityMatrix,
        ids: Vec<String>,
        paper_mode: bool,
    },
}

impl<'a> FamilyData<'a> {
    pub fn prepare(
        dataset: &Dataset,
        family: FeatureFamily,
        dtw: Option<&'a DissimilarityMatrix>,
        paper_mode: bool,
    ) -> Result<Self> {
        match family {
            FeatureFamily::Dissimilarity => {
                let matrix = dtw.ok_or_else(|| {
                    Error::Config("dissimilarity features need a DTW matrix".into())
                })?;
                Ok(FamilyData::Dissimilarity {
                    matrix,
                    ids: dataset.ids(),
                    paper_mode,
                })
            }
            f => Ok(FamilyData::Fixed(extract(dataset, f)?)),
        }
    }

    pub fn family(&self) -> FeatureFamily {
        match self {
            FamilyData::Fixed(m) => m.family,
            FamilyData::Dissimilarity { .. } => FeatureFamily::Dissimilarity,
        }
    }

    /// Training and test matrices. Dissimilarity columns reference the
    /// training profiles only, unless `paper_mode` is set (all profiles).
    pub fn split(&self, train: &[usize], test: &[usize]) -> Result<(FeatureMatrix, FeatureMatrix)> {
        match self {
            FamilyData::Fixed(m) => Ok((m.select_rows(train), m.select_rows(test))),
            FamilyData::Dissimilarity {
                matrix,
                ids,
                paper_mode,
            } => {
                let train_ids: Vec<String> = train.iter().map(|&i| ids[i].clone()).collect();
                let test_ids: Vec<String> = test.iter().map(|&i| ids[i].clone()).collect();
                let reference = if *paper_mode { ids.clone() } else { train_ids.clone() };
                Ok((
                    dissimilarity_columns(matrix, &reference, &train_ids)?,
                    dissimilarity_columns(matrix, &reference, &test_ids)?,
                ))
            }
        }
    }
}

/// Outcome of one train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub test: Vec<usize>,
    pub predictions: Vec<String>,
    pub accuracy: f64,
}

fn accuracy(pred: &[String], truth: &[String]) -> f64 {
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    correct as f64 / truth.len() as f64
}

fn run_split(
    data: &FamilyData<'_>,
    classifier: &dyn Classifier,
    train: &[usize],
    test: &[usize],
    seed: u64,
) -> Result<FoldOutcome> {
    let (train_m, test_m) = data.split(train, test)?;
    let model = classifier.fit(&train_m, seed)?;
    let predictions = model.predict(&test_m)?;
    if predictions.len() != test.len() {
        return Err(Error::Dimension {
            expected: test.len(),
            got: predictions.len(),
        });
    }
    Ok(FoldOutcome {
        accuracy: accuracy(&predictions, &test_m.labels),
        test: test.to_vec(),
        predictions,
    })
}

/// Seed handed to the classifier for `(repeat, fold)` of a plan.
pub fn fold_seed(plan_seed: u64, repeat: usize, fold: usize) -> u64 {
    derive_seed(plan_seed, &[role::CLASSIFIER, repeat as u64, fold as u64])
}

/// `outcomes[r][f]` for every repeat and fold of the plan.
pub fn cross_validate_data(
    data: &FamilyData<'_>,
    classifier: &dyn Classifier,
    plan: &FoldPlan,
) -> Result<Vec<Vec<FoldOutcome>>> {
    (0..plan.repeats)
        .map(|r| {
            (0..plan.k)
                .map(|f| {
                    run_split(
                        data,
                        classifier,
                        &plan.train_indices(r, f),
                        &plan.test_indices(r, f),
                        fold_seed(plan.seed, r, f),
                    )
                })
                .collect()
        })
        .collect()
}

/// Cross-validates one classifier on one feature family of `dataset`.
pub fn cross_validate(
    dataset: &Dataset,
    family: FeatureFamily,
    classifier: &dyn Classifier,
    plan: &FoldPlan,
    dtw: Option<&DissimilarityMatrix>,
    paper_mode: bool,
) -> Result<Vec<Vec<FoldOutcome>>> {
    let data = FamilyData::prepare(dataset, family, dtw, paper_mode)?;
    cross_validate_data(&data, classifier, plan)
}

/// Mean of fold accuracies per repeat, then mean over repeats.
pub fn average_accuracy(outcomes: &[Vec<FoldOutcome>]) -> f64 {
    let per_repeat: Vec<f64> = outcomes
        .iter()
        .map(|folds| folds.iter().map(|o| o.accuracy).sum::<f64>() / folds.len() as f64)
        .collect();
    per_repeat.iter().sum::<f64>() / per_repeat.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub test_fold: usize,
    pub validation_fold: usize,
    pub chosen: usize,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedReport {
    pub rotations: Vec<Rotation>,
    pub mean_test_accuracy: f64,
}

/// Five stratified folds; rotation `r` tests on fold `r`, validates on fold
/// `r + 1 (mod 5)` and trains on the other three. The candidate with the best
/// validation accuracy (first on ties) is scored on the test fold.
pub fn five_fold_validated(
    data: &FamilyData<'_>,
    labels: &[String],
    candidates: &[&dyn Classifier],
    seed: u64,
) -> Result<ValidatedReport> {
    if candidates.is_empty() {
        return Err(Error::Config("no hyperparameter candidates".into()));
    }
    const K: usize = 5;
    let plan = stratified_folds(labels, K, 1, seed)?;
    let rotations = (0..K)
        .map(|t| {
            let v = (t + 1) % K;
            let train_folds: Vec<usize> = (0..K).filter(|&f| f != t && f != v).collect();
            let train = plan.indices_in(0, &train_folds);
            let val = plan.test_indices(0, v);
            let test = plan.test_indices(0, t);
            let fseed = derive_seed(seed, &[role::VALIDATION, t as u64]);
            let mut chosen = 0;
            let mut best = f64::NEG_INFINITY;
            for (ci, c) in candidates.iter().enumerate() {
                let acc = run_split(data, *c, &train, &val, fseed)?.accuracy;
                if acc > best {
                    best = acc;
                    chosen = ci;
                }
            }
            let test_accuracy = run_split(data, candidates[chosen], &train, &test, fseed)?.accuracy;
            Ok(Rotation {
                test_fold: t,
                validation_fold: v,
                chosen,
                validation_accuracy: best,
                test_accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_test_accuracy = rotations.iter().map(|r| r.test_accuracy).sum::<f64>() / K as f64;
    Ok(ValidatedReport {
        rotations,
        mean_test_accuracy,
    })
}

/// Full experiment definition, read from the `evaluate` JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub families: Vec<FeatureFamily>,
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default = "default_folds")]
    pub k: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paper_mode: bool,
    #[serde(default)]
    pub dtw: DtwConfig,
    #[serde(default)]
    pub comparisons: Vec<Comparison>,
}

fn default_folds() -> usize {
    4
}
fn default_repeats() -> usize {
    10
}

impl EvalConfig {
    /// The shipped six-classifier, three-family benchmark configuration.
    pub fn reference() -> EvalConfig {
        serde_json::from_str(include_str!("../../configs/reference_eval.json"))
            .expect("bundled reference eval config parses")
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in &self.families {
            for c in self.classifiers.iter().filter(|c| c.applies_to(*f)) {
                if !seen.insert((*f, c.name.as_str())) {
                    return Err(Error::Config(format!(
                        "classifier name {} appears twice for family {f}",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Runs every applicable (family, classifier) cell of the grid.
pub fn evaluate(dataset: &Dataset, config: &EvalConfig, dtw: Option<&DissimilarityMatrix>) -> Result<CvReport> {
    config.validate()?;
    let labels = dataset.labels()?;
    let plan = stratified_folds(&labels, config.k, config.repeats, config.seed)?;
    let families = config
        .families
        .iter()
        .map(|&f| FamilyData::prepare(dataset, f, dtw, config.paper_mode))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(&FamilyData<'_>, &ClassifierSpec)> = families
        .iter()
        .flat_map(|d| {
            config
                .classifiers
                .iter()
                .filter(move |c| c.applies_to(d.family()))
                .map(move |c| (d, c))
        })
        .collect();
    let results = cells
        .par_iter()
        .map(|(data, spec)| {
            let outcomes = cross_validate_data(data, *spec, &plan)?;
            Ok(CellReport::from_outcomes(data.family(), spec, &outcomes, dataset.label_set()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport {
        label_set: dataset.label_set().to_vec(),
        ids: dataset.ids(),
        truth: report::indices_of(&labels, dataset.label_set()),
        k: plan.k,
        repeats: plan.repeats,
        seed: plan.seed,
        dissimilarity_reference: if config.paper_mode {
            DissimilarityReference::AllProfiles
        } else {
            DissimilarityReference::TrainingFold
        },
        assignment: plan.assignment,
        cells: results,
        comparisons: config.comparisons.clone(),
    })
}
