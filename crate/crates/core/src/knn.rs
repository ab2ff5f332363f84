//! Brute-force K-nearest-neighbour classification over feature rows or
//! precomputed dissimilarities.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dtw::DissimilarityMatrix;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// Euclidean distance between (optionally standardized) feature rows.
    #[default]
    EuclideanFeatures,
    /// Query rows already hold distances; columns are named by reference id.
    Precomputed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    mode: MetricMode,
    scaling: Option<Standardizer>,
    label_set: Vec<String>,
    train_labels: Vec<usize>,
    train_ids: Vec<String>,
    /// Euclidean mode: stored (possibly standardized) training rows.
    train_rows: Vec<Vec<f64>>,
    /// Precomputed mode: column of each training row within a query row.
    train_columns: Vec<usize>,
    n_columns: usize,
}

pub(crate) fn sorted_labels(labels: &[String]) -> Vec<String> {
    labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub(crate) fn label_indices(labels: &[String], label_set: &[String]) -> Vec<usize> {
    labels
        .iter()
        .map(|l| label_set.binary_search(l).expect("label present in label set"))
        .collect()
}

/// Fits a K-NN model on labeled rows.
pub fn knn_train(features: &FeatureMatrix, k: usize, mode: MetricMode, scale: bool) -> Result<KnnModel> {
    let n = features.n_rows();
    if n == 0 {
        return Err(Error::Empty);
    }
    if k == 0 || k > n {
        return Err(Error::Config(format!("k = {k} must lie in 1..={n}")));
    }
    let label_set = sorted_labels(&features.labels);
    let train_labels = label_indices(&features.labels, &label_set);
    let mut model = KnnModel {
        k,
        mode,
        scaling: None,
        label_set,
        train_labels,
        train_ids: features.row_ids.clone(),
        train_rows: Vec::new(),
        train_columns: Vec::new(),
        n_columns: features.n_features(),
    };
    match mode {
        MetricMode::EuclideanFeatures => {
            if scale {
                let s = Standardizer::fit(&features.rows)?;
                model.train_rows = features.rows.iter().map(|r| s.transform(r)).collect();
                model.scaling = Some(s);
            } else {
                model.train_rows = features.rows.clone();
            }
        }
        MetricMode::Precomputed => {
            let columns: HashMap<&str, usize> = features
                .names
                .iter()
                .enumerate()
                .map(|(j, name)| (name.as_str(), j))
                .collect();
            model.train_columns = features
                .row_ids
                .iter()
                .map(|id| {
                    columns
                        .get(id.as_str())
                        .copied()
                        .ok_or_else(|| Error::UnknownId(id.clone()))
                })
                .collect::<Result<_>>()?;
        }
    }
    Ok(model)
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn scaling(&self) -> Option<&Standardizer> {
        self.scaling.as_ref()
    }

    fn distances(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.n_columns {
            return Err(Error::Dimension {
                expected: self.n_columns,
                got: query.len(),
            });
        }
        Ok(match self.mode {
            MetricMode::EuclideanFeatures => {
                let q = match &self.scaling {
                    Some(s) => s.transform(query),
                    None => query.to_vec(),
                };
                self.train_rows
                    .iter()
                    .map(|r| {
                        r.iter()
                            .zip(&q)
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect()
            }
            MetricMode::Precomputed => self.train_columns.iter().map(|&c| query[c]).collect(),
        })
    }

    /// Majority label among the `k` nearest training rows.
    ///
    /// Distance ties at the k-th neighbour are resolved by label order, so the
    /// result does not depend on training row order. Vote ties go to the
    /// label with the smallest summed neighbour distance, then label order.
    pub fn predict(&self, query: &[f64]) -> Result<String> {
        let dist = self.distances(query)?;
        Ok(self.label_set[self.vote(&dist)].clone())
    }

    /// Precomputed-mode prediction for a profile of `matrix`.
    pub fn predict_id(&self, matrix: &DissimilarityMatrix, query_id: &str) -> Result<String> {
        if self.mode != MetricMode::Precomputed {
            return Err(Error::Config("predict_id needs a precomputed-mode model".into()));
        }
        let q = matrix.position(query_id)?;
        let dist = self
            .train_ids
            .iter()
            .map(|id| Ok(matrix.get(q, matrix.position(id)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.label_set[self.vote(&dist)].clone())
    }

    fn vote(&self, dist: &[f64]) -> usize {
        let mut order: Vec<usize> = (0..dist.len()).collect();
        order.sort_by(|&a, &b| {
            dist[a]
                .total_cmp(&dist[b])
                .then(self.train_labels[a].cmp(&self.train_labels[b]))
        });
        let mut counts = vec![0usize; self.label_set.len()];
        let mut sums = vec![0.0f64; self.label_set.len()];
        for &t in &order[..self.k] {
            counts[self.train_labels[t]] += 1;
            sums[self.train_labels[t]] += dist[t];
        }
        (0..self.label_set.len())
            .filter(|&l| counts[l] > 0)
            .min_by(|&a, &b| {
                counts[b]
                    .cmp(&counts[a])
                    .then(sums[a].total_cmp(&sums[b]))
                    .then(Ordering::Equal)
            })
            .expect("k >= 1 neighbours")
    }
}
