//! JSON classifier specs and the fit/predict interface the harness drives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureFamily, FeatureMatrix};
use crate::forest::{train_forest, ForestConfig, ForestModel};
use crate::knn::{knn_train, KnnModel, MetricMode};
use crate::rng::derive_seed;
use crate::svm::{svm_train, KernelKind, KernelSpec, SmoParams, SvmModel, DEFAULT_MAX_PASSES, DEFAULT_TOL};

/// Anything the harness can train on one fold and apply to another.
pub trait Classifier: Sync {
    fn fit(&self, train: &FeatureMatrix, seed: u64) -> Result<Box<dyn Predictor>>;
}

pub trait Predictor: Send + Sync {
    /// One label per test row. Implementations must not read `test.labels`.
    fn predict(&self, test: &FeatureMatrix) -> Result<Vec<String>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmSpec {
    pub kernel: KernelKind,
    /// `None` means `1 / p`.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub coef0: f64,
    #[serde(default = "yes")]
    pub scale: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_passes")]
    pub max_passes: usize,
}

fn default_degree() -> u32 {
    3
}
fn yes() -> bool {
    true
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_passes() -> usize {
    DEFAULT_MAX_PASSES
}
fn default_k() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default)]
        scale: bool,
        #[serde(default)]
        mode: MetricMode,
    },
    Svm(SvmSpec),
    Forest(ForestConfig),
}

/// A named classifier column, optionally restricted to some feature families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<FeatureFamily>>,
    #[serde(flatten)]
    pub kind: ClassifierKind,
}

impl ClassifierSpec {
    pub fn new(name: impl Into<String>, kind: ClassifierKind) -> Self {
        ClassifierSpec {
            name: name.into(),
            families: None,
            kind,
        }
    }

    pub fn applies_to(&self, family: FeatureFamily) -> bool {
        self.families.as_ref().is_none_or(|f| f.contains(&family))
    }
}

struct KnnPredictor(KnnModel);
struct SvmPredictor(SvmModel);
struct ForestPredictor(ForestModel);

fn predict_rows(test: &FeatureMatrix, f: impl Fn(&[f64]) -> Result<String>) -> Result<Vec<String>> {
    test.rows.iter().map(|r| f(r)).collect()
}

impl Predictor for KnnPredictor {
    fn predict(&self, test: &FeatureMatrix) -> Result<Vec<String>> {
        predict_rows(test, |r| self.0.predict(r))
    }
}

impl Predictor for SvmPredictor {
    fn predict(&self, test: &FeatureMatrix) -> Result<Vec<String>> {
        predict_rows(test, |r| self.0.predict(r))
    }
}

impl Predictor for ForestPredictor {
    fn predict(&self, test: &FeatureMatrix) -> Result<Vec<String>> {
        predict_rows(test, |r| self.0.predict(r))
    }
}

impl Classifier for ClassifierKind {
    fn fit(&self, train: &FeatureMatrix, seed: u64) -> Result<Box<dyn Predictor>> {
        match self {
            ClassifierKind::Knn { k, scale, mode } => {
                if *mode == MetricMode::Precomputed && train.family != FeatureFamily::Dissimilarity {
                    return Err(Error::Config(
                        "precomputed K-NN needs dissimilarity features".into(),
                    ));
                }
                Ok(Box::new(KnnPredictor(knn_train(train, *k, *mode, *scale)?)))
            }
            ClassifierKind::Svm(s) => {
                let gamma = s.gamma.unwrap_or(1.0 / train.n_features().max(1) as f64);
                let kernel = match s.kernel {
                    KernelKind::Rbf => KernelSpec::rbf(gamma),
                    KernelKind::Polynomial => KernelSpec::polynomial(gamma, s.degree, s.coef0),
                };
                let params = SmoParams {
                    c: s.c,
                    tol: s.tol,
                    max_passes: s.max_passes,
                };
                Ok(Box::new(SvmPredictor(svm_train(train, kernel, params, s.scale, seed)?)))
            }
            ClassifierKind::Forest(cfg) => {
                let cfg = ForestConfig {
                    seed: derive_seed(seed, &[cfg.seed]),
                    ..*cfg
                };
                Ok(Box::new(ForestPredictor(train_forest(train, &cfg)?)))
            }
        }
    }
}

impl Classifier for ClassifierSpec {
    fn fit(&self, train: &FeatureMatrix, seed: u64) -> Result<Box<dyn Predictor>> {
        self.kind.fit(train, seed)
    }
}
