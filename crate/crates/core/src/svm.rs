//! Support vector classification: simplified-Platt SMO binary machines
//! combined one-vs-one.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer};
use crate::knn::{label_indices, sorted_labels};
use crate::rng::{derive_seed, role, substream};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_PASSES: usize = 10;
/// Hard cap on SMO sweeps, in case `max_passes` quiet sweeps never occur.
const MAX_SWEEPS: usize = 10_000;
const MIN_ALPHA_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    #[serde(rename = "poly")]
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: f64,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub coef0: f64,
}

fn default_degree() -> u32 {
    3
}

impl KernelSpec {
    pub fn rbf(gamma: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Rbf,
            gamma,
            degree: 1,
            coef0: 0.0,
        }
    }

    pub fn polynomial(gamma: f64, degree: u32, coef0: f64) -> Self {
        KernelSpec {
            kind: KernelKind::Polynomial,
            gamma,
            degree,
            coef0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config(format!("kernel gamma must be > 0, got {}", self.gamma)));
        }
        if self.kind == KernelKind::Polynomial && self.degree == 0 {
            return Err(Error::Config("polynomial degree must be >= 1".into()));
        }
        Ok(())
    }

    fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => {
                let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Polynomial => {
                let dot: f64 = x.iter().zip(z).map(|(a, b)| a * b).sum();
                (self.gamma * dot + self.coef0).powi(self.degree as i32)
            }
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: z.len(),
        });
    }
    Ok(spec.eval(x, z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        SmoParams {
            c: 1.0,
            tol: DEFAULT_TOL,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

/// A trained two-class machine. Only rows with `alpha > 0` are retained.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMachine {
    pub support: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
    pub bias: f64,
    pub kernel: KernelSpec,
    pub c: f64,
}

impl BinaryMachine {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(self.alpha.iter().zip(&self.y))
            .map(|(s, (a, y))| a * y * self.kernel.eval(s, x))
            .sum::<f64>()
            + self.bias
    }

    /// `sum(alpha_i * y_i)`, zero for a feasible dual point.
    pub fn dual_balance(&self) -> f64 {
        self.alpha.iter().zip(&self.y).map(|(a, y)| a * y).sum()
    }
}

/// Simplified SMO on rows labeled +1 / -1.
///
/// Sweeps every row; a row violating the KKT conditions by more than `tol`
/// is paired with a second row drawn uniformly at random from the seeded
/// stream. Stops after `max_passes` consecutive sweeps change nothing.
pub fn svm_train_binary(
    rows: &[Vec<f64>],
    labels: &[f64],
    kernel: KernelSpec,
    params: SmoParams,
    seed: u64,
) -> Result<BinaryMachine> {
    kernel.validate()?;
    let SmoParams { c, tol, max_passes } = params;
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::Config(format!("C must be > 0, got {c}")));
    }
    let n = rows.len();
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: labels.len(),
        });
    }
    if let Some(l) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
        return Err(Error::Config(format!("binary labels must be +1 or -1, got {l}")));
    }
    if !(labels.contains(&1.0) && labels.contains(&-1.0)) {
        return Err(Error::TooFewLabels(1));
    }

    let gram: Vec<Vec<f64>> = rows
        .iter()
        .map(|x| rows.iter().map(|z| kernel.eval(x, z)).collect())
        .collect();
    let y = labels;
    let mut alpha = vec![0.0; n];
    let mut b = 0.0;
    let mut rng = substream(seed, &[]);
    let f = |alpha: &[f64], b: f64, i: usize| -> f64 {
        (0..n)
            .filter(|&k| alpha[k] > 0.0)
            .map(|k| alpha[k] * y[k] * gram[k][i])
            .sum::<f64>()
            + b
    };

    let mut quiet = 0;
    let mut sweeps = 0;
    while quiet < max_passes && sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut changed = 0;
        for i in 0..n {
            let e_i = f(&alpha, b, i) - y[i];
            let r = y[i] * e_i;
            if !((r < -tol && alpha[i] < c) || (r > tol && alpha[i] > 0.0)) {
                continue;
            }
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let e_j = f(&alpha, b, j) - y[j];
            let (ai_old, aj_old) = (alpha[i], alpha[j]);
            let (lo, hi) = if y[i] != y[j] {
                ((aj_old - ai_old).max(0.0), (c + aj_old - ai_old).min(c))
            } else {
                ((ai_old + aj_old - c).max(0.0), (ai_old + aj_old).min(c))
            };
            if lo >= hi {
                continue;
            }
            let eta = 2.0 * gram[i][j] - gram[i][i] - gram[j][j];
            if eta >= 0.0 {
                continue;
            }
            let aj = (aj_old - y[j] * (e_i - e_j) / eta).clamp(lo, hi);
            if (aj - aj_old).abs() < MIN_ALPHA_STEP * (1.0 + c) {
                continue;
            }
            let ai = (ai_old + y[i] * y[j] * (aj_old - aj)).clamp(0.0, c);
            alpha[i] = ai;
            alpha[j] = aj;
            let b1 = b - e_i - y[i] * (ai - ai_old) * gram[i][i] - y[j] * (aj - aj_old) * gram[i][j];
            let b2 = b - e_j - y[i] * (ai - ai_old) * gram[i][j] - y[j] * (aj - aj_old) * gram[j][j];
            b = if ai > 0.0 && ai < c {
                b1
            } else if aj > 0.0 && aj < c {
                b2
            } else {
                (b1 + b2) / 2.0
            };
            changed += 1;
        }
        quiet = if changed == 0 { quiet + 1 } else { 0 };
    }

    let keep: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
    Ok(BinaryMachine {
        support: keep.iter().map(|&i| rows[i].clone()).collect(),
        alpha: keep.iter().map(|&i| alpha[i]).collect(),
        y: keep.iter().map(|&i| y[i]).collect(),
        bias: b,
        kernel,
        c,
    })
}

/// One binary machine for labels `(positive, negative)` of the label set.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMachine {
    pub positive: usize,
    pub negative: usize,
    pub machine: BinaryMachine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub label_set: Vec<String>,
    pub machines: Vec<PairMachine>,
    pub scaling: Option<Standardizer>,
    pub n_features: usize,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Trains one machine per label pair on standardized (when `scale`) rows.
///
/// Rows are put in a canonical order (label, then values) before training;
/// the fitted model does not depend on input row order.
pub fn svm_train(
    features: &FeatureMatrix,
    kernel: KernelSpec,
    params: SmoParams,
    scale: bool,
    seed: u64,
) -> Result<SvmModel> {
    let label_set = sorted_labels(&features.labels);
    if label_set.len() < 2 {
        return Err(Error::TooFewLabels(label_set.len()));
    }
    let raw_labels = label_indices(&features.labels, &label_set);
    let mut order: Vec<usize> = (0..features.n_rows()).collect();
    order.sort_by(|&a, &b| {
        raw_labels[a]
            .cmp(&raw_labels[b])
            .then(lexicographic(&features.rows[a], &features.rows[b]))
    });
    let labels: Vec<usize> = order.iter().map(|&i| raw_labels[i]).collect();
    let sorted_rows: Vec<Vec<f64>> = order.iter().map(|&i| features.rows[i].clone()).collect();
    let scaling = if scale {
        Some(Standardizer::fit(&sorted_rows)?)
    } else {
        None
    };
    let rows: Vec<Vec<f64>> = match &scaling {
        Some(s) => sorted_rows.iter().map(|r| s.transform(r)).collect(),
        None => sorted_rows,
    };

    let l = label_set.len();
    let pairs: Vec<(usize, usize)> = (0..l).flat_map(|a| (a + 1..l).map(move |b| (a, b))).collect();
    let machines = pairs
        .par_iter()
        .enumerate()
        .map(|(k, &(pos, neg))| {
            let idx: Vec<usize> = (0..rows.len())
                .filter(|&i| labels[i] == pos || labels[i] == neg)
                .collect();
            let sub: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
            let y: Vec<f64> = idx
                .iter()
                .map(|&i| if labels[i] == pos { 1.0 } else { -1.0 })
                .collect();
            let machine =
                svm_train_binary(&sub, &y, kernel, params, derive_seed(seed, &[role::SVM_PAIR, k as u64]))?;
            Ok(PairMachine {
                positive: pos,
                negative: neg,
                machine,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SvmModel {
        label_set,
        machines,
        scaling,
        n_features: features.n_features(),
    })
}

impl SvmModel {
    /// One-vs-one vote. Vote ties go to the tied label with the largest
    /// summed |decision| over the machines it won, then to label order.
    pub fn predict(&self, query: &[f64]) -> Result<String> {
        if query.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: query.len(),
            });
        }
        let x = match &self.scaling {
            Some(s) => s.transform(query),
            None => query.to_vec(),
        };
        let decisions: Vec<f64> = self.machines.iter().map(|m| m.machine.decision(&x)).collect();
        Ok(self.label_set[self.tally(&decisions)].clone())
    }

    fn tally(&self, decisions: &[f64]) -> usize {
        let l = self.label_set.len();
        let mut votes = vec![0usize; l];
        let mut margin = vec![0.0f64; l];
        for (m, &d) in self.machines.iter().zip(decisions) {
            let winner = if d > 0.0 { m.positive } else { m.negative };
            votes[winner] += 1;
            margin[winner] += d.abs();
        }
        (0..l)
            .min_by(|&a, &b| votes[b].cmp(&votes[a]).then(margin[b].total_cmp(&margin[a])))
            .expect("at least two labels")
    }
}
