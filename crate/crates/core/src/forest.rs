//! CART trees and the RF / RRF / GRRF / GRF ensembles.
//!
//! All four variants share one tree grower. A variant only changes the
//! per-feature gain multiplier `lambda_f` and whether features already used
//! somewhere in the forest (the selected set `F`) are exempt from it:
//!
//! | variant | `lambda_f`                               | `F` exempt |
//! |---------|------------------------------------------|------------|
//! | RF      | 1                                        | -          |
//! | RRF     | `lambda`                                 | yes        |
//! | GRRF    | `(1 - gamma) * lambda + gamma * imp'_f`  | yes        |
//! | GRF     | `(1 - gamma) + gamma * imp'_f`           | no         |
//!
//! `imp'` is the max-normalized Gini importance of a preliminary plain RF.
//! RRF and GRRF grow trees sequentially, with `F` accreting across trees;
//! RF and GRF trees are independent and grown in parallel. Tree `t` always
//! draws from the substream `(seed, FOREST_TREE, t)`: first the bootstrap,
//! then the candidate features of each node in depth-first (left first)
//! order.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::knn::{label_indices, sorted_labels};
use crate::rng::{derive_seed, role, substream, StreamRng};

pub const DEFAULT_NTREE: usize = 500;
pub const DEFAULT_LAMBDA: f64 = 0.8;
pub const DEFAULT_GRRF_GAMMA: f64 = 0.1;
pub const DEFAULT_GRF_GAMMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForestVariant {
    Rf,
    Rrf,
    Grrf,
    Grf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub variant: ForestVariant,
    #[serde(default = "default_ntree")]
    pub ntree: usize,
    /// `None` means `ceil(sqrt(p))`.
    #[serde(default)]
    pub mtry: Option<usize>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// `None` means the variant default (GRRF 0.1, GRF 1).
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_min_node")]
    pub min_node: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_ntree() -> usize {
    DEFAULT_NTREE
}
fn default_lambda() -> f64 {
    DEFAULT_LAMBDA
}
fn default_min_node() -> usize {
    1
}

impl ForestConfig {
    pub fn new(variant: ForestVariant) -> Self {
        ForestConfig {
            variant,
            ntree: DEFAULT_NTREE,
            mtry: None,
            lambda: DEFAULT_LAMBDA,
            gamma: None,
            min_node: 1,
            seed: 0,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(match self.variant {
            ForestVariant::Grf => DEFAULT_GRF_GAMMA,
            _ => DEFAULT_GRRF_GAMMA,
        })
    }

    pub fn mtry_for(&self, p: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
    }

    fn validate(&self, p: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.ntree == 0 {
            return bad("ntree must be >= 1".into());
        }
        let mtry = self.mtry_for(p);
        if mtry == 0 || mtry > p {
            return bad(format!("mtry = {mtry} must lie in 1..={p}"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda = {} must lie in (0, 1]", self.lambda));
        }
        let g = self.gamma();
        if !(0.0..=1.0).contains(&g) {
            return bad(format!("gamma = {g} must lie in [0, 1]"));
        }
        if self.min_node == 0 {
            return bad("min_node must be >= 1".into());
        }
        Ok(())
    }
}

/// `1 - sum((c_i / n)^2)`.
pub fn gini_impurity(counts: &[usize]) -> Result<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::Empty);
    }
    Ok(gini_from_sumsq(counts.iter().map(|&c| c * c).sum(), n))
}

fn gini_from_sumsq(sumsq: usize, n: usize) -> f64 {
    1.0 - sumsq as f64 / (n * n) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Unpenalized impurity decrease.
    pub gain: f64,
    /// Gain after the feature's penalty multiplier.
    pub effective_gain: f64,
}

/// Column-major training data shared by the tree grower.
pub struct TrainingData<'a> {
    pub columns: &'a [Vec<f64>],
    pub labels: &'a [usize],
    pub n_labels: usize,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

/// Best penalized split of `rows` over `candidates`.
///
/// A feature in `selected` (when given) keeps its raw gain; any other
/// feature's gain is scaled by `penalties[f]`. Ties go to the lowest feature
/// index, then the lowest threshold. Each child must keep `min_node` rows.
pub fn best_split(
    data: &TrainingData<'_>,
    rows: &[usize],
    candidates: &[usize],
    penalties: &[f64],
    selected: Option<&[bool]>,
    min_node: usize,
) -> Option<Split> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    let mut parent = vec![0usize; data.n_labels];
    for &r in rows {
        parent[data.labels[r]] += 1;
    }
    if parent.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let parent_sumsq: usize = parent.iter().map(|c| c * c).sum();
    let parent_gini = gini_from_sumsq(parent_sumsq, n);

    let mut sorted_candidates = candidates.to_vec();
    sorted_candidates.sort_unstable();
    let mut best: Option<Split> = None;
    let mut best_eff = 0.0;
    let mut buf: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0usize; data.n_labels];
    for &f in &sorted_candidates {
        let col = &data.columns[f];
        buf.clear();
        buf.extend(rows.iter().map(|&r| (col[r], data.labels[r])));
        buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let multiplier = match selected {
            Some(sel) if sel[f] => 1.0,
            _ => penalties[f],
        };
        left.iter_mut().for_each(|c| *c = 0);
        let mut right = parent.clone();
        let (mut left_sumsq, mut right_sumsq) = (0usize, parent_sumsq);
        for k in 0..n - 1 {
            let l = buf[k].1;
            left_sumsq += 2 * left[l] + 1;
            left[l] += 1;
            right_sumsq -= 2 * right[l] - 1;
            right[l] -= 1;
            if buf[k].0 == buf[k + 1].0 {
                continue;
            }
            let nl = k + 1;
            let nr = n - nl;
            if nl < min_node || nr < min_node {
                continue;
            }
            let gain = parent_gini
                - (nl as f64 / n as f64) * gini_from_sumsq(left_sumsq, nl)
                - (nr as f64 / n as f64) * gini_from_sumsq(right_sumsq, nr);
            let eff = multiplier * gain;
            if eff > best_eff {
                best_eff = eff;
                best = Some(Split {
                    feature: f,
                    threshold: midpoint(buf[k].0, buf[k + 1].0),
                    gain,
                    effective_gain: eff,
                });
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Bootstrap rows reaching this node.
        size: usize,
        gain: f64,
    },
    Leaf {
        counts: Vec<usize>,
        label: usize,
    },
}

/// A binary tree stored in preorder; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Number of bootstrap draws the tree was grown on.
    pub n_samples: usize,
    /// Training rows never drawn into the bootstrap.
    pub out_of_bag: Vec<usize>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { label, .. } => return *label,
            }
        }
    }

    /// Features used by split nodes, in preorder.
    pub fn split_features(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect()
    }

    fn importance(&self, p: usize) -> Vec<f64> {
        let mut imp = vec![0.0; p];
        for node in &self.nodes {
            if let Node::Split {
                feature, size, gain, ..
            } = node
            {
                imp[*feature] += (*size as f64 / self.n_samples as f64) * gain;
            }
        }
        imp
    }
}

fn argmax_first(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

struct Grower<'a, 'b> {
    data: &'a TrainingData<'b>,
    penalties: &'a [f64],
    mtry: usize,
    min_node: usize,
    rng: StreamRng,
    nodes: Vec<Node>,
}

impl Grower<'_, '_> {
    fn grow(&mut self, rows: Vec<usize>, mut selected: Option<&mut Vec<bool>>) -> usize {
        let id = self.nodes.len();
        let mut counts = vec![0usize; self.data.n_labels];
        for &r in &rows {
            counts[self.data.labels[r]] += 1;
        }
        let leaf = Node::Leaf {
            label: argmax_first(&counts),
            counts,
        };
        self.nodes.push(leaf);
        if rows.len() < 2 * self.min_node {
            return id;
        }
        let p = self.data.columns.len();
        let candidates = index::sample(&mut self.rng, p, self.mtry).into_vec();
        let split = best_split(
            self.data,
            &rows,
            &candidates,
            self.penalties,
            selected.as_deref().map(Vec::as_slice),
            self.min_node,
        );
        let Some(split) = split else {
            return id;
        };
        if let Some(sel) = selected.as_deref_mut() {
            sel[split.feature] = true;
        }
        let col = &self.data.columns[split.feature];
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| col[r] <= split.threshold);
        let size = rows.len();
        drop(rows);
        let left = self.grow(l_rows, selected.as_deref_mut());
        let right = self.grow(r_rows, selected);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            size,
            gain: split.gain,
        };
        id
    }
}

fn grow_tree(
    data: &TrainingData<'_>,
    penalties: &[f64],
    mtry: usize,
    min_node: usize,
    seed: u64,
    tree_index: usize,
    selected: Option<&mut Vec<bool>>,
) -> Tree {
    let n = data.labels.len();
    let mut rng = substream(seed, &[role::FOREST_TREE, tree_index as u64]);
    let mut drawn = vec![false; n];
    let boot: Vec<usize> = (0..n)
        .map(|_| {
            let r = rng.random_range(0..n);
            drawn[r] = true;
            r
        })
        .collect();
    let mut g = Grower {
        data,
        penalties,
        mtry,
        min_node,
        rng,
        nodes: Vec::new(),
    };
    g.grow(boot, selected);
    Tree {
        nodes: g.nodes,
        n_samples: n,
        out_of_bag: (0..n).filter(|&r| !drawn[r]).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub label_set: Vec<String>,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    /// Mean decrease in Gini, max-normalized to [0, 1].
    pub importance: Vec<f64>,
    /// Features used by any split (meaningful for RRF / GRRF).
    pub selected: Vec<bool>,
    /// Out-of-bag misclassification rate; `None` if no row was ever out of bag.
    pub oob_error: Option<f64>,
}

fn max_normalize(v: Vec<f64>) -> Vec<f64> {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        v.into_iter().map(|x| x / max).collect()
    } else {
        vec![0.0; v.len()]
    }
}

fn columns_of(features: &FeatureMatrix) -> Vec<Vec<f64>> {
    (0..features.n_features()).map(|j| features.column(j)).collect()
}

/// Trains the configured forest variant.
pub fn train_forest(features: &FeatureMatrix, config: &ForestConfig) -> Result<ForestModel> {
    let n = features.n_rows();
    let p = features.n_features();
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 training rows, got {n}")));
    }
    config.validate(p)?;
    let label_set = sorted_labels(&features.labels);
    if label_set.len() < 2 {
        return Err(Error::TooFewLabels(label_set.len()));
    }
    let labels = label_indices(&features.labels, &label_set);
    let columns = columns_of(features);
    let data = TrainingData {
        columns: &columns,
        labels: &labels,
        n_labels: label_set.len(),
    };
    let mtry = config.mtry_for(p);
    let gamma = config.gamma();

    let guided = matches!(config.variant, ForestVariant::Grrf | ForestVariant::Grf) && gamma > 0.0;
    let prior = if guided {
        let prelim = ForestConfig {
            variant: ForestVariant::Rf,
            seed: derive_seed(config.seed, &[role::FOREST_PRELIMINARY]),
            ..*config
        };
        Some(grow_forest(&data, &vec![1.0; p], None, &prelim, mtry).1)
    } else {
        None
    };
    let imp = |f: usize| prior.as_ref().map_or(0.0, |v| v[f]);
    let penalties: Vec<f64> = (0..p)
        .map(|f| match config.variant {
            ForestVariant::Rf => 1.0,
            ForestVariant::Rrf => config.lambda,
            ForestVariant::Grrf => (1.0 - gamma) * config.lambda + gamma * imp(f),
            ForestVariant::Grf => (1.0 - gamma) + gamma * imp(f),
        })
        .collect();
    let mut selected = vec![false; p];
    let tracks_selected = matches!(config.variant, ForestVariant::Rrf | ForestVariant::Grrf);
    let (trees, importance) = grow_forest(
        &data,
        &penalties,
        tracks_selected.then_some(&mut selected),
        config,
        mtry,
    );
    if !tracks_selected {
        for t in &trees {
            for f in t.split_features() {
                selected[f] = true;
            }
        }
    }
    let oob_error = oob_error(&trees, &columns, &labels, label_set.len());
    Ok(ForestModel {
        config: *config,
        label_set,
        n_features: p,
        trees,
        importance,
        selected,
        oob_error,
    })
}

/// Grows `config.ntree` trees; returns them with their normalized importance.
fn grow_forest(
    data: &TrainingData<'_>,
    penalties: &[f64],
    selected: Option<&mut Vec<bool>>,
    config: &ForestConfig,
    mtry: usize,
) -> (Vec<Tree>, Vec<f64>) {
    let trees: Vec<Tree> = match selected {
        Some(sel) => (0..config.ntree)
            .map(|t| grow_tree(data, penalties, mtry, config.min_node, config.seed, t, Some(sel)))
            .collect(),
        None => (0..config.ntree)
            .into_par_iter()
            .map(|t| grow_tree(data, penalties, mtry, config.min_node, config.seed, t, None))
            .collect(),
    };
    let p = data.columns.len();
    let mut total = vec![0.0; p];
    for t in &trees {
        for (acc, v) in total.iter_mut().zip(t.importance(p)) {
            *acc += v;
        }
    }
    let mean = total.into_iter().map(|v| v / trees.len() as f64).collect();
    (trees, max_normalize(mean))
}

fn oob_error(trees: &[Tree], columns: &[Vec<f64>], labels: &[usize], n_labels: usize) -> Option<f64> {
    let n = labels.len();
    let mut votes = vec![vec![0usize; n_labels]; n];
    for t in trees {
        for &r in &t.out_of_bag {
            let row: Vec<f64> = columns.iter().map(|c| c[r]).collect();
            votes[r][t.predict(&row)] += 1;
        }
    }
    let scored: Vec<usize> = (0..n).filter(|&r| votes[r].iter().any(|&v| v > 0)).collect();
    if scored.is_empty() {
        return None;
    }
    let wrong = scored
        .iter()
        .filter(|&&r| argmax_first(&votes[r]) != labels[r])
        .count();
    Some(wrong as f64 / scored.len() as f64)
}

impl ForestModel {
    /// Majority vote of the trees' leaf labels; ties go to label order.
    pub fn predict(&self, query: &[f64]) -> Result<String> {
        if query.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                got: query.len(),
            });
        }
        let mut votes = vec![0usize; self.label_set.len()];
        for t in &self.trees {
            votes[t.predict(query)] += 1;
        }
        Ok(self.label_set[argmax_first(&votes)].clone())
    }

    pub fn feature_importance(&self) -> &[f64] {
        &self.importance
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureFamily;

    fn fm(rows: Vec<Vec<f64>>, labels: &[&str]) -> FeatureMatrix {
        FeatureMatrix::new(
            FeatureFamily::Proposed,
            (0..rows[0].len()).map(|j| format!("f{j}")).collect(),
            rows.clone(),
            (0..rows.len()).map(|i| format!("r{i}")).collect(),
            labels.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[10, 0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[5, 5]).unwrap(), 0.5);
        assert!((gini_impurity(&[1, 2, 3]).unwrap() - 11.0 / 18.0).abs() < 1e-15);
        assert!(gini_impurity(&[0, 0]).is_err());
    }

    #[test]
    fn perfect_split_found() {
        let columns = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let labels = vec![0, 0, 1, 1];
        let data = TrainingData { columns: &columns, labels: &labels, n_labels: 2 };
        let s = best_split(&data, &[0, 1, 2, 3], &[0], &[1.0], None, 1).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.5);
        assert_eq!(s.gain, 0.5);
    }

    #[test]
    fn identical_rows_do_not_split() {
        let columns = vec![vec![1.0; 4], vec![2.0; 4]];
        let labels = vec![0, 1, 0, 1];
        let data = TrainingData { columns: &columns, labels: &labels, n_labels: 2 };
        assert!(best_split(&data, &[0, 1, 2, 3], &[0, 1], &[1.0, 1.0], None, 1).is_none());
    }

    #[test]
    fn penalty_breaks_equal_gains() {
        // both features separate perfectly; feature 0 is penalized
        let columns = vec![vec![0.0, 0.0, 1.0, 1.0], vec![5.0, 5.0, 9.0, 9.0]];
        let labels = vec![0, 0, 1, 1];
        let data = TrainingData { columns: &columns, labels: &labels, n_labels: 2 };
        let rows = [0, 1, 2, 3];
        let none = vec![false, false];
        let s = best_split(&data, &rows, &[0, 1], &[0.5, 1.0], Some(&none), 1).unwrap();
        assert_eq!(s.feature, 1);
        assert_eq!(s.effective_gain, 0.5);
        // unpenalized tie goes to the lower index
        let s = best_split(&data, &rows, &[1, 0], &[1.0, 1.0], None, 1).unwrap();
        assert_eq!(s.feature, 0);
        // selected features are exempt from their penalty
        let sel = vec![true, false];
        let s = best_split(&data, &rows, &[0, 1], &[0.5, 1.0], Some(&sel), 1).unwrap();
        assert_eq!((s.feature, s.effective_gain), (0, 0.5));
    }

    fn toy_dataset(seed: u64, n: usize) -> FeatureMatrix {
        let mut rng = substream(seed, &[]);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = i % 3;
            let mut r: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
            r[2] += l as f64 * 0.6;
            r[4] -= l as f64 * 0.3;
            rows.push(r);
            labels.push(["a", "b", "c"][l]);
        }
        fm(rows, &labels)
    }

    fn cfg(variant: ForestVariant) -> ForestConfig {
        ForestConfig { ntree: 20, seed: 77, ..ForestConfig::new(variant) }
    }

    #[test]
    fn reductions_are_exact() {
        let f = toy_dataset(1, 60);
        let rf = train_forest(&f, &cfg(ForestVariant::Rf)).unwrap();
        let rrf1 = train_forest(&f, &ForestConfig { lambda: 1.0, ..cfg(ForestVariant::Rrf) }).unwrap();
        let grf0 = train_forest(&f, &ForestConfig { gamma: Some(0.0), ..cfg(ForestVariant::Grf) }).unwrap();
        assert_eq!(rf.trees, rrf1.trees);
        assert_eq!(rf.trees, grf0.trees);
        let rrf = train_forest(&f, &cfg(ForestVariant::Rrf)).unwrap();
        let grrf0 = train_forest(&f, &ForestConfig { gamma: Some(0.0), ..cfg(ForestVariant::Grrf) }).unwrap();
        assert_eq!(rrf.trees, grrf0.trees);
        assert_ne!(rf.trees, rrf.trees);
    }

    #[test]
    fn guided_variants_train_and_predict() {
        let f = toy_dataset(2, 60);
        for v in [ForestVariant::Grrf, ForestVariant::Grf] {
            let m = train_forest(&f, &cfg(v)).unwrap();
            assert_eq!(m.trees.len(), 20);
            let acc = (0..f.n_rows())
                .filter(|&i| m.predict(&f.rows[i]).unwrap() == f.labels[i])
                .count();
            assert!(acc as f64 / 60.0 > 0.9);
            assert!(m.oob_error.is_some());
        }
    }

    #[test]
    fn deterministic_and_pool_independent() {
        let f = toy_dataset(3, 40);
        let a = train_forest(&f, &cfg(ForestVariant::Rf)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| train_forest(&f, &cfg(ForestVariant::Rf))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_tree_fits_its_bootstrap() {
        let f = toy_dataset(4, 50);
        let m = train_forest(&f, &ForestConfig { ntree: 1, ..cfg(ForestVariant::Rf) }).unwrap();
        let tree = &m.trees[0];
        let labels = label_indices(&f.labels, &m.label_set);
        let in_bag: Vec<usize> = (0..50).filter(|r| !tree.out_of_bag.contains(r)).collect();
        for r in in_bag {
            assert_eq!(tree.predict(&f.rows[r]), labels[r]);
        }
        assert_eq!(m.predict(&f.rows[0]).unwrap(), m.label_set[tree.predict(&f.rows[0])]);
    }

    #[test]
    fn thresholds_strictly_between_node_values() {
        let f = toy_dataset(5, 45);
        let m = train_forest(&f, &cfg(ForestVariant::Rf)).unwrap();
        for tree in &m.trees {
            for node in &tree.nodes {
                if let Node::Split { feature, threshold, .. } = node {
                    let col = f.column(*feature);
                    assert!(col.iter().any(|v| v <= threshold));
                    assert!(col.iter().any(|v| v > threshold));
                    assert!(!col.contains(threshold));
                }
            }
        }
    }

    #[test]
    fn monotone_transform_keeps_structure() {
        let f = toy_dataset(6, 45);
        let mut g = f.clone();
        for r in g.rows.iter_mut() {
            r[2] = (r[2] * 3.0).exp() * 1e6;
        }
        let a = train_forest(&f, &cfg(ForestVariant::Rf)).unwrap();
        let b = train_forest(&g, &cfg(ForestVariant::Rf)).unwrap();
        for (ta, tb) in a.trees.iter().zip(&b.trees) {
            assert_eq!(ta.split_features(), tb.split_features());
            let leaves = |t: &Tree| {
                t.nodes
                    .iter()
                    .filter_map(|n| match n {
                        Node::Leaf { counts, .. } => Some(counts.clone()),
                        _ => None,
                    })
                    .collect::<Vec<_>>()
            };
            assert_eq!(leaves(ta), leaves(tb));
        }
    }

    #[test]
    fn importance_properties() {
        // feature 1 alone separates the labels
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![((i * 7) % 11) as f64, if i % 2 == 0 { 0.0 } else { 1.0 }, ((i * 3) % 5) as f64])
            .collect();
        let labels: Vec<&str> = (0..40).map(|i| if i % 2 == 0 { "x" } else { "y" }).collect();
        let m = train_forest(&fm(rows.clone(), &labels), &ForestConfig { ntree: 50, ..cfg(ForestVariant::Rf) }).unwrap();
        let imp = m.feature_importance();
        assert_eq!(imp[1], 1.0);
        assert!(imp.iter().all(|v| (0.0..=1.0).contains(v)));

        // stumps restricted to feature 1
        let m = train_forest(&fm(rows, &labels), &ForestConfig { ntree: 5, mtry: Some(3), ..cfg(ForestVariant::Rf) }).unwrap();
        for t in &m.trees {
            assert_eq!(t.split_features(), vec![1]);
        }
        assert_eq!(m.feature_importance(), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn invalid_configs() {
        let f = toy_dataset(7, 12);
        assert!(train_forest(&f, &ForestConfig { ntree: 0, ..cfg(ForestVariant::Rf) }).is_err());
        assert!(train_forest(&f, &ForestConfig { mtry: Some(7), ..cfg(ForestVariant::Rf) }).is_err());
        assert!(train_forest(&f, &ForestConfig { lambda: 0.0, ..cfg(ForestVariant::Rrf) }).is_err());
        assert!(train_forest(&f, &ForestConfig { gamma: Some(1.5), ..cfg(ForestVariant::Grf) }).is_err());
        let m = train_forest(&f, &cfg(ForestVariant::Rf)).unwrap();
        assert!(m.predict(&[0.0]).is_err());
    }

    #[test]
    fn defaults() {
        let c = ForestConfig::new(ForestVariant::Grrf);
        assert_eq!(c.ntree, 500);
        assert_eq!(c.gamma(), 0.1);
        assert_eq!(ForestConfig::new(ForestVariant::Grf).gamma(), 1.0);
        assert_eq!(c.mtry_for(72), 9);
        assert_eq!(c.mtry_for(32), 6);
        let parsed: ForestConfig = serde_json::from_str(r#"{"variant":"rrf","ntree":500,"mtry":null,"lambda":0.8,"gamma":0.1,"seed":3}"#).unwrap();
        assert_eq!(parsed.variant, ForestVariant::Rrf);
        assert_eq!(parsed.min_node, 1);
    }
}
