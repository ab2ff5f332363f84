//! Normalized DTW dissimilarity between multichannel pulse profiles.
//!
//! The local cost between two 8-vectors is
//! `s(q, r) = min(1, d(q, r) / max(d(q, 0), d(r, 0)))`, with `s = 0` when both
//! points are zero. A warping path's dissimilarity is its mean local cost
//! (total cost over number of matched pairs), and the profile dissimilarity
//! is the minimum of that mean over all admissible paths.
//!
//! Minimizing a ratio is not a plain shortest-path problem, so the DP is
//! wrapped in a Dinkelbach iteration: starting from the minimum-total-cost
//! path, each round solves `min_P cost(P) - lambda * len(P)` with ordinary
//! DTW and sets `lambda` to the ratio of the path found, stopping when the
//! ratio no longer decreases. Each round is a two-row rolling DP.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{csv_field, FeatureFamily, FeatureMatrix};
use crate::signal::{Dataset, PulseProfile, CHANNEL_COUNT};

const MAX_RATIO_ROUNDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointNorm {
    L1,
    #[default]
    L2,
}

impl PointNorm {
    fn distance(self, q: &[f64], r: &[f64]) -> f64 {
        match self {
            PointNorm::L1 => q.iter().zip(r).map(|(a, b)| (a - b).abs()).sum(),
            PointNorm::L2 => q
                .iter()
                .zip(r)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        }
    }

    fn magnitude(self, q: &[f64]) -> f64 {
        match self {
            PointNorm::L1 => q.iter().map(|a| a.abs()).sum(),
            PointNorm::L2 => q.iter().map(|a| a * a).sum::<f64>().sqrt(),
        }
    }
}

/// How the eight channels are aligned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// One warping path shared by all channels.
    #[default]
    Joint,
    /// Independent scalar DTW per channel, averaged.
    PerChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DtwConfig {
    #[serde(default)]
    pub point_norm: PointNorm,
    /// Sakoe-Chiba half-width in samples.
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub alignment: Alignment,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        (num / den).min(1.0)
    }
}

/// Normalized point dissimilarity in [0, 1].
pub fn local_dissimilarity(q: &[f64], r: &[f64], norm: PointNorm) -> f64 {
    let den = norm.magnitude(q).max(norm.magnitude(r));
    ratio(norm.distance(q, r), den)
}

#[derive(Clone, Copy)]
struct Cell {
    objective: f64,
    cost: f64,
    len: u32,
}

const UNREACHABLE: Cell = Cell {
    objective: f64::INFINITY,
    cost: 0.0,
    len: 0,
};

/// One DP pass minimizing `cost - lambda * len`; returns the chosen path's
/// (cost, len). Predecessor preference on ties: diagonal, (i-1, j), (i, j-1).
fn parametric_pass<F>(n: usize, m: usize, window: Option<usize>, lambda: f64, local: &F, rows: &mut [Vec<Cell>; 2]) -> (f64, u32)
where
    F: Fn(usize, usize) -> f64,
{
    let in_band = |i: usize, j: usize| window.is_none_or(|w| i.abs_diff(j) <= w);
    for i in 0..n {
        let (prev, cur) = {
            let [a, b] = rows;
            if i % 2 == 0 {
                (&*b, a)
            } else {
                (&*a, b)
            }
        };
        for j in 0..m {
            if !in_band(i, j) {
                cur[j] = UNREACHABLE;
                continue;
            }
            let s = local(i, j);
            let base = if i == 0 && j == 0 {
                Cell {
                    objective: 0.0,
                    cost: 0.0,
                    len: 0,
                }
            } else {
                let mut best = UNREACHABLE;
                if i > 0 && j > 0 && prev[j - 1].objective < best.objective {
                    best = prev[j - 1];
                }
                if i > 0 && prev[j].objective < best.objective {
                    best = prev[j];
                }
                if j > 0 && cur[j - 1].objective < best.objective {
                    best = cur[j - 1];
                }
                best
            };
            cur[j] = if base.objective.is_finite() {
                Cell {
                    objective: base.objective + (s - lambda),
                    cost: base.cost + s,
                    len: base.len + 1,
                }
            } else {
                UNREACHABLE
            };
        }
    }
    let last = rows[(n - 1) % 2][m - 1];
    (last.cost, last.len)
}

/// Minimum mean local cost over all warping paths of an `n x m` grid.
pub(crate) fn min_mean_path_cost<F>(n: usize, m: usize, window: Option<usize>, local: F) -> Result<f64>
where
    F: Fn(usize, usize) -> f64,
{
    if n == 0 || m == 0 {
        return Err(Error::Empty);
    }
    if let Some(w) = window {
        if n.abs_diff(m) > w {
            return Err(Error::NoWarpingPath { window: w, n, m });
        }
    }
    let mut rows = [vec![UNREACHABLE; m], vec![UNREACHABLE; m]];
    let (cost, len) = parametric_pass(n, m, window, 0.0, &local, &mut rows);
    let mut best = cost / len as f64;
    for _ in 0..MAX_RATIO_ROUNDS {
        let (cost, len) = parametric_pass(n, m, window, best, &local, &mut rows);
        let r = cost / len as f64;
        if r < best {
            best = r;
        } else {
            break;
        }
    }
    Ok(best)
}

fn joint_points(p: &PulseProfile) -> Vec<[f64; CHANNEL_COUNT]> {
    (0..p.len()).map(|t| p.point(t)).collect()
}

/// DTW dissimilarity of two profiles in [0, 1].
pub fn dtw_dissimilarity(q: &PulseProfile, r: &PulseProfile, config: &DtwConfig) -> Result<f64> {
    let norm = config.point_norm;
    match config.alignment {
        Alignment::Joint => {
            let qp = joint_points(q);
            let rp = joint_points(r);
            let qn: Vec<f64> = qp.iter().map(|x| norm.magnitude(x)).collect();
            let rn: Vec<f64> = rp.iter().map(|x| norm.magnitude(x)).collect();
            min_mean_path_cost(qp.len(), rp.len(), config.window, |i, j| {
                ratio(norm.distance(&qp[i], &rp[j]), qn[i].max(rn[j]))
            })
        }
        Alignment::PerChannel => {
            let mut total = 0.0;
            for (a, b) in q.channels().iter().zip(r.channels()) {
                total += min_mean_path_cost(a.len(), b.len(), config.window, |i, j| {
                    ratio((a[i] - b[j]).abs(), a[i].abs().max(b[j].abs()))
                })?;
            }
            Ok(total / CHANNEL_COUNT as f64)
        }
    }
}

/// Symmetric n x n matrix of DTW dissimilarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix {
    ids: Vec<String>,
    labels: Vec<String>,
    entries: Vec<f64>,
    index: HashMap<String, usize>,
}

impl DissimilarityMatrix {
    pub fn from_entries(ids: Vec<String>, entries: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if entries.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: entries.len(),
            });
        }
        let mut flat = Vec::with_capacity(n * n);
        for row in entries {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
            flat.extend(row);
        }
        Self::from_flat(ids, flat)
    }

    fn from_flat(ids: Vec<String>, entries: Vec<f64>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(DissimilarityMatrix {
            labels: vec![String::new(); ids.len()],
            ids,
            entries,
            index,
        })
    }

    /// Attaches species labels from the dataset the matrix was computed on.
    pub fn with_labels(mut self, dataset: &Dataset) -> Result<Self> {
        for p in dataset.profiles() {
            let i = self.position(p.id())?;
            self.labels[i] = p.label().unwrap_or("").to_string();
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.entries[i * n..(i + 1) * n]
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn by_id(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.get(self.position(a)?, self.position(b)?))
    }

    /// Header `id,<ids...>`, then one row per id starting with the id.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "id")?;
        for id in &self.ids {
            write!(w, ",{}", csv_field(id))?;
        }
        writeln!(w)?;
        for (i, id) in self.ids.iter().enumerate() {
            write!(w, "{}", csv_field(id))?;
            for v in self.row(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the format written by [`write_csv`](Self::write_csv). Ids must
    /// not contain commas or quotes.
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| parse_err(1, e.to_string()))?,
            None => return Err(Error::Empty),
        };
        let ids: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
        let mut entries = Vec::with_capacity(ids.len() * ids.len());
        for (k, (i, line)) in lines.enumerate() {
            let line = line.map_err(|e| parse_err(i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let id = fields.next().unwrap_or("");
            if ids.get(k).map(String::as_str) != Some(id) {
                return Err(parse_err(i + 1, format!("row id {id} out of order")));
            }
            for f in fields {
                entries.push(
                    f.parse::<f64>()
                        .map_err(|e| parse_err(i + 1, format!("{f}: {e}")))?,
                );
            }
        }
        if entries.len() != ids.len() * ids.len() {
            return Err(Error::Dimension {
                expected: ids.len() * ids.len(),
                got: entries.len(),
            });
        }
        Self::from_flat(ids, entries)
    }
}

/// All-pairs DTW over the dataset on the current rayon pool. Only the upper
/// triangle is computed; each cell is written by exactly one task.
pub fn dissimilarity_matrix(dataset: &Dataset, config: &DtwConfig) -> Result<DissimilarityMatrix> {
    let profiles = dataset.profiles();
    let n = profiles.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| dtw_dissimilarity(&profiles[i], &profiles[j], config))
        .collect::<Result<Vec<f64>>>()?;
    let mut entries = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        entries[i * n + j] = v;
        entries[j * n + i] = v;
    }
    DissimilarityMatrix::from_flat(dataset.ids(), entries)?.with_labels(dataset)
}

/// Same as [`dissimilarity_matrix`] on a dedicated pool of `workers` threads.
pub fn dissimilarity_matrix_with_workers(
    dataset: &Dataset,
    config: &DtwConfig,
    workers: usize,
) -> Result<DissimilarityMatrix> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dissimilarity_matrix(dataset, config))
}

/// Dissimilarity feature rows: row `x` holds `entries[x][t]` for each
/// reference id `t`, in reference order.
pub fn dissimilarity_columns(
    matrix: &DissimilarityMatrix,
    reference_ids: &[String],
    target_ids: &[String],
) -> Result<FeatureMatrix> {
    let cols = reference_ids
        .iter()
        .map(|id| matrix.position(id))
        .collect::<Result<Vec<_>>>()?;
    let targets = target_ids
        .iter()
        .map(|id| matrix.position(id))
        .collect::<Result<Vec<_>>>()?;
    let rows = targets
        .iter()
        .map(|&x| cols.iter().map(|&t| matrix.get(x, t)).collect())
        .collect();
    FeatureMatrix::new(
        FeatureFamily::Dissimilarity,
        reference_ids.to_vec(),
        rows,
        target_ids.to_vec(),
        targets.iter().map(|&x| matrix.labels[x].clone()).collect(),
    )
}
