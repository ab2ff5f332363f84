//! Per-channel summary statistics and the derived / proposed feature families.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ChannelId, Dataset, PulseProfile, CHANNEL_COUNT};

pub const DERIVED_DIM: usize = 4 * CHANNEL_COUNT;
pub const PROPOSED_DIM: usize = 9 * CHANNEL_COUNT;
pub const DEFAULT_PERCENTILE: f64 = 30.0;

const DERIVED_STATS: [&str; 4] = ["length_um", "height", "integral", "nop"];
const PROPOSED_STATS: [&str; 9] = [
    "percentile30",
    "max",
    "mean",
    "std",
    "median",
    "third_moment",
    "nop",
    "length_samples",
    "entropy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFamily {
    Derived,
    Proposed,
    Dissimilarity,
}

impl FeatureFamily {
    pub fn name(self) -> &'static str {
        match self {
            FeatureFamily::Derived => "derived",
            FeatureFamily::Proposed => "proposed",
            FeatureFamily::Dissimilarity => "dissimilarity",
        }
    }
}

impl fmt::Display for FeatureFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An n x p matrix of one feature family, row-aligned with profile ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub family: FeatureFamily,
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub row_ids: Vec<String>,
    pub labels: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        family: FeatureFamily,
        names: Vec<String>,
        rows: Vec<Vec<f64>>,
        row_ids: Vec<String>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let p = names.len();
        if row_ids.len() != rows.len() || labels.len() != rows.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                got: row_ids.len().min(labels.len()),
            });
        }
        for row in &rows {
            if row.len() != p {
                return Err(Error::Dimension {
                    expected: p,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("feature matrix entries must be finite".into()));
            }
        }
        Ok(FeatureMatrix {
            family,
            names,
            rows,
            row_ids,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    /// Keeps the rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            family: self.family,
            names: self.names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Writes `id,label,<feature names...>` followed by one line per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec![csv_field("id"), csv_field("label")];
        header.extend(self.names.iter().map(|n| csv_field(n)));
        writeln!(w, "{}", header.join(","))?;
        for ((id, label), row) in self.row_ids.iter().zip(&self.labels).zip(&self.rows) {
            write!(w, "{},{}", csv_field(id), csv_field(label))?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Per-feature standardization fitted on training rows. Constant features
/// keep std = 1 and are mapped to 0 for every input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty)?;
        let p = first.len();
        let n = rows.len() as f64;
        let mut means = vec![0.0; p];
        for r in rows {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; p];
        for r in rows {
            for ((s, v), m) in vars.iter_mut().zip(r).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        let stds: Vec<f64> = vars.iter().map(|v| (v / n).sqrt()).collect();
        let constant: Vec<bool> = stds.iter().map(|&s| s <= 0.0).collect();
        let stds = stds
            .into_iter()
            .map(|s| if s > 0.0 { s } else { 1.0 })
            .collect();
        Ok(Standardizer {
            means,
            stds,
            constant,
        })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                if self.constant[j] {
                    0.0
                } else {
                    (v - self.means[j]) / self.stds[j]
                }
            })
            .collect()
    }
}

fn nonempty(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        Err(Error::Empty)
    } else {
        Ok(())
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn percentile_of_sorted(v: &[f64], m: f64) -> f64 {
    let h = (v.len() - 1) as f64 * m / 100.0;
    let lo = h.floor() as usize;
    if lo + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[lo] + (h - lo as f64) * (v[lo + 1] - v[lo])
}

/// Linear-interpolated percentile at rank `(n - 1) * m / 100` of the sorted values.
pub fn percentile(values: &[f64], m: f64) -> Result<f64> {
    nonempty(values)?;
    if !(0.0..=100.0).contains(&m) {
        return Err(Error::Config(format!("percentile {m} outside [0, 100]")));
    }
    Ok(percentile_of_sorted(&sorted(values), m))
}

pub fn mean(values: &[f64]) -> Result<f64> {
    nonempty(values)?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

fn central_moment(values: &[f64], mu: f64, order: i32) -> f64 {
    values.iter().map(|q| (q - mu).powi(order)).sum::<f64>() / values.len() as f64
}

/// Population standard deviation, `sqrt(mu_2)`.
pub fn std_dev(values: &[f64]) -> Result<f64> {
    let mu = mean(values)?;
    Ok(central_moment(values, mu, 2).sqrt())
}

/// Third central moment with the 1/n convention.
pub fn third_central_moment(values: &[f64]) -> Result<f64> {
    let mu = mean(values)?;
    Ok(central_moment(values, mu, 3))
}

pub fn median(values: &[f64]) -> Result<f64> {
    nonempty(values)?;
    Ok(median_of_sorted(&sorted(values)))
}

fn median_of_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Shannon entropy (natural log) of the values read as a mass distribution.
/// Negative samples count as zero mass; an all-zero input has entropy 0.
pub fn shannon_entropy(values: &[f64]) -> Result<f64> {
    nonempty(values)?;
    let total: f64 = values.iter().map(|q| q.max(0.0)).sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let h = values
        .iter()
        .map(|q| q.max(0.0) / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum::<f64>();
    Ok(h.max(0.0))
}

/// Interior local maxima. A plateau entered by a strict rise and left by a
/// strict fall counts once; endpoints never count.
pub fn count_peaks(values: &[f64]) -> usize {
    let mut peaks = 0;
    let mut rising = false;
    for w in values.windows(2) {
        if w[1] > w[0] {
            rising = true;
        } else if w[1] < w[0] {
            if rising {
                peaks += 1;
            }
            rising = false;
        }
    }
    peaks
}

fn proposed_block(values: &[f64]) -> Result<[f64; 9]> {
    nonempty(values)?;
    let s = sorted(values);
    let mu = mean(values)?;
    Ok([
        percentile_of_sorted(&s, DEFAULT_PERCENTILE),
        s[s.len() - 1],
        mu,
        central_moment(values, mu, 2).sqrt(),
        median_of_sorted(&s),
        central_moment(values, mu, 3),
        count_peaks(values) as f64,
        values.len() as f64,
        shannon_entropy(values)?,
    ])
}

/// Nine statistics per channel, channel-major: 72 values.
pub fn proposed_features(profile: &PulseProfile) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(PROPOSED_DIM);
    for c in ChannelId::ALL {
        out.extend(proposed_block(profile.channel(c))?);
    }
    Ok(out)
}

/// Length (physical), height, integral and peak count per channel: 32 values.
pub fn derived_features(profile: &PulseProfile) -> Vec<f64> {
    let mut out = Vec::with_capacity(DERIVED_DIM);
    for c in ChannelId::ALL {
        let q = profile.channel(c);
        out.push(q.len() as f64 * profile.sampling_step());
        out.push(q.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        out.push(q.iter().sum());
        out.push(count_peaks(q) as f64);
    }
    out
}

fn feature_names(stats: &[&str]) -> Vec<String> {
    ChannelId::ALL
        .iter()
        .flat_map(|c| stats.iter().map(move |s| format!("{c}_{s}")))
        .collect()
}

pub fn derived_names() -> Vec<String> {
    feature_names(&DERIVED_STATS)
}

pub fn proposed_names() -> Vec<String> {
    feature_names(&PROPOSED_STATS)
}

fn label_column(dataset: &Dataset) -> Vec<String> {
    dataset
        .profiles()
        .iter()
        .map(|p| p.label().unwrap_or("").to_string())
        .collect()
}

/// Extracts the derived or proposed family for every profile.
pub fn extract(dataset: &Dataset, family: FeatureFamily) -> Result<FeatureMatrix> {
    let (names, rows) = match family {
        FeatureFamily::Derived => (
            derived_names(),
            dataset
                .profiles()
                .par_iter()
                .map(derived_features)
                .collect::<Vec<_>>(),
        ),
        FeatureFamily::Proposed => (
            proposed_names(),
            dataset
                .profiles()
                .par_iter()
                .map(proposed_features)
                .collect::<Result<Vec<_>>>()?,
        ),
        FeatureFamily::Dissimilarity => {
            return Err(Error::Config(
                "dissimilarity features come from a DTW matrix, not per-profile extraction".into(),
            ))
        }
    };
    FeatureMatrix::new(family, names, rows, dataset.ids(), label_column(dataset))
}
