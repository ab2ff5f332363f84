//! Deterministic synthetic species generator.
//!
//! Each channel of a cell is a sum of Gaussian bumps
//! `a * exp(-(t - c)^2 / (2 s^2))` plus zero-mean Gaussian noise, clamped at
//! zero. For a channel with `K` bumps on a trace of `n` samples, bump `k`
//! is centred at `n * (k + 0.5 + u) / K` with `u ~ U(-0.2, 0.2)`, and its
//! width is `s = w * n` with `w` drawn from the template's width range.
//!
//! Cell `(species i, cell j)` draws from the substream keyed by
//! `(seed, SYNTH, i, j)` (see [`crate::rng`]), in this order: length, then
//! per channel per bump (amplitude, width, jitter), then per channel the
//! noise samples.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{role, substream};
use crate::signal::{Dataset, PulseProfile, CHANNEL_COUNT, DEFAULT_SAMPLING_STEP};

const CENTER_JITTER: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPulse {
    pub bumps: u32,
    /// Peak amplitude range in mV.
    pub amplitude: [f64; 2],
    /// Bump standard deviation as a fraction of the trace length.
    pub width: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesTemplate {
    pub name: String,
    pub length_range: [usize; 2],
    /// One entry per channel, in canonical channel order.
    pub channels: Vec<ChannelPulse>,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub templates: Vec<SpeciesTemplate>,
    pub cells_per_species: usize,
    pub seed: u64,
    #[serde(default = "default_step")]
    pub sampling_step: f64,
}

fn default_step() -> f64 {
    DEFAULT_SAMPLING_STEP
}

fn ordered_range(r: [f64; 2]) -> bool {
    r[0].is_finite() && r[1].is_finite() && r[0] >= 0.0 && r[1] >= r[0]
}

impl SpeciesTemplate {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("template {}: {m}", self.name)));
        let [lo, hi] = self.length_range;
        if lo < 4 || hi < lo {
            return bad(format!("length_range [{lo},{hi}] needs 4 <= min <= max"));
        }
        if self.channels.len() != CHANNEL_COUNT {
            return bad(format!(
                "expected {CHANNEL_COUNT} channel specs, got {}",
                self.channels.len()
            ));
        }
        for (c, ch) in self.channels.iter().enumerate() {
            if !ordered_range(ch.amplitude) {
                return bad(format!("channel {c}: amplitude range must be ordered and >= 0"));
            }
            if !ordered_range(ch.width) || (ch.bumps > 0 && (ch.width[0] <= 0.0 || ch.width[1] > 1.0)) {
                return bad(format!("channel {c}: width range must lie in (0, 1]"));
            }
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        Ok(())
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::Config("at least one template is required".into()));
        }
        if self.cells_per_species == 0 {
            return Err(Error::Config("cells_per_species must be >= 1".into()));
        }
        if !(self.sampling_step.is_finite() && self.sampling_step > 0.0) {
            return Err(Error::Config("sampling_step must be positive".into()));
        }
        let mut names = HashSet::new();
        for t in &self.templates {
            if !names.insert(t.name.as_str()) {
                return Err(Error::Config(format!("duplicate template name {}", t.name)));
            }
            t.validate()?;
        }
        Ok(())
    }

    /// The shipped seven-species reference benchmark.
    pub fn reference() -> SynthSpec {
        serde_json::from_str(include_str!("../configs/reference_synth.json"))
            .expect("bundled reference spec parses")
    }
}

fn uniform<R: Rng>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn generate_cell(spec: &SynthSpec, species: usize, cell: usize) -> Result<PulseProfile> {
    let t = &spec.templates[species];
    let mut rng = substream(spec.seed, &[role::SYNTH, species as u64, cell as u64]);
    let n = rng.random_range(t.length_range[0]..=t.length_range[1]);

    let mut channels: [Vec<f64>; CHANNEL_COUNT] = std::array::from_fn(|_| vec![0.0; n]);
    for (trace, pulse) in channels.iter_mut().zip(&t.channels) {
        let k = pulse.bumps as f64;
        for b in 0..pulse.bumps {
            let amp = uniform(&mut rng, pulse.amplitude);
            let sigma = uniform(&mut rng, pulse.width) * n as f64;
            let jitter = uniform(&mut rng, [-CENTER_JITTER, CENTER_JITTER]);
            let center = n as f64 * (b as f64 + 0.5 + jitter) / k;
            for (i, v) in trace.iter_mut().enumerate() {
                let d = i as f64 - center;
                *v += amp * (-d * d / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    if t.noise_std > 0.0 {
        let noise = Normal::new(0.0, t.noise_std)
            .map_err(|e| Error::Config(format!("noise: {e}")))?;
        for trace in channels.iter_mut() {
            for v in trace.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
    }
    for v in channels.iter_mut().flatten() {
        *v = v.max(0.0);
    }
    PulseProfile::new(
        format!("{}_{:04}", t.name, cell),
        Some(t.name.clone()),
        channels,
        spec.sampling_step,
    )
}

/// Generates `cells_per_species` profiles per template, grouped by template.
pub fn generate_dataset(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.templates.len())
        .flat_map(|s| (0..spec.cells_per_species).map(move |c| (s, c)))
        .collect();
    let profiles = jobs
        .par_iter()
        .map(|&(s, c)| generate_cell(spec, s, c))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(profiles)
}
