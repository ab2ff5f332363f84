//! Particle and dataset model plus the JSON-lines dataset format.
//!
//! One particle per line:
//!
//! ```text
//! {"id":"c1","label":"sp_a","sampling_step":0.5,"channels":{"FWS":[..],"SWS_HS":[..],...}}
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNEL_COUNT: usize = 8;
pub const DEFAULT_SAMPLING_STEP: f64 = 0.5;

/// The eight detector channels. Declaration order fixes feature layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelId {
    #[serde(rename = "FWS")]
    Fws,
    #[serde(rename = "SWS_HS")]
    SwsHs,
    #[serde(rename = "SWS_LS")]
    SwsLs,
    #[serde(rename = "FLR_HS")]
    FlrHs,
    #[serde(rename = "FLR_LS")]
    FlrLs,
    #[serde(rename = "FLO_LS")]
    FloLs,
    #[serde(rename = "FLY_HS")]
    FlyHs,
    #[serde(rename = "FLY_LS")]
    FlyLs,
}

impl ChannelId {
    pub const ALL: [ChannelId; CHANNEL_COUNT] = [
        ChannelId::Fws,
        ChannelId::SwsHs,
        ChannelId::SwsLs,
        ChannelId::FlrHs,
        ChannelId::FlrLs,
        ChannelId::FloLs,
        ChannelId::FlyHs,
        ChannelId::FlyLs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChannelId::Fws => "FWS",
            ChannelId::SwsHs => "SWS_HS",
            ChannelId::SwsLs => "SWS_LS",
            ChannelId::FlrHs => "FLR_HS",
            ChannelId::FlrLs => "FLR_LS",
            ChannelId::FloLs => "FLO_LS",
            ChannelId::FlyHs => "FLY_HS",
            ChannelId::FlyLs => "FLY_LS",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<ChannelId> {
        ChannelId::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One particle: eight equal-length channel traces in mV.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseProfile {
    id: String,
    label: Option<String>,
    channels: [Vec<f64>; CHANNEL_COUNT],
    sampling_step: f64,
}

impl PulseProfile {
    pub fn new(
        id: impl Into<String>,
        label: Option<String>,
        channels: [Vec<f64>; CHANNEL_COUNT],
        sampling_step: f64,
    ) -> Result<Self> {
        let id = id.into();
        let n = channels[0].len();
        if n == 0 {
            return Err(Error::InvalidProfile {
                id,
                message: "channels must hold at least one sample".into(),
            });
        }
        if channels.iter().any(|c| c.len() != n) {
            let detail = ChannelId::ALL
                .iter()
                .map(|c| format!("{}={}", c, channels[c.index()].len()))
                .collect::<Vec<_>>()
                .join(", ");
            return Err(Error::UnequalChannels { id, detail });
        }
        if let Some(c) = ChannelId::ALL
            .iter()
            .find(|c| channels[c.index()].iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidProfile {
                id,
                message: format!("non-finite sample on channel {c}"),
            });
        }
        if !(sampling_step.is_finite() && sampling_step > 0.0) {
            return Err(Error::InvalidProfile {
                id,
                message: format!("sampling_step must be positive, got {sampling_step}"),
            });
        }
        Ok(PulseProfile {
            id,
            label,
            channels,
            sampling_step,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn channel(&self, channel: ChannelId) -> &[f64] {
        &self.channels[channel.index()]
    }

    pub fn channels(&self) -> &[Vec<f64>; CHANNEL_COUNT] {
        &self.channels
    }

    /// Number of samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sampling_step(&self) -> f64 {
        self.sampling_step
    }

    /// The 8-vector of all channels at sample `t`.
    pub fn point(&self, t: usize) -> [f64; CHANNEL_COUNT] {
        std::array::from_fn(|c| self.channels[c][t])
    }
}

/// An ordered collection of profiles with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    profiles: Vec<PulseProfile>,
    label_set: Vec<String>,
}

impl Dataset {
    pub fn new(profiles: Vec<PulseProfile>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(profiles.len());
        for p in &profiles {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        let label_set = profiles
            .iter()
            .filter_map(|p| p.label.clone())
            .filter(|l| !l.is_empty())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Dataset {
            profiles,
            label_set,
        })
    }

    pub fn profiles(&self) -> &[PulseProfile] {
        &self.profiles
    }

    /// Distinct non-empty labels in lexicographic order.
    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.profiles.iter().map(|p| p.id.clone()).collect()
    }

    /// Labels of every profile; errors if any profile is unlabeled.
    pub fn labels(&self) -> Result<Vec<String>> {
        self.profiles
            .iter()
            .map(|p| match p.label.as_deref() {
                Some(l) if !l.is_empty() => Ok(l.to_string()),
                _ => Err(Error::InvalidProfile {
                    id: p.id.clone(),
                    message: "profile has no label".into(),
                }),
            })
            .collect()
    }

    /// Keeps the profiles at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(indices.iter().map(|&i| self.profiles[i].clone()).collect())
    }
}

#[derive(Deserialize)]
struct RecordIn {
    id: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    sampling_step: Option<f64>,
    channels: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize)]
struct ChannelsOut<'a> {
    #[serde(rename = "FWS")]
    fws: &'a [f64],
    #[serde(rename = "SWS_HS")]
    sws_hs: &'a [f64],
    #[serde(rename = "SWS_LS")]
    sws_ls: &'a [f64],
    #[serde(rename = "FLR_HS")]
    flr_hs: &'a [f64],
    #[serde(rename = "FLR_LS")]
    flr_ls: &'a [f64],
    #[serde(rename = "FLO_LS")]
    flo_ls: &'a [f64],
    #[serde(rename = "FLY_HS")]
    fly_hs: &'a [f64],
    #[serde(rename = "FLY_LS")]
    fly_ls: &'a [f64],
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    label: Option<&'a str>,
    sampling_step: f64,
    channels: ChannelsOut<'a>,
}

fn parse_record(line: &str, line_no: usize) -> Result<PulseProfile> {
    let rec: RecordIn = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    if let Some(unknown) = rec.channels.keys().find(|k| ChannelId::from_name(k).is_none()) {
        return Err(Error::Parse {
            line: line_no,
            message: format!("unknown channel {unknown}"),
        });
    }
    let mut channels = rec.channels;
    let mut take = |c: ChannelId| {
        channels
            .remove(c.name())
            .ok_or_else(|| Error::MissingChannel {
                id: rec.id.clone(),
                channel: c.name().to_string(),
            })
    };
    let arr = [
        take(ChannelId::Fws)?,
        take(ChannelId::SwsHs)?,
        take(ChannelId::SwsLs)?,
        take(ChannelId::FlrHs)?,
        take(ChannelId::FlrLs)?,
        take(ChannelId::FloLs)?,
        take(ChannelId::FlyHs)?,
        take(ChannelId::FlyLs)?,
    ];
    PulseProfile::new(
        rec.id,
        rec.label,
        arr,
        rec.sampling_step.unwrap_or(DEFAULT_SAMPLING_STEP),
    )
}

/// Reads a JSON-lines dataset. Blank lines are skipped; record order is kept.
pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut profiles = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        profiles.push(parse_record(&line, line_no)?);
    }
    Dataset::new(profiles)
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut writer: W) -> Result<()> {
    for p in &dataset.profiles {
        let c = &p.channels;
        let rec = RecordOut {
            id: &p.id,
            label: p.label.as_deref(),
            sampling_step: p.sampling_step,
            channels: ChannelsOut {
                fws: &c[0],
                sws_hs: &c[1],
                sws_ls: &c[2],
                flr_hs: &c[3],
                flr_ls: &c[4],
                flo_ls: &c[5],
                fly_hs: &c[6],
                fly_ls: &c[7],
            },
        };
        serde_json::to_writer(&mut writer, &rec)?;
        writeln!(writer).map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file))
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(dataset, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}
