//! `phytoclass` command-line front end.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use phytoclass::dtw::{dissimilarity_matrix, DissimilarityMatrix, DtwConfig, PointNorm};
use phytoclass::eval::{evaluate, render_contingency, render_report, Comparison, CvReport, EvalConfig};
use phytoclass::features::{extract, FeatureFamily};
use phytoclass::signal::{load_dataset, save_dataset};
use phytoclass::synth::{generate_dataset, SynthSpec};

#[derive(Parser, Debug)]
#[command(name = "phytoclass", version, about = "Phytoplankton classification from flow-cytometry pulse profiles")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled synthetic dataset (JSON lines) from a species spec.
    Synth {
        /// Species spec JSON; the bundled reference benchmark when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output dataset path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a feature matrix as CSV (`id,label,<features>`).
    Extract {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        family: Family,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the all-pairs DTW dissimilarity matrix as CSV.
    Dtw {
        #[arg(long)]
        dataset: PathBuf,
        /// Point distance.
        #[arg(long, value_enum, default_value_t = Norm::L2)]
        norm: Norm,
        /// Sakoe-Chiba half-width in samples (default: unconstrained).
        #[arg(long)]
        window: Option<usize>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the cross-validation grid and write report.json, report.txt and config.json.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Experiment JSON; the bundled reference grid when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's fold seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Precomputed DTW matrix CSV (from `dtw`); computed when omitted.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-fold contingency tables of two grid cells of a report.
    Compare {
        /// Directory written by `evaluate`, or its report.json.
        #[arg(long)]
        report: PathBuf,
        /// First cell id, e.g. `proposed/RF`.
        #[arg(long)]
        a: String,
        /// Second cell id, e.g. `derived/K-NN`.
        #[arg(long)]
        b: String,
        /// Repeat to tabulate (1-based).
        #[arg(long, default_value_t = 1)]
        repeat: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Derived,
    Proposed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Norm {
    L1,
    L2,
}

impl From<Norm> for PointNorm {
    fn from(n: Norm) -> Self {
        match n {
            Norm::L1 => PointNorm::L1,
            Norm::L2 => PointNorm::L2,
        }
    }
}

/// Effective settings of one invocation, stored next to its output.
#[derive(Serialize)]
struct RunRecord<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    inputs: Vec<&'a Path>,
    config: C,
}

fn write_record<C: Serialize>(path: &Path, command: &str, inputs: Vec<&Path>, config: C) -> Result<()> {
    let record = RunRecord {
        command,
        version: env!("CARGO_PKG_VERSION"),
        inputs,
        config,
    };
    fs::write(path, serde_json::to_string_pretty(&record)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))
}

/// `<out>.run.json` beside a file output.
fn record_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    out.with_file_name(name)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}

fn synth(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut spec = match config {
        Some(p) => read_json::<SynthSpec>(p)?,
        None => SynthSpec::reference(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let dataset = generate_dataset(&spec)?;
    save_dataset(&dataset, out)?;
    write_record(&record_path(out), "synth", config.into_iter().collect(), &spec)
}

fn extract_cmd(dataset: &Path, family: Family, out: &Path) -> Result<()> {
    let family = match family {
        Family::Derived => FeatureFamily::Derived,
        Family::Proposed => FeatureFamily::Proposed,
    };
    let features = extract(&load_dataset(dataset)?, family)?;
    let mut w = create(out)?;
    features.write_csv(&mut w)?;
    w.flush()?;
    write_record(&record_path(out), "extract", vec![dataset], family)
}

fn dtw_cmd(dataset: &Path, config: DtwConfig, out: &Path) -> Result<()> {
    let matrix = dissimilarity_matrix(&load_dataset(dataset)?, &config)?;
    let mut w = create(out)?;
    matrix.write_csv(&mut w)?;
    w.flush()?;
    write_record(&record_path(out), "dtw", vec![dataset], config)
}

fn evaluate_cmd(
    dataset_path: &Path,
    config_path: Option<&Path>,
    seed: Option<u64>,
    matrix_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let mut config = match config_path {
        Some(p) => read_json::<EvalConfig>(p)?,
        None => EvalConfig::reference(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    let dataset = load_dataset(dataset_path)?;
    let matrix = if !config.families.contains(&FeatureFamily::Dissimilarity) {
        None
    } else if let Some(p) = matrix_path {
        let file = File::open(p).with_context(|| format!("cannot open {}", p.display()))?;
        let m = DissimilarityMatrix::read_csv(BufReader::new(file))?.with_labels(&dataset)?;
        Some(m)
    } else {
        Some(dissimilarity_matrix(&dataset, &config.dtw)?)
    };
    let report = evaluate(&dataset, &config, matrix.as_ref())?;
    render_report(&report, &config.comparisons, out)?;
    let config_out = out.join("config.json");
    fs::write(&config_out, serde_json::to_string_pretty(&config)? + "\n")
        .with_context(|| format!("cannot write {}", config_out.display()))?;
    let inputs = [Some(dataset_path), config_path, matrix_path].into_iter().flatten().collect();
    write_record(&out.join("run.json"), "evaluate", inputs, &config)
}

fn compare_cmd(report: &Path, a: String, b: String, repeat: usize) -> Result<()> {
    let path = if report.is_dir() { report.join("report.json") } else { report.to_path_buf() };
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    let report = CvReport::from_json(&text)?;
    if repeat == 0 || repeat > report.repeats {
        bail!("--repeat must be in 1..={}", report.repeats);
    }
    let cmp = Comparison { a, b, repeat: repeat - 1 };
    print!("{}", render_contingency(&report, &cmp)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Synth { config, seed, out } => synth(config.as_deref(), seed, &out),
        Command::Extract { dataset, family, out } => extract_cmd(&dataset, family, &out),
        Command::Dtw {
            dataset,
            norm,
            window,
            out,
        } => {
            let config = DtwConfig {
                point_norm: norm.into(),
                window,
                ..DtwConfig::default()
            };
            dtw_cmd(&dataset, config, &out)
        }
        Command::Evaluate {
            dataset,
            config,
            seed,
            matrix,
            out,
        } => evaluate_cmd(&dataset, config.as_deref(), seed, matrix.as_deref(), &out),
        Command::Compare { report, a, b, repeat } => compare_cmd(&report, a, b, repeat),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("phytoclass: {e:#}");
            ExitCode::FAILURE
        }
    }
}
