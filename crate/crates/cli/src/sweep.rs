use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Mode, Overrides, RunConfig};
use crate::error::CliResult;
use crate::manifest::{ArtifactWriter, RunManifest};
use crate::pool::pool_map;
use crate::run::run;

pub const REPORT_FILE: &str = "sweep_report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Completed,
    /// A previous run with the same config digest is intact on disk.
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryReport {
    pub index: usize,
    pub status: EntryStatus,
    pub config_sha256: Option<String>,
    pub dir: Option<PathBuf>,
    pub error: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub mode: String,
    pub entries: Vec<EntryReport>,
    /// Merged table written at the sweep root, if any entry produced one.
    pub combined: Option<String>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.status == EntryStatus::Failed).count()
    }
}

/// The table of each mode that is merged across entries.
pub fn primary_table(mode: Mode) -> &'static str {
    match mode {
        Mode::SpectrumScan => "spectrum.csv",
        Mode::Quench => "structure.csv",
        Mode::CoherenceReversal => "reversal.csv",
        Mode::RampSpeedSweep => "rampsweep.csv",
        Mode::FmComparison => "fm_comparison.csv",
    }
}

/// Entry directory: the mode and the first 16 hex digits of the config digest.
pub fn entry_dir(root: &Path, config: &RunConfig) -> PathBuf {
    root.join(format!("{}_{}", config.mode().label(), &config.digest()[..16]))
}

/// Runs every config of one mode under `root` on at most `workers` threads.
/// Invalid or failing entries are recorded and do not stop the others;
/// entries whose digest matches an intact earlier run are skipped.
pub fn sweep(mode: Mode, configs: Vec<RunConfig>, overrides: &Overrides, root: &Path, workers: usize) -> CliResult<SweepReport> {
    let inner = Overrides {
        output_dir: None,
        workers: Some(overrides.workers.unwrap_or(1)),
        ..overrides.clone()
    };
    let entries = pool_map(&configs, workers, |index, raw| {
        let config = match raw.clone().resolve(mode, &inner) {
            Ok(c) => c,
            Err(e) => return (failed(index, None, None, &e), None),
        };
        let digest = config.digest();
        let dir = entry_dir(root, &config);
        if let Ok(previous) = RunManifest::load(&dir) {
            if previous.config_sha256 == digest && previous.verify(&dir) {
                return (entry(index, EntryStatus::Skipped, digest, dir.clone()), Some(dir));
            }
        }
        match run(&config, &dir) {
            Ok(_) => (entry(index, EntryStatus::Completed, digest, dir.clone()), Some(dir)),
            Err(e) => (failed(index, Some(digest), Some(dir), &e), None),
        }
    });
    let mut writer = ArtifactWriter::create(root)?;
    let table = primary_table(mode);
    let mut merged = String::new();
    for (report, dir) in &entries {
        let Some(body) = dir.as_ref().and_then(|d| std::fs::read_to_string(d.join(table)).ok()) else {
            continue;
        };
        let mut lines = body.lines();
        let header = lines.next().unwrap_or_default();
        if merged.is_empty() {
            writeln!(merged, "entry,{header}").unwrap();
        }
        for line in lines {
            writeln!(merged, "{},{line}", report.index).unwrap();
        }
    }
    let combined = if merged.is_empty() {
        None
    } else {
        let name = format!("combined_{table}");
        writer.write(&name, merged)?;
        Some(name)
    };
    let report = SweepReport {
        mode: mode.label().into(),
        entries: entries.into_iter().map(|(r, _)| r).collect(),
        combined,
    };
    writer.write_json(REPORT_FILE, &report)?;
    Ok(report)
}

fn entry(index: usize, status: EntryStatus, digest: String, dir: PathBuf) -> EntryReport {
    EntryReport {
        index,
        status,
        config_sha256: Some(digest),
        dir: Some(dir),
        error: None,
    }
}

fn failed(index: usize, digest: Option<String>, dir: Option<PathBuf>, e: &crate::error::CliError) -> EntryReport {
    EntryReport {
        index,
        status: EntryStatus::Failed,
        config_sha256: digest,
        dir,
        error: Some(serde_json::to_value(e).expect("error serializes")),
    }
}
