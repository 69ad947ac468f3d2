//! CSV files, the run manifest and their hashes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use photonpool::detector::DetectionRecord;
use photonpool::engine::netlist::Mode;
use photonpool::engine::StatisticsTable;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const RECORD_COLUMNS: &str = "trial,detector_id,clicked,photon_count,timestamp_s,aborted";
pub const STATS_COLUMNS: &str = "point,parameter_value,kind,name,successes,valid_trials,estimate,lo,hi";
pub const MZI_COLUMNS: &str = "phase_rad,p_d1,p_d1_lo,p_d1_hi,p_d2,p_d2_lo,p_d2_hi,theory_d1,theory_d2";
pub const HOM_POLARIZATION_COLUMNS: &str = "delta_theta_rad,coincidence,coincidence_lo,coincidence_hi,theory";
pub const HOM_DELAY_COLUMNS: &str = "delay_s,coincidence,coincidence_lo,coincidence_hi,theory";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A CSV document: `#` metadata lines, the column line, then rows.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(columns: &str, seed: u64, config_hash: &str) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# photonpool {VERSION}");
        let _ = writeln!(text, "# seed = {seed}");
        let _ = writeln!(text, "# config_sha256 = {config_hash}");
        text.push_str(columns);
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Shortest round-trip form, scientific for very small or large values.
/// NaN marks a field with no value.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

/// What a run was asked to do and what it wrote.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub trials: u64,
    pub mode: &'static str,
    pub output_dir: String,
    pub overrides: BTreeMap<String, String>,
    pub status: &'static str,
    pub files: Vec<FileEntry>,
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::MonteCarlo => "monte_carlo",
        Mode::Analytic => "analytic",
    }
}

/// Writes into one directory and remembers every file for the manifest.
pub struct OutputDir {
    dir: PathBuf,
    manifest: RunManifest,
}

impl OutputDir {
    /// Creates the directory and writes the manifest in its `running` state.
    pub fn create(dir: &Path, manifest: RunManifest) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        let mut out = OutputDir { dir: dir.to_path_buf(), manifest };
        out.write_manifest()?;
        Ok(out)
    }

    fn write_manifest(&mut self) -> Result<(), CliError> {
        let mut json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        json.push('\n');
        let path = self.dir.join("manifest.json");
        fs::write(&path, json).map_err(|e| CliError::Io(path, e))
    }

    pub fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).map_err(|e| CliError::Io(path.clone(), e))?;
        self.manifest.files.push(FileEntry { name: name.to_string(), sha256: sha256_hex(&bytes) });
        Ok(path)
    }

    /// Marks the manifest complete with the hash of every file written.
    pub fn finish(mut self) -> Result<Vec<PathBuf>, CliError> {
        self.manifest.status = "complete";
        self.manifest.files.sort_by(|a, b| a.name.cmp(&b.name));
        self.write_manifest()?;
        let mut files: Vec<PathBuf> = self.manifest.files.iter().map(|f| self.dir.join(&f.name)).collect();
        files.push(self.dir.join("manifest.json"));
        Ok(files)
    }
}

/// One file per detector. Trials are numbered across the sweep:
/// `point · trials + trial`.
pub fn record_files(
    table: &StatisticsTable,
    trials: u64,
    seed: u64,
    config_hash: &str,
) -> Vec<(String, Vec<u8>)> {
    table
        .detectors
        .iter()
        .map(|det| {
            let mut csv = Csv::new(RECORD_COLUMNS, seed, config_hash);
            for point in &table.points {
                for r in point.records.iter().filter(|r| &r.detector_id == det) {
                    csv.row(&record_fields(r, point.index as u64 * trials + r.trial_index));
                }
            }
            (format!("records_{det}.csv"), csv.into_bytes())
        })
        .collect()
}

fn record_fields(r: &DetectionRecord, trial: u64) -> Vec<String> {
    vec![
        trial.to_string(),
        r.detector_id.clone(),
        (r.clicked as u8).to_string(),
        r.photon_count.map_or(String::new(), |k| k.to_string()),
        num(r.timestamp),
        (r.aborted as u8).to_string(),
    ]
}

pub fn stats_file(table: &StatisticsTable, seed: u64, config_hash: &str) -> Vec<u8> {
    let mut csv = Csv::new(STATS_COLUMNS, seed, config_hash);
    for p in &table.points {
        let value = p.value.map_or(String::new(), num);
        let valid = p.valid_trials();
        let mut row = |kind: &str, name: &str, k: u64, n: u64, est: f64, lo: f64, hi: f64| {
            csv.row(&[
                p.index.to_string(),
                value.clone(),
                kind.to_string(),
                name.to_string(),
                k.to_string(),
                n.to_string(),
                num(est),
                num(lo),
                num(hi),
            ]);
        };
        for (i, det) in table.detectors.iter().enumerate() {
            let c = p.clicks[i];
            row("click", det, p.click_counts[i], valid, c.estimate, c.lo, c.hi);
        }
        for (i, (a, b)) in table.pairs.iter().enumerate() {
            let c = p.coincidences[i];
            row("coincidence", &format!("{a}+{b}"), p.coincidence_counts[i], valid, c.estimate, c.lo, c.hi);
        }
        let frac = |k: u64| if p.trials == 0 { 0.0 } else { k as f64 / p.trials as f64 };
        row("aborted", "", p.aborted, p.trials, frac(p.aborted), f64::NAN, f64::NAN);
        row("multi_photon", "", p.multi_photon_trials, p.trials, frac(p.multi_photon_trials), f64::NAN, f64::NAN);
        row("redraws", "", p.redraws, p.trials, frac(p.redraws), f64::NAN, f64::NAN);
        row("undetected_pools", "", p.undetected_pools, p.trials, frac(p.undetected_pools), f64::NAN, f64::NAN);
    }
    csv.into_bytes()
}
