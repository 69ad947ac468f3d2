//! The three subcommands. Built-in experiments generate a netlist and go
//! through the same path as `run`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::{Path, PathBuf};

use photonpool::engine::netlist::Mode;
use photonpool::engine::{run_experiment, ExperimentOptions, Netlist, StatisticsTable};

use crate::netlists::{self, HomMode, HomSource, Sweep};
use crate::output::{
    mode_name, num, record_files, sha256_hex, stats_file, Csv, OutputDir, RunManifest, HOM_DELAY_COLUMNS,
    HOM_POLARIZATION_COLUMNS, MZI_COLUMNS,
};
use crate::theory::{fwhm, hom_delay, hom_polarization, mzi_ideal, mzi_lossy, MziSettings};
use crate::CliError;

/// Theory values may sit this far outside an interval and still count as
/// contained; it only matters for exact analytic results.
const CONTAINMENT_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CommonOptions {
    /// Overrides the netlist when set.
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub analytic: bool,
}

#[derive(Debug)]
pub struct Report {
    pub table: StatisticsTable,
    pub files: Vec<PathBuf>,
    /// Whether every point agrees with theory; `None` when the run is not
    /// judged.
    pub passed: Option<bool>,
    pub summary: String,
}

struct Prepared {
    netlist: Netlist,
    options: ExperimentOptions,
    config_hash: String,
}

fn prepare(text: &str, label: &str, common: &CommonOptions) -> Result<Prepared, CliError> {
    let netlist = Netlist::parse(text, label)?;
    let mut options = ExperimentOptions::from_netlist(&netlist);
    if let Some(t) = common.trials {
        options.trials = t;
    }
    if let Some(s) = common.seed {
        options.seed = s;
    }
    if common.analytic {
        options.mode = Mode::Analytic;
    }
    options.keep_records = true;
    Ok(Prepared { netlist, options, config_hash: sha256_hex(text.as_bytes()) })
}

/// Runs a prepared netlist and writes records, statistics and the
/// manifest; `extra` adds command-specific files.
fn execute(
    command: &str,
    config_path: &str,
    prepared: Prepared,
    overrides: BTreeMap<String, String>,
    common: &CommonOptions,
    extra: impl FnOnce(&StatisticsTable, &str) -> Vec<(String, Vec<u8>)>,
) -> Result<(StatisticsTable, Vec<PathBuf>), CliError> {
    let Prepared { netlist, options, config_hash } = prepared;
    let table = run_experiment(&netlist, &options)?;
    let manifest = RunManifest {
        tool: "photonpool",
        version: crate::output::VERSION,
        command: command.to_string(),
        config_path: config_path.to_string(),
        config_sha256: config_hash.clone(),
        seed: options.seed,
        trials: options.trials,
        mode: mode_name(options.mode),
        output_dir: common.out.display().to_string(),
        overrides,
        status: "running",
        files: Vec::new(),
    };
    let mut out = OutputDir::create(&common.out, manifest)?;
    for (name, bytes) in record_files(&table, options.trials, options.seed, &config_hash) {
        out.write(&name, bytes)?;
    }
    out.write("stats.csv", stats_file(&table, options.seed, &config_hash))?;
    for (name, bytes) in extra(&table, &config_hash) {
        out.write(&name, bytes)?;
    }
    Ok((table, out.finish()?))
}

fn contains(lo: f64, hi: f64, x: f64) -> bool {
    lo - CONTAINMENT_SLACK <= x && x <= hi + CONTAINMENT_SLACK
}

/// Runs the experiment declared in a netlist file.
pub fn cmd_run(config: &Path, common: &CommonOptions) -> Result<Report, CliError> {
    let text = fs::read_to_string(config).map_err(|e| CliError::Io(config.to_path_buf(), e))?;
    let label = config.display().to_string();
    let prepared = prepare(&text, &label, common)?;
    let mut overrides = BTreeMap::new();
    if let Some(t) = common.trials {
        overrides.insert("trials".into(), t.to_string());
    }
    if let Some(s) = common.seed {
        overrides.insert("seed".into(), s.to_string());
    }
    if common.analytic {
        overrides.insert("mode".into(), "analytic".into());
    }
    let (table, files) = execute("run", &label, prepared, overrides, common, |_, _| Vec::new())?;
    let summary = format!(
        "{} point(s), detectors {}; wrote {} file(s) to {}",
        table.points.len(),
        table.detectors.join(", "),
        files.len(),
        common.out.display()
    );
    Ok(Report { table, files, passed: None, summary })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MziOptions {
    pub phase_start: f64,
    pub phase_end: f64,
    pub points: usize,
    pub settings: MziSettings,
    pub common: CommonOptions,
}

impl MziOptions {
    pub fn new(out: PathBuf) -> Self {
        MziOptions {
            phase_start: 0.0,
            phase_end: TAU,
            points: 32,
            settings: MziSettings::default(),
            common: CommonOptions { trials: Some(10_000), seed: Some(1), out, analytic: false },
        }
    }
}

/// Sweeps the phase of the Mach-Zehnder interferometer and writes
/// `mzi.csv` next to the generic outputs.
pub fn cmd_mzi(opts: &MziOptions) -> Result<Report, CliError> {
    let common = &opts.common;
    let sweep = Sweep { start: opts.phase_start, end: opts.phase_end, points: opts.points };
    let text = netlists::mzi(&opts.settings, sweep, common.trials.unwrap_or(10_000), common.seed.unwrap_or(1));
    let prepared = prepare(&text, "mzi.toml", common)?;
    let settings = opts.settings;
    let seed = prepared.options.seed;
    let mut verdict = Vec::new();
    let (table, files) = execute("mzi", "mzi.toml", prepared, overrides_of(&settings), common, |table, hash| {
        let (d1, d2) = (table.detector_index("d1").expect("d1"), table.detector_index("d2").expect("d2"));
        let mut csv = Csv::new(MZI_COLUMNS, seed, hash);
        for p in &table.points {
            let phase = p.value.expect("swept");
            let (t1, t2) = if settings.is_ideal() { mzi_ideal(phase) } else { mzi_lossy(phase, &settings) };
            let (a, b) = (p.clicks[d1], p.clicks[d2]);
            verdict.push(contains(a.lo, a.hi, t1) && contains(b.lo, b.hi, t2));
            csv.row(&[phase, a.estimate, a.lo, a.hi, b.estimate, b.lo, b.hi, t1, t2].map(num));
        }
        vec![("mzi.csv".into(), csv.into_bytes()), ("config.toml".into(), text.clone().into_bytes())]
    })?;
    let hits = verdict.iter().filter(|&&v| v).count();
    let ideal = settings.is_ideal();
    let summary = format!(
        "MZI: {hits}/{} points contain theory{}; wrote {} file(s) to {}",
        verdict.len(),
        if ideal { "" } else { " (imperfect devices: reported, not judged)" },
        files.len(),
        common.out.display()
    );
    Ok(Report { table, files, passed: ideal.then_some(hits == verdict.len()), summary })
}

fn overrides_of(s: &MziSettings) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let d = MziSettings::default();
    for (key, value, default) in [
        ("bs1.t", s.bs1_t, d.bs1_t),
        ("bs2.t", s.bs2_t, d.bs2_t),
        ("att.loss_db", s.arm1_loss_db, d.arm1_loss_db),
        ("pm.loss_db", s.arm2_loss_db, d.arm2_loss_db),
        ("efficiency", s.efficiency, d.efficiency),
    ] {
        if value != default {
            m.insert(key.to_string(), num(value));
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomOptions {
    pub mode: HomMode,
    pub start: f64,
    pub end: f64,
    pub points: usize,
    /// Spectral standard deviation of both photons, rad/s.
    pub sigma: f64,
    pub source: HomSource,
    pub common: CommonOptions,
}

/// 2π·65 GHz.
pub const DEFAULT_SIGMA: f64 = TAU * 65e9;

impl HomOptions {
    pub fn new(mode: HomMode, out: PathBuf) -> Self {
        let (start, end, points) = match mode {
            HomMode::Polarization => (0.0, PI, 21),
            HomMode::Delay => (-60e-12, 60e-12, 25),
        };
        HomOptions {
            mode,
            start,
            end,
            points,
            sigma: DEFAULT_SIGMA,
            source: HomSource::SinglePhoton,
            common: CommonOptions { trials: Some(10_000), seed: Some(1), out, analytic: false },
        }
    }
}

/// Sweeps the second photon's polarization or delay and writes `hom.csv`.
pub fn cmd_hom(opts: &HomOptions) -> Result<Report, CliError> {
    let common = &opts.common;
    if !(opts.sigma > 0.0 && opts.sigma.is_finite()) {
        return Err(CliError::Usage(format!("sigma must be > 0, got {}", opts.sigma)));
    }
    let sweep = Sweep { start: opts.start, end: opts.end, points: opts.points };
    let text = netlists::hom(
        opts.mode,
        opts.source,
        opts.sigma,
        sweep,
        common.trials.unwrap_or(10_000),
        common.seed.unwrap_or(1),
    );
    let prepared = prepare(&text, "hom.toml", common)?;
    let seed = prepared.options.seed;
    let (mode, sigma) = (opts.mode, opts.sigma);
    let mut overrides = BTreeMap::new();
    overrides.insert("sigma".to_string(), num(sigma));
    if let HomSource::WeakCoherent { mean_photon_number } = opts.source {
        overrides.insert("mean_photon_number".to_string(), num(mean_photon_number));
    }
    let mut verdict = Vec::new();
    let (table, files) = execute("hom", "hom.toml", prepared, overrides, common, |table, hash| {
        let pair = table.pair_index("d1", "d2").expect("pair declared");
        let columns = match mode {
            HomMode::Polarization => HOM_POLARIZATION_COLUMNS,
            HomMode::Delay => HOM_DELAY_COLUMNS,
        };
        let mut csv = Csv::new(columns, seed, hash);
        for p in &table.points {
            let x = p.value.expect("swept");
            let theory = match mode {
                HomMode::Polarization => hom_polarization(x),
                HomMode::Delay => hom_delay(x, sigma),
            };
            let c = p.coincidences[pair];
            verdict.push(contains(c.lo, c.hi, theory));
            csv.row(&[x, c.estimate, c.lo, c.hi, theory].map(num));
        }
        vec![("hom.csv".into(), csv.into_bytes()), ("config.toml".into(), text.clone().into_bytes())]
    })?;
    let hits = verdict.iter().filter(|&&v| v).count();
    let ideal = opts.source == HomSource::SinglePhoton;
    let width = fwhm(sigma);
    let summary = format!(
        "HOM: {hits}/{} points contain theory{}\nFWHM = 2√(2 ln 2) σ = {} rad/s ({} GHz)\nwrote {} file(s) to {}",
        verdict.len(),
        if ideal { "" } else { " (weak-coherent sources: reported, not judged)" },
        width,
        width / TAU / 1e9,
        files.len(),
        common.out.display()
    );
    Ok(Report { table, files, passed: ideal.then_some(hits == verdict.len()), summary })
}
