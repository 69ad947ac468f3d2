//! Sweeps and trial statistics.

use rayon::prelude::*;

use super::netlist::{Mode, Netlist, SweepSpec};
use super::topology::Topology;
use super::trial::{analytic_probabilities, run_trial_at, TrialOutcome};
use crate::detector::DetectionRecord;
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn exact(p: f64) -> Self {
        Interval { estimate: p, lo: p, hi: p }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval at 95%. With no trials the interval is `[0, 1]`.
pub fn wilson(successes: u64, n: u64) -> Interval {
    if n == 0 {
        return Interval { estimate: 0.0, lo: 0.0, hi: 1.0 };
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    Interval { estimate: p, lo, hi }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOptions {
    pub trials: u64,
    pub seed: u64,
    pub mode: Mode,
    pub sweep: Option<SweepSpec>,
    /// Keep every detection record, not only the counts.
    pub keep_records: bool,
}

impl ExperimentOptions {
    pub fn from_netlist(netlist: &Netlist) -> Self {
        let e = &netlist.experiment;
        ExperimentOptions { trials: e.trials, seed: e.seed, mode: e.mode, sweep: e.sweep.clone(), keep_records: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointStats {
    pub index: usize,
    /// Value of the swept parameter in SI units.
    pub value: Option<f64>,
    pub trials: u64,
    pub aborted: u64,
    /// Trials with at least one click, per detector.
    pub click_counts: Vec<u64>,
    pub clicks: Vec<Interval>,
    pub coincidence_counts: Vec<u64>,
    pub coincidences: Vec<Interval>,
    pub multi_photon_trials: u64,
    pub redraws: u64,
    pub undetected_pools: u64,
    pub records: Vec<DetectionRecord>,
}

impl PointStats {
    /// Trials that count towards the frequencies.
    pub fn valid_trials(&self) -> u64 {
        self.trials - self.aborted
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatisticsTable {
    pub parameter: Option<String>,
    pub mode: Mode,
    pub detectors: Vec<String>,
    pub pairs: Vec<(String, String)>,
    pub points: Vec<PointStats>,
}

impl StatisticsTable {
    pub fn detector_index(&self, name: &str) -> Option<usize> {
        self.detectors.iter().position(|d| d == name)
    }

    pub fn pair_index(&self, a: &str, b: &str) -> Option<usize> {
        self.pairs.iter().position(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

fn pairs_of(topology: &Topology) -> Result<Vec<(usize, usize)>> {
    let detectors: Vec<usize> = topology.detectors().map(|(n, _)| n).collect();
    let wanted = &topology.netlist.experiment.coincidences;
    if wanted.is_empty() {
        let mut all = Vec::new();
        for (i, &a) in detectors.iter().enumerate() {
            for &b in &detectors[i + 1..] {
                all.push((a, b));
            }
        }
        return Ok(all);
    }
    wanted
        .iter()
        .map(|(a, b)| {
            let find = |name: &str| {
                topology
                    .node_index(name)
                    .filter(|n| detectors.contains(n))
                    .ok_or_else(|| Error::ConfigGeneral(format!("coincidence names unknown detector \"{name}\"")))
            };
            Ok((find(a)?, find(b)?))
        })
        .collect()
}

fn tally(outcomes: Vec<TrialOutcome>, detectors: &[String], pairs: &[(usize, usize)], keep: bool) -> PointStats {
    let mut stats = PointStats {
        index: 0,
        value: None,
        trials: outcomes.len() as u64,
        aborted: 0,
        click_counts: vec![0; detectors.len()],
        clicks: Vec::new(),
        coincidence_counts: vec![0; pairs.len()],
        coincidences: Vec::new(),
        multi_photon_trials: 0,
        redraws: 0,
        undetected_pools: 0,
        records: Vec::new(),
    };
    for outcome in outcomes {
        stats.redraws += outcome.redraws;
        stats.multi_photon_trials += outcome.multi_photon as u64;
        stats.undetected_pools += outcome.undetected_pools as u64;
        if outcome.aborted {
            stats.aborted += 1;
        } else {
            let clicked: Vec<bool> = detectors
                .iter()
                .map(|d| outcome.records.iter().any(|r| r.clicked && &r.detector_id == d))
                .collect();
            for (count, &c) in stats.click_counts.iter_mut().zip(&clicked) {
                *count += c as u64;
            }
            for (count, &(a, b)) in stats.coincidence_counts.iter_mut().zip(pairs) {
                *count += (clicked[a] && clicked[b]) as u64;
            }
        }
        if keep {
            stats.records.extend(outcome.records);
        }
    }
    let valid = stats.valid_trials();
    stats.clicks = stats.click_counts.iter().map(|&k| wilson(k, valid)).collect();
    stats.coincidences = stats.coincidence_counts.iter().map(|&k| wilson(k, valid)).collect();
    stats
}

/// Runs every sweep point. Per-trial random streams come from
/// `(seed, point index, trial index)`, so the table does not depend on how
/// the trials are spread over threads.
pub fn run_experiment(netlist: &Netlist, options: &ExperimentOptions) -> Result<StatisticsTable> {
    if options.trials > u32::MAX as u64 + 1 {
        return Err(Error::InvalidArgument(format!("at most 2^32 trials per point, got {}", options.trials)));
    }
    let values: Vec<Option<f64>> = match &options.sweep {
        Some(s) => s.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let mut base = netlist.clone();
    base.experiment.trials = options.trials;
    let mut table = StatisticsTable {
        parameter: options.sweep.as_ref().map(|s| s.parameter.clone()),
        mode: options.mode,
        detectors: base.detectors.iter().map(|d| d.name.clone()).collect(),
        pairs: Vec::new(),
        points: Vec::new(),
    };
    if let Some(s) = &options.sweep {
        if super::netlist::parameter_quantity(&s.parameter).is_none() {
            return Err(Error::ConfigGeneral(format!("unknown sweep parameter \"{}\"", s.parameter)));
        }
    }
    for (index, value) in values.into_iter().enumerate() {
        let mut point_netlist = base.clone();
        if let (Some(s), Some(v)) = (&options.sweep, value) {
            point_netlist.set_parameter(&s.parameter, v)?;
        }
        let topology = Topology::from_netlist(point_netlist)?;
        let detectors: Vec<String> = topology.detectors().map(|(_, n)| n.name.clone()).collect();
        let slot = |n: usize| topology.detectors().position(|(i, _)| i == n).expect("detector node");
        let pairs = pairs_of(&topology)?;
        if table.pairs.is_empty() {
            table.detectors = detectors.clone();
            table.pairs = pairs
                .iter()
                .map(|&(a, b)| (topology.nodes[a].name.clone(), topology.nodes[b].name.clone()))
                .collect();
        }
        if options.trials == 0 {
            continue;
        }
        let mut stats = match options.mode {
            Mode::Analytic => {
                let exact = analytic_probabilities(&topology, &pairs)?;
                PointStats {
                    index,
                    value,
                    trials: options.trials,
                    aborted: 0,
                    click_counts: vec![0; detectors.len()],
                    clicks: exact.clicks.iter().map(|c| Interval::exact(c.1)).collect(),
                    coincidence_counts: vec![0; pairs.len()],
                    coincidences: exact.coincidences.iter().map(|&p| Interval::exact(p)).collect(),
                    multi_photon_trials: 0,
                    redraws: 0,
                    undetected_pools: 0,
                    records: Vec::new(),
                }
            }
            Mode::MonteCarlo => {
                let outcomes = (0..options.trials)
                    .into_par_iter()
                    .map(|t| run_trial_at(&topology, options.seed, index as u64, t))
                    .collect::<Result<Vec<_>>>()?;
                let slots: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (slot(a), slot(b))).collect();
                tally(outcomes, &detectors, &slots, options.keep_records)
            }
        };
        stats.index = index;
        stats.value = value;
        table.points.push(stats);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const MZI: &str = r#"
[sources.src]
kind = "single_photon"
[devices.bs1]
kind = "beam_splitter"
[devices.pm]
kind = "phase_modulator"
[devices.bs2]
kind = "beam_splitter"
[detectors.d1]
[detectors.d2]
[[links]]
from = "src"
to = "bs1.a"
[[links]]
from = "bs1.c"
to = "bs2.a"
[[links]]
from = "bs1.d"
to = "pm"
[[links]]
from = "pm"
to = "bs2.b"
[[links]]
from = "bs2.d"
to = "d1"
[[links]]
from = "bs2.c"
to = "d2"
[experiment]
trials = 2000
seed = 11
sweep = { parameter = "pm.phase", start = "0 rad", end = "2 pi", points = 9 }
"#;

    #[test]
    fn wilson_matches_textbook_values() {
        // 5 of 10 at 95%: centre 0.5, half-width 0.2634.
        let w = wilson(5, 10);
        assert!((w.lo - 0.236_593).abs() < 1e-6 && (w.hi - 0.763_407).abs() < 1e-6, "{w:?}");
        let zero = wilson(0, 100);
        assert_eq!(zero.lo, 0.0);
        assert!((zero.hi - 0.036_993_498).abs() < 1e-8);
        assert_eq!(wilson(0, 0), Interval { estimate: 0.0, lo: 0.0, hi: 1.0 });
    }

    #[test]
    fn mzi_sweep_tracks_cosine() {
        let netlist = Netlist::parse(MZI, "mzi").unwrap();
        let table = run_experiment(&netlist, &ExperimentOptions::from_netlist(&netlist)).unwrap();
        assert_eq!(table.points.len(), 9);
        assert_eq!(table.pairs, vec![("d1".to_string(), "d2".to_string())]);
        let d1 = table.detector_index("d1").unwrap();
        for p in &table.points {
            let theory = (1.0 + p.value.unwrap().cos()) / 2.0;
            assert!((p.clicks[d1].estimate - theory).abs() < 0.05, "{p:?}");
            assert_eq!(p.coincidence_counts[0], 0);
        }
    }

    #[test]
    fn analytic_mode_is_exact() {
        let netlist = Netlist::parse(MZI, "mzi").unwrap();
        let options = ExperimentOptions { mode: Mode::Analytic, ..ExperimentOptions::from_netlist(&netlist) };
        let table = run_experiment(&netlist, &options).unwrap();
        for p in &table.points {
            let theory = (1.0 + p.value.unwrap().cos()) / 2.0;
            assert!((p.clicks[0].estimate - theory).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_trials_give_an_empty_table() {
        let netlist = Netlist::parse(MZI, "mzi").unwrap();
        let options = ExperimentOptions { trials: 0, ..ExperimentOptions::from_netlist(&netlist) };
        assert!(run_experiment(&netlist, &options).unwrap().points.is_empty());
    }

    #[test]
    fn unknown_parameter_path_is_a_config_error() {
        let netlist = Netlist::parse(MZI, "mzi").unwrap();
        let sweep = SweepSpec { parameter: "pm.colour".into(), start: 0.0, end: PI, points: 2 };
        let options = ExperimentOptions { sweep: Some(sweep), ..ExperimentOptions::from_netlist(&netlist) };
        assert!(matches!(run_experiment(&netlist, &options), Err(Error::ConfigGeneral(_))));
    }

    #[test]
    fn tables_do_not_depend_on_thread_count() {
        let netlist = Netlist::parse(MZI, "mzi").unwrap();
        let options = ExperimentOptions { trials: 300, keep_records: true, ..ExperimentOptions::from_netlist(&netlist) };
        let parallel = run_experiment(&netlist, &options).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_experiment(&netlist, &options).unwrap());
        assert_eq!(parallel, single);
    }
}
