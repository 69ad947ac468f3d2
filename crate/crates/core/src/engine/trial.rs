//! One trial: sources fire, pulse-arrival events are processed in
//! `(time, sequence)` order, detectors project the pools they receive.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::netlist::{DeviceKind, SourceKind};
use super::topology::{NodeKind, Topology};
use crate::components::{
    apply_bs, apply_fiber, apply_pbs, apply_simple_device, apply_switch, DeviceParams, Passage, SplitterPorts,
    SwitchPorts,
};
use crate::detector::{click_probability, detect, Arrival, ConstantAfterpulse, DetectionRecord, SpdParams};
use crate::error::{Error, Result};
use crate::fock::{PhotonPool, PoolId, RouteId};
use crate::quantum::{joint_number_distribution, merge_pools};
use crate::sources::{emit_single_photon, emit_weak_coherent_counted};

/// A pulse arriving at the consumer of `route`.
#[derive(Clone, Copy, Debug)]
pub struct Event {
    pub time: f64,
    pub sequence: u64,
    pub route: RouteId,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then(self.sequence.cmp(&other.sequence))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialOutcome {
    pub records: Vec<DetectionRecord>,
    /// A detector hit a zero-probability projection; the trial is void.
    pub aborted: bool,
    /// Some source emitted two or more photons.
    pub multi_photon: bool,
    pub redraws: u64,
    /// Pools still holding photons on detectable routes when the queue ran
    /// dry.
    pub undetected_pools: usize,
    pub events: usize,
}

/// Exact detector statistics for a network without randomness.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticOutcome {
    /// Click probability per detector, in topology order.
    pub clicks: Vec<(String, f64)>,
    /// Joint click probability for each requested pair of detector nodes.
    pub coincidences: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    first: f64,
    last: f64,
}

enum Measure<'a> {
    Sample { afterpulse: Vec<ConstantAfterpulse>, records: &'a mut Vec<DetectionRecord> },
    /// Detection deferred to the end; only arrival times are kept.
    Defer { arrivals: BTreeMap<usize, f64> },
}

struct Trial<'t, 'm> {
    topo: &'t Topology,
    trial_index: u64,
    rng: ChaCha8Rng,
    pools: BTreeMap<PoolId, PhotonPool>,
    queue: BinaryHeap<Reverse<Event>>,
    sequence: u64,
    buffers: BTreeMap<usize, (BTreeSet<&'static str>, Pending)>,
    measure: Measure<'m>,
    outcome: TrialOutcome,
}

pub(crate) fn trial_rng(seed: u64, point: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(point << 32 | (trial & 0xffff_ffff));
    rng
}

/// Moves every state on `route` later by `dt`.
fn shift_route(pool: &mut PhotonPool, route: RouteId, dt: f64) {
    if dt == 0.0 {
        return;
    }
    for photon in pool.photons_mut() {
        for s in photon.states_mut() {
            if s.route == route {
                s.delay += dt;
            }
        }
    }
}

/// `|c|²`-weighted mean wavepacket time on `route`.
fn mean_arrival<'p>(pools: impl Iterator<Item = &'p PhotonPool>, route: RouteId) -> Option<f64> {
    let (mut weight, mut acc) = (0.0, 0.0);
    for s in pools.flat_map(|p| p.photons()).flat_map(|ph| ph.states()).filter(|s| s.route == route) {
        let w = s.coefficient * s.coefficient;
        weight += w;
        acc += w * s.delay;
    }
    (weight > 0.0).then(|| acc / weight)
}

impl<'t, 'm> Trial<'t, 'm> {
    fn new(topo: &'t Topology, rng: ChaCha8Rng, trial_index: u64, measure: Measure<'m>) -> Self {
        Trial {
            topo,
            trial_index,
            rng,
            pools: BTreeMap::new(),
            queue: BinaryHeap::new(),
            sequence: 0,
            buffers: BTreeMap::new(),
            measure,
            outcome: TrialOutcome::default(),
        }
    }

    fn schedule(&mut self, route: RouteId, time: f64) {
        self.queue.push(Reverse(Event { time, sequence: self.sequence, route }));
        self.sequence += 1;
    }

    /// Sends whatever sits on `route` over its link.
    fn send(&mut self, route: RouteId, time: f64) {
        let delay = self.topo.route(route).delay;
        for pool in self.pools.values_mut() {
            shift_route(pool, route, delay);
        }
        self.schedule(route, time + delay);
    }

    fn take_pools_on(&mut self, routes: &[RouteId]) -> Vec<PhotonPool> {
        let ids: Vec<PoolId> = self
            .pools
            .iter()
            .filter(|(_, p)| routes.iter().any(|&r| p.occupies(r)))
            .map(|(id, _)| *id)
            .collect();
        ids.iter().map(|id| self.pools.remove(id).expect("id listed")).collect()
    }

    fn insert(&mut self, pool: PhotonPool) {
        if !pool.is_empty() {
            self.pools.insert(pool.id(), pool);
        }
    }

    fn merged(pools: Vec<PhotonPool>, cap: usize) -> Result<PhotonPool> {
        let mut iter = pools.into_iter();
        let Some(first) = iter.next() else { return Ok(PhotonPool::empty().with_cap(cap)) };
        iter.try_fold(first, merge_pools)
    }

    fn emit_sources(&mut self) -> Result<()> {
        let cap = self.topo.netlist.experiment.photon_cap;
        for (n, node) in self.topo.sources() {
            let NodeKind::Source(spec) = &node.kind else { unreachable!() };
            let mut pool = match spec.kind {
                SourceKind::SinglePhoton => emit_single_photon(&spec.params),
                SourceKind::WeakCoherent => {
                    let n_t = self.topo.truncation.get(&n).copied().unwrap_or(0);
                    let emission = emit_weak_coherent_counted(&spec.params, n_t, &mut self.rng);
                    self.outcome.redraws += emission.redraws;
                    emission.pool
                }
            }
            .with_cap(cap);
            if pool.len() >= 2 {
                self.outcome.multi_photon = true;
            }
            let route = spec.params.emit_route;
            shift_route(&mut pool, route, spec.offset);
            self.insert(pool);
            self.send(route, spec.offset);
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        self.emit_sources()?;
        let max_events = self.topo.netlist.experiment.max_events;
        loop {
            while let Some(Reverse(event)) = self.queue.pop() {
                self.outcome.events += 1;
                if self.outcome.events > max_events {
                    return Err(Error::Capacity { what: "event count", got: self.outcome.events, cap: max_events });
                }
                self.dispatch(event)?;
                if self.outcome.aborted {
                    return Ok(());
                }
            }
            // A splitter still waiting for an input nobody will send: fire it
            // with what it has.
            let stalled = self
                .buffers
                .iter()
                .min_by(|a, b| a.1 .1.first.total_cmp(&b.1 .1.first).then(a.0.cmp(b.0)))
                .map(|(n, (_, p))| (*n, p.last));
            match stalled {
                Some((n, time)) => self.fire_splitter(n, time)?,
                None => break,
            }
        }
        self.outcome.undetected_pools = self.pools.values().filter(|p| p.has_live_states()).count();
        Ok(())
    }

    fn dispatch(&mut self, event: Event) -> Result<()> {
        let Some((n, port)) = self.topo.route(event.route).consumer else { return Ok(()) };
        let node = &self.topo.nodes[n];
        match &node.kind {
            NodeKind::Source(_) => Ok(()),
            NodeKind::Detector(spec) => self.arrive_at_detector(n, &spec.params, event),
            NodeKind::Device(d) => match d.kind {
                DeviceKind::BeamSplitter(_) | DeviceKind::PolarizingBeamSplitter(_) => {
                    let entry = self
                        .buffers
                        .entry(n)
                        .or_insert_with(|| (BTreeSet::new(), Pending { first: event.time, last: event.time }));
                    entry.0.insert(port);
                    entry.1.last = entry.1.last.max(event.time);
                    if node.expected.iter().all(|p| entry.0.contains(p)) {
                        let last = entry.1.last;
                        self.fire_splitter(n, last)?;
                    }
                    Ok(())
                }
                DeviceKind::Single(params) => self.pass_single(n, port, &params, event),
            },
        }
    }

    fn fire_splitter(&mut self, n: usize, time: f64) -> Result<()> {
        self.buffers.remove(&n);
        let node = &self.topo.nodes[n];
        let (a, b) = (node.input("a"), node.input("b"));
        // An unconnected input gets a route number no link uses; nothing
        // ever occupies it.
        let unused = |loss: RouteId| RouteId::new((1 << 31) - 1 - loss.index());
        let ports = SplitterPorts {
            a: a.route.unwrap_or_else(|| unused(a.loss)),
            b: b.route.unwrap_or_else(|| unused(b.loss)),
            c: node.output("c"),
            d: node.output("d"),
            loss_a: a.loss,
            loss_b: b.loss,
        };
        let pools = self.take_pools_on(&[ports.a, ports.b]);
        if !pools.is_empty() {
            let pool = Self::merged(pools, self.topo.netlist.experiment.photon_cap)?;
            let NodeKind::Device(spec) = &node.kind else { unreachable!() };
            let out = match &spec.kind {
                DeviceKind::BeamSplitter(p) => apply_bs(&pool, p, &ports)?,
                DeviceKind::PolarizingBeamSplitter(p) => apply_pbs(&pool, p, &ports)?,
                DeviceKind::Single(_) => unreachable!(),
            };
            self.insert(out);
        }
        self.send(ports.c, time);
        self.send(ports.d, time);
        Ok(())
    }

    fn pass_single(&mut self, n: usize, port: &'static str, params: &DeviceParams, event: Event) -> Result<()> {
        let node = &self.topo.nodes[n];
        let input = node.input(port);
        let outputs: Vec<RouteId> =
            super::topology::transfers(&node.kind, port).iter().map(|p| node.output(p)).collect();
        let passage = Passage {
            input: event.route,
            output: outputs[0],
            loss: input.loss,
            backward: matches!(params, DeviceParams::Isolator { .. }) && port == "b",
        };
        for pool in self.take_pools_on(&[event.route]) {
            let out = match params {
                DeviceParams::Fiber(f) => apply_fiber(&pool, f, &passage, &mut self.rng)?,
                DeviceParams::Switch { loss_db, isolation_db, selected } => {
                    let ports =
                        SwitchPorts { input: event.route, out1: outputs[0], out2: outputs[1], loss: input.loss };
                    apply_switch(&pool, *loss_db, *isolation_db, *selected, &ports)?
                }
                _ => apply_simple_device(&pool, params, &passage)?,
            };
            self.insert(out);
        }
        let time = event.time + node.latency();
        for route in outputs {
            self.send(route, time);
        }
        Ok(())
    }

    fn arrive_at_detector(&mut self, n: usize, params: &SpdParams, event: Event) -> Result<()> {
        let arrival_time = mean_arrival(self.pools.values(), event.route).unwrap_or(event.time);
        if let Measure::Defer { arrivals } = &mut self.measure {
            arrivals.insert(n, arrival_time);
            return Ok(());
        }
        let pools = self.take_pools_on(&[event.route]);
        let pool = Self::merged(pools, self.topo.netlist.experiment.photon_cap)?;
        let Measure::Sample { afterpulse, records } = &mut self.measure else { unreachable!() };
        let slot = self.topo.detectors().position(|(i, _)| i == n).expect("detector node");
        let arrival = Arrival {
            detector_id: &self.topo.nodes[n].name,
            route: event.route,
            time: arrival_time,
            trial_index: self.trial_index,
        };
        let detection = detect(&pool, arrival, params, &mut afterpulse[slot], &mut self.rng)?;
        records.push(detection.record);
        match detection.surviving_pool {
            Some(rest) => self.insert(rest),
            None => self.outcome.aborted = true,
        }
        Ok(())
    }
}

/// Runs one Monte-Carlo trial. The random stream depends only on `seed`
/// and `trial_index`.
pub fn run_trial(topology: &Topology, seed: u64, trial_index: u64) -> Result<TrialOutcome> {
    run_trial_at(topology, seed, 0, trial_index)
}

pub(crate) fn run_trial_at(topology: &Topology, seed: u64, point: u64, trial_index: u64) -> Result<TrialOutcome> {
    let mut records = Vec::new();
    let afterpulse = vec![ConstantAfterpulse; topology.detectors().count()];
    let measure = Measure::Sample { afterpulse, records: &mut records };
    let mut trial = Trial::new(topology, trial_rng(seed, point, trial_index), trial_index, measure);
    trial.run()?;
    let mut outcome = trial.outcome;
    outcome.records = records;
    if outcome.aborted {
        for r in &mut outcome.records {
            r.aborted = true;
        }
    }
    Ok(outcome)
}

/// Reasons the exact path cannot be used, if any.
pub fn analytic_obstacle(topology: &Topology) -> Option<String> {
    for node in &topology.nodes {
        match &node.kind {
            NodeKind::Source(s) if s.kind == SourceKind::WeakCoherent && s.params.mean_photon_number > 0.0 => {
                return Some(format!("source \"{}\" draws a random photon number", node.name));
            }
            NodeKind::Device(d) => {
                if let DeviceKind::Single(DeviceParams::Fiber(f)) = d.kind {
                    if [f.phase, f.alpha, f.beta, f.theta].iter().any(|x| x.sigma > 0.0) {
                        return Some(format!("fiber \"{}\" has random disturbances", node.name));
                    }
                }
            }
            _ => {}
        }
    }
    None
}

/// Click and coincidence probabilities computed from the exact joint
/// photon-number distribution on the detector routes, with no sampling.
pub fn analytic_probabilities(topology: &Topology, pairs: &[(usize, usize)]) -> Result<AnalyticOutcome> {
    if let Some(reason) = analytic_obstacle(topology) {
        return Err(Error::AnalyticUnsupported(reason));
    }
    let measure = Measure::Defer { arrivals: BTreeMap::new() };
    let mut trial = Trial::new(topology, trial_rng(0, 0, 0), 0, measure);
    trial.run()?;
    let Measure::Defer { arrivals } = trial.measure else { unreachable!() };
    let pools: Vec<PhotonPool> = std::mem::take(&mut trial.pools).into_values().collect();
    let pool = Trial::merged(pools, topology.netlist.experiment.photon_cap)?;

    let detectors: Vec<(usize, RouteId, SpdParams)> = topology
        .detectors()
        .map(|(n, node)| {
            let NodeKind::Detector(spec) = &node.kind else { unreachable!() };
            (n, node.inputs[0].route.expect("validated"), spec.params)
        })
        .collect();
    let routes: Vec<RouteId> = detectors.iter().map(|d| d.1).collect();
    let joint = joint_number_distribution(&pool, &routes)?;
    // Click probability of each detector given k photons.
    let table: Vec<Vec<f64>> = detectors
        .iter()
        .map(|(n, _, params)| {
            let live = params.enabled && arrivals.get(n).is_some_and(|&t| params.in_gate(t));
            (0..=joint.max_count())
                .map(|k| if live { click_probability(k, params) } else { Ok(0.0) })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let slot = |node: usize| detectors.iter().position(|d| d.0 == node);
    let mut clicks = vec![0.0; detectors.len()];
    let mut coincidences = vec![0.0; pairs.len()];
    let pair_slots: Vec<(usize, usize)> = pairs
        .iter()
        .map(|&(a, b)| {
            slot(a)
                .zip(slot(b))
                .ok_or_else(|| Error::ConfigGeneral("coincidence pair names a non-detector".into()))
        })
        .collect::<Result<_>>()?;
    for (counts, p) in joint.iter() {
        if p == 0.0 {
            continue;
        }
        for (i, c) in clicks.iter_mut().enumerate() {
            *c += p * table[i][counts[i]];
        }
        for (j, &(a, b)) in pair_slots.iter().enumerate() {
            coincidences[j] += p * table[a][counts[a]] * table[b][counts[b]];
        }
    }
    Ok(AnalyticOutcome {
        clicks: detectors.iter().zip(clicks).map(|(d, c)| (topology.nodes[d.0].name.clone(), c)).collect(),
        coincidences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::load_topology;
    use std::f64::consts::PI;

    fn mzi(phase: &str, extra: &str) -> String {
        format!(
            r#"
[sources.src]
kind = "single_photon"
{extra}
[devices.bs1]
kind = "beam_splitter"
[devices.pm]
kind = "phase_modulator"
phase = "{phase}"
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
"#
        )
    }

    fn clicks(outcome: &TrialOutcome, name: &str) -> usize {
        outcome.records.iter().filter(|r| r.detector_id == name && r.clicked).count()
    }

    #[test]
    fn event_order_is_time_then_sequence() {
        let e = |time, sequence| Event { time, sequence, route: RouteId::new(0) };
        assert!(e(1.0, 5) < e(2.0, 0));
        assert!(e(1.0, 0) < e(1.0, 1));
        assert!(e(-0.0, 0) < e(0.0, 0));
    }

    #[test]
    fn ideal_mzi_at_zero_phase_always_hits_d1() {
        let topo = load_topology(&mzi("0 rad", ""), "mzi").unwrap();
        for trial in 0..50 {
            let out = run_trial(&topo, 7, trial).unwrap();
            assert_eq!((clicks(&out, "d1"), clicks(&out, "d2")), (1, 0));
            assert_eq!(out.records.len(), 2);
            assert!(!out.aborted);
            assert_eq!(out.undetected_pools, 0);
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let topo = load_topology(&mzi("1.1 rad", ""), "mzi").unwrap();
        for trial in 0..20 {
            assert_eq!(run_trial(&topo, 3, trial).unwrap(), run_trial(&topo, 3, trial).unwrap());
        }
    }

    #[test]
    fn analytic_mzi_matches_cosine_law() {
        for phase in [0.0, 0.3, PI / 2.0, 2.0, PI] {
            let topo = load_topology(&mzi(&format!("{phase} rad"), ""), "mzi").unwrap();
            let out = analytic_probabilities(&topo, &[]).unwrap();
            let d1 = out.clicks.iter().find(|c| c.0 == "d1").unwrap().1;
            let d2 = out.clicks.iter().find(|c| c.0 == "d2").unwrap().1;
            assert!((d1 - (1.0 + phase.cos()) / 2.0).abs() < 1e-12, "{phase}: {d1}");
            assert!((d2 - (1.0 - phase.cos()) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weak_coherent_sources_have_no_exact_path() {
        let text = mzi("0 rad", "").replace("single_photon", "weak_coherent");
        let topo = load_topology(&text, "mzi").unwrap();
        assert!(matches!(analytic_probabilities(&topo, &[]), Err(Error::AnalyticUnsupported(_))));
        // Vacuum pulses still reach both detectors.
        let out = run_trial(&topo, 1, 0).unwrap();
        assert_eq!(out.records.len(), 2);
    }

    #[test]
    fn open_output_is_reported_undetected() {
        let text = "[sources.s]\nkind = \"single_photon\"\n[devices.sw]\nkind = \"switch\"\nselected = \"out2\"\n\
                    [detectors.d]\n[[links]]\nfrom = \"s\"\nto = \"sw\"\n[[links]]\nfrom = \"sw.out1\"\nto = \"d\"\n";
        let topo = load_topology(text, "x").unwrap();
        let out = run_trial(&topo, 1, 0).unwrap();
        assert_eq!(out.undetected_pools, 1);
        assert!(!out.records[0].clicked);
    }

    #[test]
    fn event_cap_is_a_capacity_error() {
        let text = "[sources.s]\nkind = \"single_photon\"\n[detectors.d]\n[experiment]\nmax_events = 0\n\
                    [[links]]\nfrom = \"s\"\nto = \"d\"\n";
        let topo = load_topology(text, "x").unwrap();
        assert!(matches!(run_trial(&topo, 1, 0), Err(Error::Capacity { what: "event count", .. })));
    }

    #[test]
    fn link_delay_reaches_the_timestamp() {
        let text = "[sources.s]\nkind = \"single_photon\"\noffset = \"1 ns\"\n[devices.f]\nkind = \"fiber\"\n\
                    length = \"1 km\"\n[detectors.d]\n[[links]]\nfrom = \"s\"\nto = \"f\"\ndelay = \"2 ns\"\n\
                    [[links]]\nfrom = \"f\"\nto = \"d\"\n";
        let topo = load_topology(text, "x").unwrap();
        let out = run_trial(&topo, 1, 0).unwrap();
        let expected = 1e-9 + 2e-9 + 4.9e-6;
        assert!((out.records[0].timestamp - expected).abs() < 1e-18);
    }

    #[test]
    fn sagnac_loop_through_delayed_link_terminates() {
        // Circulator feeding a Faraday mirror and back out port 3.
        let text = "[sources.s]\nkind = \"single_photon\"\n[devices.c]\nkind = \"circulator\"\n\
                    [devices.fm]\nkind = \"faraday_mirror\"\n[detectors.d]\n\
                    [[links]]\nfrom = \"s\"\nto = \"c.1\"\n[[links]]\nfrom = \"c.2\"\nto = \"fm\"\ndelay = \"5 ns\"\n\
                    [[links]]\nfrom = \"fm\"\nto = \"c.2\"\ndelay = \"5 ns\"\n[[links]]\nfrom = \"c.3\"\nto = \"d\"\n";
        let topo = load_topology(text, "x").unwrap();
        let out = run_trial(&topo, 1, 0).unwrap();
        assert_eq!(clicks(&out, "d"), 1);
        assert!((out.records[0].timestamp - 10e-9).abs() < 1e-18);
    }
}
