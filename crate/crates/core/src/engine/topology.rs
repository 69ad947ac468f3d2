//! Resolved, validated network: every link becomes one route, every device
//! input port gets its own loss channel.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use petgraph::algo::is_cyclic_directed;
use petgraph::graph::DiGraph;

use super::netlist::{DetectorSpec, DeviceKind, DeviceSpec, Endpoint, LinkSpec, Netlist, SourceKind, SourceSpec};
use crate::components::DeviceParams;
use crate::error::{Error, Position, Result};
use crate::fock::RouteId;
use crate::sources::truncation_point;

#[derive(Clone, Debug)]
pub enum NodeKind {
    Source(SourceSpec),
    Device(DeviceSpec),
    Detector(DetectorSpec),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// Input ports with the route feeding them, if any, and their loss
    /// channel.
    pub inputs: Vec<InputPort>,
    /// Output ports and the route each one drives.
    pub outputs: Vec<(&'static str, RouteId)>,
    /// Input ports a two-input splitter waits for before firing.
    pub expected: Vec<&'static str>,
}

#[derive(Clone, Copy, Debug)]
pub struct InputPort {
    pub port: &'static str,
    pub route: Option<RouteId>,
    pub loss: RouteId,
}

impl Node {
    pub fn output(&self, port: &str) -> RouteId {
        self.outputs.iter().find(|(p, _)| *p == port).map(|(_, r)| *r).expect("port table checked")
    }

    pub fn input(&self, port: &str) -> &InputPort {
        self.inputs.iter().find(|i| i.port == port).expect("port table checked")
    }

    pub fn input_route(&self, port: &str) -> Option<RouteId> {
        self.input(port).route
    }

    /// Time from entering to leaving the node.
    pub fn latency(&self) -> f64 {
        match &self.kind {
            NodeKind::Device(DeviceSpec { kind: DeviceKind::Single(DeviceParams::Fiber(f)), .. }) => f.latency(),
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RouteInfo {
    pub name: String,
    pub producer: (usize, &'static str),
    pub consumer: Option<(usize, &'static str)>,
    /// Link delay in seconds.
    pub delay: f64,
}

#[derive(Clone, Debug)]
pub struct Topology {
    pub netlist: Netlist,
    pub nodes: Vec<Node>,
    pub routes: Vec<RouteInfo>,
    /// Truncation point of each weak-coherent source, by node index.
    pub truncation: BTreeMap<usize, u32>,
}

pub(crate) fn port_table(kind: &NodeKind) -> (&'static [&'static str], &'static [&'static str]) {
    match kind {
        NodeKind::Source(_) => (&[], &["out"]),
        NodeKind::Detector(_) => (&["in"], &[]),
        NodeKind::Device(d) => match d.kind {
            DeviceKind::BeamSplitter(_) | DeviceKind::PolarizingBeamSplitter(_) => (&["a", "b"], &["c", "d"]),
            DeviceKind::Single(p) => match p {
                DeviceParams::Isolator { .. } => (&["a", "b"], &["a", "b"]),
                DeviceParams::Circulator { .. } => (&["1", "2", "3"], &["1", "2", "3"]),
                DeviceParams::FaradayMirror { .. } => (&["a"], &["a"]),
                DeviceParams::Switch { .. } => (&["in"], &["out1", "out2"]),
                _ => (&["in"], &["out"]),
            },
        },
    }
}

/// Output ports reachable from an input port.
pub(crate) fn transfers(kind: &NodeKind, input: &str) -> &'static [&'static str] {
    match kind {
        NodeKind::Source(_) | NodeKind::Detector(_) => &[],
        NodeKind::Device(d) => match d.kind {
            DeviceKind::BeamSplitter(_) | DeviceKind::PolarizingBeamSplitter(_) => &["c", "d"],
            DeviceKind::Single(p) => match (p, input) {
                (DeviceParams::Isolator { .. }, "a") => &["b"],
                (DeviceParams::Isolator { .. }, _) => &["a"],
                (DeviceParams::Circulator { .. }, "1") => &["2"],
                (DeviceParams::Circulator { .. }, "2") => &["3"],
                (DeviceParams::Circulator { .. }, _) => &["1"],
                (DeviceParams::FaradayMirror { .. }, _) => &["a"],
                (DeviceParams::Switch { .. }, _) => &["out1", "out2"],
                _ => &["out"],
            },
        },
    }
}

fn position_of(kind: &NodeKind) -> &Position {
    match kind {
        NodeKind::Source(s) => &s.position,
        NodeKind::Device(d) => &d.position,
        NodeKind::Detector(d) => &d.position,
    }
}

fn config_error(position: &Position, message: impl Into<String>) -> Error {
    Error::Config { position: position.clone(), message: message.into() }
}

fn resolve_port(
    nodes: &[(String, NodeKind)],
    index: &BTreeMap<&str, usize>,
    end: &Endpoint,
    output: bool,
    link: &LinkSpec,
) -> Result<(usize, &'static str)> {
    let direction = if output { "output" } else { "input" };
    let &n = index
        .get(end.node.as_str())
        .ok_or_else(|| config_error(&link.position, format!("link refers to unknown node \"{}\"", end.node)))?;
    let (ins, outs) = port_table(&nodes[n].1);
    let ports = if output { outs } else { ins };
    match &end.port {
        Some(p) => ports.iter().find(|q| **q == p.as_str()).map(|q| (n, *q)).ok_or_else(|| {
            let known = if ports.is_empty() { "none".to_string() } else { ports.join(", ") };
            config_error(
                &link.position,
                format!("\"{}\" has no {direction} port \"{p}\" ({direction} ports: {known})", end.node),
            )
        }),
        None => match ports {
            [only] => Ok((n, *only)),
            [] => Err(config_error(&link.position, format!("\"{}\" has no {direction} port", end.node))),
            _ => Err(config_error(
                &link.position,
                format!("\"{}\" has several {direction} ports ({}); name one", end.node, ports.join(", ")),
            )),
        },
    }
}

impl Topology {
    pub fn from_netlist(netlist: Netlist) -> Result<Topology> {
        let mut raw: Vec<(String, NodeKind)> = Vec::new();
        raw.extend(netlist.sources.iter().map(|s| (s.name.clone(), NodeKind::Source(s.clone()))));
        raw.extend(netlist.devices.iter().map(|d| (d.name.clone(), NodeKind::Device(d.clone()))));
        raw.extend(netlist.detectors.iter().map(|d| (d.name.clone(), NodeKind::Detector(d.clone()))));
        let index: BTreeMap<&str, usize> = raw.iter().enumerate().map(|(i, (n, _))| (n.as_str(), i)).collect();

        let mut routes: Vec<RouteInfo> = Vec::new();
        let mut produced: BTreeMap<(usize, &'static str), usize> = BTreeMap::new();
        let mut consumed: BTreeMap<(usize, &'static str), usize> = BTreeMap::new();
        let mut names: BTreeMap<String, usize> = BTreeMap::new();
        for link in &netlist.links {
            let from = resolve_port(&raw, &index, &link.from, true, link)?;
            let to = match &link.to {
                Some(t) => Some(resolve_port(&raw, &index, t, false, link)?),
                None => None,
            };
            let id = routes.len();
            if let Some(&other) = produced.get(&from) {
                return Err(config_error(
                    &link.position,
                    format!("{}.{} already drives route \"{}\"", raw[from.0].0, from.1, routes[other].name),
                ));
            }
            if let Some(to) = to {
                if consumed.contains_key(&to) {
                    return Err(config_error(
                        &link.position,
                        format!("{}.{} already has an incoming link", raw[to.0].0, to.1),
                    ));
                }
                consumed.insert(to, id);
            }
            produced.insert(from, id);
            let name = link.route.clone().unwrap_or_else(|| match to {
                Some(to) => format!("{}.{}->{}.{}", raw[from.0].0, from.1, raw[to.0].0, to.1),
                None => format!("{}.{}", raw[from.0].0, from.1),
            });
            if names.insert(name.clone(), id).is_some() {
                return Err(config_error(&link.position, format!("route \"{name}\" has two producers")));
            }
            routes.push(RouteInfo { name, producer: from, consumer: to, delay: link.delay });
        }

        let mut nodes = Vec::with_capacity(raw.len());
        let mut loss_channels = 0u32;
        for (n, (name, kind)) in raw.into_iter().enumerate() {
            let (ins, outs) = port_table(&kind);
            let mut outputs = Vec::with_capacity(outs.len());
            for &port in outs {
                let id = *produced.entry((n, port)).or_insert_with(|| {
                    routes.push(RouteInfo {
                        name: format!("{name}.{port}"),
                        producer: (n, port),
                        consumer: None,
                        delay: 0.0,
                    });
                    routes.len() - 1
                });
                outputs.push((port, RouteId::new(id as u32)));
            }
            let inputs = ins
                .iter()
                .map(|&port| {
                    let loss = RouteId::loss_channel(loss_channels);
                    loss_channels += 1;
                    InputPort { port, route: consumed.get(&(n, port)).map(|&r| RouteId::new(r as u32)), loss }
                })
                .collect::<Vec<_>>();
            if matches!(kind, NodeKind::Detector(_)) && inputs[0].route.is_none() {
                return Err(config_error(position_of(&kind), format!("detector \"{name}\" has no incoming link")));
            }
            nodes.push(Node { name, kind, inputs, outputs, expected: Vec::new() });
        }

        let mut topology = Topology { netlist, nodes, routes, truncation: BTreeMap::new() };
        topology.check_zero_delay_cycles()?;
        topology.mark_expected_inputs();
        topology.resolve_sources()?;
        Ok(topology)
    }

    /// Routes leaving a node when light enters on `route`.
    fn successors(&self, route: usize) -> Vec<usize> {
        let Some((n, port)) = self.routes[route].consumer else { return Vec::new() };
        let node = &self.nodes[n];
        transfers(&node.kind, port).iter().map(|p| node.output(p).index() as usize).collect()
    }

    fn check_zero_delay_cycles(&self) -> Result<()> {
        let mut graph = DiGraph::<(), ()>::new();
        let ids: Vec<_> = self.routes.iter().map(|_| graph.add_node(())).collect();
        for (r, info) in self.routes.iter().enumerate() {
            let latency = info.consumer.map_or(0.0, |(n, _)| self.nodes[n].latency());
            if info.delay > 0.0 || latency > 0.0 {
                continue;
            }
            for s in self.successors(r) {
                graph.add_edge(ids[r], ids[s], ());
            }
        }
        if is_cyclic_directed(&graph) {
            let position = self.netlist.links.first().map(|l| l.position.clone()).unwrap_or(Position {
                file: self.netlist.file.clone(),
                line: 1,
                column: 1,
            });
            return Err(Error::Config {
                position,
                message: "the network has a loop without any link delay or fiber length".into(),
            });
        }
        Ok(())
    }

    /// A splitter waits only for the inputs that light from some source can
    /// reach.
    fn mark_expected_inputs(&mut self) {
        let mut reached = BTreeSet::new();
        let mut queue: VecDeque<usize> = self
            .nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Source(_)))
            .map(|n| n.output("out").index() as usize)
            .collect();
        while let Some(r) = queue.pop_front() {
            if reached.insert(r) {
                queue.extend(self.successors(r));
            }
        }
        for node in &mut self.nodes {
            if let NodeKind::Device(DeviceSpec {
                kind: DeviceKind::BeamSplitter(_) | DeviceKind::PolarizingBeamSplitter(_),
                ..
            }) = node.kind
            {
                node.expected = node
                    .inputs
                    .iter()
                    .filter(|i| i.route.is_some_and(|r| reached.contains(&(r.index() as usize))))
                    .map(|i| i.port)
                    .collect();
            }
        }
    }

    fn resolve_sources(&mut self) -> Result<()> {
        let first_period = self.netlist.sources.first().map(|s| s.params.repetition_period);
        let trials = self.netlist.experiment.trials.max(1);
        let epsilon = self.netlist.experiment.truncation_epsilon;
        for (n, node) in self.nodes.iter_mut().enumerate() {
            let out = node.outputs.first().map(|o| o.1);
            match &mut node.kind {
                NodeKind::Source(s) => {
                    let (pol, global) = s.polarization.resolve();
                    s.params.polarization = pol;
                    s.params.phase += global;
                    s.params.emit_route = out.expect("sources have one output");
                    if s.kind == SourceKind::WeakCoherent && s.params.mean_photon_number > 0.0 {
                        let n_t = truncation_point(s.params.mean_photon_number, trials, epsilon)
                            .map_err(|e| config_error(&s.position, format!("source \"{}\": {e}", s.name)))?;
                        self.truncation.insert(n, n_t);
                    }
                }
                NodeKind::Detector(d) => {
                    if let (false, Some(p)) = (d.explicit_gate_period, first_period) {
                        d.params.gate_period = p;
                    }
                }
                NodeKind::Device(_) => {}
            }
        }
        Ok(())
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn detectors(&self) -> impl Iterator<Item = (usize, &Node)> {
        self.nodes.iter().enumerate().filter(|(_, n)| matches!(n.kind, NodeKind::Detector(_)))
    }

    pub fn sources(&self) -> impl Iterator<Item = (usize, &Node)> {
        self.nodes.iter().enumerate().filter(|(_, n)| matches!(n.kind, NodeKind::Source(_)))
    }

    pub fn route(&self, id: RouteId) -> &RouteInfo {
        &self.routes[id.index() as usize]
    }
}

/// Parses and validates a netlist in one step.
pub fn load_topology(text: &str, file: &str) -> Result<Topology> {
    Topology::from_netlist(Netlist::parse(text, file)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MZI: &str = r#"
[sources.src]
kind = "single_photon"

[devices.bs1]
kind = "beam_splitter"

[devices.pm]
kind = "phase_modulator"
phase = "0 rad"

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
"#;

    #[test]
    fn mzi_topology_shape() {
        let t = load_topology(MZI, "mzi.toml").unwrap();
        assert_eq!(t.nodes.len(), 6);
        assert_eq!(t.routes.len(), 6);
        assert!(t.routes.iter().all(|r| r.consumer.is_some()));
        let bs2 = &t.nodes[t.node_index("bs2").unwrap()];
        assert_eq!(bs2.expected, vec!["a", "b"]);
        let bs1 = &t.nodes[t.node_index("bs1").unwrap()];
        assert_eq!(bs1.expected, vec!["a"]);
    }

    #[test]
    fn unlinked_outputs_get_open_routes() {
        let text = "[sources.s]\nkind = \"single_photon\"\n[devices.bs]\nkind = \"beam_splitter\"\n\
                    [detectors.d]\n[[links]]\nfrom = \"s\"\nto = \"bs.a\"\n[[links]]\nfrom = \"bs.c\"\nto = \"d\"\n";
        let t = load_topology(text, "x").unwrap();
        assert_eq!(t.routes.len(), 3);
        assert_eq!(t.routes[2].name, "bs.d");
        assert!(t.routes[2].consumer.is_none());
    }

    fn config_message(text: &str) -> String {
        match load_topology(text, "x.toml") {
            Err(Error::Config { message, .. }) => message,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn two_producers_on_one_route_are_rejected() {
        let text = "[sources.s1]\nkind = \"single_photon\"\n[sources.s2]\nkind = \"single_photon\"\n[detectors.d]\n\
                    [[links]]\nfrom = \"s1\"\nto = \"d\"\nroute = \"r\"\n[[links]]\nfrom = \"s2\"\nroute = \"r\"\n";
        assert!(config_message(text).contains("two producers"));
        let text = "[sources.s1]\nkind = \"single_photon\"\n[detectors.d]\n[detectors.e]\n\
                    [[links]]\nfrom = \"s1\"\nto = \"d\"\n[[links]]\nfrom = \"s1\"\nto = \"e\"\n";
        assert!(config_message(text).contains("already drives"));
        let text = "[sources.s1]\nkind = \"single_photon\"\n[sources.s2]\nkind = \"single_photon\"\n[detectors.d]\n\
                    [[links]]\nfrom = \"s1\"\nto = \"d\"\n[[links]]\nfrom = \"s2\"\nto = \"d\"\n";
        assert!(config_message(text).contains("incoming link"));
    }

    #[test]
    fn bad_references() {
        let base = "[sources.s]\nkind = \"single_photon\"\n[devices.bs]\nkind = \"beam_splitter\"\n[detectors.d]\n";
        assert!(config_message(&format!("{base}[[links]]\nfrom = \"x\"\nto = \"d\"\n")).contains("unknown node"));
        assert!(config_message(&format!("{base}[[links]]\nfrom = \"s\"\nto = \"bs.c\"\n")).contains("no input port"));
        assert!(config_message(&format!("{base}[[links]]\nfrom = \"s\"\nto = \"bs\"\n")).contains("several"));
        assert!(config_message(&format!("{base}[[links]]\nfrom = \"d\"\nto = \"bs.a\"\n")).contains("no output port"));
        assert!(config_message(&format!("{base}[[links]]\nfrom = \"s\"\nto = \"bs.a\"\n")).contains("no incoming link"));
    }

    #[test]
    fn zero_delay_loop_is_rejected_and_delay_breaks_it() {
        let looped = |delay: &str| {
            format!(
                "[sources.s]\nkind = \"single_photon\"\n[devices.bs]\nkind = \"beam_splitter\"\n[detectors.d]\n\
                 [[links]]\nfrom = \"s\"\nto = \"bs.a\"\n[[links]]\nfrom = \"bs.c\"\nto = \"bs.b\"\n{delay}\n\
                 [[links]]\nfrom = \"bs.d\"\nto = \"d\"\n"
            )
        };
        assert!(config_message(&looped("")).contains("loop"));
        assert!(load_topology(&looped("delay = \"1 ns\""), "x").is_ok());
    }

    #[test]
    fn isolator_ports_do_not_form_a_loop() {
        let text = "[sources.s]\nkind = \"single_photon\"\n[devices.iso]\nkind = \"isolator\"\n[detectors.d]\n\
                    [[links]]\nfrom = \"s\"\nto = \"iso.a\"\n[[links]]\nfrom = \"iso.b\"\nto = \"d\"\n";
        let t = load_topology(text, "x").unwrap();
        assert_eq!(t.routes.len(), 3);
    }

    #[test]
    fn detector_gate_period_follows_source() {
        let text = "[sources.s]\nkind = \"single_photon\"\nrepetition_period = \"10 ns\"\n[detectors.d]\n\
                    [[links]]\nfrom = \"s\"\nto = \"d\"\n";
        let t = load_topology(text, "x").unwrap();
        let (_, d) = t.detectors().next().unwrap();
        let NodeKind::Detector(spec) = &d.kind else { unreachable!() };
        assert_eq!(spec.params.gate_period, 10e-9);
    }
}
