//! TOML netlist reader.
//!
//! ```toml
//! [sources.src]
//! kind = "single_photon"          # or "weak_coherent"
//! frequency = "1550 nm"
//! bandwidth = "65 GHz"
//!
//! [devices.bs1]
//! kind = "beam_splitter"
//! t = 0.5
//!
//! [detectors.d1]
//! efficiency = 1.0
//!
//! [[links]]
//! from = "src.out"
//! to = "bs1.a"
//!
//! [experiment]
//! trials = 10000
//! seed = 1
//! sweep = { parameter = "bs1.t", start = 0.1, end = 0.9, points = 9 }
//! ```
//!
//! Every physical quantity is a unit-suffixed string (see [`super::units`]);
//! unknown sections and keys are errors carrying `file:line:column`.

use std::collections::BTreeSet;
use std::f64::consts::TAU;

use toml::de::{DeTable, DeValue};
use toml::Spanned;

use super::units::{parse_quantity, Quantity};
use crate::components::{
    BsParams, DeviceParams, Disturbance, FiberParams, FilterProfile, Orientation, PbsParams, SwitchPort,
    WaveplateParams, DEFAULT_DELAY_PER_KM,
};
use crate::detector::SpdParams;
use crate::error::{Error, Position, Result};
use crate::fock::{JonesPolarization, RouteId, SpectralMode};
use crate::sources::{SourceParams, TELECOM_CARRIER};

pub(crate) struct SourceText<'a> {
    pub file: &'a str,
    pub text: &'a str,
}

impl SourceText<'_> {
    pub fn position(&self, offset: usize) -> Position {
        let offset = offset.min(self.text.len());
        let before = &self.text[..offset];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = before[line_start..].chars().count() + 1;
        Position { file: self.file.to_string(), line, column }
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Config { position: self.position(offset), message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    SinglePhoton,
    WeakCoherent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PolarizationSpec {
    /// Linear polarization at this angle from horizontal.
    Angle(f64),
    Jones(JonesPolarization),
}

impl PolarizationSpec {
    /// The polarization and the extra global phase it implies.
    pub fn resolve(&self) -> (JonesPolarization, f64) {
        match *self {
            PolarizationSpec::Angle(a) => JonesPolarization::linear(a),
            PolarizationSpec::Jones(p) => (p, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec {
    pub name: String,
    pub kind: SourceKind,
    /// `emit_route` and `polarization` are filled in when the topology is
    /// built.
    pub params: SourceParams,
    pub polarization: PolarizationSpec,
    /// Emission time of the pulse.
    pub offset: f64,
    pub position: Position,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeviceKind {
    BeamSplitter(BsParams),
    PolarizingBeamSplitter(PbsParams),
    Single(DeviceParams),
}

impl DeviceKind {
    pub fn name(&self) -> &'static str {
        match self {
            DeviceKind::BeamSplitter(_) => "beam_splitter",
            DeviceKind::PolarizingBeamSplitter(_) => "polarizing_beam_splitter",
            DeviceKind::Single(d) => match d {
                DeviceParams::Attenuator { .. } => "attenuator",
                DeviceParams::Filter(_) => "bandpass_filter",
                DeviceParams::Circulator { .. } => "circulator",
                DeviceParams::PolarizationModulator { .. } => "polarization_modulator",
                DeviceParams::PhaseModulator { .. } => "phase_modulator",
                DeviceParams::Isolator { .. } => "isolator",
                DeviceParams::Switch { .. } => "switch",
                DeviceParams::Waveplate(_) => "waveplate",
                DeviceParams::Fiber(_) => "fiber",
                DeviceParams::FaradayMirror { .. } => "faraday_mirror",
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceSpec {
    pub name: String,
    pub kind: DeviceKind,
    pub position: Position,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorSpec {
    pub name: String,
    pub params: SpdParams,
    /// Whether `gate_period` was given; otherwise it follows the sources.
    pub explicit_gate_period: bool,
    pub position: Position,
}

/// `node.port`, with the port left empty when the node has only one port
/// in that direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Endpoint {
    pub node: String,
    pub port: Option<String>,
}

impl Endpoint {
    fn parse(text: &str) -> Option<Self> {
        let (node, port) = match text.split_once('.') {
            Some((n, p)) => (n, Some(p.to_string())),
            None => (text, None),
        };
        if node.is_empty() || port.as_deref() == Some("") {
            return None;
        }
        Some(Endpoint { node: node.to_string(), port })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkSpec {
    pub from: Endpoint,
    pub to: Option<Endpoint>,
    pub delay: f64,
    pub route: Option<String>,
    pub position: Position,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    MonteCarlo,
    /// Exact probabilities, no sampling.
    Analytic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: String,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl SweepSpec {
    /// Evenly spaced values from `start` to `end`, both included.
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.end - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub trials: u64,
    pub seed: u64,
    pub mode: Mode,
    pub photon_cap: usize,
    pub max_events: usize,
    pub truncation_epsilon: f64,
    /// Detector pairs whose joint clicks are counted; empty means all pairs.
    pub coincidences: Vec<(String, String)>,
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            trials: 1000,
            seed: 0,
            mode: Mode::MonteCarlo,
            photon_cap: crate::fock::DEFAULT_PHOTON_CAP,
            max_events: 100_000,
            truncation_epsilon: 1e-6,
            coincidences: Vec::new(),
            sweep: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Netlist {
    pub file: String,
    pub sources: Vec<SourceSpec>,
    pub devices: Vec<DeviceSpec>,
    pub links: Vec<LinkSpec>,
    pub detectors: Vec<DetectorSpec>,
    pub experiment: ExperimentSpec,
}

/// Reads the keys of one table, remembering which were used so the rest can
/// be reported as unknown.
struct Reader<'s, 'a> {
    src: &'s SourceText<'a>,
    table: &'s DeTable<'a>,
    used: BTreeSet<String>,
    context: String,
}

impl<'s, 'a> Reader<'s, 'a> {
    fn new(src: &'s SourceText<'a>, table: &'s DeTable<'a>, context: impl Into<String>) -> Self {
        Reader { src, table, used: BTreeSet::new(), context: context.into() }
    }

    fn raw(&mut self, key: &str) -> Option<&'s Spanned<DeValue<'a>>> {
        self.used.insert(key.to_string());
        self.table.get(key)
    }

    fn err(&self, value: &Spanned<DeValue<'_>>, key: &str, message: impl std::fmt::Display) -> Error {
        self.src.error(value.span().start, format!("{}.{key}: {message}", self.context))
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        let text = match v.get_ref() {
            DeValue::Integer(i) if i.radix() == 10 => i.as_str().replace('_', ""),
            DeValue::Float(f) => f.as_str().replace('_', ""),
            other => return Err(self.err(v, key, format!("expected a number, found {}", other.type_str()))),
        };
        let x: f64 = text.parse().map_err(|_| self.err(v, key, format!("cannot read number {text}")))?;
        if x.is_nan() {
            return Err(self.err(v, key, "NaN is not allowed"));
        }
        Ok(Some(x))
    }

    fn integer(&mut self, key: &str) -> Result<Option<u64>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        match v.get_ref() {
            DeValue::Integer(i) => u64::from_str_radix(&i.as_str().replace('_', ""), i.radix())
                .map(Some)
                .map_err(|_| self.err(v, key, "expected a non-negative integer")),
            other => Err(self.err(v, key, format!("expected an integer, found {}", other.type_str()))),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<(&'s str, usize)>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        match v.get_ref() {
            DeValue::String(s) => Ok(Some((s.as_ref(), v.span().start))),
            other => Err(self.err(v, key, format!("expected a string, found {}", other.type_str()))),
        }
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.get_ref()
            .as_bool()
            .map(Some)
            .ok_or_else(|| self.err(v, key, format!("expected true or false, found {}", v.get_ref().type_str())))
    }

    fn quantity(&mut self, key: &str, kind: Quantity) -> Result<Option<f64>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        match v.get_ref() {
            DeValue::String(s) => parse_quantity(s, kind).map(Some).map_err(|m| self.err(v, key, m)),
            DeValue::Integer(_) | DeValue::Float(_) => {
                Err(self.err(v, key, format!("bare number needs a unit: expected {}", kind.describe())))
            }
            other => Err(self.err(v, key, format!("expected {}, found {}", kind.describe(), other.type_str()))),
        }
    }

    fn number_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    fn quantity_or(&mut self, key: &str, kind: Quantity, default: f64) -> Result<f64> {
        Ok(self.quantity(key, kind)?.unwrap_or(default))
    }

    fn table(&mut self, key: &str) -> Result<Option<(&'s DeTable<'a>, usize)>> {
        let Some(v) = self.raw(key) else { return Ok(None) };
        match v.get_ref() {
            DeValue::Table(t) => Ok(Some((t, v.span().start))),
            other => Err(self.err(v, key, format!("expected a table, found {}", other.type_str()))),
        }
    }

    /// Fails on the first key that was never read.
    fn finish(self) -> Result<()> {
        for (k, _) in self.table.iter() {
            if !self.used.contains(k.get_ref().as_ref()) {
                return Err(self.src.error(
                    k.span().start,
                    format!("unknown key \"{}\" in {}", k.get_ref(), self.context),
                ));
            }
        }
        Ok(())
    }
}

fn enumerate_tables<'s, 'a>(
    src: &SourceText<'a>,
    value: &'s Spanned<DeValue<'a>>,
    section: &str,
) -> Result<Vec<(String, &'s DeTable<'a>, usize)>> {
    let DeValue::Table(t) = value.get_ref() else {
        return Err(src.error(value.span().start, format!("[{section}] must be a table")));
    };
    t.iter()
        .map(|(k, v)| match v.get_ref() {
            DeValue::Table(entry) => Ok((k.get_ref().to_string(), entry, k.span().start)),
            _ => Err(src.error(v.span().start, format!("{section}.{} must be a table", k.get_ref()))),
        })
        .collect()
}

fn parse_source(src: &SourceText<'_>, name: &str, table: &DeTable<'_>, at: usize) -> Result<SourceSpec> {
    let mut r = Reader::new(src, table, format!("sources.{name}"));
    let kind = match r.string("kind")? {
        Some(("single_photon", _)) => SourceKind::SinglePhoton,
        Some(("weak_coherent", _)) => SourceKind::WeakCoherent,
        Some((other, pos)) => {
            return Err(src.error(pos, format!("unknown source kind \"{other}\"; expected single_photon or weak_coherent")))
        }
        None => return Err(src.error(at, format!("sources.{name} needs a kind"))),
    };
    let defaults = SourceParams::default();
    let mu = r.number_or("mean_photon_number", if kind == SourceKind::WeakCoherent { 0.1 } else { 0.0 })?;
    let frequency = r.quantity_or("frequency", Quantity::AngularFrequency, TELECOM_CARRIER)?;
    let bandwidth = r.quantity_or("bandwidth", Quantity::AngularFrequency, defaults.spectrum.sigma())?;
    let spectrum = SpectralMode::new(frequency, bandwidth)
        .map_err(|e| src.error(at, format!("sources.{name}: {e}")))?;
    let angle = r.quantity("polarization_angle", Quantity::Angle)?;
    let alpha = r.number("alpha")?;
    let beta = r.number("beta")?;
    let delta = r.quantity("delta_phase", Quantity::Angle)?;
    let polarization = match (angle, alpha, beta) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(src.error(at, format!("sources.{name}: give polarization_angle or alpha/beta, not both")))
        }
        (Some(a), None, None) => PolarizationSpec::Angle(a),
        (None, None, None) => PolarizationSpec::Jones(JonesPolarization::horizontal()),
        (None, a, b) => {
            let a = a.unwrap_or_else(|| (1.0 - b.unwrap_or(0.0).powi(2)).max(0.0).sqrt());
            let b = b.unwrap_or_else(|| (1.0 - a * a).max(0.0).sqrt());
            let p = JonesPolarization::new(a, b, delta.unwrap_or(0.0))
                .map_err(|e| src.error(at, format!("sources.{name}: {e}")))?;
            PolarizationSpec::Jones(p)
        }
    };
    let params = SourceParams {
        mean_photon_number: mu,
        spectrum,
        polarization: JonesPolarization::horizontal(),
        emit_route: RouteId::new(0),
        repetition_period: r.quantity_or("repetition_period", Quantity::Time, defaults.repetition_period)?,
        phase_randomized: r.boolean("phase_randomized")?.unwrap_or(kind == SourceKind::WeakCoherent),
        delay: r.quantity_or("delay", Quantity::Time, 0.0)?,
        phase: r.quantity_or("phase", Quantity::Angle, 0.0)?,
    };
    params.validate().map_err(|e| src.error(at, format!("sources.{name}: {e}")))?;
    let offset = r.quantity_or("offset", Quantity::Time, 0.0)?;
    r.finish()?;
    Ok(SourceSpec { name: name.to_string(), kind, params, polarization, offset, position: src.position(at) })
}

fn disturbance(r: &mut Reader<'_, '_>, key: &str, kind: Option<Quantity>) -> Result<Disturbance> {
    let mut get = |k: String| match kind {
        Some(q) => r.quantity_or(&k, q, 0.0),
        None => r.number_or(&k, 0.0),
    };
    Ok(Disturbance { mean: get(format!("{key}_mean"))?, sigma: get(format!("{key}_sigma"))? })
}

fn parse_device(src: &SourceText<'_>, name: &str, table: &DeTable<'_>, at: usize) -> Result<DeviceSpec> {
    let mut r = Reader::new(src, table, format!("devices.{name}"));
    let Some((kind, kind_at)) = r.string("kind")? else {
        return Err(src.error(at, format!("devices.{name} needs a kind")));
    };
    let wrap = |e: Error| match e {
        Error::Config { .. } => e,
        other => src.error(at, format!("devices.{name}: {other}")),
    };
    let loss = |r: &mut Reader<'_, '_>| r.quantity_or("loss", Quantity::Loss, 0.0);
    let kind = match kind {
        "beam_splitter" => {
            let t = r.number_or("t", 0.5)?;
            let rr = r.number("r")?.unwrap_or(1.0 - t);
            DeviceKind::BeamSplitter(BsParams::new(t, rr, loss(&mut r)?).map_err(wrap)?)
        }
        "polarizing_beam_splitter" => {
            let lh = r.quantity_or("loss_h", Quantity::Loss, 0.0)?;
            let lv = r.quantity_or("loss_v", Quantity::Loss, 0.0)?;
            let re = r.number_or("extinction_ratio", f64::INFINITY)?;
            DeviceKind::PolarizingBeamSplitter(PbsParams::new(lh, lv, re).map_err(wrap)?)
        }
        "attenuator" => DeviceKind::Single(DeviceParams::Attenuator { loss_db: loss(&mut r)? }),
        "bandpass_filter" => DeviceKind::Single(DeviceParams::Filter(FilterProfile {
            low: r.quantity_or("low", Quantity::AngularFrequency, 0.0)?,
            high: r.quantity_or("high", Quantity::AngularFrequency, f64::MAX)?,
            in_band_loss_db: r.quantity_or("in_band_loss", Quantity::Loss, 0.0)?,
            out_of_band_loss_db: r.quantity_or("out_of_band_loss", Quantity::Loss, 0.0)?,
        })),
        "circulator" => DeviceKind::Single(DeviceParams::Circulator { loss_db: loss(&mut r)? }),
        "polarization_modulator" => {
            let a = r.number_or("alpha", 1.0)?;
            let b = r.number_or("beta", 0.0)?;
            let d = r.quantity_or("delta_phase", Quantity::Angle, 0.0)?;
            let target = JonesPolarization::new(a, b, d).map_err(wrap)?;
            DeviceKind::Single(DeviceParams::PolarizationModulator { target, loss_db: loss(&mut r)? })
        }
        "phase_modulator" => DeviceKind::Single(DeviceParams::PhaseModulator {
            phase: r.quantity_or("phase", Quantity::Angle, 0.0)?,
            loss_db: loss(&mut r)?,
        }),
        "isolator" => {
            let orientation = match r.string("orientation")? {
                None | Some(("a_to_b", _)) => Orientation::AToB,
                Some(("b_to_a", _)) => Orientation::BToA,
                Some((other, pos)) => {
                    return Err(src.error(pos, format!("orientation must be a_to_b or b_to_a, got \"{other}\"")))
                }
            };
            DeviceKind::Single(DeviceParams::Isolator {
                loss_db: loss(&mut r)?,
                isolation_db: r.quantity_or("isolation", Quantity::Loss, 0.0)?,
                orientation,
            })
        }
        "switch" => {
            let selected = match r.string("selected")? {
                None | Some(("out1", _)) => SwitchPort::Out1,
                Some(("out2", _)) => SwitchPort::Out2,
                Some((other, pos)) => {
                    return Err(src.error(pos, format!("selected must be out1 or out2, got \"{other}\"")))
                }
            };
            DeviceKind::Single(DeviceParams::Switch {
                loss_db: loss(&mut r)?,
                isolation_db: r.quantity_or("isolation", Quantity::Loss, 0.0)?,
                selected,
            })
        }
        "waveplate" => DeviceKind::Single(DeviceParams::Waveplate(WaveplateParams {
            relative_phase: r.quantity_or("relative_phase", Quantity::Angle, 0.0)?,
            offset_angle: r.quantity_or("offset_angle", Quantity::Angle, 0.0)?,
            loss_db: loss(&mut r)?,
        })),
        "fiber" => DeviceKind::Single(DeviceParams::Fiber(FiberParams {
            alpha_db_per_km: r.quantity_or("attenuation", Quantity::LossPerLength, 0.2)?,
            length_km: r.quantity_or("length", Quantity::Length, 0.0)?,
            phase: disturbance(&mut r, "phase", Some(Quantity::Angle))?,
            alpha: disturbance(&mut r, "alpha", None)?,
            beta: disturbance(&mut r, "beta", None)?,
            theta: disturbance(&mut r, "theta", Some(Quantity::Angle))?,
            delay_per_km: r.quantity_or("delay_per_length", Quantity::DelayPerLength, DEFAULT_DELAY_PER_KM)?,
        })),
        "faraday_mirror" => DeviceKind::Single(DeviceParams::FaradayMirror {
            theta: r.quantity_or("theta", Quantity::Angle, std::f64::consts::FRAC_PI_4)?,
            loss_db: loss(&mut r)?,
        }),
        other => return Err(src.error(kind_at, format!("unknown device kind \"{other}\""))),
    };
    if let DeviceKind::Single(d) = &kind {
        d.validate().map_err(wrap)?;
    }
    r.finish()?;
    Ok(DeviceSpec { name: name.to_string(), kind, position: src.position(at) })
}

fn parse_detector(src: &SourceText<'_>, name: &str, table: &DeTable<'_>, at: usize) -> Result<DetectorSpec> {
    let mut r = Reader::new(src, table, format!("detectors.{name}"));
    let d = SpdParams::default();
    let period = r.quantity("gate_period", Quantity::Time)?;
    let params = SpdParams {
        efficiency: r.number_or("efficiency", d.efficiency)?,
        dark_count_rate: r.quantity_or("dark_count_rate", Quantity::Rate, d.dark_count_rate)?,
        afterpulse_prob: r.number_or("afterpulse", d.afterpulse_prob)?,
        timing_jitter: r.quantity_or("jitter", Quantity::Time, d.timing_jitter)?,
        resolves_photon_number: r.boolean("resolves_photon_number")?.unwrap_or(false),
        enabled: r.boolean("enabled")?.unwrap_or(true),
        gate_width: r.quantity_or("gate_width", Quantity::Time, d.gate_width)?,
        gate_period: period.unwrap_or(d.gate_period),
        gate_offset: r.quantity_or("gate_offset", Quantity::Time, d.gate_offset)?,
    };
    params.validate().map_err(|e| src.error(at, format!("detectors.{name}: {e}")))?;
    r.finish()?;
    Ok(DetectorSpec {
        name: name.to_string(),
        params,
        explicit_gate_period: period.is_some(),
        position: src.position(at),
    })
}

fn parse_link(src: &SourceText<'_>, table: &DeTable<'_>, at: usize, index: usize) -> Result<LinkSpec> {
    let mut r = Reader::new(src, table, format!("links[{index}]"));
    let endpoint = |text: &str, pos: usize| {
        Endpoint::parse(text).ok_or_else(|| src.error(pos, format!("\"{text}\" is not a node.port reference")))
    };
    let Some((from, from_at)) = r.string("from")? else {
        return Err(src.error(at, format!("links[{index}] needs a from endpoint")));
    };
    let from = endpoint(from, from_at)?;
    let to = match r.string("to")? {
        Some((t, pos)) => Some(endpoint(t, pos)?),
        None => None,
    };
    let delay = r.quantity_or("delay", Quantity::Time, 0.0)?;
    let route = r.string("route")?.map(|(s, _)| s.to_string());
    r.finish()?;
    Ok(LinkSpec { from, to, delay, route, position: src.position(at) })
}

fn parse_experiment(src: &SourceText<'_>, table: &DeTable<'_>) -> Result<ExperimentSpec> {
    let mut r = Reader::new(src, table, "experiment");
    let d = ExperimentSpec::default();
    let mode = match r.string("mode")? {
        None | Some(("monte_carlo", _)) => Mode::MonteCarlo,
        Some(("analytic", _)) => Mode::Analytic,
        Some((other, pos)) => {
            return Err(src.error(pos, format!("mode must be monte_carlo or analytic, got \"{other}\"")))
        }
    };
    let mut coincidences = Vec::new();
    if let Some(v) = r.raw("coincidences") {
        let bad = || src.error(v.span().start, "coincidences must be a list of [detector, detector] pairs");
        let list = v.get_ref().as_array().ok_or_else(bad)?;
        for pair in list.iter() {
            let pair = pair.get_ref().as_array().ok_or_else(bad)?;
            let names: Vec<&str> = pair.iter().filter_map(|x| x.get_ref().as_str()).collect();
            if names.len() != 2 || pair.len() != 2 {
                return Err(bad());
            }
            coincidences.push((names[0].to_string(), names[1].to_string()));
        }
    }
    let sweep = match r.table("sweep")? {
        Some((t, at)) => Some(parse_sweep(src, t, at)?),
        None => None,
    };
    let epsilon = r.number_or("truncation_epsilon", d.truncation_epsilon)?;
    let spec = ExperimentSpec {
        trials: r.integer("trials")?.unwrap_or(d.trials),
        seed: r.integer("seed")?.unwrap_or(d.seed),
        mode,
        photon_cap: r.integer("photon_cap")?.map_or(d.photon_cap, |c| c as usize),
        max_events: r.integer("max_events")?.map_or(d.max_events, |c| c as usize),
        truncation_epsilon: epsilon,
        coincidences,
        sweep,
    };
    r.finish()?;
    Ok(spec)
}

/// Sweep bounds keep their raw text until the parameter's unit is known.
fn parse_sweep(src: &SourceText<'_>, table: &DeTable<'_>, at: usize) -> Result<SweepSpec> {
    let mut r = Reader::new(src, table, "experiment.sweep");
    let Some((parameter, param_at)) = r.string("parameter")? else {
        return Err(src.error(at, "experiment.sweep needs a parameter"));
    };
    let kind = parameter_quantity(parameter).ok_or_else(|| {
        src.error(param_at, format!("unknown sweep parameter \"{parameter}\""))
    })?;
    let mut bound = |key: &str| -> Result<f64> {
        let value = match kind {
            Some(q) => r.quantity(key, q)?,
            None => r.number(key)?,
        };
        value.ok_or_else(|| src.error(at, format!("experiment.sweep needs {key}")))
    };
    let start = bound("start")?;
    let end = bound("end")?;
    let points = r.integer("points")?.unwrap_or(1) as usize;
    r.finish()?;
    Ok(SweepSpec { parameter: parameter.to_string(), start, end, points })
}

/// Unit of a sweepable parameter by its name after the dot; `Some(None)`
/// means dimensionless.
pub fn parameter_quantity(path: &str) -> Option<Option<Quantity>> {
    let (_, param) = path.split_once('.')?;
    Some(match param {
        "delay" | "offset" | "jitter" | "gate_width" | "gate_offset" => Some(Quantity::Time),
        "phase" | "polarization_angle" | "delta_phase" | "relative_phase" | "offset_angle" | "theta" => {
            Some(Quantity::Angle)
        }
        "loss" | "loss_h" | "loss_v" | "isolation" | "in_band_loss" | "out_of_band_loss" => Some(Quantity::Loss),
        "length" => Some(Quantity::Length),
        "attenuation" => Some(Quantity::LossPerLength),
        "frequency" | "bandwidth" => Some(Quantity::AngularFrequency),
        "dark_count_rate" => Some(Quantity::Rate),
        "phase_sigma" | "phase_mean" | "theta_sigma" | "theta_mean" => Some(Quantity::Angle),
        "mean_photon_number" | "t" | "extinction_ratio" | "efficiency" | "afterpulse" | "alpha" | "beta"
        | "alpha_sigma" | "alpha_mean" | "beta_sigma" | "beta_mean" => None,
        _ => return None,
    })
}

impl Netlist {
    pub fn parse(text: &str, file: &str) -> Result<Netlist> {
        let src = SourceText { file, text };
        let doc = DeTable::parse(text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            src.error(offset, e.message().to_string())
        })?;
        let mut netlist = Netlist {
            file: file.to_string(),
            sources: Vec::new(),
            devices: Vec::new(),
            links: Vec::new(),
            detectors: Vec::new(),
            experiment: ExperimentSpec::default(),
        };
        for (key, value) in doc.get_ref().iter() {
            match key.get_ref().as_ref() {
                "sources" => {
                    for (name, t, at) in enumerate_tables(&src, value, "sources")? {
                        netlist.sources.push(parse_source(&src, &name, t, at)?);
                    }
                }
                "devices" => {
                    for (name, t, at) in enumerate_tables(&src, value, "devices")? {
                        netlist.devices.push(parse_device(&src, &name, t, at)?);
                    }
                }
                "detectors" => {
                    for (name, t, at) in enumerate_tables(&src, value, "detectors")? {
                        netlist.detectors.push(parse_detector(&src, &name, t, at)?);
                    }
                }
                "links" => {
                    let items = value
                        .get_ref()
                        .as_array()
                        .ok_or_else(|| src.error(value.span().start, "links must be an array of tables"))?;
                    for (i, item) in items.iter().enumerate() {
                        let t = item
                            .get_ref()
                            .as_table()
                            .ok_or_else(|| src.error(item.span().start, "each link must be a table"))?;
                        netlist.links.push(parse_link(&src, t, item.span().start, i)?);
                    }
                }
                "experiment" => {
                    let t = value
                        .get_ref()
                        .as_table()
                        .ok_or_else(|| src.error(value.span().start, "[experiment] must be a table"))?;
                    netlist.experiment = parse_experiment(&src, t)?;
                }
                other => {
                    return Err(src.error(key.span().start, format!("unknown section \"{other}\"")));
                }
            }
        }
        let mut names = BTreeSet::new();
        let all = netlist
            .sources
            .iter()
            .map(|s| (&s.name, &s.position))
            .chain(netlist.devices.iter().map(|d| (&d.name, &d.position)))
            .chain(netlist.detectors.iter().map(|d| (&d.name, &d.position)));
        for (name, position) in all {
            if !names.insert(name.clone()) {
                return Err(Error::Config { position: position.clone(), message: format!("node name \"{name}\" is used twice") });
            }
        }
        Ok(netlist)
    }

    pub fn load(path: &std::path::Path) -> Result<Netlist> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigGeneral(format!("cannot read {}: {e}", path.display())))?;
        Netlist::parse(&text, &path.display().to_string())
    }

    /// Overwrites one parameter, given in SI base units.
    pub fn set_parameter(&mut self, path: &str, value: f64) -> Result<()> {
        let unknown = || Error::ConfigGeneral(format!("unknown parameter path \"{path}\""));
        let (node, param) = path.split_once('.').ok_or_else(unknown)?;
        if let Some(s) = self.sources.iter_mut().find(|s| s.name == node) {
            let p = &mut s.params;
            match param {
                "delay" => p.delay = value,
                "offset" => s.offset = value,
                "phase" => p.phase = value,
                "mean_photon_number" => p.mean_photon_number = value,
                "polarization_angle" => s.polarization = PolarizationSpec::Angle(value),
                "frequency" => p.spectrum = SpectralMode::new(value, p.spectrum.sigma())?,
                "bandwidth" => p.spectrum = SpectralMode::new(p.spectrum.mu(), value)?,
                _ => return Err(unknown()),
            }
            return p.validate();
        }
        if let Some(d) = self.detectors.iter_mut().find(|d| d.name == node) {
            let p = &mut d.params;
            match param {
                "efficiency" => p.efficiency = value,
                "afterpulse" => p.afterpulse_prob = value,
                "dark_count_rate" => p.dark_count_rate = value,
                "jitter" => p.timing_jitter = value,
                "gate_width" => p.gate_width = value,
                "gate_offset" => p.gate_offset = value,
                _ => return Err(unknown()),
            }
            return p.validate();
        }
        let device = self.devices.iter_mut().find(|d| d.name == node).ok_or_else(unknown)?;
        device.kind = with_parameter(device.kind, param, value).ok_or_else(unknown)??;
        Ok(())
    }
}

fn with_parameter(kind: DeviceKind, param: &str, value: f64) -> Option<Result<DeviceKind>> {
    use DeviceParams as D;
    let single = |d: DeviceParams| Some(d.validate().map(|_| DeviceKind::Single(d)));
    match kind {
        DeviceKind::BeamSplitter(b) => match param {
            "t" => Some(BsParams::new(value, 1.0 - value, b.loss_db()).map(DeviceKind::BeamSplitter)),
            "loss" => Some(BsParams::new(b.t(), b.r(), value).map(DeviceKind::BeamSplitter)),
            _ => None,
        },
        DeviceKind::PolarizingBeamSplitter(_) => None,
        DeviceKind::Single(d) => match (d, param) {
            (D::PhaseModulator { loss_db, .. }, "phase") => single(D::PhaseModulator { phase: value, loss_db }),
            (D::PhaseModulator { phase, .. }, "loss") => single(D::PhaseModulator { phase, loss_db: value }),
            (D::Attenuator { .. }, "loss") => single(D::Attenuator { loss_db: value }),
            (D::Circulator { .. }, "loss") => single(D::Circulator { loss_db: value }),
            (D::Waveplate(w), "relative_phase") => {
                single(D::Waveplate(WaveplateParams { relative_phase: value.rem_euclid(TAU), ..w }))
            }
            (D::Waveplate(w), "offset_angle") => single(D::Waveplate(WaveplateParams { offset_angle: value, ..w })),
            (D::FaradayMirror { loss_db, .. }, "theta") => single(D::FaradayMirror { theta: value, loss_db }),
            (D::Fiber(f), "length") => single(D::Fiber(FiberParams { length_km: value, ..f })),
            (D::Fiber(f), "phase_sigma") => {
                single(D::Fiber(FiberParams { phase: Disturbance { sigma: value, ..f.phase }, ..f }))
            }
            (D::Isolator { loss_db, orientation, .. }, "isolation") => {
                single(D::Isolator { loss_db, isolation_db: value, orientation })
            }
            (D::Switch { loss_db, selected, .. }, "isolation") => {
                single(D::Switch { loss_db, isolation_db: value, selected })
            }
            _ => None,
        },
    }
}
