//! Optical device library.
//!
//! Every transformation is a pure function from a pool to a new pool. A
//! device only touches states on the route it was reached through; amplitude
//! it does not transmit is moved onto a loss channel so the full state stays
//! normalized and a lossy device scales detection probabilities exactly.

mod devices;
mod fiber;
mod splitters;

pub use devices::{apply_faraday_mirror, apply_simple_device, apply_switch, apply_waveplate};
pub use fiber::{apply_fiber, Disturbance, FiberParams, DEFAULT_DELAY_PER_KM};
pub use splitters::{apply_bs, apply_pbs, BsParams, PbsParams};

use crate::error::{Error, Result};
use crate::fock::{total_norm, JonesPolarization, PhotonPool, PhotonState, RouteId};

/// Power transmission of a loss given in dB.
pub fn transmission(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub(crate) fn check_loss(name: &str, db: f64) -> Result<()> {
    if db.is_finite() && db >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be a finite loss >= 0 dB, got {db}")))
    }
}

/// Routes seen by a two-input, two-output splitter. Each input port has its
/// own loss channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitterPorts {
    pub a: RouteId,
    pub b: RouteId,
    pub c: RouteId,
    pub d: RouteId,
    pub loss_a: RouteId,
    pub loss_b: RouteId,
}

/// Light entering a single-path device on `input` and leaving on `output`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Passage {
    pub input: RouteId,
    pub output: RouteId,
    pub loss: RouteId,
    /// Set when the light entered through the device's second port (isolator
    /// port `b`).
    pub backward: bool,
}

/// Routes of a 1x2 switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SwitchPorts {
    pub input: RouteId,
    pub out1: RouteId,
    pub out2: RouteId,
    pub loss: RouteId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Transmits from port `a` to port `b`.
    #[default]
    AToB,
    BToA,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SwitchPort {
    #[default]
    Out1,
    Out2,
}

/// Piecewise bandpass: `in_band_loss_db` for `low <= μ <= high`, otherwise
/// `out_of_band_loss_db`. Frequencies are angular, rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterProfile {
    pub low: f64,
    pub high: f64,
    pub in_band_loss_db: f64,
    pub out_of_band_loss_db: f64,
}

impl FilterProfile {
    pub fn loss_at(&self, omega: f64) -> f64 {
        if omega >= self.low && omega <= self.high {
            self.in_band_loss_db
        } else {
            self.out_of_band_loss_db
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveplateParams {
    /// Retardance δ in `[0, 2π)`: π for a half-wave plate, π/2 for a quarter-wave plate.
    pub relative_phase: f64,
    /// Fast-axis angle θ.
    pub offset_angle: f64,
    pub loss_db: f64,
}

/// Parameters of the devices that act on a single path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeviceParams {
    Attenuator { loss_db: f64 },
    Filter(FilterProfile),
    Circulator { loss_db: f64 },
    PolarizationModulator { target: JonesPolarization, loss_db: f64 },
    PhaseModulator { phase: f64, loss_db: f64 },
    Isolator { loss_db: f64, isolation_db: f64, orientation: Orientation },
    Switch { loss_db: f64, isolation_db: f64, selected: SwitchPort },
    Waveplate(WaveplateParams),
    Fiber(FiberParams),
    FaradayMirror { loss_db: f64, theta: f64 },
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DeviceParams::Attenuator { loss_db } | DeviceParams::Circulator { loss_db } => {
                check_loss("loss", loss_db)
            }
            DeviceParams::Filter(p) => {
                check_loss("in-band loss", p.in_band_loss_db)?;
                check_loss("out-of-band loss", p.out_of_band_loss_db)?;
                if !(p.low.is_finite() && p.high.is_finite() && p.low <= p.high) {
                    return Err(Error::invalid("filter band edges must satisfy low <= high"));
                }
                Ok(())
            }
            DeviceParams::PolarizationModulator { loss_db, .. } => check_loss("loss", loss_db),
            DeviceParams::PhaseModulator { phase, loss_db } => {
                if !phase.is_finite() {
                    return Err(Error::invalid("phase must be finite"));
                }
                check_loss("loss", loss_db)
            }
            DeviceParams::Isolator { loss_db, isolation_db, .. }
            | DeviceParams::Switch { loss_db, isolation_db, .. } => {
                check_loss("loss", loss_db)?;
                check_loss("isolation", isolation_db)
            }
            DeviceParams::Waveplate(w) => {
                if !(w.relative_phase >= 0.0 && w.relative_phase < std::f64::consts::TAU) {
                    return Err(Error::invalid(format!(
                        "waveplate retardance must lie in [0, 2pi), got {}",
                        w.relative_phase
                    )));
                }
                if !w.offset_angle.is_finite() {
                    return Err(Error::invalid("waveplate angle must be finite"));
                }
                check_loss("loss", w.loss_db)
            }
            DeviceParams::Fiber(f) => f.validate(),
            DeviceParams::FaradayMirror { loss_db, theta } => {
                if !theta.is_finite() {
                    return Err(Error::invalid("Faraday rotation must be finite"));
                }
                check_loss("loss", loss_db)
            }
        }
    }
}

/// Rebuilds every photon, replacing each state on `input` by whatever `f`
/// pushes. Other states are kept as they are.
pub(crate) fn transform_route(
    pool: &PhotonPool,
    input: RouteId,
    mut f: impl FnMut(&PhotonState, &mut Vec<PhotonState>),
) -> PhotonPool {
    transform_routes(pool, &[input], |s, out| f(s, out))
}

pub(crate) fn transform_routes(
    pool: &PhotonPool,
    inputs: &[RouteId],
    mut f: impl FnMut(&PhotonState, &mut Vec<PhotonState>),
) -> PhotonPool {
    let mut out = pool.clone();
    for photon in out.photons_mut() {
        if !inputs.iter().any(|&r| photon.occupies(r)) {
            continue;
        }
        let states = photon.states_mut();
        let old = std::mem::take(states);
        for s in &old {
            if inputs.contains(&s.route) {
                f(s, states);
            } else {
                states.push(*s);
            }
        }
        photon.merge_duplicates();
    }
    out
}

/// Rescales `out` uniformly to the full-state norm of `input`. Overwriting
/// or perturbing a mode parameter changes the overlaps between photons that
/// share the route; a single photon is left as it is.
pub(crate) fn keep_total_norm(input: &PhotonPool, mut out: PhotonPool) -> Result<PhotonPool> {
    if input.len() < 2 {
        return Ok(out);
    }
    let (before, after) = (total_norm(input)?, total_norm(&out)?);
    if after > 0.0 {
        out.scale_coefficients((before / after).powf(0.5 / out.len() as f64));
    }
    Ok(out)
}

/// Pushes `s` onto `output` with power fraction `t` and the remainder onto
/// `loss`.
pub(crate) fn emit_with_loss(
    s: &PhotonState,
    t: f64,
    output: RouteId,
    loss: RouteId,
    out: &mut Vec<PhotonState>,
) {
    out.push(PhotonState { route: output, coefficient: s.coefficient * t.sqrt(), ..*s });
    if t < 1.0 {
        out.push(PhotonState { route: loss, coefficient: s.coefficient * (1.0 - t).sqrt(), ..*s });
    }
}
