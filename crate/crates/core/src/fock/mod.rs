//! Photon-state data model and the inner-product machinery behind every
//! probability the simulator reports.
//!
//! A photon is a superposition of [`PhotonState`] terms. Each term is a
//! Gaussian wavepacket on one route with a Jones polarization and a real,
//! signed coefficient; all complex phase lives in `phase` and
//! `delta_phase`. A [`PhotonPool`] is the product of the photons of one
//! correlated system. Multi-photon inner products are permanents of the
//! single-photon overlap matrix.

mod overlap;
mod permanent;
mod pool;

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use overlap::{polarization_overlap, spectral_overlap, state_overlap};
pub use permanent::{permanent, permanent_capped, SquareMatrix};
pub use pool::{
    configuration_inner, mode_gram, normalize_pool, pool_norm, total_norm, DEFAULT_PHOTON_CAP,
};

/// Coefficients below this magnitude are dropped after each transformation.
pub const COEFFICIENT_FLOOR: f64 = 1e-12;

/// Opaque path identifier.
///
/// Loss channels (amplitude removed by absorbing or leaking elements) are
/// routes too; they are never detected and are excluded from [`pool_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RouteId(u32);

impl RouteId {
    const LOSS_BIT: u32 = 1 << 31;

    pub const fn new(index: u32) -> Self {
        assert!(index < Self::LOSS_BIT, "route index out of range");
        RouteId(index)
    }

    pub const fn loss_channel(index: u32) -> Self {
        assert!(index < Self::LOSS_BIT, "loss channel index out of range");
        RouteId(index | Self::LOSS_BIT)
    }

    pub fn is_loss_channel(self) -> bool {
        self.0 & Self::LOSS_BIT != 0
    }

    pub fn index(self) -> u32 {
        self.0 & !Self::LOSS_BIT
    }
}

/// Gaussian spectral amplitude, centre `mu` and width `sigma`, both in rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralMode {
    mu: f64,
    sigma: f64,
}

impl SpectralMode {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::invalid(format!("spectral centre must be > 0, got {mu}")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("spectral width must be > 0, got {sigma}")));
        }
        Ok(SpectralMode { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Jones vector `(alpha, beta * exp(-i delta_phase))` with real non-negative
/// amplitudes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JonesPolarization {
    alpha: f64,
    beta: f64,
    delta_phase: f64,
}

impl JonesPolarization {
    pub const NORM_TOLERANCE: f64 = 1e-9;

    pub fn new(alpha: f64, beta: f64, delta_phase: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && delta_phase.is_finite()) {
            return Err(Error::invalid("polarization parameters must be finite"));
        }
        if alpha < 0.0 || beta < 0.0 {
            return Err(Error::invalid(format!(
                "polarization amplitudes must be >= 0, got ({alpha}, {beta})"
            )));
        }
        if (alpha * alpha + beta * beta - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::invalid(format!(
                "polarization amplitudes ({alpha}, {beta}) are not normalized"
            )));
        }
        Ok(JonesPolarization { alpha, beta, delta_phase })
    }

    pub fn horizontal() -> Self {
        JonesPolarization { alpha: 1.0, beta: 0.0, delta_phase: 0.0 }
    }

    pub fn vertical() -> Self {
        JonesPolarization { alpha: 0.0, beta: 1.0, delta_phase: 0.0 }
    }

    /// Linear polarization at `angle` from horizontal.
    ///
    /// Returns the polarization and the global phase (0 or pi) needed to
    /// represent `(cos angle, sin angle)` with non-negative amplitudes.
    pub fn linear(angle: f64) -> (Self, f64) {
        Self::from_jones([Complex64::new(angle.cos(), 0.0), Complex64::new(angle.sin(), 0.0)])
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta_phase(&self) -> f64 {
        self.delta_phase
    }

    pub fn jones(&self) -> [Complex64; 2] {
        [
            Complex64::new(self.alpha, 0.0),
            Complex64::from_polar(self.beta, -self.delta_phase),
        ]
    }

    /// Re-encodes a (possibly unnormalized) Jones vector.
    ///
    /// Returns the normalized polarization and the global phase that was
    /// factored out, so `v = |v| e^{i phase} jones()`.
    pub fn from_jones(v: [Complex64; 2]) -> (Self, f64) {
        let (h, vv) = (v[0].norm(), v[1].norm());
        let norm = h.hypot(vv);
        if norm == 0.0 {
            return (Self::horizontal(), 0.0);
        }
        let (alpha, beta) = (h / norm, vv / norm);
        if h <= f64::EPSILON * norm {
            return (JonesPolarization { alpha: 0.0, beta: 1.0, delta_phase: 0.0 }, v[1].arg());
        }
        let global = v[0].arg();
        let delta_phase = if vv <= f64::EPSILON * norm {
            0.0
        } else {
            wrap_angle(global - v[1].arg())
        };
        (JonesPolarization { alpha, beta, delta_phase }, global)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}

/// One superposition term of a photon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonState {
    /// Wavepacket centre time in seconds.
    pub delay: f64,
    pub route: RouteId,
    /// Relative phase in radians.
    pub phase: f64,
    pub spectrum: SpectralMode,
    pub polarization: JonesPolarization,
    /// Real, signed amplitude.
    pub coefficient: f64,
}

impl PhotonState {
    pub fn new(route: RouteId, spectrum: SpectralMode, polarization: JonesPolarization) -> Self {
        PhotonState { delay: 0.0, route, phase: 0.0, spectrum, polarization, coefficient: 1.0 }
    }

    /// True when the two states differ at most in their coefficient.
    pub fn same_mode(&self, other: &PhotonState) -> bool {
        self.route == other.route
            && self.delay == other.delay
            && self.phase == other.phase
            && self.spectrum == other.spectrum
            && self.polarization == other.polarization
    }
}

/// A single photon: an ordered superposition of states.
#[derive(Clone, Debug, PartialEq)]
pub struct Photon {
    states: Vec<PhotonState>,
}

impl Photon {
    pub fn new(states: Vec<PhotonState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("a photon needs at least one state"));
        }
        if let Some(s) = states.iter().find(|s| !s.coefficient.is_finite()) {
            return Err(Error::invalid(format!("non-finite coefficient {}", s.coefficient)));
        }
        let mut photon = Photon { states };
        photon.merge_duplicates();
        Ok(photon)
    }

    pub(crate) fn from_states_unchecked(states: Vec<PhotonState>) -> Self {
        Photon { states }
    }

    pub fn states(&self) -> &[PhotonState] {
        &self.states
    }

    pub(crate) fn states_mut(&mut self) -> &mut Vec<PhotonState> {
        &mut self.states
    }

    /// Whether any state of this photon sits on a detectable route.
    pub fn is_live(&self) -> bool {
        self.states.iter().any(|s| !s.route.is_loss_channel())
    }

    pub fn occupies(&self, route: RouteId) -> bool {
        self.states.iter().any(|s| s.route == route)
    }

    /// Sums coefficients of states that agree in every other field and
    /// drops terms below [`COEFFICIENT_FLOOR`].
    pub fn merge_duplicates(&mut self) {
        let mut merged: Vec<PhotonState> = Vec::with_capacity(self.states.len());
        for s in self.states.drain(..) {
            match merged.iter_mut().find(|m| m.same_mode(&s)) {
                Some(m) => m.coefficient += s.coefficient,
                None => merged.push(s),
            }
        }
        merged.retain(|s| s.coefficient.abs() >= COEFFICIENT_FLOOR);
        self.states = merged;
    }
}

/// Pool identifier; unique for the lifetime of the process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PoolId(u64);

impl PoolId {
    pub fn fresh() -> Self {
        static NEXT: AtomicU64 = AtomicU64::new(1);
        PoolId(NEXT.fetch_add(1, Ordering::Relaxed))
    }

    pub fn get(self) -> u64 {
        self.0
    }
}

/// Provenance of a pool: the pools it was merged from and the number of
/// random draws consumed on its behalf.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lineage {
    pub parents: Vec<PoolId>,
    pub draws: u64,
}

/// Product of the photons belonging to one correlated system.
#[derive(Clone, Debug)]
pub struct PhotonPool {
    id: PoolId,
    photons: Vec<Photon>,
    lineage: Lineage,
    cap: usize,
}

impl PhotonPool {
    pub fn new(photons: Vec<Photon>) -> Self {
        PhotonPool {
            id: PoolId::fresh(),
            photons,
            lineage: Lineage::default(),
            cap: DEFAULT_PHOTON_CAP,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn id(&self) -> PoolId {
        self.id
    }

    pub fn photons(&self) -> &[Photon] {
        &self.photons
    }

    pub(crate) fn photons_mut(&mut self) -> &mut Vec<Photon> {
        &mut self.photons
    }

    pub fn len(&self) -> usize {
        self.photons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photons.is_empty()
    }

    pub fn lineage(&self) -> &Lineage {
        &self.lineage
    }

    /// Maximum photon count for exact probability evaluation.
    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    /// Records `n` random draws spent on this pool.
    pub fn record_draws(&mut self, n: u64) {
        self.lineage.draws += n;
    }

    pub fn occupies(&self, route: RouteId) -> bool {
        self.photons.iter().any(|p| p.occupies(route))
    }

    pub fn has_live_states(&self) -> bool {
        self.photons.iter().any(Photon::is_live)
    }

    pub fn check_cap(&self) -> Result<()> {
        if self.photons.len() > self.cap {
            return Err(Error::Capacity {
                what: "photon count",
                got: self.photons.len(),
                cap: self.cap,
            });
        }
        Ok(())
    }

    /// Multiplies every coefficient by `factor`.
    pub(crate) fn scale_coefficients(&mut self, factor: f64) {
        for p in &mut self.photons {
            for s in p.states_mut() {
                s.coefficient *= factor;
            }
        }
    }

    pub(crate) fn retire_into(self, id: PoolId, lineage: Lineage) -> PhotonPool {
        PhotonPool { id, photons: self.photons, lineage, cap: self.cap }
    }
}
