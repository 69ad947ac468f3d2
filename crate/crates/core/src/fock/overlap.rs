use num_complex::Complex64;

use super::{JonesPolarization, PhotonState, SpectralMode};
use crate::error::{Error, Result};

/// `∫ dω φ1*(ω) φ2(ω) e^{-iω(τ2-τ1)}` for two normalized Gaussian spectral
/// amplitudes `φ(ω) = exp(-(ω-μ)²/4σ²) / ((2π)^{1/4} √σ)`.
///
/// Closed form: with `s = σ1² + σ2²` the modulus is
/// `√(2σ1σ2/s) · exp(-(μ1-μ2)²/4s - (τ2-τ1)² σ1²σ2²/s)` and the phase is
/// `-(τ2-τ1)·(μ1σ2² + μ2σ1²)/s`.
pub fn spectral_overlap(s1: SpectralMode, tau1: f64, s2: SpectralMode, tau2: f64) -> Result<Complex64> {
    if !(tau1.is_finite() && tau2.is_finite()) {
        return Err(Error::invalid("wavepacket delays must be finite"));
    }
    Ok(spectral_overlap_unchecked(s1, tau1, s2, tau2))
}

#[inline]
pub(crate) fn spectral_overlap_unchecked(
    s1: SpectralMode,
    tau1: f64,
    s2: SpectralMode,
    tau2: f64,
) -> Complex64 {
    let dt = tau2 - tau1;
    if s1 == s2 {
        if dt == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let sig = s1.sigma;
        let modulus = (-0.5 * sig * sig * dt * dt).exp();
        return Complex64::from_polar(modulus, -s1.mu * dt);
    }
    let (v1, v2) = (s1.sigma * s1.sigma, s2.sigma * s2.sigma);
    let s = v1 + v2;
    let dmu = s1.mu - s2.mu;
    let prefactor = (2.0 * s1.sigma * s2.sigma / s).sqrt();
    let modulus = prefactor * (-dmu * dmu / (4.0 * s) - dt * dt * v1 * v2 / s).exp();
    let centre = (s1.mu * v2 + s2.mu * v1) / s;
    Complex64::from_polar(modulus, -centre * dt)
}

/// Inner product of two Jones vectors `(α, β e^{-iθ})`.
pub fn polarization_overlap(p1: JonesPolarization, p2: JonesPolarization) -> Complex64 {
    let cross = p1.beta * p2.beta;
    Complex64::new(p1.alpha * p2.alpha, 0.0)
        + Complex64::from_polar(cross, -(p2.delta_phase - p1.delta_phase))
}

/// `⟨a|b⟩` for two single-photon terms, coefficients included.
pub fn state_overlap(a: &PhotonState, b: &PhotonState) -> Complex64 {
    if a.route != b.route {
        return Complex64::new(0.0, 0.0);
    }
    let amplitude = a.coefficient * b.coefficient;
    let pol = polarization_overlap(a.polarization, b.polarization);
    if pol.norm_sqr() == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let spec = spectral_overlap_unchecked(a.spectrum, a.delay, b.spectrum, b.delay);
    let phase = Complex64::from_polar(amplitude, b.phase - a.phase);
    phase * spec * pol
}
