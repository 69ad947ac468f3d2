//! Closed-form curves the simulated frequencies are compared against.

use std::f64::consts::LN_2;

use photonpool::components::transmission;

/// Imperfections of the built-in Mach-Zehnder interferometer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MziSettings {
    /// Power transmission `T` of each beam splitter; `R = 1 − T`.
    pub bs1_t: f64,
    pub bs2_t: f64,
    /// Attenuation of the upper arm (bs1.c to bs2.a), dB.
    pub arm1_loss_db: f64,
    /// Insertion loss of the phase modulator in the lower arm, dB.
    pub arm2_loss_db: f64,
    pub efficiency: f64,
}

impl Default for MziSettings {
    fn default() -> Self {
        MziSettings { bs1_t: 0.5, bs2_t: 0.5, arm1_loss_db: 0.0, arm2_loss_db: 0.0, efficiency: 1.0 }
    }
}

impl MziSettings {
    pub fn is_ideal(&self) -> bool {
        *self == MziSettings::default()
    }
}

/// `((1 + cos φ)/2, (1 − cos φ)/2)`.
pub fn mzi_ideal(phase: f64) -> (f64, f64) {
    ((1.0 + phase.cos()) / 2.0, (1.0 - phase.cos()) / 2.0)
}

/// Click probabilities of D1 (bs2.d) and D2 (bs2.c) from the single-photon
/// amplitudes along both arms.
///
/// With `τ1, τ2` the arm transmissions, D1 collects `√T1·√τ1·(−√R2)` and
/// `(−√R1)·√τ2·e^{iφ}·√T2`; D2 collects `√T1·√τ1·√T2` and
/// `(−√R1)·√τ2·e^{iφ}·√R2`.
pub fn mzi_lossy(phase: f64, s: &MziSettings) -> (f64, f64) {
    let (t1, r1) = (s.bs1_t, 1.0 - s.bs1_t);
    let (t2, r2) = (s.bs2_t, 1.0 - s.bs2_t);
    let (tau1, tau2) = (transmission(s.arm1_loss_db), transmission(s.arm2_loss_db));
    let upper_d1 = -(t1 * tau1 * r2).sqrt();
    let lower_d1 = -(r1 * tau2 * t2).sqrt();
    let upper_d2 = (t1 * tau1 * t2).sqrt();
    let lower_d2 = -(r1 * tau2 * r2).sqrt();
    let intensity = |a: f64, b: f64| a * a + b * b + 2.0 * a * b * phase.cos();
    (s.efficiency * intensity(upper_d1, lower_d1), s.efficiency * intensity(upper_d2, lower_d2))
}

/// Coincidence probability for linear polarizations `δθ` apart: `sin²(δθ)/2`.
pub fn hom_polarization(delta_theta: f64) -> f64 {
    delta_theta.sin().powi(2) / 2.0
}

/// Coincidence probability for a relative delay `δt` between Gaussian
/// wavepackets of spectral width `σ` (rad/s): `1/2 − e^{−σ²δt²}/2`.
pub fn hom_delay(delay: f64, sigma: f64) -> f64 {
    0.5 - 0.5 * (-(sigma * delay).powi(2)).exp()
}

/// Full width at half maximum of a Gaussian spectrum of standard deviation
/// `σ`.
pub fn fwhm(sigma: f64) -> f64 {
    2.0 * (2.0 * LN_2).sqrt() * sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn lossless_balanced_form_reduces_to_cosine_law() {
        for k in 0..20 {
            let phi = k as f64 * 0.4;
            let (a, b) = mzi_lossy(phi, &MziSettings::default());
            let (c, d) = mzi_ideal(phi);
            assert!((a - c).abs() < 1e-15 && (b - d).abs() < 1e-15);
        }
    }

    #[test]
    fn lossy_probabilities_sum_to_arm_weighted_transmission() {
        let s = MziSettings { bs1_t: 0.3, bs2_t: 0.6, arm1_loss_db: 3.0, arm2_loss_db: 1.0, efficiency: 0.8 };
        for phi in [0.0, 1.0, PI] {
            let (a, b) = mzi_lossy(phi, &s);
            let expected = 0.8 * (0.3 * transmission(3.0) + 0.7 * transmission(1.0));
            assert!((a + b - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn hom_limits() {
        assert_eq!(hom_polarization(0.0), 0.0);
        assert!((hom_polarization(PI / 2.0) - 0.5).abs() < 1e-15);
        assert_eq!(hom_delay(0.0, 4e11), 0.0);
        assert!((hom_delay(1e-9, 4e11) - 0.5).abs() < 1e-15);
        assert!((fwhm(1.0) - 2.354_820_045_030_949).abs() < 1e-14);
    }
}
