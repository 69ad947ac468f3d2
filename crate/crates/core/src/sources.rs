//! Single-photon and phase-randomized weak-coherent sources.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::fock::{JonesPolarization, Photon, PhotonPool, PhotonState, RouteId, SpectralMode};

/// Hard upper bound on the Fock-expansion truncation point.
pub const TRUNCATION_CAP: u32 = 170;

/// 1550 nm carrier in rad/s.
pub const TELECOM_CARRIER: f64 = 1.215_259_075_683_131e15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceParams {
    /// Mean photon number per pulse; ignored by single-photon sources.
    pub mean_photon_number: f64,
    pub spectrum: SpectralMode,
    pub polarization: JonesPolarization,
    pub emit_route: RouteId,
    /// Seconds between pulses.
    pub repetition_period: f64,
    pub phase_randomized: bool,
    /// Wavepacket time offset in seconds, carried into `PhotonState::delay`.
    pub delay: f64,
    /// Optical phase used when the source is not phase randomized.
    pub phase: f64,
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photon_number >= 0.0 && self.mean_photon_number.is_finite()) {
            return Err(Error::invalid(format!(
                "mean photon number must be finite and >= 0, got {}",
                self.mean_photon_number
            )));
        }
        if !(self.repetition_period > 0.0 && self.repetition_period.is_finite()) {
            return Err(Error::invalid(format!(
                "repetition period must be > 0, got {}",
                self.repetition_period
            )));
        }
        if !(self.delay.is_finite() && self.phase.is_finite()) {
            return Err(Error::invalid("source delay and phase must be finite"));
        }
        Ok(())
    }

    fn state(&self, phase: f64, coefficient: f64) -> PhotonState {
        let mut s = PhotonState::new(self.emit_route, self.spectrum, self.polarization);
        s.delay = self.delay;
        s.phase = phase;
        s.coefficient = coefficient;
        s
    }
}

impl Default for SourceParams {
    fn default() -> Self {
        SourceParams {
            mean_photon_number: 0.0,
            spectrum: SpectralMode::new(TELECOM_CARRIER, TAU * 65e9).expect("valid default mode"),
            polarization: JonesPolarization::horizontal(),
            emit_route: RouteId::new(0),
            repetition_period: 1e-6,
            phase_randomized: true,
            delay: 0.0,
            phase: 0.0,
        }
    }
}

/// A normalized one-photon pool on the emit route.
pub fn emit_single_photon(params: &SourceParams) -> PhotonPool {
    PhotonPool::new(vec![Photon::from_states_unchecked(vec![params.state(params.phase, 1.0)])])
}

/// Smallest `n_t` such that the chance of any of `n_trials` Poisson(μ)
/// pulses exceeding `n_t` photons is at most `epsilon`.
pub fn truncation_point(mu: f64, n_trials: u64, epsilon: f64) -> Result<u32> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("mu must be > 0, got {mu}")));
    }
    if n_trials == 0 {
        return Err(Error::invalid("trial count must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let ln_mu = mu.ln();
    // ln of the Poisson pmf at 0..=TRUNCATION_CAP+TAIL.
    const TAIL: u32 = 400;
    let mut ln_pmf = Vec::with_capacity((TRUNCATION_CAP + TAIL) as usize + 1);
    let mut acc = -mu;
    ln_pmf.push(acc);
    for n in 1..=(TRUNCATION_CAP + TAIL) {
        acc += ln_mu - (n as f64).ln();
        ln_pmf.push(acc);
    }
    for n_t in 0..=TRUNCATION_CAP {
        // Upper tail P(n > n_t) by log-sum-exp over the following terms.
        let rest = &ln_pmf[n_t as usize + 1..];
        let peak = rest.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail = if peak == f64::NEG_INFINITY {
            0.0
        } else {
            peak.exp() * rest.iter().map(|l| (l - peak).exp()).sum::<f64>()
        };
        let failure = -(n_trials as f64 * (-tail.min(1.0)).ln_1p()).exp_m1();
        if failure <= epsilon {
            return Ok(n_t);
        }
    }
    Err(Error::Capacity { what: "truncation point", got: TRUNCATION_CAP as usize + 1, cap: TRUNCATION_CAP as usize })
}

/// Pool from one weak-coherent pulse together with the number of Poisson
/// redraws spent on photon numbers above the truncation point.
#[derive(Clone, Debug)]
pub struct CoherentEmission {
    pub pool: PhotonPool,
    pub redraws: u64,
}

/// Draws `n ~ Poisson(μ)` conditioned on `n ≤ n_t` and builds the
/// `n`-photon Fock pool with per-photon coefficient `(n!)^{-1/2n}`.
pub fn emit_weak_coherent<R: Rng + ?Sized>(params: &SourceParams, n_t: u32, rng: &mut R) -> PhotonPool {
    emit_weak_coherent_counted(params, n_t, rng).pool
}

pub fn emit_weak_coherent_counted<R: Rng + ?Sized>(
    params: &SourceParams,
    n_t: u32,
    rng: &mut R,
) -> CoherentEmission {
    let mu = params.mean_photon_number;
    let mut redraws = 0;
    let n = if mu > 0.0 {
        let poisson = Poisson::new(mu).expect("mean photon number validated");
        loop {
            let n = poisson.sample(rng) as u64;
            if n <= n_t as u64 {
                break n as usize;
            }
            redraws += 1;
        }
    } else {
        0
    };
    let phase = if params.phase_randomized { rng.random_range(0.0..TAU) } else { params.phase };
    let mut pool = if n == 0 {
        PhotonPool::empty()
    } else {
        let ln_factorial: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
        let coefficient = (-ln_factorial / (2.0 * n as f64)).exp();
        let photons = (0..n)
            .map(|_| Photon::from_states_unchecked(vec![params.state(phase, coefficient)]))
            .collect();
        PhotonPool::new(photons)
    };
    pool.record_draws(redraws + 1 + params.phase_randomized as u64);
    CoherentEmission { pool, redraws }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::pool_norm;
    use crate::oracles::{fixed_le_ratio, session_failure_probability};
    use crate::quantum::route_number_distribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_photon_pool() {
        let p = SourceParams::default();
        let a = emit_single_photon(&p);
        let b = emit_single_photon(&p);
        assert_ne!(a.id(), b.id());
        assert_eq!(a.len(), 1);
        assert!((pool_norm(&a).unwrap() - 1.0).abs() < 1e-15);
        let d = route_number_distribution(&a, p.emit_route).unwrap();
        assert!((d.probability(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        let mut p = SourceParams::default();
        assert!(p.validate().is_ok());
        p.mean_photon_number = -0.1;
        assert!(p.validate().is_err());
        p.mean_photon_number = 0.1;
        p.repetition_period = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn truncation_small_mu() {
        let n = truncation_point(1e-9, 1000, 0.5).unwrap();
        assert!(n <= 1);
    }

    #[test]
    fn truncation_matches_exact_summation() {
        let fast = truncation_point(0.5, 1_000_000, 1e-6).unwrap();
        let exact = (0..40)
            .find(|&n_t| fixed_le_ratio(&session_failure_probability(1, 2, n_t, 1_000_000), 1, 1_000_000))
            .unwrap();
        assert_eq!(fast, exact);
        assert_eq!(fast, 11);
    }

    #[test]
    fn truncation_is_sound_and_monotone() {
        for &(num, den) in &[(1i64, 10i64), (1, 2), (2, 1)] {
            let mu = num as f64 / den as f64;
            let n6 = truncation_point(mu, 1_000_000, 1e-6).unwrap();
            let n9 = truncation_point(mu, 1_000_000_000, 1e-6).unwrap();
            assert!(n9 >= n6);
            let failure = session_failure_probability(num, den, n6, 1_000_000);
            assert!(!failure.is_negative());
            assert!(fixed_le_ratio(&failure, 1, 1_000_000));
            if n6 > 0 {
                let below = session_failure_probability(num, den, n6 - 1, 1_000_000);
                assert!(!fixed_le_ratio(&below, 1, 1_000_000));
            }
        }
    }

    #[test]
    fn truncation_rejects_bad_input_and_caps() {
        assert!(truncation_point(0.0, 10, 0.1).is_err());
        assert!(truncation_point(0.5, 0, 0.1).is_err());
        assert!(truncation_point(0.5, 10, 1.0).is_err());
        assert!(matches!(truncation_point(150.0, 1_000_000, 1e-12), Err(Error::Capacity { .. })));
    }

    #[test]
    fn vacuum_source() {
        let p = SourceParams { mean_photon_number: 0.0, ..SourceParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(emit_weak_coherent(&p, 5, &mut rng).is_empty());
        }
    }

    #[test]
    fn fock_pools_are_normalized() {
        let p = SourceParams { mean_photon_number: 3.0, ..SourceParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut seen = [false; 6];
        for _ in 0..2000 {
            let pool = emit_weak_coherent(&p, 5, &mut rng);
            seen[pool.len()] = true;
            if !pool.is_empty() {
                assert!((pool_norm(&pool).unwrap() - 1.0).abs() < 1e-9, "n = {}", pool.len());
            }
        }
        assert!(seen[2] && seen[5]);
    }

    #[test]
    fn photon_numbers_follow_truncated_poisson() {
        let p = SourceParams { mean_photon_number: 0.5, ..SourceParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pulses = 100_000;
        let n_t = 3;
        let mut counts = [0usize; 4];
        let mut redraws = 0;
        for _ in 0..pulses {
            let e = emit_weak_coherent_counted(&p, n_t, &mut rng);
            counts[e.pool.len()] += 1;
            redraws += e.redraws;
        }
        let pmf: Vec<f64> = (0..=n_t as i32)
            .scan(1.0, |fact, n| {
                if n > 0 {
                    *fact *= n as f64;
                }
                Some((-0.5f64).exp() * 0.5f64.powi(n) / *fact)
            })
            .collect();
        let kept: f64 = pmf.iter().sum();
        for (n, &c) in counts.iter().enumerate() {
            let q = pmf[n] / kept;
            let sd = (q * (1.0 - q) / pulses as f64).sqrt();
            assert!((c as f64 / pulses as f64 - q).abs() < 4.0 * sd, "n = {n}");
        }
        let expected = pulses as f64 * (1.0 - kept) / kept;
        assert!((redraws as f64 - expected).abs() < 4.0 * expected.sqrt() + 1.0);
    }

    #[test]
    fn random_phases_have_small_circular_mean() {
        let p = SourceParams { mean_photon_number: 2.0, ..SourceParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut sum = num_complex::Complex64::new(0.0, 0.0);
        let mut pulses = 0;
        while pulses < 20_000 {
            let pool = emit_weak_coherent(&p, 10, &mut rng);
            if let Some(photon) = pool.photons().first() {
                let phases: Vec<f64> = pool.photons().iter().map(|q| q.states()[0].phase).collect();
                assert!(phases.iter().all(|&x| x == phases[0]));
                sum += num_complex::Complex64::from_polar(1.0, photon.states()[0].phase);
                pulses += 1;
            }
        }
        assert!(sum.norm() / (pulses as f64) < 4.0 / (pulses as f64).sqrt());
    }
}
