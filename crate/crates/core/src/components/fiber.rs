use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{check_loss, emit_with_loss, keep_total_norm, transform_route, transmission, Passage};
use crate::error::{Error, Result};
use crate::fock::{wrap_angle, JonesPolarization, PhotonPool, PhotonState};

/// Group delay of standard single-mode fiber, seconds per km.
pub const DEFAULT_DELAY_PER_KM: f64 = 4.9e-6;

/// Normal random-walk step `δ ~ N(mean, sigma)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Disturbance {
    pub mean: f64,
    pub sigma: f64,
}

impl Disturbance {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            self.mean
        } else {
            Normal::new(self.mean, self.sigma).expect("sigma validated").sample(rng)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberParams {
    pub alpha_db_per_km: f64,
    pub length_km: f64,
    pub phase: Disturbance,
    pub alpha: Disturbance,
    pub beta: Disturbance,
    pub theta: Disturbance,
    pub delay_per_km: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        FiberParams {
            alpha_db_per_km: 0.2,
            length_km: 0.0,
            phase: Disturbance::default(),
            alpha: Disturbance::default(),
            beta: Disturbance::default(),
            theta: Disturbance::default(),
            delay_per_km: DEFAULT_DELAY_PER_KM,
        }
    }
}

impl FiberParams {
    pub fn validate(&self) -> Result<()> {
        check_loss("attenuation", self.alpha_db_per_km)?;
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return Err(Error::invalid(format!("fiber length must be >= 0, got {}", self.length_km)));
        }
        if !(self.delay_per_km >= 0.0 && self.delay_per_km.is_finite()) {
            return Err(Error::invalid("delay per km must be >= 0"));
        }
        for (name, d) in self.disturbances() {
            if !(d.sigma >= 0.0 && d.sigma.is_finite() && d.mean.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} disturbance needs finite mean and sigma >= 0, got N({}, {})",
                    d.mean, d.sigma
                )));
            }
        }
        Ok(())
    }

    fn disturbances(&self) -> [(&'static str, Disturbance); 4] {
        [("phase", self.phase), ("alpha", self.alpha), ("beta", self.beta), ("theta", self.theta)]
    }

    /// Propagation time through the fiber in seconds.
    pub fn latency(&self) -> f64 {
        self.length_km * self.delay_per_km
    }
}

/// Fiber: attenuation `A·L`, one random-walk step per parameter shared by
/// every state of the pulse, and propagation delay.
///
/// Draw order is phase, alpha, beta, theta; a parameter with zero sigma
/// consumes no randomness. A pool with nothing on the input route consumes
/// none either.
pub fn apply_fiber<R: Rng + ?Sized>(
    pool: &PhotonPool,
    params: &FiberParams,
    passage: &Passage,
    rng: &mut R,
) -> Result<PhotonPool> {
    params.validate()?;
    if !pool.occupies(passage.input) {
        return Ok(pool.clone());
    }
    let draws = params.disturbances().iter().filter(|(_, d)| d.sigma > 0.0).count() as u64;
    let [d_phase, d_alpha, d_beta, d_theta] = params.disturbances().map(|(_, d)| d.draw(rng));
    let t = transmission(params.alpha_db_per_km * params.length_km);
    let latency = params.latency();
    let mut out = transform_route(pool, passage.input, |s, out| {
        let pol = s.polarization;
        let a = (pol.alpha() + d_alpha).max(0.0);
        let b = (pol.beta() + d_beta).max(0.0);
        let norm = a.hypot(b);
        let polarization = if norm > 0.0 {
            JonesPolarization::new(a / norm, b / norm, wrap_angle(pol.delta_phase() + d_theta))
                .expect("renormalized amplitudes")
        } else {
            pol
        };
        let moved = PhotonState {
            phase: s.phase + d_phase,
            polarization,
            delay: s.delay + latency,
            ..*s
        };
        emit_with_loss(&moved, t, passage.output, passage.loss, out)
    });
    out.record_draws(draws);
    keep_total_norm(pool, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::test_support::{p1, photon_on};
    use crate::components::{apply_bs, BsParams, SplitterPorts};
    use crate::fock::{Photon, RouteId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn passage() -> Passage {
        Passage { input: RouteId::new(0), output: RouteId::new(1), loss: RouteId::loss_channel(0), backward: false }
    }

    #[test]
    fn zero_length_fiber_is_identity() {
        let p = passage();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool = photon_on(p.input, JonesPolarization::new(0.6, 0.8, 0.2).unwrap());
        let out = apply_fiber(&pool, &FiberParams::default(), &p, &mut rng).unwrap();
        let (a, b) = (pool.photons()[0].states()[0], out.photons()[0].states()[0]);
        assert_eq!(b.route, p.output);
        assert_eq!(PhotonState { route: a.route, ..b }, a);
    }

    #[test]
    fn fifty_km_loses_ten_db() {
        let p = passage();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = FiberParams { length_km: 50.0, ..FiberParams::default() };
        let out = apply_fiber(&photon_on(p.input, JonesPolarization::horizontal()), &params, &p, &mut rng).unwrap();
        assert!((p1(&out, p.output) - 0.1).abs() < 1e-12);
        assert!((out.photons()[0].states()[0].delay - 50.0 * DEFAULT_DELAY_PER_KM).abs() < 1e-18);
    }

    #[test]
    fn polarization_walk_keeps_two_photon_norm() {
        let p = passage();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = FiberParams {
            alpha_db_per_km: 0.0,
            length_km: 3.0,
            alpha: Disturbance { mean: 0.1, sigma: 0.2 },
            beta: Disturbance { mean: -0.1, sigma: 0.2 },
            theta: Disturbance { mean: 0.0, sigma: 0.5 },
            ..FiberParams::default()
        };
        for _ in 0..50 {
            let h = photon_on(p.input, JonesPolarization::new(0.9, 0.19f64.sqrt(), 0.4).unwrap());
            let d = photon_on(p.input, JonesPolarization::new(0.6, 0.8, -1.0).unwrap());
            let pool = crate::quantum::merge_pools(h, d).unwrap();
            let pool = crate::fock::normalize_pool(pool).unwrap();
            let out = apply_fiber(&pool, &params, &p, &mut rng).unwrap();
            assert!((crate::fock::pool_norm(&out).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn negative_sigma_is_rejected() {
        let p = passage();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = FiberParams { phase: Disturbance { mean: 0.0, sigma: -0.1 }, ..FiberParams::default() };
        let pool = photon_on(p.input, JonesPolarization::horizontal());
        assert!(apply_fiber(&pool, &params, &p, &mut rng).is_err());
    }

    #[test]
    fn amplitude_walk_is_clamped_and_renormalized() {
        let p = passage();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = FiberParams {
            alpha: Disturbance { mean: -2.0, sigma: 0.0 },
            beta: Disturbance { mean: 0.5, sigma: 0.0 },
            ..FiberParams::default()
        };
        let out = apply_fiber(&photon_on(p.input, JonesPolarization::horizontal()), &params, &p, &mut rng).unwrap();
        let pol = out.photons()[0].states()[0].polarization;
        assert_eq!((pol.alpha(), pol.beta()), (0.0, 1.0));
    }

    #[test]
    fn all_states_of_a_pulse_share_one_draw() {
        let p = passage();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = FiberParams { phase: Disturbance { mean: 0.0, sigma: 1.0 }, ..FiberParams::default() };
        let h = JonesPolarization::horizontal();
        let mut pool = photon_on(p.input, h);
        let extra = pool.photons()[0].states()[0];
        pool.photons_mut().push(Photon::new(vec![PhotonState { delay: 1e-9, ..extra }]).unwrap());
        let out = apply_fiber(&pool, &params, &p, &mut rng).unwrap();
        let phases: Vec<f64> = out.photons().iter().map(|ph| ph.states()[0].phase).collect();
        assert_eq!(phases[0], phases[1]);
        assert_ne!(phases[0], 0.0);
        assert_eq!(out.lineage().draws, 1);
    }

    #[test]
    fn phase_noise_reduces_visibility() {
        // Balanced interferometer with a noisy fiber on one arm: the mean
        // output probability follows E[cos δ] = e^{-σ²/2}.
        let sigma = 0.1;
        let arms = SplitterPorts {
            a: RouteId::new(0),
            b: RouteId::new(1),
            c: RouteId::new(2),
            d: RouteId::new(3),
            loss_a: RouteId::loss_channel(0),
            loss_b: RouteId::loss_channel(1),
        };
        let fiber_in = Passage { input: RouteId::new(3), output: RouteId::new(4), ..passage() };
        let second = SplitterPorts { a: RouteId::new(2), b: RouteId::new(4), c: RouteId::new(5), d: RouteId::new(6), ..arms };
        let params = FiberParams { phase: Disturbance { mean: 0.0, sigma }, ..FiberParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let first = apply_bs(&photon_on(arms.a, JonesPolarization::horizontal()), &BsParams::balanced(), &arms).unwrap();
        let pulses = 10_000;
        let mut values = Vec::with_capacity(pulses);
        for _ in 0..pulses {
            let noisy = apply_fiber(&first, &params, &fiber_in, &mut rng).unwrap();
            let out = apply_bs(&noisy, &BsParams::balanced(), &second).unwrap();
            values.push(p1(&out, second.d));
        }
        let mean = values.iter().sum::<f64>() / pulses as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / pulses as f64;
        let expected = (1.0 + (-sigma * sigma / 2.0f64).exp()) / 2.0;
        assert!((mean - expected).abs() < 4.0 * (var / pulses as f64).sqrt() + 1e-12, "{mean} vs {expected}");
    }
}
