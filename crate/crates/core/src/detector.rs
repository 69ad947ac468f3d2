//! Single-photon detector: efficiency, dark counts, afterpulsing, jitter and
//! gating on top of the photon-number projection.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fock::{PhotonPool, RouteId};
use crate::quantum::{collapse, route_number_distribution, sample_count};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpdParams {
    /// Detection efficiency η.
    pub efficiency: f64,
    /// Dark-count probability per second; multiplied by the gate width.
    pub dark_count_rate: f64,
    pub afterpulse_prob: f64,
    /// Gaussian timing jitter σ in seconds.
    pub timing_jitter: f64,
    pub resolves_photon_number: bool,
    pub enabled: bool,
    /// Gate width δt in seconds; 0 means free-running with no dark counts.
    pub gate_width: f64,
    /// Spacing of gate centres, normally the source repetition period.
    pub gate_period: f64,
    /// Time of the first gate centre.
    pub gate_offset: f64,
}

impl Default for SpdParams {
    fn default() -> Self {
        SpdParams {
            efficiency: 1.0,
            dark_count_rate: 0.0,
            afterpulse_prob: 0.0,
            timing_jitter: 0.0,
            resolves_photon_number: false,
            enabled: true,
            gate_width: 0.0,
            gate_period: 1e-6,
            gate_offset: 0.0,
        }
    }
}

impl SpdParams {
    /// Dark-count probability per gate, `p_d·δt`.
    pub fn dark_probability(&self) -> f64 {
        self.dark_count_rate * self.gate_width
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("efficiency", self.efficiency)?;
        unit("afterpulse probability", self.afterpulse_prob)?;
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        nonneg("dark count rate", self.dark_count_rate)?;
        nonneg("timing jitter", self.timing_jitter)?;
        nonneg("gate width", self.gate_width)?;
        if !(self.gate_period > 0.0 && self.gate_period.is_finite()) {
            return Err(Error::invalid(format!("gate period must be > 0, got {}", self.gate_period)));
        }
        if !self.gate_offset.is_finite() {
            return Err(Error::invalid("gate offset must be finite"));
        }
        unit("dark count probability per gate", self.dark_probability())
    }

    /// Whether `arrival` falls within `δt/2` of a gate centre.
    pub fn in_gate(&self, arrival: f64) -> bool {
        if self.gate_width == 0.0 {
            return true;
        }
        let phase = (arrival - self.gate_offset).rem_euclid(self.gate_period);
        let distance = phase.min(self.gate_period - phase);
        distance <= self.gate_width / 2.0
    }
}

/// `1 − (1−η)ⁿ (1 − p_d·δt)(1 − p_a)`, clamped to `[0, 1]`.
pub fn click_probability(n: usize, params: &SpdParams) -> Result<f64> {
    params.validate()?;
    Ok(click_probability_with(n, params, params.afterpulse_prob))
}

fn click_probability_with(n: usize, params: &SpdParams, afterpulse: f64) -> f64 {
    let miss = (1.0 - params.efficiency).powi(n.min(i32::MAX as usize) as i32);
    (1.0 - miss * (1.0 - params.dark_probability()) * (1.0 - afterpulse)).clamp(0.0, 1.0)
}

/// Supplies the afterpulse probability for each detection and observes the
/// outcome. The default is the constant from [`SpdParams`].
pub trait AfterpulseModel: Send {
    fn probability(&mut self, params: &SpdParams) -> f64;

    fn observe(&mut self, _clicked: bool, _timestamp: f64) {}
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantAfterpulse;

impl AfterpulseModel for ConstantAfterpulse {
    fn probability(&mut self, params: &SpdParams) -> f64 {
        params.afterpulse_prob
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRecord {
    pub detector_id: String,
    pub trial_index: u64,
    pub clicked: bool,
    /// Photons found on the route; reported only by number-resolving detectors.
    pub photon_count: Option<usize>,
    pub timestamp: f64,
    pub aborted: bool,
}

#[derive(Clone, Debug)]
pub struct Detection {
    pub record: DetectionRecord,
    /// Photons sampled on the route, whether or not they were reported.
    pub sampled_count: Option<usize>,
    /// What is left of the pool; `None` when the projection was degenerate.
    pub surviving_pool: Option<PhotonPool>,
}

/// Everything a detector needs to know about one arrival.
#[derive(Clone, Copy, Debug)]
pub struct Arrival<'a> {
    pub detector_id: &'a str,
    pub route: RouteId,
    pub time: f64,
    pub trial_index: u64,
}

/// Projects `pool` onto the detector's route and decides the click.
///
/// Random draws, in order: photon number, detected subset, click, jitter.
/// A disabled or out-of-gate detector still absorbs the photons on its
/// route but never clicks and takes no click or jitter draw.
pub fn detect<R: Rng + ?Sized>(
    pool: &PhotonPool,
    arrival: Arrival<'_>,
    params: &SpdParams,
    afterpulse: &mut dyn AfterpulseModel,
    rng: &mut R,
) -> Result<Detection> {
    params.validate()?;
    let mut record = DetectionRecord {
        detector_id: arrival.detector_id.to_string(),
        trial_index: arrival.trial_index,
        clicked: false,
        photon_count: None,
        timestamp: arrival.time,
        aborted: false,
    };
    let projected = route_number_distribution(pool, arrival.route).and_then(|dist| {
        let k = sample_count(&dist, rng);
        collapse(pool, arrival.route, k, rng)
    });
    let outcome = match projected {
        Ok(outcome) => outcome,
        Err(Error::DegenerateState(_)) => {
            record.aborted = true;
            return Ok(Detection { record, sampled_count: None, surviving_pool: None });
        }
        Err(e) => return Err(e),
    };
    let k = outcome.detected_count;
    let mut surviving = outcome.surviving_pool;
    if params.enabled && params.in_gate(arrival.time) {
        let p_a = afterpulse.probability(params).clamp(0.0, 1.0);
        let u: f64 = rng.random();
        record.clicked = u < click_probability_with(k, params, p_a);
        let mut draws = 1;
        if params.timing_jitter > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            record.timestamp += params.timing_jitter * z;
            draws += 1;
        }
        surviving.record_draws(draws);
        afterpulse.observe(record.clicked, record.timestamp);
        if params.resolves_photon_number {
            record.photon_count = Some(k);
        }
    }
    Ok(Detection { record, sampled_count: Some(k), surviving_pool: Some(surviving) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::test_support::photon_on;
    use crate::fock::{JonesPolarization, Photon, PhotonState, SpectralMode};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spd(efficiency: f64, dark_per_gate: f64, afterpulse: f64) -> SpdParams {
        SpdParams {
            efficiency,
            dark_count_rate: dark_per_gate / 1e-9,
            afterpulse_prob: afterpulse,
            gate_width: if dark_per_gate > 0.0 { 1e-9 } else { 0.0 },
            ..SpdParams::default()
        }
    }

    fn arrival(route: RouteId) -> Arrival<'static> {
        Arrival { detector_id: "d1", route, time: 0.0, trial_index: 0 }
    }

    #[test]
    fn click_probability_examples() {
        assert_eq!(click_probability(0, &spd(0.5, 0.0, 0.0)).unwrap(), 0.0);
        assert!((click_probability(1, &spd(0.2, 0.0, 0.0)).unwrap() - 0.2).abs() < 1e-15);
        let p = click_probability(2, &spd(0.5, 1e-6, 0.01)).unwrap();
        assert!((p - (1.0 - 0.25 * (1.0 - 1e-6) * 0.99)).abs() < 1e-15);
        assert!((p - 0.7525002475).abs() < 1e-12);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(click_probability(1, &spd(1.5, 0.0, 0.0)).is_err());
        assert!(click_probability(1, &spd(0.5, 0.0, -0.1)).is_err());
        let too_dark = SpdParams { dark_count_rate: 2e9, gate_width: 1e-9, ..SpdParams::default() };
        assert!(too_dark.validate().is_err());
    }

    #[test]
    fn gate_window() {
        let p = SpdParams { gate_width: 1e-9, gate_period: 1e-6, gate_offset: 2e-9, ..SpdParams::default() };
        assert!(p.in_gate(2e-9));
        assert!(p.in_gate(2.4e-9));
        assert!(!p.in_gate(3e-9));
        assert!(p.in_gate(1e-6 + 1.6e-9));
        assert!(SpdParams::default().in_gate(123.456));
    }

    #[test]
    fn ideal_detector_always_clicks_on_a_photon() {
        let route = RouteId::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let pool = photon_on(route, JonesPolarization::horizontal());
            let d = detect(&pool, arrival(route), &SpdParams::default(), &mut ConstantAfterpulse, &mut rng).unwrap();
            assert!(d.record.clicked);
            assert!(d.surviving_pool.unwrap().is_empty());
        }
    }

    #[test]
    fn disabled_detector_absorbs_silently() {
        let route = RouteId::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = SpdParams { enabled: false, ..SpdParams::default() };
        let pool = photon_on(route, JonesPolarization::horizontal());
        let d = detect(&pool, arrival(route), &params, &mut ConstantAfterpulse, &mut rng).unwrap();
        assert!(!d.record.clicked);
        assert!(d.surviving_pool.unwrap().is_empty());
        assert_eq!(d.sampled_count, Some(1));
    }

    #[test]
    fn out_of_gate_arrival_never_clicks() {
        let route = RouteId::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = SpdParams { gate_width: 1e-9, ..SpdParams::default() };
        let pool = photon_on(route, JonesPolarization::horizontal());
        let late = Arrival { time: 5e-9, ..arrival(route) };
        let d = detect(&pool, late, &params, &mut ConstantAfterpulse, &mut rng).unwrap();
        assert!(!d.record.clicked);
    }

    #[test]
    fn dark_counts_follow_binomial() {
        let route = RouteId::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = spd(1.0, 1e-3, 0.0);
        let vacuum = PhotonPool::empty();
        let gates = 100_000;
        let mut clicks = 0;
        for _ in 0..gates {
            let d = detect(&vacuum, arrival(route), &params, &mut ConstantAfterpulse, &mut rng).unwrap();
            clicks += d.record.clicked as usize;
        }
        assert!((clicks as f64 - 100.0).abs() < 4.0 * 100f64.sqrt(), "{clicks}");
    }

    #[test]
    fn number_resolving_reports_count() {
        let route = RouteId::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mode = SpectralMode::new(1.2e15, 4e11).unwrap();
        let s = PhotonState { coefficient: 0.5f64.powf(0.25), ..PhotonState::new(route, mode, JonesPolarization::horizontal()) };
        let pool = PhotonPool::new(vec![Photon::new(vec![s]).unwrap(), Photon::new(vec![s]).unwrap()]);
        let params = SpdParams { resolves_photon_number: true, ..SpdParams::default() };
        let d = detect(&pool, arrival(route), &params, &mut ConstantAfterpulse, &mut rng).unwrap();
        assert_eq!(d.record.photon_count, Some(2));
        assert!(d.record.clicked);
    }

    #[test]
    fn jitter_moves_timestamp_only() {
        let route = RouteId::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = SpdParams { timing_jitter: 50e-12, gate_width: 1e-9, ..SpdParams::default() };
        let pool = photon_on(route, JonesPolarization::horizontal());
        let mut spread = 0.0f64;
        for _ in 0..200 {
            // Arrival right at the gate edge: jitter must not push it out.
            let edge = Arrival { time: 0.5e-9, ..arrival(route) };
            let d = detect(&pool, edge, &params, &mut ConstantAfterpulse, &mut rng).unwrap();
            assert!(d.record.clicked);
            spread = spread.max((d.record.timestamp - 0.5e-9).abs());
        }
        assert!(spread > 0.0 && spread < 10.0 * 50e-12);
    }

    struct Counting(usize);

    impl AfterpulseModel for Counting {
        fn probability(&mut self, _: &SpdParams) -> f64 {
            if self.0 > 0 { 1.0 } else { 0.0 }
        }

        fn observe(&mut self, clicked: bool, _: f64) {
            self.0 += clicked as usize;
        }
    }

    #[test]
    fn afterpulse_hook_sees_history() {
        let route = RouteId::new(0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut hook = Counting(0);
        let params = SpdParams::default();
        let first = detect(&photon_on(route, JonesPolarization::horizontal()), arrival(route), &params, &mut hook, &mut rng)
            .unwrap();
        assert!(first.record.clicked);
        let second = detect(&PhotonPool::empty(), arrival(route), &params, &mut hook, &mut rng).unwrap();
        assert!(second.record.clicked);
    }

    proptest! {
        #[test]
        fn click_probability_is_monotone(n in 0usize..6, eta in 0.0..1.0f64, dark in 0.0..0.5f64,
                                         pa in 0.0..1.0f64, bump in 0.0..0.5f64) {
            let base = click_probability(n, &spd(eta, dark, pa)).unwrap();
            prop_assert!(click_probability(n + 1, &spd(eta, dark, pa)).unwrap() >= base);
            prop_assert!(click_probability(n, &spd((eta + bump).min(1.0), dark, pa)).unwrap() >= base);
            prop_assert!(click_probability(n, &spd(eta, dark + bump, pa)).unwrap() >= base - 1e-15);
            prop_assert!(click_probability(n, &spd(eta, dark, (pa + bump).min(1.0))).unwrap() >= base);
        }
    }
}
