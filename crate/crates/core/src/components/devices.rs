use num_complex::Complex64;

use super::{
    emit_with_loss, keep_total_norm, transform_route, transmission, DeviceParams, Orientation, Passage, SwitchPort,
    SwitchPorts, WaveplateParams,
};
use crate::error::{Error, Result};
use crate::fock::{wrap_angle, JonesPolarization, PhotonPool, PhotonState};

/// Applies one of the single-path devices to the states on `passage.input`.
///
/// Switches and fibers need more than a passage; use [`apply_switch`] and
/// [`super::apply_fiber`] for those.
pub fn apply_simple_device(pool: &PhotonPool, device: &DeviceParams, passage: &Passage) -> Result<PhotonPool> {
    device.validate()?;
    let lossy = |loss_db: f64| {
        let t = transmission(loss_db);
        transform_route(pool, passage.input, |s, out| emit_with_loss(s, t, passage.output, passage.loss, out))
    };
    Ok(match *device {
        DeviceParams::Attenuator { loss_db } | DeviceParams::Circulator { loss_db } => lossy(loss_db),
        DeviceParams::Filter(profile) => transform_route(pool, passage.input, |s, out| {
            let t = transmission(profile.loss_at(s.spectrum.mu()));
            emit_with_loss(s, t, passage.output, passage.loss, out)
        }),
        DeviceParams::PhaseModulator { phase, loss_db } => {
            let t = transmission(loss_db);
            let out = transform_route(pool, passage.input, |s, out| {
                emit_with_loss(&PhotonState { phase, ..*s }, t, passage.output, passage.loss, out)
            });
            keep_total_norm(pool, out)?
        }
        DeviceParams::PolarizationModulator { target, loss_db } => {
            let t = transmission(loss_db);
            let out = transform_route(pool, passage.input, |s, out| {
                let s = PhotonState { polarization: target, ..*s };
                emit_with_loss(&s, t, passage.output, passage.loss, out)
            });
            keep_total_norm(pool, out)?
        }
        DeviceParams::Isolator { loss_db, isolation_db, orientation } => {
            let forward = (orientation == Orientation::AToB) != passage.backward;
            lossy(if forward { loss_db } else { loss_db + isolation_db })
        }
        DeviceParams::Waveplate(params) => return apply_waveplate(pool, &params, passage),
        DeviceParams::FaradayMirror { loss_db, theta } => {
            return apply_faraday_mirror(pool, theta, loss_db, passage)
        }
        DeviceParams::Switch { .. } => {
            return Err(Error::invalid("a switch has two outputs; use apply_switch"))
        }
        DeviceParams::Fiber(_) => return Err(Error::invalid("a fiber draws disturbances; use apply_fiber")),
    })
}

/// 1x2 switch. The total transmission is `10^{-l/10}`; it is shared so the
/// unselected port receives `10^{-l_is/10}` times the power of the
/// selected one.
pub fn apply_switch(
    pool: &PhotonPool,
    loss_db: f64,
    isolation_db: f64,
    selected: SwitchPort,
    ports: &SwitchPorts,
) -> Result<PhotonPool> {
    DeviceParams::Switch { loss_db, isolation_db, selected }.validate()?;
    let eta = transmission(loss_db);
    let iso = transmission(isolation_db);
    let (main, other) = ((eta / (1.0 + iso)).sqrt(), (eta * iso / (1.0 + iso)).sqrt());
    let (to1, to2) = match selected {
        SwitchPort::Out1 => (main, other),
        SwitchPort::Out2 => (other, main),
    };
    let lost = (1.0 - eta).sqrt();
    Ok(transform_route(pool, ports.input, |s, out| {
        for (route, amp) in [(ports.out1, to1), (ports.out2, to2), (ports.loss, lost)] {
            if amp > 0.0 {
                out.push(PhotonState { route, coefficient: s.coefficient * amp, ..*s });
            }
        }
    }))
}

pub(crate) fn stokes(p: JonesPolarization) -> [f64; 4] {
    let (a, b, d) = (p.alpha(), p.beta(), p.delta_phase());
    [1.0, a * a - b * b, 2.0 * a * b * d.cos(), 2.0 * a * b * d.sin()]
}

/// Mueller matrix of a retarder, laid out so that the output Stokes row
/// vector is `S_i · M`.
pub(crate) fn waveplate_mueller(theta: f64, delta: f64) -> [[f64; 4]; 4] {
    let (s, c) = (2.0 * theta).sin_cos();
    let (sd, cd) = delta.sin_cos();
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, c * c + cd * s * s, c * s - c * cd * s, s * sd],
        [0.0, c * s - c * cd * s, cd * c * c + s * s, -c * sd],
        [0.0, -s * sd, c * sd, cd],
    ]
}

/// Jones matrix acting on `(α, β e^{-iδθ})` with the same effect on the
/// Stokes vector as [`waveplate_mueller`]; used for the global phase.
fn waveplate_jones(theta: f64, delta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let p = Complex64::from_polar(1.0, -delta / 2.0);
    let q = p.conj();
    // R(-θ) diag(p, q) R(θ) with R(θ) = [[c, s], [-s, c]].
    [
        [p * c * c + q * s * s, (p - q) * c * s],
        [(p - q) * c * s, p * s * s + q * c * c],
    ]
}

fn mat_vec(m: &[[Complex64; 2]; 2], v: [Complex64; 2]) -> [Complex64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn polarization_from_stokes(s: [f64; 4]) -> JonesPolarization {
    let s1 = s[1].clamp(-1.0, 1.0);
    let alpha = ((1.0 + s1) / 2.0).sqrt();
    let beta = ((1.0 - s1) / 2.0).sqrt();
    let delta = if alpha * beta > 1e-15 { s[3].atan2(s[2]) } else { 0.0 };
    JonesPolarization::new(alpha, beta, delta).expect("Stokes reconstruction is normalized")
}

/// Waveplate: Stokes vector through the Mueller matrix, polarization rebuilt
/// from `S_1` and `atan2(S_3, S_2)`, insertion loss applied.
pub fn apply_waveplate(pool: &PhotonPool, params: &WaveplateParams, passage: &Passage) -> Result<PhotonPool> {
    DeviceParams::Waveplate(*params).validate()?;
    let m = waveplate_mueller(params.offset_angle, params.relative_phase);
    let j = waveplate_jones(params.offset_angle, params.relative_phase);
    let t = transmission(params.loss_db);
    Ok(transform_route(pool, passage.input, |s, out| {
        let si = stokes(s.polarization);
        let mut so = [0.0; 4];
        for (col, value) in so.iter_mut().enumerate() {
            *value = (0..4).map(|row| si[row] * m[row][col]).sum();
        }
        let pol = polarization_from_stokes(so);
        let rotated = mat_vec(&j, s.polarization.jones());
        let target = pol.jones();
        let overlap = target[0].conj() * rotated[0] + target[1].conj() * rotated[1];
        let phase = wrap_angle(s.phase + overlap.arg());
        emit_with_loss(&PhotonState { polarization: pol, phase, ..*s }, t, passage.output, passage.loss, out)
    }))
}

/// Jones matrix of a Faraday mirror with single-pass rotation `theta`.
pub(crate) fn faraday_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let r = |x: f64| Complex64::new(x, 0.0);
    [[r(c * c - s * s), r(-2.0 * s * c)], [r(-2.0 * s * c), r(s * s - c * c)]]
}

/// Faraday mirror: Jones vector times the mirror matrix, re-encoded with any
/// global phase folded into `phase`, and reflected onto `passage.output`.
pub fn apply_faraday_mirror(pool: &PhotonPool, theta: f64, loss_db: f64, passage: &Passage) -> Result<PhotonPool> {
    DeviceParams::FaradayMirror { loss_db, theta }.validate()?;
    let m = faraday_matrix(theta);
    let t = transmission(loss_db);
    Ok(transform_route(pool, passage.input, |s, out| {
        let (pol, global) = JonesPolarization::from_jones(mat_vec(&m, s.polarization.jones()));
        let s = PhotonState { polarization: pol, phase: wrap_angle(s.phase + global), ..*s };
        emit_with_loss(&s, t, passage.output, passage.loss, out)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::components::test_support::{p1, photon_on};
    use crate::components::FilterProfile;
    use crate::fock::{pool_norm, RouteId};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

    fn passage() -> Passage {
        Passage { input: RouteId::new(0), output: RouteId::new(1), loss: RouteId::loss_channel(0), backward: false }
    }

    fn h() -> JonesPolarization {
        JonesPolarization::horizontal()
    }

    fn only_state(pool: &PhotonPool, route: RouteId) -> PhotonState {
        *pool.photons()[0].states().iter().find(|s| s.route == route).unwrap()
    }

    #[test]
    fn attenuator_halves_probability() {
        let p = passage();
        let out = apply_simple_device(&photon_on(p.input, h()), &DeviceParams::Attenuator { loss_db: 3.0103 }, &p)
            .unwrap();
        assert!((p1(&out, p.output) - 0.5).abs() < 1e-5);
        assert!((only_state(&out, p.output).coefficient - 0.5f64.sqrt()).abs() < 1e-5);
        let exact = apply_simple_device(
            &photon_on(p.input, h()),
            &DeviceParams::Attenuator { loss_db: 10.0 * 2f64.log10() },
            &p,
        )
        .unwrap();
        assert!((p1(&exact, p.output) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn states_off_route_are_untouched() {
        let p = passage();
        let pool = photon_on(RouteId::new(7), h());
        let out = apply_simple_device(&pool, &DeviceParams::Attenuator { loss_db: 3.0 }, &p).unwrap();
        assert_eq!(out.photons(), pool.photons());
    }

    #[test]
    fn filter_uses_centre_frequency() {
        let p = passage();
        let band = FilterProfile { low: 1.1e15, high: 1.3e15, in_band_loss_db: 1.0, out_of_band_loss_db: 40.0 };
        let out = apply_simple_device(&photon_on(p.input, h()), &DeviceParams::Filter(band), &p).unwrap();
        assert!((p1(&out, p.output) - transmission(1.0)).abs() < 1e-12);
        let narrow = FilterProfile { low: 1.25e15, ..band };
        let out = apply_simple_device(&photon_on(p.input, h()), &DeviceParams::Filter(narrow), &p).unwrap();
        assert!((p1(&out, p.output) - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn modulators_overwrite_targets() {
        let p = passage();
        let out = apply_simple_device(
            &photon_on(p.input, h()),
            &DeviceParams::PhaseModulator { phase: PI, loss_db: 0.0 },
            &p,
        )
        .unwrap();
        assert_eq!(only_state(&out, p.output).phase, PI);
        let target = JonesPolarization::new(0.6, 0.8, 0.3).unwrap();
        let out = apply_simple_device(
            &photon_on(p.input, h()),
            &DeviceParams::PolarizationModulator { target, loss_db: 0.5 },
            &p,
        )
        .unwrap();
        assert_eq!(only_state(&out, p.output).polarization, target);
        assert!((p1(&out, p.output) - transmission(0.5)).abs() < 1e-12);
    }

    #[test]
    fn isolator_direction() {
        let mut p = passage();
        let iso = DeviceParams::Isolator { loss_db: 0.5, isolation_db: 60.0, orientation: Orientation::AToB };
        let forward = p1(&apply_simple_device(&photon_on(p.input, h()), &iso, &p).unwrap(), p.output);
        p.backward = true;
        let reverse = p1(&apply_simple_device(&photon_on(p.input, h()), &iso, &p).unwrap(), p.output);
        assert!((forward - transmission(0.5)).abs() < 1e-12);
        assert!((reverse / forward - 1e-6).abs() < 1e-15);
        let flipped = DeviceParams::Isolator { loss_db: 0.5, isolation_db: 60.0, orientation: Orientation::BToA };
        let out = apply_simple_device(&photon_on(p.input, h()), &flipped, &p).unwrap();
        assert!((p1(&out, p.output) - forward).abs() < 1e-15);
    }

    #[test]
    fn switch_shares_power_by_isolation() {
        let ports = SwitchPorts {
            input: RouteId::new(0),
            out1: RouteId::new(1),
            out2: RouteId::new(2),
            loss: RouteId::loss_channel(0),
        };
        let out = apply_switch(&photon_on(ports.input, h()), 1.0, 30.0, SwitchPort::Out2, &ports).unwrap();
        let (a, b) = (p1(&out, ports.out1), p1(&out, ports.out2));
        assert!((a + b - transmission(1.0)).abs() < 1e-12);
        assert!((a / b - 1e-3).abs() < 1e-12);
        assert!(apply_simple_device(
            &photon_on(ports.input, h()),
            &DeviceParams::Switch { loss_db: 0.0, isolation_db: 0.0, selected: SwitchPort::Out1 },
            &passage()
        )
        .is_err());
    }

    fn waveplate(delta: f64, theta: f64) -> WaveplateParams {
        WaveplateParams { relative_phase: delta, offset_angle: theta, loss_db: 0.0 }
    }

    #[test]
    fn half_wave_plate() {
        let p = passage();
        let aligned = apply_waveplate(&photon_on(p.input, h()), &waveplate(PI, 0.0), &p).unwrap();
        let pol = only_state(&aligned, p.output).polarization;
        assert!((pol.alpha() - 1.0).abs() < 1e-12);
        let rotated = apply_waveplate(&photon_on(p.input, h()), &waveplate(PI, FRAC_PI_4), &p).unwrap();
        let pol = only_state(&rotated, p.output).polarization;
        assert!(pol.alpha() < 1e-7 && (pol.beta() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_wave_plate_makes_circular_light() {
        let p = passage();
        let out = apply_waveplate(&photon_on(p.input, h()), &waveplate(FRAC_PI_2, FRAC_PI_4), &p).unwrap();
        let pol = only_state(&out, p.output).polarization;
        assert!((pol.alpha() - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((pol.beta() - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((pol.delta_phase().abs() - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn faraday_mirror_examples() {
        let p = passage();
        let out = apply_faraday_mirror(&photon_on(p.input, h()), FRAC_PI_4, 0.0, &p).unwrap();
        let s = only_state(&out, p.output);
        assert!(s.polarization.alpha() < 1e-12 && (s.polarization.beta() - 1.0).abs() < 1e-12);
        let plain = apply_faraday_mirror(&photon_on(p.input, h()), 0.0, 0.0, &p).unwrap();
        let s = only_state(&plain, p.output);
        assert_eq!(s.polarization, h());
        assert_eq!(s.phase, 0.0);
        let m = faraday_matrix(FRAC_PI_4);
        assert!((m[0][1] + 1.0).norm() < 1e-15 && m[0][0].norm() < 1e-15);
    }

    fn arb_pol() -> impl Strategy<Value = JonesPolarization> {
        (0.0..FRAC_PI_2, -PI..PI).prop_map(|(a, d)| JonesPolarization::new(a.cos(), a.sin(), d).unwrap())
    }

    fn full_jones(s: &PhotonState) -> [Complex64; 2] {
        let j = s.polarization.jones();
        let g = Complex64::from_polar(1.0, s.phase);
        [j[0] * g, j[1] * g]
    }

    proptest! {
        #[test]
        fn waveplate_keeps_pure_states_pure(pol in arb_pol(), delta in 0.0..6.28f64, theta in -PI..PI) {
            let p = passage();
            let out = apply_waveplate(&photon_on(p.input, pol), &waveplate(delta, theta), &p).unwrap();
            let s = stokes(only_state(&out, p.output).polarization);
            prop_assert!((s[1] * s[1] + s[2] * s[2] + s[3] * s[3] - 1.0).abs() < 1e-9);
        }

        #[test]
        fn waveplate_mueller_agrees_with_jones(pol in arb_pol(), delta in 0.0..6.28f64, theta in -PI..PI) {
            let p = passage();
            let out = apply_waveplate(&photon_on(p.input, pol), &waveplate(delta, theta), &p).unwrap();
            let got = full_jones(&only_state(&out, p.output));
            let expected = mat_vec(&waveplate_jones(theta, delta), pol.jones());
            prop_assert!((got[0] - expected[0]).norm() < 1e-9);
            prop_assert!((got[1] - expected[1]).norm() < 1e-9);
        }

        #[test]
        fn faraday_mirror_round_trip_restores_input(pol in arb_pol(), phase in -PI..PI) {
            let p = passage();
            let mut pool = photon_on(p.input, pol);
            pool.photons_mut()[0].states_mut()[0].phase = phase;
            let back = Passage { input: p.output, output: RouteId::new(2), ..p };
            let once = apply_faraday_mirror(&pool, FRAC_PI_4, 0.0, &p).unwrap();
            let twice = apply_faraday_mirror(&once, FRAC_PI_4, 0.0, &back).unwrap();
            let before = full_jones(&pool.photons()[0].states()[0]);
            let after = full_jones(&only_state(&twice, back.output));
            prop_assert!((before[0] - after[0]).norm() < 1e-12);
            prop_assert!((before[1] - after[1]).norm() < 1e-12);
        }

        #[test]
        fn lossless_devices_conserve_norm(pol in arb_pol(), delta in 0.0..6.28f64, theta in -PI..PI) {
            let p = passage();
            let pool = photon_on(p.input, pol);
            for device in [
                DeviceParams::Attenuator { loss_db: 0.0 },
                DeviceParams::Waveplate(waveplate(delta, theta)),
                DeviceParams::FaradayMirror { loss_db: 0.0, theta },
                DeviceParams::PhaseModulator { phase: theta, loss_db: 0.0 },
            ] {
                let out = apply_simple_device(&pool, &device, &p).unwrap();
                prop_assert!((pool_norm(&out).unwrap() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn modulators_keep_multi_photon_norm(p1 in arb_pol(), p2 in arb_pol(), target in arb_pol(),
                                             dt in -5e-12..5e-12f64, phase in -PI..PI) {
            let p = passage();
            let mut second = photon_on(p.input, p2).photons()[0].clone();
            second.states_mut()[0].delay = dt;
            let mut photons = photon_on(p.input, p1).photons().to_vec();
            photons.push(second);
            let pool = crate::fock::normalize_pool(PhotonPool::new(photons)).unwrap();
            for device in [
                DeviceParams::PolarizationModulator { target, loss_db: 0.0 },
                DeviceParams::PhaseModulator { phase, loss_db: 0.0 },
            ] {
                let out = apply_simple_device(&pool, &device, &p).unwrap();
                prop_assert!((pool_norm(&out).unwrap() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn loss_scales_detection(loss in 0.0..30.0f64) {
            let p = passage();
            let out = apply_simple_device(&photon_on(p.input, h()), &DeviceParams::Circulator { loss_db: loss }, &p)
                .unwrap();
            prop_assert!((p1(&out, p.output) - transmission(loss)).abs() < 1e-9);
        }
    }
}
