use std::f64::consts::PI;

use photonpool::engine::netlist::Mode;
use photonpool::engine::{analytic_probabilities, load_topology, run_experiment, ExperimentOptions, Netlist};

fn hom(extra_src2: &str) -> String {
    format!(
        r#"
[sources.src1]
kind = "single_photon"
bandwidth = "65 GHz"

[sources.src2]
kind = "single_photon"
bandwidth = "65 GHz"
{extra_src2}

[devices.bs]
kind = "beam_splitter"

[detectors.d1]
[detectors.d2]

[[links]]
from = "src1"
to = "bs.a"

[[links]]
from = "src2"
to = "bs.b"

[[links]]
from = "bs.c"
to = "d1"

[[links]]
from = "bs.d"
to = "d2"
"#
    )
}

fn coincidence(text: &str) -> f64 {
    let topo = load_topology(text, "hom.toml").unwrap();
    let d1 = topo.node_index("d1").unwrap();
    let d2 = topo.node_index("d2").unwrap();
    analytic_probabilities(&topo, &[(d1, d2)]).unwrap().coincidences[0]
}

#[test]
fn polarization_dip_is_exact() {
    for k in 0..=10 {
        let theta = PI * k as f64 / 10.0;
        let c = coincidence(&hom(&format!("polarization_angle = \"{theta} rad\"")));
        assert!((c - theta.sin().powi(2) / 2.0).abs() < 1e-12, "{theta}: {c}");
    }
}

#[test]
fn delay_dip_is_exact() {
    let sigma = 2.0 * PI * 65e9;
    for k in -6..=6 {
        let dt = k as f64 * 10e-12;
        let c = coincidence(&hom(&format!("delay = \"{dt} s\"")));
        let theory = 0.5 - 0.5 * (-(sigma * dt).powi(2)).exp();
        assert!((c - theory).abs() < 1e-12, "{dt}: {c} vs {theory}");
    }
}

#[test]
fn well_separated_photons_split_independently() {
    let text = hom("delay = \"200 ps\"\n[experiment]\ntrials = 4000\nseed = 5");
    let netlist = Netlist::parse(&text, "hom.toml").unwrap();
    let table = run_experiment(&netlist, &ExperimentOptions::from_netlist(&netlist)).unwrap();
    let c = table.points[0].coincidences[0];
    assert!(c.contains(0.5), "{c:?}");
    let exact = run_experiment(&netlist, &ExperimentOptions { mode: Mode::Analytic, ..ExperimentOptions::from_netlist(&netlist) }).unwrap();
    assert!((exact.points[0].coincidences[0].estimate - 0.5).abs() < 1e-12);
}
