//! Netlists behind the built-in experiments. They are written out next to
//! the results so `photonpool run --config` can replay them.

use std::fmt::Write;

use crate::theory::MziSettings;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

fn experiment(out: &mut String, trials: u64, seed: u64, parameter: &str, unit: &str, sweep: Sweep) {
    let _ = write!(
        out,
        "\n[experiment]\ntrials = {trials}\nseed = {seed}\ncoincidences = [[\"d1\", \"d2\"]]\n\
         sweep = {{ parameter = \"{parameter}\", start = \"{} {unit}\", end = \"{} {unit}\", points = {} }}\n",
        sweep.start, sweep.end, sweep.points
    );
}

fn link(out: &mut String, from: &str, to: &str) {
    let _ = write!(out, "\n[[links]]\nfrom = \"{from}\"\nto = \"{to}\"\n");
}

/// Source, two beam splitters, a phase modulator in the lower arm and a
/// detector on each output. D1 sits on the port that is bright at φ = 0.
pub fn mzi(settings: &MziSettings, sweep: Sweep, trials: u64, seed: u64) -> String {
    let mut out = String::from("[sources.src]\nkind = \"single_photon\"\n");
    let _ = write!(out, "\n[devices.bs1]\nkind = \"beam_splitter\"\nt = {}\n", settings.bs1_t);
    let _ = write!(out, "\n[devices.bs2]\nkind = \"beam_splitter\"\nt = {}\n", settings.bs2_t);
    let _ = write!(
        out,
        "\n[devices.pm]\nkind = \"phase_modulator\"\nphase = \"0 rad\"\nloss = \"{} dB\"\n",
        settings.arm2_loss_db
    );
    let lossy_arm = settings.arm1_loss_db > 0.0;
    if lossy_arm {
        let _ = write!(out, "\n[devices.att]\nkind = \"attenuator\"\nloss = \"{} dB\"\n", settings.arm1_loss_db);
    }
    for d in ["d1", "d2"] {
        let _ = write!(out, "\n[detectors.{d}]\nefficiency = {}\n", settings.efficiency);
    }
    link(&mut out, "src.out", "bs1.a");
    if lossy_arm {
        link(&mut out, "bs1.c", "att.in");
        link(&mut out, "att.out", "bs2.a");
    } else {
        link(&mut out, "bs1.c", "bs2.a");
    }
    link(&mut out, "bs1.d", "pm.in");
    link(&mut out, "pm.out", "bs2.b");
    link(&mut out, "bs2.d", "d1.in");
    link(&mut out, "bs2.c", "d2.in");
    experiment(&mut out, trials, seed, "pm.phase", "rad", sweep);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HomMode {
    /// Sweep the linear polarization of the second photon.
    Polarization,
    /// Sweep the arrival delay of the second photon.
    Delay,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HomSource {
    SinglePhoton,
    WeakCoherent { mean_photon_number: f64 },
}

/// Two sources on the inputs of one balanced beam splitter with a detector
/// on each output.
pub fn hom(mode: HomMode, source: HomSource, sigma: f64, sweep: Sweep, trials: u64, seed: u64) -> String {
    let mut out = String::new();
    for s in ["src1", "src2"] {
        match source {
            HomSource::SinglePhoton => {
                let _ = write!(out, "[sources.{s}]\nkind = \"single_photon\"\n");
            }
            HomSource::WeakCoherent { mean_photon_number } => {
                let _ = write!(
                    out,
                    "[sources.{s}]\nkind = \"weak_coherent\"\nmean_photon_number = {mean_photon_number}\n\
                     phase_randomized = true\n"
                );
            }
        }
        let _ = write!(out, "bandwidth = \"{sigma} rad/s\"\n\n");
    }
    out.push_str("[devices.bs]\nkind = \"beam_splitter\"\nt = 0.5\n\n[detectors.d1]\n\n[detectors.d2]\n");
    link(&mut out, "src1.out", "bs.a");
    link(&mut out, "src2.out", "bs.b");
    link(&mut out, "bs.c", "d1.in");
    link(&mut out, "bs.d", "d2.in");
    let (parameter, unit) = match mode {
        HomMode::Polarization => ("src2.polarization_angle", "rad"),
        HomMode::Delay => ("src2.delay", "s"),
    };
    experiment(&mut out, trials, seed, parameter, unit, sweep);
    out
}
