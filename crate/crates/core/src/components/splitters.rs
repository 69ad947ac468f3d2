use super::{check_loss, transform_routes, transmission, SplitterPorts};
use crate::error::{Error, Result};
use crate::fock::{JonesPolarization, PhotonPool, PhotonState, RouteId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsParams {
    splitting_ratio_t: f64,
    splitting_ratio_r: f64,
    loss_db: f64,
}

impl BsParams {
    pub fn new(t: f64, r: f64, loss_db: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&r) {
            return Err(Error::invalid(format!("splitting ratios must lie in [0, 1], got T={t}, R={r}")));
        }
        if (t + r - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("T + R must equal 1, got {}", t + r)));
        }
        check_loss("loss", loss_db)?;
        Ok(BsParams { splitting_ratio_t: t, splitting_ratio_r: r, loss_db })
    }

    pub fn balanced() -> Self {
        BsParams { splitting_ratio_t: 0.5, splitting_ratio_r: 0.5, loss_db: 0.0 }
    }

    pub fn t(&self) -> f64 {
        self.splitting_ratio_t
    }

    pub fn r(&self) -> f64 {
        self.splitting_ratio_r
    }

    pub fn loss_db(&self) -> f64 {
        self.loss_db
    }
}

/// Lossy beam splitter:
/// `a → √(ηT) c − √(ηR) d`, `b → √(ηR) c + √(ηT) d`, with `η = 10^{-l/10}`
/// and the remaining `1 − η` sent to the input port's loss channel.
pub fn apply_bs(pool: &PhotonPool, params: &BsParams, ports: &SplitterPorts) -> Result<PhotonPool> {
    check_ports(ports)?;
    let eta = transmission(params.loss_db);
    let (st, sr) = ((eta * params.t()).sqrt(), (eta * params.r()).sqrt());
    let lost = (1.0 - eta).sqrt();
    Ok(transform_routes(pool, &[ports.a, ports.b], |s, out| {
        let (to_c, to_d, loss) = if s.route == ports.a {
            (st, -sr, ports.loss_a)
        } else {
            (sr, st, ports.loss_b)
        };
        push_scaled(s, ports.c, to_c, out);
        push_scaled(s, ports.d, to_d, out);
        if eta < 1.0 {
            push_scaled(s, loss, lost, out);
        }
    }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PbsParams {
    loss_h_db: f64,
    loss_v_db: f64,
    extinction_ratio: f64,
}

impl PbsParams {
    /// `extinction_ratio` is linear; `f64::INFINITY` gives an ideal splitter.
    pub fn new(loss_h_db: f64, loss_v_db: f64, extinction_ratio: f64) -> Result<Self> {
        check_loss("H loss", loss_h_db)?;
        check_loss("V loss", loss_v_db)?;
        if !(extinction_ratio > 0.0) {
            return Err(Error::invalid(format!("extinction ratio must be > 0, got {extinction_ratio}")));
        }
        Ok(PbsParams { loss_h_db, loss_v_db, extinction_ratio })
    }

    pub fn ideal() -> Self {
        PbsParams { loss_h_db: 0.0, loss_v_db: 0.0, extinction_ratio: f64::INFINITY }
    }

    pub fn extinction_ratio(&self) -> f64 {
        self.extinction_ratio
    }

    /// Power fractions (main port, wrong port).
    fn split(&self) -> (f64, f64) {
        if self.extinction_ratio.is_infinite() {
            (1.0, 0.0)
        } else {
            let re = self.extinction_ratio;
            (re / (re + 1.0), 1.0 / (re + 1.0))
        }
    }
}

/// Polarizing beam splitter with extinction-ratio leakage and
/// polarization-dependent loss.
///
/// Main ports: `a_H → c`, `a_V → d`, `b_H → d`, `b_V → c`. Each component
/// also leaks `1/(R_E+1)` of its power into the other output; the leakage
/// signs on `b` keep the map unitary.
pub fn apply_pbs(pool: &PhotonPool, params: &PbsParams, ports: &SplitterPorts) -> Result<PhotonPool> {
    check_ports(ports)?;
    let (main, leak) = params.split();
    let (main, leak) = (main.sqrt(), leak.sqrt());
    let eta_h = transmission(params.loss_h_db);
    let eta_v = transmission(params.loss_v_db);
    Ok(transform_routes(pool, &[ports.a, ports.b], |s, out| {
        let pol = s.polarization;
        let from_a = s.route == ports.a;
        let loss = if from_a { ports.loss_a } else { ports.loss_b };
        // H and V components as separate states; the V term carries the
        // relative phase of the Jones vector in `phase`.
        let h = PhotonState {
            polarization: JonesPolarization::horizontal(),
            coefficient: s.coefficient * pol.alpha(),
            ..*s
        };
        let v = PhotonState {
            polarization: JonesPolarization::vertical(),
            coefficient: s.coefficient * pol.beta(),
            phase: s.phase - pol.delta_phase(),
            ..*s
        };
        let (h_c, h_d, v_c, v_d) = if from_a {
            (main, leak, leak, main)
        } else {
            (-leak, main, main, -leak)
        };
        for (part, eta, to_c, to_d) in [(h, eta_h, h_c, h_d), (v, eta_v, v_c, v_d)] {
            if part.coefficient == 0.0 {
                continue;
            }
            let amp = eta.sqrt();
            push_scaled(&part, ports.c, amp * to_c, out);
            push_scaled(&part, ports.d, amp * to_d, out);
            if eta < 1.0 {
                push_scaled(&part, loss, (1.0 - eta).sqrt(), out);
            }
        }
    }))
}

fn push_scaled(s: &PhotonState, route: RouteId, factor: f64, out: &mut Vec<PhotonState>) {
    if factor != 0.0 {
        out.push(PhotonState { route, coefficient: s.coefficient * factor, ..*s });
    }
}

fn check_ports(p: &SplitterPorts) -> Result<()> {
    let all = [p.a, p.b, p.c, p.d];
    for (i, r) in all.iter().enumerate() {
        if all[..i].contains(r) {
            return Err(Error::Topology(format!("splitter route {} is wired twice", r.index())));
        }
    }
    if all.iter().any(|r| r.is_loss_channel()) || !p.loss_a.is_loss_channel() || !p.loss_b.is_loss_channel() {
        return Err(Error::Topology("splitter loss routes must be loss channels".into()));
    }
    Ok(())
}
