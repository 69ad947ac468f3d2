//! Independent reference computations used only by tests.
//!
//! Nothing here shares a code path with the production kernels: overlaps
//! are integrated numerically, permanents are expanded over permutations,
//! number distributions are summed over explicit configuration pairs, and
//! Poisson tails are evaluated in exact fixed-point arithmetic.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, Zero};

use crate::fock::{
    configuration_inner, PhotonPool, PhotonState, RouteId, SpectralMode, SquareMatrix,
};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gauss_kronrod(f: &impl Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (lo, hi) = (f(centre - dx), f(centre + dx));
        kronrod += (lo + hi) * WGK[j];
        if j % 2 == 1 {
            gauss += (lo + hi) * WG[j / 2];
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).norm())
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    err: f64,
}

/// Global adaptive integration: the panel with the largest error estimate
/// is bisected until the summed estimate drops below `tol` or `max_panels`
/// is reached.
fn adaptive(f: &impl Fn(f64) -> Complex64, a: f64, b: f64, tol: f64, max_panels: usize) -> Complex64 {
    let panel = |a: f64, b: f64| {
        let (value, err) = gauss_kronrod(f, a, b);
        Panel { a, b, value, err }
    };
    let mut panels = vec![panel(a, b)];
    while panels.len() < max_panels {
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= tol {
            break;
        }
        let worst = (0..panels.len()).max_by(|&i, &j| panels[i].err.total_cmp(&panels[j].err)).unwrap();
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        panels.push(panel(p.a, mid));
        panels.push(panel(mid, p.b));
    }
    panels.iter().map(|p| p.value).sum()
}

/// Adaptive Gauss-Kronrod quadrature of `∫ φ1*(ω) φ2(ω) e^{-iω(τ2-τ1)} dω`
/// over the overlap of the two ±12σ windows.
pub fn spectral_overlap_quadrature(
    s1: SpectralMode,
    tau1: f64,
    s2: SpectralMode,
    tau2: f64,
) -> Complex64 {
    let lo = (s1.mu() - 12.0 * s1.sigma()).max(s2.mu() - 12.0 * s2.sigma());
    let hi = (s1.mu() + 12.0 * s1.sigma()).min(s2.mu() + 12.0 * s2.sigma());
    if lo >= hi {
        return Complex64::new(0.0, 0.0);
    }
    // Integrate in a shifted variable x = ω - lo so the abscissae keep full
    // precision; the constant phase e^{-i lo Δ} is applied afterwards.
    let dt = tau2 - tau1;
    let amp = |mu: f64, sigma: f64, w: f64| {
        (-(w - mu).powi(2) / (4.0 * sigma * sigma)).exp()
            / ((2.0 * std::f64::consts::PI).powf(0.25) * sigma.sqrt())
    };
    let f = |x: f64| {
        let w = lo + x;
        let value = amp(s1.mu(), s1.sigma(), w) * amp(s2.mu(), s2.sigma(), w);
        Complex64::from_polar(value, -x * dt)
    };
    adaptive(&f, 0.0, hi - lo, 1e-13, 4096) * Complex64::from_polar(1.0, -lo * dt)
}

/// Permanent by explicit expansion over all `n!` permutations.
pub fn naive_permanent(m: &SquareMatrix) -> Complex64 {
    fn recurse(m: &SquareMatrix, row: usize, used: &mut [bool], acc: Complex64) -> Complex64 {
        let n = m.dim();
        if row == n {
            return acc;
        }
        let mut total = Complex64::new(0.0, 0.0);
        for col in 0..n {
            if !used[col] {
                used[col] = true;
                total += recurse(m, row + 1, used, acc * m[(row, col)]);
                used[col] = false;
            }
        }
        total
    }
    let mut used = vec![false; m.dim()];
    recurse(m, 0, &mut used, Complex64::new(1.0, 0.0))
}

fn configurations(pool: &PhotonPool, keep: &dyn Fn(&PhotonState) -> bool) -> Vec<Vec<PhotonState>> {
    let mut configs: Vec<Vec<PhotonState>> = vec![Vec::new()];
    for photon in pool.photons() {
        let mut next = Vec::new();
        for c in &configs {
            for s in photon.states().iter().filter(|s| keep(s)) {
                let mut grown = c.clone();
                grown.push(*s);
                next.push(grown);
            }
        }
        configs = next;
    }
    configs
}

/// Pool norm over detectable routes by summing every configuration pair.
pub fn configuration_sum_norm(pool: &PhotonPool) -> f64 {
    let configs = configurations(pool, &|s| !s.route.is_loss_channel());
    let mut total = Complex64::new(0.0, 0.0);
    for a in &configs {
        for b in &configs {
            total += configuration_inner(a, b).unwrap();
        }
    }
    total.re
}

/// Photon-number distribution on `route` by summing configuration pairs
/// that both place exactly `k` states on the route, divided by the full
/// norm (loss channels included).
pub fn configuration_sum_distribution(pool: &PhotonPool, route: RouteId) -> Vec<f64> {
    let configs = configurations(pool, &|_| true);
    let n = pool.len();
    let count = |c: &[PhotonState]| c.iter().filter(|s| s.route == route).count();
    let mut p = vec![0.0; n + 1];
    let mut norm = 0.0;
    for a in &configs {
        let ka = count(a);
        for b in &configs {
            let v = configuration_inner(a, b).unwrap().re;
            norm += v;
            if count(b) == ka {
                p[ka] += v;
            }
        }
    }
    p.iter().map(|x| x / norm).collect()
}

/// Fixed-point decimal with `DIGITS` fractional digits.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fixed(BigInt);

const DIGITS: u32 = 160;

impl Fixed {
    fn scale() -> BigInt {
        BigInt::from(10u32).pow(DIGITS)
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Fixed(BigInt::from(num) * Self::scale() / BigInt::from(den))
    }

    pub fn one() -> Self {
        Fixed(Self::scale())
    }

    fn mul(&self, other: &Fixed) -> Fixed {
        Fixed(&self.0 * &other.0 / Self::scale())
    }

    fn add(&self, other: &Fixed) -> Fixed {
        Fixed(&self.0 + &other.0)
    }

    fn sub(&self, other: &Fixed) -> Fixed {
        Fixed(&self.0 - &other.0)
    }

    fn pow(&self, mut e: u64) -> Fixed {
        let mut base = self.clone();
        let mut acc = Fixed::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }
}

/// `1 - (Σ_{n=0}^{n_t} e^{-μ} μⁿ/n!)^{N}` in exact fixed point, with
/// `μ = mu_num / mu_den`.
pub fn session_failure_probability(mu_num: i64, mu_den: i64, n_t: u32, trials: u64) -> Fixed {
    // e^{-μ} by its Taylor series; terms fall below the resolution quickly.
    let mut term = Fixed::one();
    let mut exp_neg = Fixed::one();
    let mut k: i64 = 1;
    loop {
        term = Fixed(-(&term.0) * BigInt::from(mu_num) / (BigInt::from(mu_den) * BigInt::from(k)));
        if term.0.is_zero() {
            break;
        }
        exp_neg = exp_neg.add(&term);
        k += 1;
    }
    let mut pmf = exp_neg;
    let mut cdf = pmf.clone();
    for n in 1..=n_t as i64 {
        pmf = Fixed(&pmf.0 * BigInt::from(mu_num) / (BigInt::from(mu_den) * BigInt::from(n)));
        cdf = cdf.add(&pmf);
    }
    Fixed::one().sub(&cdf.pow(trials))
}

/// Whether `value <= num/den`.
pub fn fixed_le_ratio(value: &Fixed, num: i64, den: i64) -> bool {
    *value <= Fixed::from_ratio(num, den)
}
