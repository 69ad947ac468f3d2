//! Photon-number projection on a route: distributions, Monte-Carlo
//! sampling, collapse with pruning, and pool merging.
//!
//! All distributions come from one identity. Split every photon mode into
//! its part on the measured route (`B`) and everything else (`A`, loss
//! channels included). Then `perm(A + x·B)` is a polynomial in `x` whose
//! `k`-th coefficient is the unnormalized probability of exactly `k`
//! photons on the route. The coefficients are recovered exactly by
//! evaluating the permanent at the `n+1` roots of unity.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fock::{
    mode_gram, normalize_pool, permanent_capped, Lineage, Photon, PhotonPool, PoolId, RouteId,
    SquareMatrix,
};

const PROBABILITY_SLACK: f64 = 1e-9;
const DEGENERATE_PROBABILITY: f64 = 1e-15;

/// Probabilities `p_0..p_n` of finding `k` photons on one route.
#[derive(Clone, Debug, PartialEq)]
pub struct NumberDistribution {
    route: RouteId,
    probabilities: Vec<f64>,
}

impl NumberDistribution {
    /// Validates and clamps: each entry within `[-1e-9, 1+1e-9]`, total
    /// within `1e-9` of one.
    pub fn new(route: RouteId, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::invalid("empty number distribution"));
        }
        for &p in &probabilities {
            if !(p.is_finite() && p >= -PROBABILITY_SLACK && p <= 1.0 + PROBABILITY_SLACK) {
                return Err(Error::invalid(format!("probability {p} out of range")));
            }
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SLACK {
            return Err(Error::invalid(format!("probabilities sum to {total}")));
        }
        let probabilities = probabilities.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(NumberDistribution { route, probabilities })
    }

    pub fn route(&self) -> RouteId {
        self.route
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.probabilities.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probabilities.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}

/// Joint photon-number distribution over several routes.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    routes: Vec<RouteId>,
    max_count: usize,
    probabilities: Vec<f64>,
}

impl JointDistribution {
    pub fn routes(&self) -> &[RouteId] {
        &self.routes
    }

    pub fn max_count(&self) -> usize {
        self.max_count
    }

    fn flat_index(&self, counts: &[usize]) -> Option<usize> {
        let base = self.max_count + 1;
        let mut idx = 0;
        for (d, &k) in counts.iter().enumerate().rev() {
            if k > self.max_count || d >= self.routes.len() {
                return None;
            }
            idx = idx * base + k;
        }
        Some(idx)
    }

    /// Probability of the given per-route counts (in the order of `routes`).
    pub fn probability(&self, counts: &[usize]) -> f64 {
        if counts.len() != self.routes.len() {
            return 0.0;
        }
        self.flat_index(counts).map_or(0.0, |i| self.probabilities[i])
    }

    /// Iterates over `(counts, probability)` for every grid point.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let base = self.max_count + 1;
        let dims = self.routes.len();
        self.probabilities.iter().enumerate().map(move |(mut i, &p)| {
            let mut counts = vec![0; dims];
            for c in counts.iter_mut() {
                *c = i % base;
                i /= base;
            }
            (counts, p)
        })
    }
}

fn roots_of_unity(m: usize) -> Vec<Complex64> {
    (0..m).map(|j| Complex64::from_polar(1.0, TAU * j as f64 / m as f64)).collect()
}

/// Exact joint photon-number distribution on `routes` (distinct).
pub fn joint_number_distribution(pool: &PhotonPool, routes: &[RouteId]) -> Result<JointDistribution> {
    pool.check_cap()?;
    for (i, r) in routes.iter().enumerate() {
        if routes[..i].contains(r) {
            return Err(Error::invalid("routes must be distinct"));
        }
    }
    let n = pool.len();
    let dims = routes.len();
    let photons = pool.photons();
    let rest = mode_gram(photons, |s| !routes.contains(&s.route));
    let parts: Vec<SquareMatrix> =
        routes.iter().map(|&r| mode_gram(photons, |s| s.route == r)).collect();
    let base = n + 1;
    let grid = base.pow(dims as u32);
    let roots = roots_of_unity(base);

    let mut values = vec![Complex64::new(0.0, 0.0); grid];
    for (g, value) in values.iter_mut().enumerate() {
        let mut m = rest.clone();
        let mut i = g;
        for part in &parts {
            m = m.add_scaled(roots[i % base], part);
            i /= base;
        }
        *value = permanent_capped(&m, pool.cap())?;
    }
    let norm = values[0].re;
    if !(norm > 0.0) {
        return Err(Error::DegenerateState(format!("pool {} has zero norm", pool.id().get())));
    }

    // Inverse DFT along each axis in turn.
    let mut coeffs = values;
    let mut stride = 1;
    for _ in 0..dims {
        let mut next = coeffs.clone();
        for start in 0..grid {
            if (start / stride) % base != 0 {
                continue;
            }
            for k in 0..base {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..base {
                    acc += coeffs[start + j * stride] * roots[(j * k) % base].conj();
                }
                next[start + k * stride] = acc / base as f64;
            }
        }
        coeffs = next;
        stride *= base;
    }

    let probabilities = coeffs
        .iter()
        .map(|c| {
            let p = c.re / norm;
            if p < -PROBABILITY_SLACK || p > 1.0 + PROBABILITY_SLACK {
                Err(Error::invalid(format!("probability {p} out of range")))
            } else {
                Ok(p.clamp(0.0, 1.0))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(JointDistribution { routes: routes.to_vec(), max_count: n, probabilities })
}

/// Distribution of the number of photons found on `route`.
pub fn route_number_distribution(pool: &PhotonPool, route: RouteId) -> Result<NumberDistribution> {
    let joint = joint_number_distribution(pool, &[route])?;
    NumberDistribution::new(route, joint.probabilities)
}

/// Inverse-CDF draw from a number distribution, one uniform per call.
pub fn sample_count<R: Rng + ?Sized>(dist: &NumberDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let last = dist.probabilities.len() - 1;
    for (k, p) in dist.probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left the cumulative sum just below one: take the last
    // outcome with non-zero weight.
    dist.probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(last)
}

/// Result of projecting a pool onto `detected_count` photons on a route.
#[derive(Clone, Debug)]
pub struct CollapseOutcome {
    pub detected_count: usize,
    /// Indices, in the input pool, of the photons taken as detected.
    pub removed_photon_ids: Vec<usize>,
    pub surviving_pool: PhotonPool,
}

fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = u32> {
    (0u32..(1u32 << n)).filter(move |m| m.count_ones() as usize == k)
}

fn members(mask: u32, n: usize, inside: bool) -> Vec<usize> {
    (0..n).filter(|&i| (mask >> i & 1 == 1) == inside).collect()
}

/// Projects `pool` onto exactly `k` photons on `route`.
///
/// The detected subset `S` (|S| = k) is drawn with weight equal to the norm
/// of the component where exactly the photons of `S` sit on the route.
/// Those photons are removed, every other photon loses its states on the
/// route, photons left only in loss channels are dropped, and the remainder
/// is renormalized. Consumes one uniform draw. Asking for an outcome of
/// zero probability is a [`Error::DegenerateState`].
pub fn collapse<R: Rng + ?Sized>(
    pool: &PhotonPool,
    route: RouteId,
    k: usize,
    rng: &mut R,
) -> Result<CollapseOutcome> {
    pool.check_cap()?;
    let n = pool.len();
    if k > n {
        return Err(Error::invalid(format!("cannot detect {k} photons from a pool of {n}")));
    }
    if route_number_distribution(pool, route)?.probability(k) <= DEGENERATE_PROBABILITY {
        return Err(Error::DegenerateState(format!(
            "outcome {k} on route {} has zero probability in pool {}",
            route.index(),
            pool.id().get()
        )));
    }
    let photons = pool.photons();
    let on_route = mode_gram(photons, |s| s.route == route);
    let off_route = mode_gram(photons, |s| s.route != route);

    let mut candidates = Vec::new();
    let mut total = 0.0;
    for mask in subsets_of_size(n, k) {
        let inside = members(mask, n, true);
        let outside = members(mask, n, false);
        let w_in = permanent_capped(&on_route.select(&inside, &inside), pool.cap())?.re;
        let w_out = permanent_capped(&off_route.select(&outside, &outside), pool.cap())?.re;
        let w = (w_in * w_out).max(0.0);
        total += w;
        candidates.push((mask, w));
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateState(format!(
            "no component of pool {} has {k} photons on route {}",
            pool.id().get(),
            route.index()
        )));
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = candidates.iter().rev().find(|c| c.1 > 0.0).map(|c| c.0).unwrap_or(0);
    for &(mask, w) in &candidates {
        acc += w;
        if target < acc && w > 0.0 {
            chosen = mask;
            break;
        }
    }

    let survivors: Vec<Photon> = photons
        .iter()
        .enumerate()
        .filter(|(i, _)| chosen >> i & 1 == 0)
        .filter_map(|(_, p)| {
            let states: Vec<_> = p.states().iter().copied().filter(|s| s.route != route).collect();
            let photon = Photon::from_states_unchecked(states);
            photon.is_live().then_some(photon)
        })
        .collect();

    let mut lineage = pool.lineage().clone();
    lineage.draws += 1;
    let next = PhotonPool::new(survivors).with_cap(pool.cap()).retire_into(pool.id(), lineage);
    let surviving_pool = normalize_pool(next)?;
    Ok(CollapseOutcome {
        detected_count: k,
        removed_photon_ids: members(chosen, n, true),
        surviving_pool,
    })
}

/// Joins two independent pools into one product pool with a fresh id.
pub fn merge_pools(a: PhotonPool, b: PhotonPool) -> Result<PhotonPool> {
    if a.id() == b.id() {
        return Err(Error::invalid(format!("pool {} cannot be merged with itself", a.id().get())));
    }
    let cap = a.cap().min(b.cap());
    let lineage = Lineage {
        parents: vec![a.id(), b.id()],
        draws: a.lineage().draws + b.lineage().draws,
    };
    let mut photons = a.photons().to_vec();
    photons.extend_from_slice(b.photons());
    let merged = PhotonPool::new(photons).with_cap(cap).retire_into(PoolId::fresh(), lineage);
    merged.check_cap()?;
    Ok(merged)
}
