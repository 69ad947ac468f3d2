use num_complex::Complex64;

use super::permanent::{permanent_capped, SquareMatrix};
use super::{state_overlap, Photon, PhotonPool, PhotonState};
use crate::error::{Error, Result};

pub const DEFAULT_PHOTON_CAP: usize = 8;

/// Imaginary residue tolerated on quantities that must be real.
const REAL_RESIDUE: f64 = 1e-9;

/// Norms below this are treated as zero when renormalizing.
const DEGENERATE_NORM: f64 = 1e-24;

/// Gram matrix of photon modes restricted by `keep`:
/// `G[m][m'] = Σ ⟨s|s'⟩` over states `s` of photon `m` and `s'` of photon
/// `m'` that pass the filter.
///
/// The permanent is linear in every row and column, so the permanent of
/// this matrix equals the sum of [`configuration_inner`] over all pairs of
/// configurations drawn from the kept states.
pub fn mode_gram(photons: &[Photon], keep: impl Fn(&PhotonState) -> bool) -> SquareMatrix {
    let kept: Vec<Vec<&PhotonState>> =
        photons.iter().map(|p| p.states().iter().filter(|s| keep(s)).collect()).collect();
    let n = photons.len();
    let mut g = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in &kept[i] {
                for b in &kept[j] {
                    acc += state_overlap(a, b);
                }
            }
            g[(i, j)] = acc;
            if i != j {
                g[(j, i)] = acc.conj();
            } else {
                g[(i, i)] = Complex64::new(acc.re, 0.0);
            }
        }
    }
    g
}

/// `⟨0| Π b_i Π a_j† |0⟩` for two configurations of single-photon states.
pub fn configuration_inner(a: &[PhotonState], b: &[PhotonState]) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "configuration lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let g = SquareMatrix::from_fn(a.len(), |i, j| state_overlap(&a[i], &b[j]));
    permanent_capped(&g, usize::MAX)
}

pub(crate) fn real_part(value: Complex64, what: &str) -> f64 {
    debug_assert!(
        value.im.abs() <= REAL_RESIDUE * value.re.abs().max(1.0),
        "{what} has imaginary residue {}",
        value.im
    );
    value.re.max(0.0)
}

/// Norm of the pool over detectable routes: the probability that no photon
/// has been lost to a loss channel.
pub fn pool_norm(pool: &PhotonPool) -> Result<f64> {
    pool.check_cap()?;
    let g = mode_gram(pool.photons(), |s| !s.route.is_loss_channel());
    Ok(real_part(permanent_capped(&g, pool.cap())?, "pool norm"))
}

/// Norm of the full state, loss channels included. Equals 1 for a
/// normalized pool.
pub fn total_norm(pool: &PhotonPool) -> Result<f64> {
    pool.check_cap()?;
    let g = mode_gram(pool.photons(), |_| true);
    Ok(real_part(permanent_capped(&g, pool.cap())?, "total norm"))
}

/// Rescales every coefficient uniformly so the full state has unit norm.
pub fn normalize_pool(mut pool: PhotonPool) -> Result<PhotonPool> {
    if pool.is_empty() {
        return Ok(pool);
    }
    let norm = total_norm(&pool)?;
    if !(norm > DEGENERATE_NORM) {
        return Err(Error::DegenerateState(format!(
            "pool {} has norm {norm:e}",
            pool.id().get()
        )));
    }
    let n = pool.len() as f64;
    pool.scale_coefficients(norm.powf(-0.5 / n));
    Ok(pool)
}
