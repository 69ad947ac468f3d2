use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use super::pool::DEFAULT_PHOTON_CAP;
use crate::error::{Error, Result};

/// Dense row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("matrix is not square"));
        }
        Ok(SquareMatrix { n, data: rows.concat() })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Submatrix keeping the given rows and columns, in order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> SquareMatrix {
        debug_assert_eq!(rows.len(), cols.len());
        SquareMatrix::from_fn(rows.len(), |i, j| self[(rows[i], cols[j])])
    }

    /// `self + x·other`, elementwise.
    pub fn add_scaled(&self, x: Complex64, other: &SquareMatrix) -> SquareMatrix {
        debug_assert_eq!(self.n, other.n);
        SquareMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + x * b).collect(),
        }
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// Permanent with the default dimension cap.
pub fn permanent(m: &SquareMatrix) -> Result<Complex64> {
    permanent_capped(m, DEFAULT_PHOTON_CAP)
}

/// Ryser's formula with Gray-code subset enumeration, `O(n 2^n)`.
pub fn permanent_capped(m: &SquareMatrix, cap: usize) -> Result<Complex64> {
    let n = m.dim();
    if n > cap {
        return Err(Error::Capacity { what: "permanent dimension", got: n, cap });
    }
    Ok(ryser(m))
}

fn ryser(m: &SquareMatrix) -> Complex64 {
    let n = m.dim();
    match n {
        0 => return Complex64::new(1.0, 0.0),
        1 => return m[(0, 0)],
        2 => return m[(0, 0)] * m[(1, 1)] + m[(0, 1)] * m[(1, 0)],
        _ => {}
    }
    let mut row_sums = vec![Complex64::new(0.0, 0.0); n];
    let mut in_subset = vec![false; n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let j = k.trailing_zeros() as usize;
        gray ^= 1 << j;
        let sign = if in_subset[j] { -1.0 } else { 1.0 };
        in_subset[j] = !in_subset[j];
        for (i, r) in row_sums.iter_mut().enumerate() {
            *r += sign * m[(i, j)];
        }
        let prod = row_sums.iter().fold(Complex64::new(1.0, 0.0), |acc, r| acc * r);
        if (n - gray.count_ones() as usize) % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total
}
