//! Sparse stencil matrices and a banded LU factorization with partial
//! pivoting.
//!
//! Stencil matrices are banded once rows are ordered sensibly. Dirichlet
//! grids use storage order directly. Periodic axes are folded
//! (0, n-1, 1, n-2, ...) so the wrap-around coupling stays within a
//! bandwidth of two strides.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::fields::{Boundary, Grid};

pub(crate) trait Scalar:
    Copy
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
{
    const ZERO: Self;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Row-wise sparse matrix.
#[derive(Clone, Debug)]
pub(crate) struct SparseMatrix<T> {
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn new(n: usize) -> Self {
        SparseMatrix { rows: vec![Vec::new(); n] }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    /// Adds `v` to entry `(i, j)`.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let row = &mut self.rows[i];
        match row.iter_mut().find(|(c, _)| *c == j) {
            Some((_, e)) => *e = *e + v,
            None => row.push((j, v)),
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        self.rows.iter().map(|row| row.iter().fold(T::ZERO, |acc, &(j, v)| acc + v * x[j])).collect()
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.rows.iter().map(|r| r.iter().map(|(_, v)| v.modulus()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// Permutation that keeps grid stencils banded: `perm[node] = row`.
pub(crate) fn band_ordering(grid: &Grid) -> Vec<usize> {
    let fold = |i: usize, n: usize| if 2 * i < n { 2 * i } else { 2 * (n - 1 - i) + 1 };
    match grid.boundary() {
        Boundary::DirichletZero => (0..grid.len()).collect(),
        Boundary::Periodic => (0..grid.len())
            .map(|flat| {
                let idx = grid.multi_index(flat);
                let folded: Vec<usize> = (0..grid.dim()).map(|a| fold(idx[a], grid.extents()[a])).collect();
                grid.flat_index(&folded)
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Singular {
    pub column: usize,
}

/// LU factors in band storage. Row `i` holds columns
/// `i - kl ..= i + kl + ku` so fill-in from row swaps fits.
#[derive(Clone, Debug)]
pub(crate) struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    ab: Vec<T>,
    pivots: Vec<usize>,
    perm: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    /// Factors `P A P^T` where `perm[i]` is the banded position of row `i`.
    pub fn factor(a: &SparseMatrix<T>, perm: &[usize]) -> Result<Self, Singular> {
        let n = a.size();
        assert_eq!(perm.len(), n);
        let (mut kl, mut ku) = (0usize, 0usize);
        for i in 0..n {
            for &(j, _) in a.row(i) {
                let (pi, pj) = (perm[i], perm[j]);
                if pi > pj {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu { n, kl, ku, width, ab: vec![T::ZERO; n * width], pivots: vec![0; n], perm: perm.to_vec() };
        for i in 0..n {
            for &(j, v) in a.row(i) {
                let (pi, pj) = (perm[i], perm[j]);
                let k = lu.slot(pi, pj);
                lu.ab[k] = lu.ab[k] + v;
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<(), Singular> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.ab[self.slot(k, k)].modulus();
            for i in k + 1..=last_row {
                let m = self.ab[self.slot(i, k)].modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Singular { column: k });
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.slot(k, k)];
            for i in k + 1..=last_row {
                let s = self.slot(i, k);
                let l = self.ab[s] / pivot;
                self.ab[s] = l;
                if l == T::ZERO {
                    continue;
                }
                for j in k + 1..=last_col {
                    let (dst, src) = (self.slot(i, j), self.slot(k, j));
                    self.ab[dst] = self.ab[dst] - l * self.ab[src];
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b` in the original (unpermuted) ordering.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = vec![T::ZERO; n];
        for (i, &v) in b.iter().enumerate() {
            y[self.perm[i]] = v;
        }
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                y[i] = y[i] - self.ab[self.slot(i, k)] * yk;
            }
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..=(i + self.kl + self.ku).min(n - 1) {
                s = s - self.ab[self.slot(i, j)] * y[j];
            }
            y[i] = s / self.ab[self.slot(i, i)];
        }
        (0..n).map(|i| y[self.perm[i]]).collect()
    }
}

pub(crate) fn max_modulus<T: Scalar>(v: &[T]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.modulus()))
}
