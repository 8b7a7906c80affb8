//! Second-order finite-difference operators.
//!
//! Interior nodes use centred stencils. On Dirichlet grids the first and
//! last node of each axis use second-order one-sided stencils; periodic grids
//! wrap around.

use super::field::{Sample, ScalarField};
use super::grid::{Boundary, Grid};
use crate::error::{Error, Result};

/// d/dx along `axis` for raw samples.
pub(crate) fn axis_first_derivative<T: Sample>(grid: &Grid, values: &[T], axis: usize) -> Vec<T> {
    let n = grid.extents()[axis];
    let s = grid.strides()[axis];
    let inv2h = 0.5 / grid.spacing()[axis];
    let periodic = grid.boundary() == Boundary::Periodic;
    (0..grid.len())
        .map(|flat| {
            let i = (flat / s) % n;
            let base = flat - i * s;
            let at = |j: usize| values[base + j * s];
            if periodic {
                (at((i + 1) % n) - at((i + n - 1) % n)) * inv2h
            } else if i == 0 {
                (at(1) * 4.0 - at(0) * 3.0 - at(2)) * inv2h
            } else if i == n - 1 {
                (at(n - 1) * 3.0 - at(n - 2) * 4.0 + at(n - 3)) * inv2h
            } else {
                (at(i + 1) - at(i - 1)) * inv2h
            }
        })
        .collect()
}

/// d²/dx² along `axis` for raw samples.
pub(crate) fn axis_second_derivative<T: Sample>(grid: &Grid, values: &[T], axis: usize) -> Vec<T> {
    let n = grid.extents()[axis];
    let s = grid.strides()[axis];
    let h = grid.spacing()[axis];
    let inv_h2 = 1.0 / (h * h);
    let periodic = grid.boundary() == Boundary::Periodic;
    (0..grid.len())
        .map(|flat| {
            let i = (flat / s) % n;
            let base = flat - i * s;
            let at = |j: usize| values[base + j * s];
            if periodic {
                (at((i + 1) % n) + at((i + n - 1) % n) - at(i) * 2.0) * inv_h2
            } else if i == 0 {
                (at(0) * 2.0 - at(1) * 5.0 + at(2) * 4.0 - at(3)) * inv_h2
            } else if i == n - 1 {
                (at(n - 1) * 2.0 - at(n - 2) * 5.0 + at(n - 3) * 4.0 - at(n - 4)) * inv_h2
            } else {
                (at(i + 1) + at(i - 1) - at(i) * 2.0) * inv_h2
            }
        })
        .collect()
}

pub(crate) fn raw_gradient<T: Sample>(grid: &Grid, values: &[T]) -> Vec<Vec<T>> {
    (0..grid.dim()).map(|a| axis_first_derivative(grid, values, a)).collect()
}

pub(crate) fn raw_laplacian<T: Sample>(grid: &Grid, values: &[T]) -> Vec<T> {
    let mut out = vec![T::ZERO; grid.len()];
    for axis in 0..grid.dim() {
        for (o, d) in out.iter_mut().zip(axis_second_derivative(grid, values, axis)) {
            *o = *o + d;
        }
    }
    out
}

fn wrap(grid: &Grid, values: Vec<f64>) -> ScalarField {
    ScalarField::new(grid.clone(), values).expect("finite differences of finite samples are finite")
}

/// One component per axis.
pub fn gradient(f: &ScalarField) -> Vec<ScalarField> {
    raw_gradient(f.grid(), f.values()).into_iter().map(|c| wrap(f.grid(), c)).collect()
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    wrap(f.grid(), raw_laplacian(f.grid(), f.values()))
}

/// Sum of axis derivatives of the components of `v`.
pub fn divergence(v: &[ScalarField]) -> Result<ScalarField> {
    let first = v.first().ok_or_else(|| Error::DimensionMismatch("divergence of an empty vector field".into()))?;
    let grid = first.grid();
    if v.len() != grid.dim() {
        return Err(Error::DimensionMismatch(format!("{} components on a {}-dimensional grid", v.len(), grid.dim())));
    }
    if v.iter().any(|c| c.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let mut out = vec![0.0; grid.len()];
    for (axis, comp) in v.iter().enumerate() {
        for (o, d) in out.iter_mut().zip(axis_first_derivative(grid, comp.values(), axis)) {
            *o += d;
        }
    }
    Ok(wrap(grid, out))
}
