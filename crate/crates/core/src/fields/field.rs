use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

fn check_finite<'a, I>(values: I) -> Result<()>
where
    I: IntoIterator<Item = (usize, bool)> + 'a,
{
    match values.into_iter().find(|&(_, ok)| !ok) {
        Some((node, _)) => Err(Error::NonFinite { node }),
        None => Ok(()),
    }
}

/// Real samples on a [`Grid`]. Every value is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        check_finite(values.iter().map(|v| v.is_finite()).enumerate())?;
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        ScalarField { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(grid.clone(), vec![c; grid.len()])
    }

    /// Samples `f` at every node; `f` receives the node coordinates
    /// (one entry per axis).
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                f(&x[..dim])
            })
            .collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise map; fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.grid.clone(), values)
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    /// Discrete L2 norm `sqrt(sum |f|^2 dV)`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }
}

/// Complex samples on a [`Grid`], carrying their discrete L2 norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
    norm: f64,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        check_finite(values.iter().map(|v| v.re.is_finite() && v.im.is_finite()).enumerate())?;
        let norm = l2(&values, grid.cell_volume());
        Ok(ComplexField { grid, values, norm })
    }

    /// `R * exp(i * phase / hbar)` sampled node by node.
    pub fn from_polar(amplitude: &ScalarField, phase: &ScalarField, hbar: f64) -> Result<Self> {
        if amplitude.grid() != phase.grid() {
            return Err(Error::GridMismatch);
        }
        let values =
            amplitude.values().iter().zip(phase.values()).map(|(&r, &p)| Complex64::from_polar(r, p / hbar)).collect();
        Self::new(amplitude.grid().clone(), values)
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                f(&x[..dim])
            })
            .collect();
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Discrete L2 norm recorded at construction.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Copy scaled to unit discrete L2 norm on the box.
    pub fn normalized(&self) -> Result<Self> {
        if self.norm == 0.0 {
            return Err(Error::DegenerateAmplitude);
        }
        let s = 1.0 / self.norm;
        Self::new(self.grid.clone(), self.values.iter().map(|v| v * s).collect())
    }

    /// Multiplies every sample by `exp(i * angle)`.
    pub fn with_global_phase(&self, angle: f64) -> Result<Self> {
        let w = Complex64::from_polar(1.0, angle);
        Self::new(self.grid.clone(), self.values.iter().map(|v| v * w).collect())
    }

    pub fn modulus(&self) -> ScalarField {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|v| v.norm()).collect() }
    }
}

pub(crate) fn l2(values: &[Complex64], cell_volume: f64) -> f64 {
    (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell_volume).sqrt()
}

/// Nodes excluded from residuals and potentials because the amplitude is
/// below the node threshold there. `true` means masked.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeMask(Vec<bool>);

impl NodeMask {
    pub fn none(len: usize) -> Self {
        NodeMask(vec![false; len])
    }

    pub fn from_vec(masked: Vec<bool>) -> Self {
        NodeMask(masked)
    }

    /// Masks nodes where `|amplitude| < eps`.
    pub fn from_amplitude(amplitude: &ScalarField, eps: f64) -> Self {
        NodeMask(amplitude.values().iter().map(|v| v.abs() < eps).collect())
    }

    pub fn is_masked(&self, node: usize) -> bool {
        self.0[node]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&m| m).count()
    }

    /// Fraction of nodes masked.
    pub fn fraction(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.0.len() as f64
        }
    }

    /// Union of two masks.
    pub fn union(&self, other: &NodeMask) -> NodeMask {
        NodeMask(self.0.iter().zip(&other.0).map(|(&a, &b)| a || b).collect())
    }

    /// Fraction of nodes on which the two masks disagree.
    pub fn disagreement(&self, other: &NodeMask) -> f64 {
        let n = self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count();
        n as f64 / self.0.len().max(1) as f64
    }
}

/// Nodes where residuals are meaningful: full centred stencil support and
/// no masked node inside the stencil.
pub fn checkable_nodes<'a>(grid: &'a Grid, mask: &'a NodeMask) -> impl Iterator<Item = usize> + 'a {
    (0..grid.len())
        .filter(move |&i| grid.is_interior(i) && !mask.is_masked(i) && grid.neighbors(i).all(|j| !mask.is_masked(j)))
}

/// Element type shared by the real and complex finite-difference kernels.
pub(crate) trait Sample: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    const ZERO: Self;
}

impl Sample for f64 {
    const ZERO: Self = 0.0;
}

impl Sample for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
}
