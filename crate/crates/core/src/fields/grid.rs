use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest per-axis sample count; the one-sided second-derivative stencil
/// touches four nodes.
pub const MIN_EXTENT: usize = 4;

/// Environment variable holding the desk-scale node cap.
pub const NODE_CAP_ENV: &str = "SEMICLASSICAL_NODE_CAP";

/// Node cap used when the environment does not override it.
pub const DEFAULT_NODE_CAP: usize = 1 << 21;

/// Node cap in effect: `SEMICLASSICAL_NODE_CAP` if set and parseable,
/// otherwise [`DEFAULT_NODE_CAP`].
pub fn node_cap() -> usize {
    std::env::var(NODE_CAP_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_NODE_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Nodes `0` and `n - 1` of every axis are boundary nodes.
    DirichletZero,
    /// Node `n` coincides with node `0`; the period is `n * h`.
    Periodic,
}

/// Rectangular sampling domain in one to three dimensions.
///
/// Storage is row-major with axis order x, y, z: the flat index of
/// `(ix, iy, iz)` is `(ix * ny + iy) * nz + iz`, so z varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    extents: Vec<usize>,
    origin: Vec<f64>,
    spacing: Vec<f64>,
    boundary: Boundary,
    strides: Vec<usize>,
    len: usize,
}

/// Plain serialized form of a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub extents: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub boundary: Boundary,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        if spec.extents.len() != spec.dim {
            return Err(Error::InvalidGrid(format!("dim = {} but {} extents given", spec.dim, spec.extents.len())));
        }
        Grid::new(spec.extents, spec.origin, spec.spacing, spec.boundary)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec { dim: g.dim(), extents: g.extents, origin: g.origin, spacing: g.spacing, boundary: g.boundary }
    }
}

impl Grid {
    pub fn new(extents: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>, boundary: Boundary) -> Result<Self> {
        Self::with_cap(extents, origin, spacing, boundary, node_cap())
    }

    pub fn with_cap(
        extents: Vec<usize>,
        origin: Vec<f64>,
        spacing: Vec<f64>,
        boundary: Boundary,
        cap: usize,
    ) -> Result<Self> {
        let dim = extents.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if origin.len() != dim || spacing.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{dim} extents but {} origin and {} spacing entries",
                origin.len(),
                spacing.len()
            )));
        }
        for (axis, &extent) in extents.iter().enumerate() {
            if extent < MIN_EXTENT {
                return Err(Error::GridTooSmall { axis, extent, min: MIN_EXTENT });
            }
        }
        for (axis, (&o, &h)) in origin.iter().zip(&spacing).enumerate() {
            if !o.is_finite() {
                return Err(Error::InvalidGrid(format!("origin of axis {axis} is not finite")));
            }
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidGrid(format!("spacing of axis {axis} must be > 0, got {h}")));
            }
        }
        let len = extents
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .ok_or(Error::NodeCapExceeded { nodes: usize::MAX, cap })?;
        if len > cap {
            return Err(Error::NodeCapExceeded { nodes: len, cap });
        }
        let mut strides = vec![1; dim];
        for axis in (0..dim.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * extents[axis + 1];
        }
        Ok(Grid { extents, origin, spacing, boundary, strides, len })
    }

    /// Uniform grid on `[lo, hi]` per axis with `n` nodes per axis.
    ///
    /// Dirichlet grids include both end points; periodic grids exclude `hi`,
    /// which is identified with `lo`.
    pub fn uniform(dim: usize, n: usize, lo: f64, hi: f64, boundary: Boundary) -> Result<Self> {
        if n < MIN_EXTENT {
            return Err(Error::GridTooSmall { axis: 0, extent: n, min: MIN_EXTENT });
        }
        let h = match boundary {
            Boundary::DirichletZero => (hi - lo) / (n - 1) as f64,
            Boundary::Periodic => (hi - lo) / n as f64,
        };
        Grid::new(vec![n; dim], vec![lo; dim], vec![h; dim], boundary)
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Volume element `h_x * h_y * h_z` used by discrete L2 norms.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    /// Lower and upper coordinate of the sampled box along `axis`.
    ///
    /// For periodic axes the upper bound is the period end, which is not a node.
    pub fn axis_bounds(&self, axis: usize) -> (f64, f64) {
        let lo = self.origin[axis];
        let n = self.extents[axis] as f64;
        let hi = match self.boundary {
            Boundary::DirichletZero => lo + (n - 1.0) * self.spacing[axis],
            Boundary::Periodic => lo + n * self.spacing[axis],
        };
        (lo, hi)
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Per-axis indices of a flat node index; unused axes are zero.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = flat;
        for axis in 0..self.dim() {
            out[axis] = rem / self.strides[axis];
            rem %= self.strides[axis];
        }
        out
    }

    /// Coordinates of a flat node index; unused axes are zero.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim() {
            x[axis] = self.origin[axis] + idx[axis] as f64 * self.spacing[axis];
        }
        x
    }

    /// Coordinates of every node along one axis.
    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.extents[axis]).map(|i| self.origin[axis] + i as f64 * self.spacing[axis]).collect()
    }

    /// True when every axis has a full centred stencil at this node.
    pub fn is_interior(&self, flat: usize) -> bool {
        match self.boundary {
            Boundary::Periodic => true,
            Boundary::DirichletZero => {
                let idx = self.multi_index(flat);
                (0..self.dim()).all(|a| idx[a] > 0 && idx[a] + 1 < self.extents[a])
            }
        }
    }

    /// Nearest neighbours of a node along each axis, in a fixed order
    /// (axis 0 minus, axis 0 plus, axis 1 minus, ...). Periodic axes wrap;
    /// Dirichlet axes drop neighbours outside the box.
    pub fn neighbors(&self, flat: usize) -> impl Iterator<Item = usize> + '_ {
        let idx = self.multi_index(flat);
        (0..self.dim()).flat_map(move |axis| {
            let n = self.extents[axis];
            let i = idx[axis];
            let s = self.strides[axis];
            let base = flat - i * s;
            let (minus, plus) = match self.boundary {
                Boundary::Periodic => (Some((i + n - 1) % n), Some((i + 1) % n)),
                Boundary::DirichletZero => (i.checked_sub(1), if i + 1 < n { Some(i + 1) } else { None }),
            };
            [minus, plus].into_iter().flatten().map(move |j| base + j * s)
        })
    }

    /// Same extents, spacing and boundary.
    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}
