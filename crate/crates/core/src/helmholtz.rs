//! Closed-form solutions of `∇²u + λ²u = 0`, residual checks, the
//! inhomogeneous Dirichlet solve and finite differences in time.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{checkable_nodes, laplacian, Boundary, Grid, NodeMask, PhysicalConstants, ScalarField};
use crate::linalg::{max_modulus, BandLu, SparseMatrix};
use crate::verify::{EntryMeta, ReportEntry};

/// Relative tolerance on `| |k| - λ |`.
const WAVEVECTOR_TOL: f64 = 1e-12;

/// Relative distance of λ² to the discrete spectrum treated as resonant.
pub const RESONANCE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    /// `Σ a_j cos(k_j · x + θ_j)`.
    PlaneWaveSuperposition,
    /// `Σ a_j Π_axis cos(k_{j,axis} x_axis + θ_{j,axis})`.
    SeparableTrig,
    /// `a sin(λ r) / (λ r)` about `center`; three dimensions only.
    RadialSinc,
    /// `a + b · x` with λ = 0. `amplitudes[0]` is `a`, `wavevectors[0]` is `b`.
    Harmonic,
}

/// A closed-form Helmholtz solution.
///
/// Separable terms take either one phase per term (shared by every axis)
/// or one phase per term and axis, laid out term-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelmholtzMode {
    pub kind: ModeKind,
    pub lambda: f64,
    #[serde(default)]
    pub wavevectors: Vec<Vec<f64>>,
    #[serde(default)]
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub phases: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
}

impl HelmholtzMode {
    /// `cos(λ x + θ)` in one dimension.
    pub fn cosine_1d(lambda: f64, phase: f64) -> Self {
        HelmholtzMode {
            kind: ModeKind::PlaneWaveSuperposition,
            lambda,
            wavevectors: vec![vec![lambda]],
            amplitudes: vec![1.0],
            phases: vec![phase],
            center: None,
        }
    }

    /// Single separable product `Π cos(k_a x_a)` with λ = |k|.
    pub fn separable(k: Vec<f64>) -> Self {
        let lambda = k.iter().map(|c| c * c).sum::<f64>().sqrt();
        HelmholtzMode {
            kind: ModeKind::SeparableTrig,
            lambda,
            wavevectors: vec![k],
            amplitudes: vec![1.0],
            phases: vec![0.0],
            center: None,
        }
    }

    pub fn radial_sinc(lambda: f64, amplitude: f64, center: [f64; 3]) -> Self {
        HelmholtzMode {
            kind: ModeKind::RadialSinc,
            lambda,
            wavevectors: Vec::new(),
            amplitudes: vec![amplitude],
            phases: Vec::new(),
            center: Some(center.to_vec()),
        }
    }

    pub fn harmonic(offset: f64, slope: Vec<f64>) -> Self {
        HelmholtzMode {
            kind: ModeKind::Harmonic,
            lambda: 0.0,
            wavevectors: vec![slope],
            amplitudes: vec![offset],
            phases: Vec::new(),
            center: None,
        }
    }

    /// Checks the invariants of the mode for a `dim`-dimensional grid.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMode(m));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        let all_finite = self.amplitudes.iter().chain(&self.phases).all(|v| v.is_finite())
            && self.wavevectors.iter().flatten().all(|v| v.is_finite());
        if !all_finite {
            return bad("non-finite coefficient".into());
        }
        if self.amplitudes.is_empty() {
            return bad("no amplitudes".into());
        }
        match self.kind {
            ModeKind::Harmonic => {
                if self.lambda != 0.0 {
                    return bad(format!("harmonic kind requires lambda = 0, got {}", self.lambda));
                }
                if self.amplitudes.len() != 1 || self.wavevectors.len() > 1 {
                    return bad("harmonic kind takes one offset and at most one slope vector".into());
                }
                if let Some(b) = self.wavevectors.first() {
                    if b.len() != dim {
                        return Err(Error::DimensionMismatch(format!(
                            "slope has {} components on a {dim}-dimensional grid",
                            b.len()
                        )));
                    }
                }
                Ok(())
            }
            ModeKind::RadialSinc => {
                if dim != 3 {
                    return Err(Error::DimensionMismatch(format!(
                        "radial_sinc solves the Helmholtz equation only in 3 dimensions, grid has {dim}"
                    )));
                }
                if self.lambda == 0.0 {
                    return bad("radial_sinc needs lambda > 0".into());
                }
                if self.amplitudes.len() != 1 || self.amplitudes[0] == 0.0 {
                    return bad("radial_sinc takes one nonzero amplitude".into());
                }
                if let Some(c) = &self.center {
                    if c.len() != 3 || !c.iter().all(|v| v.is_finite()) {
                        return bad("center must be three finite coordinates".into());
                    }
                }
                Ok(())
            }
            ModeKind::PlaneWaveSuperposition | ModeKind::SeparableTrig => {
                let terms = self.amplitudes.len();
                if self.wavevectors.len() != terms {
                    return bad(format!("{} wavevectors for {terms} amplitudes", self.wavevectors.len()));
                }
                if self.amplitudes.iter().all(|&a| a == 0.0) {
                    return bad("every amplitude is zero".into());
                }
                let phases_ok = self.phases.is_empty()
                    || self.phases.len() == terms
                    || (self.kind == ModeKind::SeparableTrig && self.phases.len() == terms * dim);
                if !phases_ok {
                    return bad(format!("{} phases for {terms} terms", self.phases.len()));
                }
                for k in &self.wavevectors {
                    if k.len() != dim {
                        return Err(Error::DimensionMismatch(format!(
                            "wavevector has {} components on a {dim}-dimensional grid",
                            k.len()
                        )));
                    }
                    let norm = k.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if (norm - self.lambda).abs() > WAVEVECTOR_TOL * self.lambda.max(1.0) {
                        return bad(format!("|k| = {norm} differs from lambda = {}", self.lambda));
                    }
                }
                Ok(())
            }
        }
    }

    /// Value of the mode at one point.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModeKind::Harmonic => {
                let b = self.wavevectors.first();
                self.amplitudes[0] + b.map_or(0.0, |b| b.iter().zip(x).map(|(bi, xi)| bi * xi).sum())
            }
            ModeKind::RadialSinc => {
                let zero = [0.0; 3];
                let c = self.center.as_deref().unwrap_or(&zero);
                let r = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                self.amplitudes[0] * sinc(self.lambda * r)
            }
            ModeKind::PlaneWaveSuperposition => self
                .amplitudes
                .iter()
                .zip(&self.wavevectors)
                .enumerate()
                .map(|(j, (a, k))| {
                    let theta = self.phases.get(j).copied().unwrap_or(0.0);
                    a * (k.iter().zip(x).map(|(ki, xi)| ki * xi).sum::<f64>() + theta).cos()
                })
                .sum(),
            ModeKind::SeparableTrig => {
                let dim = x.len();
                let per_axis = self.phases.len() == self.amplitudes.len() * dim && dim > 1;
                self.amplitudes
                    .iter()
                    .zip(&self.wavevectors)
                    .enumerate()
                    .map(|(j, (a, k))| {
                        let prod: f64 = (0..dim)
                            .map(|axis| {
                                let theta = if per_axis {
                                    self.phases[j * dim + axis]
                                } else {
                                    self.phases.get(j).copied().unwrap_or(0.0)
                                };
                                (k[axis] * x[axis] + theta).cos()
                            })
                            .product();
                        a * prod
                    })
                    .sum()
            }
        }
    }

    /// Same mode with wavevectors rescaled to a new λ.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut m = self.clone();
        match self.kind {
            ModeKind::Harmonic if lambda != 0.0 => {
                return Err(Error::InvalidMode("harmonic kind cannot take lambda > 0".into()))
            }
            ModeKind::Harmonic => {}
            ModeKind::RadialSinc => m.lambda = lambda,
            ModeKind::PlaneWaveSuperposition | ModeKind::SeparableTrig => {
                if self.lambda == 0.0 {
                    if lambda != 0.0 {
                        return Err(Error::InvalidMode("cannot rescale a lambda = 0 mode".into()));
                    }
                } else {
                    let s = lambda / self.lambda;
                    for k in &mut m.wavevectors {
                        k.iter_mut().for_each(|c| *c *= s);
                    }
                }
                m.lambda = lambda;
            }
        }
        Ok(m)
    }
}

/// `sin(u)/u`, evaluated by its Taylor series near zero.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

pub fn evaluate_mode(mode: &HelmholtzMode, grid: &Grid) -> Result<ScalarField> {
    mode.validate(grid.dim())?;
    ScalarField::from_fn(grid, |x| mode.value_at(x))
}

/// Max of `|∇²f + λ²f|` over nodes with full centred stencil support.
pub fn helmholtz_residual(f: &ScalarField, lambda: f64) -> f64 {
    let lap = laplacian(f);
    let l2 = lambda * lambda;
    let none = NodeMask::none(f.grid().len());
    checkable_nodes(f.grid(), &none).map(|i| (lap.values()[i] + l2 * f.values()[i]).abs()).fold(0.0, f64::max)
}

pub fn verify_helmholtz(f: &ScalarField, lambda: f64, tol: f64) -> ReportEntry {
    ReportEntry::judge("helmholtz_residual", helmholtz_residual(f, lambda), tol, EntryMeta::new(f.grid(), 0.0))
}

/// Result of [`solve_inhomogeneous`].
#[derive(Clone, Debug)]
pub struct HelmholtzSolution {
    pub field: ScalarField,
    /// Max absolute residual of the discrete system after back-substitution.
    pub residual: f64,
    /// Estimated smallest `|λ² - μ|` over the discrete Dirichlet spectrum μ.
    pub spectral_gap: f64,
}

struct InteriorSystem {
    /// Grid node of each unknown.
    nodes: Vec<usize>,
    matrix: SparseMatrix<f64>,
}

fn interior_system(grid: &Grid, lambda: f64) -> InteriorSystem {
    let mut slot = vec![usize::MAX; grid.len()];
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_interior(i)).collect();
    for (k, &i) in nodes.iter().enumerate() {
        slot[i] = k;
    }
    let inv_h2: Vec<f64> = grid.spacing().iter().map(|h| 1.0 / (h * h)).collect();
    let diag = lambda * lambda - 2.0 * inv_h2.iter().sum::<f64>();
    let mut matrix = SparseMatrix::new(nodes.len());
    for (k, &i) in nodes.iter().enumerate() {
        matrix.add(k, k, diag);
        let idx = grid.multi_index(i);
        for axis in 0..grid.dim() {
            let s = grid.strides()[axis];
            for j in [i - s, i + s] {
                if slot[j] != usize::MAX {
                    matrix.add(k, slot[j], inv_h2[axis]);
                }
            }
            debug_assert!(idx[axis] > 0);
        }
    }
    InteriorSystem { nodes, matrix }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Upper estimate of the smallest |eigenvalue| of the symmetric system by
/// inverse iteration.
fn smallest_eigen_estimate(lu: &BandLu<f64>, a: &SparseMatrix<f64>) -> f64 {
    let n = a.size();
    let mut w: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7548776662).sin()).collect();
    let mut estimate = f64::INFINITY;
    for _ in 0..20 {
        let nw = norm2(&w);
        w.iter_mut().for_each(|x| *x /= nw);
        let aw = a.matvec(&w);
        estimate = estimate.min(norm2(&aw));
        w = lu.solve(&w);
        if !w.iter().all(|x| x.is_finite()) {
            return 0.0;
        }
    }
    let nw = norm2(&w);
    w.iter_mut().for_each(|x| *x /= nw);
    estimate.min(norm2(&a.matvec(&w)))
}

/// Solves `(∇² + λ²) u = rhs` on interior nodes with `u = 0` on the
/// boundary of a Dirichlet grid, by banded LU of the stencil matrix.
///
/// λ² within [`RESONANCE_TOL`] (relative) of the discrete Dirichlet spectrum
/// is rejected with [`Error::Resonance`].
pub fn solve_inhomogeneous(grid: &Grid, lambda: f64, rhs: &ScalarField) -> Result<HelmholtzSolution> {
    if grid.boundary() != Boundary::DirichletZero {
        return Err(Error::InvalidArgument("solve_inhomogeneous needs a dirichlet_zero grid".into()));
    }
    if rhs.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let sys = interior_system(grid, lambda);
    let perm: Vec<usize> = (0..sys.nodes.len()).collect();
    let lu = BandLu::factor(&sys.matrix, &perm).map_err(|_| Error::Resonance {
        lambda,
        gap: 0.0,
        residual: f64::INFINITY,
    })?;
    let gap = smallest_eigen_estimate(&lu, &sys.matrix);
    let l2 = lambda * lambda;
    if l2 > 0.0 && gap <= RESONANCE_TOL * l2 {
        return Err(Error::Resonance { lambda, gap, residual: f64::NAN });
    }
    let b: Vec<f64> = sys.nodes.iter().map(|&i| rhs.values()[i]).collect();
    let x = lu.solve(&b);
    let ax = sys.matrix.matvec(&x);
    let residual = ax.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let scale = sys.matrix.norm_inf() * max_modulus(&x) + max_modulus(&b);
    if !x.iter().all(|v| v.is_finite()) || residual > RESONANCE_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Resonance { lambda, gap, residual });
    }
    let mut values = vec![0.0; grid.len()];
    for (&i, v) in sys.nodes.iter().zip(x) {
        values[i] = v;
    }
    Ok(HelmholtzSolution { field: ScalarField::new(grid.clone(), values)?, residual, spectral_gap: gap })
}

/// Checks that `times` is a strictly increasing uniform mesh; returns its step.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: times.len() });
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::NonUniformTimeMesh);
    }
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.max(1.0));
    if !uniform {
        return Err(Error::NonUniformTimeMesh);
    }
    Ok(dt)
}

/// d/dt of a uniformly sampled field sequence: centred differences inside,
/// second-order one-sided differences at both ends.
pub fn time_derivative(fields: &[ScalarField], times: &[f64]) -> Result<Vec<ScalarField>> {
    if fields.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: fields.len() });
    }
    if times.len() != fields.len() {
        return Err(Error::LengthMismatch { expected: fields.len(), got: times.len() });
    }
    let dt = uniform_step(times)?;
    let grid = fields[0].grid();
    if fields.iter().any(|f| f.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let n = fields.len();
    let inv = 0.5 / dt;
    (0..n)
        .map(|t| {
            let v = |k: usize| fields[k].values();
            let values = (0..grid.len())
                .map(|i| match t {
                    0 => (-3.0 * v(0)[i] + 4.0 * v(1)[i] - v(2)[i]) * inv,
                    t if t == n - 1 => (3.0 * v(t)[i] - 4.0 * v(t - 1)[i] + v(t - 2)[i]) * inv,
                    t => (v(t + 1)[i] - v(t - 1)[i]) * inv,
                })
                .collect();
            ScalarField::new(grid.clone(), values)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    PiecewiseLinear,
}

/// λ(t) sampled on a uniform time mesh, interpolated piecewise-linearly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawSchedule", into = "RawSchedule")]
pub struct LambdaSchedule {
    times: Vec<f64>,
    values: Vec<f64>,
    interpolation: Interpolation,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    times: Vec<f64>,
    values: Vec<f64>,
    #[serde(default)]
    interpolation: Interpolation,
}

impl TryFrom<RawSchedule> for LambdaSchedule {
    type Error = Error;
    fn try_from(r: RawSchedule) -> Result<Self> {
        LambdaSchedule::new(r.times, r.values)
    }
}

impl From<LambdaSchedule> for RawSchedule {
    fn from(s: LambdaSchedule) -> Self {
        RawSchedule { times: s.times, values: s.values, interpolation: s.interpolation }
    }
}

impl LambdaSchedule {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch { expected: times.len(), got: values.len() });
        }
        uniform_step(&times)?;
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("lambda(t) must be finite and >= 0, got {v}")));
        }
        Ok(LambdaSchedule { times, values, interpolation: Interpolation::PiecewiseLinear })
    }

    pub fn constant(lambda: f64, times: Vec<f64>) -> Result<Self> {
        let n = times.len();
        Self::new(times, vec![lambda; n])
    }

    /// Builds λ(t) = sqrt(2 m K(t)) / ħ from samples of K; negative K is rejected.
    pub fn from_k(times: Vec<f64>, k: &[f64], constants: &PhysicalConstants) -> Result<Self> {
        let values = k.iter().map(|&k| constants.lambda_from_k(k)).collect::<Result<Vec<_>>>()?;
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// λ at `t`; held constant outside the sampled interval.
    pub fn at(&self, t: f64) -> f64 {
        interpolate(&self.times, &self.values, t)
    }

    /// K(t) = (ħ λ(t))² / 2m.
    pub fn k_at(&self, t: f64, constants: &PhysicalConstants) -> f64 {
        constants.k_from_lambda(self.at(t))
    }
}

/// Piecewise-linear interpolation on a sorted mesh, clamped at the ends.
pub(crate) fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let n = times.len();
    if n == 1 || t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let k = times.partition_point(|&s| s <= t) - 1;
    let w = (t - times[k]) / (times[k + 1] - times[k]);
    values[k] * (1.0 - w) + values[k + 1] * w
}

/// Minimum of a mode over the centred box `[-side/2, side/2]^n`, sampled
/// with at least 32 nodes per wavelength.
///
/// Solutions with λ > 0 oscillate, so on a box of side at least 2π/λ the
/// minimum is negative.
pub fn box_minimum(mode: &HelmholtzMode, dim: usize, side: f64) -> Result<f64> {
    let per_wavelength = if mode.lambda > 0.0 { 32.0 * side * mode.lambda / TAU } else { 0.0 };
    let n = (per_wavelength.ceil() as usize).clamp(33, if dim == 3 { 97 } else { 401 });
    let grid = Grid::uniform(dim, n | 1, -side / 2.0, side / 2.0, Boundary::DirichletZero)?;
    Ok(evaluate_mode(mode, &grid)?.min())
}

/// Discrete L2 norm of a mode over the centred box of the given side.
pub fn box_l2_norm(mode: &HelmholtzMode, dim: usize, side: f64) -> Result<f64> {
    let n = if dim == 3 { 49 } else { 201 };
    let grid = Grid::uniform(dim, n, -side / 2.0, side / 2.0, Boundary::DirichletZero)?;
    Ok(evaluate_mode(mode, &grid)?.l2_norm())
}
