use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::polar::bohmian_velocity;
use super::schrodinger::{EvolutionResult, Potential};
use crate::error::{Error, Result};
use crate::fields::{raw_gradient, Boundary, ComplexField, Grid, NodeMask, PhysicalConstants};
use crate::verify::{EntryMeta, ReportEntry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Classical,
    Bohmian,
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrajectoryKind::Classical => "classical",
            TrajectoryKind::Bohmian => "bohmian",
        })
    }
}

/// Why a path stopped early.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathFlag {
    Complete,
    /// Left a Dirichlet box.
    Escaped,
    /// Touched a masked cell.
    Masked,
}

impl fmt::Display for PathFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathFlag::Complete => "complete",
            PathFlag::Escaped => "escaped",
            PathFlag::Masked => "masked",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

/// Positions at consecutive mesh times starting at `t = 0`. A truncated path
/// is shorter than the mesh and carries the reason in `flag`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticlePath {
    pub positions: Vec<Vec<f64>>,
    pub flag: PathFlag,
}

/// Paths on periodic grids are stored unwrapped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    pub kind: TrajectoryKind,
    pub times: Vec<f64>,
    pub initial_conditions: Vec<InitialCondition>,
    pub paths: Vec<ParticlePath>,
}

impl TrajectorySet {
    pub fn dim(&self) -> usize {
        self.initial_conditions.first().map_or(0, |ic| ic.position.len())
    }

    pub fn truncated(&self) -> usize {
        self.paths.iter().filter(|p| p.flag != PathFlag::Complete).count()
    }

    /// Columns `particle_id, t, x[, y, z], flag`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        let axes = ["x", "y", "z"];
        writeln!(out, "particle_id,t,{},flag", axes[..self.dim()].join(","))?;
        for (id, p) in self.paths.iter().enumerate() {
            let last = p.positions.len();
            for (k, x) in p.positions.iter().enumerate() {
                let flag = if k + 1 == last { p.flag } else { PathFlag::Complete };
                write!(out, "{id},{:.17e}", self.times[k])?;
                for c in x {
                    write!(out, ",{c:.17e}")?;
                }
                writeln!(out, ",{flag}")?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Multilinear interpolation weights for one point.
struct Stencil {
    nodes: [usize; 8],
    weights: [f64; 8],
    len: usize,
}

impl Stencil {
    fn apply(&self, values: &[f64]) -> f64 {
        (0..self.len).map(|k| self.weights[k] * values[self.nodes[k]]).sum()
    }
}

fn locate(grid: &Grid, blocked: Option<&[bool]>, x: &[f64]) -> std::result::Result<Stencil, PathFlag> {
    let dim = grid.dim();
    let mut lower = [0usize; 3];
    let mut upper = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..dim {
        let n = grid.extents()[a];
        let h = grid.spacing()[a];
        let u = (x[a] - grid.origin()[a]) / h;
        if !u.is_finite() {
            return Err(PathFlag::Escaped);
        }
        match grid.boundary() {
            Boundary::Periodic => {
                let u = u.rem_euclid(n as f64);
                let i = (u.floor() as usize).min(n - 1);
                lower[a] = i;
                upper[a] = (i + 1) % n;
                frac[a] = u - i as f64;
            }
            Boundary::DirichletZero => {
                let top = (n - 1) as f64;
                if u < -1e-9 || u > top + 1e-9 {
                    return Err(PathFlag::Escaped);
                }
                let u = u.clamp(0.0, top);
                let i = (u.floor() as usize).min(n - 2);
                lower[a] = i;
                upper[a] = i + 1;
                frac[a] = u - i as f64;
            }
        }
    }
    let mut s = Stencil { nodes: [0; 8], weights: [0.0; 8], len: 1 << dim };
    let mut idx = [0usize; 3];
    for corner in 0..s.len {
        let mut w = 1.0;
        for a in 0..dim {
            if corner >> a & 1 == 1 {
                idx[a] = upper[a];
                w *= frac[a];
            } else {
                idx[a] = lower[a];
                w *= 1.0 - frac[a];
            }
        }
        let node = grid.flat_index(&idx[..dim]);
        if blocked.is_some_and(|b| b[node]) {
            return Err(PathFlag::Masked);
        }
        s.nodes[corner] = node;
        s.weights[corner] = w;
    }
    Ok(s)
}

fn sample(
    grid: &Grid,
    blocked: Option<&[bool]>,
    fields: &[Vec<f64>],
    x: &[f64],
) -> std::result::Result<Vec<f64>, PathFlag> {
    let s = locate(grid, blocked, x)?;
    Ok(fields.iter().map(|f| s.apply(f)).collect())
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(x, k)| x + a * k).collect()
}

fn rk4_combine(x: &[f64], h: f64, k: [&[f64]; 4]) -> Vec<f64> {
    (0..x.len()).map(|i| x[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i])).collect()
}

fn check_start(grid: &Grid, blocked: Option<&[bool]>, x: &[f64]) -> Result<()> {
    if x.len() != grid.dim() {
        return Err(Error::DimensionMismatch(format!("position has {} components, grid {}", x.len(), grid.dim())));
    }
    locate(grid, blocked, x)
        .map(|_| ())
        .map_err(|flag| Error::InvalidArgument(format!("initial position {x:?} is not admissible ({flag})")))
}

fn masked_nodes(psi: &ComplexField, eps_node: f64) -> Vec<bool> {
    psi.values().iter().map(|z| z.norm() < eps_node || z.norm() == 0.0).collect()
}

/// Bohmian velocity at `positions` from a single wave function, used as the
/// classical initial velocity.
pub fn guidance_matched_ics(
    psi0: &ComplexField,
    constants: &PhysicalConstants,
    eps_node: f64,
    positions: &[Vec<f64>],
) -> Result<Vec<InitialCondition>> {
    let grid = psi0.grid();
    let blocked = masked_nodes(psi0, eps_node);
    let v: Vec<Vec<f64>> = bohmian_velocity(psi0, constants, eps_node).into_iter().map(|f| f.into_values()).collect();
    positions
        .iter()
        .map(|x| {
            check_start(grid, Some(&blocked), x)?;
            let velocity = sample(grid, Some(&blocked), &v, x).expect("checked");
            Ok(InitialCondition { position: x.clone(), velocity })
        })
        .collect()
}

/// Integrates `dx/dt = v(x, t)` through the stored slices of an evolution
/// with classical RK4. Velocities are interpolated multilinearly in space and
/// linearly in time; a path stops when it leaves the box or touches a node
/// with `|Ψ| < eps_node`.
pub fn integrate_bohmian(
    evolution: &EvolutionResult,
    positions: &[Vec<f64>],
    constants: &PhysicalConstants,
    eps_node: f64,
) -> Result<TrajectorySet> {
    let grid = evolution.grid().clone();
    let velocity = |k: usize| -> Vec<Vec<f64>> {
        bohmian_velocity(&evolution.psi[k], constants, eps_node).into_iter().map(|f| f.into_values()).collect()
    };
    let initial_conditions = guidance_matched_ics(&evolution.psi[0], constants, eps_node, positions)?;
    let mut paths: Vec<ParticlePath> =
        positions.iter().map(|x| ParticlePath { positions: vec![x.clone()], flag: PathFlag::Complete }).collect();

    let mut v_now = velocity(0);
    let mut blocked_now = masked_nodes(&evolution.psi[0], eps_node);
    for k in 0..evolution.times.len() - 1 {
        let h = evolution.times[k + 1] - evolution.times[k];
        let v_next = velocity(k + 1);
        let blocked_next = masked_nodes(&evolution.psi[k + 1], eps_node);
        let blocked: Vec<bool> = blocked_now.iter().zip(&blocked_next).map(|(a, b)| *a || *b).collect();
        let eval = |x: &[f64], w: f64| -> std::result::Result<Vec<f64>, PathFlag> {
            let s = locate(&grid, Some(&blocked), x)?;
            Ok(v_now.iter().zip(&v_next).map(|(a, b)| (1.0 - w) * s.apply(a) + w * s.apply(b)).collect())
        };
        for path in paths.iter_mut().filter(|p| p.flag == PathFlag::Complete) {
            let x = path.positions.last().expect("non-empty").clone();
            let step = || -> std::result::Result<Vec<f64>, PathFlag> {
                let k1 = eval(&x, 0.0)?;
                let k2 = eval(&axpy(&x, 0.5 * h, &k1), 0.5)?;
                let k3 = eval(&axpy(&x, 0.5 * h, &k2), 0.5)?;
                let k4 = eval(&axpy(&x, h, &k3), 1.0)?;
                let next = rk4_combine(&x, h, [&k1, &k2, &k3, &k4]);
                locate(&grid, Some(&blocked), &next)?;
                Ok(next)
            };
            match step() {
                Ok(next) => path.positions.push(next),
                Err(flag) => path.flag = flag,
            }
        }
        v_now = v_next;
        blocked_now = blocked_next;
    }
    Ok(TrajectorySet { kind: TrajectoryKind::Bohmian, times: evolution.times.clone(), initial_conditions, paths })
}

/// Precomputed `-∇V / m` on each potential sample.
struct ForceField {
    grid: Grid,
    times: Vec<f64>,
    samples: Vec<Vec<Vec<f64>>>,
}

impl ForceField {
    fn new(potential: &Potential, constants: &PhysicalConstants) -> Self {
        let grid = potential.grid().clone();
        let force = |v: &[f64]| -> Vec<Vec<f64>> {
            raw_gradient(&grid, v).into_iter().map(|g| g.into_iter().map(|d| -d / constants.mass).collect()).collect()
        };
        let (times, samples) = match potential {
            Potential::Static(v) => (vec![0.0], vec![force(v.values())]),
            Potential::Sequence { times, fields } => {
                (times.clone(), fields.iter().map(|f| force(f.values())).collect())
            }
        };
        ForceField { grid, times, samples }
    }

    fn at(&self, blocked: Option<&[bool]>, x: &[f64], t: f64) -> std::result::Result<Vec<f64>, PathFlag> {
        let s = locate(&self.grid, blocked, x)?;
        let n = self.times.len();
        let (k, w) = if n == 1 || t <= self.times[0] {
            (0, 0.0)
        } else if t >= self.times[n - 1] {
            (n - 1, 0.0)
        } else {
            let k = self.times.partition_point(|&s| s <= t) - 1;
            (k, (t - self.times[k]) / (self.times[k + 1] - self.times[k]))
        };
        Ok((0..self.grid.dim())
            .map(|a| {
                let f0 = s.apply(&self.samples[k][a]);
                if w == 0.0 {
                    f0
                } else {
                    (1.0 - w) * f0 + w * s.apply(&self.samples[k + 1][a])
                }
            })
            .collect())
    }
}

/// Nodes of `mask` plus their grid neighbours: the centred gradient at a
/// neighbour already reads a masked sample.
fn dilate(grid: &Grid, mask: &NodeMask) -> Vec<bool> {
    let mut out = mask.as_slice().to_vec();
    for i in 0..grid.len() {
        if mask.is_masked(i) {
            for j in grid.neighbors(i) {
                out[j] = true;
            }
        }
    }
    out
}

/// Integrates `m ẍ = -∇V` with RK4 on the uniform mesh `0, dt, ..., T`.
/// The force is the multilinear interpolation of the finite-difference
/// gradient of each potential sample, linear in time between samples.
/// Paths stop on leaving the box or entering the (dilated) mask.
pub fn integrate_classical(
    potential: &Potential,
    constants: &PhysicalConstants,
    initial_conditions: &[InitialCondition],
    dt: f64,
    t_end: f64,
    mask: Option<&NodeMask>,
) -> Result<TrajectorySet> {
    if !(dt.is_finite() && dt > 0.0 && t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and T > 0, got dt = {dt}, T = {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - t_end).abs() > 1e-9 * t_end {
        return Err(Error::InvalidArgument(format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    let force = ForceField::new(potential, constants);
    let grid = force.grid.clone();
    let blocked = mask.map(|m| dilate(&grid, m));
    let blocked = blocked.as_deref();
    for ic in initial_conditions {
        check_start(&grid, blocked, &ic.position)?;
        if ic.velocity.len() != grid.dim() {
            return Err(Error::DimensionMismatch("velocity and grid dimensions differ".into()));
        }
    }
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let dim = grid.dim();
    let rhs = |y: &[f64], t: f64| -> std::result::Result<Vec<f64>, PathFlag> {
        let a = force.at(blocked, &y[..dim], t)?;
        Ok(y[dim..].iter().copied().chain(a).collect())
    };
    let paths = initial_conditions
        .iter()
        .map(|ic| {
            let mut y: Vec<f64> = ic.position.iter().chain(&ic.velocity).copied().collect();
            let mut path = ParticlePath { positions: vec![ic.position.clone()], flag: PathFlag::Complete };
            for &t in &times[..steps] {
                let step = || -> std::result::Result<Vec<f64>, PathFlag> {
                    let k1 = rhs(&y, t)?;
                    let k2 = rhs(&axpy(&y, 0.5 * dt, &k1), t + 0.5 * dt)?;
                    let k3 = rhs(&axpy(&y, 0.5 * dt, &k2), t + 0.5 * dt)?;
                    let k4 = rhs(&axpy(&y, dt, &k3), t + dt)?;
                    let next = rk4_combine(&y, dt, [&k1, &k2, &k3, &k4]);
                    locate(&grid, blocked, &next[..dim])?;
                    Ok(next)
                };
                match step() {
                    Ok(next) => {
                        y = next;
                        path.positions.push(y[..dim].to_vec());
                    }
                    Err(flag) => {
                        path.flag = flag;
                        break;
                    }
                }
            }
            path
        })
        .collect();
    Ok(TrajectorySet { kind: TrajectoryKind::Classical, times, initial_conditions: initial_conditions.to_vec(), paths })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleDeviation {
    pub sup: f64,
    pub mean: f64,
    /// Number of mesh times compared (shorter than the mesh when a path was
    /// truncated).
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryComparison {
    pub per_particle: Vec<ParticleDeviation>,
    pub max_deviation: f64,
    pub truncated: usize,
    pub entry: ReportEntry,
}

/// Euclidean position deviation per particle over the common recorded
/// times: sup and time mean, plus an entry judged against `tolerance`.
pub fn compare_trajectories(
    a: &TrajectorySet,
    b: &TrajectorySet,
    tolerance: f64,
    meta: EntryMeta,
) -> Result<TrajectoryComparison> {
    if a.paths.len() != b.paths.len() {
        return Err(Error::LengthMismatch { expected: a.paths.len(), got: b.paths.len() });
    }
    let same_mesh = a.times.len() == b.times.len()
        && a.times.iter().zip(&b.times).all(|(s, t)| (s - t).abs() <= 1e-12 * s.abs().max(1.0));
    if !same_mesh {
        return Err(Error::TimeMeshMismatch(format!(
            "{} mesh has {} times, {} mesh {}",
            a.kind,
            a.times.len(),
            b.kind,
            b.times.len()
        )));
    }
    let per_particle: Vec<ParticleDeviation> = a
        .paths
        .iter()
        .zip(&b.paths)
        .map(|(p, q)| {
            let d: Vec<f64> = p
                .positions
                .iter()
                .zip(&q.positions)
                .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
                .collect();
            ParticleDeviation {
                sup: d.iter().copied().fold(0.0, f64::max),
                mean: d.iter().sum::<f64>() / d.len() as f64,
                samples: d.len(),
            }
        })
        .collect();
    let max_deviation = per_particle.iter().map(|p| p.sup).fold(0.0, f64::max);
    let truncated = a.truncated() + b.truncated();
    let mut entry = ReportEntry::judge("trajectory_deviation", max_deviation, tolerance, meta);
    if truncated > 0 {
        entry = entry.with_note(format!("{truncated} truncated paths compared over their recorded prefix"));
    }
    Ok(TrajectoryComparison { per_particle, max_deviation, truncated, entry })
}
