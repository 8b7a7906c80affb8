use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{Boundary, ComplexField, Grid, NodeMask, PhysicalConstants, ScalarField};
use crate::linalg::{band_ordering, BandLu, SparseMatrix};
use crate::potentials::GaugeShift;

/// Norm drift allowed per unit time for closed evolutions.
pub const UNITARITY_TOL: f64 = 1e-10;

pub const SCHEME: &str = "crank_nicolson";

/// Potential driving an evolution: one field, or samples on a time mesh
/// interpolated linearly (held constant outside the mesh).
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Static(ScalarField),
    Sequence { times: Vec<f64>, fields: Vec<ScalarField> },
}

impl Potential {
    pub fn sequence(times: Vec<f64>, fields: Vec<ScalarField>) -> Result<Self> {
        if times.len() != fields.len() || times.is_empty() {
            return Err(Error::LengthMismatch { expected: times.len(), got: fields.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonUniformTimeMesh);
        }
        if fields.iter().any(|f| f.grid() != fields[0].grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(Potential::Sequence { times, fields })
    }

    pub fn grid(&self) -> &Grid {
        match self {
            Potential::Static(v) => v.grid(),
            Potential::Sequence { fields, .. } => fields[0].grid(),
        }
    }

    /// Samples at time `t`.
    pub fn values_at(&self, t: f64) -> Vec<f64> {
        match self {
            Potential::Static(v) => v.values().to_vec(),
            Potential::Sequence { times, fields } => {
                let n = times.len();
                if n == 1 || t <= times[0] {
                    return fields[0].values().to_vec();
                }
                if t >= times[n - 1] {
                    return fields[n - 1].values().to_vec();
                }
                let k = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[k]) / (times[k + 1] - times[k]);
                fields[k].values().iter().zip(fields[k + 1].values()).map(|(a, b)| a * (1.0 - w) + b * w).collect()
            }
        }
    }

    /// Adds a spatially uniform, time-dependent shift sampled on `shift`'s
    /// mesh. A static potential becomes a sequence on that mesh.
    pub fn shifted(&self, shift: &GaugeShift) -> Result<Potential> {
        let fields = shift
            .times
            .iter()
            .zip(&shift.f)
            .map(|(&t, &f)| {
                let base = self.values_at(t);
                ScalarField::new(self.grid().clone(), base.into_iter().map(|v| v + f).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Potential::sequence(shift.times.clone(), fields)
    }
}

/// Values imposed on Dirichlet boundary nodes during an evolution.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum BoundaryDrive {
    /// Boundary nodes stay at zero; the evolution is closed and unitary.
    #[default]
    Zero,
    /// Boundary nodes follow `Ψ₀ exp(i(-E t + ζ(t))/ħ)`, the exact boundary
    /// trace of a stationary state with energy `E`, optionally gauge-shifted.
    Stationary { energy: f64, gauge: Option<GaugeShift> },
    /// Full-grid samples of `Ψ` on a time mesh; boundary nodes take the
    /// linear interpolant.
    Samples { times: Vec<f64>, values: Vec<ComplexField> },
}

impl BoundaryDrive {
    fn values(&self, t: f64, nodes: &[usize], start: &[Complex64], hbar: f64) -> Result<Vec<Complex64>> {
        match self {
            BoundaryDrive::Zero => Ok(vec![Complex64::new(0.0, 0.0); nodes.len()]),
            BoundaryDrive::Stationary { energy, gauge } => {
                let z = match gauge {
                    Some(g) => g.zeta_at(t)?,
                    None => 0.0,
                };
                let rot = Complex64::from_polar(1.0, (z - energy * t) / hbar);
                Ok(start.iter().map(|b| b * rot).collect())
            }
            BoundaryDrive::Samples { times, values } => {
                let n = times.len();
                let (k, w) = if n == 1 || t <= times[0] {
                    (0, 0.0)
                } else if t >= times[n - 1] {
                    (n - 1, 0.0)
                } else {
                    let k = times.partition_point(|&s| s <= t) - 1;
                    (k, (t - times[k]) / (times[k + 1] - times[k]))
                };
                Ok(nodes
                    .iter()
                    .map(|&i| {
                        let a = values[k].values()[i];
                        if w == 0.0 {
                            a
                        } else {
                            a * (1.0 - w) + values[k + 1].values()[i] * w
                        }
                    })
                    .collect())
            }
        }
    }
}

/// Time step, horizon and storage options for [`evolve_schrodinger`].
#[derive(Clone, Debug, PartialEq)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    pub drive: BoundaryDrive,
    /// Keep every `stride`-th step (the final step is always kept).
    pub stride: usize,
}

impl EvolveOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        EvolveOptions { dt, t_end, drive: BoundaryDrive::Zero, stride: 1 }
    }

    pub fn with_drive(mut self, drive: BoundaryDrive) -> Self {
        self.drive = drive;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub psi: Vec<ComplexField>,
    /// Discrete L2 norm at every step (not only stored ones).
    pub norm_history: Vec<f64>,
    pub dt: f64,
    pub scheme: &'static str,
    /// True when no boundary data is imposed, so the scheme is unitary.
    pub closed: bool,
    /// Largest relative norm drift over the run.
    pub max_norm_drift: f64,
}

impl EvolutionResult {
    pub fn grid(&self) -> &Grid {
        self.psi[0].grid()
    }

    /// Multiplies every stored slice by `exp(iζ(t)/ħ)`.
    pub fn gauge_shifted(&self, shift: &GaugeShift, hbar: f64) -> Result<EvolutionResult> {
        let psi = self
            .times
            .iter()
            .zip(&self.psi)
            .map(|(&t, p)| p.with_global_phase(shift.zeta_at(t)? / hbar))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvolutionResult { psi, ..self.clone() })
    }

    /// Largest `| |Ψ(x,t)| - R(x) |` over stored slices and unmasked nodes.
    pub fn amplitude_deviation(&self, r: &ScalarField, mask: &NodeMask) -> f64 {
        self.psi
            .iter()
            .map(|p| {
                p.values()
                    .iter()
                    .zip(r.values())
                    .enumerate()
                    .filter(|(i, _)| !mask.is_masked(*i))
                    .map(|(_, (z, r))| (z.norm() - r).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

/// `-ħ²/2m ∇²` with the centred stencil on rows that evolve. Boundary rows
/// of Dirichlet grids are left empty.
fn kinetic_operator(grid: &Grid, constants: &PhysicalConstants) -> SparseMatrix<f64> {
    let c = -constants.hbar * constants.hbar / (2.0 * constants.mass);
    let mut m = SparseMatrix::new(grid.len());
    for i in 0..grid.len() {
        if !grid.is_interior(i) {
            continue;
        }
        let idx = grid.multi_index(i);
        for axis in 0..grid.dim() {
            let h = grid.spacing()[axis];
            let w = c / (h * h);
            let n = grid.extents()[axis];
            let s = grid.strides()[axis];
            let base = i - idx[axis] * s;
            let minus = base + ((idx[axis] + n - 1) % n) * s;
            let plus = base + ((idx[axis] + 1) % n) * s;
            m.add(i, i, -2.0 * w);
            m.add(i, minus, w);
            m.add(i, plus, w);
        }
    }
    m
}

struct Stepper {
    grid: Grid,
    kinetic: SparseMatrix<f64>,
    perm: Vec<usize>,
    alpha: f64,
    reduced: Vec<f64>,
    lu: Option<BandLu<Complex64>>,
}

impl Stepper {
    fn prepare(&mut self, reduced: Vec<f64>) -> Result<()> {
        if self.lu.is_some() && reduced == self.reduced {
            return Ok(());
        }
        let n = self.grid.len();
        let mut a = SparseMatrix::<Complex64>::new(n);
        let ia = Complex64::new(0.0, self.alpha);
        for i in 0..n {
            if self.grid.is_interior(i) {
                a.add(i, i, Complex64::new(1.0, 0.0) + ia * reduced[i]);
                for &(j, k) in self.kinetic.row(i) {
                    a.add(i, j, ia * k);
                }
            } else {
                a.add(i, i, Complex64::new(1.0, 0.0));
            }
        }
        let lu = BandLu::factor(&a, &self.perm)
            .map_err(|s| Error::InvalidArgument(format!("Crank-Nicolson matrix singular at column {}", s.column)))?;
        self.lu = Some(lu);
        self.reduced = reduced;
        Ok(())
    }

    /// `(I - iαH) ψ` on evolving rows.
    fn explicit_half(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let ia = Complex64::new(0.0, self.alpha);
        (0..psi.len())
            .map(|i| {
                if !self.grid.is_interior(i) {
                    return psi[i];
                }
                let hpsi = self.kinetic.row(i).iter().fold(psi[i] * self.reduced[i], |acc, &(j, k)| acc + psi[j] * k);
                psi[i] - ia * hpsi
            })
            .collect()
    }
}

/// Crank-Nicolson evolution of `iħ ∂Ψ/∂t = -ħ²/2m ∇²Ψ + VΨ`.
///
/// The spatial mean of `V` at each half step is split off and integrated
/// exactly as a global phase, so adding a uniform `f(t)` to `V` multiplies
/// the result by `exp(-i∫f/ħ)` up to rounding. Time-dependent potentials are
/// sampled at half steps. Closed Dirichlet runs start from `Ψ₀` with its
/// boundary samples set to zero.
pub fn evolve_schrodinger(
    psi0: &ComplexField,
    potential: &Potential,
    constants: &PhysicalConstants,
    options: &EvolveOptions,
) -> Result<EvolutionResult> {
    let grid = psi0.grid().clone();
    if potential.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    if let BoundaryDrive::Samples { times, values } = &options.drive {
        if times.is_empty() || times.len() != values.len() || values.iter().any(|v| v.grid() != &grid) {
            return Err(Error::InvalidArgument("boundary samples do not match the grid or time mesh".into()));
        }
    }
    let EvolveOptions { dt, t_end, ref drive, stride } = *options;
    if !(dt.is_finite() && dt > 0.0 && t_end.is_finite() && t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("need dt > 0 and T > 0, got dt = {dt}, T = {t_end}")));
    }
    let steps = (t_end / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - t_end).abs() > 1e-9 * t_end {
        return Err(Error::InvalidArgument(format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    let stride = stride.max(1);
    let closed = grid.boundary() == Boundary::Periodic || *drive == BoundaryDrive::Zero;
    let boundary_nodes: Vec<usize> = (0..grid.len()).filter(|&i| !grid.is_interior(i)).collect();
    let boundary_start: Vec<Complex64> = boundary_nodes.iter().map(|&i| psi0.values()[i]).collect();
    let hbar = constants.hbar;

    let mut stepper = Stepper {
        kinetic: kinetic_operator(&grid, constants),
        perm: band_ordering(&grid),
        alpha: dt / (2.0 * hbar),
        reduced: Vec::new(),
        lu: None,
        grid: grid.clone(),
    };

    let mut psi_hat = psi0.values().to_vec();
    if closed {
        for &i in &boundary_nodes {
            psi_hat[i] = Complex64::new(0.0, 0.0);
        }
    }
    let psi0 = ComplexField::new(grid.clone(), psi_hat.clone())?;
    let norm0 = psi0.norm();
    let mut theta = 0.0;
    let mut times = vec![0.0];
    let mut stored = vec![psi0];
    let mut norms = vec![norm0];
    let mut max_drift: f64 = 0.0;

    for step in 0..steps {
        let t = step as f64 * dt;
        let t_next = (step + 1) as f64 * dt;
        let v_half = potential.values_at(t + 0.5 * dt);
        let interior: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_interior(i)).collect();
        let mean = interior.iter().map(|&i| v_half[i]).sum::<f64>() / interior.len() as f64;
        let reduced: Vec<f64> = v_half.iter().map(|v| v - mean).collect();
        stepper.prepare(reduced)?;
        let mut rhs = stepper.explicit_half(&psi_hat);
        theta += mean * dt;
        let rot = Complex64::from_polar(1.0, theta / hbar);
        for (&i, b) in boundary_nodes.iter().zip(drive.values(t_next, &boundary_nodes, &boundary_start, hbar)?) {
            rhs[i] = b * rot;
        }
        psi_hat = stepper.lu.as_ref().expect("factored").solve(&rhs);
        let norm = crate::fields::field_l2(&psi_hat, grid.cell_volume());
        norms.push(norm);
        let drift = if norm0 > 0.0 { (norm - norm0).abs() / norm0 } else { 0.0 };
        max_drift = max_drift.max(drift);
        if closed {
            let allowed = UNITARITY_TOL * t_next.max(1.0);
            if drift > allowed {
                return Err(Error::UnitarityFailure { step: step + 1, drift, allowed });
            }
        }
        if (step + 1) % stride == 0 || step + 1 == steps {
            let back = Complex64::from_polar(1.0, -theta / hbar);
            let values = psi_hat.iter().map(|z| z * back).collect();
            stored.push(ComplexField::new(grid.clone(), values)?);
            times.push(t_next);
        }
    }

    Ok(EvolutionResult {
        times,
        psi: stored,
        norm_history: norms,
        dt,
        scheme: SCHEME,
        closed,
        max_norm_drift: max_drift,
    })
}

/// Replaces masked samples by the value of the nearest unmasked node
/// (breadth-first over grid neighbours, ties broken by node order).
pub fn fill_masked(field: &ScalarField, mask: &NodeMask) -> Result<ScalarField> {
    let grid = field.grid();
    if mask.count() == mask.len() {
        return Err(Error::DegenerateAmplitude);
    }
    let mut values = field.values().to_vec();
    let mut done: Vec<bool> = (0..grid.len()).map(|i| !mask.is_masked(i)).collect();
    let mut frontier: Vec<usize> = (0..grid.len()).filter(|&i| done[i]).collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &i in &frontier {
            for j in grid.neighbors(i) {
                if !done[j] {
                    done[j] = true;
                    values[j] = values[i];
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    ScalarField::new(grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::helmholtz::{evaluate_mode, HelmholtzMode};
    use crate::potentials::{construct_stationary, ScenarioOptions};
    use std::f64::consts::PI;

    fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn free_plane_wave_keeps_its_amplitude() {
        let g = Grid::uniform(1, 64, 0.0, 2.0 * PI, Boundary::Periodic).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, 2.0 * x[0])).unwrap().normalized().unwrap();
        let v = Potential::Static(ScalarField::zeros(&g));
        let evo = evolve_schrodinger(&psi, &v, &PhysicalConstants::natural(), &EvolveOptions::new(1e-3, 1.0)).unwrap();
        let a0 = psi.values()[0].norm();
        for p in &evo.psi {
            for z in p.values() {
                assert!((z.norm() - a0).abs() <= 1e-8);
            }
        }
        assert!(evo.closed);
        assert_eq!(evo.scheme, "crank_nicolson");
        assert_eq!(evo.norm_history.len(), 1001);
    }

    #[test]
    fn constant_potential_is_a_global_phase() {
        let g = Grid::uniform(1, 80, -3.0, 3.0, Boundary::DirichletZero).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::from_polar((-2.0 * x[0] * x[0]).exp(), 0.3 * x[0])).unwrap();
        let c = PhysicalConstants::new(0.8, 1.3).unwrap();
        let opts = EvolveOptions::new(2e-3, 1.0);
        let free = evolve_schrodinger(&psi, &Potential::Static(ScalarField::zeros(&g)), &c, &opts).unwrap();
        let shifted =
            evolve_schrodinger(&psi, &Potential::Static(ScalarField::constant(&g, 2.5).unwrap()), &c, &opts).unwrap();
        for ((t, a), b) in free.times.iter().zip(&free.psi).zip(&shifted.psi) {
            let expect = a.with_global_phase(-2.5 * t / c.hbar).unwrap();
            assert!(max_diff(&expect, b) <= 1e-8);
        }
    }

    #[test]
    fn closed_evolution_conserves_norm() {
        let g = Grid::uniform(2, 24, -1.0, 1.0, Boundary::DirichletZero).unwrap();
        let psi = ComplexField::from_fn(&g, |x| {
            Complex64::from_polar((-(x[0] * x[0] + x[1] * x[1]) * 6.0).exp(), 3.0 * x[0])
        })
        .unwrap();
        let v = Potential::Static(ScalarField::from_fn(&g, |x| 4.0 * x[0] * x[1] + x[1]).unwrap());
        let evo = evolve_schrodinger(&psi, &v, &PhysicalConstants::natural(), &EvolveOptions::new(5e-3, 1.0)).unwrap();
        assert!(evo.max_norm_drift <= 1e-10, "{}", evo.max_norm_drift);
    }

    #[test]
    fn stationary_scenario_keeps_its_amplitude() {
        let g = Grid::uniform(1, 241, -1.2, 1.2, Boundary::DirichletZero).unwrap();
        let c = PhysicalConstants::natural();
        let r = evaluate_mode(&HelmholtzMode::cosine_1d(1.0, 0.0), &g).unwrap();
        let st = evaluate_mode(&HelmholtzMode::cosine_1d(1.0, -PI / 2.0), &g).unwrap();
        let sc = construct_stationary(r, st, 0.0, 1.0, c, &ScenarioOptions::default()).unwrap();
        let psi = ComplexField::from_polar(&sc.r, &sc.s, c.hbar).unwrap();
        let opts = EvolveOptions::new(1e-3, 1.0).with_drive(BoundaryDrive::Stationary { energy: 0.0, gauge: None });
        let evo = evolve_schrodinger(&psi, &Potential::Static(sc.v.clone()), &c, &opts).unwrap();
        assert!(!evo.closed);
        let dev = evo.amplitude_deviation(&sc.r, &sc.mask);
        assert!(dev < 1e-3, "{dev}");
    }

    #[test]
    fn rejects_bad_steps() {
        let g = Grid::uniform(1, 8, 0.0, 1.0, Boundary::DirichletZero).unwrap();
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0)).unwrap();
        let v = Potential::Static(ScalarField::zeros(&g));
        let c = PhysicalConstants::natural();
        assert!(evolve_schrodinger(&psi, &v, &c, &EvolveOptions::new(0.0, 1.0)).is_err());
        assert!(evolve_schrodinger(&psi, &v, &c, &EvolveOptions::new(0.3, 1.0)).is_err());
    }

    #[test]
    fn stride_keeps_the_final_slice() {
        let g = Grid::uniform(1, 8, 0.0, 1.0, Boundary::Periodic).unwrap();
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0)).unwrap();
        let v = Potential::Static(ScalarField::zeros(&g));
        let evo =
            evolve_schrodinger(&psi, &v, &PhysicalConstants::natural(), &EvolveOptions::new(0.1, 1.0).with_stride(4))
                .unwrap();
        assert_eq!(evo.times.len(), 4);
        assert!((evo.times[3] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fill_masked_copies_nearest_value() {
        let g = Grid::uniform(1, 6, 0.0, 1.0, Boundary::DirichletZero).unwrap();
        let f = ScalarField::new(g, vec![1.0, 2.0, 0.0, 0.0, 0.0, 6.0]).unwrap();
        let m = NodeMask::from_vec(vec![false, false, true, true, true, false]);
        assert_eq!(fill_masked(&f, &m).unwrap().values(), &[1.0, 2.0, 2.0, 2.0, 6.0, 6.0]);
    }
}
