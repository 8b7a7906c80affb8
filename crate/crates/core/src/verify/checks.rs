use std::f64::consts::PI;

use crate::dynamics::{bohmian_velocity, polar_decompose, EvolutionResult, Potential};
use crate::error::{Error, Result};
use crate::fields::{checkable_nodes, divergence, gradient, Grid, NodeMask, PhysicalConstants, ScalarField};
use crate::helmholtz::{time_derivative, verify_helmholtz};
use crate::potentials::{
    quantum_potential, squared_norm, GaugeShift, SemiclassicalScenario, StationaryScenario, TimeDependentScenario,
};

use super::report::{EntryMeta, ReportEntry, VerificationReport};

/// Multiple of machine epsilon times the magnitude of the assembled terms
/// allowed for the time-dependent assembly, where `∂ₜφ` is a difference
/// quotient over `dt`.
const ASSEMBLY_ROUNDING: f64 = 16.0;

/// Largest `|f(i)|` over checkable nodes; infinite when there are none.
fn max_checkable(grid: &Grid, mask: &NodeMask, f: impl Fn(usize) -> f64) -> f64 {
    let mut any = false;
    let m = checkable_nodes(grid, mask).fold(0.0, |m: f64, i| {
        any = true;
        m.max(f(i).abs())
    });
    if any {
        m
    } else {
        f64::INFINITY
    }
}

/// Nodes where a derivative of a derivative uses centred stencils only:
/// at least two nodes from a Dirichlet edge and from every masked node
/// along each axis.
fn composite_nodes(grid: &Grid, mask: &NodeMask) -> Vec<usize> {
    let periodic = grid.boundary() == crate::fields::Boundary::Periodic;
    (0..grid.len())
        .filter(|&i| {
            let idx = grid.multi_index(i);
            (0..grid.dim()).all(|a| {
                let n = grid.extents()[a];
                let s = grid.strides()[a];
                let base = i - idx[a] * s;
                if !periodic && (idx[a] < 2 || idx[a] + 2 >= n) {
                    return false;
                }
                (0..=4).all(|k| !mask.is_masked(base + ((idx[a] + n + k - 2) % n) * s))
            })
        })
        .collect()
}

fn max_composite(grid: &Grid, mask: &NodeMask, f: impl Fn(usize) -> f64) -> f64 {
    let nodes = composite_nodes(grid, mask);
    if nodes.is_empty() {
        return f64::INFINITY;
    }
    nodes.into_iter().fold(0.0, |m: f64, i| m.max(f(i).abs()))
}

fn max_unmasked(mask: &NodeMask, len: usize, f: impl Fn(usize) -> f64) -> f64 {
    (0..len).filter(|&i| !mask.is_masked(i)).fold(0.0, |m: f64, i| m.max(f(i).abs()))
}

/// `max |Q - K|` over checkable nodes (and time slices).
pub fn check_q_constancy(scenario: &SemiclassicalScenario, tolerance: f64) -> Result<ReportEntry> {
    let (measured, meta) = match scenario {
        SemiclassicalScenario::Stationary(sc) => {
            let (q, mask) = quantum_potential(&sc.r, &sc.constants, sc.eps_node)?;
            let k = sc.k();
            let d = max_checkable(sc.grid(), &mask, |i| q.values()[i] - k);
            (d, EntryMeta::new(sc.grid(), mask.fraction()))
        }
        SemiclassicalScenario::TimeDependent(td) => {
            let mut worst: f64 = 0.0;
            let mut frac: f64 = 0.0;
            for (r, k) in td.r.iter().zip(td.k_values()) {
                let (q, mask) = quantum_potential(r, &td.constants, td.eps_node)?;
                worst = worst.max(max_checkable(td.grid(), &mask, |i| q.values()[i] - k));
                frac = frac.max(mask.fraction());
            }
            (worst, EntryMeta::new(td.grid(), frac).with_dt(td.times[1] - td.times[0]))
        }
    };
    Ok(ReportEntry::judge("q_constancy", measured, tolerance, meta))
}

/// Continuity `∇·(R²∇S)` (on nodes two steps clear of edges and masks)
/// and the Hamilton-Jacobi equation
/// `|∇S|²/2m + V + Q - E` for a stationary scenario. The assembly entry
/// substitutes `Q = K`, which the constructor used, and is exact up to
/// rounding; the residual entry uses the discrete `Q`.
pub fn check_madelung_stationary(sc: &StationaryScenario) -> Result<Vec<ReportEntry>> {
    let grid = sc.grid();
    let tol = &sc.tolerances;
    let meta = EntryMeta::new(grid, sc.mask.fraction());
    let flux: Vec<ScalarField> =
        sc.grad_s.iter().map(|g| g.zip_with(&sc.r, |d, r| r * r * d)).collect::<Result<_>>()?;
    let div = divergence(&flux)?;
    let continuity = max_composite(grid, &sc.mask, |i| div.values()[i]);

    let inv2m = 0.5 / sc.constants.mass;
    let g2 = squared_norm(&sc.grad_s);
    let k = sc.k();
    let assembly = max_unmasked(&sc.mask, grid.len(), |i| g2[i] * inv2m + sc.v.values()[i] + k - sc.energy);
    let (q, qmask) = quantum_potential(&sc.r, &sc.constants, sc.eps_node)?;
    let residual = max_checkable(grid, &qmask, |i| g2[i] * inv2m + sc.v.values()[i] + q.values()[i] - sc.energy);

    Ok(vec![
        ReportEntry::judge("continuity_residual", continuity, tol.continuity, meta.clone()),
        ReportEntry::judge("qhj_assembly", assembly, tol.qhj_assembly, meta.clone()),
        ReportEntry::judge("qhj_residual", residual, tol.qhj_residual, meta),
    ])
}

/// Time-dependent continuity `∂ₜR² + ∇·(R²∇φ)/m` and Hamilton-Jacobi
/// `∂ₜφ + |∇φ|²/2m + V + Q` on every slice.
pub fn check_madelung_time_dependent(td: &TimeDependentScenario) -> Result<Vec<ReportEntry>> {
    let grid = td.grid();
    let tol = &td.tolerances;
    let m = td.constants.mass;
    let inv2m = 0.5 / m;
    let dt = td.times[1] - td.times[0];
    let (mut continuity, mut assembly, mut residual, mut frac): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let mut rounding: f64 = 0.0;
    for (n, k) in td.k_values().into_iter().enumerate() {
        let r = &td.r[n];
        let mask = &td.masks[n];
        frac = frac.max(mask.fraction());
        let flux: Vec<ScalarField> =
            td.grad_phi[n].iter().map(|g| g.zip_with(r, |d, r| r * r * d / m)).collect::<Result<_>>()?;
        let div = divergence(&flux)?;
        continuity = continuity
            .max(max_composite(grid, mask, |i| 2.0 * r.values()[i] * td.dr_dt[n].values()[i] + div.values()[i]));
        let g2 = squared_norm(&td.grad_phi[n]);
        let base = |i: usize| td.dphi_dt[n].values()[i] + g2[i] * inv2m + td.v[n].values()[i];
        assembly = assembly.max(max_unmasked(mask, grid.len(), |i| base(i) + k));
        let scale = 2.0 * max_unmasked(mask, grid.len(), |i| td.phi[n].values()[i]) / dt
            + max_unmasked(mask, grid.len(), |i| td.v[n].values()[i])
            + max_unmasked(mask, grid.len(), |i| g2[i] * inv2m)
            + k;
        rounding = rounding.max(ASSEMBLY_ROUNDING * f64::EPSILON * scale);
        let (q, qmask) = quantum_potential(r, &td.constants, td.eps_node)?;
        residual = residual.max(max_checkable(grid, &qmask, |i| base(i) + q.values()[i]));
    }
    let meta = EntryMeta::new(grid, frac).with_dt(dt);
    let mut assembly_entry = ReportEntry::judge("qhj_assembly", assembly, tol.qhj_assembly.max(rounding), meta.clone());
    if rounding > tol.qhj_assembly {
        assembly_entry = assembly_entry.with_note("tolerance raised to the rounding level of the time difference");
    }
    Ok(vec![
        ReportEntry::judge("continuity_residual", continuity, tol.continuity, meta.clone()),
        assembly_entry,
        ReportEntry::judge("qhj_residual", residual, tol.qhj_residual, meta),
    ])
}

pub fn check_madelung(scenario: &SemiclassicalScenario) -> Result<Vec<ReportEntry>> {
    match scenario {
        SemiclassicalScenario::Stationary(sc) => check_madelung_stationary(sc),
        SemiclassicalScenario::TimeDependent(td) => check_madelung_time_dependent(td),
    }
}

/// Madelung residuals of an evolved wave function: each stored slice is
/// polar-decomposed, phases are unwrapped in time node by node, and time
/// derivatives use the stored-slice mesh.
pub fn check_madelung_evolution(
    evolution: &EvolutionResult,
    potential: &Potential,
    constants: &PhysicalConstants,
    eps_node: f64,
    tolerances: (f64, f64),
) -> Result<Vec<ReportEntry>> {
    let grid = evolution.grid().clone();
    let hbar = constants.hbar;
    let m = constants.mass;
    let mut rs = Vec::with_capacity(evolution.psi.len());
    let mut phis: Vec<ScalarField> = Vec::with_capacity(evolution.psi.len());
    let mut mask = NodeMask::none(grid.len());
    for psi in &evolution.psi {
        let d = polar_decompose(psi, constants, eps_node)?;
        let phi = match phis.last() {
            None => d.phi,
            Some(prev) => d.phi.zip_with(prev, |p, q| p + 2.0 * PI * hbar * ((q - p) / (2.0 * PI * hbar)).round())?,
        };
        mask = mask.union(&d.mask);
        rs.push(d.r);
        phis.push(phi);
    }
    let r2: Vec<ScalarField> = rs.iter().map(|r| r.map(|v| v * v)).collect::<Result<_>>()?;
    let dr2 = time_derivative(&r2, &evolution.times)?;
    let dphi = time_derivative(&phis, &evolution.times)?;
    let (mut continuity, mut residual): (f64, f64) = (0.0, 0.0);
    for n in 0..evolution.times.len() {
        let grad = gradient(&phis[n]);
        let flux: Vec<ScalarField> =
            grad.iter().map(|g| g.zip_with(&r2[n], |d, r2| r2 * d / m)).collect::<Result<_>>()?;
        let div = divergence(&flux)?;
        continuity = continuity.max(max_composite(&grid, &mask, |i| dr2[n].values()[i] + div.values()[i]));
        let (q, _) = quantum_potential(&rs[n], constants, eps_node)?;
        let v = potential.values_at(evolution.times[n]);
        let g2 = squared_norm(&grad);
        residual = residual
            .max(max_checkable(&grid, &mask, |i| dphi[n].values()[i] + g2[i] / (2.0 * m) + v[i] + q.values()[i]));
    }
    let meta = EntryMeta::new(&grid, mask.fraction()).with_dt(evolution.dt);
    Ok(vec![
        ReportEntry::judge("evolution_continuity_residual", continuity, tolerances.0, meta.clone()),
        ReportEntry::judge("evolution_qhj_residual", residual, tolerances.1, meta),
    ])
}

/// Field-level gauge checks between a scenario and its shifted image:
/// `Q' = Q`, `V' - V = f`, `φ' - φ = ζ`.
pub fn check_gauge_fields(
    original: &TimeDependentScenario,
    shifted: &TimeDependentScenario,
    shift: &GaugeShift,
    tolerance: f64,
) -> Result<Vec<ReportEntry>> {
    if original.times.len() != shifted.times.len() || shift.times.len() != original.times.len() {
        return Err(Error::TimeMeshMismatch("gauge check needs aligned meshes".into()));
    }
    let grid = original.grid();
    let len = grid.len();
    let (mut dq, mut dv, mut dphi, mut frac): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for n in 0..original.times.len() {
        let mask = &original.masks[n];
        frac = frac.max(mask.fraction());
        let (q0, _) = quantum_potential(&original.r[n], &original.constants, original.eps_node)?;
        let (q1, _) = quantum_potential(&shifted.r[n], &shifted.constants, shifted.eps_node)?;
        dq = dq.max(max_unmasked(mask, len, |i| q1.values()[i] - q0.values()[i]));
        let f = shift.f[n];
        dv = dv.max(max_unmasked(mask, len, |i| shifted.v[n].values()[i] - original.v[n].values()[i] - f));
        let z = shift.zeta[n];
        dphi = dphi.max(max_unmasked(mask, len, |i| shifted.phi[n].values()[i] - original.phi[n].values()[i] - z));
    }
    let meta = EntryMeta::new(grid, frac).with_dt(original.times[1] - original.times[0]);
    Ok(vec![
        ReportEntry::judge("gauge_q_unchanged", dq, tolerance, meta.clone()),
        ReportEntry::judge("gauge_v_shift", dv, tolerance, meta.clone()),
        ReportEntry::judge("gauge_phase_shift", dphi, tolerance, meta),
    ])
}

/// Largest difference of Bohmian velocities between two evolutions over
/// common stored slices and nodes unmasked in both.
pub fn velocity_difference(
    a: &EvolutionResult,
    b: &EvolutionResult,
    constants: &PhysicalConstants,
    eps_node: f64,
) -> Result<f64> {
    if a.times.len() != b.times.len() || a.grid() != b.grid() {
        return Err(Error::TimeMeshMismatch("evolutions are not aligned".into()));
    }
    let mut worst: f64 = 0.0;
    for (p, q) in a.psi.iter().zip(&b.psi) {
        let va = bohmian_velocity(p, constants, eps_node);
        let vb = bohmian_velocity(q, constants, eps_node);
        for (x, y) in va.iter().zip(&vb) {
            for i in 0..p.values().len() {
                if p.values()[i].norm() >= eps_node && q.values()[i].norm() >= eps_node {
                    worst = worst.max((x.values()[i] - y.values()[i]).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Helmholtz, Q-constancy and Madelung entries for a scenario.
pub fn scenario_report(
    scenario: &SemiclassicalScenario,
    scenario_id: &str,
    config_hash: &str,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(scenario_id, config_hash);
    let tol = scenario.tolerances().clone();
    match scenario {
        SemiclassicalScenario::Stationary(sc) => {
            report.push(rename(verify_helmholtz(&sc.r, sc.lambda, tol.helmholtz), "helmholtz_r", sc.mask.fraction()));
            report.push(rename(
                verify_helmholtz(&sc.s_tilde, sc.lambda, tol.helmholtz),
                "helmholtz_s_tilde",
                sc.mask.fraction(),
            ));
        }
        SemiclassicalScenario::TimeDependent(td) => {
            let mut worst: f64 = 0.0;
            for (r, t) in td.r.iter().zip(&td.times) {
                worst = worst.max(crate::helmholtz::helmholtz_residual(r, td.lambda.at(*t)));
            }
            let frac = td.masks.iter().map(NodeMask::fraction).fold(0.0, f64::max);
            report.push(ReportEntry::judge(
                "helmholtz_r",
                worst,
                tol.helmholtz,
                EntryMeta::new(td.grid(), frac).with_dt(td.times[1] - td.times[0]),
            ));
        }
    }
    report.push(check_q_constancy(scenario, tol.q_constancy)?);
    report.extend(check_madelung(scenario)?);
    Ok(report)
}

fn rename(mut entry: ReportEntry, name: &str, mask_fraction: f64) -> ReportEntry {
    entry.name = name.into();
    entry.meta.mask_fraction = mask_fraction;
    entry
}
