//! Quantum potential, semiclassical potential construction and the
//! time-dependent gauge shift.
//!
//! A semiclassical potential is one for which the quantum potential
//! `Q = -ħ²∇²R / (2mR)` depends on time only, `Q = K(t)`. Writing
//! `K = (ħλ)²/2m`, the amplitude solves `∇²R + λ²R = 0`. In the stationary
//! case the phase numerator `S̃ = R S` solves the same equation and
//!
//! ```text
//! V = E - ((ħλ)² + |∇(S̃/R)|²) / 2m.
//! ```
//!
//! In the time-dependent case `φ̃ = R φ` solves `(∇² + λ²) φ̃ = -2m ∂R/∂t`
//! and `V = -∂(φ̃/R)/∂t - ((ħλ)² + |∇(φ̃/R)|²) / 2m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    checkable_nodes, gradient, laplacian, raw_gradient, Grid, NodeMask, PhysicalConstants, ScalarField,
};
use crate::helmholtz::{helmholtz_residual, interpolate, time_derivative, uniform_step, LambdaSchedule};

/// Relative node threshold used when none is configured: nodes with
/// `|R| < 1e-6 max|R|` are masked.
pub const DEFAULT_RELATIVE_EPS_NODE: f64 = 1e-6;

/// Largest fraction of nodes whose mask state may flip between adjacent
/// time slices.
pub const MAX_MASK_CHANGE: f64 = 0.05;

pub fn default_eps_node(r: &ScalarField) -> f64 {
    DEFAULT_RELATIVE_EPS_NODE * r.max_abs()
}

/// Construction and verification tolerances carried by a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Max Helmholtz residual accepted for `R` and the phase numerator.
    pub helmholtz: f64,
    /// Max residual of the inhomogeneous constraint on `φ̃`.
    pub inhomogeneous: f64,
    /// Budget for `max |Q - K|`.
    pub q_constancy: f64,
    /// Budget for the continuity residual.
    pub continuity: f64,
    /// Budget for the Hamilton-Jacobi residual with the discrete `Q`.
    pub qhj_residual: f64,
    /// Bound on the Hamilton-Jacobi assembly with `Q = K` substituted.
    pub qhj_assembly: f64,
    /// Budget for `max | |Ψ(t)| - R |` in evolutions of stationary scenarios.
    pub stationarity: f64,
    /// Budget for classical versus Bohmian path deviation.
    pub trajectory: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            helmholtz: 1e-2,
            inhomogeneous: 1e-2,
            q_constancy: 1e-3,
            continuity: 1e-3,
            qhj_residual: 1e-3,
            qhj_assembly: 1e-12,
            stationarity: 1e-3,
            trajectory: 1e-3,
        }
    }
}

/// Options for the scenario constructors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScenarioOptions {
    /// Absolute node threshold; `None` means [`default_eps_node`].
    pub eps_node: Option<f64>,
    pub tolerances: Tolerances,
}

/// `Q = -ħ²∇²R / (2mR)` on nodes with `|R| >= eps_node`.
///
/// Masked nodes carry zero in the returned field.
pub fn quantum_potential(
    r: &ScalarField,
    constants: &PhysicalConstants,
    eps_node: f64,
) -> Result<(ScalarField, NodeMask)> {
    let mask = NodeMask::from_amplitude(r, eps_node);
    if mask.count() == mask.len() {
        return Err(Error::DegenerateAmplitude);
    }
    let lap = laplacian(r);
    let c = -constants.hbar * constants.hbar / (2.0 * constants.mass);
    let values = (0..r.grid().len())
        .map(|i| if mask.is_masked(i) { 0.0 } else { c * lap.values()[i] / r.values()[i] })
        .collect();
    Ok((ScalarField::new(r.grid().clone(), values)?, mask))
}

/// `N / R` on unmasked nodes, zero on masked ones.
pub fn phase_from_numerator(r: &ScalarField, numerator: &ScalarField, mask: &NodeMask) -> Result<ScalarField> {
    let values = (0..r.grid().len())
        .map(|i| if mask.is_masked(i) { 0.0 } else { numerator.values()[i] / r.values()[i] })
        .collect();
    ScalarField::new(r.grid().clone(), values)
}

/// `∇(N/R) = (R∇N - N∇R) / R²` on unmasked nodes, zero on masked ones.
///
/// The quotient form avoids differencing `N/R` across nearly-nodal
/// neighbours.
pub fn phase_gradient(r: &ScalarField, numerator: &ScalarField, mask: &NodeMask) -> Result<Vec<ScalarField>> {
    if r.grid() != numerator.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = r.grid();
    let gr = raw_gradient(grid, r.values());
    let gn = raw_gradient(grid, numerator.values());
    gr.iter()
        .zip(&gn)
        .map(|(dr, dn)| {
            let values = (0..grid.len())
                .map(|i| {
                    if mask.is_masked(i) {
                        0.0
                    } else {
                        let (rv, nv) = (r.values()[i], numerator.values()[i]);
                        (rv * dn[i] - nv * dr[i]) / (rv * rv)
                    }
                })
                .collect();
            ScalarField::new(grid.clone(), values)
        })
        .collect()
}

pub(crate) fn squared_norm(v: &[ScalarField]) -> Vec<f64> {
    let n = v[0].values().len();
    (0..n).map(|i| v.iter().map(|c| c.values()[i] * c.values()[i]).sum()).collect()
}

fn require_helmholtz(field: &ScalarField, name: &str, lambda: f64, tol: f64) -> Result<()> {
    let residual = helmholtz_residual(field, lambda);
    if residual <= tol {
        Ok(())
    } else {
        Err(Error::HelmholtzPrecondition { field: name.into(), residual, tol })
    }
}

/// A stationary semiclassical scenario: `Ψ = R exp(i(S - Et)/ħ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StationaryScenario {
    pub constants: PhysicalConstants,
    pub r: ScalarField,
    pub s_tilde: ScalarField,
    /// `S = S̃ / R` (zero on masked nodes).
    pub s: ScalarField,
    /// `∇S`, one component per axis.
    pub grad_s: Vec<ScalarField>,
    pub energy: f64,
    pub lambda: f64,
    pub v: ScalarField,
    pub mask: NodeMask,
    pub eps_node: f64,
    pub tolerances: Tolerances,
}

impl StationaryScenario {
    pub fn grid(&self) -> &Grid {
        self.r.grid()
    }

    /// K = (ħλ)² / 2m.
    pub fn k(&self) -> f64 {
        self.constants.k_from_lambda(self.lambda)
    }

    /// Rebuilds derived fields from stored payloads without re-running the
    /// Helmholtz preconditions; used when loading artifacts.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        constants: PhysicalConstants,
        r: ScalarField,
        s_tilde: ScalarField,
        v: ScalarField,
        energy: f64,
        lambda: f64,
        eps_node: f64,
        tolerances: Tolerances,
    ) -> Result<Self> {
        if r.grid() != s_tilde.grid() || r.grid() != v.grid() {
            return Err(Error::GridMismatch);
        }
        let mask = NodeMask::from_amplitude(&r, eps_node);
        if mask.count() == mask.len() {
            return Err(Error::DegenerateAmplitude);
        }
        let s = phase_from_numerator(&r, &s_tilde, &mask)?;
        let grad_s = phase_gradient(&r, &s_tilde, &mask)?;
        Ok(StationaryScenario { constants, r, s_tilde, s, grad_s, energy, lambda, v, mask, eps_node, tolerances })
    }

    /// φ(x, t) = S(x) - E t.
    pub fn phase_at(&self, t: f64) -> Result<ScalarField> {
        let e = self.energy;
        self.s.map(|s| s - e * t)
    }

    /// Embeds the scenario in the time-dependent representation on `times`,
    /// with `φ̃(t) = S̃ - E t R`.
    pub fn to_time_dependent(&self, times: Vec<f64>) -> Result<TimeDependentScenario> {
        let schedule = LambdaSchedule::constant(self.lambda, times.clone())?;
        let r_seq = vec![self.r.clone(); times.len()];
        let phi_tilde =
            times.iter().map(|&t| self.s_tilde.axpby(1.0, &self.r, -self.energy * t)).collect::<Result<Vec<_>>>()?;
        let options = ScenarioOptions { eps_node: Some(self.eps_node), tolerances: self.tolerances.clone() };
        let mut td = construct_time_dependent(r_seq, phi_tilde, times, schedule, self.constants, &options)?;
        td.energy = Some(self.energy);
        Ok(td)
    }
}

/// Stationary constructor.
///
/// Requires `R` and `S̃` to solve the Helmholtz equation with the same λ at
/// `options.tolerances.helmholtz`.
pub fn construct_stationary(
    r: ScalarField,
    s_tilde: ScalarField,
    energy: f64,
    lambda: f64,
    constants: PhysicalConstants,
    options: &ScenarioOptions,
) -> Result<StationaryScenario> {
    if r.grid() != s_tilde.grid() {
        return Err(Error::GridMismatch);
    }
    if !(energy.is_finite() && lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("need finite E and lambda >= 0, got {energy}, {lambda}")));
    }
    let tol = options.tolerances.helmholtz;
    require_helmholtz(&r, "R", lambda, tol)?;
    require_helmholtz(&s_tilde, "S_tilde", lambda, tol)?;
    let eps_node = options.eps_node.unwrap_or_else(|| default_eps_node(&r));
    let mask = NodeMask::from_amplitude(&r, eps_node);
    if mask.count() == mask.len() {
        return Err(Error::DegenerateAmplitude);
    }
    let grad_s = phase_gradient(&r, &s_tilde, &mask)?;
    let k = constants.k_from_lambda(lambda);
    let g2 = squared_norm(&grad_s);
    let inv2m = 1.0 / (2.0 * constants.mass);
    let v_values =
        (0..r.grid().len()).map(|i| if mask.is_masked(i) { 0.0 } else { energy - k - g2[i] * inv2m }).collect();
    let v = ScalarField::new(r.grid().clone(), v_values)?;
    let s = phase_from_numerator(&r, &s_tilde, &mask)?;
    Ok(StationaryScenario {
        constants,
        r,
        s_tilde,
        s,
        grad_s,
        energy,
        lambda,
        v,
        mask,
        eps_node,
        tolerances: options.tolerances.clone(),
    })
}

/// A time-dependent semiclassical scenario sampled on a uniform time mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeDependentScenario {
    pub constants: PhysicalConstants,
    pub times: Vec<f64>,
    pub lambda: LambdaSchedule,
    pub r: Vec<ScalarField>,
    pub phi_tilde: Vec<ScalarField>,
    /// `φ = φ̃ / R` per slice.
    pub phi: Vec<ScalarField>,
    pub grad_phi: Vec<Vec<ScalarField>>,
    pub dphi_dt: Vec<ScalarField>,
    pub dr_dt: Vec<ScalarField>,
    pub v: Vec<ScalarField>,
    pub masks: Vec<NodeMask>,
    pub eps_node: f64,
    pub tolerances: Tolerances,
    /// Set when the scenario embeds a stationary one.
    pub energy: Option<f64>,
    /// Set when the scenario is the image of a gauge shift.
    pub gauge: Option<GaugeShift>,
}

impl TimeDependentScenario {
    pub fn grid(&self) -> &Grid {
        self.r[0].grid()
    }

    /// K(t_n) = (ħ λ(t_n))² / 2m at each stored slice.
    pub fn k_values(&self) -> Vec<f64> {
        self.times.iter().map(|&t| self.lambda.k_at(t, &self.constants)).collect()
    }

    /// Rebuilds derived fields from stored payloads without re-running the
    /// construction checks; `V` is taken as stored.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        constants: PhysicalConstants,
        times: Vec<f64>,
        lambda: LambdaSchedule,
        r: Vec<ScalarField>,
        phi_tilde: Vec<ScalarField>,
        v: Vec<ScalarField>,
        eps_node: f64,
        tolerances: Tolerances,
        energy: Option<f64>,
        gauge: Option<GaugeShift>,
    ) -> Result<Self> {
        let d = derive_time_dependent(&r, &phi_tilde, &times, eps_node)?;
        if v.len() != r.len() || v.iter().any(|f| f.grid() != r[0].grid()) {
            return Err(Error::Format("V sequence does not match R".into()));
        }
        Ok(TimeDependentScenario {
            constants,
            times,
            lambda,
            r,
            phi_tilde,
            phi: d.phi,
            grad_phi: d.grad_phi,
            dphi_dt: d.dphi_dt,
            dr_dt: d.dr_dt,
            v,
            masks: d.masks,
            eps_node,
            tolerances,
            energy,
            gauge,
        })
    }
}

struct Derived {
    masks: Vec<NodeMask>,
    phi: Vec<ScalarField>,
    grad_phi: Vec<Vec<ScalarField>>,
    dphi_dt: Vec<ScalarField>,
    dr_dt: Vec<ScalarField>,
}

fn derive_time_dependent(
    r: &[ScalarField],
    phi_tilde: &[ScalarField],
    times: &[f64],
    eps_node: f64,
) -> Result<Derived> {
    if r.len() != phi_tilde.len() || r.len() != times.len() {
        return Err(Error::LengthMismatch { expected: r.len(), got: phi_tilde.len().min(times.len()) });
    }
    if r.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: r.len() });
    }
    uniform_step(times)?;
    let grid = r[0].grid();
    if r.iter().chain(phi_tilde).any(|f| f.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let masks: Vec<NodeMask> = r.iter().map(|f| NodeMask::from_amplitude(f, eps_node)).collect();
    if masks.iter().any(|m| m.count() == m.len()) {
        return Err(Error::DegenerateAmplitude);
    }
    for (n, w) in masks.windows(2).enumerate() {
        let fraction = w[0].disagreement(&w[1]);
        if fraction > MAX_MASK_CHANGE {
            return Err(Error::MaskMismatch { slice: n, next: n + 1, fraction });
        }
    }
    let phi = r
        .iter()
        .zip(phi_tilde)
        .zip(&masks)
        .map(|((r, p), m)| phase_from_numerator(r, p, m))
        .collect::<Result<Vec<_>>>()?;
    let grad_phi =
        r.iter().zip(phi_tilde).zip(&masks).map(|((r, p), m)| phase_gradient(r, p, m)).collect::<Result<Vec<_>>>()?;
    let dphi_dt = time_derivative(&phi, times)?;
    let dr_dt = time_derivative(r, times)?;
    Ok(Derived { masks, phi, grad_phi, dphi_dt, dr_dt })
}

/// Time-dependent constructor.
///
/// Requires every `R(t_n)` to solve the Helmholtz equation with `λ(t_n)`
/// and every `φ̃(t_n)` to satisfy `(∇² + λ²) φ̃ = -2m ∂R/∂t` within
/// `options.tolerances.inhomogeneous`.
pub fn construct_time_dependent(
    r: Vec<ScalarField>,
    phi_tilde: Vec<ScalarField>,
    times: Vec<f64>,
    lambda: LambdaSchedule,
    constants: PhysicalConstants,
    options: &ScenarioOptions,
) -> Result<TimeDependentScenario> {
    if r.is_empty() {
        return Err(Error::TooFewSamples { needed: 3, got: 0 });
    }
    let tol = &options.tolerances;
    for (n, (rn, &t)) in r.iter().zip(&times).enumerate() {
        require_helmholtz(rn, &format!("R[{n}]"), lambda.at(t), tol.helmholtz)?;
    }
    let eps_node = options
        .eps_node
        .unwrap_or_else(|| DEFAULT_RELATIVE_EPS_NODE * r.iter().map(ScalarField::max_abs).fold(0.0, f64::max));
    let d = derive_time_dependent(&r, &phi_tilde, &times, eps_node)?;
    let grid = r[0].grid().clone();
    let none = NodeMask::none(grid.len());
    let two_m = 2.0 * constants.mass;
    for (n, (p, &t)) in phi_tilde.iter().zip(&times).enumerate() {
        let lam = lambda.at(t);
        let lap = laplacian(p);
        let residual = checkable_nodes(&grid, &none)
            .map(|i| (lap.values()[i] + lam * lam * p.values()[i] + two_m * d.dr_dt[n].values()[i]).abs())
            .fold(0.0, f64::max);
        if residual > tol.inhomogeneous {
            return Err(Error::InhomogeneousResidual { slice: n, residual, tol: tol.inhomogeneous });
        }
    }
    let inv2m = 1.0 / two_m;
    let v = (0..times.len())
        .map(|n| {
            let k = lambda.k_at(times[n], &constants);
            let g2 = squared_norm(&d.grad_phi[n]);
            let values = (0..grid.len())
                .map(|i| if d.masks[n].is_masked(i) { 0.0 } else { -d.dphi_dt[n].values()[i] - k - g2[i] * inv2m })
                .collect();
            ScalarField::new(grid.clone(), values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TimeDependentScenario {
        constants,
        times,
        lambda,
        r,
        phi_tilde,
        phi: d.phi,
        grad_phi: d.grad_phi,
        dphi_dt: d.dphi_dt,
        dr_dt: d.dr_dt,
        v,
        masks: d.masks,
        eps_node,
        tolerances: options.tolerances.clone(),
        energy: None,
        gauge: None,
    })
}

/// Either kind of semiclassical scenario.
#[derive(Clone, Debug, PartialEq)]
pub enum SemiclassicalScenario {
    Stationary(StationaryScenario),
    TimeDependent(TimeDependentScenario),
}

impl SemiclassicalScenario {
    pub fn grid(&self) -> &Grid {
        match self {
            Self::Stationary(s) => s.grid(),
            Self::TimeDependent(s) => s.grid(),
        }
    }

    pub fn constants(&self) -> &PhysicalConstants {
        match self {
            Self::Stationary(s) => &s.constants,
            Self::TimeDependent(s) => &s.constants,
        }
    }

    pub fn tolerances(&self) -> &Tolerances {
        match self {
            Self::Stationary(s) => &s.tolerances,
            Self::TimeDependent(s) => &s.tolerances,
        }
    }
}

/// Time-dependent energy shift `H -> H + f(t)` and the matching global
/// phase `Ψ -> exp(iζ/ħ) Ψ`, with `ζ(t) = -∫₀ᵗ f` (action units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeShift {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl GaugeShift {
    /// ζ is the cumulative trapezoid integral of `-f`, starting at zero.
    pub fn new(times: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if times.len() != f.len() {
            return Err(Error::LengthMismatch { expected: times.len(), got: f.len() });
        }
        if times.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonUniformTimeMesh);
        }
        if let Some(bad) = f.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("f(t) must be finite, got {bad}")));
        }
        let mut zeta = Vec::with_capacity(times.len());
        zeta.push(0.0);
        for k in 1..times.len() {
            let step = 0.5 * (f[k] + f[k - 1]) * (times[k] - times[k - 1]);
            zeta.push(zeta[k - 1] - step);
        }
        Ok(GaugeShift { times, f, zeta })
    }

    pub fn zero(times: Vec<f64>) -> Result<Self> {
        let n = times.len();
        Self::new(times, vec![0.0; n])
    }

    pub fn constant(c: f64, times: Vec<f64>) -> Result<Self> {
        let n = times.len();
        Self::new(times, vec![c; n])
    }

    /// `f = -K(t)`: the shifted Hamilton-Jacobi equation carries `V + Q - K`,
    /// so a quantum potential that depends only on time is removed.
    pub fn removing_quantum_potential(
        schedule: &LambdaSchedule,
        times: Vec<f64>,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        let f = times.iter().map(|&t| -schedule.k_at(t, constants)).collect();
        Self::new(times, f)
    }

    /// `f = +K(t)`.
    pub fn adding_quantum_potential(
        schedule: &LambdaSchedule,
        times: Vec<f64>,
        constants: &PhysicalConstants,
    ) -> Result<Self> {
        let f = times.iter().map(|&t| schedule.k_at(t, constants)).collect();
        Self::new(times, f)
    }

    pub fn zeta_at(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        Ok(interpolate(&self.times, &self.zeta, t))
    }

    pub fn f_at(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        Ok(interpolate(&self.times, &self.f, t))
    }

    fn check_range(&self, t: f64) -> Result<()> {
        let (lo, hi) = (self.times[0], self.times[self.times.len() - 1]);
        let slack = 1e-12 * hi.abs().max(1.0);
        if t < lo - slack || t > hi + slack {
            return Err(Error::TimeMeshMismatch(format!("t = {t} outside gauge mesh [{lo}, {hi}]")));
        }
        Ok(())
    }

    fn aligned_with(&self, times: &[f64]) -> Result<()> {
        let ok = times.len() == self.times.len()
            && times.iter().zip(&self.times).all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0));
        if ok {
            Ok(())
        } else {
            Err(Error::TimeMeshMismatch(format!(
                "scenario has {} time samples, gauge shift {}",
                times.len(),
                self.times.len()
            )))
        }
    }
}

/// Applies the gauge shift: `R' = R`, `φ' = φ + ζ`, `φ̃' = φ̃ + ζR`,
/// `V' = V + f`. The quantum potential is untouched because `R` is.
pub fn gauge_shift(scenario: &TimeDependentScenario, shift: &GaugeShift) -> Result<TimeDependentScenario> {
    shift.aligned_with(&scenario.times)?;
    let mut out = scenario.clone();
    for n in 0..scenario.times.len() {
        // Zero shifts leave samples untouched, signed zeros included.
        let (z, f) = (shift.zeta[n], shift.f[n]);
        if z != 0.0 {
            out.phi[n] = scenario.phi[n].map(|p| p + z)?;
            out.phi_tilde[n] = scenario.phi_tilde[n].zip_with(&scenario.r[n], |p, r| p + z * r)?;
        }
        if f != 0.0 {
            out.v[n] = scenario.v[n].map(|v| v + f)?;
            out.dphi_dt[n] = scenario.dphi_dt[n].map(|d| d - f)?;
        }
    }
    out.gauge = Some(match &scenario.gauge {
        None => shift.clone(),
        Some(prev) => {
            let f: Vec<f64> = prev.f.iter().zip(&shift.f).map(|(a, b)| a + b).collect();
            GaugeShift::new(shift.times.clone(), f)?
        }
    });
    Ok(out)
}

/// Phase numerator of the one-dimensional restricted family `R² S' = flux`:
/// `S̃ = R S` with `S(x) = s0 + ∫_{x_0}^{x} flux / R²` by the end-corrected
/// trapezoid rule, fourth order for smooth `R`.
pub fn restricted_ansatz_1d(r: &ScalarField, flux: f64, s0: f64) -> Result<ScalarField> {
    let grid = r.grid();
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch("restricted ansatz is one-dimensional".into()));
    }
    if let Some(i) = r.values().iter().position(|&v| v == 0.0) {
        return Err(Error::InvalidArgument(format!("amplitude vanishes at node {i}")));
    }
    let h = grid.spacing()[0];
    let w: Vec<f64> = r.values().iter().map(|&v| flux / (v * v)).collect();
    let dr = &gradient(r)[0];
    let dw: Vec<f64> = r.values().iter().zip(dr.values()).map(|(&v, &d)| -2.0 * flux * d / (v * v * v)).collect();
    let mut s = vec![s0; w.len()];
    for i in 1..w.len() {
        s[i] = s[i - 1] + 0.5 * h * (w[i] + w[i - 1]) - h * h / 12.0 * (dw[i] - dw[i - 1]);
    }
    let values = s.iter().zip(r.values()).map(|(s, r)| s * r).collect();
    ScalarField::new(grid.clone(), values)
}

/// Spread of the flux `R²∇S` over checkable nodes relative to its largest
/// magnitude. Zero for the restricted family, positive for stationary
/// scenarios outside it.
pub fn restricted_ansatz_deviation(scenario: &StationaryScenario) -> f64 {
    let grid = scenario.grid();
    let nodes: Vec<usize> = checkable_nodes(grid, &scenario.mask).collect();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for comp in &scenario.grad_s {
        let flux: Vec<f64> = nodes.iter().map(|&i| scenario.r.values()[i].powi(2) * comp.values()[i]).collect();
        let (lo, hi) = flux.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        worst = worst.max(hi - lo);
        scale = scale.max(hi.abs()).max(lo.abs());
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Boundary;
    use crate::helmholtz::{evaluate_mode, HelmholtzMode};

    fn line(n: usize, lo: f64, hi: f64) -> Grid {
        Grid::uniform(1, n, lo, hi, Boundary::DirichletZero).unwrap()
    }

    #[test]
    fn constant_amplitude_has_zero_q() {
        let g = line(16, 0.0, 1.0);
        let r = ScalarField::constant(&g, 1.0).unwrap();
        let (q, mask) = quantum_potential(&r, &PhysicalConstants::natural(), 1e-6).unwrap();
        assert_eq!(mask.count(), 0);
        assert!(q.max_abs() < 1e-10);
    }

    #[test]
    fn cos2x_gives_q_two() {
        let g = Grid::uniform(1, 400, 0.0, std::f64::consts::TAU, Boundary::Periodic).unwrap();
        let r = evaluate_mode(&HelmholtzMode::cosine_1d(2.0, 0.0), &g).unwrap();
        let (q, mask) = quantum_potential(&r, &PhysicalConstants::natural(), 1e-6).unwrap();
        let h = g.spacing()[0];
        let dev = (0..g.len()).filter(|&i| !mask.is_masked(i)).map(|i| (q.values()[i] - 2.0).abs()).fold(0.0, f64::max);
        // discrete Laplacian of cos(2x) is exactly -(4/h²) sin²(h) cos(2x)
        let exact = 2.0 * (1.0 - (h.sin() / h).powi(2));
        assert!((dev - exact).abs() < 1e-9, "{dev} vs {exact}");
    }

    #[test]
    fn gaussian_quantum_potential() {
        let g = line(801, -4.0, 4.0);
        assert!((g.spacing()[0] - 0.01).abs() < 1e-12);
        let r = ScalarField::from_fn(&g, |x| (-x[0] * x[0] / 2.0).exp()).unwrap();
        let (q, mask) = quantum_potential(&r, &PhysicalConstants::natural(), 1e-6).unwrap();
        let err = checkable_nodes(&g, &mask)
            .map(|i| {
                let x = g.coords(i)[0];
                (q.values()[i] - (1.0 - x * x) / 2.0).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn all_masked_is_degenerate() {
        let g = line(8, 0.0, 1.0);
        assert!(matches!(
            quantum_potential(&ScalarField::zeros(&g), &PhysicalConstants::natural(), 1e-6),
            Err(Error::DegenerateAmplitude)
        ));
    }

    #[test]
    fn proportional_numerator_gives_constant_potential() {
        let g = line(201, -1.0, 1.0);
        let r = evaluate_mode(&HelmholtzMode::cosine_1d(1.0, 0.0), &g).unwrap();
        let s_tilde = r.map(|v| 2.5 * v).unwrap();
        let sc = construct_stationary(r, s_tilde, 0.7, 1.0, PhysicalConstants::natural(), &Default::default()).unwrap();
        assert!(sc.s.values().iter().all(|&s| (s - 2.5).abs() < 1e-14));
        assert!(sc.grad_s[0].max_abs() < 1e-12);
        assert!(sc.v.values().iter().all(|&v| (v - (0.7 - 0.5)).abs() < 1e-12));
    }

    #[test]
    fn harmonic_free_particle() {
        let g = line(50, -1.0, 1.0);
        let r = evaluate_mode(&HelmholtzMode::harmonic(1.0, vec![0.0]), &g).unwrap();
        let s_tilde = evaluate_mode(&HelmholtzMode::harmonic(0.0, vec![1.5]), &g).unwrap();
        let c = PhysicalConstants::new(1.0, 2.0).unwrap();
        let sc = construct_stationary(r, s_tilde, 1.0, 0.0, c, &Default::default()).unwrap();
        let expect = 1.0 - 1.5 * 1.5 / 4.0;
        assert!(sc.v.values().iter().all(|&v| (v - expect).abs() < 1e-12));
    }

    #[test]
    fn helmholtz_precondition_names_field() {
        let g = line(101, -1.0, 1.0);
        let r = evaluate_mode(&HelmholtzMode::cosine_1d(1.0, 0.0), &g).unwrap();
        let bad = ScalarField::from_fn(&g, |x| x[0] * x[0]).unwrap();
        let err =
            construct_stationary(r.clone(), bad.clone(), 0.0, 1.0, PhysicalConstants::natural(), &Default::default())
                .unwrap_err();
        assert!(matches!(&err, Error::HelmholtzPrecondition { field, .. } if field == "S_tilde"), "{err}");
        let err =
            construct_stationary(bad, r, 0.0, 1.0, PhysicalConstants::natural(), &Default::default()).unwrap_err();
        assert!(matches!(&err, Error::HelmholtzPrecondition { field, .. } if field == "R"), "{err}");
    }

    #[test]
    fn gauge_zeta_is_cumulative_trapezoid() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let s = GaugeShift::constant(1.0, times.clone()).unwrap();
        assert_eq!(s.zeta[0], 0.0);
        assert!((s.zeta[10] + 1.0).abs() < 1e-15);
        let lin = GaugeShift::new(times.clone(), times.iter().map(|t| 2.0 * t).collect()).unwrap();
        // -∫ 2t dt = -t², exact for the trapezoid rule on linear f
        for (z, t) in lin.zeta.iter().zip(&times) {
            assert!((z + t * t).abs() < 1e-14);
        }
        assert!(s.zeta_at(2.0).is_err());
    }

    #[test]
    fn restricted_ansatz_flux_is_constant() {
        let g = line(401, -1.0, 1.0);
        let r = evaluate_mode(&HelmholtzMode::cosine_1d(1.0, 0.0), &g).unwrap();
        let s_tilde = restricted_ansatz_1d(&r, 0.8, 0.0).unwrap();
        // S = 0.8 (tan x - tan(-1)), so S̃ ≈ 0.8 sin x + 0.8 tan(1) cos x
        let expect = ScalarField::from_fn(&g, |x| 0.8 * x[0].sin() + 0.8 * 1f64.tan() * x[0].cos()).unwrap();
        assert!(s_tilde.axpby(1.0, &expect, -1.0).unwrap().max_abs() < 1e-4);
        let with_node = ScalarField::from_fn(&line(5, 0.0, 1.0), |x| x[0]).unwrap();
        assert!(restricted_ansatz_1d(&with_node, 1.0, 0.0).is_err());
    }
}
