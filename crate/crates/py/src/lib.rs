//! Python bindings for `semiclassical-core`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use semiclassical_core::cli::{self, dynamics_inputs};
use semiclassical_core::dynamics::{
    compare_trajectories, evolve_schrodinger, guidance_matched_ics, integrate_bohmian, integrate_classical,
    EvolveOptions, TrajectorySet,
};
use semiclassical_core::fields::{self as core_fields, Boundary, PhysicalConstants, ScalarField};
use semiclassical_core::helmholtz::{self, HelmholtzMode};
use semiclassical_core::potentials::{self, GaugeShift, ScenarioOptions, SemiclassicalScenario, StationaryScenario};
use semiclassical_core::verify::{self, EntryMeta, ReportEntry, VerificationReport};
use semiclassical_core::Error;

fn py_err(e: Error) -> PyErr {
    if e.is_check_failure() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn entry_dict<'py>(py: Python<'py>, e: &ReportEntry) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &e.name)?;
    d.set_item("measured", e.measured)?;
    d.set_item("tolerance", e.tolerance)?;
    d.set_item("status", format!("{:?}", e.status).to_lowercase())?;
    d.set_item("mask_fraction", e.meta.mask_fraction)?;
    d.set_item("note", e.note.clone())?;
    Ok(d)
}

fn report_list<'py>(py: Python<'py>, r: &VerificationReport) -> PyResult<Vec<Bound<'py, PyDict>>> {
    r.entries.iter().map(|e| entry_dict(py, e)).collect()
}

fn paths(set: &TrajectorySet) -> Vec<Vec<Vec<f64>>> {
    set.paths.iter().map(|p| p.positions.clone()).collect()
}

#[pyclass(name = "Grid", module = "semiclassical", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(core_fields::Grid);

#[pymethods]
impl PyGrid {
    /// Uniform grid with `n` nodes per axis on `[lo, hi]`; boundary is
    /// "dirichlet" or "periodic".
    #[new]
    #[pyo3(signature = (dim, n, lo, hi, boundary = "dirichlet"))]
    fn new(dim: usize, n: usize, lo: f64, hi: f64, boundary: &str) -> PyResult<Self> {
        let b = match boundary {
            "dirichlet" => Boundary::DirichletZero,
            "periodic" => Boundary::Periodic,
            other => return Err(PyValueError::new_err(format!("unknown boundary {other:?}"))),
        };
        core_fields::Grid::uniform(dim, n, lo, hi, b).map(PyGrid).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn spacing(&self) -> Vec<f64> {
        self.0.spacing().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn coords(&self) -> Vec<Vec<f64>> {
        (0..self.0.len()).map(|i| self.0.coords(i).to_vec()).collect()
    }
}

#[pyclass(name = "Constants", module = "semiclassical", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyConstants(PhysicalConstants);

#[pymethods]
impl PyConstants {
    #[new]
    #[pyo3(signature = (hbar = 1.0, mass = 1.0))]
    fn new(hbar: f64, mass: f64) -> PyResult<Self> {
        PhysicalConstants::new(hbar, mass).map(PyConstants).map_err(py_err)
    }

    #[getter]
    fn hbar(&self) -> f64 {
        self.0.hbar
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }

    /// `(ħλ)²/2m`.
    fn k_from_lambda(&self, lam: f64) -> f64 {
        self.0.k_from_lambda(lam)
    }
}

#[pyclass(name = "Mode", module = "semiclassical", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMode(HelmholtzMode);

#[pymethods]
impl PyMode {
    #[staticmethod]
    #[pyo3(signature = (lam, phase = 0.0, amplitude = 1.0))]
    fn cosine_1d(lam: f64, phase: f64, amplitude: f64) -> Self {
        let mut m = HelmholtzMode::cosine_1d(lam, phase);
        m.amplitudes[0] = amplitude;
        PyMode(m)
    }

    #[staticmethod]
    fn separable(k: Vec<f64>) -> Self {
        PyMode(HelmholtzMode::separable(k))
    }

    #[staticmethod]
    #[pyo3(signature = (lam, amplitude = 1.0, center = [0.0; 3]))]
    fn radial_sinc(lam: f64, amplitude: f64, center: [f64; 3]) -> Self {
        PyMode(HelmholtzMode::radial_sinc(lam, amplitude, center))
    }

    #[staticmethod]
    fn harmonic(offset: f64, slope: Vec<f64>) -> Self {
        PyMode(HelmholtzMode::harmonic(offset, slope))
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda
    }

    fn value_at(&self, x: Vec<f64>) -> f64 {
        self.0.value_at(&x)
    }

    fn evaluate(&self, grid: &PyGrid) -> PyResult<Vec<f64>> {
        helmholtz::evaluate_mode(&self.0, &grid.0).map(ScalarField::into_values).map_err(py_err)
    }

    /// Smallest value on an axis-aligned cube of the given side.
    fn box_minimum(&self, dim: usize, side: f64) -> PyResult<f64> {
        helmholtz::box_minimum(&self.0, dim, side).map_err(py_err)
    }
}

/// Stationary scenario built from an amplitude mode and a phase-numerator mode.
#[pyclass(name = "Stationary", module = "semiclassical", frozen)]
struct PyStationary(StationaryScenario);

#[pymethods]
impl PyStationary {
    #[new]
    #[pyo3(signature = (grid, r, s_tilde, energy = 0.0, constants = None))]
    fn new(grid: &PyGrid, r: &PyMode, s_tilde: &PyMode, energy: f64, constants: Option<PyConstants>) -> PyResult<Self> {
        let c = constants.map_or_else(PhysicalConstants::natural, |c| c.0);
        let rf = helmholtz::evaluate_mode(&r.0, &grid.0).map_err(py_err)?;
        let sf = helmholtz::evaluate_mode(&s_tilde.0, &grid.0).map_err(py_err)?;
        potentials::construct_stationary(rf, sf, energy, r.0.lambda, c, &ScenarioOptions::default())
            .map(PyStationary)
            .map_err(py_err)
    }

    #[getter]
    fn r(&self) -> Vec<f64> {
        self.0.r.values().to_vec()
    }

    #[getter]
    fn s(&self) -> Vec<f64> {
        self.0.s.values().to_vec()
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.0.v.values().to_vec()
    }

    #[getter]
    fn k(&self) -> f64 {
        self.0.k()
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.0.energy
    }

    #[getter]
    fn mask_fraction(&self) -> f64 {
        self.0.mask.fraction()
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let sc = SemiclassicalScenario::Stationary(self.0.clone());
        let r = verify::scenario_report(&sc, "python", "").map_err(py_err)?;
        report_list(py, &r)
    }

    /// Evolves `R exp(iS/ħ)` and integrates classical and Bohmian paths from
    /// the given start points with guidance-matched velocities.
    #[pyo3(signature = (positions, dt = 1e-3, t_end = 1.0, tolerance = None))]
    fn compare<'py>(
        &self,
        py: Python<'py>,
        positions: Vec<Vec<f64>>,
        dt: f64,
        t_end: f64,
        tolerance: Option<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let sc = SemiclassicalScenario::Stationary(self.0.clone());
        let c = self.0.constants;
        let inputs = dynamics_inputs(&sc).map_err(py_err)?;
        let opts = EvolveOptions::new(dt, t_end).with_drive(inputs.drive.clone());
        let evo = evolve_schrodinger(&inputs.psi0, &inputs.potential, &c, &opts).map_err(py_err)?;
        let eps = self.0.eps_node / inputs.normalization;
        let bohm = integrate_bohmian(&evo, &positions, &c, eps).map_err(py_err)?;
        let ics = guidance_matched_ics(&inputs.psi0, &c, eps, &positions).map_err(py_err)?;
        let classical =
            integrate_classical(&inputs.potential, &c, &ics, dt, t_end, Some(&inputs.mask)).map_err(py_err)?;
        let tol = tolerance.unwrap_or(self.0.tolerances.trajectory);
        let meta = EntryMeta::new(self.0.grid(), inputs.mask.fraction()).with_dt(dt);
        let cmp = compare_trajectories(&classical, &bohm, tol, meta).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("max_deviation", cmp.max_deviation)?;
        d.set_item("truncated", cmp.truncated)?;
        d.set_item("entry", entry_dict(py, &cmp.entry)?)?;
        d.set_item("times", classical.times.clone())?;
        d.set_item("classical", paths(&classical))?;
        d.set_item("bohmian", paths(&bohm))?;
        d.set_item("max_norm_drift", evo.max_norm_drift)?;
        Ok(d)
    }

    /// Field checks after a constant gauge shift `f = c` over `[0, t_end]`.
    #[pyo3(signature = (c, dt = 1e-2, t_end = 1.0))]
    fn gauge_check<'py>(&self, py: Python<'py>, c: f64, dt: f64, t_end: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let steps = (t_end / dt).round() as usize;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        let td = self.0.to_time_dependent(times.clone()).map_err(py_err)?;
        let shift = GaugeShift::constant(c, times).map_err(py_err)?;
        let shifted = potentials::gauge_shift(&td, &shift).map_err(py_err)?;
        let entries = verify::check_gauge_fields(&td, &shifted, &shift, td.tolerances.qhj_assembly).map_err(py_err)?;
        entries.iter().map(|e| entry_dict(py, e)).collect()
    }
}

/// Solves `(∇² + λ²) u = rhs` with homogeneous Dirichlet data.
#[pyfunction]
fn solve_inhomogeneous(grid: &PyGrid, lam: f64, rhs: Vec<f64>) -> PyResult<Vec<f64>> {
    let rhs = ScalarField::new(grid.0.clone(), rhs).map_err(py_err)?;
    helmholtz::solve_inhomogeneous(&grid.0, lam, &rhs).map(|s| s.field.into_values()).map_err(py_err)
}

/// Runs the command-line interface in-process and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    cli::run(std::iter::once("semiclassical".to_string()).chain(args))
}

#[pymodule]
fn semiclassical(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyConstants>()?;
    m.add_class::<PyMode>()?;
    m.add_class::<PyStationary>()?;
    m.add_function(wrap_pyfunction!(solve_inhomogeneous, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
