use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::{
    compare_trajectories, evolve_schrodinger, fill_masked, guidance_matched_ics, integrate_bohmian,
    integrate_classical, BoundaryDrive, EvolutionResult, EvolveOptions, Potential, SCHEME, UNITARITY_TOL,
};
use crate::error::{Error, Result};
use crate::fields::io::{read_complex_series, write_complex_series};
use crate::fields::{Boundary, ComplexField, Grid, NodeMask, ScalarField};
use crate::helmholtz::{evaluate_mode, interpolate, solve_inhomogeneous, time_derivative, uniform_step, HelmholtzMode};
use crate::potentials::{
    construct_stationary, construct_time_dependent, gauge_shift, squared_norm, GaugeShift, ScenarioOptions,
    SemiclassicalScenario, TimeDependentScenario, Tolerances,
};
use crate::verify::{
    calibrate_budget, check_gauge_fields, scenario_report, velocity_difference, EntryMeta, ReportEntry,
    VerificationReport,
};

use super::config::{Case, Directive, DynamicsConfig, NamedShift, PhaseSpec, ScenarioConfig, ShiftSpec};
use super::store::{Calibration, ScenarioHeader, StoredScenario};

pub const EVOLUTION_FORMAT: &str = "semiclassical-evolution/1";
pub const EVOLUTION_HEADER: &str = "evolution.json";
pub const REPORT_FILE: &str = "report.json";
pub const COMPARISON_FILE: &str = "comparison.json";

/// Smallest calibrated budget; keeps exactly representable scenarios from
/// getting a zero tolerance.
pub const BUDGET_FLOOR: f64 = 1e-10;
const CALIBRATION_SAFETY: f64 = 2.0;
/// Bound on velocity and path differences between gauge-related runs.
pub const GAUGE_MOTION_TOL: f64 = 1e-10;

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn write_report(path: &Path, report: &VerificationReport) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(&report.to_json())? + "\n")?;
    Ok(())
}

fn rescaled(mode: &HelmholtzMode, lambda: f64) -> Result<HelmholtzMode> {
    if mode.lambda == lambda {
        Ok(mode.clone())
    } else {
        mode.with_lambda(lambda)
    }
}

/// Builds the configured scenario on `grid`.
pub fn build_scenario(config: &ScenarioConfig, grid: &Grid, tolerances: &Tolerances) -> Result<SemiclassicalScenario> {
    let constants = config.constants;
    let options = ScenarioOptions { eps_node: config.eps_node, tolerances: tolerances.clone() };
    let phase = config.modes.s_tilde.as_ref().or(config.modes.phi_tilde.as_ref()).expect("validated");
    match config.case {
        Case::Stationary => {
            let lambda = config.lambda.unwrap_or(config.modes.r.lambda);
            let r = evaluate_mode(&rescaled(&config.modes.r, lambda)?, grid)?;
            let s_tilde = match phase {
                PhaseSpec::Mode(m) => evaluate_mode(&rescaled(m, lambda)?, grid)?,
                PhaseSpec::Directive(Directive::Solve) => {
                    solve_inhomogeneous(grid, lambda, &ScalarField::zeros(grid))?.field
                }
            };
            let energy = config.energy.unwrap_or(0.0);
            Ok(SemiclassicalScenario::Stationary(construct_stationary(
                r, s_tilde, energy, lambda, constants, &options,
            )?))
        }
        Case::TimeDependent => {
            let schedule = config.lambda_schedule.clone().expect("validated");
            let times = schedule.times().to_vec();
            let r = times
                .iter()
                .map(|&t| evaluate_mode(&rescaled(&config.modes.r, schedule.at(t))?, grid))
                .collect::<Result<Vec<_>>>()?;
            let phi_tilde = match phase {
                PhaseSpec::Mode(m) => times
                    .iter()
                    .map(|&t| evaluate_mode(&rescaled(m, schedule.at(t))?, grid))
                    .collect::<Result<Vec<_>>>()?,
                PhaseSpec::Directive(Directive::Solve) => {
                    let two_m = 2.0 * constants.mass;
                    time_derivative(&r, &times)?
                        .iter()
                        .zip(&times)
                        .map(|(dr, &t)| Ok(solve_inhomogeneous(grid, schedule.at(t), &dr.map(|v| -two_m * v)?)?.field))
                        .collect::<Result<Vec<_>>>()?
                }
            };
            Ok(SemiclassicalScenario::TimeDependent(construct_time_dependent(
                r, phi_tilde, times, schedule, constants, &options,
            )?))
        }
    }
}

/// Same box with roughly `factor` times the spacing.
fn coarsen(grid: &Grid, factor: usize) -> Option<Grid> {
    let mut extents = Vec::new();
    let mut spacing = Vec::new();
    for (&n, &h) in grid.extents().iter().zip(grid.spacing()) {
        let (m, hm) = match grid.boundary() {
            Boundary::DirichletZero => {
                let cells = ((n - 1) as f64 / factor as f64).round() as usize;
                (cells + 1, (n - 1) as f64 * h / cells.max(1) as f64)
            }
            Boundary::Periodic => {
                let m = (n as f64 / factor as f64).round() as usize;
                (m, n as f64 * h / m.max(1) as f64)
            }
        };
        extents.push(m);
        spacing.push(hm);
    }
    Grid::new(extents, grid.origin().to_vec(), spacing, grid.boundary()).ok()
}

const CALIBRATED_CHECKS: [&str; 3] = ["q_constancy", "continuity_residual", "qhj_residual"];

/// Second-order budgets `2 max(eᵢ/hᵢ²) h²` from copies of the scenario on
/// grids two and four times coarser. Checks without a usable coarse level
/// keep their default.
fn calibrate(config: &ScenarioConfig, grid: &Grid) -> (Tolerances, Vec<Calibration>, Vec<String>) {
    let mut tolerances = Tolerances::default();
    let relaxed = Tolerances { helmholtz: f64::INFINITY, inhomogeneous: f64::INFINITY, ..Tolerances::default() };
    let levels: Vec<(f64, VerificationReport)> = [4, 2]
        .iter()
        .filter_map(|&f| coarsen(grid, f))
        .filter_map(|g| {
            let sc = build_scenario(config, &g, &relaxed).ok()?;
            Some((g.max_spacing(), scenario_report(&sc, "", "").ok()?))
        })
        .collect();
    let h = grid.max_spacing();
    let mut records = Vec::new();
    let mut notes = Vec::new();
    for check in CALIBRATED_CHECKS {
        let (spacings, errors): (Vec<f64>, Vec<f64>) = levels
            .iter()
            .filter_map(|(s, rep)| rep.entry(check).map(|e| (*s, e.measured)))
            .filter(|(_, e)| e.is_finite())
            .unzip();
        let Ok(raw) = calibrate_budget(&spacings, &errors, 2.0, h, CALIBRATION_SAFETY) else {
            notes.push(format!("{check}: no usable coarse level, default budget kept"));
            continue;
        };
        let budget = raw.max(BUDGET_FLOOR);
        match check {
            "q_constancy" => tolerances.q_constancy = budget,
            "continuity_residual" => tolerances.continuity = budget,
            _ => tolerances.qhj_residual = budget,
        }
        records.push(Calibration { check: check.into(), spacings, errors, budget });
    }
    (tolerances, records, notes)
}

pub fn generate(config: &ScenarioConfig, out: &Path) -> Result<VerificationReport> {
    let grid = config.grid.clone();
    let (calibrated, calibration, notes) = calibrate(config, &grid);
    let tolerances = config.tolerances.apply(&calibrated);
    let scenario = build_scenario(config, &grid, &tolerances)?;
    let mut header = ScenarioHeader::new(config, &scenario);
    header.calibration = calibration;
    header.notes = notes;
    let report = scenario_report(&scenario, &header.id, &header.config_hash)?;
    StoredScenario { header, scenario }.save(out)?;
    write_report(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

fn set_tolerances(scenario: &mut SemiclassicalScenario, tolerances: Tolerances) {
    match scenario {
        SemiclassicalScenario::Stationary(s) => s.tolerances = tolerances,
        SemiclassicalScenario::TimeDependent(td) => td.tolerances = tolerances,
    }
}

pub fn verify(dir: &Path, overrides: &[String], out: Option<&Path>) -> Result<VerificationReport> {
    let mut stored = StoredScenario::load(dir)?;
    if !overrides.is_empty() {
        let config = stored.header.config.with_overrides(overrides)?;
        let tolerances = config.tolerances.apply(&stored.header.tolerances);
        set_tolerances(&mut stored.scenario, tolerances);
    }
    let report = scenario_report(&stored.scenario, &stored.header.id, &stored.header.config_hash)?;
    write_report(&out.map_or_else(|| dir.join(REPORT_FILE), Path::to_path_buf), &report)?;
    Ok(report)
}

/// Initial state, potential and boundary data for evolving a scenario.
pub struct DynamicsInputs {
    /// Box-normalized `R exp(iφ/ħ)` at the first time.
    pub psi0: ComplexField,
    /// `V` with masked nodes filled from their nearest unmasked neighbour.
    pub potential: Potential,
    pub drive: BoundaryDrive,
    /// Union of the nodal masks.
    pub mask: NodeMask,
    /// Discrete L2 norm of the unnormalized initial state.
    pub normalization: f64,
    /// Normalized amplitude that an evolution should preserve, when the
    /// scenario is stationary.
    pub stationary_amplitude: Option<ScalarField>,
}

pub fn dynamics_inputs(scenario: &SemiclassicalScenario) -> Result<DynamicsInputs> {
    let hbar = scenario.constants().hbar;
    let dirichlet = scenario.grid().boundary() == Boundary::DirichletZero;
    match scenario {
        SemiclassicalScenario::Stationary(s) => {
            let psi = ComplexField::from_polar(&s.r, &s.s, hbar)?;
            let normalization = psi.norm();
            let drive = if dirichlet {
                BoundaryDrive::Stationary { energy: s.energy, gauge: None }
            } else {
                BoundaryDrive::Zero
            };
            Ok(DynamicsInputs {
                psi0: psi.normalized()?,
                potential: Potential::Static(fill_masked(&s.v, &s.mask)?),
                drive,
                mask: s.mask.clone(),
                normalization,
                stationary_amplitude: Some(s.r.map(|r| r.abs() / normalization)?),
            })
        }
        SemiclassicalScenario::TimeDependent(td) => {
            let raw =
                td.r.iter()
                    .zip(&td.phi)
                    .map(|(r, p)| ComplexField::from_polar(r, p, hbar))
                    .collect::<Result<Vec<_>>>()?;
            let normalization = raw[0].norm();
            if !(normalization > 0.0) {
                return Err(Error::DegenerateAmplitude);
            }
            let samples = raw
                .iter()
                .map(|p| ComplexField::new(p.grid().clone(), p.values().iter().map(|z| z / normalization).collect()))
                .collect::<Result<Vec<_>>>()?;
            let v = td.v.iter().zip(&td.masks).map(|(v, m)| fill_masked(v, m)).collect::<Result<Vec<_>>>()?;
            let mask = td.masks.iter().skip(1).fold(td.masks[0].clone(), |a, m| a.union(m));
            let stationary_amplitude = match td.energy {
                Some(_) => Some(td.r[0].map(|r| r.abs() / normalization)?),
                None => None,
            };
            let psi0 = samples[0].clone();
            let drive = if dirichlet {
                BoundaryDrive::Samples { times: td.times.clone(), values: samples }
            } else {
                BoundaryDrive::Zero
            };
            Ok(DynamicsInputs {
                psi0,
                potential: Potential::sequence(td.times.clone(), v)?,
                drive,
                mask,
                normalization,
                stationary_amplitude,
            })
        }
    }
}

fn dynamics_section(config: &ScenarioConfig) -> Result<&DynamicsConfig> {
    config.dynamics.as_ref().ok_or_else(|| usage("config has no dynamics section"))
}

fn run_evolution(
    inputs: &DynamicsInputs,
    scenario: &SemiclassicalScenario,
    d: &DynamicsConfig,
) -> Result<EvolutionResult> {
    let options = EvolveOptions::new(d.dt, d.t_end).with_drive(inputs.drive.clone()).with_stride(d.snapshot_stride);
    evolve_schrodinger(&inputs.psi0, &inputs.potential, scenario.constants(), &options)
}

/// Metadata stored next to the `psi` series of an evolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionHeader {
    pub format: String,
    pub scenario_id: String,
    pub config_hash: String,
    pub scheme: String,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub times: Vec<f64>,
    pub closed: bool,
    pub max_norm_drift: f64,
    /// Factor dividing the scenario amplitude to give a unit-norm `Ψ₀`.
    pub normalization: f64,
    /// Node threshold on `|Ψ|`: the scenario threshold over `normalization`.
    pub eps_node: f64,
    pub norm_history: Vec<f64>,
}

pub fn evolve(dir: &Path, overrides: &[String], out: Option<&Path>) -> Result<VerificationReport> {
    let stored = StoredScenario::load(dir)?;
    let config = stored.header.config.with_overrides(overrides)?;
    let d = dynamics_section(&config)?;
    let tolerances = config.tolerances.apply(&stored.header.tolerances);
    let inputs = dynamics_inputs(&stored.scenario)?;
    let evo = run_evolution(&inputs, &stored.scenario, d)?;
    let out = out.map_or_else(|| dir.join("evolution"), Path::to_path_buf);
    write_complex_series(&out, "psi", &evo.psi)?;
    let header = EvolutionHeader {
        format: EVOLUTION_FORMAT.into(),
        scenario_id: stored.header.id.clone(),
        config_hash: config.hash(),
        scheme: evo.scheme.into(),
        dt: d.dt,
        t_end: d.t_end,
        snapshot_stride: d.snapshot_stride,
        times: evo.times.clone(),
        closed: evo.closed,
        max_norm_drift: evo.max_norm_drift,
        normalization: inputs.normalization,
        eps_node: stored.header.eps_node / inputs.normalization,
        norm_history: evo.norm_history.clone(),
    };
    fs::write(out.join(EVOLUTION_HEADER), serde_json::to_string_pretty(&header)? + "\n")?;

    let grid = stored.scenario.grid();
    let meta = EntryMeta::new(grid, inputs.mask.fraction()).with_dt(d.dt);
    let mut report = VerificationReport::new(&stored.header.id, &header.config_hash);
    if evo.closed {
        report.push(ReportEntry::judge(
            "unitarity",
            evo.max_norm_drift,
            UNITARITY_TOL * d.t_end.max(1.0),
            EntryMeta::new(grid, 0.0).with_dt(d.dt),
        ));
    } else {
        report.notes.push(format!(
            "boundary data imposed: norm not conserved, largest relative drift {:.3e}",
            evo.max_norm_drift
        ));
    }
    if let Some(r) = &inputs.stationary_amplitude {
        report.push(ReportEntry::judge(
            "stationarity",
            evo.amplitude_deviation(r, &inputs.mask),
            tolerances.stationarity,
            meta,
        ));
    }
    write_report(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

fn load_evolution(dir: &Path) -> Result<(EvolutionHeader, EvolutionResult)> {
    let path = dir.join(EVOLUTION_HEADER);
    let text = fs::read_to_string(&path).map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
    let header: EvolutionHeader = serde_json::from_str(&text)?;
    if header.format != EVOLUTION_FORMAT {
        return Err(Error::Format(format!("unsupported evolution format {:?}", header.format)));
    }
    let psi = read_complex_series(dir, "psi")?;
    if psi.len() != header.times.len() {
        return Err(Error::Format("psi series does not match the stored times".into()));
    }
    let evo = EvolutionResult {
        times: header.times.clone(),
        psi,
        norm_history: header.norm_history.clone(),
        dt: header.dt,
        scheme: SCHEME,
        closed: header.closed,
        max_norm_drift: header.max_norm_drift,
    };
    Ok((header, evo))
}

/// `V + δ x` (first coordinate), used as a negative control.
fn perturbed(potential: &Potential, delta: f64) -> Result<Potential> {
    let tilt = |v: &ScalarField| -> Result<ScalarField> {
        let x = ScalarField::from_fn(v.grid(), |x| x[0])?;
        v.axpby(1.0, &x, delta)
    };
    match potential {
        Potential::Static(v) => Ok(Potential::Static(tilt(v)?)),
        Potential::Sequence { times, fields } => {
            Potential::sequence(times.clone(), fields.iter().map(tilt).collect::<Result<Vec<_>>>()?)
        }
    }
}

pub fn compare(
    dir: &Path,
    evolution: Option<&Path>,
    overrides: &[String],
    perturb: Option<f64>,
    out: Option<&Path>,
) -> Result<VerificationReport> {
    let stored = StoredScenario::load(dir)?;
    let config = stored.header.config.with_overrides(overrides)?;
    let tolerances = config.tolerances.apply(&stored.header.tolerances);
    let evo_dir = evolution.map_or_else(|| dir.join("evolution"), Path::to_path_buf);
    let (evo_header, evo) = load_evolution(&evo_dir)?;
    let particles = config.particles();
    if particles.is_empty() {
        return Err(usage("config lists no particles"));
    }
    let constants = *stored.scenario.constants();
    let positions: Vec<Vec<f64>> = particles.iter().map(|p| p.x0.clone()).collect();
    let mut ics = guidance_matched_ics(&evo.psi[0], &constants, evo_header.eps_node, &positions)?;
    for (ic, p) in ics.iter_mut().zip(&particles) {
        if let Some(v0) = &p.v0 {
            ic.velocity = v0.clone();
        }
    }
    let inputs = dynamics_inputs(&stored.scenario)?;
    let potential = match perturb {
        Some(delta) => perturbed(&inputs.potential, delta)?,
        None => inputs.potential.clone(),
    };
    let dt = uniform_step(&evo.times)?;
    let span = evo.times[evo.times.len() - 1] - evo.times[0];
    let classical = integrate_classical(&potential, &constants, &ics, dt, span, Some(&inputs.mask))?;
    let bohmian = integrate_bohmian(&evo, &positions, &constants, evo_header.eps_node)?;
    let meta = EntryMeta::new(stored.scenario.grid(), inputs.mask.fraction()).with_dt(dt);
    let cmp = compare_trajectories(&classical, &bohmian, tolerances.trajectory, meta)?;

    let out = out.map_or(evo_dir, Path::to_path_buf);
    fs::create_dir_all(&out)?;
    classical.write_csv(&out.join("classical.csv"))?;
    bohmian.write_csv(&out.join("bohmian.csv"))?;
    let mut report = VerificationReport::new(&stored.header.id, config.hash());
    let mut entry = cmp.entry.clone();
    if let Some(delta) = perturb {
        entry = entry.with_note(format!("classical potential perturbed by {delta} x"));
    }
    report.push(entry);
    let per_particle: Vec<_> =
        cmp.per_particle.iter().map(|p| json!({"sup": p.sup, "mean": p.mean, "samples": p.samples})).collect();
    let mut doc = report.to_json();
    doc["per_particle"] = json!(per_particle);
    fs::write(out.join(COMPARISON_FILE), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(report)
}

fn dynamics_mesh(d: &DynamicsConfig) -> Result<Vec<f64>> {
    let steps = (d.t_end / d.dt).round() as usize;
    if steps < 2 || ((steps as f64) * d.dt - d.t_end).abs() > 1e-9 * d.t_end {
        return Err(usage(format!("T = {} must be a multiple of dt = {} with at least two steps", d.t_end, d.dt)));
    }
    Ok((0..=steps).map(|k| k as f64 * d.dt).collect())
}

fn resolve_shift(spec: &ShiftSpec, td: &TimeDependentScenario) -> Result<GaugeShift> {
    let times = td.times.clone();
    match spec {
        ShiftSpec::Named(NamedShift::AddQuantumPotential) => {
            GaugeShift::adding_quantum_potential(&td.lambda, times, &td.constants)
        }
        ShiftSpec::Named(NamedShift::RemoveQuantumPotential) => {
            GaugeShift::removing_quantum_potential(&td.lambda, times, &td.constants)
        }
        ShiftSpec::Constant(c) => GaugeShift::constant(c.constant, times),
        ShiftSpec::Samples(s) => {
            if s.times.len() != s.f.len() || s.times.is_empty() || s.times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(usage("gauge samples need increasing times and one f per time"));
            }
            let slack = 1e-12 * times[times.len() - 1].abs().max(1.0);
            if s.times[0] > times[0] + slack || s.times[s.times.len() - 1] < times[times.len() - 1] - slack {
                return Err(usage("gauge samples do not cover the scenario time mesh"));
            }
            let f = times.iter().map(|&t| interpolate(&s.times, &s.f, t)).collect();
            GaugeShift::new(times, f)
        }
    }
}

/// Largest `|∂φ/∂t + |∇φ|²/2m + V + c(t)|` over slices and unmasked nodes.
fn hamilton_jacobi_defect(td: &TimeDependentScenario, v: &[ScalarField], c: &[f64]) -> f64 {
    let inv2m = 0.5 / td.constants.mass;
    let mut worst: f64 = 0.0;
    for n in 0..td.times.len() {
        let g2 = squared_norm(&td.grad_phi[n]);
        for i in (0..g2.len()).filter(|&i| !td.masks[n].is_masked(i)) {
            let d = td.dphi_dt[n].values()[i] + g2[i] * inv2m + v[n].values()[i] + c[n];
            worst = worst.max(d.abs());
        }
    }
    worst
}

pub fn gauge(
    dir: &Path,
    choice: Option<ShiftSpec>,
    overrides: &[String],
    out: Option<&Path>,
) -> Result<VerificationReport> {
    let stored = StoredScenario::load(dir)?;
    let config = stored.header.config.with_overrides(overrides)?;
    let spec = choice
        .or_else(|| config.gauge.as_ref().map(|g| g.f.clone()))
        .ok_or_else(|| usage("no gauge shift given on the command line or in the config"))?;
    let td = match &stored.scenario {
        SemiclassicalScenario::TimeDependent(td) => td.clone(),
        SemiclassicalScenario::Stationary(s) => s.to_time_dependent(dynamics_mesh(dynamics_section(&config)?)?)?,
    };
    let shift = resolve_shift(&spec, &td)?;
    let shifted = gauge_shift(&td, &shift)?;
    let tol = td.tolerances.clone();

    let mut report = VerificationReport::new(&stored.header.id, config.hash());
    report.extend(check_gauge_fields(&td, &shifted, &shift, tol.qhj_assembly)?);
    let frac = td.masks.iter().map(NodeMask::fraction).fold(0.0, f64::max);
    let meta = EntryMeta::new(td.grid(), frac).with_dt(td.times[1] - td.times[0]);
    let k = td.k_values();
    report.push(ReportEntry::judge(
        "gauge_qhj_assembly",
        hamilton_jacobi_defect(&shifted, &shifted.v, &k),
        tol.qhj_assembly,
        meta.clone(),
    ));
    // With f = K the original phase solves the classical equation in V + K;
    // with f = -K the shifted phase solves it in the original V.
    let zero = vec![0.0; k.len()];
    let classical = match spec {
        ShiftSpec::Named(NamedShift::AddQuantumPotential) => Some(hamilton_jacobi_defect(&td, &shifted.v, &zero)),
        ShiftSpec::Named(NamedShift::RemoveQuantumPotential) => Some(hamilton_jacobi_defect(&shifted, &td.v, &zero)),
        _ => None,
    };
    if let Some(defect) = classical {
        report.push(ReportEntry::judge("gauge_zero_quantum_potential", defect, tol.qhj_assembly, meta.clone()));
    }

    match &config.dynamics {
        None => report.notes.push("no dynamics section: motion checks skipped".into()),
        Some(d) => {
            let a_sc = SemiclassicalScenario::TimeDependent(td.clone());
            let b_sc = SemiclassicalScenario::TimeDependent(shifted.clone());
            let a_in = dynamics_inputs(&a_sc)?;
            let b_in = dynamics_inputs(&b_sc)?;
            let a = run_evolution(&a_in, &a_sc, d)?;
            let b = run_evolution(&b_in, &b_sc, d)?;
            let eps = td.eps_node / a_in.normalization;
            let motion_meta = EntryMeta::new(td.grid(), a_in.mask.fraction()).with_dt(d.dt);
            report.push(ReportEntry::judge(
                "gauge_bohmian_velocity",
                velocity_difference(&a, &b, &td.constants, eps)?,
                GAUGE_MOTION_TOL,
                motion_meta.clone(),
            ));
            let particles = config.particles();
            if particles.is_empty() {
                report.notes.push("no particles: classical path check skipped".into());
            } else {
                let positions: Vec<Vec<f64>> = particles.iter().map(|p| p.x0.clone()).collect();
                let ics = guidance_matched_ics(&a.psi[0], &td.constants, eps, &positions)?;
                let pa = integrate_classical(&a_in.potential, &td.constants, &ics, d.dt, d.t_end, Some(&a_in.mask))?;
                let pb = integrate_classical(&b_in.potential, &td.constants, &ics, d.dt, d.t_end, Some(&a_in.mask))?;
                let mut entry = compare_trajectories(&pa, &pb, GAUGE_MOTION_TOL, motion_meta)?.entry;
                entry.name = "gauge_classical_paths".into();
                report.push(entry);
            }
        }
    }

    let out = out.map_or_else(|| dir.join("gauge"), Path::to_path_buf);
    let image = SemiclassicalScenario::TimeDependent(shifted);
    let mut header = ScenarioHeader::new(&config, &image);
    header.calibration = stored.header.calibration.clone();
    header.notes.push(format!("gauge image of scenario {}", stored.header.id));
    StoredScenario { header, scenario: image }.save(&out)?;
    write_report(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// Reads a `{"times": [...], "f": [...]}` file for `gauge --samples`.
pub fn read_shift_samples(path: &Path) -> Result<ShiftSpec> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let samples = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(ShiftSpec::Samples(samples))
}
