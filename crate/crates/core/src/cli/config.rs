use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{Grid, PhysicalConstants};
use crate::helmholtz::{HelmholtzMode, LambdaSchedule};
use crate::potentials::Tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Stationary,
    TimeDependent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directive {
    /// Solve the (in)homogeneous Helmholtz problem with zero Dirichlet data.
    Solve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseSpec {
    Directive(Directive),
    Mode(HelmholtzMode),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    #[serde(rename = "R")]
    pub r: HelmholtzMode,
    #[serde(rename = "S_tilde", default, skip_serializing_if = "Option::is_none")]
    pub s_tilde: Option<PhaseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_tilde: Option<PhaseSpec>,
}

/// Per-check tolerances; unset ones are calibrated or defaulted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub helmholtz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inhomogeneous: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_constancy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qhj_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qhj_assembly: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, base: &Tolerances) -> Tolerances {
        Tolerances {
            helmholtz: self.helmholtz.unwrap_or(base.helmholtz),
            inhomogeneous: self.inhomogeneous.unwrap_or(base.inhomogeneous),
            q_constancy: self.q_constancy.unwrap_or(base.q_constancy),
            continuity: self.continuity.unwrap_or(base.continuity),
            qhj_residual: self.qhj_residual.unwrap_or(base.qhj_residual),
            qhj_assembly: self.qhj_assembly.unwrap_or(base.qhj_assembly),
            stationarity: self.stationarity.unwrap_or(base.stationarity),
            trajectory: self.trajectory.unwrap_or(base.trajectory),
        }
    }

    fn values(&self) -> [Option<f64>; 8] {
        [
            self.helmholtz,
            self.inhomogeneous,
            self.q_constancy,
            self.continuity,
            self.qhj_residual,
            self.qhj_assembly,
            self.stationarity,
            self.trajectory,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleEntry {
    pub x0: Vec<f64>,
    /// Classical initial velocity; the guidance velocity is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomParticles {
    pub count: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParticleSpec {
    List(Vec<ParticleEntry>),
    Random(RandomParticles),
}

impl Default for ParticleSpec {
    fn default() -> Self {
        ParticleSpec::List(Vec::new())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default = "one")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub particles: ParticleSpec,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedShift {
    /// f = K(t).
    AddQuantumPotential,
    /// f = -K(t).
    RemoveQuantumPotential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSamples {
    pub times: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConstant {
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShiftSpec {
    Named(NamedShift),
    Constant(ShiftConstant),
    Samples(ShiftSamples),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfig {
    pub f: ShiftSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub grid: Grid,
    #[serde(default = "PhysicalConstants::natural")]
    pub constants: PhysicalConstants,
    pub case: Case,
    pub modes: ModesConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_schedule: Option<LambdaSchedule>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_node: Option<f64>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeConfig>,
    #[serde(default)]
    pub seed: u64,
}

fn default_id() -> String {
    "scenario".into()
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(format!("config: {}", msg.into()))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_error(format!("{name} must be finite and positive, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_value(value).map_err(|e| config_error(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut value: Value = serde_json::from_str(&text).map_err(|e| config_error(e.to_string()))?;
        apply_overrides(&mut value, overrides)?;
        Self::from_value(value)
    }

    /// Re-applies overrides on top of an already parsed config.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut value = serde_json::to_value(self)?;
        apply_overrides(&mut value, overrides)?;
        Self::from_value(value)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.grid.dim();
        self.modes.r.validate(dim)?;
        for v in self.grid.spacing() {
            positive("grid.spacing", *v)?;
        }
        match self.case {
            Case::Stationary => {
                if self.lambda_schedule.is_some() || self.modes.phi_tilde.is_some() {
                    return Err(config_error("stationary case takes lambda and S_tilde"));
                }
                if self.modes.s_tilde.is_none() {
                    return Err(config_error("stationary case needs modes.S_tilde"));
                }
            }
            Case::TimeDependent => {
                if self.modes.s_tilde.is_some() || self.energy.is_some() {
                    return Err(config_error("time_dependent case takes phi_tilde and no E"));
                }
                if self.modes.phi_tilde.is_none() {
                    return Err(config_error("time_dependent case needs modes.phi_tilde"));
                }
                if self.lambda_schedule.is_none() {
                    return Err(config_error("time_dependent case needs lambda_schedule"));
                }
                if self.lambda.is_some() {
                    return Err(config_error("time_dependent case takes lambda_schedule instead of lambda"));
                }
            }
        }
        if let Some(PhaseSpec::Mode(m)) = self.modes.s_tilde.as_ref().or(self.modes.phi_tilde.as_ref()) {
            m.validate(dim)?;
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l >= 0.0) {
                return Err(config_error(format!("lambda must be finite and >= 0, got {l}")));
            }
        }
        if let Some(e) = self.energy {
            if !e.is_finite() {
                return Err(config_error("E must be finite"));
            }
        }
        if let Some(eps) = self.eps_node {
            positive("eps_node", eps)?;
        }
        for t in self.tolerances.values().into_iter().flatten() {
            positive("tolerances", t)?;
        }
        if let Some(d) = &self.dynamics {
            positive("dynamics.dt", d.dt)?;
            positive("dynamics.T", d.t_end)?;
            if d.snapshot_stride == 0 {
                return Err(config_error("dynamics.snapshot_stride must be at least 1"));
            }
            match &d.particles {
                ParticleSpec::List(list) => {
                    for p in list {
                        if p.x0.len() != dim || p.v0.as_ref().is_some_and(|v| v.len() != dim) {
                            return Err(config_error("particle coordinates must match the grid dimension"));
                        }
                        if p.x0.iter().chain(p.v0.iter().flatten()).any(|v| !v.is_finite()) {
                            return Err(config_error("particle coordinates must be finite"));
                        }
                    }
                }
                ParticleSpec::Random(r) => {
                    if r.lo.len() != dim || r.hi.len() != dim || r.lo.iter().zip(&r.hi).any(|(a, b)| !(a < b)) {
                        return Err(config_error("random particle box must have lo < hi on every axis"));
                    }
                }
            }
        }
        if let Some(GaugeConfig { f: ShiftSpec::Constant(c) }) = &self.gauge {
            if !c.constant.is_finite() {
                return Err(config_error("gauge constant must be finite"));
            }
        }
        Ok(())
    }

    /// Particle positions and optional velocity overrides, drawing random
    /// placements from a generator seeded with `seed`.
    pub fn particles(&self) -> Vec<ParticleEntry> {
        let Some(d) = &self.dynamics else { return Vec::new() };
        match &d.particles {
            ParticleSpec::List(list) => list.clone(),
            ParticleSpec::Random(r) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                (0..r.count)
                    .map(|_| ParticleEntry {
                        x0: r.lo.iter().zip(&r.hi).map(|(a, b)| rng.gen_range(*a..*b)).collect(),
                        v0: None,
                    })
                    .collect()
            }
        }
    }
}

/// Sets `KEY=VALUE` pairs where `KEY` is a dotted path (array indices are
/// numbers) and `VALUE` is JSON, or a bare string when it does not parse.
pub fn apply_overrides(value: &mut Value, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| config_error(format!("override {o:?} is not KEY=VALUE")))?;
        if key.is_empty() {
            return Err(config_error(format!("override {o:?} has an empty key")));
        }
        let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut slot = &mut *value;
        for part in key.split('.') {
            slot = match slot {
                Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
                Value::Array(items) => {
                    let i: usize = part.parse().map_err(|_| config_error(format!("{key}: {part} is not an index")))?;
                    items.get_mut(i).ok_or_else(|| config_error(format!("{key}: index {i} out of range")))?
                }
                Value::Null => {
                    *slot = Value::Object(Default::default());
                    match slot {
                        Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
                        _ => unreachable!(),
                    }
                }
                _ => return Err(config_error(format!("{key}: cannot descend into a scalar"))),
            };
        }
        *slot = new;
    }
    Ok(())
}
