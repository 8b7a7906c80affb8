use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::io::{read_scalar, read_scalar_series, write_scalar, write_scalar_series};
use crate::fields::PhysicalConstants;
use crate::helmholtz::LambdaSchedule;
use crate::potentials::{GaugeShift, SemiclassicalScenario, StationaryScenario, TimeDependentScenario, Tolerances};

use super::config::{Case, ScenarioConfig};

pub const SCENARIO_FORMAT: &str = "semiclassical-scenario/1";
pub const SCENARIO_HEADER: &str = "scenario.json";

/// Budget derived from errors on coarser copies of the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub check: String,
    pub spacings: Vec<f64>,
    pub errors: Vec<f64>,
    pub budget: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioHeader {
    pub format: String,
    pub id: String,
    pub config_hash: String,
    pub case: Case,
    pub constants: PhysicalConstants,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_schedule: Option<LambdaSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    pub eps_node: f64,
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calibration: Vec<Calibration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeShift>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub config: ScenarioConfig,
}

impl ScenarioHeader {
    pub fn new(config: &ScenarioConfig, scenario: &SemiclassicalScenario) -> Self {
        let mut header = ScenarioHeader {
            format: SCENARIO_FORMAT.into(),
            id: config.id.clone(),
            config_hash: config.hash(),
            case: Case::Stationary,
            constants: *scenario.constants(),
            energy: None,
            lambda: None,
            lambda_schedule: None,
            times: None,
            eps_node: 0.0,
            tolerances: scenario.tolerances().clone(),
            calibration: Vec::new(),
            gauge: None,
            notes: Vec::new(),
            config: config.clone(),
        };
        match scenario {
            SemiclassicalScenario::Stationary(s) => {
                header.energy = Some(s.energy);
                header.lambda = Some(s.lambda);
                header.eps_node = s.eps_node;
            }
            SemiclassicalScenario::TimeDependent(td) => {
                header.case = Case::TimeDependent;
                header.energy = td.energy;
                header.lambda_schedule = Some(td.lambda.clone());
                header.times = Some(td.times.clone());
                header.eps_node = td.eps_node;
                header.gauge = td.gauge.clone();
            }
        }
        header
    }
}

/// A scenario directory: header plus `R`, phase numerator and `V` payloads.
#[derive(Clone, Debug)]
pub struct StoredScenario {
    pub header: ScenarioHeader,
    pub scenario: SemiclassicalScenario,
}

impl StoredScenario {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        match &self.scenario {
            SemiclassicalScenario::Stationary(s) => {
                write_scalar(dir, "R", &s.r)?;
                write_scalar(dir, "S_tilde", &s.s_tilde)?;
                write_scalar(dir, "V", &s.v)?;
            }
            SemiclassicalScenario::TimeDependent(td) => {
                write_scalar_series(dir, "R", &td.r)?;
                write_scalar_series(dir, "phi_tilde", &td.phi_tilde)?;
                write_scalar_series(dir, "V", &td.v)?;
            }
        }
        let text = serde_json::to_string_pretty(&self.header)?;
        fs::write(dir.join(SCENARIO_HEADER), text + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SCENARIO_HEADER);
        let text =
            fs::read_to_string(&path).map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
        let header: ScenarioHeader = serde_json::from_str(&text)?;
        if header.format != SCENARIO_FORMAT {
            return Err(Error::Format(format!("unsupported scenario format {:?}", header.format)));
        }
        let missing = |what: &str| Error::Format(format!("{} header lacks {what}", header.case_name()));
        let scenario = match header.case {
            Case::Stationary => SemiclassicalScenario::Stationary(StationaryScenario::from_parts(
                header.constants,
                read_scalar(dir, "R")?,
                read_scalar(dir, "S_tilde")?,
                read_scalar(dir, "V")?,
                header.energy.ok_or_else(|| missing("energy"))?,
                header.lambda.ok_or_else(|| missing("lambda"))?,
                header.eps_node,
                header.tolerances.clone(),
            )?),
            Case::TimeDependent => SemiclassicalScenario::TimeDependent(TimeDependentScenario::from_parts(
                header.constants,
                header.times.clone().ok_or_else(|| missing("times"))?,
                header.lambda_schedule.clone().ok_or_else(|| missing("lambda_schedule"))?,
                read_scalar_series(dir, "R")?,
                read_scalar_series(dir, "phi_tilde")?,
                read_scalar_series(dir, "V")?,
                header.eps_node,
                header.tolerances.clone(),
                header.energy,
                header.gauge.clone(),
            )?),
        };
        Ok(StoredScenario { header, scenario })
    }
}

impl ScenarioHeader {
    fn case_name(&self) -> &'static str {
        match self.case {
            Case::Stationary => "stationary",
            Case::TimeDependent => "time_dependent",
        }
    }
}
