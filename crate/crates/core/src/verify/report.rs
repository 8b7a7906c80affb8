use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fields::Grid;

/// Mask fraction above which a residual maximum is not meaningful.
pub const INCONCLUSIVE_MASK_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

/// Discretization context of a report entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryMeta {
    pub extents: Vec<usize>,
    pub spacing: Vec<f64>,
    pub dt: Option<f64>,
    /// Fraction of grid nodes excluded by the nodal mask.
    pub mask_fraction: f64,
}

impl EntryMeta {
    pub fn new(grid: &Grid, mask_fraction: f64) -> Self {
        EntryMeta { extents: grid.extents().to_vec(), spacing: grid.spacing().to_vec(), dt: None, mask_fraction }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    /// Entry metadata for checks that are not tied to a grid.
    pub fn scalar() -> Self {
        EntryMeta { extents: Vec::new(), spacing: Vec::new(), dt: None, mask_fraction: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub status: Status,
    pub meta: EntryMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ReportEntry {
    /// Pass iff `measured <= tolerance`; inconclusive when the mask covers
    /// more than [`INCONCLUSIVE_MASK_FRACTION`] of the box.
    pub fn judge(name: impl Into<String>, measured: f64, tolerance: f64, meta: EntryMeta) -> Self {
        let status = if meta.mask_fraction > INCONCLUSIVE_MASK_FRACTION {
            Status::Inconclusive
        } else if measured <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        ReportEntry { name: name.into(), measured, tolerance, status, meta, note: None }
    }

    /// Pass iff `measured > threshold`. Used for negative controls that must
    /// exceed a tolerance.
    pub fn judge_exceeds(name: impl Into<String>, measured: f64, threshold: f64, meta: EntryMeta) -> Self {
        let mut e = Self::judge(name, measured, threshold, meta);
        if e.status != Status::Inconclusive {
            e.status = if measured > threshold { Status::Pass } else { Status::Fail };
        }
        e
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Named residual checks with an overall verdict.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scenario_id: String,
    pub config_hash: String,
    pub entries: Vec<ReportEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(scenario_id: impl Into<String>, config_hash: impl Into<String>) -> Self {
        VerificationReport { scenario_id: scenario_id.into(), config_hash: config_hash.into(), ..Default::default() }
    }

    pub fn push(&mut self, entry: ReportEntry) {
        self.entries.push(entry);
    }

    pub fn extend(&mut self, entries: impl IntoIterator<Item = ReportEntry>) {
        self.entries.extend(entries);
    }

    /// True iff every entry passes.
    pub fn verdict(&self) -> bool {
        self.entries.iter().all(ReportEntry::passed)
    }

    /// Fail beats inconclusive beats pass.
    pub fn status(&self) -> Status {
        if self.entries.iter().any(|e| e.status == Status::Fail) {
            Status::Fail
        } else if self.entries.iter().any(|e| e.status == Status::Inconclusive) {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }

    pub fn entry(&self, name: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["verdict"] = serde_json::Value::Bool(self.verdict());
        v
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {} (config {})", self.scenario_id, self.config_hash)?;
        writeln!(f, "{:<36} {:>13} {:>13} {:>13}  status", "check", "measured", "tolerance", "mask")?;
        for e in &self.entries {
            let status = match e.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Inconclusive => "INCONCLUSIVE",
            };
            writeln!(
                f,
                "{:<36} {:>13.4e} {:>13.4e} {:>13.4}  {}",
                e.name, e.measured, e.tolerance, e.meta.mask_fraction, status
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        let verdict = match self.status() {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        };
        writeln!(f, "verdict: {verdict}")
    }
}
