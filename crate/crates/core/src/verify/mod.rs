//! Verification reports and the checks that fill them.

mod checks;
mod convergence;
mod report;

pub use checks::{
    check_gauge_fields, check_madelung, check_madelung_evolution, check_madelung_stationary,
    check_madelung_time_dependent, check_q_constancy, scenario_report, velocity_difference,
};
pub use convergence::{calibrate_budget, fit_convergence, ConvergenceFit};
pub use report::{EntryMeta, ReportEntry, Status, VerificationReport, INCONCLUSIVE_MASK_FRACTION};
