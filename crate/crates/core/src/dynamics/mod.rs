//! Schrödinger evolution, polar decomposition and particle trajectories.

mod polar;
mod schrodinger;
mod trajectory;

pub use polar::{bohmian_velocity, polar_decompose, PolarDecomposition};
pub use schrodinger::{
    evolve_schrodinger, fill_masked, BoundaryDrive, EvolutionResult, EvolveOptions, Potential, SCHEME, UNITARITY_TOL,
};
pub use trajectory::{
    compare_trajectories, guidance_matched_ics, integrate_bohmian, integrate_classical, InitialCondition,
    ParticleDeviation, ParticlePath, PathFlag, TrajectoryComparison, TrajectoryKind, TrajectorySet,
};
