//! Semiclassical potentials: potentials for which the quantum potential is a
//! function of time only, so that Bohmian and classical motion coincide.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod helmholtz;
mod linalg;
pub mod potentials;
pub mod verify;

pub use error::{Error, Result};
