use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::error::Result;
use crate::fields::{Boundary, ComplexField, NodeMask, PhysicalConstants, ScalarField};

#[derive(Clone, Debug, PartialEq)]
pub struct PolarDecomposition {
    pub r: ScalarField,
    /// Unwrapped phase in action units.
    pub phi: ScalarField,
    pub mask: NodeMask,
    /// Number of connected unmasked components that were unwrapped.
    pub components: usize,
}

impl PolarDecomposition {
    /// Set when the unmasked region is disconnected, in which case the
    /// branch constant of every component but the first is arbitrary.
    pub fn disconnected(&self) -> bool {
        self.components > 1
    }
}

/// `Ψ = R exp(iφ/ħ)` with `φ` unwrapped by a breadth-first flood fill that
/// starts at the largest `|Ψ|` and keeps neighbour jumps below `πħ`.
/// Masked nodes (`|Ψ| < eps_node`) get `φ = 0`.
pub fn polar_decompose(psi: &ComplexField, constants: &PhysicalConstants, eps_node: f64) -> Result<PolarDecomposition> {
    let grid = psi.grid();
    let hbar = constants.hbar;
    let r = psi.modulus();
    let mask = NodeMask::from_amplitude(&r, eps_node);
    let wrapped: Vec<f64> = psi.values().iter().map(|z| z.arg()).collect();
    let mut phase = vec![0.0; grid.len()];
    let mut seen: Vec<bool> = (0..grid.len()).map(|i| mask.is_masked(i)).collect();
    let mut components = 0;

    let mut order: Vec<usize> = (0..grid.len()).filter(|&i| !seen[i]).collect();
    // stable: ties keep storage order
    order.sort_by(|&a, &b| r.values()[b].total_cmp(&r.values()[a]));

    let mut queue = VecDeque::new();
    for &seed in &order {
        if seen[seed] {
            continue;
        }
        components += 1;
        seen[seed] = true;
        phase[seed] = wrapped[seed];
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            for j in grid.neighbors(i) {
                if seen[j] {
                    continue;
                }
                seen[j] = true;
                let turns = ((phase[i] - wrapped[j]) / (2.0 * PI)).round();
                phase[j] = wrapped[j] + 2.0 * PI * turns;
                queue.push_back(j);
            }
        }
    }
    let phi = ScalarField::new(grid.clone(), phase.into_iter().map(|p| p * hbar).collect())?;
    Ok(PolarDecomposition { r, phi, mask, components })
}

/// `v = ħ Im(Ψ̄ ∇Ψ) / (m |Ψ|²)`, discretised through neighbour phase
/// increments `arg(Ψ̄_j Ψ_k)` fed to the same stencils as [`gradient`]. No
/// global unwrapping is needed, and on node-free fields the result equals the
/// gradient of the unwrapped phase divided by `m`. Nodes with
/// `|Ψ| < eps_node` get zero.
///
/// [`gradient`]: crate::fields::gradient
pub fn bohmian_velocity(psi: &ComplexField, constants: &PhysicalConstants, eps_node: f64) -> Vec<ScalarField> {
    let grid = psi.grid();
    let values = psi.values();
    let scale = constants.hbar / constants.mass;
    let periodic = grid.boundary() == Boundary::Periodic;
    (0..grid.dim())
        .map(|axis| {
            let n = grid.extents()[axis];
            let s = grid.strides()[axis];
            let inv2h = 0.5 / grid.spacing()[axis];
            let out = (0..grid.len())
                .map(|flat| {
                    if values[flat].norm() < eps_node || values[flat].norm() == 0.0 {
                        return 0.0;
                    }
                    let i = (flat / s) % n;
                    let base = flat - i * s;
                    let step = |a: usize, b: usize| (values[base + a * s].conj() * values[base + b * s]).arg();
                    let d = if periodic {
                        step((i + n - 1) % n, i) + step(i, (i + 1) % n)
                    } else if i == 0 {
                        3.0 * step(0, 1) - step(1, 2)
                    } else if i == n - 1 {
                        3.0 * step(n - 2, n - 1) - step(n - 3, n - 2)
                    } else {
                        step(i - 1, i) + step(i, i + 1)
                    };
                    scale * d * inv2h
                })
                .collect();
            ScalarField::new(grid.clone(), out).expect("finite velocity")
        })
        .collect()
}
