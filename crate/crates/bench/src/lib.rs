//! Shared fixtures for the benchmarks.

use sqe_core::relaxation::random_state;
use sqe_core::{coupling_for_eigenstate, AlphaGrid, CouplingField, EnsembleState, Result};

/// A random unrelaxed state and the field of the eigenstate at angle 0.
pub fn relaxation_fixture(n_sqe: usize, grid_size: u32, seed: u64) -> Result<(EnsembleState, CouplingField)> {
    let grid = AlphaGrid::new(grid_size)?;
    Ok((random_state(n_sqe, grid, seed)?, coupling_for_eigenstate(grid, grid.at(0))?))
}
