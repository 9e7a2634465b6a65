//! SQE value tables, persistent microstates and the estimators read off them.

use serde::{Deserialize, Serialize};

use crate::coupling::{coupling_for_eigenstate, CouplingField};
use crate::error::{invalid, Result};
use crate::grid::{canonicalize, AlphaGrid, Eigenvalue, GridAngle};
use crate::rng::CounterStream;

/// Persistent hidden phase of one SQE. Fixed when the ensemble is created.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[repr(transparent)]
#[serde(transparent)]
pub struct SqeMicrostate {
    u: f64,
}

impl SqeMicrostate {
    pub fn new(u: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&u) {
            return Err(invalid("u", format!("microstate {u} outside [0, 1)")));
        }
        Ok(SqeMicrostate { u })
    }

    #[inline(always)]
    pub fn u(&self) -> f64 {
        self.u
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Equilibrium {
    pub alpha: GridAngle,
    pub m: Eigenvalue,
}

/// `N x M` table of SQE values `a_i(alpha)`, stored column by column so that
/// each observable `alpha` is one contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleState {
    grid: AlphaGrid,
    n_sqe: usize,
    values: Vec<f64>,
    microstates: Vec<SqeMicrostate>,
    equilibrium: Option<Equilibrium>,
}

impl EnsembleState {
    /// Assembles a state from a column-major value table.
    pub fn from_parts(
        grid: AlphaGrid,
        values: Vec<f64>,
        microstates: Vec<SqeMicrostate>,
        equilibrium: Option<Equilibrium>,
    ) -> Result<Self> {
        let n_sqe = microstates.len();
        if n_sqe == 0 {
            return Err(invalid("microstates", "ensemble must be non-empty"));
        }
        if values.len() != n_sqe * grid.size() as usize {
            return Err(invalid(
                "values",
                format!("expected {} x {} entries, got {}", n_sqe, grid.size(), values.len()),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(invalid("values", format!("value {v} outside [-1, 1]")));
        }
        if let Some(eq) = equilibrium {
            grid.check(eq.alpha)?;
        }
        Ok(EnsembleState {
            grid,
            n_sqe,
            values,
            microstates,
            equilibrium,
        })
    }

    /// Ensemble whose values sit exactly on the local-equilibrium targets of
    /// `g`. Carries no equilibrium tag.
    pub fn at_targets(g: &CouplingField, microstates: Vec<SqeMicrostate>) -> Result<Self> {
        let grid = g.grid();
        let n = microstates.len();
        let mut values = Vec::with_capacity(n * grid.size() as usize);
        for col in 0..grid.size() {
            let rule = g.target_rule(col);
            values.extend(microstates.iter().map(|s| rule.target(s.u)));
        }
        Self::from_parts(grid, values, microstates, None)
    }

    pub fn grid(&self) -> AlphaGrid {
        self.grid
    }

    pub fn n_sqe(&self) -> usize {
        self.n_sqe
    }

    pub fn microstates(&self) -> &[SqeMicrostate] {
        &self.microstates
    }

    pub fn equilibrium(&self) -> Option<Equilibrium> {
        self.equilibrium
    }

    pub fn set_equilibrium(&mut self, tag: Option<Equilibrium>) {
        self.equilibrium = tag;
    }

    /// Column-major value table.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// All values `a_i(alpha)` of one observable.
    ///
    /// # Panics
    /// If `alpha` belongs to a different grid.
    pub fn column(&self, alpha: GridAngle) -> &[f64] {
        assert_eq!(alpha.grid_size(), self.grid.size(), "angle from a different grid");
        self.column_at(alpha.index())
    }

    pub(crate) fn column_at(&self, index: u32) -> &[f64] {
        let start = index as usize * self.n_sqe;
        &self.values[start..start + self.n_sqe]
    }

    pub fn value(&self, i: usize, alpha: GridAngle) -> f64 {
        self.column(alpha)[i]
    }
}

/// Draws `n` microstates from the stream keyed by `seed`.
pub fn draw_microstates(n: usize, seed: u64) -> Vec<SqeMicrostate> {
    CounterStream::new(seed)
        .units(n)
        .into_iter()
        .map(|u| SqeMicrostate { u })
        .collect()
}

/// Eigenstate `(alpha0, m)` in exact local equilibrium.
///
/// Values follow the target rule of the canonical coupling field, so the
/// fraction of `+1` entries at every `alpha` is the Born weight and every
/// entity obeys `a_i(alpha + pi) = -a_i(alpha)`.
pub fn init_eigenstate(
    n_sqe: usize,
    grid: AlphaGrid,
    alpha0: GridAngle,
    m: Eigenvalue,
    seed: u64,
) -> Result<EnsembleState> {
    if n_sqe < 2 {
        return Err(invalid("n_sqe", format!("need at least 2 SQEs, got {n_sqe}")));
    }
    grid.check(alpha0)?;
    let (peak, _) = canonicalize(alpha0, m);
    let g = coupling_for_eigenstate(grid, peak)?;
    let mut state = EnsembleState::at_targets(&g, draw_microstates(n_sqe, seed))?;
    state.equilibrium = Some(Equilibrium { alpha: alpha0, m });
    Ok(state)
}

pub fn ensemble_average(state: &EnsembleState, alpha: GridAngle) -> f64 {
    state.column(alpha).iter().sum::<f64>() / state.n_sqe as f64
}

/// Number of SQEs with `a_i(alpha) > 0`.
pub fn count_positive(state: &EnsembleState, alpha: GridAngle) -> usize {
    state.column(alpha).iter().filter(|&&a| a > 0.0).count()
}

pub fn fractional_volume(state: &EnsembleState, alpha: GridAngle) -> f64 {
    count_positive(state, alpha) as f64 / state.n_sqe as f64
}

/// Common eigenvalue of a column when every value is within `eps` of it.
pub fn column_eigenvalue(column: &[f64], eps: f64) -> Option<Eigenvalue> {
    let first = *column.first()?;
    let m = Eigenvalue::from_bool(first > 0.0);
    let s = m.sign();
    column.iter().all(|&a| (a - s).abs() <= eps).then_some(m)
}

pub fn is_equilibrium(state: &EnsembleState, alpha: GridAngle, eps: f64) -> bool {
    column_eigenvalue(state.column(alpha), eps).is_some()
}
