//! JSON snapshots of ensembles and coupling fields for debugging and
//! regression fixtures.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "n_sqe": 4,
//!   "grid_size": 8,
//!   "equilibrium": { "alpha_index": 0, "m": "+1" },
//!   "values": [[1.0, 1.0, 1.0, 1.0], ...],
//!   "microstates": [0.12, ...],
//!   "coupling": { "peak_index": 0, "values": [1.0, ...] }
//! }
//! ```
//!
//! `values[j]` holds `a_i(alpha_j)` for every SQE `i`. `equilibrium` is
//! `null` for untagged states; `values`, `microstates` and `coupling` are
//! omitted unless requested.

use serde::{Deserialize, Serialize};

use crate::coupling::CouplingField;
use crate::ensemble::{EnsembleState, Equilibrium, SqeMicrostate};
use crate::error::{invalid, Result};
use crate::grid::{AlphaGrid, Eigenvalue};

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumTag {
    pub alpha_index: u32,
    pub m: Eigenvalue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSnapshot {
    pub peak_index: u32,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSnapshot {
    pub schema_version: u32,
    pub n_sqe: usize,
    pub grid_size: u32,
    pub equilibrium: Option<EquilibriumTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub microstates: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSnapshot>,
}

impl EnsembleSnapshot {
    /// Header-only snapshot; add the full table with [`Self::with_table`].
    pub fn of(state: &EnsembleState) -> Self {
        EnsembleSnapshot {
            schema_version: SNAPSHOT_SCHEMA_VERSION,
            n_sqe: state.n_sqe(),
            grid_size: state.grid().size(),
            equilibrium: state.equilibrium().map(|e| EquilibriumTag {
                alpha_index: e.alpha.index(),
                m: e.m,
            }),
            values: None,
            microstates: None,
            coupling: None,
        }
    }

    pub fn with_table(mut self, state: &EnsembleState) -> Self {
        self.values = Some(state.values().chunks(state.n_sqe()).map(<[f64]>::to_vec).collect());
        self.microstates = Some(state.microstates().iter().map(|s| s.u()).collect());
        self
    }

    pub fn with_coupling(mut self, g: &CouplingField) -> Self {
        self.coupling = Some(CouplingSnapshot {
            peak_index: g.peak().index(),
            values: g.values(),
        });
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshots always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: EnsembleSnapshot =
            serde_json::from_str(text).map_err(|e| invalid("snapshot", e.to_string()))?;
        if snap.schema_version != SNAPSHOT_SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}", snap.schema_version),
            ));
        }
        Ok(snap)
    }

    /// Rebuilds the ensemble; requires the full table.
    pub fn restore(&self) -> Result<EnsembleState> {
        let grid = AlphaGrid::new(self.grid_size)?;
        let (Some(values), Some(micro)) = (&self.values, &self.microstates) else {
            return Err(invalid("snapshot", "value table not included"));
        };
        if values.iter().any(|col| col.len() != self.n_sqe) || micro.len() != self.n_sqe {
            return Err(invalid("snapshot", "table does not match n_sqe"));
        }
        let micro = micro
            .iter()
            .map(|&u| SqeMicrostate::new(u))
            .collect::<Result<Vec<_>>>()?;
        let equilibrium = self.equilibrium.map(|e| Equilibrium {
            alpha: grid.at(e.alpha_index),
            m: e.m,
        });
        EnsembleState::from_parts(grid, values.concat(), micro, equilibrium)
    }

    pub fn restore_coupling(&self) -> Result<Option<CouplingField>> {
        let Some(c) = &self.coupling else {
            return Ok(None);
        };
        let g = CouplingField::from_values(AlphaGrid::new(self.grid_size)?, &c.values)?;
        if g.peak().index() != c.peak_index {
            return Err(invalid("coupling", "peak_index is not the field maximum"));
        }
        Ok(Some(g))
    }
}
