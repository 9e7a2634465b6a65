//! Coupling fields over the parameter circle, the constraint they must obey,
//! and the transition functional that turns them into outcome probabilities.
//!
//! The realization used throughout the crate:
//!
//! * an eigenstate at `alpha0` carries the field `g(alpha) = cos^2((alpha - alpha0)/2)`,
//!   optionally scaled by an overall strength in `(0, 1]`;
//! * the transition functional is `F(g_peak, g) = g / g_peak`, which never
//!   looks at `alpha`;
//! * the constraint measures how far the normalized field is from that
//!   family and demands a unique peak.
//!
//! With these choices `F` reproduces `|<alpha,+|alpha0,+>|^2` exactly, which
//! [`qm_oracle`] computes independently from explicit spinors.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SqeError};
use crate::grid::{AlphaGrid, GridAngle};

/// Largest residual for which a field counts as satisfying the constraint.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-9;

/// The transition functional `F(x, y) = y / x`.
#[inline]
pub fn transition_functional(peak_coupling: f64, coupling: f64) -> f64 {
    coupling / peak_coupling
}

/// Per-column rule assigning each entity its local-equilibrium value:
/// `sign` when its microstate lies below `threshold`, `-sign` otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetRule {
    pub threshold: f64,
    pub sign: f64,
}

impl TargetRule {
    #[inline(always)]
    pub fn target(&self, u: f64) -> f64 {
        if u < self.threshold {
            self.sign
        } else {
            -self.sign
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingField {
    grid: AlphaGrid,
    /// `F(g(peak), g(alpha))` for every grid point.
    weights: Vec<f64>,
    strength: f64,
    peak_index: u32,
}

impl CouplingField {
    /// Builds a field from raw coupling values in `[0, 1]`. The peak is the
    /// first maximum; whether it is unique is left to [`check_constraint`].
    pub fn from_values(grid: AlphaGrid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.size() as usize {
            return Err(invalid(
                "values",
                format!("expected {} couplings, got {}", grid.size(), values.len()),
            ));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid("values", format!("coupling {bad} outside [0, 1]")));
        }
        let (peak_index, &peak) = values
            .iter()
            .enumerate()
            .fold((0, &values[0]), |best, cur| if cur.1 > best.1 { cur } else { best });
        if peak <= 0.0 {
            return Err(invalid("values", "field is identically zero"));
        }
        Ok(CouplingField {
            grid,
            weights: values.iter().map(|&g| transition_functional(peak, g)).collect(),
            strength: peak,
            peak_index: peak_index as u32,
        })
    }

    /// Rescales the whole field so its peak coupling is `strength`.
    pub fn with_strength(mut self, strength: f64) -> Result<Self> {
        if !(strength > 0.0 && strength <= 1.0) {
            return Err(invalid("strength", format!("must lie in (0, 1], got {strength}")));
        }
        self.strength = strength;
        Ok(self)
    }

    pub fn grid(&self) -> AlphaGrid {
        self.grid
    }

    pub fn peak(&self) -> GridAngle {
        self.grid.at(self.peak_index)
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// Raw coupling `g(alpha)`.
    pub fn value(&self, alpha: GridAngle) -> f64 {
        self.strength * self.weights[alpha.index() as usize]
    }

    pub fn values(&self) -> Vec<f64> {
        self.weights.iter().map(|w| self.strength * w).collect()
    }

    pub fn weight_at(&self, index: u32) -> f64 {
        self.weights[index as usize]
    }

    /// Relaxation rate multiplier of a column. A column and its antipode
    /// describe one observable axis (`A(alpha + pi) = -A(alpha)`), so both
    /// relax at the stronger of the two couplings.
    pub fn rate_factor(&self, index: u32) -> f64 {
        let anti = (index + self.grid.half()) % self.grid.size();
        self.strength * self.weights[index as usize].max(self.weights[anti as usize])
    }

    /// Local-equilibrium rule of a column.
    ///
    /// On the half circle starting at the peak an entity holds `+1` when its
    /// microstate lies below the Born weight; on the opposite half it holds
    /// the negation of its value at the antipodal column. Both halves give
    /// the fraction `w(alpha)` of `+1` values, and every entity satisfies
    /// `A(alpha + pi) = -A(alpha)`.
    pub fn target_rule(&self, index: u32) -> TargetRule {
        let half = self.grid.half();
        let offset = (index + self.grid.size() - self.peak_index) % self.grid.size();
        if offset < half {
            TargetRule {
                threshold: self.weights[index as usize],
                sign: 1.0,
            }
        } else {
            TargetRule {
                threshold: self.weights[((index + half) % self.grid.size()) as usize],
                sign: -1.0,
            }
        }
    }
}

/// The field `cos^2((alpha - alpha0)/2)` of an eigenstate at `alpha0`.
pub fn coupling_for_eigenstate(grid: AlphaGrid, alpha0: GridAngle) -> Result<CouplingField> {
    grid.check(alpha0)?;
    let values: Vec<f64> = grid
        .angles()
        .map(|a| grid.overlap_weight(a.units_from(alpha0)))
        .collect();
    CouplingField::from_values(grid, &values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub satisfied: bool,
    /// Largest deviation of the normalized field from the eigenstate family
    /// centred on its peak.
    pub residual: f64,
}

pub fn check_constraint(g: &CouplingField) -> ConstraintReport {
    let grid = g.grid;
    let peak = g.peak();
    let residual = grid
        .angles()
        .map(|a| (g.weights[a.index() as usize] - grid.overlap_weight(a.units_from(peak))).abs())
        .fold(0.0, f64::max);
    let peaks = g.weights.iter().filter(|&&w| w == 1.0).count();
    ConstraintReport {
        satisfied: peaks == 1 && residual <= CONSTRAINT_TOLERANCE,
        residual,
    }
}

/// Probability that measuring at `alpha` an eigenstate `(peak, +1)` carrying
/// field `g` yields `+1`.
pub fn born_functional(g: &CouplingField, alpha: GridAngle) -> Result<f64> {
    g.grid.check(alpha)?;
    let report = check_constraint(g);
    if !report.satisfied {
        return Err(SqeError::ConstraintViolated {
            residual: report.residual,
        });
    }
    Ok(transition_functional(g.value(g.peak()), g.value(alpha)))
}

/// `|<alpha,+|alpha0,+>|^2` from explicit two-component spinors
/// `(cos(theta/2), sin(theta/2))`.
pub fn qm_oracle(alpha0: f64, alpha: f64) -> f64 {
    let psi0 = [(alpha0 / 2.0).cos(), (alpha0 / 2.0).sin()];
    let psi = [(alpha / 2.0).cos(), (alpha / 2.0).sin()];
    let amplitude = psi[0] * psi0[0] + psi[1] * psi0[1];
    amplitude * amplitude
}
