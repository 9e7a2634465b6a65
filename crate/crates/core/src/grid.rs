//! The discretized parameter circle and spin-1/2 eigenvalues.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SqeError};

/// Tolerance, in radians, for snapping an angle onto a grid point.
pub const SNAP_TOLERANCE: f64 = 1e-9;

/// `M` equally spaced angles `2 pi j / M` on the circle. `M` is even and at
/// least 4 so every angle has its antipode on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlphaGrid {
    size: u32,
}

impl AlphaGrid {
    pub fn new(size: u32) -> Result<Self> {
        if size < 4 || !size.is_multiple_of(2) {
            return Err(invalid(
                "grid_size",
                format!("must be an even integer >= 4, got {size}"),
            ));
        }
        Ok(AlphaGrid { size })
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn half(&self) -> u32 {
        self.size / 2
    }

    pub fn radians_of(&self, index: u32) -> f64 {
        TAU * index as f64 / self.size as f64
    }

    /// All grid angles in increasing order.
    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.size).map(move |j| self.radians_of(j))
    }

    pub fn angles(&self) -> impl Iterator<Item = GridAngle> + '_ {
        (0..self.size).map(move |j| self.at(j))
    }

    /// The grid angle with index `index mod M`.
    pub fn at(&self, index: u32) -> GridAngle {
        GridAngle {
            index: index % self.size,
            grid_size: self.size,
        }
    }

    /// Snaps `radians` (any real, wrapped mod 2 pi) onto the grid, rejecting
    /// angles further than [`SNAP_TOLERANCE`] from every grid point.
    pub fn angle(&self, radians: f64) -> Result<GridAngle> {
        if !radians.is_finite() {
            return Err(SqeError::OffGrid {
                radians,
                grid_size: self.size,
            });
        }
        let units = radians / TAU * self.size as f64;
        let nearest = units.round();
        if ((units - nearest) * TAU / self.size as f64).abs() > SNAP_TOLERANCE {
            return Err(SqeError::OffGrid {
                radians,
                grid_size: self.size,
            });
        }
        let m = self.size as i64;
        Ok(self.at((nearest as i64).rem_euclid(m) as u32))
    }

    pub fn angle_deg(&self, degrees: f64) -> Result<GridAngle> {
        self.angle(degrees.to_radians())
    }

    pub fn check(&self, angle: GridAngle) -> Result<()> {
        if angle.grid_size != self.size {
            return Err(SqeError::GridMismatch {
                expected: self.size,
                found: angle.grid_size,
            });
        }
        Ok(())
    }

    /// `cos^2(pi d / M) = (1 + cos(2 pi d / M)) / 2`: the overlap weight of
    /// two spin directions `d` grid units apart.
    ///
    /// Evaluated in the half-angle-free form so `d = 0` gives exactly 1 and
    /// `d = M/2` exactly 0.
    pub fn overlap_weight(&self, offset_units: u32) -> f64 {
        let d = offset_units % self.size;
        0.5 * (1.0 + (TAU * d as f64 / self.size as f64).cos())
    }
}

/// A point of an [`AlphaGrid`]. Carries its grid size so that angles from
/// different grids are never silently mixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridAngle {
    index: u32,
    grid_size: u32,
}

impl GridAngle {
    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn grid_size(&self) -> u32 {
        self.grid_size
    }

    pub fn radians(&self) -> f64 {
        TAU * self.index as f64 / self.grid_size as f64
    }

    pub fn degrees(&self) -> f64 {
        360.0 * self.index as f64 / self.grid_size as f64
    }

    /// Moves by `units` grid steps (either sign), wrapping around the circle.
    pub fn offset(&self, units: i64) -> GridAngle {
        let m = self.grid_size as i64;
        GridAngle {
            index: (self.index as i64 + units).rem_euclid(m) as u32,
            grid_size: self.grid_size,
        }
    }

    pub fn antipode(&self) -> GridAngle {
        self.offset(self.grid_size as i64 / 2)
    }

    /// `(self - origin) mod M`, in grid units.
    pub fn units_from(&self, origin: GridAngle) -> u32 {
        debug_assert_eq!(self.grid_size, origin.grid_size);
        (self.index + self.grid_size - origin.index) % self.grid_size
    }

    /// Shortest signed arc from `self` to `other` in grid units, in
    /// `(-M/2, M/2]`.
    pub fn signed_arc_to(&self, other: GridAngle) -> i64 {
        let m = self.grid_size as i64;
        let d = other.units_from(*self) as i64;
        if d > m / 2 {
            d - m
        } else {
            d
        }
    }
}

/// Eigenvalue of a spin-1/2 observable, in units of `hbar/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Eigenvalue {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Eigenvalue {
    pub fn sign(self) -> f64 {
        match self {
            Eigenvalue::Plus => 1.0,
            Eigenvalue::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Eigenvalue::Plus => 1,
            Eigenvalue::Minus => -1,
        }
    }

    pub fn flipped(self) -> Eigenvalue {
        match self {
            Eigenvalue::Plus => Eigenvalue::Minus,
            Eigenvalue::Minus => Eigenvalue::Plus,
        }
    }

    pub fn from_bool(plus: bool) -> Eigenvalue {
        if plus {
            Eigenvalue::Plus
        } else {
            Eigenvalue::Minus
        }
    }
}

impl TryFrom<i64> for Eigenvalue {
    type Error = SqeError;

    fn try_from(m: i64) -> Result<Self> {
        match m {
            1 => Ok(Eigenvalue::Plus),
            -1 => Ok(Eigenvalue::Minus),
            other => Err(SqeError::InvalidEigenvalue(other)),
        }
    }
}

impl std::fmt::Display for Eigenvalue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

/// Rewrites an eigenstate label so the eigenvalue is `+1`, using
/// `S(-n) = -S(n)`: `(alpha, -1)` becomes `(alpha + pi, +1)`.
pub fn canonicalize(alpha: GridAngle, m: Eigenvalue) -> (GridAngle, Eigenvalue) {
    match m {
        Eigenvalue::Plus => (alpha, Eigenvalue::Plus),
        Eigenvalue::Minus => (alpha.antipode(), Eigenvalue::Plus),
    }
}
