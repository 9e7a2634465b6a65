//! Contact-style relaxation of an ensemble toward the local-equilibrium
//! structure of a coupling field.
//!
//! One sweep pulls every value toward its target,
//! `a <- a + eta * rate * (t - a)`, where the column rate is
//! [`CouplingField::rate_factor`]. Columns never read each other, so the
//! order in which they are processed cannot matter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{check_constraint, coupling_for_eigenstate, CouplingField, TargetRule};
use crate::ensemble::{draw_microstates, EnsembleState, Equilibrium, SqeMicrostate};
use crate::error::{invalid, Result, SqeError};
use crate::grid::{AlphaGrid, Eigenvalue};
use crate::rng::SeedPath;
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    pub eta: f64,
    pub eps_eq: f64,
    pub max_sweeps: u64,
}

impl Default for RelaxationParams {
    fn default() -> Self {
        RelaxationParams {
            eta: 0.1,
            eps_eq: 1e-3,
            max_sweeps: 10_000,
        }
    }
}

impl RelaxationParams {
    pub fn new(eta: f64, eps_eq: f64, max_sweeps: u64) -> Result<Self> {
        let p = RelaxationParams {
            eta,
            eps_eq,
            max_sweeps,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(invalid("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.eps_eq > 0.0 && self.eps_eq < 1.0) {
            return Err(invalid("eps_eq", format!("must lie in (0, 1), got {}", self.eps_eq)));
        }
        if self.max_sweeps == 0 {
            return Err(invalid("max_sweeps", "must be positive"));
        }
        Ok(())
    }

    /// Sweeps after which relaxation toward a field of peak coupling
    /// `strength` has converged from any starting table.
    ///
    /// The peak column contracts by `1 - eta*strength` per sweep from an error
    /// of at most 2; every other column contracts at least half as fast and
    /// only has to get its error below 1.
    pub fn worst_case_sweeps(&self, strength: f64) -> u64 {
        let rate = self.eta * strength;
        let peak = sweeps_to_reach(2.0, self.eps_eq, rate);
        let signs = sweeps_to_reach(2.0, 0.5, rate / 2.0);
        peak.max(signs) + 1
    }
}

/// Closed-form number of sweeps for an error `err0` to contract below `eps`
/// at per-sweep rate `rate`.
pub fn sweeps_to_reach(err0: f64, eps: f64, rate: f64) -> u64 {
    if err0 <= eps {
        0
    } else if rate >= 1.0 {
        1
    } else {
        ((err0 / eps).ln() / -(1.0 - rate).ln()).ceil() as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelaxationOutcome {
    pub state: EnsembleState,
    /// Sweeps performed; the relaxation time when `converged`.
    pub sweeps_used: u64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
struct Progress {
    /// Largest distance from target in the peak column.
    peak_error: f64,
    /// Every value has the sign of its target.
    signs_settled: bool,
}

impl Progress {
    const DONE: Progress = Progress {
        peak_error: 0.0,
        signs_settled: true,
    };

    fn merge(self, other: Progress) -> Progress {
        Progress {
            peak_error: self.peak_error.max(other.peak_error),
            signs_settled: self.signs_settled && other.signs_settled,
        }
    }

    fn converged(&self, eps: f64) -> bool {
        self.signs_settled && self.peak_error <= eps
    }
}

#[inline]
fn relax_column(
    column: &mut [f64],
    micro: &[SqeMicrostate],
    rule: TargetRule,
    rate: f64,
    is_peak: bool,
) -> Progress {
    let mut progress = Progress::DONE;
    for (a, s) in column.iter_mut().zip(micro) {
        let t = rule.target(s.u());
        let next = if rate >= 1.0 {
            t
        } else {
            (*a + rate * (t - *a)).clamp(-1.0, 1.0)
        };
        *a = next;
        progress.signs_settled &= next * t > 0.0;
        if is_peak {
            progress.peak_error = progress.peak_error.max((t - next).abs());
        }
    }
    progress
}

fn assess_column(column: &[f64], micro: &[SqeMicrostate], rule: TargetRule, is_peak: bool) -> Progress {
    let mut progress = Progress::DONE;
    for (&a, s) in column.iter().zip(micro) {
        let t = rule.target(s.u());
        progress.signs_settled &= a * t > 0.0;
        if is_peak {
            progress.peak_error = progress.peak_error.max((t - a).abs());
        }
    }
    progress
}

fn check_grid(state: &EnsembleState, g: &CouplingField) -> Result<()> {
    if state.grid() != g.grid() {
        return Err(SqeError::GridMismatch {
            expected: g.grid().size(),
            found: state.grid().size(),
        });
    }
    Ok(())
}

fn sweep(state: &mut EnsembleState, g: &CouplingField, eta: f64) -> Progress {
    let n = state.n_sqe();
    let peak = g.peak().index();
    let micro = state.microstates().to_vec();
    state.set_equilibrium(None);
    state
        .values_mut()
        .par_chunks_mut(n)
        .enumerate()
        .map(|(col, column)| {
            let col = col as u32;
            relax_column(column, &micro, g.target_rule(col), eta * g.rate_factor(col), col == peak)
        })
        .reduce(|| Progress::DONE, Progress::merge)
}

fn assess(state: &EnsembleState, g: &CouplingField) -> Progress {
    let peak = g.peak().index();
    (0..state.grid().size())
        .map(|col| assess_column(state.column_at(col), state.microstates(), g.target_rule(col), col == peak))
        .fold(Progress::DONE, Progress::merge)
}

/// One sweep over every `(i, alpha)`. Clears the equilibrium tag.
pub fn relax_step(state: &mut EnsembleState, g: &CouplingField, params: &RelaxationParams) -> Result<()> {
    check_grid(state, g)?;
    sweep(state, g, params.eta);
    Ok(())
}

/// [`relax_step`] processing the columns sequentially in the given order.
pub fn relax_step_ordered(
    state: &mut EnsembleState,
    g: &CouplingField,
    params: &RelaxationParams,
    order: &[u32],
) -> Result<()> {
    check_grid(state, g)?;
    let m = state.grid().size();
    let mut seen = vec![false; m as usize];
    for &c in order {
        if c >= m || std::mem::replace(&mut seen[c as usize], true) {
            return Err(invalid("order", "must be a permutation of the grid indices"));
        }
    }
    if order.len() != m as usize {
        return Err(invalid("order", "must be a permutation of the grid indices"));
    }
    let n = state.n_sqe();
    let micro = state.microstates().to_vec();
    let peak = g.peak().index();
    state.set_equilibrium(None);
    let values = state.values_mut();
    for &col in order {
        let column = &mut values[col as usize * n..(col as usize + 1) * n];
        relax_column(column, &micro, g.target_rule(col), params.eta * g.rate_factor(col), col == peak);
    }
    Ok(())
}

/// Sweeps until the peak observable is unanimous within `eps_eq` and every
/// value carries the sign of its target, or until `max_sweeps`.
///
/// On convergence the state is tagged `(peak, +1)`; otherwise it is left
/// untagged.
pub fn relax_to_equilibrium(
    mut state: EnsembleState,
    g: &CouplingField,
    params: &RelaxationParams,
) -> Result<RelaxationOutcome> {
    params.validate()?;
    check_grid(&state, g)?;
    let report = check_constraint(g);
    if !report.satisfied {
        return Err(SqeError::ConstraintViolated {
            residual: report.residual,
        });
    }
    let mut progress = assess(&state, g);
    let mut sweeps = 0;
    while !progress.converged(params.eps_eq) && sweeps < params.max_sweeps {
        progress = sweep(&mut state, g, params.eta);
        sweeps += 1;
    }
    let converged = progress.converged(params.eps_eq);
    state.set_equilibrium(converged.then_some(Equilibrium {
        alpha: g.peak(),
        m: Eigenvalue::Plus,
    }));
    Ok(RelaxationOutcome {
        state,
        sweeps_used: sweeps,
        converged,
    })
}

/// Ensemble with seeded microstates and values uniform in `[-1, 1)`.
pub fn random_state(n_sqe: usize, grid: AlphaGrid, seed: u64) -> Result<EnsembleState> {
    let path = SeedPath::root(seed);
    let micro = draw_microstates(n_sqe, path.child("microstates").seed());
    let values = path
        .child("values")
        .stream()
        .units(n_sqe * grid.size() as usize)
        .into_iter()
        .map(|u| 2.0 * u - 1.0)
        .collect();
    EnsembleState::from_parts(grid, values, micro, None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxTimeStats {
    pub g_peak: f64,
    pub mean_sweeps: f64,
    pub sd_sweeps: f64,
    pub samples: Vec<u64>,
    /// Trials that hit `max_sweeps`; they enter the statistics at that value.
    pub unconverged: usize,
}

/// Relaxation time from random initial tables toward the field of an
/// eigenstate at angle 0 scaled to peak coupling `g_peak`.
pub fn measure_relax_time(
    n_sqe: usize,
    grid: AlphaGrid,
    g_peak: f64,
    params: &RelaxationParams,
    trials: usize,
    seed: u64,
) -> Result<RelaxTimeStats> {
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let g = coupling_for_eigenstate(grid, grid.at(0))?.with_strength(g_peak)?;
    let root = SeedPath::root(seed).child("relax-time");
    let runs = (0..trials)
        .into_par_iter()
        .map(|t| {
            let state = random_state(n_sqe, grid, root.child(t).seed())?;
            relax_to_equilibrium(state, &g, params).map(|o| (o.sweeps_used, o.converged))
        })
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<u64> = runs.iter().map(|r| r.0).collect();
    let xs: Vec<f64> = samples.iter().map(|&s| s as f64).collect();
    Ok(RelaxTimeStats {
        g_peak,
        mean_sweeps: stats::mean(&xs),
        sd_sweeps: if xs.len() > 1 { stats::sample_sd(&xs) } else { 0.0 },
        unconverged: runs.iter().filter(|r| !r.1).count(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{init_eigenstate, is_equilibrium};

    fn grid() -> AlphaGrid {
        AlphaGrid::new(16).unwrap()
    }

    fn field(peak: u32) -> CouplingField {
        coupling_for_eigenstate(grid(), grid().at(peak)).unwrap()
    }

    #[test]
    fn fixed_point_is_unchanged() {
        let s = init_eigenstate(100, grid(), grid().at(3), Eigenvalue::Plus, 1).unwrap();
        let mut next = s.clone();
        relax_step(&mut next, &field(3), &RelaxationParams::default()).unwrap();
        assert_eq!(next.values(), s.values());
    }

    #[test]
    fn single_value_update() {
        let g = field(0);
        let micro = vec![SqeMicrostate::new(0.3).unwrap()];
        let mut values = vec![-1.0; 16];
        values[0] = 0.0;
        let mut s = EnsembleState::from_parts(grid(), values, micro, None).unwrap();
        relax_step(&mut s, &g, &RelaxationParams::default()).unwrap();
        assert!((s.values()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn column_with_zero_rate_is_frozen() {
        // Only a column whose antipode also has zero coupling is frozen.
        let mut values = vec![0.0; 16];
        values[0] = 1.0;
        values[2] = 0.5;
        let g = CouplingField::from_values(grid(), &values).unwrap();
        assert_eq!(g.rate_factor(5), 0.0);
        let mut s = random_state(20, grid(), 3).unwrap();
        let before = s.column(grid().at(5)).to_vec();
        for _ in 0..5 {
            relax_step(&mut s, &g, &RelaxationParams::new(1.0, 1e-3, 10).unwrap()).unwrap();
        }
        assert_eq!(s.column(grid().at(5)), &before[..]);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(sweeps_to_reach(2.0, 1e-3, 0.1), 73);
        assert_eq!(sweeps_to_reach(2.0, 1e-3, 0.05), 149);
        assert_eq!(sweeps_to_reach(0.0, 1e-3, 0.1), 0);
    }

    #[test]
    fn start_in_equilibrium_needs_no_sweeps() {
        let s = init_eigenstate(50, grid(), grid().at(4), Eigenvalue::Plus, 2).unwrap();
        let out = relax_to_equilibrium(s, &field(4), &RelaxationParams::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.sweeps_used, 0);
    }

    #[test]
    fn insufficient_budget_reports_non_convergence() {
        let s = init_eigenstate(50, grid(), grid().at(0), Eigenvalue::Plus, 2).unwrap();
        let params = RelaxationParams::new(0.1, 1e-3, 1).unwrap();
        let out = relax_to_equilibrium(s, &field(8), &params).unwrap();
        assert!(!out.converged);
        assert_eq!(out.sweeps_used, 1);
        assert_eq!(out.state.equilibrium(), None);
    }

    #[test]
    fn convergence_tags_the_peak() {
        let s = random_state(64, grid(), 5).unwrap();
        let out = relax_to_equilibrium(s, &field(6), &RelaxationParams::default()).unwrap();
        assert!(out.converged);
        assert!(is_equilibrium(&out.state, grid().at(6), 1e-3));
        assert_eq!(
            out.state.equilibrium(),
            Some(Equilibrium {
                alpha: grid().at(6),
                m: Eigenvalue::Plus
            })
        );
        assert!(out.sweeps_used <= RelaxationParams::default().worst_case_sweeps(1.0));
    }

    #[test]
    fn unit_rate_converges_in_one_sweep() {
        let params = RelaxationParams::new(1.0, 1e-3, 100).unwrap();
        let stats = measure_relax_time(64, grid(), 1.0, &params, 10, 7).unwrap();
        assert_eq!(stats.mean_sweeps, 1.0);
        assert_eq!(stats.sd_sweeps, 0.0);
    }

    #[test]
    fn ordered_sweep_matches_parallel_sweep() {
        let g = field(2);
        let params = RelaxationParams::default();
        let mut a = random_state(30, grid(), 8).unwrap();
        let mut b = a.clone();
        relax_step(&mut a, &g, &params).unwrap();
        let order: Vec<u32> = (0..16).rev().collect();
        relax_step_ordered(&mut b, &g, &params, &order).unwrap();
        assert_eq!(a, b);
        assert!(relax_step_ordered(&mut b, &g, &params, &[0, 0]).is_err());
    }

    #[test]
    fn rejects_unconstrained_fields() {
        let flat = CouplingField::from_values(grid(), &[1.0; 16]).unwrap();
        let s = random_state(4, grid(), 0).unwrap();
        assert!(relax_to_equilibrium(s, &flat, &RelaxationParams::default()).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(RelaxationParams::new(0.0, 1e-3, 10).is_err());
        assert!(RelaxationParams::new(1.5, 1e-3, 10).is_err());
        assert!(RelaxationParams::new(0.1, 1.0, 10).is_err());
        assert!(RelaxationParams::new(0.1, 1e-3, 0).is_err());
    }
}
