//! Unitary evolution as a chain of measurement-like relaxations along a
//! path of settings, with the `tau_relax << dt` regime check.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coupling::coupling_for_eigenstate;
use crate::ensemble::{draw_microstates, is_equilibrium, EnsembleState, Equilibrium};
use crate::error::{invalid, Result, SqeError};
use crate::grid::{canonicalize, AlphaGrid, Eigenvalue, GridAngle};
use crate::measurement::{
    collapse, draw_outcome, eigenstate_count_positive, outcome_from_count, HiddenSeeds,
};
use crate::relaxation::{relax_to_equilibrium, RelaxationParams};
use crate::rng::SeedPath;

pub const DEFAULT_R_MIN: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolutionMode {
    /// Carries the eigenvalue deterministically to each new setting.
    Adiabatic,
    /// Performs an ideal measurement at each new setting.
    Stochastic,
}

impl FromStr for EvolutionMode {
    type Err = SqeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adiabatic" => Ok(EvolutionMode::Adiabatic),
            "stochastic" => Ok(EvolutionMode::Stochastic),
            other => Err(invalid("mode", format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for EvolutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvolutionMode::Adiabatic => "adiabatic",
            EvolutionMode::Stochastic => "stochastic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPlan {
    pub alpha_start: GridAngle,
    pub alpha_end: GridAngle,
    pub steps: u32,
    pub dt_sweeps: u64,
    pub mode: EvolutionMode,
}

impl EvolutionPlan {
    /// Validates that the shortest arc from start to end splits into `steps`
    /// equal whole grid increments.
    pub fn new(
        grid: AlphaGrid,
        alpha_start: GridAngle,
        alpha_end: GridAngle,
        steps: u32,
        dt_sweeps: u64,
        mode: EvolutionMode,
    ) -> Result<Self> {
        grid.check(alpha_start)?;
        grid.check(alpha_end)?;
        if steps == 0 {
            return Err(SqeError::InvalidPlan("steps must be positive".into()));
        }
        if dt_sweeps == 0 {
            return Err(SqeError::InvalidPlan("dt_sweeps must be positive".into()));
        }
        let arc = alpha_start.signed_arc_to(alpha_end);
        if arc == 0 {
            return Err(SqeError::InvalidPlan("start and end coincide".into()));
        }
        if arc % steps as i64 != 0 {
            return Err(SqeError::InvalidPlan(format!(
                "an arc of {arc} grid units does not split into {steps} equal steps"
            )));
        }
        Ok(EvolutionPlan {
            alpha_start,
            alpha_end,
            steps,
            dt_sweeps,
            mode,
        })
    }

    /// Signed per-step increment in grid units.
    pub fn d_alpha(&self) -> i64 {
        self.alpha_start.signed_arc_to(self.alpha_end) / self.steps as i64
    }

    /// Setting reached after step `k` (1-based).
    pub fn waypoint(&self, k: u32) -> GridAngle {
        self.alpha_start.offset(self.d_alpha() * k as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// Sweeps the step's relaxation needs, capped at `max_sweeps`.
    pub tau_relax: u64,
    pub dt_sweeps: u64,
    /// `dt_sweeps / tau_relax`; infinite when no relaxation was needed.
    pub ratio: f64,
    pub pure_state_valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: EnsembleState,
    pub target: GridAngle,
    pub outcome: Eigenvalue,
    pub flipped: bool,
    pub report: RegimeReport,
}

fn check_r_min(r_min: f64) -> Result<()> {
    if !(r_min > 0.0 && r_min.is_finite()) {
        return Err(invalid("r_min", format!("must be positive, got {r_min}")));
    }
    Ok(())
}

/// Largest relaxation time compatible with `dt_sweeps` at threshold `r_min`,
/// never less than one sweep.
pub fn settle_window(dt_sweeps: u64, r_min: f64) -> u64 {
    ((dt_sweeps as f64 / r_min).floor() as u64).max(1)
}

/// One step of the chain: moves the setting by `d_alpha` grid units.
///
/// The relaxation gets [`settle_window`] sweeps. If it converges within them
/// the step is in the pure-state regime and the state is the eigenstate at
/// the new setting. Otherwise the state is returned as interrupted, untagged,
/// and the report carries the relaxation time found by continuing on a copy.
pub fn unitary_step(
    state: &EnsembleState,
    d_alpha: i64,
    dt_sweeps: u64,
    mode: EvolutionMode,
    seeds: &HiddenSeeds,
    params: &RelaxationParams,
    r_min: f64,
) -> Result<StepOutcome> {
    check_r_min(r_min)?;
    let eq = state.equilibrium().ok_or(SqeError::NotPure)?;
    if d_alpha == 0 {
        return Err(invalid("d_alpha", "must be at least one grid unit"));
    }
    if dt_sweeps == 0 {
        return Err(invalid("dt_sweeps", "must be positive"));
    }
    let target = eq.alpha.offset(d_alpha);
    let outcome = match mode {
        EvolutionMode::Adiabatic => eq.m,
        EvolutionMode::Stochastic => draw_outcome(state, target, seeds),
    };
    let window = settle_window(dt_sweeps, r_min).min(params.max_sweeps);
    let windowed = RelaxationParams {
        max_sweeps: window,
        ..*params
    };
    let first = collapse(state.clone(), target, outcome, &windowed)?;
    let (state, tau) = if first.converged {
        (first.state, first.sweeps_used)
    } else {
        let budget = params.max_sweeps.saturating_sub(window);
        let tau = if budget == 0 {
            window
        } else {
            let rest = RelaxationParams {
                max_sweeps: budget,
                ..*params
            };
            let (peak, _) = canonicalize(target, outcome);
            let g = coupling_for_eigenstate(state.grid(), peak)?;
            window + relax_to_equilibrium(first.state.clone(), &g, &rest)?.sweeps_used
        };
        (first.state, tau)
    };
    let ratio = if tau == 0 {
        f64::INFINITY
    } else {
        dt_sweeps as f64 / tau as f64
    };
    Ok(StepOutcome {
        target,
        outcome,
        flipped: outcome != eq.m,
        report: RegimeReport {
            tau_relax: tau,
            dt_sweeps,
            ratio,
            pure_state_valid: first.converged,
        },
        state,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u32,
    pub alpha: GridAngle,
    pub m: Eigenvalue,
    pub flipped: bool,
    pub report: RegimeReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionResult {
    pub state: EnsembleState,
    pub total_flips: u32,
    pub log: Vec<StepLog>,
    /// Report of the last step taken.
    pub report: RegimeReport,
    /// The chain stopped at a regime violation.
    pub aborted: bool,
}

/// Hidden seeds of step `step` in the chain keyed by `chain_seed`.
pub fn step_seeds(chain_seed: u64, step: u32) -> HiddenSeeds {
    let root = SeedPath::root(chain_seed);
    HiddenSeeds {
        lambda_m: root.child("apparatus").seed(),
        lambda_sp: root.child("space").seed(),
        trial_index: step as u64,
    }
}

pub fn evolve(
    state: &EnsembleState,
    plan: &EvolutionPlan,
    chain_seed: u64,
    params: &RelaxationParams,
    r_min: f64,
) -> Result<EvolutionResult> {
    let eq = state.equilibrium().ok_or(SqeError::NotPure)?;
    if eq.alpha != plan.alpha_start {
        return Err(SqeError::InvalidPlan(format!(
            "state is an eigenstate at grid index {}, plan starts at {}",
            eq.alpha.index(),
            plan.alpha_start.index()
        )));
    }
    let base = step_seeds(chain_seed, 0);
    let mut current = state.clone();
    let mut log = Vec::with_capacity(plan.steps as usize);
    let mut total_flips = 0;
    let mut aborted = false;
    for k in 1..=plan.steps {
        let seeds = HiddenSeeds {
            trial_index: k as u64,
            ..base
        };
        let step = unitary_step(&current, plan.d_alpha(), plan.dt_sweeps, plan.mode, &seeds, params, r_min)?;
        total_flips += step.flipped as u32;
        log.push(StepLog {
            step: k,
            alpha: step.target,
            m: step.outcome,
            flipped: step.flipped,
            report: step.report,
        });
        current = step.state;
        if !step.report.pure_state_valid {
            aborted = true;
            break;
        }
    }
    Ok(EvolutionResult {
        state: current,
        total_flips,
        report: log.last().expect("plans have at least one step").report,
        log,
        aborted,
    })
}

/// True when no grid observable is in equilibrium.
pub fn detect_improper(state: &EnsembleState, eps: f64) -> bool {
    !state.grid().angles().any(|a| is_equilibrium(state, a, eps))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub total_flips: u32,
    pub final_state: Equilibrium,
}

/// True when every step of `plan` is guaranteed to settle inside its window,
/// so no step can violate the regime.
pub fn chain_always_settles(plan: &EvolutionPlan, params: &RelaxationParams, r_min: f64) -> bool {
    let window = settle_window(plan.dt_sweeps, r_min).min(params.max_sweeps);
    params.worst_case_sweeps(1.0) <= window
}

/// Flip count and final eigenstate of a chain started from
/// `init_eigenstate(n_sqe, grid, plan.alpha_start, m0, system_seed)`.
///
/// When every step is guaranteed to settle, each intermediate state has the
/// sign structure of its eigenstate, so the outcome counts are read straight
/// from the microstates. Otherwise the full chain is run.
#[allow(clippy::too_many_arguments)]
pub fn chain_summary(
    n_sqe: usize,
    grid: AlphaGrid,
    plan: &EvolutionPlan,
    m0: Eigenvalue,
    system_seed: u64,
    chain_seed: u64,
    params: &RelaxationParams,
    r_min: f64,
) -> Result<ChainSummary> {
    check_r_min(r_min)?;
    if !chain_always_settles(plan, params, r_min) {
        let state = crate::ensemble::init_eigenstate(n_sqe, grid, plan.alpha_start, m0, system_seed)?;
        let result = evolve(&state, plan, chain_seed, params, r_min)?;
        let final_state = result.state.equilibrium().ok_or(SqeError::NotPure)?;
        return Ok(ChainSummary {
            total_flips: result.total_flips,
            final_state,
        });
    }
    let micro: Vec<f64> = draw_microstates(n_sqe, system_seed).iter().map(|s| s.u()).collect();
    let base = step_seeds(chain_seed, 0);
    let mut alpha = plan.alpha_start;
    let mut m = m0;
    let mut total_flips = 0;
    for k in 1..=plan.steps {
        let target = plan.waypoint(k);
        let outcome = match plan.mode {
            EvolutionMode::Adiabatic => m,
            EvolutionMode::Stochastic => {
                let seeds = HiddenSeeds {
                    trial_index: k as u64,
                    ..base
                };
                let positive = eigenstate_count_positive(grid, alpha, m, target, micro.iter().copied())?;
                outcome_from_count(positive, n_sqe, &seeds)
            }
        };
        total_flips += (outcome != m) as u32;
        alpha = target;
        m = outcome;
    }
    Ok(ChainSummary {
        total_flips,
        final_state: Equilibrium { alpha, m },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::init_eigenstate;

    fn grid() -> AlphaGrid {
        AlphaGrid::new(16).unwrap()
    }

    fn seeds() -> HiddenSeeds {
        step_seeds(9, 1)
    }

    #[test]
    fn plan_validation() {
        let g = grid();
        let p = EvolutionPlan::new(g, g.at(0), g.at(4), 4, 1000, EvolutionMode::Adiabatic).unwrap();
        assert_eq!(p.d_alpha(), 1);
        assert_eq!(p.waypoint(4), g.at(4));
        let back = EvolutionPlan::new(g, g.at(4), g.at(0), 2, 1000, EvolutionMode::Adiabatic).unwrap();
        assert_eq!(back.d_alpha(), -2);
        assert!(EvolutionPlan::new(g, g.at(0), g.at(4), 3, 1000, EvolutionMode::Adiabatic).is_err());
        assert!(EvolutionPlan::new(g, g.at(0), g.at(0), 1, 1000, EvolutionMode::Adiabatic).is_err());
        assert!(EvolutionPlan::new(g, g.at(0), g.at(4), 0, 1000, EvolutionMode::Adiabatic).is_err());
    }

    #[test]
    fn adiabatic_step_transports_the_eigenvalue() {
        let s = init_eigenstate(100, grid(), grid().at(0), Eigenvalue::Plus, 1).unwrap();
        let out = unitary_step(&s, 1, 1000, EvolutionMode::Adiabatic, &seeds(), &RelaxationParams::default(), 10.0)
            .unwrap();
        assert!(!out.flipped);
        assert!(out.report.pure_state_valid);
        assert!(out.report.ratio >= 10.0);
        assert_eq!(
            out.state.equilibrium(),
            Some(Equilibrium {
                alpha: grid().at(1),
                m: Eigenvalue::Plus
            })
        );
    }

    #[test]
    fn short_step_is_improper() {
        let s = init_eigenstate(100, grid(), grid().at(0), Eigenvalue::Plus, 1).unwrap();
        let out = unitary_step(&s, 6, 1, EvolutionMode::Adiabatic, &seeds(), &RelaxationParams::default(), 10.0)
            .unwrap();
        assert!(!out.report.pure_state_valid);
        assert!(out.report.tau_relax > 10);
        assert!(out.report.ratio < 10.0);
        assert_eq!(out.state.equilibrium(), None);
        assert!(detect_improper(&out.state, 1e-3));
    }

    #[test]
    fn detect_improper_examples() {
        let s = init_eigenstate(100, grid(), grid().at(3), Eigenvalue::Minus, 2).unwrap();
        assert!(!detect_improper(&s, 1e-3));
    }

    #[test]
    fn evolve_reaches_the_end_eigenstate() {
        let g = grid();
        let s = init_eigenstate(64, g, g.at(0), Eigenvalue::Plus, 3).unwrap();
        let plan = EvolutionPlan::new(g, g.at(0), g.at(4), 4, 1000, EvolutionMode::Adiabatic).unwrap();
        let r = evolve(&s, &plan, 5, &RelaxationParams::default(), 10.0).unwrap();
        assert_eq!(r.total_flips, 0);
        assert!(!r.aborted);
        assert_eq!(r.log.len(), 4);
        assert_eq!(
            r.state.equilibrium(),
            Some(Equilibrium {
                alpha: g.at(4),
                m: Eigenvalue::Plus
            })
        );
    }

    #[test]
    fn evolve_aborts_at_regime_violation() {
        let g = grid();
        let s = init_eigenstate(64, g, g.at(0), Eigenvalue::Plus, 3).unwrap();
        let plan = EvolutionPlan::new(g, g.at(0), g.at(8), 2, 1, EvolutionMode::Adiabatic).unwrap();
        let r = evolve(&s, &plan, 5, &RelaxationParams::default(), 10.0).unwrap();
        assert!(r.aborted);
        assert_eq!(r.log.len(), 1);
        assert!(!r.report.pure_state_valid);
    }

    #[test]
    fn chain_summary_matches_full_chain() {
        let g = grid();
        let params = RelaxationParams::default();
        let plan = EvolutionPlan::new(g, g.at(2), g.at(10), 4, 1000, EvolutionMode::Stochastic).unwrap();
        assert!(chain_always_settles(&plan, &params, 10.0));
        for chain in 0..30u64 {
            for m0 in [Eigenvalue::Plus, Eigenvalue::Minus] {
                let fast = chain_summary(48, g, &plan, m0, 100 + chain, chain, &params, 10.0).unwrap();
                let s = init_eigenstate(48, g, g.at(2), m0, 100 + chain).unwrap();
                let full = evolve(&s, &plan, chain, &params, 10.0).unwrap();
                assert_eq!(fast.total_flips, full.total_flips);
                assert_eq!(Some(fast.final_state), full.state.equilibrium());
            }
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("stochastic".parse::<EvolutionMode>().unwrap(), EvolutionMode::Stochastic);
        assert!("quantum".parse::<EvolutionMode>().is_err());
        assert_eq!(EvolutionMode::Adiabatic.to_string(), "adiabatic");
    }
}
