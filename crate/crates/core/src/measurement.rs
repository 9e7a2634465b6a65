//! Ideal measurement: a deterministic map of apparatus, system and space
//! hidden states that swaps the coupling field and relaxes the system into
//! an eigenstate of the measured observable.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coupling::coupling_for_eigenstate;
use crate::ensemble::{
    column_eigenvalue, count_positive, draw_microstates, ensemble_average, EnsembleState,
    Equilibrium,
};
use crate::error::{Result, SqeError};
use crate::grid::{canonicalize, AlphaGrid, Eigenvalue, GridAngle};
use crate::relaxation::{relax_step, relax_to_equilibrium, RelaxationOutcome, RelaxationParams};
use crate::rng::{philox4x64_10, unit_f64};

/// Hidden complete states of the apparatus and of space for one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HiddenSeeds {
    pub lambda_m: u64,
    pub lambda_sp: u64,
    pub trial_index: u64,
}

/// Philox block at counter `[trial_index, lambda_sp, 0, 0]` under key
/// `[lambda_m, 0]`, first word mapped to `[0, 1)`.
pub fn hidden_uniform(seeds: &HiddenSeeds) -> f64 {
    let block = philox4x64_10([seeds.trial_index, seeds.lambda_sp, 0, 0], [seeds.lambda_m, 0]);
    unit_f64(block[0])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub setting: GridAngle,
    pub outcome: Eigenvalue,
    pub seeds: HiddenSeeds,
    pub pre_equilibrium: Option<Equilibrium>,
    pub sweeps_used: u64,
    pub converged: bool,
}

/// `+1` when the hidden variate falls inside the fractional volume of `+1`
/// values at `alpha`.
pub fn draw_outcome(state: &EnsembleState, alpha: GridAngle, seeds: &HiddenSeeds) -> Eigenvalue {
    outcome_from_count(count_positive(state, alpha), state.n_sqe(), seeds)
}

/// Outcome rule on a precomputed count of `+1` values.
#[inline]
pub fn outcome_from_count(positive: usize, n_sqe: usize, seeds: &HiddenSeeds) -> Eigenvalue {
    Eigenvalue::from_bool(hidden_uniform(seeds) < positive as f64 / n_sqe as f64)
}

/// Swaps in the coupling of the eigenstate `(alpha, outcome)` and relaxes.
/// A converged state is tagged `(alpha, outcome)`.
pub fn collapse(
    state: EnsembleState,
    alpha: GridAngle,
    outcome: Eigenvalue,
    params: &RelaxationParams,
) -> Result<RelaxationOutcome> {
    let (peak, _) = canonicalize(alpha, outcome);
    let g = coupling_for_eigenstate(state.grid(), peak)?;
    let mut out = relax_to_equilibrium(state, &g, params)?;
    if out.converged {
        out.state.set_equilibrium(Some(Equilibrium { alpha, m: outcome }));
    }
    Ok(out)
}

pub fn ideal_measure(
    state: &EnsembleState,
    alpha_meas: GridAngle,
    seeds: &HiddenSeeds,
    params: &RelaxationParams,
) -> Result<(MeasurementRecord, EnsembleState)> {
    state.grid().check(alpha_meas)?;
    let pre = state.equilibrium().ok_or(SqeError::NotPure)?;
    let outcome = draw_outcome(state, alpha_meas, seeds);
    let relaxed = collapse(state.clone(), alpha_meas, outcome, params)?;
    let record = MeasurementRecord {
        setting: alpha_meas,
        outcome,
        seeds: *seeds,
        pre_equilibrium: Some(pre),
        sweeps_used: relaxed.sweeps_used,
        converged: relaxed.converged,
    };
    Ok((record, relaxed.state))
}

/// Time average of the ensemble average at `alpha` over `window` further
/// sweeps under the state's own equilibrium coupling.
pub fn pointer_reading(
    state: &EnsembleState,
    alpha: GridAngle,
    window: u64,
    params: &RelaxationParams,
) -> Result<f64> {
    state.grid().check(alpha)?;
    let m = column_eigenvalue(state.column(alpha), params.eps_eq).ok_or(SqeError::NotInEquilibrium {
        alpha_index: alpha.index(),
    })?;
    if window == 0 {
        return Err(crate::error::invalid("window", "must be positive"));
    }
    let (peak, _) = canonicalize(alpha, m);
    let g = coupling_for_eigenstate(state.grid(), peak)?;
    let mut s = state.clone();
    let mut total = 0.0;
    for _ in 0..window {
        relax_step(&mut s, &g, params)?;
        total += ensemble_average(&s, alpha);
    }
    Ok(total / window as f64)
}

/// Post-measurement states of one base state, keyed by setting and outcome.
///
/// Collapse is a deterministic function of `(state, alpha, outcome)`, so many
/// trials on one prepared state share at most `2 M` distinct results.
pub struct CollapseCache<'a> {
    base: &'a EnsembleState,
    params: RelaxationParams,
    entries: HashMap<(u32, Eigenvalue), RelaxationOutcome>,
}

impl<'a> CollapseCache<'a> {
    pub fn new(base: &'a EnsembleState, params: RelaxationParams) -> Self {
        CollapseCache {
            base,
            params,
            entries: HashMap::new(),
        }
    }

    pub fn collapsed(&mut self, alpha: GridAngle, outcome: Eigenvalue) -> Result<&RelaxationOutcome> {
        self.base.grid().check(alpha)?;
        let key = (alpha.index(), outcome);
        if !self.entries.contains_key(&key) {
            let out = collapse(self.base.clone(), alpha, outcome, &self.params)?;
            self.entries.insert(key, out);
        }
        Ok(&self.entries[&key])
    }

    /// Full measurement of the base state through the cache.
    pub fn measure(&mut self, alpha: GridAngle, seeds: &HiddenSeeds) -> Result<(MeasurementRecord, &EnsembleState)> {
        let pre = self.base.equilibrium().ok_or(SqeError::NotPure)?;
        let outcome = draw_outcome(self.base, alpha, seeds);
        let out = self.collapsed(alpha, outcome)?;
        let record = MeasurementRecord {
            setting: alpha,
            outcome,
            seeds: *seeds,
            pre_equilibrium: Some(pre),
            sweeps_used: out.sweeps_used,
            converged: out.converged,
        };
        Ok((record, &out.state))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Number of `+1` values at `alpha` in the local-equilibrium table of the
/// eigenstate `(alpha0, m)` built on `microstates`, without building it.
pub fn eigenstate_count_positive(
    grid: AlphaGrid,
    alpha0: GridAngle,
    m: Eigenvalue,
    alpha: GridAngle,
    microstates: impl IntoIterator<Item = f64>,
) -> Result<usize> {
    grid.check(alpha)?;
    let (peak, _) = canonicalize(alpha0, m);
    let rule = coupling_for_eigenstate(grid, peak)?.target_rule(alpha.index());
    Ok(microstates.into_iter().filter(|&u| rule.target(u) > 0.0).count())
}

/// Outcome of measuring at `alpha` a freshly prepared eigenstate `(alpha0, +1)`
/// of `n_sqe` entities whose microstates come from `system_seed`.
///
/// Agrees exactly with [`ideal_measure`] applied to
/// `init_eigenstate(n_sqe, grid, alpha0, +1, system_seed)` while touching
/// only the one column that decides the outcome.
pub fn born_trial(
    n_sqe: usize,
    grid: AlphaGrid,
    alpha0: GridAngle,
    alpha: GridAngle,
    system_seed: u64,
    seeds: &HiddenSeeds,
) -> Result<Eigenvalue> {
    let micro = draw_microstates(n_sqe, system_seed);
    let positive = eigenstate_count_positive(grid, alpha0, Eigenvalue::Plus, alpha, micro.iter().map(|s| s.u()))?;
    Ok(outcome_from_count(positive, n_sqe, seeds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{fractional_volume, init_eigenstate, is_equilibrium};
    use crate::stats::chi_square_uniform;

    fn grid() -> AlphaGrid {
        AlphaGrid::new(36).unwrap()
    }

    fn seeds(t: u64) -> HiddenSeeds {
        HiddenSeeds {
            lambda_m: 11,
            lambda_sp: 22,
            trial_index: t,
        }
    }

    #[test]
    fn hidden_uniform_is_deterministic_and_in_range() {
        assert_eq!(hidden_uniform(&seeds(5)), hidden_uniform(&seeds(5)));
        for t in 0..1000 {
            let h = hidden_uniform(&seeds(t));
            assert!((0.0..1.0).contains(&h));
        }
    }

    #[test]
    fn hidden_uniform_passes_chi_square() {
        let mut counts = [0u64; 10];
        for t in 0..100_000 {
            counts[(hidden_uniform(&seeds(t)) * 10.0) as usize] += 1;
        }
        // Upper 0.001 quantile of chi-square with 9 degrees of freedom.
        assert!(chi_square_uniform(&counts) < 27.877164871256568);
    }

    #[test]
    fn measuring_the_eigen_observable_is_certain() {
        let s = init_eigenstate(200, grid(), grid().at(0), Eigenvalue::Plus, 1).unwrap();
        let params = RelaxationParams::default();
        for t in 0..20 {
            let (rec, post) = ideal_measure(&s, grid().at(0), &seeds(t), &params).unwrap();
            assert_eq!(rec.outcome, Eigenvalue::Plus);
            assert_eq!(rec.sweeps_used, 0);
            assert_eq!(post.values(), s.values());
            let (rec, _) = ideal_measure(&s, grid().at(18), &seeds(t), &params).unwrap();
            assert_eq!(rec.outcome, Eigenvalue::Minus);
        }
    }

    #[test]
    fn post_measurement_state_is_an_eigenstate() {
        let s = init_eigenstate(200, grid(), grid().at(0), Eigenvalue::Plus, 2).unwrap();
        let params = RelaxationParams::default();
        let (rec, post) = ideal_measure(&s, grid().at(9), &seeds(3), &params).unwrap();
        assert!(rec.converged);
        assert!(is_equilibrium(&post, grid().at(9), params.eps_eq));
        assert_eq!(
            post.equilibrium(),
            Some(Equilibrium {
                alpha: grid().at(9),
                m: rec.outcome
            })
        );
        let fv = fractional_volume(&post, grid().at(9));
        assert_eq!(fv, if rec.outcome == Eigenvalue::Plus { 1.0 } else { 0.0 });
    }

    #[test]
    fn untagged_state_is_rejected() {
        let mut s = init_eigenstate(20, grid(), grid().at(0), Eigenvalue::Plus, 2).unwrap();
        s.set_equilibrium(None);
        let err = ideal_measure(&s, grid().at(3), &seeds(0), &RelaxationParams::default());
        assert!(matches!(err, Err(SqeError::NotPure)));
    }

    #[test]
    fn pointer_reading_examples() {
        let params = RelaxationParams::default();
        let plus = init_eigenstate(100, grid(), grid().at(0), Eigenvalue::Plus, 3).unwrap();
        assert!((pointer_reading(&plus, grid().at(0), 1, &params).unwrap() - 1.0).abs() <= 1e-3);
        let w1 = pointer_reading(&plus, grid().at(0), 1, &params).unwrap();
        let w100 = pointer_reading(&plus, grid().at(0), 100, &params).unwrap();
        assert!((w1 - w100).abs() <= 1e-3);
        let minus = init_eigenstate(100, grid(), grid().at(0), Eigenvalue::Minus, 3).unwrap();
        assert!((pointer_reading(&minus, grid().at(0), 5, &params).unwrap() + 1.0).abs() <= 1e-3);
        assert!(pointer_reading(&plus, grid().at(9), 5, &params).is_err());
    }

    #[test]
    fn cache_reuses_collapses() {
        let s = init_eigenstate(100, grid(), grid().at(0), Eigenvalue::Plus, 4).unwrap();
        let params = RelaxationParams::default();
        let mut cache = CollapseCache::new(&s, params);
        for t in 0..200 {
            let (rec, post) = cache.measure(grid().at(12), &seeds(t)).unwrap();
            let direct = ideal_measure(&s, grid().at(12), &seeds(t), &params).unwrap();
            assert_eq!(rec, direct.0);
            assert_eq!(post, &direct.1);
        }
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn born_trial_matches_full_measurement() {
        let params = RelaxationParams::default();
        for t in 0..40 {
            let alpha = grid().at((t * 7 % 36) as u32);
            let sys = 1000 + t;
            let fast = born_trial(64, grid(), grid().at(4), alpha, sys, &seeds(t)).unwrap();
            let s = init_eigenstate(64, grid(), grid().at(4), Eigenvalue::Plus, sys).unwrap();
            let (rec, _) = ideal_measure(&s, alpha, &seeds(t), &params).unwrap();
            assert_eq!(fast, rec.outcome);
        }
    }
}
