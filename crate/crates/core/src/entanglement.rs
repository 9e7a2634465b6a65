//! Singlet pairs of SQE ensembles, remote collapse carried by zero-delay
//! space events, and the correlation, CHSH and marginal experiments.

use std::collections::VecDeque;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{coupling_for_eigenstate, CouplingField};
use crate::ensemble::{draw_microstates, EnsembleState, SqeMicrostate};
use crate::error::{invalid, Result, SqeError};
use crate::grid::{AlphaGrid, Eigenvalue, GridAngle};
use crate::measurement::{
    collapse, draw_outcome, eigenstate_count_positive, outcome_from_count, HiddenSeeds,
    MeasurementRecord,
};
use crate::relaxation::RelaxationParams;
use crate::rng::SeedPath;
use crate::stats::binomial_sigma;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Side {
    One,
    Two,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::One => Side::Two,
            Side::Two => Side::One,
        }
    }

    fn slot(self) -> usize {
        match self {
            Side::One => 0,
            Side::Two => 1,
        }
    }
}

impl From<Side> for u8 {
    fn from(s: Side) -> u8 {
        s.slot() as u8 + 1
    }
}

impl TryFrom<u8> for Side {
    type Error = SqeError;

    fn try_from(v: u8) -> Result<Side> {
        match v {
            1 => Ok(Side::One),
            2 => Ok(Side::Two),
            _ => Err(invalid("side", format!("must be 1 or 2, got {v}"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// State change of space triggered by a measurement on one half.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceEvent {
    pub source_side: Side,
    pub setting: GridAngle,
    pub outcome: Eigenvalue,
    pub sequence: u64,
}

/// Value pattern of couple `j` in half 1: the local-equilibrium targets of an
/// eigenstate at grid index `theta` for hidden phase `v`.
#[derive(Clone, Copy, Debug)]
struct CouplePattern {
    theta: u32,
    v: f64,
}

impl CouplePattern {
    fn value(&self, base: &CouplingField, column: u32) -> f64 {
        let m = base.grid().size();
        let offset = (column + m - self.theta) % m;
        base.target_rule(offset).target(self.v)
    }
}

fn couple_patterns(n_pairs: usize, grid: AlphaGrid, seed: u64) -> Vec<CouplePattern> {
    let stream = SeedPath::root(seed).child("pattern").stream();
    (0..n_pairs.div_ceil(2) as u64)
        .map(|j| {
            let block = stream.block(j);
            CouplePattern {
                theta: (block[0] % grid.size() as u64) as u32,
                v: crate::rng::unit_f64(block[1]),
            }
        })
        .collect()
}

fn half_microstates(n_pairs: usize, seed: u64, side: Side) -> Vec<SqeMicrostate> {
    let label = match side {
        Side::One => "half-1",
        Side::Two => "half-2",
    };
    draw_microstates(n_pairs, SeedPath::root(seed).child(label).seed())
}

/// Two halves whose SQE `i` in one half is paired with SQE `i` in the other.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedEnsemble {
    halves: [EnsembleState; 2],
    pair_sum: f64,
    measured: [bool; 2],
    entangled: bool,
    pending: VecDeque<SpaceEvent>,
    delivered: Vec<SpaceEvent>,
    next_sequence: u64,
}

/// Singlet of `n_pairs` SQE pairs with pair sum 0 for every observable.
///
/// Half 1 is built from couples of entities `(2j, 2j+1)` holding opposite
/// copies of the local-equilibrium pattern of a random eigenstate, so each
/// half is an even mixture with no observable in equilibrium. Half 2 holds
/// the negated values. Microstates of the two halves are drawn independently.
pub fn prepare_singlet(n_pairs: usize, grid: AlphaGrid, seed: u64) -> Result<PairedEnsemble> {
    if n_pairs < 2 {
        return Err(invalid("n_pairs", format!("need at least 2 pairs, got {n_pairs}")));
    }
    let base = coupling_for_eigenstate(grid, grid.at(0))?;
    let patterns = couple_patterns(n_pairs, grid, seed);
    let mut values_1 = Vec::with_capacity(n_pairs * grid.size() as usize);
    for col in 0..grid.size() {
        values_1.extend((0..n_pairs).map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * patterns[i / 2].value(&base, col)
        }));
    }
    let values_2 = values_1.iter().map(|a| -a).collect();
    let half_1 = EnsembleState::from_parts(grid, values_1, half_microstates(n_pairs, seed, Side::One), None)?;
    let half_2 = EnsembleState::from_parts(grid, values_2, half_microstates(n_pairs, seed, Side::Two), None)?;
    Ok(PairedEnsemble {
        halves: [half_1, half_2],
        pair_sum: 0.0,
        measured: [false; 2],
        entangled: true,
        pending: VecDeque::new(),
        delivered: Vec::new(),
        next_sequence: 0,
    })
}

impl PairedEnsemble {
    pub fn half(&self, side: Side) -> &EnsembleState {
        &self.halves[side.slot()]
    }

    pub fn n_pairs(&self) -> usize {
        self.halves[0].n_sqe()
    }

    pub fn pair_sum(&self) -> f64 {
        self.pair_sum
    }

    /// Partner of SQE `i` in the other half.
    pub fn partner(&self, i: usize) -> usize {
        i
    }

    /// Column-major table of `a_i(alpha) + a_i'(alpha)`.
    pub fn pair_sum_table(&self) -> Vec<f64> {
        self.halves[0]
            .values()
            .iter()
            .zip(self.halves[1].values())
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn is_entangled(&self) -> bool {
        self.entangled
    }

    pub fn is_measured(&self, side: Side) -> bool {
        self.measured[side.slot()]
    }

    /// Space events delivered so far, in sequence order.
    pub fn events(&self) -> &[SpaceEvent] {
        &self.delivered
    }

    /// Measures one half. While the pair is entangled the measurement emits a
    /// space event that immediately prepares the other half in the opposite
    /// eigenstate of the same observable.
    pub fn measure(
        &mut self,
        side: Side,
        alpha: GridAngle,
        seeds: &HiddenSeeds,
        params: &RelaxationParams,
    ) -> Result<MeasurementRecord> {
        if self.measured[side.slot()] {
            return Err(SqeError::SideAlreadyMeasured(side.into()));
        }
        let half = &self.halves[side.slot()];
        half.grid().check(alpha)?;
        let pre_equilibrium = half.equilibrium();
        let outcome = draw_outcome(half, alpha, seeds);
        let relaxed = collapse(half.clone(), alpha, outcome, params)?;
        self.halves[side.slot()] = relaxed.state;
        self.measured[side.slot()] = true;
        if self.entangled {
            self.entangled = false;
            self.pending.push_back(SpaceEvent {
                source_side: side,
                setting: alpha,
                outcome,
                sequence: self.next_sequence,
            });
            self.next_sequence += 1;
            self.deliver(params)?;
        }
        Ok(MeasurementRecord {
            setting: alpha,
            outcome,
            seeds: *seeds,
            pre_equilibrium,
            sweeps_used: relaxed.sweeps_used,
            converged: relaxed.converged,
        })
    }

    fn deliver(&mut self, params: &RelaxationParams) -> Result<()> {
        while let Some(event) = self.pending.pop_front() {
            let remote = event.source_side.other().slot();
            let state = self.halves[remote].clone();
            self.halves[remote] = collapse(state, event.setting, event.outcome.flipped(), params)?.state;
            self.delivered.push(event);
        }
        Ok(())
    }
}

/// Functional form of [`PairedEnsemble::measure`].
pub fn measure_side(
    pair: &PairedEnsemble,
    side: Side,
    alpha: GridAngle,
    seeds: &HiddenSeeds,
    params: &RelaxationParams,
) -> Result<(MeasurementRecord, PairedEnsemble)> {
    let mut next = pair.clone();
    let record = next.measure(side, alpha, seeds, params)?;
    Ok((record, next))
}

/// Seeds of one singlet trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingletTrialSeeds {
    pub system: u64,
    pub apparatus: [HiddenSeeds; 2],
}

impl SingletTrialSeeds {
    pub fn for_side(&self, side: Side) -> &HiddenSeeds {
        &self.apparatus[side.slot()]
    }
}

/// Seed source for a run of independent singlet trials.
#[derive(Clone, Debug)]
pub struct SingletRun {
    system: SeedPath,
    lambda_m: [u64; 2],
    lambda_sp: u64,
}

impl SingletRun {
    pub fn new(run_seed: u64) -> Self {
        let root = SeedPath::root(run_seed);
        SingletRun {
            system: root.child("system"),
            lambda_m: [root.child("apparatus-1").seed(), root.child("apparatus-2").seed()],
            lambda_sp: root.child("space").seed(),
        }
    }

    pub fn trial(&self, t: u64) -> SingletTrialSeeds {
        let hidden = |lambda_m| HiddenSeeds {
            lambda_m,
            lambda_sp: self.lambda_sp,
            trial_index: t,
        };
        SingletTrialSeeds {
            system: self.system.child(t).seed(),
            apparatus: [hidden(self.lambda_m[0]), hidden(self.lambda_m[1])],
        }
    }
}

/// Measurement settings of one trial: `first` is measured before `second`,
/// on opposite sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialOrder {
    pub first: (Side, GridAngle),
    pub second: GridAngle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub first: Eigenvalue,
    pub second: Eigenvalue,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingletSetup {
    pub n_pairs: usize,
    pub grid: AlphaGrid,
    pub params: RelaxationParams,
}

impl SingletSetup {
    pub fn new(n_pairs: usize, grid: AlphaGrid, params: RelaxationParams) -> Result<Self> {
        if n_pairs < 2 {
            return Err(invalid("n_pairs", format!("need at least 2 pairs, got {n_pairs}")));
        }
        params.validate()?;
        Ok(SingletSetup { n_pairs, grid, params })
    }

    fn collapse_always_converges(&self) -> bool {
        self.params.worst_case_sweeps(1.0) <= self.params.max_sweeps
    }

    /// One trial through the full pipeline: preparation, both measurements
    /// and the space event in between.
    pub fn trial_full(&self, order: TrialOrder, seeds: &SingletTrialSeeds) -> Result<TrialOutcome> {
        let (side, alpha) = order.first;
        let mut pair = prepare_singlet(self.n_pairs, self.grid, seeds.system)?;
        let first = pair.measure(side, alpha, seeds.for_side(side), &self.params)?;
        let other = side.other();
        let second = pair.measure(other, order.second, seeds.for_side(other), &self.params)?;
        Ok(TrialOutcome {
            first: first.outcome,
            second: second.outcome,
        })
    }

    /// Same outcomes as [`Self::trial_full`], reading only the columns that
    /// decide them. Falls back to the full pipeline when collapse is not
    /// guaranteed to converge.
    pub fn trial(&self, order: TrialOrder, seeds: &SingletTrialSeeds) -> Result<TrialOutcome> {
        if !self.collapse_always_converges() {
            return self.trial_full(order, seeds);
        }
        let (side, alpha) = order.first;
        self.grid.check(alpha)?;
        let n = self.n_pairs;
        // Couples hold opposite values, so only an unpaired last entity can
        // move a half away from an even split.
        let mut positive_1 = n / 2;
        if n % 2 == 1 {
            let base = coupling_for_eigenstate(self.grid, self.grid.at(0))?;
            let last = couple_patterns(n, self.grid, seeds.system)[n / 2];
            positive_1 += (last.value(&base, alpha.index()) > 0.0) as usize;
        }
        let positive = match side {
            Side::One => positive_1,
            Side::Two => n - positive_1,
        };
        let first = outcome_from_count(positive, n, seeds.for_side(side));
        let other = side.other();
        let micro = half_microstates(n, seeds.system, other);
        let positive = eigenstate_count_positive(
            self.grid,
            alpha,
            first.flipped(),
            order.second,
            micro.iter().map(|s| s.u()),
        )?;
        let second = outcome_from_count(positive, n, seeds.for_side(other));
        Ok(TrialOutcome { first, second })
    }

    /// Joint outcome counts over `trials` trials, indexed
    /// `[first is +1][second is +1]`.
    pub fn joint_counts(&self, order: TrialOrder, trials: u64, run_seed: u64) -> Result<[[u64; 2]; 2]> {
        if trials == 0 {
            return Err(invalid("trials", "must be positive"));
        }
        let run = SingletRun::new(run_seed);
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let o = self.trial(order, &run.trial(t))?;
                let mut c = [[0u64; 2]; 2];
                c[(o.first == Eigenvalue::Plus) as usize][(o.second == Eigenvalue::Plus) as usize] = 1;
                Ok(c)
            })
            .try_reduce(|| [[0; 2]; 2], |a, b| Ok(add_counts(a, b)))
    }

    /// `E(alpha, beta)` with side 1 measured first at `alpha`.
    pub fn correlation(&self, alpha: GridAngle, beta: GridAngle, trials: u64, run_seed: u64) -> Result<Correlation> {
        self.correlation_ordered(Side::One, alpha, beta, trials, run_seed)
    }

    /// `E(alpha, beta)` for side-1 setting `alpha` and side-2 setting `beta`,
    /// measuring `first` before the other side.
    pub fn correlation_ordered(
        &self,
        first: Side,
        alpha: GridAngle,
        beta: GridAngle,
        trials: u64,
        run_seed: u64,
    ) -> Result<Correlation> {
        let order = match first {
            Side::One => TrialOrder {
                first: (Side::One, alpha),
                second: beta,
            },
            Side::Two => TrialOrder {
                first: (Side::Two, beta),
                second: alpha,
            },
        };
        let counts = self.joint_counts(order, trials, run_seed)?;
        Ok(Correlation::from_counts(alpha, beta, counts))
    }

    /// CHSH combination `|E(a,b) - E(a,b') + E(a',b) + E(a',b')|`, each term
    /// an independent run.
    pub fn chsh(&self, angles: ChshAngles, trials: u64, run_seed: u64) -> Result<Chsh> {
        let root = SeedPath::root(run_seed);
        let pairs = [
            (angles.a, angles.b),
            (angles.a, angles.b_prime),
            (angles.a_prime, angles.b),
            (angles.a_prime, angles.b_prime),
        ];
        let mut terms = Vec::with_capacity(4);
        for (k, (x, y)) in pairs.into_iter().enumerate() {
            terms.push(self.correlation(x, y, trials, root.child("term").child(k).seed())?);
        }
        let terms: [Correlation; 4] = terms.try_into().expect("four terms");
        let s = (terms[0].e - terms[1].e + terms[2].e + terms[3].e).abs();
        let sigma = terms.iter().map(|t| t.stderr * t.stderr).sum::<f64>().sqrt();
        Ok(Chsh { terms, s, sigma })
    }

    /// Marginal of `own` side at `own_alpha` when the other side is measured
    /// first at `remote_beta`.
    pub fn marginal(
        &self,
        own: Side,
        own_alpha: GridAngle,
        remote_beta: GridAngle,
        trials: u64,
        run_seed: u64,
    ) -> Result<Marginal> {
        let order = TrialOrder {
            first: (own.other(), remote_beta),
            second: own_alpha,
        };
        let counts = self.joint_counts(order, trials, run_seed)?;
        let plus = counts[0][1] + counts[1][1];
        let p_plus = plus as f64 / trials as f64;
        let sigma = binomial_sigma(0.5, trials);
        let conditional = |remote: usize| {
            let n = counts[remote][0] + counts[remote][1];
            (n > 0).then(|| counts[remote][1] as f64 / n as f64)
        };
        Ok(Marginal {
            side: own,
            own_alpha,
            remote_beta,
            trials,
            p_plus,
            sigma,
            z: (p_plus - 0.5) / sigma,
            p_plus_given_remote_plus: conditional(1),
            p_plus_given_remote_minus: conditional(0),
        })
    }
}

fn add_counts(a: [[u64; 2]; 2], b: [[u64; 2]; 2]) -> [[u64; 2]; 2] {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub alpha: GridAngle,
    pub beta: GridAngle,
    pub trials: u64,
    /// Counts indexed `[first is +1][second is +1]`.
    pub counts: [[u64; 2]; 2],
    pub e: f64,
    pub stderr: f64,
}

impl Correlation {
    fn from_counts(alpha: GridAngle, beta: GridAngle, counts: [[u64; 2]; 2]) -> Self {
        let trials: u64 = counts.iter().flatten().sum();
        let same = counts[0][0] + counts[1][1];
        let e = (2.0 * same as f64 - trials as f64) / trials as f64;
        Correlation {
            alpha,
            beta,
            trials,
            counts,
            e,
            stderr: ((1.0 - e * e).max(0.0) / trials as f64).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChshAngles {
    pub a: GridAngle,
    pub a_prime: GridAngle,
    pub b: GridAngle,
    pub b_prime: GridAngle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chsh {
    pub terms: [Correlation; 4],
    pub s: f64,
    pub sigma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub side: Side,
    pub own_alpha: GridAngle,
    pub remote_beta: GridAngle,
    pub trials: u64,
    pub p_plus: f64,
    /// Binomial standard deviation at `p = 0.5`.
    pub sigma: f64,
    pub z: f64,
    pub p_plus_given_remote_plus: Option<f64>,
    pub p_plus_given_remote_minus: Option<f64>,
}
