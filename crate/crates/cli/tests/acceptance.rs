//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;
use sqe_core::evolution::{chain_summary, evolve, unitary_step};
use sqe_core::measurement::{draw_outcome, CollapseCache};
use sqe_core::model_a::{
    effective_hbar, effective_hbar_at, estimate_n, simulate_species_spread, uncertainty_product,
};
use sqe_core::relaxation::sweeps_to_reach;
use sqe_core::{
    coupling_for_eigenstate, detect_improper, init_eigenstate, is_equilibrium, relax_to_equilibrium,
    AlphaGrid, Eigenvalue, EvolutionMode, EvolutionPlan, HiddenSeeds, ModelAConfig, RelaxationParams,
    SeedPath, Side, SingletRun, SingletSetup, SpeciesShape, TrialOrder,
};
use sqe_lab::{run, Experiment, ExperimentConfig, Overrides, RunOutput};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn verdict(pass: bool, detail: String) -> Verdict {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_experiment(experiment: Experiment, o: Overrides) -> Result<(RunOutput, f64), String> {
    let config = ExperimentConfig::resolve(experiment, o).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = run(&config).map_err(|e| e.to_string())?;
    Ok((out, start.elapsed().as_secs_f64()))
}

/// Runs an experiment and requires every one of its checks to pass.
fn experiment_checks(experiment: Experiment, o: Overrides) -> Result<(String, f64), String> {
    let (out, secs) = run_experiment(experiment, o)?;
    let failed: Vec<String> = out
        .summary
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} ({})", c.name, c.detail))
        .collect();
    if failed.is_empty() {
        Ok((format!("{} checks pass", out.summary.checks.len()), secs))
    } else {
        Err(format!("failed: {}", failed.join("; ")))
    }
}

fn model_a_inequality() -> Verdict {
    let n = 10_000u64;
    let unit = SpeciesShape::unit();
    let start = Instant::now();
    let mut all_hold = true;
    let mut equality = Vec::new();
    for n_a in 1..n {
        let c = uncertainty_product(&ModelAConfig::split(n, n_a, unit, unit, 1.0).map_err(|e| e.to_string())?);
        all_hold &= c.holds;
        if c.lhs == c.bound {
            equality.push(n_a);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        all_hold && equality == [n / 2] && secs < 1.0,
        format!("N = {n}: holds everywhere = {all_hold}, equality at {equality:?}, {secs:.3} s"),
    )
}

fn hbar_emergence() -> Verdict {
    let start = Instant::now();
    let unit = SpeciesShape::unit();
    let mut worst = 0.0f64;
    let mut n_ok = true;
    for k in [1u64, 2, 4, 8, 16, 32] {
        let shape_a = SpeciesShape::new(k as f64, 1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
        let n = estimate_n(1.0, &shape_a, &unit).map_err(|e| e.to_string())?;
        n_ok &= n == 4.0 * k as f64;
        worst = worst.max((effective_hbar_at(n, &shape_a, &unit) - 1.0).abs());
        let config = ModelAConfig::split(4 * k, 2 * k, shape_a, unit, 1.0).map_err(|e| e.to_string())?;
        worst = worst.max((effective_hbar(&config) - 1.0).abs());
    }
    let mut worst_spread = 0.0f64;
    for (j, count) in [10_000u64, 40_000].into_iter().enumerate() {
        let s = simulate_species_spread(count, 1.0, 1.0, 2000, SeedPath::root(5).child(j).seed())
            .map_err(|e| e.to_string())?;
        worst_spread = worst_spread.max((s * (count as f64).sqrt() - 1.0).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        n_ok && worst <= 1e-12 && worst_spread <= 0.10 && secs < 10.0,
        format!(
            "N = 4k: {n_ok}, worst hbar error {worst:e}, worst spread error {:.2}%, {secs:.2} s",
            worst_spread * 100.0
        ),
    )
}

fn born_rule() -> Verdict {
    let (detail, secs) = experiment_checks(Experiment::Born, Overrides::default())?;
    verdict(secs < 60.0, format!("7 angles x 1e5 trials, N = 1000: {detail}, {secs:.1} s"))
}

fn idempotence() -> Verdict {
    let grid = AlphaGrid::new(360).map_err(|e| e.to_string())?;
    let params = RelaxationParams::default();
    let base = init_eigenstate(1000, grid, grid.at(0), Eigenvalue::Plus, 77).map_err(|e| e.to_string())?;
    let mut cache = CollapseCache::new(&base, params);
    let trials = 10_000u64;
    let mut repeats = 0u64;
    for t in 0..trials {
        let alpha = grid.at((t % 36 * 10) as u32);
        let first = HiddenSeeds { lambda_m: 1, lambda_sp: 2, trial_index: t };
        let second = HiddenSeeds { lambda_m: 3, lambda_sp: 4, trial_index: t };
        let (record, after) = cache.measure(alpha, &first).map_err(|e| e.to_string())?;
        let outcome = record.outcome;
        if draw_outcome(after, alpha, &second) == outcome {
            repeats += 1;
        }
    }
    verdict(repeats == trials, format!("{repeats}/{trials} repeated outcomes"))
}

fn relaxation_law() -> Verdict {
    let grid = AlphaGrid::new(16).map_err(|e| e.to_string())?;
    let mut worst = 0u64;
    let mut fixtures = 0;
    for eta in [0.05, 0.1, 0.2] {
        let params = RelaxationParams::new(eta, 1e-3, 10_000).map_err(|e| e.to_string())?;
        for g in [1.0, 0.5, 0.25] {
            let start = init_eigenstate(256, grid, grid.at(0), Eigenvalue::Minus, 3).map_err(|e| e.to_string())?;
            let field = coupling_for_eigenstate(grid, grid.at(0))
                .and_then(|f| f.with_strength(g))
                .map_err(|e| e.to_string())?;
            let out = relax_to_equilibrium(start, &field, &params).map_err(|e| e.to_string())?;
            if !out.converged {
                return Err(format!("fixture eta = {eta}, g = {g} did not converge"));
            }
            worst = worst.max(out.sweeps_used.abs_diff(sweeps_to_reach(2.0, 1e-3, eta * g)));
            fixtures += 1;
        }
    }
    let (detail, _) = experiment_checks(Experiment::RelaxTime, Overrides::default())?;
    verdict(
        worst <= 1,
        format!("{fixtures} fixtures within {worst} sweep of closed form; 100 runs per g: {detail}"),
    )
}

/// `k sin^2(pi / (4k))`: expected flips over a quarter turn in `k` steps.
const EXPECTED_FLIPS: [(u32, f64); 4] = [
    (4, 0.15224093497742647),
    (8, 0.07685887838707821),
    (16, 0.03852218662242491),
    (32, 0.019272700717241718),
];

fn unitary_continuity() -> Verdict {
    // A quarter turn splits into 32 whole steps only when 128 divides M.
    let fine = AlphaGrid::new(384).map_err(|e| e.to_string())?;
    let params = RelaxationParams::default();
    let chains = 10_000u64;
    let root = SeedPath::root(2024).child("flips");
    let mut means = Vec::new();
    for (k, expected) in EXPECTED_FLIPS {
        let plan = EvolutionPlan::new(fine, fine.at(0), fine.at(96), k, 1000, EvolutionMode::Stochastic)
            .map_err(|e| e.to_string())?;
        let total: u64 = (0..chains)
            .into_par_iter()
            .map(|c| {
                let path = root.child(k).child(c);
                chain_summary(
                    1000,
                    fine,
                    &plan,
                    Eigenvalue::Plus,
                    path.child("system").seed(),
                    path.child("chain").seed(),
                    &params,
                    10.0,
                )
                .map(|s| s.total_flips as u64)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))
            .map_err(|e| e.to_string())?;
        means.push((k, total as f64 / chains as f64, expected));
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for w in means.windows(2) {
        let ratio = w[0].1 / w[1].1;
        pass &= (2.0 / 1.5..=2.0 * 1.5).contains(&ratio);
        parts.push(format!("flips({})/flips({}) = {ratio:.3}", w[0].0, w[1].0));
    }
    for &(k, mean, expected) in &means {
        pass &= (mean / expected - 1.0).abs() <= 0.3;
        parts.push(format!("k = {k}: {mean:.4} vs {expected:.4}"));
    }

    // Adiabatic transport 0 -> 90 degrees directly and via 45 degrees.
    let grid = AlphaGrid::new(360).map_err(|e| e.to_string())?;
    let start = init_eigenstate(1000, grid, grid.at(0), Eigenvalue::Plus, 11).map_err(|e| e.to_string())?;
    let plan = |a: u32, b: u32, steps: u32| {
        EvolutionPlan::new(grid, grid.at(a), grid.at(b), steps, 1000, EvolutionMode::Adiabatic)
    };
    let direct = plan(0, 90, 10)
        .and_then(|p| evolve(&start, &p, 1, &params, 10.0))
        .map_err(|e| e.to_string())?;
    let half = plan(0, 45, 5)
        .and_then(|p| evolve(&start, &p, 2, &params, 10.0))
        .map_err(|e| e.to_string())?;
    let via = plan(45, 90, 9)
        .and_then(|p| evolve(&half.state, &p, 3, &params, 10.0))
        .map_err(|e| e.to_string())?;
    let tags_match = !direct.aborted
        && !via.aborted
        && direct.state.equilibrium().is_some()
        && direct.state.equilibrium() == via.state.equilibrium();
    pass &= tags_match;
    let trials = 10_000u64;
    let mut worst_z = 0.0f64;
    for deg in [30u32, 60, 120, 150] {
        let alpha = grid.at(90 + deg);
        let freq = |state, lambda_m| {
            (0..trials)
                .filter(|&t| {
                    let seeds = HiddenSeeds { lambda_m, lambda_sp: deg as u64, trial_index: t };
                    draw_outcome(state, alpha, &seeds) == Eigenvalue::Plus
                })
                .count() as f64
                / trials as f64
        };
        let (f1, f2) = (freq(&direct.state, 101), freq(&via.state, 202));
        let p = 0.5 * (f1 + f2);
        let sd = (2.0 * p * (1.0 - p) / trials as f64).sqrt();
        worst_z = worst_z.max((f1 - f2).abs() / sd);
    }
    pass &= worst_z <= 3.0;
    parts.push(format!("adiabatic tags match = {tags_match}, worst Born z = {worst_z:.2}"));
    verdict(pass, format!("{chains} chains: {}", parts.join(", ")))
}

fn regime_dichotomy() -> Verdict {
    let grid = AlphaGrid::new(360).map_err(|e| e.to_string())?;
    let params = RelaxationParams::default();
    let r_min = 10.0;
    let root = SeedPath::root(99).child("regime");
    let outcomes: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|s| {
            let path = root.child(s);
            let state = init_eigenstate(1000, grid, grid.at(0), Eigenvalue::Plus, path.child("system").seed())?;
            let seeds = HiddenSeeds {
                lambda_m: path.child("apparatus").seed(),
                lambda_sp: path.child("space").seed(),
                trial_index: 0,
            };
            let short = unitary_step(&state, 90, 1, EvolutionMode::Stochastic, &seeds, &params, r_min)?;
            let interrupted = !short.report.pure_state_valid
                && short.report.ratio < r_min
                && short.state.equilibrium().is_none()
                && detect_improper(&short.state, params.eps_eq);
            let long = unitary_step(&state, 90, 1000, EvolutionMode::Stochastic, &seeds, &params, r_min)?;
            let settled = long.report.pure_state_valid
                && long.report.ratio >= r_min
                && is_equilibrium(&long.state, long.target, params.eps_eq)
                && long.state.equilibrium().map(|e| (e.alpha, e.m)) == Some((long.target, long.outcome));
            Ok((interrupted, settled))
        })
        .collect::<sqe_core::Result<_>>()
        .map_err(|e| e.to_string())?;
    let below = outcomes.iter().filter(|o| o.0).count();
    let above = outcomes.iter().filter(|o| o.1).count();
    verdict(
        below == 100 && above == 100,
        format!("improper below r_min {below}/100, equilibrium above r_min {above}/100"),
    )
}

fn singlet() -> Verdict {
    let start = Instant::now();
    let grid = AlphaGrid::new(360).map_err(|e| e.to_string())?;
    let setup = SingletSetup::new(1000, grid, RelaxationParams::default()).map_err(|e| e.to_string())?;
    let mut same = 0u64;
    let mut total = 0u64;
    for a in grid.angles() {
        for side in [Side::One, Side::Two] {
            let order = TrialOrder { first: (side, a), second: a };
            let counts = setup
                .joint_counts(order, 200, SeedPath::root(8).child(a.index()).child(u8::from(side) as u32).seed())
                .map_err(|e| e.to_string())?;
            same += counts[0][0] + counts[1][1];
            total += counts.iter().flatten().sum::<u64>();
        }
    }
    let (corr, _) = experiment_checks(Experiment::Corr, Overrides::default())?;
    let (chsh, _) = experiment_checks(Experiment::Chsh, Overrides::default())?;
    let secs = start.elapsed().as_secs_f64();
    verdict(
        same == 0 && secs < 300.0,
        format!(
            "E(a, a) = -1 in {}/{total} trials over all 360 settings; corr: {corr}; chsh: {chsh}; {secs:.1} s",
            total - same
        ),
    )
}

fn parameter_independence() -> Verdict {
    let (detail, _) = experiment_checks(Experiment::Marginals, Overrides::default())?;
    // Outcome dependence also holds when the remote side measures first.
    let grid = AlphaGrid::new(360).map_err(|e| e.to_string())?;
    let setup = SingletSetup::new(1000, grid, RelaxationParams::default()).map_err(|e| e.to_string())?;
    let run = SingletRun::new(31);
    let mut agree = 0;
    for t in 0..1000u64 {
        let a = grid.at((t % 360) as u32);
        let out = setup
            .trial_full(TrialOrder { first: (Side::Two, a), second: a }, &run.trial(t))
            .map_err(|e| e.to_string())?;
        agree += (out.first == out.second) as u32;
    }
    verdict(agree == 0, format!("8 remote settings per side: {detail}; equal-setting agreements {agree}/1000"))
}

fn reproducibility() -> Verdict {
    let quick: [(Experiment, Overrides); 7] = [
        (Experiment::ModelA, Overrides { trials: Some(500), ..Default::default() }),
        (Experiment::Born, Overrides { trials: Some(5000), ..Default::default() }),
        (Experiment::RelaxTime, Overrides { trials: Some(20), ..Default::default() }),
        (Experiment::Evolve, Overrides { trials: Some(500), ..Default::default() }),
        (Experiment::Corr, Overrides { trials: Some(2000), ..Default::default() }),
        (Experiment::Chsh, Overrides { trials: Some(5000), ..Default::default() }),
        (Experiment::Marginals, Overrides { trials: Some(2000), ..Default::default() }),
    ];
    let bytes = |out: &RunOutput| -> Result<Vec<Vec<u8>>, String> {
        let mut all = vec![out.summary_json().into_bytes()];
        for t in &out.tables {
            all.push(t.to_csv().map_err(|e| e.to_string())?);
        }
        Ok(all)
    };
    let mut differing = Vec::new();
    for (exp, o) in quick {
        let runs: Vec<Vec<Vec<u8>>> = [1usize, 1, 2]
            .into_iter()
            .map(|w| {
                let (out, _) = run_experiment(exp, Overrides { workers: Some(w), ..o.clone() })?;
                bytes(&out)
            })
            .collect::<Result<_, String>>()?;
        if runs[0] != runs[1] || runs[0] != runs[2] {
            differing.push(exp.name());
        }
    }
    verdict(
        differing.is_empty(),
        format!("7 experiments x (2 runs, 1 vs 2 workers): differing {differing:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("model-a inequality sweep", model_a_inequality),
        ("hbar emergence", hbar_emergence),
        ("born rule", born_rule),
        ("measurement idempotence", idempotence),
        ("relaxation law", relaxation_law),
        ("unitary continuity", unitary_continuity),
        ("regime dichotomy", regime_dichotomy),
        ("singlet correlations", singlet),
        ("parameter independence", parameter_independence),
        ("reproducibility", reproducibility),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
