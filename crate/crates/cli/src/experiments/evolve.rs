use rayon::prelude::*;
use serde_json::json;
use sqe_core::evolution::{chain_summary, ChainSummary};
use sqe_core::stats::binomial_sigma;
use sqe_core::{evolve, init_eigenstate, Eigenvalue, EvolutionMode, Result as SqeResult};

use super::{run_root, Results, RunError};
use crate::config::ExperimentConfig;
use crate::output::{num, Check, Table};

pub(crate) fn run(config: &ExperimentConfig) -> Result<Results, RunError> {
    let grid = config.grid()?;
    let params = config.relaxation()?;
    let plan = config.plan()?;
    let root = run_root(config);
    let system = root.child("system");
    let chain = root.child("chain");
    let m0 = Eigenvalue::Plus;

    // Chain 0 runs through the full relaxation pipeline and is logged.
    let start = init_eigenstate(config.n_sqe, grid, plan.alpha_start, m0, system.child(0u64).seed())?;
    let logged = evolve(&start, &plan, chain.child(0u64).seed(), &params, config.r_min)?;
    let mut table = Table::new(
        "evolve.csv",
        &["step", "alpha", "m", "flipped", "tau_relax", "ratio", "pure_state_valid"],
    );
    for s in &logged.log {
        table.push(vec![
            s.step.to_string(),
            num(s.alpha.degrees()),
            s.m.to_string(),
            s.flipped.to_string(),
            s.report.tau_relax.to_string(),
            num(s.report.ratio),
            s.report.pure_state_valid.to_string(),
        ]);
    }

    let chains: Vec<ChainSummary> = (0..config.trials)
        .into_par_iter()
        .map(|c| -> SqeResult<ChainSummary> {
            chain_summary(
                config.n_sqe,
                grid,
                &plan,
                m0,
                system.child(c).seed(),
                chain.child(c).seed(),
                &params,
                config.r_min,
            )
        })
        .collect::<SqeResult<_>>()?;
    let total_flips: u64 = chains.iter().map(|c| c.total_flips as u64).sum();
    let k = plan.steps as f64;
    let d_alpha = plan.d_alpha() as f64 * std::f64::consts::TAU / grid.size() as f64;
    let p_flip = (d_alpha / 2.0).sin().powi(2);
    let steps_total = config.trials * plan.steps as u64;
    let mean_flips = total_flips as f64 / config.trials as f64;
    let expected = k * p_flip;

    let first = chains[0];
    let mut checks = vec![
        Check::new(
            "logged_chain_pure",
            !logged.aborted && logged.log.iter().all(|s| s.report.pure_state_valid),
            format!("{} of {} steps in the pure-state regime", logged.log.len(), plan.steps),
        ),
        Check::new(
            "logged_chain_matches_summary",
            logged.aborted
                || (first.total_flips == logged.total_flips
                    && Some(first.final_state) == logged.state.equilibrium()),
            "chain 0 via full relaxation vs outcome counting",
        ),
    ];
    match plan.mode {
        EvolutionMode::Stochastic => {
            let rate = total_flips as f64 / steps_total as f64;
            let sigma = binomial_sigma(p_flip, steps_total);
            checks.push(Check::new(
                "flip_rate",
                (rate - p_flip).abs() <= 3.0 * sigma,
                format!("per-step flip rate {rate:.6} vs sin^2(d/2) = {p_flip:.6} (3 sigma = {:.6})", 3.0 * sigma),
            ));
        }
        EvolutionMode::Adiabatic => {
            let ok = chains
                .iter()
                .all(|c| c.total_flips == 0 && c.final_state.alpha == plan.alpha_end && c.final_state.m == m0);
            checks.push(Check::new(
                "adiabatic_transport",
                ok,
                format!("every chain ends in ({}, {m0})", plan.alpha_end.degrees()),
            ));
        }
    }

    Ok(Results {
        tables: vec![table],
        metrics: json!({
            "mode": plan.mode,
            "alpha_start_deg": plan.alpha_start.degrees(),
            "alpha_end_deg": plan.alpha_end.degrees(),
            "steps": plan.steps,
            "d_alpha_deg": d_alpha.to_degrees(),
            "chains": config.trials,
            "total_flips": total_flips,
            "mean_flips": mean_flips,
            "expected_mean_flips": expected,
            "logged_chain": {
                "total_flips": logged.total_flips,
                "aborted": logged.aborted,
                "final_state": logged.state.equilibrium(),
            },
        }),
        checks,
    })
}
