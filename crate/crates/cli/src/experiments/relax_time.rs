use serde_json::json;
use sqe_core::relaxation::{measure_relax_time, sweeps_to_reach};
use sqe_core::{coupling_for_eigenstate, init_eigenstate, relax_to_equilibrium, Eigenvalue};

use super::{run_root, Results, RunError};
use crate::config::ExperimentConfig;
use crate::output::{num, Check, Table};

/// Allowed relative deviation of `tau(g/2) / tau(g)` from 2.
const DOUBLING_TOLERANCE: f64 = 0.2;

pub(crate) fn run(config: &ExperimentConfig) -> Result<Results, RunError> {
    let grid = config.grid()?;
    let params = config.relaxation()?;
    let root = run_root(config);
    let mut table = Table::new("relax-time.csv", &["g_peak", "mean_sweeps", "sd_sweeps"]);
    let mut stats = Vec::new();
    for (j, &g) in config.g_peaks.iter().enumerate() {
        let s = measure_relax_time(
            config.n_sqe,
            grid,
            g,
            &params,
            config.trials as usize,
            root.child("random").child(j).seed(),
        )?;
        table.push(vec![num(g), num(s.mean_sweeps), num(s.sd_sweeps)]);
        stats.push(s);
    }

    let mut checks = vec![Check::new(
        "all_runs_converged",
        stats.iter().all(|s| s.unconverged == 0),
        format!("max_sweeps = {}", params.max_sweeps),
    )];
    for a in &stats {
        if let Some(b) = stats.iter().find(|b| b.g_peak == a.g_peak / 2.0) {
            let ratio = b.mean_sweeps / a.mean_sweeps;
            checks.push(Check::new(
                format!("halving_{}", a.g_peak),
                (ratio / 2.0 - 1.0).abs() <= DOUBLING_TOLERANCE,
                format!("tau({}) / tau({}) = {ratio:.4}", b.g_peak, a.g_peak),
            ));
        }
    }

    // Deterministic fixtures: start from the opposite eigenstate, so every
    // peak value is at distance exactly 2 from its target.
    let mut fixtures = Vec::new();
    for (j, &g) in config.g_peaks.iter().enumerate() {
        let start = init_eigenstate(
            config.n_sqe,
            grid,
            grid.at(0),
            Eigenvalue::Minus,
            root.child("fixture").child(j).seed(),
        )?;
        let field = coupling_for_eigenstate(grid, grid.at(0))?.with_strength(g)?;
        let out = relax_to_equilibrium(start, &field, &params)?;
        let closed = sweeps_to_reach(2.0, params.eps_eq, params.eta * g);
        let exact = (2.0 / params.eps_eq).ln() / -(1.0 - params.eta * g).ln();
        checks.push(Check::new(
            format!("closed_form_{g}"),
            out.converged && out.sweeps_used.abs_diff(closed) <= 1,
            format!("tau = {} vs closed form {exact:.2}", out.sweeps_used),
        ));
        fixtures.push(json!({
            "g_peak": g,
            "sweeps": out.sweeps_used,
            "closed_form": exact,
        }));
    }

    Ok(Results {
        tables: vec![table],
        metrics: json!({
            "n_sqe": config.n_sqe,
            "grid_size": config.grid_size,
            "runs": stats.iter().map(|s| json!({
                "g_peak": s.g_peak,
                "mean_sweeps": s.mean_sweeps,
                "sd_sweeps": s.sd_sweeps,
                "unconverged": s.unconverged,
            })).collect::<Vec<_>>(),
            "fixtures": fixtures,
        }),
        checks,
    })
}
