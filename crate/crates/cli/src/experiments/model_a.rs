use serde_json::json;
use sqe_core::model_a::{
    effective_hbar_at, estimate_n, simulate_species_spread, uncertainty_product, ModelAConfig,
};
use sqe_core::SpeciesShape;

use super::{run_root, Results, RunError};
use crate::config::ExperimentConfig;
use crate::output::{num, Check, Table};

const SPREAD_COUNT: u64 = 10_000;
const HBAR_KS: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

pub(crate) fn run(config: &ExperimentConfig) -> Result<Results, RunError> {
    let n = config.n_total;
    let unit = SpeciesShape::unit();
    let mut table = Table::new("model-a.csv", &["n_a", "n_b", "lhs", "bound", "holds"]);
    let mut all_hold = true;
    let mut equality_at = Vec::new();
    for n_a in 1..n {
        let check = uncertainty_product(&ModelAConfig::split(n, n_a, unit, unit, config.hbar)?);
        all_hold &= check.holds;
        if check.lhs == check.bound {
            equality_at.push(n_a);
        }
        table.push(vec![
            n_a.to_string(),
            (n - n_a).to_string(),
            num(check.lhs),
            num(check.bound),
            check.holds.to_string(),
        ]);
    }
    let expected_equality: Vec<u64> = if n.is_multiple_of(2) { vec![n / 2] } else { vec![] };

    let mut hbar_rows = Vec::new();
    let mut worst_rel = 0.0f64;
    for k in HBAR_KS {
        let shape_a = SpeciesShape::new(k, 1.0, 1.0, 1.0)?;
        let n_star = estimate_n(config.hbar, &shape_a, &unit)?;
        let rel = (effective_hbar_at(n_star, &shape_a, &unit) / config.hbar - 1.0).abs();
        worst_rel = worst_rel.max(rel);
        hbar_rows.push(json!({ "k": k, "n_star": n_star, "relative_error": rel }));
    }

    let spread = simulate_species_spread(
        SPREAD_COUNT,
        1.0,
        1.0,
        config.trials,
        run_root(config).child("spread").seed(),
    )?;
    let closed = 1.0 / (SPREAD_COUNT as f64).sqrt();
    let spread_rel = (spread / closed - 1.0).abs();

    let checks = vec![
        Check::new("inequality_holds", all_hold, format!("N_a = 1..{}", n - 1)),
        Check::new(
            "equality_only_at_even_split",
            equality_at == expected_equality,
            format!("equality at N_a = {equality_at:?}"),
        ),
        Check::new(
            "hbar_round_trip",
            worst_rel <= 1e-12,
            format!("worst relative error {worst_rel:e}"),
        ),
        Check::new(
            "monte_carlo_spread",
            spread_rel <= 0.10,
            format!("simulated {spread:.6} vs closed form {closed:.6}"),
        ),
    ];
    Ok(Results {
        tables: vec![table],
        metrics: json!({
            "n_total": n,
            "equality_at": equality_at,
            "hbar_emergence": hbar_rows,
            "spread": {
                "count": SPREAD_COUNT,
                "trials": config.trials,
                "simulated": spread,
                "closed_form": closed,
                "relative_error": spread_rel,
            },
        }),
        checks,
    })
}
