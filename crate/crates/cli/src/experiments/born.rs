use rayon::prelude::*;
use serde_json::json;
use sqe_core::measurement::born_trial;
use sqe_core::stats::{binomial_sigma, Proportion};
use sqe_core::{qm_oracle, HiddenSeeds, Result as SqeResult};

use super::{run_root, Results, RunError};
use crate::config::ExperimentConfig;
use crate::output::{num, Check, Table};

pub const BORN_ANGLES_DEG: [f64; 7] = [0.0, 30.0, 45.0, 60.0, 90.0, 120.0, 180.0];

pub(crate) fn run(config: &ExperimentConfig) -> Result<Results, RunError> {
    let grid = config.grid()?;
    let alpha0 = grid.at(0);
    let trials = config.trials;
    let mut table = Table::new(
        "born.csv",
        &["delta_alpha", "trials", "freq_plus", "born_weight", "abs_err", "sigma"],
    );
    let mut checks = Vec::new();
    let mut metrics = Vec::new();
    for (j, deg) in BORN_ANGLES_DEG.into_iter().enumerate() {
        let alpha = config.angle(deg)?;
        let root = run_root(config).child(j);
        let lambda_m = root.child("apparatus").seed();
        let lambda_sp = root.child("space").seed();
        let system = root.child("system");
        let plus: u64 = (0..trials)
            .into_par_iter()
            .map(|t| -> SqeResult<u64> {
                let seeds = HiddenSeeds {
                    lambda_m,
                    lambda_sp,
                    trial_index: t,
                };
                let outcome = born_trial(config.n_sqe, grid, alpha0, alpha, system.child(t).seed(), &seeds)?;
                Ok((outcome == sqe_core::Eigenvalue::Plus) as u64)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        let p = Proportion::new(plus, trials);
        let w = qm_oracle(alpha0.radians(), alpha.radians());
        let sigma = binomial_sigma(w, trials);
        let err = (p.estimate() - w).abs();
        let pass = if deg == 0.0 {
            plus == trials
        } else if deg == 180.0 {
            plus == 0
        } else {
            err <= 3.0 * sigma
        };
        checks.push(Check::new(
            format!("born_{deg}"),
            pass,
            format!("freq {:.5} vs {:.5} (3 sigma = {:.5})", p.estimate(), w, 3.0 * sigma),
        ));
        metrics.push(json!({
            "delta_alpha_deg": deg,
            "plus": plus,
            "freq_plus": p.estimate(),
            "born_weight": w,
            "z": p.z_score(w),
        }));
        table.push(vec![
            num(deg),
            trials.to_string(),
            num(p.estimate()),
            num(w),
            num(err),
            num(sigma),
        ]);
    }
    Ok(Results {
        tables: vec![table],
        metrics: json!({ "alpha0_deg": 0.0, "angles": metrics }),
        checks,
    })
}
