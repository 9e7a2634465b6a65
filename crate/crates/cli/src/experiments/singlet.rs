use serde_json::json;
use sqe_core::{Side, SingletSetup};

use super::{run_root, Results, RunError};
use crate::config::{ExperimentConfig, TSIRELSON_ANGLES_DEG};
use crate::output::{num, Check, Table};

const CORR_POINTS: u32 = 12;
const CORR_TOLERANCE: f64 = 0.03;
const CHSH_TOLERANCE: f64 = 0.05;
const CHSH_MIN_SIGMAS: f64 = 16.0;
const MARGINAL_SETTINGS: u32 = 8;

fn setup(config: &ExperimentConfig) -> Result<SingletSetup, RunError> {
    Ok(SingletSetup::new(config.n_sqe, config.grid()?, config.relaxation()?)?)
}

pub(crate) fn run_corr(config: &ExperimentConfig) -> Result<Results, RunError> {
    let setup = setup(config)?;
    let root = run_root(config);
    let alpha = config.angle(0.0)?;
    let mut table = Table::new("corr.csv", &["delta", "E", "stderr"]);
    let mut plot = Table::new("corr_plot.csv", &["delta", "e", "neg_cos"]);
    let mut checks = Vec::new();
    let mut points = Vec::new();
    for j in 0..CORR_POINTS {
        let delta = 360.0 * j as f64 / CORR_POINTS as f64;
        let beta = config.angle(delta)?;
        let c = setup.correlation(alpha, beta, config.trials, root.child(j).seed())?;
        let qm = -delta.to_radians().cos();
        let pass = if j == 0 {
            c.e == -1.0
        } else {
            (c.e - qm).abs() <= CORR_TOLERANCE
        };
        checks.push(Check::new(
            format!("corr_{delta}"),
            pass,
            format!("E = {:.5} vs -cos = {qm:.5}", c.e),
        ));
        table.push(vec![num(delta), num(c.e), num(c.stderr)]);
        plot.push(vec![num(delta), num(c.e), num(qm)]);
        points.push(json!({ "delta_deg": delta, "e": c.e, "stderr": c.stderr, "counts": c.counts }));
    }
    Ok(Results {
        tables: vec![table, plot],
        metrics: json!({ "trials_per_point": config.trials, "points": points }),
        checks,
    })
}

pub(crate) fn run_chsh(config: &ExperimentConfig) -> Result<Results, RunError> {
    let setup = setup(config)?;
    let angles = config.chsh_angles()?;
    let r = setup.chsh(angles, config.trials, run_root(config).seed())?;
    let labels = ["E(a,b)", "E(a,b')", "E(a',b)", "E(a',b')"];
    let mut table = Table::new("chsh.csv", &["term", "alpha", "beta", "trials", "E", "stderr"]);
    for (label, t) in labels.iter().zip(&r.terms) {
        table.push(vec![
            label.to_string(),
            num(t.alpha.degrees()),
            num(t.beta.degrees()),
            t.trials.to_string(),
            num(t.e),
            num(t.stderr),
        ]);
    }
    let e = |x: sqe_core::GridAngle, y: sqe_core::GridAngle| -(x.radians() - y.radians()).cos();
    let s_qm = (e(angles.a, angles.b) - e(angles.a, angles.b_prime) + e(angles.a_prime, angles.b)
        + e(angles.a_prime, angles.b_prime))
    .abs();
    let mut checks = vec![Check::new(
        "s_matches_quantum",
        (r.s - s_qm).abs() <= CHSH_TOLERANCE,
        format!("S = {:.5} vs {s_qm:.5}", r.s),
    )];
    let violation = (r.s - 2.0) / r.sigma;
    if config.angles_deg == TSIRELSON_ANGLES_DEG {
        checks.push(Check::new(
            "bell_violation",
            violation >= CHSH_MIN_SIGMAS,
            format!("S - 2 = {violation:.1} sigma"),
        ));
    }
    Ok(Results {
        tables: vec![table],
        metrics: json!({
            "angles_deg": config.angles_deg,
            "terms": labels.iter().zip(&r.terms).map(|(l, t)| json!({
                "term": l,
                "e": t.e,
                "stderr": t.stderr,
                "counts": t.counts,
            })).collect::<Vec<_>>(),
            "S": r.s,
            "sigma": r.sigma,
            "S_quantum": s_qm,
            "sigmas_above_classical": violation,
        }),
        checks,
    })
}

pub(crate) fn run_marginals(config: &ExperimentConfig) -> Result<Results, RunError> {
    let setup = setup(config)?;
    let root = run_root(config);
    let own = config.angle(config.own_alpha_deg)?;
    let mut table = Table::new(
        "marginals.csv",
        &[
            "side",
            "own_alpha",
            "remote_beta",
            "trials",
            "p_plus",
            "sigma",
            "z",
            "p_plus_given_remote_plus",
            "p_plus_given_remote_minus",
        ],
    );
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    for side in [Side::One, Side::Two] {
        for j in 0..MARGINAL_SETTINGS {
            let beta_deg = 360.0 * j as f64 / MARGINAL_SETTINGS as f64;
            let beta = config.angle(beta_deg)?;
            let m = setup.marginal(side, own, beta, config.trials, root.child(u8::from(side) as u32).child(j).seed())?;
            checks.push(Check::new(
                format!("marginal_side{side}_{beta_deg}"),
                m.z.abs() < 3.0,
                format!("p_plus = {:.5}, z = {:.2}", m.p_plus, m.z),
            ));
            if beta == own {
                checks.push(Check::new(
                    format!("outcome_dependence_side{side}"),
                    m.p_plus_given_remote_plus == Some(0.0) && m.p_plus_given_remote_minus == Some(1.0),
                    format!(
                        "P(+|remote +) = {}, P(+|remote -) = {}",
                        opt(m.p_plus_given_remote_plus),
                        opt(m.p_plus_given_remote_minus)
                    ),
                ));
            }
            table.push(vec![
                side.to_string(),
                num(own.degrees()),
                num(beta_deg),
                m.trials.to_string(),
                num(m.p_plus),
                num(m.sigma),
                num(m.z),
                opt(m.p_plus_given_remote_plus),
                opt(m.p_plus_given_remote_minus),
            ]);
            rows.push(m);
        }
    }
    Ok(Results {
        tables: vec![table],
        metrics: json!({ "own_alpha_deg": own.degrees(), "settings": rows }),
        checks,
    })
}
