//! Discounted-trace policy gradient on the one-parameter fixture model,
//! reporting how close the tail of each run stays to the stationary point.
//!
//! ```bash
//! cargo run --release --example policy_gradient_run -- 100000000
//! ```

use bsgs::experiments::locate_stationary_point;
use bsgs::policy_gradient::{average_cost, exact_gradient, run_policy_gradient, MdpModel, PgRun};
use bsgs::sgd_core::tail_stats;
use bsgs::{ParamVector, ProjectionPolicy, StepSchedule};

fn main() -> bsgs::Result<()> {
    let steps: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000_000);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/pg_vicinity.json");
    let model = MdpModel::load(path)?;
    let f = |t: &[f64]| average_cost(&model, t).unwrap();
    let g = |t: &[f64]| exact_gradient(&model, t, 1e-13).unwrap().0;
    let optimum = locate_stationary_point(f, g, &[0.0], 1e-10)?;
    println!("stationary point {:.6}", optimum[0]);

    for lambda in [0.9, 0.99] {
        let settings = PgRun {
            lambda,
            schedule: StepSchedule::new(41.6, 1.0, (steps / 10) as u64)?,
            steps,
            projection: Some(ProjectionPolicy::with_defaults(ParamVector::zeros(1))?),
            record_every: (steps / 10_000).max(1),
            start_state: 0,
        };
        let traj = run_policy_gradient(&model, ParamVector::zeros(1), &settings, 1)?;
        let tail = tail_stats(&traj, 0.2, g, f, Some(&optimum))?;
        println!(
            "lambda {lambda}: final theta {:.4}, tail max distance {:.4}, sup |grad f| {:.3e}",
            traj.last()[0],
            tail.max_distance,
            tail.sup_grad_norm
        );
    }
    Ok(())
}
