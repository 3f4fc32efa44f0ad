//! The generic recursion on a quadratic with heavy-tailed gradient noise:
//! the expanding-ball projection fires a few times early and then stays
//! quiet.
//!
//! ```bash
//! cargo run --release --example heavy_tailed_projection
//! ```

use bsgs::rng::SimRng;
use bsgs::sgd_core::run;
use bsgs::{ParamVector, ProjectionPolicy, StepSchedule};
use rand_distr::{Distribution, StudentT};

fn main() -> bsgs::Result<()> {
    let noise = StudentT::new(2.5).expect("positive degrees of freedom");
    let schedule = StepSchedule::new(2.0, 0.7, 1)?;
    for seed in 0..5 {
        let anchor = ParamVector(vec![1.0, -1.0]);
        let policy = ProjectionPolicy::with_defaults(anchor.clone())?;
        let estimator = |t: &[f64], _n: usize, rng: &mut SimRng, out: &mut [f64]| {
            for (o, v) in out.iter_mut().zip(t) {
                *o = v + 3.0 * noise.sample(rng);
            }
        };
        let traj = run(estimator, &schedule, anchor, 100_000, Some(policy), seed)?;
        let last_event = traj.projection_events.last().copied();
        println!(
            "seed {seed}: {} projections, last at {last_event:?}, final |theta| {:.4}",
            traj.projection_events.len(),
            traj.last().norm()
        );
    }
    Ok(())
}
