//! Exact gradient and discounting bias of the trace estimator on a random
//! MDP, checked against a long simulation at frozen parameters.
//!
//! ```bash
//! cargo run --release --example policy_gradient_bias
//! ```

use bsgs::policy_gradient::{
    average_cost, estimator_mean, exact_bias, exact_gradient, MdpModel, DEFAULT_BURN_IN,
};
use bsgs::rng::seeded;

fn main() -> bsgs::Result<()> {
    let mut rng = seeded(11);
    let model = MdpModel::random(3, 2, &mut rng);
    let theta = vec![0.3; model.dim()];
    println!(
        "average cost f(theta) = {:.6}",
        average_cost(&model, &theta)?
    );
    let grad = exact_gradient(&model, &theta, 1e-13)?;
    println!("|grad f| = {:.6}", grad.norm());

    println!("{:>8} {:>12} {:>16}", "lambda", "|eta|", "|eta|/(1-lambda)");
    for lambda in [0.5, 0.9, 0.99, 0.999] {
        let eta = exact_bias(&model, &theta, lambda, 1e-13)?;
        println!(
            "{lambda:>8} {:>12.4e} {:>16.6}",
            eta.norm(),
            eta.norm() / (1.0 - lambda)
        );
    }

    // the simulated mean should match grad f + eta within a few standard errors
    let lambda = 0.9;
    let eta = exact_bias(&model, &theta, lambda, 1e-13)?;
    let (mean, se) = estimator_mean(&model, &theta, lambda, DEFAULT_BURN_IN, 2_000_000, &mut rng)?;
    for j in 0..model.dim() {
        let expected = grad[j] + eta[j];
        println!(
            "component {j}: simulated {:+.5} ± {:.5}, exact {expected:+.5}",
            mean[j], se[j]
        );
    }
    Ok(())
}
