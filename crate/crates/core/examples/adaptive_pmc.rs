//! Adaptive population Monte Carlo on the bimodal target: adapt the mixture
//! weights of three Gaussian random-walk moves, then compare with the
//! quadrature minimizer of the Kullback-Leibler objective.
//!
//! ```bash
//! cargo run --release --example adaptive_pmc
//! ```

use bsgs::adaptive_pmc::{
    kl_gradient, kl_objective, measure_bias, mixture_weights, run_adaptive_pmc, MixtureKernel,
    PmcRun, TargetSpec,
};
use bsgs::experiments::locate_stationary_point;
use bsgs::{ParamVector, ProjectionPolicy, StepSchedule};

fn main() -> bsgs::Result<()> {
    let target = TargetSpec::default();
    let kernel = MixtureKernel::gaussian(&[(0.0, 0.1), (0.5, 0.08), (-0.5, 0.08)], &target)?;
    let theta0 = ParamVector::zeros(3);

    let settings = PmcRun {
        particles: 500,
        schedule: StepSchedule::default(),
        steps: 2_000,
        projection: Some(ProjectionPolicy::with_defaults(theta0.clone())?),
        record_every: 100,
    };
    let traj = run_adaptive_pmc(&target, &kernel, theta0, &settings, 3)?;
    for (n, theta) in traj.indices.iter().zip(&traj.iterates) {
        if n % 500 == 0 {
            let w = mixture_weights(theta);
            println!(
                "step {n:>5}: weights [{:.3}, {:.3}, {:.3}], KL {:.5}",
                w[0],
                w[1],
                w[2],
                kl_objective(&target, &kernel, theta)?
            );
        }
    }

    let best = locate_stationary_point(
        |t| kl_objective(&target, &kernel, t).unwrap(),
        |t| kl_gradient(&target, &kernel, t).unwrap().0,
        traj.last(),
        1e-8,
    )?;
    let w = mixture_weights(&best);
    println!(
        "quadrature optimum weights [{:.3}, {:.3}, {:.3}]",
        w[0], w[1], w[2]
    );

    // finite-population bias of the score estimator
    for n in [10, 100] {
        let b = measure_bias(&target, &kernel, traj.last(), n, 200_000 / n, 5)?;
        println!("N = {n:>4}: |eta| = {:.3e} ± {:.1e}", b.norm, b.norm_se);
    }
    Ok(())
}
