//! Recursive split-likelihood identification of a two-state HMM and the
//! block-length bias of its gradient estimate.
//!
//! ```bash
//! cargo run --release --example hmm_split_likelihood
//! ```

use bsgs::hmm_ident::{
    exact_f_n_and_gradient, measure_hmm_bias, run_split_likelihood, CandidateHmm, HmmRun, TrueHmm,
};
use bsgs::{ParamVector, ProjectionPolicy, StepSchedule};

fn main() -> bsgs::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/hmm_model.json");
    let truth = TrueHmm::load(path)?;
    let dim = truth.param_dim();
    println!("true parameter {:?}", truth.true_theta().0);

    let theta0 = ParamVector::zeros(dim);
    let settings = HmmRun {
        block_len: 16,
        schedule: StepSchedule::default(),
        blocks: 100_000,
        projection: Some(ProjectionPolicy::with_defaults(theta0.clone())?),
        record_every: 20_000,
    };
    let traj = run_split_likelihood(&truth, theta0, &settings, 4)?;
    for (n, theta) in traj.indices.iter().zip(&traj.iterates) {
        let cand = CandidateHmm::new(truth.n_states(), truth.n_obs(), theta)?;
        let (f, g) = exact_f_n_and_gradient(&truth, &cand, 8)?;
        println!("block {n:>6}: f_8 = {f:.5}, |grad f_8| = {:.4}", g.norm());
    }

    // at the true parameter the fresh filter's start-up transient decays like 1/N
    let cand = CandidateHmm::new(truth.n_states(), truth.n_obs(), &truth.true_theta())?;
    let rows = measure_hmm_bias(&truth, &cand, &[2, 4, 8, 16], 500_000, 9)?;
    for r in rows {
        println!(
            "N = {:>2}: |eta| = {:.3e} ± {:.1e}, N|eta| = {:.4}",
            r.block_len, r.norm, r.norm_se, r.scaled_norm
        );
    }
    Ok(())
}
