//! Invariant law, Poisson equation and mixing rate of a small chain.
//!
//! ```bash
//! cargo run --example markov_chain_tools
//! ```

use bsgs::finite_markov::{
    deviation_power_apply, ergodicity_margin, invariant_distribution, poisson_solve,
    DeviationSeries,
};
use bsgs::StochasticMatrix;

fn main() -> bsgs::Result<()> {
    let p = StochasticMatrix::new(vec![
        vec![0.5, 0.3, 0.2],
        vec![0.1, 0.8, 0.1],
        vec![0.25, 0.25, 0.5],
    ])?;
    let nu = invariant_distribution(&p)?;
    println!("invariant law: {:?}", nu.as_slice());
    println!("subdominant modulus: {:.4}", ergodicity_margin(&p)?);

    // solve h − Ph = g − ν(g) for a cost vector g
    let g = [1.0, -2.0, 0.5];
    let mean = nu.dot(&g);
    let centered: Vec<f64> = g.iter().map(|v| v - mean).collect();
    let h = poisson_solve(&p, &nu, &centered, 1e-12)?;
    let ph = p.apply(&h);
    let residual = (0..3)
        .map(|i| (h[i] - ph[i] - centered[i]).abs())
        .fold(0.0, f64::max);
    println!("Poisson solution {h:?}, residual {residual:.1e}");

    // (P − 1ν)ⁿ g decays geometrically
    let series = DeviationSeries::new(p, 1e-12)?;
    for n in [1, 5, 10, 20] {
        let v = deviation_power_apply(&series, n, &g);
        let size = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        println!("n = {n:>2}: |(P - 1nu)^n g| = {size:.3e}");
    }
    Ok(())
}
