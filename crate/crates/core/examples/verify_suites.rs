//! Runs every invariant suite against its independent oracle.
//!
//! ```bash
//! cargo run --release --example verify_suites
//! ```

use bsgs::experiments::{verify, Suite};

fn main() -> bsgs::Result<()> {
    let mut all = true;
    for name in ["core", "markov", "pg", "pmc", "hmm"] {
        let report = verify(name.parse::<Suite>()?)?;
        all &= report.passed;
        println!("[{name}] {}", if report.passed { "ok" } else { "FAILED" });
        for c in &report.checks {
            println!(
                "    {:<36} {:.3e} (limit {:.0e})",
                c.name, c.value, c.threshold
            );
        }
    }
    if !all {
        std::process::exit(1);
    }
    Ok(())
}
