//! Runs a sweep config and writes `report.json` and `rows.csv`.
//!
//! ```bash
//! cargo run --release --example bias_sweep -- crates/core/examples/configs/pg_quick.json out/
//! ```

use std::path::PathBuf;

use bsgs::experiments::{sweep, SweepConfig};

fn main() -> bsgs::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/examples/configs/pg_quick.json"
        ))
    });
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("sweep_out"));

    let cfg = SweepConfig::load(&config)?;
    let report = sweep(&cfg)?;
    println!(
        "{:>10} {:>12} {:>10} {:>12}",
        "value", "|eta|", "se", "tail sup"
    );
    for r in &report.rows {
        println!(
            "{:>10} {:>12.4e} {:>10.1e} {:>12.4e}",
            r.value, r.bias_norm, r.bias_norm_se, r.tail_sup_grad_norm
        );
    }
    println!("bias slope {:.3}", report.bias_slope.slope);
    for c in &report.checks {
        let tag = if !c.required {
            "info"
        } else if c.passed {
            "pass"
        } else {
            "fail"
        };
        println!(
            "{tag}: {} = {:.4} (threshold {})",
            c.name, c.value, c.threshold
        );
    }
    report.write(&out)?;
    println!("wrote {}", out.join("report.json").display());
    Ok(())
}
