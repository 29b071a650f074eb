//! How fast the orthogonal component vanishes as the step budget grows.
//! Runs a small sweep through the experiment harness and prints the fitted
//! log-log slope.
//!
//!     cargo run --release --example rate_sweep

use principal_subspace::harness::{run_rate_sweep, ExperimentKind, ExperimentSpec, SweepAxis};

fn main() -> principal_subspace::Result<()> {
    let mut spec = ExperimentSpec::preset("sweep")?;
    spec.seeds = (1..=5).collect();
    spec.kind = ExperimentKind::RateSweep {
        axis: SweepAxis::Steps,
        values: vec![1 << 11, 1 << 12, 1 << 13, 1 << 14],
        slope_min: -1.0,
        slope_max: 0.0,
        bootstrap: 500,
    };
    let r = run_rate_sweep(&spec)?;
    for (name, body) in &r.tables {
        println!("{name}:\n{body}");
    }
    println!(
        "slope {:.3}, bootstrap CI [{:.3}, {:.3}]",
        r.metrics["slope"], r.metrics["slope_ci_low"], r.metrics["slope_ci_high"]
    );
    Ok(())
}
