//! Train/test gap of the truncated loss over random second layers in a ball,
//! with the first layer fixed after SGD. The largest gap shrinks with the
//! number of training samples.
//!
//!     cargo run --release --example gap_probe

use principal_subspace::harness::{run_gap_probe, ExperimentKind, ExperimentSpec};

fn main() -> principal_subspace::Result<()> {
    let mut spec = ExperimentSpec::preset("gap")?;
    spec.seeds = vec![1, 2, 3];
    let ExperimentKind::GapProbe { ball, .. } = spec.kind else { unreachable!() };
    for steps in [1 << 11, 1 << 13] {
        spec.optimizer.steps = steps;
        let r = run_gap_probe(&spec, ball, 100)?;
        println!("T={steps:6} median max gap {:.5}", r.metrics["median_max_gap"]);
    }
    Ok(())
}
