//! Rank-k truncation of a trained first layer. Once `W` has collapsed onto
//! the teacher subspace, its best rank-1 approximation barely moves the risk.
//!
//!     cargo run --release --example compression

use principal_subspace::geometry::rank_truncate;
use principal_subspace::harness::{sgd_run, ExperimentSpec};
use principal_subspace::linalg::{svd, RngStream};
use principal_subspace::population::mc_truncated_risk_gap;

fn main() -> principal_subspace::Result<()> {
    let mut spec = ExperimentSpec::preset("compress")?;
    spec.student.m = 200;
    spec.optimizer.steps = 20_000;
    let run = sgd_run(&spec, 1, spec.teacher.d, spec.optimizer.steps, true, false)?;

    let s = svd(run.trained.w())?.singular_values;
    println!("singular values of trained W: {s:.4?}");

    let compressed = run.trained.with_w(rank_truncate(run.trained.w(), 1)?)?;
    let mut rng = RngStream::new(1, 104);
    let gap = mc_truncated_risk_gap(&run.trained, &compressed, &run.teacher, &spec.optimizer.loss, 100_000, &mut rng)?;
    println!("truncated-risk change after rank-1 truncation: {:.2e} ± {:.2e}", gap.value, gap.stderr);
    Ok(())
}
