//! The two-phase learner on a single-index target `y = z + 0.1 z^3 + ε`:
//! first-layer SGD from a symmetric start, fresh random biases, then a
//! second-layer fit on the same samples.
//!
//!     cargo run --release --example learnability

use principal_subspace::linalg::RngStream;
use principal_subspace::model::{Link, Loss, Noise, TeacherModel};
use principal_subspace::optimize::{algorithm1, Algorithm1Config};

fn main() -> principal_subspace::Result<()> {
    let d = 10;
    let mut rng = RngStream::new(5, 0);
    let teacher = TeacherModel::random_orthonormal(
        1,
        d,
        Link::MonotonePoly { c: 0.1 },
        Noise::Gaussian { sigma: 0.1 },
        &mut rng,
    )?;
    let mut cfg = Algorithm1Config::new(100, 5_000, 5);
    cfg.test_samples = 20_000;

    let (_, diag) = algorithm1(&teacher, &cfg, &Loss::huber())?;
    println!("alignment with teacher   {:.4}", diag.alignment);
    println!("chosen second-layer decay {}", diag.lambda_prime);
    println!(
        "excess truncated risk    {:.4} ± {:.4} (noise floor {:.4})",
        diag.excess_truncated_risk, diag.excess_stderr, diag.noise_floor
    );
    Ok(())
}
