//! Approximating `f(z) = z^2` on `[-2, 2]` by a sum of ReLUs with random
//! biases. The sup error shrinks roughly like `1/sqrt(m)`.
//!
//!     cargo run --release --example random_bias_construction

use principal_subspace::harness::median;
use principal_subspace::linalg::RngStream;
use principal_subspace::population::{construct_second_layer, sup_grid_error};

fn main() -> principal_subspace::Result<()> {
    let square = |z: f64| (z * z, 2.0 * z, 2.0);
    let delta = 2.0;
    for m in [64, 256, 1024, 4096] {
        let alphas = vec![1.0; m];
        let mut errs = Vec::new();
        for seed in 0..20 {
            let mut rng = RngStream::new(seed, m as u64);
            let (a, b) = construct_second_layer(&square, &alphas, delta, 1.0, 1.0, &mut rng)?;
            errs.push(sup_grid_error(&square, &a, &b, &alphas, delta, 401));
        }
        println!("m={m:5} median sup error {:.4}", median(&mut errs));
    }
    Ok(())
}
