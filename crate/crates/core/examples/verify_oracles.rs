//! Runs the built-in correctness checks: gradient decomposition, finite
//! differences, Stein's identity, curvature at zero, the random-bias
//! construction and Eckart-Young.
//!
//!     cargo run --release --example verify_oracles

use principal_subspace::harness::verify::verify_suite;

fn main() -> principal_subspace::Result<()> {
    let mut all = true;
    for o in verify_suite(1, 200_000, false)? {
        all &= o.passed;
        println!("[{}] {}: {}", if o.passed { "pass" } else { "FAIL" }, o.name, o.detail);
    }
    std::process::exit(if all { 0 } else { 1 });
}
