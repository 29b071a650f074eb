//! Full-batch gradient descent on the regularized population risk, with
//! gradients estimated by Monte Carlo. The orthogonal part of `W` shrinks at
//! least as fast as `(1 - η̃γ)^t`, where `η̃ = η/m`.
//!
//!     cargo run --release --example pgd_contraction

use principal_subspace::geometry::SubspaceBasis;
use principal_subspace::linalg::RngStream;
use principal_subspace::model::{init_student, Activation, Link, Loss, Noise, TeacherModel};
use principal_subspace::optimize::{pgd_run, select_weight_decay, WeightDecayRule};

fn main() -> principal_subspace::Result<()> {
    let (m, d, gamma, steps) = (8, 6, 0.5, 100);
    let mut rng = RngStream::new(2, 0);
    let teacher = TeacherModel::random_orthonormal(1, d, Link::TanhOfSum, Noise::None, &mut rng)?;
    let net = init_student(m, d, Activation::Relu, &mut rng)?;
    let basis = SubspaceBasis::from_u(teacher.u())?;

    let (lambda, tilde) = select_weight_decay(WeightDecayRule::Relu { gamma }, m)?;
    let eta_tilde = 0.05 / tilde;
    let eta = m as f64 * eta_tilde;
    let (_, traj) = pgd_run(&net, &teacher, &Loss::huber(), eta, lambda, steps, 20_000, &basis, &mut rng)?;

    let p0 = traj.first().unwrap().perp_metric;
    for row in traj.rows.iter().step_by(20) {
        let envelope = p0 * (1.0 - eta_tilde * gamma).powi(row.t as i32);
        println!("t={:4} perp {:.4e} envelope {:.4e}", row.t, row.perp_metric, envelope);
    }
    Ok(())
}
