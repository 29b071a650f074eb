//! Online SGD on a 2-d tanh teacher, with and without weight decay.
//! With decay every first-layer row collapses onto the teacher direction;
//! without it the orthogonal component stays where it started.
//!
//!     cargo run --release --example subspace_recovery

use principal_subspace::geometry::SubspaceBasis;
use principal_subspace::linalg::RngStream;
use principal_subspace::model::{init_student, Activation, Link, Loss, Noise, TeacherModel};
use principal_subspace::optimize::{
    default_t_star, select_weight_decay, sgd_train_first_layer, SgdConfig, StepSchedule, WeightDecayRule,
};

fn main() -> principal_subspace::Result<()> {
    let (m, d, steps, gamma) = (1000, 2, 50_000, 0.5);
    let mut rng = RngStream::new(1, 0);
    let teacher = TeacherModel::random_orthonormal(1, d, Link::TanhOfSum, Noise::None, &mut rng)?;
    let net = init_student(m, d, Activation::Relu, &mut rng)?;
    let basis = SubspaceBasis::from_u(teacher.u())?;

    let (_, tilde) = select_weight_decay(WeightDecayRule::Relu { gamma }, m)?;
    let schedule = StepSchedule::decreasing(m, gamma, default_t_star(tilde, gamma), steps)?;

    for decay in [true, false] {
        let mut cfg = SgdConfig::new(schedule, tilde, 1)?;
        if !decay {
            cfg.lambda = 0.0;
            cfg.tilde_lambda = 0.0;
        }
        let (_, traj) = sgd_train_first_layer(&net, &teacher, &Loss::huber(), &cfg, &basis)?;
        let (first, last) = (traj.first().unwrap(), traj.last().unwrap());
        println!(
            "weight decay {:5}: perp_metric {:.4} -> {:.2e}",
            decay, first.perp_metric, last.perp_metric
        );
    }
    Ok(())
}
