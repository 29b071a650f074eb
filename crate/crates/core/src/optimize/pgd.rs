use super::sgd::{metrics_row, TrainTrajectory, DIVERGENCE_NORM};
use crate::error::{Error, Result};
use crate::geometry::SubspaceBasis;
use crate::linalg::{Matrix, RngStream};
use crate::model::{Loss, StudentNet, TeacherModel};
use crate::population::{gradient_and_risk, mc_population_risk};

/// Gradient descent on the regularized population risk,
/// `W ← W − η ∇R_λ(W)`, with the gradient replaced by a fresh `mc_n`-sample
/// Monte-Carlo estimate at every step. One trajectory row per iterate.
///
/// Before the first step the estimate's largest entrywise standard error must
/// be below 10% of the gradient's Frobenius norm; otherwise `mc_n` is too
/// small and [`Error::McAccuracy`] is returned.
#[allow(clippy::too_many_arguments)]
pub fn pgd_run(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    eta: f64,
    lambda: f64,
    steps: usize,
    mc_n: usize,
    basis: &SubspaceBasis,
    rng: &mut RngStream,
) -> Result<(StudentNet, TrainTrajectory)> {
    let mut checked = false;
    let mut oracle = |w: &StudentNet, rng: &mut RngStream| -> Result<(Matrix, f64)> {
        let (g, r) = gradient_and_risk(w, teacher, loss, lambda, mc_n, rng)?;
        if !checked {
            let gn = g.value.frobenius_norm();
            if g.stderr >= 0.1 * gn {
                return Err(Error::McAccuracy {
                    stderr: g.stderr,
                    norm: gn,
                });
            }
            checked = true;
        }
        Ok((g.value, r.value))
    };
    let (out, mut traj) = pgd_with_oracle(net, eta, steps, basis, rng, &mut oracle)?;
    let final_risk = mc_population_risk(&out, teacher, loss, mc_n.max(2), rng)?.value;
    if let Some(last) = traj.rows.last_mut() {
        last.emp_risk_window = final_risk;
    }
    Ok((out, traj))
}

/// Gradient descent driven by an arbitrary gradient oracle returning
/// `(∇R_λ(W), R(W))`. The oracle is not called on the final iterate, so the
/// last row records a risk of 0.
pub fn pgd_with_oracle<G>(
    net: &StudentNet,
    eta: f64,
    steps: usize,
    basis: &SubspaceBasis,
    rng: &mut RngStream,
    oracle: &mut G,
) -> Result<(StudentNet, TrainTrajectory)>
where
    G: FnMut(&StudentNet, &mut RngStream) -> Result<(Matrix, f64)>,
{
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be >= 0, got {eta}")));
    }
    let mut net = net.clone();
    let mut traj = TrainTrajectory::default();
    for t in 0..steps {
        let (g, risk) = oracle(&net, rng)?;
        traj.rows.push(metrics_row(t, eta, net.w(), basis, risk)?);
        net.w_mut().add_scaled(-eta, &g)?;
        let norm = net.w().frobenius_norm();
        if !norm.is_finite() {
            return Err(Error::Divergence {
                step: t,
                reason: "non-finite weights".into(),
            });
        }
        if norm > DIVERGENCE_NORM {
            return Err(Error::Divergence {
                step: t,
                reason: format!("‖W‖_F = {norm:e} exceeds {DIVERGENCE_NORM:e}"),
            });
        }
    }
    traj.rows.push(metrics_row(steps, eta, net.w(), basis, 0.0)?);
    Ok((net, traj))
}
