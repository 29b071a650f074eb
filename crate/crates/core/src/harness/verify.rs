//! Oracle checks bundled by the `verify` experiment. Each returns an
//! [`AssertionOutcome`] carrying the deciding value and its threshold.

use super::result::AssertionOutcome;
use crate::error::Result;
use crate::geometry::rank_truncate;
use crate::linalg::{svd, Matrix, RngStream};
use crate::model::{init_student, Activation, Link, Loss, Noise, Sample, StudentNet, TeacherModel};
use crate::optimize::grad_first_layer;
use crate::population::{
    check_gradient_decomposition, construct_second_layer, hessian_quadform_zero, stein_residual, sup_grid_error,
};

/// Central-difference step for the gradient check.
pub const FD_STEP: f64 = 1e-5;

/// `∇R_λ = (H+λI)W + DU` on a width-3 tanh network, `d = 4`, `k = 2`, squared
/// loss, `λ = 0.1`: residual in units of its combined standard error, must be ≤ 5.
pub fn check_decomposition(seed: u64, n: usize) -> Result<AssertionOutcome> {
    let mut rng = RngStream::new(seed, 0);
    let teacher = TeacherModel::random_orthonormal(2, 4, Link::TanhOfSum, Noise::None, &mut rng)?;
    let mut net = init_student(3, 4, Activation::Tanh, &mut rng)?;
    net.set_a((0..3).map(|_| rng.normal()).collect())?;
    let c = check_gradient_decomposition(&net, &teacher, &Loss::squared(), 0.1, n, &mut rng)?;
    let mut out = AssertionOutcome::at_most(
        format!("gradient decomposition (seed {seed})"),
        c.residual_norm / c.combined_stderr,
        5.0,
    );
    out.detail = format!(
        "{}; residual {:e}, combined stderr {:e}, gradient norm {:e}, n={}",
        out.detail, c.residual_norm, c.combined_stderr, c.gradient_norm, c.n
    );
    Ok(out)
}

fn random_instance(rng: &mut RngStream) -> Result<(StudentNet, Loss, Sample)> {
    let m = 1 + rng.index(6);
    let d = 1 + rng.index(6);
    let act = match rng.index(3) {
        0 => Activation::Tanh,
        1 => Activation::Sigmoid,
        _ => Activation::SoftplusSharp {
            iota: rng.uniform(0.5, 5.0),
        },
    };
    let mut net = init_student(m, d, act, rng)?;
    net.set_a((0..m).map(|_| rng.normal()).collect())?;
    net.set_b((0..m).map(|_| rng.normal()).collect())?;
    let x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let (loss, y) = match rng.index(3) {
        0 => (Loss::squared(), rng.normal()),
        1 => (Loss::huber(), 2.0 * rng.normal()),
        _ => (Loss::logistic(), rng.sign()),
    };
    Ok((net, loss, Sample { x, y, eps: 0.0 }))
}

/// Analytic per-sample gradient vs central differences on `instances` random
/// smooth-activation networks. The value is the worst norm-wise relative error
/// `‖g_fd − g‖_F / max(‖g‖_F, 1e-8)`, which must be below 1e-6.
/// `corrupt` flips the analytic gradient's sign, so the check must then fail.
pub fn check_finite_differences(instances: usize, seed: u64, corrupt: bool) -> Result<AssertionOutcome> {
    let mut rng = RngStream::new(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (net, loss, s) = random_instance(&mut rng)?;
        let mut g = grad_first_layer(&net, &loss, &s)?;
        if corrupt {
            g.scale_in_place(-1.0);
        }
        let (m, d) = (net.m(), net.d());
        let mut fd = Matrix::zeros(m, d);
        for i in 0..m {
            for j in 0..d {
                let mut wp = net.w().clone();
                let mut wm = net.w().clone();
                wp[(i, j)] += FD_STEP;
                wm[(i, j)] -= FD_STEP;
                let lp = loss.value(net.with_w(wp)?.predict(&s.x), s.y);
                let lm = loss.value(net.with_w(wm)?.predict(&s.x), s.y);
                fd[(i, j)] = (lp - lm) / (2.0 * FD_STEP);
            }
        }
        let err = fd.sub(&g)?.frobenius_norm() / g.frobenius_norm().max(1e-8);
        worst = worst.max(err);
    }
    let mut out = AssertionOutcome::below("finite-difference gradient", worst, 1e-6);
    out.detail = format!("{} over {instances} instances, step {FD_STEP}", out.detail);
    Ok(out)
}

/// `E[σ'(⟨w,x⟩+b)x] = E[σ''(⟨w,x⟩+b)]w` for a tanh unit: largest residual
/// coordinate in stderr units, must be ≤ 5.
pub fn check_stein(seed: u64, n: usize) -> Result<AssertionOutcome> {
    let mut rng = RngStream::new(seed, 2);
    let w: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
    let b = rng.normal();
    let r = stein_residual(Activation::Tanh, &w, b, n, &mut rng)?;
    let worst = r.value.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    Ok(AssertionOutcome::at_most("Stein identity", worst / r.stderr, 5.0))
}

/// Curvature of the regularized risk at `W = 0` for `y = K⟨u,x⟩²`, `K = 10`,
/// `λ̃ = 1 + √(9 + 6K²) + 0.01`: negative along `u` and positive orthogonal to
/// it, each by more than 5 standard errors. Returns both outcomes.
pub fn check_negative_curvature(seed: u64, n: usize) -> Result<[AssertionOutcome; 2]> {
    let k: f64 = 10.0;
    let tilde = 1.0 + (9.0 + 6.0 * k * k).sqrt() + 0.01;
    let d = 4;
    let mut rng = RngStream::new(seed, 3);
    let teacher = TeacherModel::random_orthonormal(
        1,
        d,
        Link::Scaled {
            factor: k,
            inner: Box::new(Link::SquareOfSum),
        },
        Noise::None,
        &mut rng,
    )?;
    let u = teacher.u().row(0).to_vec();
    // any unit vector orthogonal to u
    let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let uv: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&u).for_each(|(vi, ui)| *vi -= uv * ui);
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= vn);

    let along = hessian_quadform_zero(&teacher, tilde, 1, &u, n, &mut rng)?;
    let across = hessian_quadform_zero(&teacher, tilde, 1, &v, n, &mut rng)?;
    let mut a = AssertionOutcome::below("curvature along teacher direction (stderr units)", along.value / along.stderr, -5.0);
    a.detail = format!("{}; estimate {} ± {}", a.detail, along.value, along.stderr);
    let mut b = AssertionOutcome::above("curvature orthogonal to teacher (stderr units)", across.value / across.stderr, 5.0);
    b.detail = format!("{}; estimate {} ± {}", b.detail, across.value, across.stderr);
    Ok([a, b])
}

/// Median sup-grid error of the random-bias construction for `f(z) = z²`,
/// `α ≡ 1`, `Δ = 2` at widths `4m` over `m`, across `seeds` seeds; must be ≤ 0.65.
pub fn check_construction(m: usize, seeds: u64) -> Result<AssertionOutcome> {
    let square = |z: f64| (z * z, 2.0 * z, 2.0);
    let delta = 2.0;
    let median_error = |width: usize| -> Result<f64> {
        let alphas = vec![1.0; width];
        let mut errs = (0..seeds)
            .map(|s| {
                let mut rng = RngStream::new(s, width as u64);
                let (a, b) = construct_second_layer(&square, &alphas, delta, 1.0, 1.0, &mut rng)?;
                Ok(sup_grid_error(&square, &a, &b, &alphas, delta, 401))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(super::median(&mut errs))
    };
    let small = median_error(m)?;
    let large = median_error(4 * m)?;
    let mut out = AssertionOutcome::at_most("construction error ratio at 4m vs m", large / small, 0.65);
    out.detail = format!("{}; median error {small} at m={m}, {large} at m={}", out.detail, 4 * m);
    Ok(out)
}

/// `‖W − π_k(W)‖_F² = Σ_{i>k} s_i²` on a random 7×5 matrix with `k = 2`,
/// to 1e-10 relative to `‖W‖_F²`.
pub fn check_eckart_young(seed: u64) -> Result<AssertionOutcome> {
    let mut rng = RngStream::new(seed, 4);
    let w = Matrix::from_fn(7, 5, |_, _| rng.normal());
    let k = 2;
    let resid = w.sub(&rank_truncate(&w, k)?)?.frobenius_norm().powi(2);
    let tail: f64 = svd(&w)?.singular_values[k..].iter().map(|s| s * s).sum();
    let scale = w.frobenius_norm().powi(2).max(1.0);
    Ok(AssertionOutcome::at_most("Eckart-Young residual identity", (resid - tail).abs() / scale, 1e-10))
}

/// Every check above at fixed seeds; `n` Monte-Carlo samples where needed.
pub fn verify_suite(seed: u64, n: usize, corrupt_gradient: bool) -> Result<Vec<AssertionOutcome>> {
    let mut out = vec![
        check_decomposition(seed, n)?,
        check_finite_differences(100, seed, corrupt_gradient)?,
        check_stein(seed, n)?,
    ];
    out.extend(check_negative_curvature(seed, n)?);
    out.push(check_construction(1024, 20)?);
    out.push(check_eckart_young(seed)?);
    Ok(out)
}
