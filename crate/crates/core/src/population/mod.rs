//! Monte-Carlo estimates of population quantities under `x ~ N(0, I_d)`, and
//! the random-bias construction of a second layer that approximates a target.

mod construct;
mod stats;

pub use construct::{construct_second_layer, sup_grid_error, ScalarTarget};
pub use stats::{McEstimate, RunningStats};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix, RngStream};
use crate::model::{Loss, StudentNet, TeacherModel};

/// `E[ℓ(ŷ(x), y)]` from `n` fresh samples.
pub fn mc_population_risk(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    n: usize,
    rng: &mut RngStream,
) -> Result<McEstimate<f64>> {
    risk(net, teacher, loss, n, rng, false)
}

/// `E[ℓ(ŷ(x), y) ∧ τ]` from `n` fresh samples.
pub fn mc_truncated_risk(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    n: usize,
    rng: &mut RngStream,
) -> Result<McEstimate<f64>> {
    risk(net, teacher, loss, n, rng, true)
}

fn risk(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    n: usize,
    rng: &mut RngStream,
    truncated: bool,
) -> Result<McEstimate<f64>> {
    check(net, teacher, n)?;
    let mut stats = RunningStats::new(1);
    let mut x = vec![0.0; net.d()];
    for _ in 0..n {
        let (y, _) = teacher.sample_into(rng, &mut x);
        let yhat = net.predict(&x);
        let v = if truncated {
            loss.truncated(yhat, y)
        } else {
            loss.value(yhat, y)
        };
        stats.push(&[v]);
    }
    Ok(stats.scalar())
}

/// `R_τ(other) − R_τ(base)` with both risks on the same `n` fresh samples;
/// the standard error is that of the per-sample difference.
pub fn mc_truncated_risk_gap(
    base: &StudentNet,
    other: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    n: usize,
    rng: &mut RngStream,
) -> Result<McEstimate<f64>> {
    check(base, teacher, n)?;
    check(other, teacher, n)?;
    let mut stats = RunningStats::new(1);
    let mut x = vec![0.0; teacher.d()];
    for _ in 0..n {
        let (y, _) = teacher.sample_into(rng, &mut x);
        stats.push(&[loss.truncated(other.predict(&x), y) - loss.truncated(base.predict(&x), y)]);
    }
    Ok(stats.scalar())
}

fn check(net: &StudentNet, teacher: &TeacherModel, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n}")));
    }
    if net.d() != teacher.d() {
        return Err(Error::Shape(format!(
            "teacher dimension {} differs from student dimension {}",
            teacher.d(),
            net.d()
        )));
    }
    Ok(())
}

/// `∇R_λ(W) = E[∇_W ℓ] + λW` by averaging per-sample gradients.
pub fn mc_population_gradient(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    lambda: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<McEstimate<Matrix>> {
    Ok(gradient_and_risk(net, teacher, loss, lambda, n, rng)?.0)
}

/// Gradient estimate together with the risk estimate on the same samples.
pub(crate) fn gradient_and_risk(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    lambda: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<(McEstimate<Matrix>, McEstimate<f64>)> {
    check(net, teacher, n)?;
    let (m, d) = (net.m(), net.d());
    let act = net.activation();
    let mut stats = RunningStats::new(m * d);
    let mut risk = RunningStats::new(1);
    let mut x = vec![0.0; d];
    let mut g = vec![0.0; m * d];
    for _ in 0..n {
        let (y, _) = teacher.sample_into(rng, &mut x);
        let mut yhat = 0.0;
        let mut coef = vec![0.0; m];
        for (j, w) in net.w().iter_rows().enumerate() {
            let (v, dv) = act.value_and_deriv(dot(w, &x) + net.b()[j]);
            yhat += net.a()[j] * v;
            coef[j] = net.a()[j] * dv;
        }
        let d1 = loss.d1(yhat, y);
        risk.push(&[loss.value(yhat, y)]);
        for j in 0..m {
            let c = d1 * coef[j];
            for k in 0..d {
                g[j * d + k] = c * x[k];
            }
        }
        stats.push(&g);
    }
    let mut est = stats.matrix(m, d)?;
    est.value.add_scaled(lambda, net.w())?;
    Ok((est, risk.scalar()))
}

/// Monte-Carlo estimates of the matrices `H` (m × m) and `D` (m × k) with
/// `∇R_λ(W) = (H + λI)W + DU`:
///
/// `H = E[∂²₁ℓ (a∘σ')(a∘σ')ᵀ + ∂₁ℓ diag(a∘σ'')]`, `D = E[∂²₁₂ℓ (a∘σ') ∇gᵀ]`.
///
/// For ReLU the `σ''` term is zero. Noise is additive, so `∇g` is the
/// gradient of the clean link at `Ux`.
#[derive(Clone, Debug)]
pub struct HdDecomposition {
    pub h: McEstimate<Matrix>,
    pub d: McEstimate<Matrix>,
}

pub fn estimate_hd(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    n: usize,
    rng: &mut RngStream,
) -> Result<HdDecomposition> {
    let mut acc = HdAccumulator::new(net, teacher, loss, n)?;
    for _ in 0..n {
        acc.push_sample(rng)?;
    }
    Ok(HdDecomposition {
        h: acc.h.matrix(acc.m, acc.m)?,
        d: acc.d.matrix(acc.m, acc.k)?,
    })
}

/// Result of checking `∇R_λ = (H+λI)W + DU` on common samples.
#[derive(Clone, Debug)]
pub struct DecompositionCheck {
    /// `‖(Ĥ+λI)W + D̂U − ∇̂R_λ‖_F`.
    pub residual_norm: f64,
    /// `√(Σ_ij se_ij²)` of the per-sample residual, the natural noise scale of `residual_norm`.
    pub combined_stderr: f64,
    pub gradient_norm: f64,
    pub n: usize,
}

/// Estimates `H`, `D` and the gradient on the same `n` samples and reports
/// how far the two sides of the decomposition differ.
pub fn check_gradient_decomposition(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    lambda: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<DecompositionCheck> {
    let mut acc = HdAccumulator::new(net, teacher, loss, n)?;
    let (m, d, k) = (acc.m, net.d(), acc.k);
    let w = net.w();
    let u = teacher.u();
    let mut residual = RunningStats::new(m * d);
    let mut grad = RunningStats::new(m * d);
    let mut r = vec![0.0; m * d];
    let mut g = vec![0.0; m * d];
    for _ in 0..n {
        let s = acc.push_sample(rng)?;
        // per-sample H_i W + D_i U − ∇ℓ_i; the λW terms cancel
        for j in 0..m {
            let gj = s.d1 * s.av[j];
            for c in 0..d {
                let mut hw = 0.0;
                for l in 0..m {
                    hw += s.d11 * s.av[j] * s.av[l] * w[(l, c)];
                }
                hw += s.d1 * s.asec[j] * w[(j, c)];
                let mut du = 0.0;
                for l in 0..k {
                    du += s.d12 * s.av[j] * s.grad_g[l] * u[(l, c)];
                }
                g[j * d + c] = gj * s.x[c];
                r[j * d + c] = hw + du - g[j * d + c];
            }
        }
        residual.push(&r);
        grad.push(&g);
    }
    let res = residual.matrix(m, d)?;
    let mut gr = grad.matrix(m, d)?.value;
    gr.add_scaled(lambda, w)?;
    Ok(DecompositionCheck {
        residual_norm: res.value.frobenius_norm(),
        combined_stderr: residual.combined_stderr(),
        gradient_norm: gr.frobenius_norm(),
        n,
    })
}

struct HdSample {
    x: Vec<f64>,
    av: Vec<f64>,
    asec: Vec<f64>,
    grad_g: Vec<f64>,
    d1: f64,
    d11: f64,
    d12: f64,
}

struct HdAccumulator<'a> {
    net: &'a StudentNet,
    teacher: &'a TeacherModel,
    loss: &'a Loss,
    m: usize,
    k: usize,
    h: RunningStats,
    d: RunningStats,
    hbuf: Vec<f64>,
    dbuf: Vec<f64>,
    s: HdSample,
    z: Vec<f64>,
}

impl<'a> HdAccumulator<'a> {
    fn new(net: &'a StudentNet, teacher: &'a TeacherModel, loss: &'a Loss, n: usize) -> Result<Self> {
        check(net, teacher, n)?;
        let (m, k) = (net.m(), teacher.k());
        // fail early if the link has no gradient
        teacher.link().gradient(&vec![0.0; k])?;
        Ok(HdAccumulator {
            net,
            teacher,
            loss,
            m,
            k,
            h: RunningStats::new(m * m),
            d: RunningStats::new(m * k),
            hbuf: vec![0.0; m * m],
            dbuf: vec![0.0; m * k],
            s: HdSample {
                x: vec![0.0; net.d()],
                av: vec![0.0; m],
                asec: vec![0.0; m],
                grad_g: vec![0.0; k],
                d1: 0.0,
                d11: 0.0,
                d12: 0.0,
            },
            z: vec![0.0; k],
        })
    }

    fn push_sample(&mut self, rng: &mut RngStream) -> Result<&HdSample> {
        let (m, k) = (self.m, self.k);
        let net = self.net;
        let s = &mut self.s;
        let (y, _) = self.teacher.sample_into(rng, &mut s.x);
        self.teacher.project_into(&s.x, &mut self.z);
        s.grad_g = self.teacher.link().gradient(&self.z)?;
        let act = net.activation();
        let mut yhat = 0.0;
        for (j, w) in net.w().iter_rows().enumerate() {
            let (v, d1, d2) = act.eval(dot(w, &s.x) + net.b()[j]);
            yhat += net.a()[j] * v;
            s.av[j] = net.a()[j] * d1;
            s.asec[j] = net.a()[j] * d2;
        }
        let e = self.loss.eval(yhat, y);
        s.d1 = e.d1;
        s.d11 = e.d11;
        s.d12 = e.d12;
        for i in 0..m {
            for j in 0..m {
                self.hbuf[i * m + j] = e.d11 * s.av[i] * s.av[j];
            }
            self.hbuf[i * m + i] += e.d1 * s.asec[i];
            for l in 0..k {
                self.dbuf[i * k + l] = e.d12 * s.av[i] * s.grad_g[l];
            }
        }
        self.h.push(&self.hbuf);
        self.d.push(&self.dbuf);
        Ok(&self.s)
    }
}

/// `vᵀ(−E[y xxᵀ] + λ̃ I)v / m`, the curvature of the regularized risk at
/// `W = 0` along a row direction `v`, for networks whose prediction has
/// vanishing value and slope at zero and unit curvature.
pub fn hessian_quadform_zero(
    teacher: &TeacherModel,
    tilde_lambda: f64,
    m: usize,
    v: &[f64],
    n: usize,
    rng: &mut RngStream,
) -> Result<McEstimate<f64>> {
    if v.len() != teacher.d() {
        return Err(Error::Shape(format!(
            "direction has dimension {}, teacher {}",
            v.len(),
            teacher.d()
        )));
    }
    let vv = dot(v, v);
    if vv == 0.0 {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    if n < 2 || m == 0 {
        return Err(Error::InvalidArgument(format!("need n >= 2 and m >= 1, got n={n}, m={m}")));
    }
    let mf = m as f64;
    let mut stats = RunningStats::new(1);
    let mut x = vec![0.0; teacher.d()];
    for _ in 0..n {
        let (y, _) = teacher.sample_into(rng, &mut x);
        let p = dot(v, &x);
        stats.push(&[(tilde_lambda * vv - y * p * p) / mf]);
    }
    Ok(stats.scalar())
}

/// Per-sample residual of the Gaussian integration-by-parts identity
/// `E[σ'(⟨w,x⟩+b) x] = E[σ''(⟨w,x⟩+b)] w`; its mean should vanish.
pub fn stein_residual(
    act: crate::model::Activation,
    w: &[f64],
    b: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<McEstimate<Vec<f64>>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n}")));
    }
    let d = w.len();
    let mut stats = RunningStats::new(d);
    let mut x = vec![0.0; d];
    let mut r = vec![0.0; d];
    for _ in 0..n {
        rng.fill_normal(&mut x);
        let (_, d1, d2) = act.eval(dot(w, &x) + b);
        for k in 0..d {
            r[k] = d1 * x[k] - d2 * w[k];
        }
        stats.push(&r);
    }
    Ok(stats.vector())
}
