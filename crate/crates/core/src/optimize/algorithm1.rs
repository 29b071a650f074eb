use serde::{Deserialize, Serialize};

use super::schedule::{select_weight_decay, StepSchedule, WeightDecayRule};
use super::second_layer::{train_on_cache, FeatureCache};
use super::sgd::{sgd_train_first_layer_recording, SgdConfig, TrainTrajectory};
use crate::error::{Error, Result};
use crate::geometry::{alignment, SubspaceBasis};
use crate::linalg::{norm, RngStream};
use crate::model::{huber, init_symmetric, Activation, Loss, LossKind, Sample, StudentNet, TeacherModel};

const INIT_STREAM: u64 = 1;
const BIAS_STREAM: u64 = 2;
const SECOND_LAYER_STREAM: u64 = 3;
const TEST_STREAM: u64 = 4;
const SELECT_STREAM: u64 = 16;

/// Default confidence level in `Δ = √log(T/δ)`.
pub const DEFAULT_DELTA_CONF: f64 = 0.01;

/// `√log(T/δ)`, the half-width of the random bias range.
pub fn bias_range(steps: usize, delta_conf: f64) -> f64 {
    (steps as f64 / delta_conf).ln().max(0.0).sqrt()
}

/// How the second-layer weight decay `λ'` is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaPrime {
    Fixed { value: f64 },
    /// Train on the first 80% of the stored samples for each candidate, keep
    /// the one with the lowest truncated risk on the remaining 20%, then
    /// retrain on everything.
    Grid { values: Vec<f64> },
}

impl Default for LambdaPrime {
    fn default() -> Self {
        LambdaPrime::Grid {
            values: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Algorithm1Config {
    /// Width `m`.
    pub m: usize,
    /// Shared initial second-layer weight `a_j = a0`.
    pub a0: f64,
    /// Shared initial bias `b_j = b0`.
    pub b0: f64,
    pub gamma: f64,
    pub t_star: usize,
    /// Phase-1 samples `T`.
    pub steps: usize,
    /// Phase-2 iterations `T'`.
    pub steps_prime: usize,
    pub lambda_prime: LambdaPrime,
    /// Half-width `Δ` of the resampled biases.
    pub bias_range: f64,
    pub seed: u64,
    /// Fresh samples used for the reported risks.
    pub test_samples: usize,
}

impl Algorithm1Config {
    /// Defaults: `m·a0 = 0.5`, `b0 = 1`, `γ = 0.25`, `T' = 50T`,
    /// `Δ = √log(T/0.01)`, `t*` from [`default_t_star`], `λ'` by grid search.
    pub fn new(m: usize, steps: usize, seed: u64) -> Self {
        let a0 = 0.5 / m.max(1) as f64;
        let b0 = 1.0;
        let gamma = 0.25;
        let tilde = select_weight_decay(WeightDecayRule::SingleIndex { gamma, a: a0, b: b0 }, m.max(1))
            .map(|(_, t)| t)
            .unwrap_or(1.0);
        Algorithm1Config {
            m,
            a0,
            b0,
            gamma,
            t_star: default_t_star(tilde, gamma),
            steps,
            steps_prime: 50 * steps,
            lambda_prime: LambdaPrime::default(),
            bias_range: bias_range(steps, DEFAULT_DELTA_CONF),
            seed,
            test_samples: 100_000,
        }
    }

    /// `λ = γ/m + (2a0/b0)√(2/(eπ))` and `λ̃ = mλ`.
    pub fn weight_decay(&self) -> Result<(f64, f64)> {
        select_weight_decay(
            WeightDecayRule::SingleIndex {
                gamma: self.gamma,
                a: self.a0,
                b: self.b0,
            },
            self.m,
        )
    }
}

/// `t* = ⌈4λ̃/γ⌉`, which keeps the first decay factor `1 − η_0λ` above 1/2.
pub fn default_t_star(tilde_lambda: f64, gamma: f64) -> usize {
    (4.0 * tilde_lambda / gamma).ceil().max(1.0) as usize
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Algorithm1Diagnostics {
    /// `⟨w, u⟩/‖w‖` for the shared phase-1 direction.
    pub alignment: f64,
    /// `‖w⊥‖` of the shared phase-1 direction.
    pub perp_norm: f64,
    pub w_norm: f64,
    pub rows_identical: bool,
    pub lambda: f64,
    pub tilde_lambda: f64,
    pub lambda_prime: f64,
    /// `(λ', held-out truncated risk)` for each grid candidate.
    pub lambda_prime_scores: Vec<(f64, f64)>,
    pub bias_range: f64,
    /// Truncated risk on fresh samples.
    pub test_truncated_risk: f64,
    /// Mean Huber loss of the noise alone on the same samples.
    pub noise_floor: f64,
    /// `test_truncated_risk − noise_floor`.
    pub excess_truncated_risk: f64,
    pub excess_stderr: f64,
    pub trajectory: TrainTrajectory,
}

/// Two-phase training of a ReLU network on a single-index teacher with Huber loss:
/// first-layer SGD with weight decay from a symmetric start, random biases in
/// `(−Δ, Δ)`, then second-layer SGD on the stored phase-1 samples.
pub fn algorithm1(
    teacher: &TeacherModel,
    cfg: &Algorithm1Config,
    loss: &Loss,
) -> Result<(StudentNet, Algorithm1Diagnostics)> {
    check_preconditions(teacher, cfg, loss)?;
    let (m, d) = (cfg.m, teacher.d());
    let (lambda, tilde) = cfg.weight_decay()?;

    let mut init_rng = RngStream::new(cfg.seed, INIT_STREAM);
    let net0 = init_symmetric(m, d, cfg.a0, cfg.b0, Activation::Relu, &mut init_rng)?;
    let basis = SubspaceBasis::from_u(teacher.u())?;
    let sched = StepSchedule::decreasing(m, cfg.gamma, cfg.t_star, cfg.steps)?;
    let sgd = SgdConfig::new(sched, tilde, cfg.seed)?;
    debug_assert!((sgd.lambda - lambda).abs() <= 1e-12 * lambda);
    let (mut net, trajectory, samples) = sgd_train_first_layer_recording(&net0, teacher, loss, &sgd, &basis)?;

    let w = net.w().row(0).to_vec();
    let rows_identical = (1..m).all(|j| net.w().row(j) == w.as_slice());
    let u = teacher.u().row(0);
    let w_norm = norm(&w);
    let align = if w_norm > 0.0 { alignment(&w, u)? } else { 0.0 };
    let perp_norm = basis.perp_norm_sq(&w).sqrt();

    let mut bias_rng = RngStream::new(cfg.seed, BIAS_STREAM);
    let b: Vec<f64> = (0..m).map(|_| bias_rng.uniform(-cfg.bias_range, cfg.bias_range)).collect();
    net.set_b(b)?;

    let (lambda_prime, scores) = choose_lambda_prime(&net, &samples, loss, cfg)?;
    let cache = FeatureCache::new(&net, samples.iter().map(|s| &s.x))?;
    let ys: Vec<f64> = samples.iter().map(|s| s.y).collect();
    let mut rng = RngStream::new(cfg.seed, SECOND_LAYER_STREAM);
    let a = train_on_cache(&cache, &ys, net.a(), net.b(), loss, lambda_prime, cfg.steps_prime, &mut rng)?;
    net.set_a(a)?;

    let test = excess_truncated_risk(&net, teacher, loss, cfg.test_samples, cfg.seed)?;
    Ok((
        net,
        Algorithm1Diagnostics {
            alignment: align,
            perp_norm,
            w_norm,
            rows_identical,
            lambda,
            tilde_lambda: tilde,
            lambda_prime,
            lambda_prime_scores: scores,
            bias_range: cfg.bias_range,
            test_truncated_risk: test.risk,
            noise_floor: test.noise_floor,
            excess_truncated_risk: test.excess,
            excess_stderr: test.stderr,
            trajectory,
        },
    ))
}

fn check_preconditions(teacher: &TeacherModel, cfg: &Algorithm1Config, loss: &Loss) -> Result<()> {
    if loss.kind != LossKind::Huber {
        return Err(Error::Precondition(format!("loss must be Huber, got {:?}", loss.kind)));
    }
    if teacher.k() != 1 {
        return Err(Error::Precondition(format!("teacher must be single-index, has k={}", teacher.k())));
    }
    let un = norm(teacher.u().row(0));
    if (un - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("index vector must have unit norm, has {un}")));
    }
    let f0 = teacher.link().value(&[0.0]);
    if !(f0.abs() < 1.0) {
        return Err(Error::Precondition(format!("|f(0)| must be < 1, got {}", f0.abs())));
    }
    if cfg.m == 0 {
        return Err(Error::Precondition("width must be >= 1".into()));
    }
    if !(cfg.a0 > 0.0) {
        return Err(Error::Precondition(format!("a0 must be > 0, got {}", cfg.a0)));
    }
    if !(cfg.b0 > 0.0) {
        return Err(Error::Precondition(format!("b0 must be > 0, got {}", cfg.b0)));
    }
    let mab = cfg.m as f64 * cfg.a0 * cfg.b0;
    if !(mab < 1.0 - f0.abs()) {
        return Err(Error::Precondition(format!(
            "m*a0*b0 = {mab} must be below 1 - |f(0)| = {}",
            1.0 - f0.abs()
        )));
    }
    if !(cfg.gamma > 0.0) {
        return Err(Error::Precondition(format!("gamma must be > 0, got {}", cfg.gamma)));
    }
    if !(cfg.bias_range > 0.0) {
        return Err(Error::Precondition(format!("bias range must be > 0, got {}", cfg.bias_range)));
    }
    if cfg.steps == 0 {
        return Err(Error::Precondition("need at least one phase-1 sample".into()));
    }
    match &cfg.lambda_prime {
        LambdaPrime::Fixed { value } if !(*value > 0.0) => {
            return Err(Error::Precondition(format!("lambda' must be > 0, got {value}")))
        }
        LambdaPrime::Grid { values } if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) => {
            return Err(Error::Precondition("lambda' grid must be non-empty and positive".into()))
        }
        _ => {}
    }
    Ok(())
}

fn choose_lambda_prime(
    net: &StudentNet,
    samples: &[Sample],
    loss: &Loss,
    cfg: &Algorithm1Config,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let values = match &cfg.lambda_prime {
        LambdaPrime::Fixed { value } => return Ok((*value, Vec::new())),
        LambdaPrime::Grid { values } => values,
    };
    let split = (samples.len() * 4 / 5).max(1);
    let (train, held) = samples.split_at(split);
    if held.is_empty() {
        return Ok((values[0], Vec::new()));
    }
    let cache = FeatureCache::new(net, train.iter().map(|s| &s.x))?;
    let ys: Vec<f64> = train.iter().map(|s| s.y).collect();
    let held_cache = FeatureCache::new(net, held.iter().map(|s| &s.x))?;
    let mut scores = Vec::with_capacity(values.len());
    for (idx, &lp) in values.iter().enumerate() {
        let mut rng = RngStream::new(cfg.seed, SELECT_STREAM + idx as u64);
        let a = train_on_cache(&cache, &ys, net.a(), net.b(), loss, lp, cfg.steps_prime, &mut rng)?;
        let risk = held
            .iter()
            .enumerate()
            .map(|(i, s)| loss.truncated(held_cache.predict(i, &a, net.b()), s.y))
            .sum::<f64>()
            / held.len() as f64;
        scores.push((lp, risk));
    }
    let best = scores
        .iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|s| s.0)
        .expect("grid is non-empty");
    Ok((best, scores))
}

pub struct ExcessRisk {
    pub risk: f64,
    pub noise_floor: f64,
    pub excess: f64,
    pub stderr: f64,
}

/// Truncated risk minus the mean Huber loss of the noise, both on the same
/// `n` fresh samples; `stderr` is that of the paired difference.
pub fn excess_truncated_risk(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    n: usize,
    seed: u64,
) -> Result<ExcessRisk> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 test samples, got {n}")));
    }
    let mut rng = RngStream::new(seed, TEST_STREAM);
    let mut stats = crate::population::RunningStats::new(3);
    let mut x = vec![0.0; teacher.d()];
    for _ in 0..n {
        let (y, eps) = teacher.sample_into(&mut rng, &mut x);
        let r = loss.truncated(net.predict(&x), y);
        let floor = huber(eps);
        stats.push(&[r, floor, r - floor]);
    }
    let mean = stats.mean();
    Ok(ExcessRisk {
        risk: mean[0],
        noise_floor: mean[1],
        excess: mean[2],
        stderr: stats.stderr()[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Link, Noise};

    fn linear_teacher(d: usize) -> TeacherModel {
        let mut u = vec![0.0; d];
        u[0] = 1.0;
        TeacherModel::single_index(&u, Link::Linear, Noise::None).unwrap()
    }

    #[test]
    fn bias_range_value() {
        assert!((bias_range(10_000, 0.01) - 3.7169).abs() < 1e-4);
    }

    #[test]
    fn preconditions_are_named() {
        let t = linear_teacher(5);
        let cfg = Algorithm1Config::new(10, 100, 1);
        let e = algorithm1(&t, &cfg, &Loss::squared()).unwrap_err().to_string();
        assert!(e.contains("Huber"), "{e}");
        let mut bad = cfg.clone();
        bad.a0 = 0.2;
        let e = algorithm1(&t, &bad, &Loss::huber()).unwrap_err().to_string();
        assert!(e.contains("m*a0*b0"), "{e}");
        let shifted = TeacherModel::single_index(
            &[1.0, 0.0, 0.0, 0.0, 0.0],
            Link::Custom(std::sync::Arc::new(Shift)),
            Noise::None,
        )
        .unwrap();
        let e = algorithm1(&shifted, &cfg, &Loss::huber()).unwrap_err().to_string();
        assert!(e.contains("|f(0)|"), "{e}");
    }

    struct Shift;
    impl crate::model::LinkFunction for Shift {
        fn name(&self) -> &str {
            "shift"
        }
        fn value(&self, z: &[f64]) -> f64 {
            z[0] + 2.0
        }
    }

    #[test]
    fn linear_target_is_aligned_and_rows_stay_identical() {
        let t = linear_teacher(10);
        let mut cfg = Algorithm1Config::new(50, 5000, 3);
        cfg.lambda_prime = LambdaPrime::Fixed { value: 0.01 };
        cfg.steps_prime = 20_000;
        cfg.test_samples = 2000;
        let (net, diag) = algorithm1(&t, &cfg, &Loss::huber()).unwrap();
        assert!(diag.rows_identical);
        assert!(diag.alignment.abs() >= 0.9, "{}", diag.alignment);
        assert!(net.b().iter().all(|b| b.abs() < cfg.bias_range));
        assert!(diag.excess_truncated_risk.is_finite());
    }
}
