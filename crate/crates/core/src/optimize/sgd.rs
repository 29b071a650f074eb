use std::io::Write;

use serde::{Deserialize, Serialize};

use super::grad::Workspace;
use super::schedule::StepSchedule;
use crate::error::{Error, Result};
use crate::geometry::{mean_alignment, perp_metric, SubspaceBasis};
use crate::linalg::{RngStream, Matrix};
use crate::model::{Loss, Sample, StudentNet, TeacherModel};

/// Number of recent per-sample losses averaged in `emp_risk_window`.
pub const RISK_WINDOW: usize = 256;

/// `‖W‖_F` above this aborts training.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Stream id for training data; evaluation draws use other ids.
pub const DATA_STREAM: u64 = 0;
const PROBE_STREAM: u64 = 0x5052_4f42;

pub const TRAJECTORY_HEADER: &str = "t,eta,perp_metric,mean_alignment,fro_norm_w,emp_risk_window";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub schedule: StepSchedule,
    /// Weight decay `λ = λ̃/m`.
    pub lambda: f64,
    pub tilde_lambda: f64,
    pub gamma: f64,
    /// Number of updates `T`.
    pub steps: usize,
    pub seed: u64,
    pub checkpoint_every: usize,
}

impl SgdConfig {
    /// Config with `λ = λ̃/m` and the default checkpoint cadence `⌈T/500⌉`.
    pub fn new(schedule: StepSchedule, tilde_lambda: f64, seed: u64) -> Result<Self> {
        let cfg = SgdConfig {
            schedule,
            lambda: tilde_lambda / schedule.m as f64,
            tilde_lambda,
            gamma: schedule.gamma,
            steps: schedule.horizon,
            seed,
            checkpoint_every: default_checkpoint_every(schedule.horizon),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidArgument("checkpoint_every must be >= 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        let m = self.schedule.m as f64;
        if (self.lambda * m - self.tilde_lambda).abs() > 1e-12 * self.tilde_lambda.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda*m = {} does not match tilde_lambda = {}",
                self.lambda * m,
                self.tilde_lambda
            )));
        }
        if self.steps > self.schedule.horizon {
            return Err(Error::InvalidArgument(format!(
                "{} steps exceed schedule horizon {}",
                self.steps, self.schedule.horizon
            )));
        }
        Ok(())
    }
}

pub fn default_checkpoint_every(steps: usize) -> usize {
    steps.div_ceil(500).max(1)
}

/// Metrics of the iterate after `t` updates. `eta` is the step size of the
/// update that produced it (`η_0` for `t = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t: usize,
    pub eta: f64,
    pub perp_metric: f64,
    pub mean_alignment: f64,
    pub fro_norm_w: f64,
    pub emp_risk_window: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrajectory {
    pub rows: Vec<MetricsRow>,
}

impl TrainTrajectory {
    pub fn first(&self) -> Option<&MetricsRow> {
        self.rows.first()
    }

    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRAJECTORY_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.t, r.eta, r.perp_metric, r.mean_alignment, r.fro_norm_w, r.emp_risk_window
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

pub(crate) fn metrics_row(
    t: usize,
    eta: f64,
    w: &Matrix,
    basis: &SubspaceBasis,
    risk: f64,
) -> Result<MetricsRow> {
    Ok(MetricsRow {
        t,
        eta,
        perp_metric: perp_metric(w, basis)?,
        mean_alignment: mean_alignment(w, basis)?,
        fro_norm_w: w.frobenius_norm(),
        emp_risk_window: risk,
    })
}

/// Online SGD with weight decay on the first layer:
/// `W ← (1 − η_tλ)W − η_t ∇_W ℓ(ŷ(x_t), y_t)` with one fresh teacher sample per step.
/// The second layer and biases are left untouched.
pub fn sgd_train_first_layer(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    cfg: &SgdConfig,
    basis: &SubspaceBasis,
) -> Result<(StudentNet, TrainTrajectory)> {
    let (net, traj, _) = train(net, teacher, loss, cfg, basis, false)?;
    Ok((net, traj))
}

/// As [`sgd_train_first_layer`], also returning the samples consumed, in order.
pub fn sgd_train_first_layer_recording(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    cfg: &SgdConfig,
    basis: &SubspaceBasis,
) -> Result<(StudentNet, TrainTrajectory, Vec<Sample>)> {
    train(net, teacher, loss, cfg, basis, true)
}

fn train(
    net: &StudentNet,
    teacher: &TeacherModel,
    loss: &Loss,
    cfg: &SgdConfig,
    basis: &SubspaceBasis,
    record: bool,
) -> Result<(StudentNet, TrainTrajectory, Vec<Sample>)> {
    cfg.validate()?;
    loss.validate()?;
    if teacher.d() != net.d() {
        return Err(Error::Shape(format!(
            "teacher dimension {} differs from student dimension {}",
            teacher.d(),
            net.d()
        )));
    }
    if cfg.schedule.m != net.m() {
        return Err(Error::InvalidArgument(format!(
            "schedule built for width {}, network has {}",
            cfg.schedule.m,
            net.m()
        )));
    }

    let (m, d) = (net.m(), net.d());
    let mut net = net.clone();
    let mut rng = RngStream::new(cfg.seed, DATA_STREAM);
    let mut ws = Workspace::new(m);
    let mut x = vec![0.0; d];
    let mut window = [0.0; RISK_WINDOW];
    let mut filled = 0usize;
    let mut samples = Vec::with_capacity(if record { cfg.steps } else { 0 });

    let mut traj = TrainTrajectory::default();
    let eta0 = if cfg.steps > 0 { cfg.schedule.eta(0) } else { 0.0 };
    let initial_risk = probe_risk(&net, teacher, loss, cfg.seed);
    traj.rows.push(metrics_row(0, eta0, net.w(), basis, initial_risk)?);

    let a = net.a().to_vec();
    for t in 0..cfg.steps {
        let eta = cfg.schedule.eta(t);
        let (y, eps) = teacher.sample_into(&mut rng, &mut x);
        let (_, d1, value) = ws.forward(&net, &x, loss, y);
        window[t % RISK_WINDOW] = value;
        filled = (filled + 1).min(RISK_WINDOW);
        if record {
            samples.push(Sample { x: x.clone(), y, eps });
        }

        let decay = 1.0 - eta * cfg.lambda;
        let mut norm_sq = 0.0;
        let w = net.w_mut();
        for (j, (aj, sj)) in a.iter().zip(&ws.dsigma).enumerate() {
            let c = eta * d1 * aj * sj;
            let row = w.row_mut(j);
            for (wi, xi) in row.iter_mut().zip(&x) {
                *wi = decay * *wi - c * xi;
                norm_sq += *wi * *wi;
            }
        }
        if !norm_sq.is_finite() {
            return Err(Error::Divergence {
                step: t,
                reason: "non-finite weights".into(),
            });
        }
        if norm_sq > DIVERGENCE_NORM * DIVERGENCE_NORM {
            return Err(Error::Divergence {
                step: t,
                reason: format!("‖W‖_F = {:e} exceeds {DIVERGENCE_NORM:e}", norm_sq.sqrt()),
            });
        }

        let done = t + 1;
        if done % cfg.checkpoint_every == 0 || done == cfg.steps {
            let risk = window[..filled].iter().sum::<f64>() / filled as f64;
            traj.rows.push(metrics_row(done, eta, net.w(), basis, risk)?);
        }
    }
    Ok((net, traj, samples))
}

/// Mean loss on `RISK_WINDOW` draws from a stream disjoint from the training data.
fn probe_risk(net: &StudentNet, teacher: &TeacherModel, loss: &Loss, seed: u64) -> f64 {
    let mut rng = RngStream::new(seed, PROBE_STREAM);
    let mut x = vec![0.0; net.d()];
    let mut total = 0.0;
    for _ in 0..RISK_WINDOW {
        let (y, _) = teacher.sample_into(&mut rng, &mut x);
        total += loss.value(net.predict(&x), y);
    }
    total / RISK_WINDOW as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_student, Activation, Link, Noise};
    use crate::optimize::{select_weight_decay, WeightDecayRule};

    fn setup(seed: u64) -> (StudentNet, TeacherModel, SubspaceBasis) {
        let mut rng = RngStream::new(seed, 99);
        let net = init_student(8, 4, Activation::Relu, &mut rng).unwrap();
        let teacher = TeacherModel::single_index(&[1.0, 0.0, 0.0, 0.0], Link::TanhOfSum, Noise::None).unwrap();
        let basis = SubspaceBasis::from_u(teacher.u()).unwrap();
        (net, teacher, basis)
    }

    #[test]
    fn zero_step_size_leaves_weights_unchanged() {
        let (net, teacher, basis) = setup(1);
        let sched = StepSchedule::constant(0.0, 8, 0.5, 100).unwrap();
        let cfg = SgdConfig::new(sched, 1.0, 3).unwrap();
        let (out, traj) = sgd_train_first_layer(&net, &teacher, &Loss::huber(), &cfg, &basis).unwrap();
        assert_eq!(out.w(), net.w());
        let p0 = traj.rows[0].perp_metric;
        assert!(traj.rows.iter().all(|r| r.perp_metric == p0));
    }

    #[test]
    fn pure_decay_when_second_layer_is_zero() {
        let (mut net, teacher, basis) = setup(2);
        net.set_a(vec![0.0; 8]).unwrap();
        let sched = StepSchedule::decreasing(8, 0.5, 20, 50).unwrap();
        let cfg = SgdConfig::new(sched, 1.5, 4).unwrap();
        let mut expect = net.w().frobenius_norm();
        for t in 0..50 {
            expect *= 1.0 - sched.step_size(t).unwrap() * cfg.lambda;
        }
        let (out, _) = sgd_train_first_layer(&net, &teacher, &Loss::huber(), &cfg, &basis).unwrap();
        assert!((out.w().frobenius_norm() - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn runs_are_reproducible_and_rows_increase() {
        let (net, teacher, basis) = setup(3);
        let (_, tl) = select_weight_decay(WeightDecayRule::Relu { gamma: 0.5 }, 8).unwrap();
        let sched = StepSchedule::decreasing(8, 0.5, 12, 2000).unwrap();
        let cfg = SgdConfig::new(sched, tl, 5).unwrap();
        let (a, ta) = sgd_train_first_layer(&net, &teacher, &Loss::huber(), &cfg, &basis).unwrap();
        let (b, tb) = sgd_train_first_layer(&net, &teacher, &Loss::huber(), &cfg, &basis).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.to_csv_string(), tb.to_csv_string());
        assert!(ta.rows.windows(2).all(|w| w[0].t < w[1].t));
        assert_eq!(ta.last().unwrap().t, 2000);
        assert_eq!(a.a(), net.a());
        assert_eq!(a.b(), net.b());
        assert!(ta.last().unwrap().perp_metric < ta.first().unwrap().perp_metric);
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let (net, teacher, basis) = setup(4);
        let sched = StepSchedule::constant(1.0, 8, 0.5, 100).unwrap();
        // weight decay with ηλ = 3 flips and triples the weights every step
        let cfg = SgdConfig::new(sched, 24.0, 1).unwrap();
        match sgd_train_first_layer(&net, &teacher, &Loss::huber(), &cfg, &basis) {
            Err(Error::Divergence { step, .. }) => assert!(step < 100),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let sched = StepSchedule::constant(0.1, 4, 0.5, 10).unwrap();
        let mut cfg = SgdConfig::new(sched, 2.0, 1).unwrap();
        assert_eq!(cfg.lambda, 0.5);
        cfg.lambda = 0.4;
        assert!(cfg.validate().is_err());
        cfg.lambda = 0.5;
        cfg.checkpoint_every = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_header() {
        let t = TrainTrajectory {
            rows: vec![MetricsRow {
                t: 0,
                eta: 0.5,
                perp_metric: 1.0,
                mean_alignment: 0.25,
                fro_norm_w: 2.0,
                emp_risk_window: 0.125,
            }],
        };
        assert_eq!(t.to_csv_string(), format!("{TRAJECTORY_HEADER}\n0,0.5,1,0.25,2,0.125\n"));
    }
}
