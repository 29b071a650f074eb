use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Activation, Link, Loss, LossKind, Noise};
use crate::optimize::LambdaPrime;

/// Which experiment to run and its kind-specific knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentKind {
    /// Plain first-layer SGD; no assertions beyond finishing without divergence.
    Train,
    /// Monte-Carlo gradient descent checked against the envelope
    /// `envelope · (1 − η̃γ)^t · perp_metric(0)`.
    Pgd {
        /// `η̃ = eta_factor / λ̃`.
        #[serde(default = "default_eta_factor")]
        eta_factor: f64,
        #[serde(default = "default_envelope")]
        envelope: f64,
    },
    FigureOne {
        #[serde(default = "default_max_final_perp")]
        max_final_perp: f64,
    },
    /// Paired runs with and without weight decay from the same start.
    NoDecayControl {
        #[serde(default = "default_min_retained")]
        min_retained: f64,
    },
    RateSweep {
        axis: SweepAxis,
        values: Vec<usize>,
        slope_min: f64,
        slope_max: f64,
        #[serde(default = "default_bootstrap")]
        bootstrap: usize,
    },
    Learnability {
        #[serde(default = "default_prime_factor")]
        steps_prime_factor: usize,
        #[serde(default)]
        lambda_prime: LambdaPrime,
        #[serde(default = "default_delta_conf")]
        delta_conf: f64,
        #[serde(default = "default_test_samples")]
        test_samples: usize,
        #[serde(default = "default_max_excess")]
        max_excess: f64,
        #[serde(default = "default_min_alignment")]
        min_alignment: f64,
        /// Also run at `compare_factor · T` and require the median excess
        /// risk not to increase; 0 or 1 disables.
        #[serde(default = "default_compare_factor")]
        compare_factor: usize,
    },
    Compression {
        /// Rank kept; defaults to the teacher's `k`.
        #[serde(default)]
        rank: Option<usize>,
        #[serde(default = "default_stderr_factor")]
        stderr_factor: f64,
        #[serde(default = "default_test_samples")]
        test_samples: usize,
    },
    GapProbe {
        ball: SecondLayerBall,
        n_probes: usize,
        #[serde(default = "default_probe_test_samples")]
        test_samples: usize,
    },
    Verify {
        /// Negative control: flip the sign of the analytic gradient so the
        /// finite-difference check must fail.
        #[serde(default)]
        corrupt_gradient: bool,
        #[serde(default = "default_verify_n")]
        n: usize,
    },
}

impl ExperimentKind {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentKind::Train => "train",
            ExperimentKind::Pgd { .. } => "pgd",
            ExperimentKind::FigureOne { .. } => "fig1",
            ExperimentKind::NoDecayControl { .. } => "nodecay",
            ExperimentKind::RateSweep { .. } => "sweep",
            ExperimentKind::Learnability { .. } => "learn",
            ExperimentKind::Compression { .. } => "compress",
            ExperimentKind::GapProbe { .. } => "gap",
            ExperimentKind::Verify { .. } => "verify",
        }
    }
}

fn default_eta_factor() -> f64 {
    0.05
}
fn default_envelope() -> f64 {
    1.2
}
fn default_max_final_perp() -> f64 {
    0.05
}
fn default_min_retained() -> f64 {
    0.5
}
fn default_bootstrap() -> usize {
    1000
}
fn default_prime_factor() -> usize {
    50
}
fn default_delta_conf() -> f64 {
    crate::optimize::DEFAULT_DELTA_CONF
}
fn default_test_samples() -> usize {
    100_000
}
fn default_probe_test_samples() -> usize {
    20_000
}
fn default_max_excess() -> f64 {
    0.1
}
fn default_min_alignment() -> f64 {
    0.9
}
fn default_compare_factor() -> usize {
    4
}
fn default_stderr_factor() -> f64 {
    5.0
}
fn default_verify_n() -> usize {
    200_000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Vary the number of SGD steps `T`.
    Steps,
    /// Vary the input dimension `d`.
    Dim,
}

/// `S = {‖a‖₂ ≤ r_a/√m, ‖b‖_∞ ≤ r_b}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondLayerBall {
    pub r_a: f64,
    pub r_b: f64,
}

impl SecondLayerBall {
    pub fn new(r_a: f64, r_b: f64) -> Result<Self> {
        let ball = SecondLayerBall { r_a, r_b };
        ball.validate()?;
        Ok(ball)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_a > 0.0 && self.r_a.is_finite() && self.r_b > 0.0 && self.r_b.is_finite()) {
            return Err(Error::Config(format!(
                "ball radii must be positive, got r_a={}, r_b={}",
                self.r_a, self.r_b
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Haar-random orthonormal `U`, drawn per seed.
    #[default]
    Random,
    /// `U` = the first `k` coordinate axes.
    Axis,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherSpec {
    pub d: usize,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "default_link")]
    pub link: Link,
    #[serde(default = "default_noise")]
    pub noise: Noise,
    #[serde(default)]
    pub orientation: Orientation,
}

fn one() -> usize {
    1
}
fn default_link() -> Link {
    Link::TanhOfSum
}
fn default_noise() -> Noise {
    Noise::None
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    /// `W ~ N(0, 1/d)`, `a ~ U[−1/m, 1/m]`, `b ~ U{±1}`.
    #[default]
    Random,
    /// Identical rows from one Gaussian draw, `a_j = a0`, `b_j = b0`.
    Symmetric { a0: f64, b0: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentSpec {
    pub m: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    #[serde(default)]
    pub init: InitSpec,
}

fn default_activation() -> Activation {
    Activation::Relu
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// `t*` defaults to `⌈4λ̃/γ⌉`.
    Decreasing {
        #[serde(default)]
        t_star: Option<usize>,
    },
    /// `η` defaults to `2m·log(T)/(γT)`.
    Constant {
        #[serde(default)]
        eta: Option<f64>,
    },
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Decreasing { t_star: None }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DecaySpec {
    /// `λ̃ = γ + 2√(2/(eπ))`.
    #[default]
    Relu,
    /// `λ̃ = 1 + γ + √(1 + 2γ + 2R(W⁰))`, with `R(W⁰)` estimated from `mc_n` samples.
    Smooth,
    /// `λ̃ = γ + m(2a0/b0)√(2/(eπ))`; needs a symmetric init.
    SingleIndex,
    Fixed {
        tilde_lambda: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub steps: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub weight_decay: DecaySpec,
    #[serde(default = "Loss::huber")]
    pub loss: Loss,
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
}

fn default_gamma() -> f64 {
    0.5
}

/// A complete, serializable description of one experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: ExperimentKind,
    pub teacher: TeacherSpec,
    pub student: StudentSpec,
    pub optimizer: OptimizerSpec,
    pub seeds: Vec<u64>,
    #[serde(default = "default_mc_n")]
    pub mc_n: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_mc_n() -> usize {
    20_000
}

impl ExperimentSpec {
    /// Parses TOML or JSON, chosen by the file extension (`.json` → JSON, anything else → TOML).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ExperimentSpec = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Hex SHA-256 of the spec's canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Replaces the seed list by `count` consecutive seeds starting at `first`.
    pub fn reseed(&mut self, first: u64) {
        let n = self.seeds.len().max(1) as u64;
        self.seeds = (first..first + n).collect();
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.seeds.is_empty() {
            return cfg("seeds must be non-empty".into());
        }
        let t = &self.teacher;
        if t.d == 0 || t.k == 0 || t.k > t.d {
            return cfg(format!("teacher needs 1 <= k <= d, got k={}, d={}", t.k, t.d));
        }
        if let Link::Custom(_) = t.link {
            return cfg("custom links cannot be configured from a file".into());
        }
        if self.student.m == 0 {
            return cfg("student width must be >= 1".into());
        }
        self.student.activation.validate()?;
        if let InitSpec::Symmetric { a0, b0 } = self.student.init {
            if !(a0.is_finite() && b0.is_finite()) {
                return cfg("symmetric init needs finite a0, b0".into());
            }
        }
        let o = &self.optimizer;
        o.loss.validate()?;
        if !(o.gamma > 0.0 && o.gamma.is_finite()) {
            return cfg(format!("gamma must be > 0, got {}", o.gamma));
        }
        if o.checkpoint_every == Some(0) {
            return cfg("checkpoint_every must be >= 1".into());
        }
        if let DecaySpec::Fixed { tilde_lambda } = o.weight_decay {
            if !(tilde_lambda >= 0.0 && tilde_lambda.is_finite()) {
                return cfg(format!("tilde_lambda must be >= 0, got {tilde_lambda}"));
            }
        }
        if o.weight_decay == DecaySpec::SingleIndex && !matches!(self.student.init, InitSpec::Symmetric { .. }) {
            return cfg("single-index weight decay needs a symmetric init".into());
        }
        if self.mc_n < 2 {
            return cfg(format!("mc_n must be >= 2, got {}", self.mc_n));
        }
        match &self.kind {
            ExperimentKind::RateSweep {
                values,
                slope_min,
                slope_max,
                ..
            } => {
                let mut v = values.clone();
                v.sort_unstable();
                v.dedup();
                if v.len() < 3 || v[0] == 0 {
                    return cfg(format!("rate sweep needs >= 3 distinct positive grid values, got {values:?}"));
                }
                if self.seeds.len() < 5 {
                    return cfg(format!("rate sweep needs >= 5 seeds, got {}", self.seeds.len()));
                }
                if slope_min > slope_max {
                    return cfg(format!("empty slope window [{slope_min}, {slope_max}]"));
                }
            }
            ExperimentKind::GapProbe { ball, n_probes, .. } => {
                ball.validate()?;
                if *n_probes == 0 {
                    return cfg("n_probes must be >= 1".into());
                }
            }
            ExperimentKind::Learnability { .. } => {
                if o.loss.kind != LossKind::Huber || self.student.activation != Activation::Relu {
                    return cfg("learnability runs use a ReLU student with Huber loss".into());
                }
                if !matches!(self.student.init, InitSpec::Symmetric { .. }) {
                    return cfg("learnability runs need a symmetric init".into());
                }
            }
            ExperimentKind::FigureOne { .. } | ExperimentKind::NoDecayControl { .. } => {
                if t.d != 2 {
                    return cfg(format!("neuron directions are exported in 2-D only, got d={}", t.d));
                }
            }
            ExperimentKind::Compression { rank, .. }
                if rank.is_some_and(|r| r == 0 || r > t.d.min(self.student.m)) => {
                    return cfg(format!("rank {rank:?} out of range"));
                }
            _ => {}
        }
        Ok(())
    }

    /// Built-in configuration behind each CLI subcommand.
    pub fn preset(kind: &str) -> Result<Self> {
        let fig1_teacher = TeacherSpec {
            d: 2,
            k: 1,
            link: Link::TanhOfSum,
            noise: Noise::None,
            orientation: Orientation::Random,
        };
        let relu = |m| StudentSpec {
            m,
            activation: Activation::Relu,
            init: InitSpec::Random,
        };
        let sgd = |steps| OptimizerSpec {
            steps,
            gamma: 0.5,
            schedule: ScheduleSpec::default(),
            weight_decay: DecaySpec::Relu,
            loss: Loss::huber(),
            checkpoint_every: None,
        };
        let base = |name: &str, kind, teacher, student, optimizer, seeds: Vec<u64>| ExperimentSpec {
            name: name.into(),
            kind,
            teacher,
            student,
            optimizer,
            seeds,
            mc_n: default_mc_n(),
            output_dir: None,
        };
        let spec = match kind {
            "train" => base("train", ExperimentKind::Train, fig1_teacher, relu(1000), sgd(50_000), vec![1]),
            "fig1" => base(
                "figure-one",
                ExperimentKind::FigureOne {
                    max_final_perp: default_max_final_perp(),
                },
                fig1_teacher,
                relu(1000),
                sgd(50_000),
                vec![1],
            ),
            "nodecay" => base(
                "no-decay-control",
                ExperimentKind::NoDecayControl {
                    min_retained: default_min_retained(),
                },
                fig1_teacher,
                relu(1000),
                sgd(50_000),
                vec![1],
            ),
            "pgd" => base(
                "pgd-contraction",
                ExperimentKind::Pgd {
                    eta_factor: default_eta_factor(),
                    envelope: default_envelope(),
                },
                TeacherSpec { d: 6, ..fig1_teacher },
                relu(8),
                sgd(200),
                vec![1, 2, 3],
            ),
            "sweep" => base(
                "rate-sweep-steps",
                ExperimentKind::RateSweep {
                    axis: SweepAxis::Steps,
                    values: vec![1 << 12, 1 << 14, 1 << 16],
                    slope_min: -0.65,
                    slope_max: -0.35,
                    bootstrap: default_bootstrap(),
                },
                TeacherSpec { d: 16, ..fig1_teacher },
                relu(64),
                sgd(1 << 16),
                (1..=10).collect(),
            ),
            "learn" => {
                let m = 400;
                base(
                    "learnability",
                    ExperimentKind::Learnability {
                        steps_prime_factor: default_prime_factor(),
                        lambda_prime: LambdaPrime::default(),
                        delta_conf: default_delta_conf(),
                        test_samples: default_test_samples(),
                        max_excess: default_max_excess(),
                        min_alignment: default_min_alignment(),
                        compare_factor: default_compare_factor(),
                    },
                    TeacherSpec {
                        d: 20,
                        k: 1,
                        link: Link::MonotonePoly { c: 0.1 },
                        noise: Noise::Gaussian { sigma: 0.1 },
                        orientation: Orientation::Random,
                    },
                    StudentSpec {
                        m,
                        activation: Activation::Relu,
                        init: InitSpec::Symmetric {
                            a0: 0.5 / m as f64,
                            b0: 1.0,
                        },
                    },
                    OptimizerSpec {
                        gamma: 0.25,
                        weight_decay: DecaySpec::SingleIndex,
                        ..sgd(20_000)
                    },
                    (1..=5).collect(),
                )
            }
            "compress" => base(
                "compression",
                ExperimentKind::Compression {
                    rank: None,
                    stderr_factor: default_stderr_factor(),
                    test_samples: default_test_samples(),
                },
                fig1_teacher,
                relu(1000),
                sgd(50_000),
                vec![1],
            ),
            "gap" => base(
                "gap-probe",
                ExperimentKind::GapProbe {
                    ball: SecondLayerBall { r_a: 1.0, r_b: 2.0 },
                    n_probes: 200,
                    test_samples: default_probe_test_samples(),
                },
                fig1_teacher,
                relu(100),
                sgd(1 << 14),
                (1..=5).collect(),
            ),
            "verify" => base(
                "verify",
                ExperimentKind::Verify {
                    corrupt_gradient: false,
                    n: default_verify_n(),
                },
                fig1_teacher,
                relu(1),
                sgd(1),
                vec![1],
            ),
            other => return Err(Error::Config(format!("no preset named {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}
