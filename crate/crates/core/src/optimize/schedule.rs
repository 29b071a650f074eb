use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `√(2/(eπ))`, which bounds the negative curvature a ReLU unit with bias
/// magnitude 1 can contribute.
pub fn relu_curvature_constant() -> f64 {
    (2.0 / (std::f64::consts::E * std::f64::consts::PI)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepKind {
    Constant { eta: f64 },
    /// `η_t = m(2(t+t*)+1) / (γ(t+t*+1)²)`.
    Decreasing { t_star: usize },
}

/// Step sizes for `horizon` SGD updates on a width-`m` network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: StepKind,
    pub m: usize,
    pub gamma: f64,
    pub horizon: usize,
}

impl StepSchedule {
    pub fn decreasing(m: usize, gamma: f64, t_star: usize, horizon: usize) -> Result<Self> {
        check_gamma(gamma)?;
        if gamma == 0.0 {
            return Err(Error::InvalidArgument("decreasing schedule needs gamma > 0".into()));
        }
        Ok(StepSchedule {
            kind: StepKind::Decreasing { t_star },
            m,
            gamma,
            horizon,
        })
    }

    /// `η = 2m·log(T) / (γT)`.
    pub fn constant_auto(m: usize, gamma: f64, horizon: usize) -> Result<Self> {
        check_gamma(gamma)?;
        if gamma == 0.0 || horizon < 2 {
            return Err(Error::InvalidArgument(format!(
                "constant schedule needs gamma > 0 and T >= 2, got gamma={gamma}, T={horizon}"
            )));
        }
        let eta = 2.0 * m as f64 * (horizon as f64).ln() / (gamma * horizon as f64);
        Ok(StepSchedule {
            kind: StepKind::Constant { eta },
            m,
            gamma,
            horizon,
        })
    }

    pub fn constant(eta: f64, m: usize, gamma: f64, horizon: usize) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidArgument(format!("step size must be >= 0, got {eta}")));
        }
        Ok(StepSchedule {
            kind: StepKind::Constant { eta },
            m,
            gamma,
            horizon,
        })
    }

    /// Step size of update `t` (0-based). Fails for `t >= horizon`.
    pub fn step_size(&self, t: usize) -> Result<f64> {
        if t >= self.horizon {
            return Err(Error::InvalidArgument(format!(
                "step {t} outside schedule horizon {}",
                self.horizon
            )));
        }
        Ok(self.eta(t))
    }

    #[inline]
    pub(crate) fn eta(&self, t: usize) -> f64 {
        match self.kind {
            StepKind::Constant { eta } => eta,
            StepKind::Decreasing { t_star } => {
                let s = (t + t_star) as f64;
                self.m as f64 * (2.0 * s + 1.0) / (self.gamma * (s + 1.0) * (s + 1.0))
            }
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {gamma}")));
    }
    Ok(())
}

/// Which inequality fixes the weight-decay level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightDecayRule {
    /// Smooth activation: `λ̃ = 1 + γ + √(1 + 2γ + 2R(W⁰))`.
    Smooth { gamma: f64, initial_risk: f64 },
    /// ReLU: `λ̃ = γ + 2√(2/(eπ))`.
    Relu { gamma: f64 },
    /// Symmetric single-index start with `a_j = a`, `b_j = b`:
    /// `λ = γ/m + (2a/b)√(2/(eπ))`.
    SingleIndex { gamma: f64, a: f64, b: f64 },
}

/// Smallest admissible weight decay for `rule` at width `m`, as `(λ, λ̃)` with `λ = λ̃/m`.
pub fn select_weight_decay(rule: WeightDecayRule, m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidArgument("width must be >= 1".into()));
    }
    let mf = m as f64;
    let tilde = match rule {
        WeightDecayRule::Smooth { gamma, initial_risk } => {
            check_gamma(gamma)?;
            if !(initial_risk >= 0.0) {
                return Err(Error::InvalidArgument(format!("risk must be >= 0, got {initial_risk}")));
            }
            1.0 + gamma + (1.0 + 2.0 * gamma + 2.0 * initial_risk).sqrt()
        }
        WeightDecayRule::Relu { gamma } => {
            check_gamma(gamma)?;
            gamma + 2.0 * relu_curvature_constant()
        }
        WeightDecayRule::SingleIndex { gamma, a, b } => {
            check_gamma(gamma)?;
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::InvalidArgument(format!("need a, b > 0, got a={a}, b={b}")));
            }
            gamma + mf * (2.0 * a / b) * relu_curvature_constant()
        }
    };
    Ok((tilde / mf, tilde))
}
