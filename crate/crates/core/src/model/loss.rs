use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The raw logistic loss `log(1 + e^{-ŷy})` has `sup |∂²ℓ/∂ŷ∂y| ≈ 1.0998` on
/// ±1 labels; dividing by this constant brings every partial inside [-1, 1].
pub const LOGISTIC_SCALE: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `½(ŷ − y)²`.
    Squared,
    /// `½r²` for `|r| ≤ 1`, `|r| − ½` otherwise, with `r = ŷ − y`.
    Huber,
    /// `log(1 + e^{−ŷy}) / LOGISTIC_SCALE`, for labels in {−1, +1}.
    Logistic,
}

/// A loss together with its truncation level `τ ≥ 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    pub kind: LossKind,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    1.0
}

/// Value, the partials in the prediction and the label, and `ℓ ∧ τ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub d1: f64,
    pub d11: f64,
    pub d12: f64,
    pub truncated: f64,
}

impl Loss {
    pub fn new(kind: LossKind, tau: f64) -> Result<Self> {
        let l = Loss { kind, tau };
        l.validate()?;
        Ok(l)
    }

    pub fn squared() -> Self {
        Loss {
            kind: LossKind::Squared,
            tau: 1.0,
        }
    }

    pub fn huber() -> Self {
        Loss {
            kind: LossKind::Huber,
            tau: 1.0,
        }
    }

    pub fn logistic() -> Self {
        Loss {
            kind: LossKind::Logistic,
            tau: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "truncation level must be >= 1, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    pub fn eval(&self, yhat: f64, y: f64) -> LossEval {
        let (value, d1, d11, d12) = match self.kind {
            LossKind::Squared => {
                let r = yhat - y;
                (0.5 * r * r, r, 1.0, -1.0)
            }
            LossKind::Huber => {
                let r = yhat - y;
                if r.abs() <= 1.0 {
                    (0.5 * r * r, r, 1.0, -1.0)
                } else {
                    (r.abs() - 0.5, r.signum(), 0.0, 0.0)
                }
            }
            LossKind::Logistic => {
                let u = yhat * y;
                // p = 1/(1+e^u), computed without overflow
                let p = if u >= 0.0 {
                    let e = (-u).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + u.exp())
                };
                let q = p * (1.0 - p);
                let value = if u >= 0.0 {
                    (-u).exp().ln_1p()
                } else {
                    -u + u.exp().ln_1p()
                };
                let c = LOGISTIC_SCALE;
                (value / c, -y * p / c, y * y * q / c, (-p + u * q) / c)
            }
        };
        LossEval {
            value,
            d1,
            d11,
            d12,
            truncated: value.min(self.tau),
        }
    }

    #[inline]
    pub fn value(&self, yhat: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Squared => {
                let r = yhat - y;
                0.5 * r * r
            }
            LossKind::Huber => huber(yhat - y),
            LossKind::Logistic => self.eval(yhat, y).value,
        }
    }

    /// `∂ℓ/∂ŷ`.
    #[inline]
    pub fn d1(&self, yhat: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Squared => yhat - y,
            LossKind::Huber => (yhat - y).clamp(-1.0, 1.0),
            LossKind::Logistic => self.eval(yhat, y).d1,
        }
    }

    #[inline]
    pub fn truncated(&self, yhat: f64, y: f64) -> f64 {
        self.value(yhat, y).min(self.tau)
    }
}

/// Huber function of a residual.
#[inline]
pub fn huber(r: f64) -> f64 {
    if r.abs() <= 1.0 {
        0.5 * r * r
    } else {
        r.abs() - 0.5
    }
}
