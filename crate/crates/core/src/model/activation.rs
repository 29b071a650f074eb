use serde::{Deserialize, Serialize};

/// Hidden-unit nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    /// `log(1 + e^{ιz}) / ι`, a smooth surrogate for ReLU that converges to it as ι grows.
    SoftplusSharp { iota: f64 },
}

/// Suprema of `|σ|`, `|σ'|`, `|σ''|` (infinite where unbounded).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivationBounds {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
}

#[inline]
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    /// `(σ(z), σ'(z), σ''(z))`. ReLU uses `σ'(z) = 1(z ≥ 0)` and `σ'' = 0`.
    #[inline]
    pub fn eval(&self, z: f64) -> (f64, f64, f64) {
        match *self {
            Activation::Tanh => {
                let t = z.tanh();
                let d1 = 1.0 - t * t;
                (t, d1, -2.0 * t * d1)
            }
            Activation::Sigmoid => {
                let s = logistic(z);
                let d1 = s * (1.0 - s);
                (s, d1, d1 * (1.0 - 2.0 * s))
            }
            Activation::Relu => {
                if z >= 0.0 {
                    (z, 1.0, 0.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            Activation::SoftplusSharp { iota } => {
                let s = iota * z;
                let value = (s.max(0.0) + (-s.abs()).exp().ln_1p()) / iota;
                let p = logistic(s);
                (value, p, iota * p * (1.0 - p))
            }
        }
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            _ => self.eval(z).0,
        }
    }

    /// `(σ(z), σ'(z))` without the second derivative.
    #[inline]
    pub fn value_and_deriv(&self, z: f64) -> (f64, f64) {
        match *self {
            Activation::Relu => {
                if z >= 0.0 {
                    (z, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
            _ => {
                let (v, d, _) = self.eval(z);
                (v, d)
            }
        }
    }

    pub fn bounds(&self) -> ActivationBounds {
        match *self {
            Activation::Tanh => ActivationBounds {
                beta0: 1.0,
                beta1: 1.0,
                beta2: 4.0 / (3.0 * 3f64.sqrt()),
            },
            Activation::Sigmoid => ActivationBounds {
                beta0: 1.0,
                beta1: 0.25,
                beta2: 1.0 / (6.0 * 3f64.sqrt()),
            },
            Activation::Relu => ActivationBounds {
                beta0: f64::INFINITY,
                beta1: 1.0,
                beta2: 0.0,
            },
            Activation::SoftplusSharp { iota } => ActivationBounds {
                beta0: f64::INFINITY,
                beta1: 1.0,
                beta2: iota / 4.0,
            },
        }
    }

    /// Twice continuously differentiable everywhere.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, Activation::Relu)
    }

    pub fn validate(&self) -> crate::Result<()> {
        if let Activation::SoftplusSharp { iota } = *self {
            if !(iota.is_finite() && iota > 0.0) {
                return Err(crate::Error::InvalidArgument(format!(
                    "softplus sharpness must be positive, got {iota}"
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOOTH: [Activation; 4] = [
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::SoftplusSharp { iota: 1.0 },
        Activation::SoftplusSharp { iota: 4.0 },
    ];

    #[test]
    fn closed_form_points() {
        assert_eq!(Activation::Tanh.eval(0.0), (0.0, 1.0, 0.0));
        assert_eq!(Activation::Relu.eval(-1.0), (0.0, 0.0, 0.0));
        assert_eq!(Activation::Relu.eval(0.0), (0.0, 1.0, 0.0));
        let (v, d1, d2) = Activation::SoftplusSharp { iota: 1.0 }.eval(0.0);
        assert!((v - 2f64.ln()).abs() < 1e-15);
        assert!((d1 - 0.5).abs() < 1e-15);
        assert!((d2 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-5;
        for act in SMOOTH {
            for i in 0..=200 {
                let z = -5.0 + 0.05 * i as f64;
                let (_, d1, d2) = act.eval(z);
                let fd1 = (act.eval(z + h).0 - act.eval(z - h).0) / (2.0 * h);
                let fd2 = (act.eval(z + h).1 - act.eval(z - h).1) / (2.0 * h);
                assert!((fd1 - d1).abs() < 1e-6, "{act:?} z={z}: {fd1} vs {d1}");
                assert!((fd2 - d2).abs() < 1e-6, "{act:?} z={z}: {fd2} vs {d2}");
            }
        }
    }

    #[test]
    fn bounds_hold_on_grid() {
        for act in [Activation::Tanh, Activation::Sigmoid] {
            let b = act.bounds();
            for i in 0..=4000 {
                let z = -10.0 + 0.005 * i as f64;
                let (v, d1, d2) = act.eval(z);
                assert!(v.abs() <= b.beta0 && d1.abs() <= b.beta1 && d2.abs() <= b.beta2 + 1e-12);
            }
        }
    }

    #[test]
    fn softplus_approaches_relu() {
        for iota in [1.0, 10.0, 100.0, 1000.0] {
            let act = Activation::SoftplusSharp { iota };
            for i in 0..=400 {
                let z = -20.0 + 0.1 * i as f64;
                let gap = act.value(z) - Activation::Relu.value(z);
                assert!(gap >= -1e-12 && gap <= 2f64.ln() / iota + 1e-12, "iota={iota} z={z}");
            }
        }
    }

    #[test]
    fn softplus_is_stable_for_large_inputs() {
        let act = Activation::SoftplusSharp { iota: 50.0 };
        assert_eq!(act.value(100.0), 100.0);
        assert!(act.value(-100.0).abs() < 1e-300);
        assert!(act.eval(1e3).0.is_finite());
    }

    #[test]
    fn serde_tags() {
        let s = serde_json::to_string(&Activation::SoftplusSharp { iota: 2.0 }).unwrap();
        assert_eq!(s, r#"{"kind":"softplus_sharp","iota":2.0}"#);
        let a: Activation = serde_json::from_str(r#"{"kind":"relu"}"#).unwrap();
        assert_eq!(a, Activation::Relu);
    }
}
