use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix, RngStream};

/// Two-layer network `ŷ(x) = Σ_j a_j σ(⟨w_j, x⟩ + b_j)` with first layer `W` (m × d).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNet", into = "RawNet")]
pub struct StudentNet {
    w: Matrix,
    a: Vec<f64>,
    b: Vec<f64>,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct RawNet {
    #[serde(rename = "W")]
    w: Matrix,
    a: Vec<f64>,
    b: Vec<f64>,
    activation: Activation,
}

impl TryFrom<RawNet> for StudentNet {
    type Error = Error;

    fn try_from(r: RawNet) -> Result<Self> {
        StudentNet::new(r.w, r.a, r.b, r.activation)
    }
}

impl From<StudentNet> for RawNet {
    fn from(n: StudentNet) -> Self {
        RawNet {
            w: n.w,
            a: n.a,
            b: n.b,
            activation: n.activation,
        }
    }
}

impl StudentNet {
    pub fn new(w: Matrix, a: Vec<f64>, b: Vec<f64>, activation: Activation) -> Result<Self> {
        let m = w.rows();
        if a.len() != m || b.len() != m {
            return Err(Error::Shape(format!(
                "W has {m} rows but a has {} and b has {} entries",
                a.len(),
                b.len()
            )));
        }
        if !w.is_finite() || a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("student parameters".into()));
        }
        activation.validate()?;
        Ok(StudentNet {
            w,
            a,
            b,
            activation,
        })
    }

    /// Width `m`.
    pub fn m(&self) -> usize {
        self.w.rows()
    }

    /// Input dimension `d`.
    pub fn d(&self) -> usize {
        self.w.cols()
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Mutable first layer. Callers keep entries finite.
    pub fn w_mut(&mut self) -> &mut Matrix {
        &mut self.w
    }

    pub fn set_w(&mut self, w: Matrix) -> Result<()> {
        self.w.check_same_shape(&w)?;
        self.w = w;
        Ok(())
    }

    pub fn set_a(&mut self, a: Vec<f64>) -> Result<()> {
        if a.len() != self.m() {
            return Err(Error::Shape(format!("a needs {} entries, got {}", self.m(), a.len())));
        }
        self.a = a;
        Ok(())
    }

    pub fn set_b(&mut self, b: Vec<f64>) -> Result<()> {
        if b.len() != self.m() {
            return Err(Error::Shape(format!("b needs {} entries, got {}", self.m(), b.len())));
        }
        self.b = b;
        Ok(())
    }

    /// Copy with a different first layer.
    pub fn with_w(&self, w: Matrix) -> Result<StudentNet> {
        let mut n = self.clone();
        n.set_w(w)?;
        Ok(n)
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.d() {
            return Err(Error::Shape(format!(
                "input has dimension {}, network expects {}",
                x.len(),
                self.d()
            )));
        }
        Ok(self.predict(x))
    }

    /// Forward pass without the dimension check.
    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.w
            .iter_rows()
            .zip(self.a.iter().zip(&self.b))
            .map(|(w, (&a, &b))| a * self.activation.value(dot(w, x) + b))
            .sum()
    }

    /// Pre-activations `Wx + b` written into `z`.
    #[inline]
    pub fn preactivations_into(&self, x: &[f64], z: &mut [f64]) {
        for ((zj, w), &b) in z.iter_mut().zip(self.w.iter_rows()).zip(&self.b) {
            *zj = dot(w, x) + b;
        }
    }
}

/// Random initialization: `W_ij ~ N(0, 1/d)`, `a_j ~ Unif[−1/m, 1/m]`, `b_j ~ Unif{−1, 1}`.
pub fn init_student(m: usize, d: usize, activation: Activation, rng: &mut RngStream) -> Result<StudentNet> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!("need m, d >= 1, got m={m}, d={d}")));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let w = Matrix::from_fn(m, d, |_, _| scale * rng.normal());
    let a = (0..m).map(|_| rng.uniform(-1.0, 1.0) / m as f64).collect();
    let b = (0..m).map(|_| rng.sign()).collect();
    StudentNet::new(w, a, b, activation)
}

/// Every neuron starts from the same `w⁰ ~ N(0, I/d)` with `a_j = a0`, `b_j = b0`.
pub fn init_symmetric(
    m: usize,
    d: usize,
    a0: f64,
    b0: f64,
    activation: Activation,
    rng: &mut RngStream,
) -> Result<StudentNet> {
    if m == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!("need m, d >= 1, got m={m}, d={d}")));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let w0: Vec<f64> = (0..d).map(|_| scale * rng.normal()).collect();
    let w = Matrix::from_fn(m, d, |_, j| w0[j]);
    StudentNet::new(w, vec![a0; m], vec![b0; m], activation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_examples() {
        let w = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let net = StudentNet::new(w, vec![1.0], vec![0.0], Activation::Relu).unwrap();
        assert_eq!(net.forward(&[2.0, 0.0]).unwrap(), 2.0);
        assert!(net.forward(&[1.0]).is_err());

        let net = StudentNet::new(Matrix::zeros(2, 3), vec![0.5, 0.5], vec![1.0, -1.0], Activation::Relu).unwrap();
        assert_eq!(net.forward(&[0.3, -2.0, 5.0]).unwrap(), 0.5);

        let mut rng = RngStream::new(3, 0);
        let mut net = init_student(5, 4, Activation::Tanh, &mut rng).unwrap();
        net.set_a(vec![0.0; 5]).unwrap();
        assert_eq!(net.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn construction_checks_shapes() {
        assert!(StudentNet::new(Matrix::zeros(2, 2), vec![0.0], vec![0.0; 2], Activation::Relu).is_err());
        assert!(StudentNet::new(Matrix::zeros(1, 2), vec![f64::NAN], vec![0.0], Activation::Relu).is_err());
    }

    #[test]
    fn init_support_and_scale() {
        let mut rng = RngStream::new(1, 0);
        let net = init_student(200, 50, Activation::Relu, &mut rng).unwrap();
        assert!(net.a().iter().all(|a| a.abs() <= 1.0 / 200.0));
        assert!(net.b().iter().all(|&b| b == 1.0 || b == -1.0));
        let data = net.w().data();
        let n = data.len() as f64;
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((0.9 / 50.0..=1.1 / 50.0).contains(&var), "var {var}");
    }

    #[test]
    fn init_frobenius_norm_is_concentrated() {
        for seed in 0..100 {
            let mut rng = RngStream::new(seed, 0);
            let net = init_student(100, 20, Activation::Relu, &mut rng).unwrap();
            assert!(net.w().frobenius_norm() <= (200f64).sqrt());
        }
    }

    #[test]
    fn symmetric_init_has_identical_rows() {
        let mut rng = RngStream::new(1, 0);
        let net = init_symmetric(6, 3, 0.01, 1.0, Activation::Relu, &mut rng).unwrap();
        for j in 1..6 {
            assert_eq!(net.w().row(j), net.w().row(0));
        }
    }

    #[test]
    fn json_field_names() {
        let net = StudentNet::new(Matrix::zeros(1, 2), vec![1.0], vec![0.0], Activation::Relu).unwrap();
        let v: serde_json::Value = serde_json::to_value(&net).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        assert_eq!(keys, ["W", "a", "activation", "b"]);
        let back: StudentNet = serde_json::from_value(v).unwrap();
        assert_eq!(back, net);
    }
}
