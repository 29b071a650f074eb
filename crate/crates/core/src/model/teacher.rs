use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, orthonormal_row_basis, Matrix, RngStream, RANK_TOL};

/// A user-supplied link `g: ℝ^k → ℝ`.
pub trait LinkFunction: Send + Sync {
    fn name(&self) -> &str;
    fn value(&self, z: &[f64]) -> f64;
    /// Weak gradient, if available.
    fn gradient(&self, _z: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Target nonlinearity applied to the teacher projections `z = Ux`.
/// The built-in links act on `s = Σ_i z_i`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Link {
    /// `g ≡ 0`.
    Zero,
    /// `s`.
    Linear,
    /// `tanh(s)`.
    TanhOfSum,
    /// `s²`.
    SquareOfSum,
    /// `s + c·s³`.
    MonotonePoly { c: f64 },
    /// `factor · inner(z)`.
    Scaled { factor: f64, inner: Box<Link> },
    /// Arbitrary closure-backed link; not serializable.
    #[serde(skip)]
    Custom(Arc<dyn LinkFunction>),
}

impl fmt::Debug for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Link::Zero => write!(f, "Zero"),
            Link::Linear => write!(f, "Linear"),
            Link::TanhOfSum => write!(f, "TanhOfSum"),
            Link::SquareOfSum => write!(f, "SquareOfSum"),
            Link::MonotonePoly { c } => write!(f, "MonotonePoly {{ c: {c} }}"),
            Link::Scaled { factor, inner } => write!(f, "Scaled({factor} * {inner:?})"),
            Link::Custom(g) => write!(f, "Custom({})", g.name()),
        }
    }
}

impl Link {
    pub fn value(&self, z: &[f64]) -> f64 {
        let s: f64 = z.iter().sum();
        match self {
            Link::Zero => 0.0,
            Link::Linear => s,
            Link::TanhOfSum => s.tanh(),
            Link::SquareOfSum => s * s,
            Link::MonotonePoly { c } => s + c * s * s * s,
            Link::Scaled { factor, inner } => factor * inner.value(z),
            Link::Custom(g) => g.value(z),
        }
    }

    /// Weak gradient `∇g(z)`.
    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        let k = z.len();
        let s: f64 = z.iter().sum();
        let ds = match self {
            Link::Zero => 0.0,
            Link::Linear => 1.0,
            Link::TanhOfSum => 1.0 - s.tanh().powi(2),
            Link::SquareOfSum => 2.0 * s,
            Link::MonotonePoly { c } => 1.0 + 3.0 * c * s * s,
            Link::Scaled { factor, inner } => {
                return Ok(inner.gradient(z)?.into_iter().map(|g| factor * g).collect())
            }
            Link::Custom(g) => {
                return g
                    .gradient(z)
                    .ok_or_else(|| Error::NoLinkGradient(g.name().to_string()))
            }
        };
        Ok(vec![ds; k])
    }
}

/// Label noise, independent of the input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    None,
    Gaussian { sigma: f64 },
    /// Uniform on `[-half_width, half_width]`.
    Uniform { half_width: f64 },
}

impl Noise {
    #[inline]
    pub fn draw(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Gaussian { sigma } => sigma * rng.normal(),
            Noise::Uniform { half_width } => rng.uniform(-half_width, half_width),
        }
    }

    fn validate(&self) -> Result<()> {
        let p = match *self {
            Noise::None => 0.0,
            Noise::Gaussian { sigma } => sigma,
            Noise::Uniform { half_width } => half_width,
        };
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise scale must be >= 0, got {p}")));
        }
        Ok(())
    }
}

/// Multiple-index teacher `y = g(Ux) + ε` with `x ~ N(0, I_d)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawTeacher", into = "RawTeacher")]
pub struct TeacherModel {
    u: Matrix,
    link: Link,
    noise: Noise,
}

#[derive(Serialize, Deserialize)]
struct RawTeacher {
    #[serde(rename = "U")]
    u: Matrix,
    link: Link,
    noise: Noise,
}

impl TryFrom<RawTeacher> for TeacherModel {
    type Error = Error;

    fn try_from(r: RawTeacher) -> Result<Self> {
        TeacherModel::new(r.u, r.link, r.noise)
    }
}

impl From<TeacherModel> for RawTeacher {
    fn from(t: TeacherModel) -> Self {
        RawTeacher {
            u: t.u,
            link: t.link,
            noise: t.noise,
        }
    }
}

/// One labelled draw. `eps` is the realized noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
    pub eps: f64,
}

impl TeacherModel {
    pub fn new(u: Matrix, link: Link, noise: Noise) -> Result<Self> {
        if u.rows() == 0 || u.cols() == 0 {
            return Err(Error::Shape(format!("U must be non-empty, got {}x{}", u.rows(), u.cols())));
        }
        noise.validate()?;
        Ok(TeacherModel { u, link, noise })
    }

    /// Single-index teacher along `u` (normalized).
    pub fn single_index(u: &[f64], link: Link, noise: Noise) -> Result<Self> {
        let n = norm(u);
        if n == 0.0 {
            return Err(Error::InvalidArgument("index vector is zero".into()));
        }
        let row: Vec<f64> = u.iter().map(|v| v / n).collect();
        TeacherModel::new(Matrix::from_rows(&[row])?, link, noise)
    }

    /// Teacher with `k` random orthonormal index vectors in `ℝ^d`.
    pub fn random_orthonormal(k: usize, d: usize, link: Link, noise: Noise, rng: &mut RngStream) -> Result<Self> {
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!("need 1 <= k <= d, got k={k}, d={d}")));
        }
        let g = Matrix::from_fn(k, d, |_, _| rng.normal());
        let u = orthonormal_row_basis(&g, RANK_TOL)?;
        if u.rows() != k {
            return Err(Error::InvalidArgument("random index matrix was rank deficient".into()));
        }
        TeacherModel::new(u, link, noise)
    }

    pub fn u(&self) -> &Matrix {
        &self.u
    }

    pub fn link(&self) -> &Link {
        &self.link
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }

    pub fn k(&self) -> usize {
        self.u.rows()
    }

    pub fn d(&self) -> usize {
        self.u.cols()
    }

    /// Projections `z = Ux` written into `z`.
    #[inline]
    pub fn project_into(&self, x: &[f64], z: &mut [f64]) {
        for (zi, u) in z.iter_mut().zip(self.u.iter_rows()) {
            *zi = dot(u, x);
        }
    }

    /// Noise-free target `g(Ux)`.
    pub fn clean_target(&self, x: &[f64]) -> f64 {
        let mut z = vec![0.0; self.k()];
        self.project_into(x, &mut z);
        self.link.value(&z)
    }

    pub fn sample(&self, rng: &mut RngStream) -> Sample {
        let mut x = vec![0.0; self.d()];
        let (y, eps) = self.sample_into(rng, &mut x);
        Sample { x, y, eps }
    }

    /// Draws `x` into the buffer and returns `(y, eps)`.
    #[inline]
    pub fn sample_into(&self, rng: &mut RngStream, x: &mut [f64]) -> (f64, f64) {
        rng.fill_normal(x);
        let eps = self.noise.draw(rng);
        let y = if self.k() == 1 {
            self.link.value(&[dot(self.u.row(0), x)])
        } else {
            self.clean_target(x)
        };
        (y + eps, eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Cube;

    impl LinkFunction for Cube {
        fn name(&self) -> &str {
            "cube"
        }
        fn value(&self, z: &[f64]) -> f64 {
            z[0].powi(3)
        }
    }

    #[test]
    fn linear_link_returns_first_coordinate() {
        let t = TeacherModel::new(Matrix::from_rows(&[[1.0, 0.0, 0.0]]).unwrap(), Link::Linear, Noise::None).unwrap();
        let mut rng = RngStream::new(1, 0);
        for _ in 0..10 {
            let s = t.sample(&mut rng);
            assert_eq!(s.y, s.x[0]);
            assert_eq!(s.eps, 0.0);
        }
    }

    #[test]
    fn zero_link_returns_noise() {
        let t = TeacherModel::single_index(&[1.0, 1.0], Link::Zero, Noise::Gaussian { sigma: 0.3 }).unwrap();
        let mut rng = RngStream::new(2, 0);
        for _ in 0..10 {
            let s = t.sample(&mut rng);
            assert_eq!(s.y, s.eps);
        }
    }

    #[test]
    fn square_link_has_unit_mean() {
        let t = TeacherModel::single_index(&[3.0, 4.0], Link::SquareOfSum, Noise::None).unwrap();
        let mut rng = RngStream::new(3, 0);
        let n = 1_000_000;
        let mut x = vec![0.0; 2];
        let mean = (0..n).map(|_| t.sample_into(&mut rng, &mut x).0).sum::<f64>() / n as f64;
        assert!((0.99..=1.01).contains(&mean), "{mean}");
    }

    #[test]
    fn link_gradients_match_finite_differences() {
        let links = [
            Link::Linear,
            Link::TanhOfSum,
            Link::SquareOfSum,
            Link::MonotonePoly { c: 0.1 },
            Link::Scaled {
                factor: 10.0,
                inner: Box::new(Link::SquareOfSum),
            },
        ];
        let z = [0.3, -0.7];
        let h = 1e-6;
        for l in &links {
            let g = l.gradient(&z).unwrap();
            for i in 0..2 {
                let mut zp = z;
                let mut zm = z;
                zp[i] += h;
                zm[i] -= h;
                let fd = (l.value(&zp) - l.value(&zm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-6, "{l:?}");
            }
        }
    }

    #[test]
    fn custom_link_without_gradient() {
        let l = Link::Custom(Arc::new(Cube));
        assert_eq!(l.value(&[2.0]), 8.0);
        assert!(matches!(l.gradient(&[2.0]), Err(Error::NoLinkGradient(_))));
        assert!(serde_json::to_string(&l).is_err());
    }

    #[test]
    fn random_orthonormal_rows() {
        let mut rng = RngStream::new(4, 0);
        let t = TeacherModel::random_orthonormal(3, 7, Link::Linear, Noise::None, &mut rng).unwrap();
        let g = t.u().matmul_transpose(t.u()).unwrap();
        assert!(g.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn json_field_names() {
        let t = TeacherModel::single_index(&[1.0, 0.0], Link::MonotonePoly { c: 0.1 }, Noise::Uniform { half_width: 0.5 }).unwrap();
        let v = serde_json::to_value(&t).unwrap();
        assert!(v.get("U").is_some() && v.get("link").is_some() && v.get("noise").is_some());
        let back: TeacherModel = serde_json::from_value(v).unwrap();
        assert_eq!(back.u(), t.u());
    }
}
