use crate::error::{Error, Result};
use crate::linalg::{dot, norm, RngStream};
use crate::model::{Activation, Loss, Sample, StudentNet};

/// First-layer projections `⟨w_j, x_i⟩` for a fixed dataset, stored once per
/// distinct row of `W` (rows trained from a shared start stay identical).
pub struct FeatureCache {
    n: usize,
    unique: usize,
    proj: Vec<f64>,
    row_map: Vec<usize>,
    activation: Activation,
}

impl FeatureCache {
    pub fn new(net: &StudentNet, xs: impl Iterator<Item = impl AsRef<[f64]>>) -> Result<Self> {
        let w = net.w();
        let mut reps: Vec<usize> = Vec::new();
        let mut row_map = Vec::with_capacity(net.m());
        for j in 0..net.m() {
            match reps.iter().position(|&r| w.row(r) == w.row(j)) {
                Some(k) => row_map.push(k),
                None => {
                    row_map.push(reps.len());
                    reps.push(j);
                }
            }
        }
        let unique = reps.len();
        let mut proj = Vec::new();
        let mut n = 0;
        for x in xs {
            let x = x.as_ref();
            if x.len() != net.d() {
                return Err(Error::Shape(format!(
                    "sample has dimension {}, network expects {}",
                    x.len(),
                    net.d()
                )));
            }
            proj.extend(reps.iter().map(|&r| dot(w.row(r), x)));
            n += 1;
        }
        Ok(FeatureCache {
            n,
            unique,
            proj,
            row_map,
            activation: net.activation(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `φ_j(x_i) = σ(⟨w_j, x_i⟩ + b_j)` into `out`.
    #[inline]
    pub fn features(&self, i: usize, b: &[f64], out: &mut [f64]) {
        let p = &self.proj[i * self.unique..(i + 1) * self.unique];
        for ((o, &k), &bj) in out.iter_mut().zip(&self.row_map).zip(b) {
            *o = self.activation.value(p[k] + bj);
        }
    }

    /// `Σ_j a_j φ_j(x_i)`.
    #[inline]
    pub fn predict(&self, i: usize, a: &[f64], b: &[f64]) -> f64 {
        let p = &self.proj[i * self.unique..(i + 1) * self.unique];
        self.row_map
            .iter()
            .zip(a.iter().zip(b))
            .map(|(&k, (&aj, &bj))| aj * self.activation.value(p[k] + bj))
            .sum()
    }
}

/// SGD on the second layer over a stored dataset: each step draws an index
/// uniformly, then `a ← (1 − η'_tλ')a − η'_t ∇_a ℓ` with `η'_t = (2t+1)/(λ'(t+1)²)`.
/// `net.a()` is the starting point; `W` and `b` are fixed.
pub fn train_second_layer(
    net: &StudentNet,
    dataset: &[Sample],
    loss: &Loss,
    lambda_prime: f64,
    steps: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("second-layer dataset is empty".into()));
    }
    let cache = FeatureCache::new(net, dataset.iter().map(|s| &s.x))?;
    let ys: Vec<f64> = dataset.iter().map(|s| s.y).collect();
    train_on_cache(&cache, &ys, net.a(), net.b(), loss, lambda_prime, steps, rng)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn train_on_cache(
    cache: &FeatureCache,
    ys: &[f64],
    a0: &[f64],
    b: &[f64],
    loss: &Loss,
    lambda_prime: f64,
    steps: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if !(lambda_prime > 0.0 && lambda_prime.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda' must be > 0, got {lambda_prime}")));
    }
    if cache.is_empty() {
        return Err(Error::InvalidArgument("second-layer dataset is empty".into()));
    }
    let mut a = a0.to_vec();
    let mut phi = vec![0.0; a.len()];
    for t in 0..steps {
        let i = rng.index(cache.len());
        cache.features(i, b, &mut phi);
        let yhat = dot(&a, &phi);
        let d1 = loss.d1(yhat, ys[i]);
        let tf = t as f64;
        let eta = (2.0 * tf + 1.0) / (lambda_prime * (tf + 1.0) * (tf + 1.0));
        let decay = 1.0 - eta * lambda_prime;
        let c = eta * d1;
        for (aj, pj) in a.iter_mut().zip(&phi) {
            *aj = decay * *aj - c * pj;
        }
        if t % 1024 == 0 || t + 1 == steps {
            let na = norm(&a);
            if !na.is_finite() || na > super::sgd::DIVERGENCE_NORM {
                return Err(Error::Divergence {
                    step: t,
                    reason: format!("second-layer norm {na:e}"),
                });
            }
        }
    }
    Ok(a)
}

/// `(1/n) Σ ℓ(ŷ_i, y_i) + (λ'/2)‖a‖²` on a stored dataset.
pub fn regularized_empirical_risk(net: &StudentNet, dataset: &[Sample], loss: &Loss, lambda_prime: f64) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("dataset is empty".into()));
    }
    let mut total = 0.0;
    for s in dataset {
        total += loss.value(net.forward(&s.x)?, s.y);
    }
    Ok(total / dataset.len() as f64 + 0.5 * lambda_prime * dot(net.a(), net.a()))
}
