use crate::error::{Error, Result};
use crate::linalg::RngStream;

/// A scalar target with its first two derivatives: `z ↦ (f, f', f'')`.
pub trait ScalarTarget {
    fn eval(&self, z: f64) -> (f64, f64, f64);
}

impl<F: Fn(f64) -> (f64, f64, f64) + ?Sized> ScalarTarget for F {
    fn eval(&self, z: f64) -> (f64, f64, f64) {
        self(z)
    }
}

/// `f̃_α`: equal to `f` on `|t| ≤ rΔ/|α|`; on the band between `−rΔ/α` and
/// `−2rΔ/α` a quintic that matches `f` to second order at the inner edge and
/// vanishes to second order at the outer edge; zero beyond.
struct Extension<'a, F: ?Sized> {
    f: &'a F,
    /// Outer edge `−2rΔ/α`.
    t0: f64,
    /// Signed band width `t1 − t0 = rΔ/α`.
    h: f64,
    inner: (f64, f64, f64),
}

impl<'a, F: ScalarTarget + ?Sized> Extension<'a, F> {
    fn new(f: &'a F, alpha: f64, r: f64, delta: f64) -> Self {
        let t1 = -r * delta / alpha;
        let t0 = -2.0 * r * delta / alpha;
        Extension {
            f,
            t0,
            h: t1 - t0,
            inner: f.eval(t1),
        }
    }

    fn coord(&self, t: f64) -> f64 {
        (t - self.t0) / self.h
    }

    #[cfg(test)]
    fn value(&self, t: f64) -> f64 {
        let s = self.coord(t);
        if s >= 1.0 {
            return self.f.eval(t).0;
        }
        if s < 0.0 {
            return 0.0;
        }
        let (f1, d1, d2) = self.inner;
        let h = self.h;
        let h5 = s.powi(3) * (10.0 - 15.0 * s + 6.0 * s * s);
        let h4 = s.powi(3) * (-4.0 + 7.0 * s - 3.0 * s * s);
        let h3 = 0.5 * s.powi(3) * (1.0 - 2.0 * s + s * s);
        f1 * h5 + h * d1 * h4 + h * h * d2 * h3
    }

    fn second_deriv(&self, t: f64) -> f64 {
        let s = self.coord(t);
        if s >= 1.0 {
            return self.f.eval(t).2;
        }
        if s < 0.0 {
            return 0.0;
        }
        let (f1, d1, d2) = self.inner;
        let h = self.h;
        let h5 = 60.0 * s - 180.0 * s * s + 120.0 * s.powi(3);
        let h4 = -24.0 * s + 84.0 * s * s - 60.0 * s.powi(3);
        let h3 = 3.0 * s - 12.0 * s * s + 10.0 * s.powi(3);
        (f1 * h5 + h * d1 * h4 + h * h * d2 * h3) / (h * h)
    }
}

/// Random-bias second layer for ReLU features `σ(α_j z + b_j)`:
/// `b_j ~ Unif(−2rΔ, 2rΔ)` and `a_j = 4rΔ f̃''_{α_j}(−b_j/α_j) / (m α_j²)`,
/// so that `E[Σ_j a_j σ(α_j z + b_j)] = f(z)` for `|z| ≤ Δ`.
/// Returns `(a, b)`.
pub fn construct_second_layer<F: ScalarTarget + ?Sized>(
    f: &F,
    alphas: &[f64],
    delta: f64,
    r: f64,
    r_star: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(delta > 0.0 && r_star > 0.0 && r >= r_star) {
        return Err(Error::InvalidArgument(format!(
            "need Δ > 0 and 0 < r* <= r, got Δ={delta}, r={r}, r*={r_star}"
        )));
    }
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("need at least one feature".into()));
    }
    let slack = 1e-12 * r;
    if let Some((j, &a)) = alphas
        .iter()
        .enumerate()
        .find(|(_, a)| !(a.abs() >= r_star - slack && a.abs() <= r + slack))
    {
        return Err(Error::InvalidArgument(format!(
            "alpha[{j}] = {a} outside [{r_star}, {r}] in magnitude"
        )));
    }
    let m = alphas.len() as f64;
    let half = 2.0 * r * delta;
    let mut a = Vec::with_capacity(alphas.len());
    let mut b = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let bj = rng.uniform(-half, half);
        let ext = Extension::new(f, alpha, r, delta);
        a.push(4.0 * r * delta * ext.second_deriv(-bj / alpha) / (m * alpha * alpha));
        b.push(bj);
    }
    Ok((a, b))
}

/// `max_z |Σ_j a_j σ(α_j z + b_j) − f(z)|` over `points` equispaced `z ∈ [−Δ, Δ]`, ReLU σ.
pub fn sup_grid_error<F: ScalarTarget + ?Sized>(
    f: &F,
    a: &[f64],
    b: &[f64],
    alphas: &[f64],
    delta: f64,
    points: usize,
) -> f64 {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let z = -delta + 2.0 * delta * i as f64 / (points - 1) as f64;
            let approx: f64 = a
                .iter()
                .zip(b)
                .zip(alphas)
                .map(|((&aj, &bj), &al)| aj * (al * z + bj).max(0.0))
                .sum();
            (approx - f.eval(z).0).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(z: f64) -> (f64, f64, f64) {
        (z * z, 2.0 * z, 2.0)
    }

    fn cubic(z: f64) -> (f64, f64, f64) {
        (z + 0.1 * z.powi(3), 1.0 + 0.3 * z * z, 0.6 * z)
    }

    /// `E_b[...]` by composite Simpson quadrature over the bias.
    fn expected_output(f: &dyn Fn(f64) -> (f64, f64, f64), alpha: f64, r: f64, delta: f64, z: f64) -> f64 {
        let ext = Extension::new(f, alpha, r, delta);
        let half = 2.0 * r * delta;
        let n = 20_000;
        let h = 2.0 * half / n as f64;
        let g = |b: f64| ext.second_deriv(-b / alpha) * (alpha * z + b).max(0.0) / (alpha * alpha);
        let mut s = g(-half) + g(half);
        for i in 1..n {
            let b = -half + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(b);
        }
        // density 1/(2·half) times the weight 4rΔ = 2·half
        s * h / 3.0
    }

    #[test]
    fn extension_matches_target_inside_and_vanishes_outside() {
        for alpha in [1.0, 0.6, -0.8] {
            let ext = Extension::new(&cubic, alpha, 1.0, 2.0);
            let inner = 2.0 / alpha.abs();
            for i in 0..=20 {
                let t = -inner + 2.0 * inner * i as f64 / 20.0;
                assert!((ext.value(t) - cubic(t).0).abs() < 1e-12);
            }
            let outer = -4.0 / alpha;
            let h = 1e-6;
            assert!(ext.value(outer).abs() < 1e-12);
            assert!(((ext.value(outer + h) - ext.value(outer - h)) / (2.0 * h)).abs() < 1e-6);
            // continuity of value and f'' at the inner edge
            let t1 = -2.0 / alpha;
            let eps = 1e-9 * alpha.signum();
            assert!((ext.value(t1 + eps) - ext.value(t1 - eps)).abs() < 1e-6);
            assert!((ext.second_deriv(t1 + eps) - ext.second_deriv(t1 - eps)).abs() < 1e-6);
        }
    }

    #[test]
    fn expected_network_reproduces_target() {
        for (alpha, f) in [
            (1.0, &square as &dyn Fn(f64) -> (f64, f64, f64)),
            (0.6, &cubic),
            (-0.8, &cubic),
            (-1.0, &square),
        ] {
            for i in 0..=8 {
                let z = -2.0 + 0.5 * i as f64;
                let e = expected_output(f, alpha, 1.0, 2.0, z);
                assert!((e - f(z).0).abs() < 1e-6, "alpha={alpha} z={z}: {e} vs {}", f(z).0);
            }
        }
    }

    #[test]
    fn interior_biases_get_flat_weight_for_square() {
        let m = 256;
        let (r, delta) = (1.0, 2.0);
        let (a, b) = construct_second_layer(&square, &vec![1.0; m], delta, r, r, &mut RngStream::new(1, 0)).unwrap();
        let mut interior = 0;
        for (aj, bj) in a.iter().zip(&b) {
            assert!(bj.abs() < 2.0 * r * delta);
            if bj.abs() <= r * delta {
                interior += 1;
                assert!((aj - 8.0 * r * delta / m as f64).abs() < 1e-15);
            }
        }
        assert!(interior > 0);
    }

    #[test]
    fn rejects_alpha_out_of_range() {
        let r = construct_second_layer(&square, &[1.0, 3.0], 2.0, 2.0, 0.5, &mut RngStream::new(1, 0));
        assert!(r.is_err());
        let r = construct_second_layer(&square, &[0.1], 2.0, 2.0, 0.5, &mut RngStream::new(1, 0));
        assert!(r.is_err());
    }

    #[test]
    fn error_shrinks_with_width() {
        let mut errs = Vec::new();
        for m in [256, 4096] {
            let mut e: Vec<f64> = (0..9)
                .map(|s| {
                    let al = vec![1.0; m];
                    let (a, b) = construct_second_layer(&square, &al, 2.0, 1.0, 1.0, &mut RngStream::new(s, 0)).unwrap();
                    sup_grid_error(&square, &a, &b, &al, 2.0, 201)
                })
                .collect();
            e.sort_by(f64::total_cmp);
            errs.push(e[4]);
        }
        assert!(errs[1] < 0.5 * errs[0], "{errs:?}");
    }
}
