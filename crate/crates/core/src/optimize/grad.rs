use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Loss, Sample, StudentNet};

/// Per-sample gradient of `ℓ(ŷ(x; W), y)` with respect to `W`:
/// row `j` is `∂₁ℓ · a_j · σ'(⟨w_j, x⟩ + b_j) · xᵀ`.
pub fn grad_first_layer(net: &StudentNet, loss: &Loss, s: &Sample) -> Result<Matrix> {
    if s.x.len() != net.d() {
        return Err(Error::Shape(format!(
            "sample has dimension {}, network expects {}",
            s.x.len(),
            net.d()
        )));
    }
    let mut ws = Workspace::new(net.m());
    let d1 = ws.forward(net, &s.x, loss, s.y).1;
    let mut g = Matrix::zeros(net.m(), net.d());
    for j in 0..net.m() {
        let c = d1 * net.a()[j] * ws.dsigma[j];
        if c != 0.0 {
            for (gi, xi) in g.row_mut(j).iter_mut().zip(&s.x) {
                *gi = c * xi;
            }
        }
    }
    Ok(g)
}

/// Scratch buffers for one forward/backward pass.
pub(crate) struct Workspace {
    pub dsigma: Vec<f64>,
}

impl Workspace {
    pub fn new(m: usize) -> Self {
        Workspace {
            dsigma: vec![0.0; m],
        }
    }

    /// Fills `dsigma` with `σ'(⟨w_j,x⟩+b_j)` and returns `(ŷ, ∂₁ℓ, ℓ)`.
    #[inline]
    pub fn forward(&mut self, net: &StudentNet, x: &[f64], loss: &Loss, y: f64) -> (f64, f64, f64) {
        let act = net.activation();
        let mut yhat = 0.0;
        for (j, w) in net.w().iter_rows().enumerate() {
            let z = crate::linalg::dot(w, x) + net.b()[j];
            let (v, dv) = act.value_and_deriv(z);
            self.dsigma[j] = dv;
            yhat += net.a()[j] * v;
        }
        (yhat, loss.d1(yhat, y), loss.value(yhat, y))
    }
}
