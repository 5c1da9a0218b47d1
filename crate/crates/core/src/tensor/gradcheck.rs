use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Compares the reverse-mode gradient of a scalar function against central
/// differences, both evaluated in `f64`.
///
/// `f` builds the function on a fresh graph from the input leaf. Returns the
/// maximum over coordinates of `|analytic − numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(f: F, x: &Tensor<f64>, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, Var) -> Result<Var>,
{
    if !(1e-4..=1e-2).contains(&eps) {
        return Err(Error::InvalidArgument(format!("eps {eps} not in [1e-4, 1e-2]")));
    }
    let eval = |input: Tensor<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let leaf = g.leaf(input);
        let out = f(&mut g, leaf)?;
        Ok(g.scalar_value(out))
    };

    let mut g = Graph::new();
    let leaf = g.leaf(x.clone());
    let out = f(&mut g, leaf)?;
    if let Some(op) = g.non_differentiable() {
        return Err(Error::NonDifferentiable(op));
    }
    if g.value(out).len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "grad_check needs a scalar output, got shape {:?}",
            g.value(out).shape()
        )));
    }
    let grads = g.backward(out);
    let analytic = grads
        .get(leaf)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(x.shape()));

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        let a = analytic.data()[i];
        let err = (a - numeric).abs() / a.abs().max(1.0);
        if !err.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite gradient at {i}")));
        }
        worst = worst.max(err);
    }
    Ok(worst)
}
