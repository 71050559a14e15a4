//! Central finite-difference check of reverse-mode gradients.

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;

/// Compares analytic gradients of a scalar function against central
/// differences. Returns the largest `|analytic − numeric| / max(1, |numeric|)`
/// over every element of every input.
pub fn gradient_check<F>(f: F, inputs: &[Tensor<f64>]) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let eval = |vals: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    if g.value(out).numel() != 1 {
        return Err(Error::dim(
            "gradient_check",
            "function output must be a scalar",
        ));
    }
    let grads = g.backward(out)?;

    let mut worst = 0.0f64;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(vars[k])
            .map(Tensor::to_f64_vec)
            .unwrap_or_else(|| vec![0.0; input.numel()]);
        let base = input.to_f64_vec();
        for i in 0..base.len() {
            let mut probe = inputs.to_vec();
            let mut plus = base.clone();
            plus[i] += FD_STEP;
            probe[k] = Tensor::from_f64(input.shape(), &plus)?;
            let fp = eval(&probe)?;
            let mut minus = base.clone();
            minus[i] -= FD_STEP;
            probe[k] = Tensor::from_f64(input.shape(), &minus)?;
            let fm = eval(&probe)?;
            let numeric = (fp - fm) / (2.0 * FD_STEP);
            let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
