//! Finite-difference checks of reverse-mode gradients.

use crate::array::Array;
use crate::error::Result;
use crate::graph::{Graph, Var};

/// Magnitude below which a derivative is compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub analytic: Vec<Array>,
    pub numeric: Vec<Array>,
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, REL_FLOOR)`.
    pub max_err: f64,
}

/// Compares `backward` against central differences with step `h` for a
/// scalar function of `inputs`.
pub fn check_gradients<F>(inputs: &[Array], h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|a| g.input(a.clone())).collect();
    let out = f(&mut g, &vars)?;
    let grads = g.backward(out)?;
    let analytic: Vec<Array> = vars
        .iter()
        .zip(inputs)
        .map(|(v, a)| grads.wrt(*v).cloned().unwrap_or_else(|| Array::zeros(a.shape())))
        .collect();

    let eval = |xs: &[Array]| -> Result<f64> {
        let mut g = Graph::inference();
        let vars: Vec<Var> = xs.iter().map(|a| g.input(a.clone())).collect();
        let out = f(&mut g, &vars)?;
        Ok(g.scalar(out))
    };
    let mut work: Vec<Array> = inputs.to_vec();
    let mut numeric = Vec::with_capacity(inputs.len());
    let mut max_err: f64 = 0.0;
    for k in 0..inputs.len() {
        let mut num = Array::zeros(inputs[k].shape());
        for j in 0..inputs[k].len() {
            let orig = work[k].data()[j];
            work[k].data_mut()[j] = orig + h;
            let fp = eval(&work)?;
            work[k].data_mut()[j] = orig - h;
            let fm = eval(&work)?;
            work[k].data_mut()[j] = orig;
            let d = (fp - fm) / (2.0 * h);
            num.data_mut()[j] = d;
            let a = analytic[k].data()[j];
            max_err = max_err.max(relative_error(a, d));
        }
        numeric.push(num);
    }
    Ok(GradCheckReport { analytic, numeric, max_err })
}
