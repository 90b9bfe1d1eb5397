//! Central finite-difference gradient probing, independent of the
//! backprop path it is used to check.

use rand::Rng;

use super::{ParamGroup, Scalar};

/// Relative error between an analytic and a reference value.
pub fn rel_err(analytic: f64, reference: f64) -> f64 {
    let denom = analytic.abs().max(reference.abs()).max(1e-8);
    (analytic - reference).abs() / denom
}

/// Central finite differences of `loss` at `probes` random parameter
/// coordinates. Returns `(tensor_index, element_index, d_loss)` triples.
pub fn finite_diff_grads<F: Scalar, P: ParamGroup<F>>(
    params: &P,
    mut loss: impl FnMut(&P) -> f64,
    probes: usize,
    eps: f64,
    rng: &mut impl Rng,
) -> Vec<(usize, usize, f64)> {
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.data.len()).collect();
    let mut out = Vec::with_capacity(probes);
    for _ in 0..probes {
        let ti = rng.gen_range(0..sizes.len());
        let ei = rng.gen_range(0..sizes[ti]);
        let base = params.tensors()[ti].data[ei];
        let mut plus = params.clone();
        plus.tensors_mut()[ti].data[ei] = base + F::c(eps);
        let mut minus = params.clone();
        minus.tensors_mut()[ti].data[ei] = base - F::c(eps);
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
        out.push((ti, ei, fd));
    }
    out
}

/// Probes `loss` at random coordinates and returns the worst relative
/// error of `analytic` against central finite differences.
pub fn max_rel_err<F: Scalar, P: ParamGroup<F>>(
    params: &P,
    analytic: &P,
    loss: impl FnMut(&P) -> f64,
    probes: usize,
    eps: f64,
    rng: &mut impl Rng,
) -> f64 {
    let fd = finite_diff_grads(params, loss, probes, eps, rng);
    let tensors = analytic.tensors();
    fd.into_iter()
        .map(|(ti, ei, g)| rel_err(tensors[ti].data[ei].to_f64(), g))
        .fold(0.0, f64::max)
}
