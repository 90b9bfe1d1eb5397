//! Bias-corrected adaptive moment optimizer and Polyak soft updates.

use super::{NetError, ParamGroup, Scalar};

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
/// Moment buffers are laid out to match the parameter group's tensor order
/// and are allocated lazily on the first step.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update. Rejects non-finite gradients, naming the offending
    /// tensor. With `lr == 0` parameters are returned bitwise unchanged.
    pub fn step<P: ParamGroup<F>>(&mut self, params: &mut P, grads: &P) -> Result<(), NetError> {
        for t in grads.tensors() {
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(NetError::NonFiniteGrad(t.name));
            }
        }
        if self.m.is_empty() {
            for t in grads.tensors() {
                self.m.push(vec![F::zero(); t.data.len()]);
                self.v.push(vec![F::zero(); t.data.len()]);
            }
        }
        self.t += 1;
        let b1 = F::c(self.beta1);
        let b2 = F::c(self.beta2);
        let one = F::one();
        let bc1 = F::c(1.0 - self.beta1.powi(self.t as i32));
        let bc2 = F::c(1.0 - self.beta2.powi(self.t as i32));
        let lr = F::c(self.lr);
        let eps = F::c(self.eps);
        if self.lr == 0.0 {
            // still advance moments so optimizer state stays well-defined
            for (gt, (m, v)) in grads.tensors().iter().zip(self.m.iter_mut().zip(&mut self.v)) {
                for ((g, m), v) in gt.data.iter().zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m = b1 * *m + (one - b1) * *g;
                    *v = b2 * *v + (one - b2) * *g * *g;
                }
            }
            return Ok(());
        }
        let gts = grads.tensors();
        for ((pt, gt), (m, v)) in params
            .tensors_mut()
            .into_iter()
            .zip(gts)
            .zip(self.m.iter_mut().zip(&mut self.v))
        {
            for (((p, g), m), v) in pt.data.iter_mut().zip(gt.data).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (one - b1) * *g;
                *v = b2 * *v + (one - b2) * *g * *g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Polyak averaging: `target = (1 - tau) * target + tau * online`.
pub fn soft_update<F: Scalar, P: ParamGroup<F>>(target: &mut P, online: &P, tau: f64) {
    let tau = F::c(tau);
    let one = F::one();
    let ots = online.tensors();
    for (tt, ot) in target.tensors_mut().into_iter().zip(ots) {
        for (t, o) in tt.data.iter_mut().zip(ot.data) {
            *t = (one - tau) * *t + tau * *o;
        }
    }
}
