//! Motion agent networks: plain fully-connected actor/critic over the
//! robot's velocity and the subgoal pose in the robot frame.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::mlp::MlpCache;
use super::{ActorNet, CriticNet, Linear, Mlp, MlpSpec, ParamGroup, Scalar, TensorRef, TensorRefMut};
use crate::core::VelocityCommand;

/// Default hidden widths of both motion networks.
pub const MOTION_WIDTHS: [usize; 4] = [256, 128, 64, 64];

const STATE_DIM: usize = 5;
const HEAD_INIT: f64 = 3e-3;

/// Normalization scales for the raw state. The subgoal offset can exceed
/// the 0.6 m command radius while the robot is in transit, hence 0.7.
const OFFSET_SCALE: f64 = 0.7;

/// Raw motion-agent state: current command and the subgoal expressed in
/// the robot frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionState {
    /// Linear velocity currently applied, m/s.
    pub v: f64,
    /// Angular velocity currently applied, rad/s.
    pub w: f64,
    /// Subgoal offset in the robot frame, m.
    pub dx: f64,
    pub dy: f64,
    /// Signed bearing of the subgoal from the robot heading, rad.
    pub bearing: f64,
}

impl MotionState {
    fn normalized<F: Scalar>(&self) -> [F; STATE_DIM] {
        [
            F::c(self.v / VelocityCommand::V_MAX),
            F::c(self.w / VelocityCommand::W_MAX),
            F::c(self.dx / OFFSET_SCALE),
            F::c(self.dy / OFFSET_SCALE),
            F::c(self.bearing / std::f64::consts::PI),
        ]
    }
}

fn state_matrix<F: Scalar>(states: &[MotionState], extra: usize) -> Array2<F> {
    let mut x = Array2::zeros((states.len(), STATE_DIM + extra));
    for (b, s) in states.iter().enumerate() {
        for (i, v) in s.normalized::<F>().into_iter().enumerate() {
            x[(b, i)] = v;
        }
    }
    x
}

/// Motion actor: MLP trunk plus a 2-unit head squashed to a velocity
/// command, `v = V_MAX/2 * (tanh + 1)`, `w = W_MAX * tanh`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionActor<F> {
    pub net: Mlp<F>,
    pub head: Linear<F>,
}

pub struct MotionActorCache<F> {
    net: MlpCache<F>,
    head_in: Array2<F>,
    tanh: Array2<F>,
}

impl<F: Scalar> MotionActor<F> {
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        Self::with_widths(&MOTION_WIDTHS, rng)
    }

    /// Smaller widths keep the optimizer unit tests cheap.
    pub fn with_widths<R: Rng>(widths: &[usize], rng: &mut R) -> Self {
        Self {
            net: Mlp::init(&MlpSpec::relu(STATE_DIM, widths), rng),
            head: Linear::init_with_bound(*widths.last().expect("widths"), 2, HEAD_INIT, rng),
        }
    }

    /// Single-state convenience: predicts one velocity command.
    pub fn predict(&self, state: &MotionState) -> VelocityCommand {
        let batch = state_matrix(std::slice::from_ref(state), 0);
        let (a, _) = self.forward(&batch);
        VelocityCommand::clamped(a[(0, 0)].to_f64(), a[(0, 1)].to_f64())
    }
}

impl<F: Scalar> ParamGroup<F> for MotionActor<F> {
    fn tensors(&self) -> Vec<TensorRef<'_, F>> {
        let mut out: Vec<_> = self
            .net
            .tensors()
            .into_iter()
            .map(|mut t| {
                t.name = format!("net.{}", t.name);
                t
            })
            .collect();
        out.extend(self.head.tensors().into_iter().map(|mut t| {
            t.name = format!("head.{}", t.name);
            t
        }));
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorRefMut<'_, F>> {
        let mut out: Vec<_> = self
            .net
            .tensors_mut()
            .into_iter()
            .map(|mut t| {
                t.name = format!("net.{}", t.name);
                t
            })
            .collect();
        out.extend(self.head.tensors_mut().into_iter().map(|mut t| {
            t.name = format!("head.{}", t.name);
            t
        }));
        out
    }
}

impl<F: Scalar> ActorNet<F> for MotionActor<F> {
    type State = MotionState;
    type Batch = Array2<F>;
    type Cache = MotionActorCache<F>;

    fn batch(states: &[MotionState]) -> Array2<F> {
        state_matrix(states, 0)
    }

    fn forward(&self, batch: &Array2<F>) -> (Array2<F>, MotionActorCache<F>) {
        let (h, nc) = self.net.forward(batch);
        let z = self.head.forward(&h);
        let tanh = z.mapv(|v| v.tanh());
        let n = batch.nrows();
        let mut actions = Array2::zeros((n, 2));
        for b in 0..n {
            actions[(b, 0)] = F::c(VelocityCommand::V_MAX / 2.0) * (tanh[(b, 0)] + F::one());
            actions[(b, 1)] = F::c(VelocityCommand::W_MAX) * tanh[(b, 1)];
        }
        (actions, MotionActorCache { net: nc, head_in: h, tanh })
    }

    fn backward(
        &self,
        batch: &Array2<F>,
        cache: &MotionActorCache<F>,
        d_action: &Array2<F>,
    ) -> Self {
        let n = batch.nrows();
        let mut dz = Array2::zeros((n, 2));
        for b in 0..n {
            let t0 = cache.tanh[(b, 0)];
            let t1 = cache.tanh[(b, 1)];
            dz[(b, 0)] = d_action[(b, 0)] * F::c(VelocityCommand::V_MAX / 2.0) * (F::one() - t0 * t0);
            dz[(b, 1)] = d_action[(b, 1)] * F::c(VelocityCommand::W_MAX) * (F::one() - t1 * t1);
        }
        let (g_head, d_h) = self.head.backward(&cache.head_in, &dz);
        let (g_net, _) = self.net.backward(&cache.net, &d_h);
        Self { net: g_net, head: g_head }
    }
}

/// Motion critic: state and (normalized) action concatenated into one MLP
/// with a scalar head.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionCritic<F> {
    pub net: Mlp<F>,
    pub head: Linear<F>,
}

pub struct MotionCriticCache<F> {
    net: MlpCache<F>,
    head_in: Array2<F>,
}

impl<F: Scalar> MotionCritic<F> {
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        Self::with_widths(&MOTION_WIDTHS, rng)
    }

    pub fn with_widths<R: Rng>(widths: &[usize], rng: &mut R) -> Self {
        Self {
            net: Mlp::init(&MlpSpec::relu(STATE_DIM + 2, widths), rng),
            head: Linear::init_with_bound(*widths.last().expect("widths"), 1, HEAD_INIT, rng),
        }
    }

    fn joined(batch: &Array2<F>, actions: &Array2<F>) -> Array2<F> {
        let n = batch.nrows();
        let mut x = Array2::zeros((n, STATE_DIM + 2));
        x.slice_mut(ndarray::s![.., ..STATE_DIM]).assign(batch);
        for b in 0..n {
            x[(b, STATE_DIM)] = actions[(b, 0)] / F::c(VelocityCommand::V_MAX);
            x[(b, STATE_DIM + 1)] = actions[(b, 1)] / F::c(VelocityCommand::W_MAX);
        }
        x
    }
}

impl<F: Scalar> ParamGroup<F> for MotionCritic<F> {
    fn tensors(&self) -> Vec<TensorRef<'_, F>> {
        let mut out: Vec<_> = self
            .net
            .tensors()
            .into_iter()
            .map(|mut t| {
                t.name = format!("net.{}", t.name);
                t
            })
            .collect();
        out.extend(self.head.tensors().into_iter().map(|mut t| {
            t.name = format!("head.{}", t.name);
            t
        }));
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorRefMut<'_, F>> {
        let mut out: Vec<_> = self
            .net
            .tensors_mut()
            .into_iter()
            .map(|mut t| {
                t.name = format!("net.{}", t.name);
                t
            })
            .collect();
        out.extend(self.head.tensors_mut().into_iter().map(|mut t| {
            t.name = format!("head.{}", t.name);
            t
        }));
        out
    }
}

impl<F: Scalar> CriticNet<F> for MotionCritic<F> {
    type State = MotionState;
    type Batch = Array2<F>;
    type Cache = MotionCriticCache<F>;

    fn batch(states: &[MotionState]) -> Array2<F> {
        state_matrix(states, 0)
    }

    fn forward(&self, batch: &Array2<F>, actions: &Array2<F>) -> (Array1<F>, MotionCriticCache<F>) {
        let (h, nc) = self.net.forward(&Self::joined(batch, actions));
        let q = self.head.forward(&h).index_axis_move(Axis(1), 0);
        (q, MotionCriticCache { net: nc, head_in: h })
    }

    fn backward(
        &self,
        batch: &Array2<F>,
        cache: &MotionCriticCache<F>,
        d_q: &Array1<F>,
    ) -> (Self, Array2<F>) {
        let dz = d_q.view().insert_axis(Axis(1)).to_owned();
        let (g_head, d_h) = self.head.backward(&cache.head_in, &dz);
        let (g_net, d_in) = self.net.backward(&cache.net, &d_h);
        let n = batch.nrows();
        let mut d_action = Array2::zeros((n, 2));
        for b in 0..n {
            d_action[(b, 0)] = d_in[(b, STATE_DIM)] / F::c(VelocityCommand::V_MAX);
            d_action[(b, 1)] = d_in[(b, STATE_DIM + 1)] / F::c(VelocityCommand::W_MAX);
        }
        (Self { net: g_net, head: g_head }, d_action)
    }
}
