//! Minimal neural-network core: fully-connected ReLU stacks with exact
//! backpropagation, the softmax sector-attention block, Adam, and binary
//! checkpoints. No autodiff framework; every gradient here is written by
//! hand and checked against central finite differences.
//!
//! All code is generic over [`Scalar`] so training can run in single
//! precision while gradient checks run in double precision.

mod adam;
mod check;
mod checkpoint;
mod mlp;
mod motion;
mod subgoal;

pub use adam::{soft_update, Adam};
pub use check::{finite_diff_grads, max_rel_err, rel_err};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, NamedTensor};
pub use mlp::{softmax_rows, Activation, Linear, Mlp, MlpSpec};
pub use motion::{MotionActor, MotionCritic, MotionState, MOTION_WIDTHS};
pub use subgoal::{
    SubgoalActor, SubgoalBatch, SubgoalCritic, SubgoalState, SubgoalTrunk, EMBED_WIDTHS,
    FEATURE_WIDTHS, OUTPUT_WIDTHS, PATH_WIDTHS, SCORE_WIDTHS,
};

use ndarray::{Array1, Array2, LinalgScalar, ScalarOperand};
use num_traits::Float;
use thiserror::Error;

/// Floating-point element type for network math.
pub trait Scalar:
    Float + LinalgScalar + ScalarOperand + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
    fn c(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn c(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn c(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Precision used by the training path. Single precision roughly halves
/// the wall-clock cost of a subgoal-agent update on one core (see
/// `examples/update_bench.rs`); gradient-check tests instantiate the same
/// generic networks with `f64` regardless of this alias.
pub type Real = f32;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGrad(String),
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
}

/// Borrowed view of one named parameter tensor, flattened.
pub struct TensorRef<'a, F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [F],
}

pub struct TensorRefMut<'a, F> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a mut [F],
}

/// Anything that exposes its parameters as an ordered list of named
/// tensors. Parameter structs double as gradient containers, so Adam,
/// soft updates, serialization, and finite-difference probing all work
/// through this one interface.
pub trait ParamGroup<F: Scalar>: Clone {
    fn tensors(&self) -> Vec<TensorRef<'_, F>>;
    fn tensors_mut(&mut self) -> Vec<TensorRefMut<'_, F>>;

    /// Same structure with all values zero.
    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            for v in t.data.iter_mut() {
                *v = F::zero();
            }
        }
        z
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Accumulates `other` scaled by `alpha` into `self`.
    fn add_scaled(&mut self, other: &Self, alpha: F) {
        let ots = other.tensors();
        for (mine, theirs) in self.tensors_mut().into_iter().zip(ots) {
            for (a, b) in mine.data.iter_mut().zip(theirs.data) {
                *a = *a + alpha * *b;
            }
        }
    }
}

/// Deterministic actor interface used by the DDPG/TD3 updates.
pub trait ActorNet<F: Scalar>: ParamGroup<F> {
    /// Per-transition state as stored in the replay buffer.
    type State: Clone;
    /// Batched, normalized network input.
    type Batch;
    type Cache;

    fn batch(states: &[Self::State]) -> Self::Batch;
    /// Actions in native units, one row per state.
    fn forward(&self, batch: &Self::Batch) -> (Array2<F>, Self::Cache);
    /// Parameter gradients given dLoss/dAction (native units).
    fn backward(&self, batch: &Self::Batch, cache: &Self::Cache, d_action: &Array2<F>) -> Self;
}

/// Q-function interface used by the DDPG/TD3 updates.
pub trait CriticNet<F: Scalar>: ParamGroup<F> {
    type State: Clone;
    type Batch;
    type Cache;

    fn batch(states: &[Self::State]) -> Self::Batch;
    /// Scalar Q per row; actions in native units.
    fn forward(&self, batch: &Self::Batch, actions: &Array2<F>) -> (Array1<F>, Self::Cache);
    /// Parameter gradients and dQ-weighted action gradients given dLoss/dQ.
    fn backward(
        &self,
        batch: &Self::Batch,
        cache: &Self::Cache,
        d_q: &Array1<F>,
    ) -> (Self, Array2<F>);
}
