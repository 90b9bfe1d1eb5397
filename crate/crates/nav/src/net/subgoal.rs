//! The subgoal agent's networks: a shared-parameter attention block over
//! 10 lidar sectors, a path module over the waypoint window, and the
//! combined actor / critic heads.
//!
//! One embedding, feature, and score network encodes every sector with the
//! same parameters; a softmax over the per-sector scores weights the
//! feature sum.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::mlp::{softmax_rows, softmax_rows_backward, MlpCache};
use super::{
    Activation, ActorNet, CriticNet, Linear, Mlp, MlpSpec, ParamGroup, Scalar, TensorRef,
    TensorRefMut,
};
use crate::core::Subgoal;
use crate::percept::{SectorInput, SECTORS, SECTOR_WIDTH};
use crate::planner::WaypointWindow;

/// Hidden widths of the sector embedding network.
pub const EMBED_WIDTHS: [usize; 3] = [512, 256, 128];
/// Hidden widths of the per-sector feature network.
pub const FEATURE_WIDTHS: [usize; 3] = [256, 128, 64];
/// Widths of the per-sector score network (scalar output).
pub const SCORE_WIDTHS: [usize; 3] = [128, 64, 1];
/// Widths of the waypoint path network.
pub const PATH_WIDTHS: [usize; 3] = [128, 64, 32];
/// Widths of the output network ahead of the final head.
pub const OUTPUT_WIDTHS: [usize; 3] = [128, 64, 64];

const LIDAR_FEATURE: usize = 64;
const PATH_FEATURE: usize = 32;
const WAYPOINT_DIM: usize = 10;

/// Input normalization scales.
const SECTOR_SCALE: f64 = 4.0;
const WAYPOINT_SCALE: f64 = 2.0;
const HEAD_INIT: f64 = 3e-3;

fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

/// Raw (unnormalized) subgoal-agent state as stored in the replay buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgoalState {
    pub sectors: [[f64; SECTOR_WIDTH]; SECTORS],
    pub waypoints: [f64; WAYPOINT_DIM],
}

impl SubgoalState {
    pub fn new(sectors: &SectorInput, waypoints: &WaypointWindow) -> Self {
        Self {
            sectors: sectors.sectors,
            waypoints: waypoints.flat(),
        }
    }
}

/// Normalized batch input: sectors stacked to ((batch * 10), 16).
pub struct SubgoalBatch<F> {
    pub sectors: Array2<F>,
    pub waypoints: Array2<F>,
    pub n: usize,
}

impl<F: Scalar> SubgoalBatch<F> {
    pub fn from_states(states: &[SubgoalState]) -> Self {
        let n = states.len();
        let mut sectors = Array2::zeros((n * SECTORS, SECTOR_WIDTH));
        let mut waypoints = Array2::zeros((n, WAYPOINT_DIM));
        for (b, s) in states.iter().enumerate() {
            for j in 0..SECTORS {
                for i in 0..SECTOR_WIDTH {
                    sectors[(b * SECTORS + j, i)] = F::c(s.sectors[j][i] / SECTOR_SCALE);
                }
            }
            for i in 0..WAYPOINT_DIM {
                waypoints[(b, i)] = F::c(s.waypoints[i] / WAYPOINT_SCALE);
            }
        }
        Self { sectors, waypoints, n }
    }
}

/// The attention block: shared embedding/feature/score networks and the
/// softmax-weighted feature sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgoalTrunk<F> {
    pub embed: Mlp<F>,
    pub feature: Mlp<F>,
    pub score: Mlp<F>,
}

pub struct TrunkCache<F> {
    embed: MlpCache<F>,
    feature: MlpCache<F>,
    score: MlpCache<F>,
    feats: Array2<F>,
    /// Attention weights, (batch, 10).
    pub weights: Array2<F>,
}

impl<F: Scalar> SubgoalTrunk<F> {
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        Self {
            embed: Mlp::init(&MlpSpec::relu(SECTOR_WIDTH, &EMBED_WIDTHS), rng),
            feature: Mlp::init(&MlpSpec::relu(EMBED_WIDTHS[2], &FEATURE_WIDTHS), rng),
            score: Mlp::init(
                &MlpSpec {
                    input: EMBED_WIDTHS[2],
                    widths: SCORE_WIDTHS.to_vec(),
                    output: Activation::Linear,
                },
                rng,
            ),
        }
    }

    /// Attention forward pass: sectors ((batch * 10), 16) to the weighted
    /// lidar feature (batch, 64).
    pub fn forward(&self, sectors: &Array2<F>) -> (Array2<F>, TrunkCache<F>) {
        debug_assert_eq!(sectors.nrows() % SECTORS, 0);
        let n = sectors.nrows() / SECTORS;
        let (emb, ecache) = self.embed.forward(sectors);
        let (feats, fcache) = self.feature.forward(&emb);
        let (scores_flat, scache) = self.score.forward(&emb);
        let scores = scores_flat
            .into_shape_with_order((n, SECTORS))
            .expect("score reshape");
        let weights = softmax_rows(&scores);
        let mut out = Array2::zeros((n, LIDAR_FEATURE));
        for b in 0..n {
            for j in 0..SECTORS {
                let w = weights[(b, j)];
                let f = feats.row(b * SECTORS + j);
                let mut o = out.row_mut(b);
                o.zip_mut_with(&f, |acc, &v| *acc = *acc + w * v);
            }
        }
        (
            out,
            TrunkCache { embed: ecache, feature: fcache, score: scache, feats, weights },
        )
    }

    /// Backprop through the weighted sum, softmax, and all three shared
    /// networks; returns gradients and dLoss/dsectors.
    pub fn backward(&self, cache: &TrunkCache<F>, d_out: &Array2<F>) -> (Self, Array2<F>) {
        let n = d_out.nrows();
        let mut d_feats = Array2::zeros((n * SECTORS, LIDAR_FEATURE));
        let mut d_weights = Array2::zeros((n, SECTORS));
        for b in 0..n {
            let g = d_out.row(b);
            for j in 0..SECTORS {
                let w = cache.weights[(b, j)];
                let f = cache.feats.row(b * SECTORS + j);
                let mut df = d_feats.row_mut(b * SECTORS + j);
                df.zip_mut_with(&g, |acc, &v| *acc = w * v);
                d_weights[(b, j)] = g.iter().zip(f.iter()).fold(F::zero(), |a, (&x, &y)| a + x * y);
            }
        }
        let d_scores = softmax_rows_backward(&cache.weights, &d_weights)
            .into_shape_with_order((n * SECTORS, 1))
            .expect("score grad reshape");
        let (g_feature, d_emb_f) = self.feature.backward(&cache.feature, &d_feats);
        let (g_score, d_emb_s) = self.score.backward(&cache.score, &d_scores);
        let (g_embed, d_sectors) = self.embed.backward(&cache.embed, &(d_emb_f + d_emb_s));
        (
            Self { embed: g_embed, feature: g_feature, score: g_score },
            d_sectors,
        )
    }
}

fn prefixed<'a, F>(prefix: &str, ts: Vec<TensorRef<'a, F>>) -> Vec<TensorRef<'a, F>> {
    ts.into_iter()
        .map(|mut t| {
            t.name = format!("{prefix}.{}", t.name);
            t
        })
        .collect()
}

fn prefixed_mut<'a, F>(prefix: &str, ts: Vec<TensorRefMut<'a, F>>) -> Vec<TensorRefMut<'a, F>> {
    ts.into_iter()
        .map(|mut t| {
            t.name = format!("{prefix}.{}", t.name);
            t
        })
        .collect()
}

impl<F: Scalar> ParamGroup<F> for SubgoalTrunk<F> {
    fn tensors(&self) -> Vec<TensorRef<'_, F>> {
        let mut out = prefixed("embed", self.embed.tensors());
        out.extend(prefixed("feature", self.feature.tensors()));
        out.extend(prefixed("score", self.score.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorRefMut<'_, F>> {
        let mut out = prefixed_mut("embed", self.embed.tensors_mut());
        out.extend(prefixed_mut("feature", self.feature.tensors_mut()));
        out.extend(prefixed_mut("score", self.score.tensors_mut()));
        out
    }
}

/// Subgoal actor: attention trunk + path module, concatenated into the
/// output module and a 2-unit head squashed to `(l, theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgoalActor<F> {
    pub trunk: SubgoalTrunk<F>,
    pub path: Mlp<F>,
    pub output: Mlp<F>,
    pub head: Linear<F>,
}

pub struct SubgoalActorCache<F> {
    trunk: TrunkCache<F>,
    path: MlpCache<F>,
    output: MlpCache<F>,
    head_in: Array2<F>,
    /// Sigmoid values of the two raw head outputs.
    sig: Array2<F>,
}

impl<F: Scalar> SubgoalActorCache<F> {
    /// Attention weights of the forward pass, (batch, 10).
    pub fn attention_weights(&self) -> &Array2<F> {
        &self.trunk.weights
    }
}

impl<F: Scalar> SubgoalActor<F> {
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        Self {
            trunk: SubgoalTrunk::init(rng),
            path: Mlp::init(&MlpSpec::relu(WAYPOINT_DIM, &PATH_WIDTHS), rng),
            output: Mlp::init(&MlpSpec::relu(LIDAR_FEATURE + PATH_FEATURE, &OUTPUT_WIDTHS), rng),
            head: Linear::init_with_bound(OUTPUT_WIDTHS[2], 2, HEAD_INIT, rng),
        }
    }

    fn forward_impl(&self, batch: &SubgoalBatch<F>) -> (Array2<F>, SubgoalActorCache<F>) {
        let (lidar, tc) = self.trunk.forward(&batch.sectors);
        let (path, pc) = self.path.forward(&batch.waypoints);
        let mut joint = Array2::zeros((batch.n, LIDAR_FEATURE + PATH_FEATURE));
        joint.slice_mut(ndarray::s![.., ..LIDAR_FEATURE]).assign(&lidar);
        joint.slice_mut(ndarray::s![.., LIDAR_FEATURE..]).assign(&path);
        let (o, oc) = self.output.forward(&joint);
        let z = self.head.forward(&o);
        let sig = z.mapv(sigmoid);
        let mut actions = Array2::zeros((batch.n, 2));
        for b in 0..batch.n {
            actions[(b, 0)] = F::c(Subgoal::L_MAX) * sig[(b, 0)];
            // theta centered on straight ahead so forward subgoals live in
            // the well-conditioned middle of the sigmoid, not its tails
            actions[(b, 1)] =
                F::c(std::f64::consts::TAU) * sig[(b, 1)] - F::c(std::f64::consts::PI);
        }
        (
            actions,
            SubgoalActorCache { trunk: tc, path: pc, output: oc, head_in: o, sig },
        )
    }

    fn backward_impl(
        &self,
        batch: &SubgoalBatch<F>,
        cache: &SubgoalActorCache<F>,
        d_action: &Array2<F>,
    ) -> Self {
        let mut dz = Array2::zeros((batch.n, 2));
        for b in 0..batch.n {
            let s0 = cache.sig[(b, 0)];
            let s1 = cache.sig[(b, 1)];
            dz[(b, 0)] = d_action[(b, 0)] * F::c(Subgoal::L_MAX) * s0 * (F::one() - s0);
            dz[(b, 1)] = d_action[(b, 1)] * F::c(std::f64::consts::TAU) * s1 * (F::one() - s1);
        }
        let (g_head, d_o) = self.head.backward(&cache.head_in, &dz);
        let (g_output, d_joint) = self.output.backward(&cache.output, &d_o);
        let d_lidar = d_joint.slice(ndarray::s![.., ..LIDAR_FEATURE]).to_owned();
        let d_path = d_joint.slice(ndarray::s![.., LIDAR_FEATURE..]).to_owned();
        let (g_path, _) = self.path.backward(&cache.path, &d_path);
        let (g_trunk, _) = self.trunk.backward(&cache.trunk, &d_lidar);
        Self { trunk: g_trunk, path: g_path, output: g_output, head: g_head }
    }

    /// Single-state convenience: predicts one subgoal.
    pub fn predict(&self, state: &SubgoalState) -> Subgoal {
        let batch = SubgoalBatch::from_states(std::slice::from_ref(state));
        let (a, _) = self.forward_impl(&batch);
        Subgoal::new(
            a[(0, 0)].to_f64().clamp(0.0, Subgoal::L_MAX),
            a[(0, 1)].to_f64(),
        )
    }

    /// Attention weights for one state, for introspection.
    pub fn attention(&self, state: &SubgoalState) -> [f64; SECTORS] {
        let batch = SubgoalBatch::from_states(std::slice::from_ref(state));
        let (_, cache) = self.forward_impl(&batch);
        let mut out = [0.0; SECTORS];
        for j in 0..SECTORS {
            out[j] = cache.trunk.weights[(0, j)].to_f64();
        }
        out
    }
}

impl<F: Scalar> ParamGroup<F> for SubgoalActor<F> {
    fn tensors(&self) -> Vec<TensorRef<'_, F>> {
        let mut out = self.trunk.tensors();
        out.extend(prefixed("path", self.path.tensors()));
        out.extend(prefixed("output", self.output.tensors()));
        out.extend(prefixed("head", self.head.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorRefMut<'_, F>> {
        let mut out = self.trunk.tensors_mut();
        out.extend(prefixed_mut("path", self.path.tensors_mut()));
        out.extend(prefixed_mut("output", self.output.tensors_mut()));
        out.extend(prefixed_mut("head", self.head.tensors_mut()));
        out
    }
}

impl<F: Scalar> ActorNet<F> for SubgoalActor<F> {
    type State = SubgoalState;
    type Batch = SubgoalBatch<F>;
    type Cache = SubgoalActorCache<F>;

    fn batch(states: &[SubgoalState]) -> SubgoalBatch<F> {
        SubgoalBatch::from_states(states)
    }

    fn forward(&self, batch: &SubgoalBatch<F>) -> (Array2<F>, SubgoalActorCache<F>) {
        self.forward_impl(batch)
    }

    fn backward(
        &self,
        batch: &SubgoalBatch<F>,
        cache: &SubgoalActorCache<F>,
        d_action: &Array2<F>,
    ) -> Self {
        self.backward_impl(batch, cache, d_action)
    }
}

/// Subgoal critic: same architecture as the actor, except the path module
/// additionally takes the (normalized) action and the head is scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgoalCritic<F> {
    pub trunk: SubgoalTrunk<F>,
    pub path: Mlp<F>,
    pub output: Mlp<F>,
    pub head: Linear<F>,
}

pub struct SubgoalCriticCache<F> {
    trunk: TrunkCache<F>,
    path: MlpCache<F>,
    output: MlpCache<F>,
    head_in: Array2<F>,
}

impl<F: Scalar> SubgoalCritic<F> {
    pub fn init<R: Rng>(rng: &mut R) -> Self {
        Self {
            trunk: SubgoalTrunk::init(rng),
            path: Mlp::init(&MlpSpec::relu(WAYPOINT_DIM + 2, &PATH_WIDTHS), rng),
            output: Mlp::init(&MlpSpec::relu(LIDAR_FEATURE + PATH_FEATURE, &OUTPUT_WIDTHS), rng),
            head: Linear::init_with_bound(OUTPUT_WIDTHS[2], 1, HEAD_INIT, rng),
        }
    }

    fn path_input(batch: &SubgoalBatch<F>, actions: &Array2<F>) -> Array2<F> {
        let mut x = Array2::zeros((batch.n, WAYPOINT_DIM + 2));
        x.slice_mut(ndarray::s![.., ..WAYPOINT_DIM]).assign(&batch.waypoints);
        for b in 0..batch.n {
            x[(b, WAYPOINT_DIM)] = actions[(b, 0)] / F::c(Subgoal::L_MAX);
            x[(b, WAYPOINT_DIM + 1)] = actions[(b, 1)] / F::c(std::f64::consts::TAU);
        }
        x
    }
}

impl<F: Scalar> ParamGroup<F> for SubgoalCritic<F> {
    fn tensors(&self) -> Vec<TensorRef<'_, F>> {
        let mut out = self.trunk.tensors();
        out.extend(prefixed("path", self.path.tensors()));
        out.extend(prefixed("output", self.output.tensors()));
        out.extend(prefixed("head", self.head.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<TensorRefMut<'_, F>> {
        let mut out = self.trunk.tensors_mut();
        out.extend(prefixed_mut("path", self.path.tensors_mut()));
        out.extend(prefixed_mut("output", self.output.tensors_mut()));
        out.extend(prefixed_mut("head", self.head.tensors_mut()));
        out
    }
}

impl<F: Scalar> CriticNet<F> for SubgoalCritic<F> {
    type State = SubgoalState;
    type Batch = SubgoalBatch<F>;
    type Cache = SubgoalCriticCache<F>;

    fn batch(states: &[SubgoalState]) -> SubgoalBatch<F> {
        SubgoalBatch::from_states(states)
    }

    fn forward(&self, batch: &SubgoalBatch<F>, actions: &Array2<F>) -> (Array1<F>, SubgoalCriticCache<F>) {
        let (lidar, tc) = self.trunk.forward(&batch.sectors);
        let (path, pc) = self.path.forward(&Self::path_input(batch, actions));
        let mut joint = Array2::zeros((batch.n, LIDAR_FEATURE + PATH_FEATURE));
        joint.slice_mut(ndarray::s![.., ..LIDAR_FEATURE]).assign(&lidar);
        joint.slice_mut(ndarray::s![.., LIDAR_FEATURE..]).assign(&path);
        let (o, oc) = self.output.forward(&joint);
        let q = self.head.forward(&o).index_axis_move(Axis(1), 0);
        (q, SubgoalCriticCache { trunk: tc, path: pc, output: oc, head_in: o })
    }

    fn backward(
        &self,
        batch: &SubgoalBatch<F>,
        cache: &SubgoalCriticCache<F>,
        d_q: &Array1<F>,
    ) -> (Self, Array2<F>) {
        let dz = d_q.view().insert_axis(Axis(1)).to_owned();
        let (g_head, d_o) = self.head.backward(&cache.head_in, &dz);
        let (g_output, d_joint) = self.output.backward(&cache.output, &d_o);
        let d_lidar = d_joint.slice(ndarray::s![.., ..LIDAR_FEATURE]).to_owned();
        let d_path = d_joint.slice(ndarray::s![.., LIDAR_FEATURE..]).to_owned();
        let (g_path, d_path_in) = self.path.backward(&cache.path, &d_path);
        let (g_trunk, _) = self.trunk.backward(&cache.trunk, &d_lidar);
        let mut d_action = Array2::zeros((batch.n, 2));
        for b in 0..batch.n {
            d_action[(b, 0)] = d_path_in[(b, WAYPOINT_DIM)] / F::c(Subgoal::L_MAX);
            d_action[(b, 1)] = d_path_in[(b, WAYPOINT_DIM + 1)] / F::c(std::f64::consts::TAU);
        }
        (
            Self { trunk: g_trunk, path: g_path, output: g_output, head: g_head },
            d_action,
        )
    }
}
