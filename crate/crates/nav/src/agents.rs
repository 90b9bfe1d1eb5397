//! Reward functions, replay memory, exploration noise, and the two
//! off-policy updates: DDPG for the subgoal agent and TD3 for the motion
//! agent. Both updates are generic over the actor/critic network types so
//! they can be unit-tested with small networks on bandit problems.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::net::{soft_update, ActorNet, Adam, CriticNet, NetError, Scalar};

/// Penalty applied on any collision.
pub const COLLISION_PENALTY: f64 = -10.0;
/// Weight of the distance-to-path term.
pub const PATH_WEIGHT: f64 = 0.5;
/// Weight of the proximity penalty.
pub const SAFETY_WEIGHT: f64 = 2.0;
/// Clearance below which the proximity penalty activates, m.
pub const SAFETY_RADIUS: f64 = 0.5;
/// Bonus when the motion agent reaches the commanded subgoal.
pub const REACH_BONUS: f64 = 2.0;

/// Itemized subgoal-agent reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgoalReward {
    pub collision: f64,
    pub path: f64,
    pub safety: f64,
}

impl SubgoalReward {
    pub fn total(&self) -> f64 {
        self.collision + self.path + self.safety
    }
}

/// Subgoal-agent reward from the collision flag, the distance to the
/// tracked global-path point, and the closest obstacle clearance.
pub fn subgoal_reward(collided: bool, d_path: f64, d_closest: f64) -> SubgoalReward {
    SubgoalReward {
        collision: if collided { COLLISION_PENALTY } else { 0.0 },
        path: -PATH_WEIGHT * d_path,
        safety: if d_closest <= SAFETY_RADIUS {
            -SAFETY_WEIGHT * (SAFETY_RADIUS - d_closest)
        } else {
            0.0
        },
    }
}

/// Itemized motion-agent reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionReward {
    pub reach: f64,
    pub dist: f64,
}

impl MotionReward {
    pub fn total(&self) -> f64 {
        self.reach + self.dist
    }
}

/// Motion-agent reward from the reached flag and the remaining distance
/// to the commanded subgoal.
pub fn motion_reward(reached: bool, d_subgoal: f64) -> MotionReward {
    MotionReward {
        reach: if reached { REACH_BONUS } else { 0.0 },
        dist: -d_subgoal,
    }
}

/// One stored interaction.
#[derive(Debug, Clone)]
pub struct Transition<S> {
    pub state: S,
    pub action: [f64; 2],
    pub reward: f64,
    pub next_state: S,
    pub done: bool,
}

/// Fixed-capacity FIFO replay memory with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<S> {
    capacity: usize,
    items: Vec<Transition<S>>,
    /// Next slot to overwrite once full.
    write: usize,
}

impl<S: Clone> ReplayBuffer<S> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { capacity, items: Vec::new(), write: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition<S>) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.write] = t;
            self.write = (self.write + 1) % self.capacity;
        }
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng>(&'a self, n: usize, rng: &mut R) -> Vec<&'a Transition<S>> {
        assert!(!self.items.is_empty());
        (0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect()
    }
}

/// One action dimension: a clamped interval or a wrapping circular range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionDim {
    Interval { lo: f64, hi: f64 },
    Circular { period: f64 },
}

impl ActionDim {
    /// Half-width used to scale noise magnitudes.
    pub fn half_range(&self) -> f64 {
        match self {
            Self::Interval { lo, hi } => (hi - lo) / 2.0,
            Self::Circular { period } => period / 2.0,
        }
    }

    /// Projects a raw value back into the dimension's range.
    pub fn project(&self, x: f64) -> f64 {
        match self {
            Self::Interval { lo, hi } => x.clamp(*lo, *hi),
            // centered wrap: [-period/2, period/2)
            Self::Circular { period } => (x + period / 2.0).rem_euclid(*period) - period / 2.0,
        }
    }
}

/// The action space of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSpace {
    pub dims: [ActionDim; 2],
}

impl ActionSpace {
    /// `(v, w)` of the motion agent.
    pub fn motion() -> Self {
        use crate::core::VelocityCommand as VC;
        Self {
            dims: [
                ActionDim::Interval { lo: 0.0, hi: VC::V_MAX },
                ActionDim::Interval { lo: -VC::W_MAX, hi: VC::W_MAX },
            ],
        }
    }

    /// `(l, theta)` of the subgoal agent; the direction wraps.
    pub fn subgoal() -> Self {
        Self {
            dims: [
                ActionDim::Interval { lo: 0.0, hi: crate::core::Subgoal::L_MAX },
                ActionDim::Circular { period: std::f64::consts::TAU },
            ],
        }
    }

    pub fn project(&self, a: [f64; 2]) -> [f64; 2] {
        [self.dims[0].project(a[0]), self.dims[1].project(a[1])]
    }

    /// Adds zero-mean Gaussian exploration noise with standard deviation
    /// `sigma_frac` of each dimension's half-range, then projects back.
    pub fn explore<R: Rng>(&self, a: [f64; 2], sigma_frac: f64, rng: &mut R) -> [f64; 2] {
        let mut out = a;
        for (v, d) in out.iter_mut().zip(&self.dims) {
            let n = Normal::new(0.0, sigma_frac * d.half_range()).expect("sigma");
            *v = d.project(*v + n.sample(rng));
        }
        out
    }
}

fn actions_matrix<F: Scalar, S>(batch: &[&Transition<S>]) -> Array2<F> {
    let mut a = Array2::zeros((batch.len(), 2));
    for (b, t) in batch.iter().enumerate() {
        a[(b, 0)] = F::c(t.action[0]);
        a[(b, 1)] = F::c(t.action[1]);
    }
    a
}

fn states_of<S: Clone>(batch: &[&Transition<S>]) -> (Vec<S>, Vec<S>) {
    (
        batch.iter().map(|t| t.state.clone()).collect(),
        batch.iter().map(|t| t.next_state.clone()).collect(),
    )
}

fn td_targets<F: Scalar, S>(batch: &[&Transition<S>], q_next: &Array1<F>, gamma: f64) -> Array1<F> {
    Array1::from_iter(batch.iter().zip(q_next.iter()).map(|(t, &q)| {
        let boot = if t.done { F::zero() } else { F::c(gamma) * q };
        F::c(t.reward) + boot
    }))
}

/// Losses reported by one update step.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// Negative mean Q under the current policy; absent on critic-only steps.
    pub actor_loss: Option<f64>,
}

/// Shared hyperparameters of both updates.
#[derive(Debug, Clone, Copy)]
pub struct UpdateConfig {
    pub gamma: f64,
    pub tau: f64,
    /// TD3 target-policy smoothing, as fractions of each half-range.
    pub smoothing_sigma: f64,
    pub smoothing_clip: f64,
    /// Critic updates per actor/target update (1 for DDPG, 2 for TD3).
    pub policy_delay: u64,
}

impl UpdateConfig {
    pub fn ddpg() -> Self {
        Self { gamma: 0.99, tau: 5e-3, smoothing_sigma: 0.0, smoothing_clip: 0.0, policy_delay: 1 }
    }

    pub fn td3() -> Self {
        Self { gamma: 0.99, tau: 5e-3, smoothing_sigma: 0.2, smoothing_clip: 0.5, policy_delay: 2 }
    }
}

/// DDPG: one actor, one critic, Polyak-averaged targets.
#[derive(Debug, Clone)]
pub struct Ddpg<F, A, C> {
    pub actor: A,
    pub actor_target: A,
    pub critic: C,
    pub critic_target: C,
    pub actor_opt: Adam<F>,
    pub critic_opt: Adam<F>,
    pub cfg: UpdateConfig,
}

impl<F, A, C, S> Ddpg<F, A, C>
where
    F: Scalar,
    S: Clone,
    A: ActorNet<F, State = S>,
    C: CriticNet<F, State = S>,
{
    pub fn new(actor: A, critic: C, actor_lr: f64, critic_lr: f64, cfg: UpdateConfig) -> Self {
        Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            actor_opt: Adam::new(actor_lr),
            critic_opt: Adam::new(critic_lr),
            cfg,
        }
    }

    pub fn update(&mut self, batch: &[&Transition<S>]) -> Result<UpdateStats, NetError> {
        self.update_with(batch, true)
    }

    /// Like [`update`](Self::update), but the actor step can be skipped to
    /// warm the critic up against a frozen policy.
    pub fn update_with(
        &mut self,
        batch: &[&Transition<S>],
        update_actor: bool,
    ) -> Result<UpdateStats, NetError> {
        let n = batch.len();
        let (states, next_states) = states_of(batch);
        let cb = C::batch(&states);
        let cb_next = C::batch(&next_states);
        let ab = A::batch(&states);
        let ab_next = A::batch(&next_states);
        let actions = actions_matrix::<F, S>(batch);

        // critic step toward the bootstrapped TD target
        let (a_next, _) = self.actor_target.forward(&ab_next);
        let (q_next, _) = self.critic_target.forward(&cb_next, &a_next);
        let y = td_targets(batch, &q_next, self.cfg.gamma);
        let (q, ccache) = self.critic.forward(&cb, &actions);
        let diff = &q - &y;
        let critic_loss = diff.iter().map(|&d| { let d = Scalar::to_f64(d); d * d }).sum::<f64>() / n as f64;
        if !critic_loss.is_finite() {
            return Err(NetError::NonFiniteLoss(format!("critic loss {critic_loss}")));
        }
        let d_q = diff.mapv(|d| F::c(2.0 / n as f64) * d);
        let (cgrads, _) = self.critic.backward(&cb, &ccache, &d_q);
        self.critic_opt.step(&mut self.critic, &cgrads)?;

        // actor step up the critic's action gradient
        let mut actor_loss = None;
        if update_actor {
            let (a_pi, acache) = self.actor.forward(&ab);
            let (q_pi, ccache_pi) = self.critic.forward(&cb, &a_pi);
            actor_loss = Some(-q_pi.iter().map(|&v| Scalar::to_f64(v)).sum::<f64>() / n as f64);
            let d_q_pi = Array1::from_elem(n, F::c(-1.0 / n as f64));
            let (_, d_action) = self.critic.backward(&cb, &ccache_pi, &d_q_pi);
            let agrads = self.actor.backward(&ab, &acache, &d_action);
            self.actor_opt.step(&mut self.actor, &agrads)?;
            soft_update(&mut self.actor_target, &self.actor, self.cfg.tau);
        }

        soft_update(&mut self.critic_target, &self.critic, self.cfg.tau);
        Ok(UpdateStats { critic_loss, actor_loss })
    }
}

/// TD3: twin critics, target-policy smoothing, delayed policy updates.
#[derive(Debug, Clone)]
pub struct Td3<F, A, C> {
    pub actor: A,
    pub actor_target: A,
    pub critic1: C,
    pub critic2: C,
    pub critic1_target: C,
    pub critic2_target: C,
    pub actor_opt: Adam<F>,
    pub critic1_opt: Adam<F>,
    pub critic2_opt: Adam<F>,
    pub cfg: UpdateConfig,
    pub space: ActionSpace,
    steps: u64,
}

impl<F, A, C, S> Td3<F, A, C>
where
    F: Scalar,
    S: Clone,
    A: ActorNet<F, State = S>,
    C: CriticNet<F, State = S>,
{
    pub fn new(
        actor: A,
        critic1: C,
        critic2: C,
        actor_lr: f64,
        critic_lr: f64,
        cfg: UpdateConfig,
        space: ActionSpace,
    ) -> Self {
        Self {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            actor_opt: Adam::new(actor_lr),
            critic1_opt: Adam::new(critic_lr),
            critic2_opt: Adam::new(critic_lr),
            cfg,
            space,
            steps: 0,
        }
    }

    pub fn update<R: Rng>(
        &mut self,
        batch: &[&Transition<S>],
        rng: &mut R,
    ) -> Result<UpdateStats, NetError> {
        let n = batch.len();
        let (states, next_states) = states_of(batch);
        let cb = C::batch(&states);
        let cb_next = C::batch(&next_states);
        let actions = actions_matrix::<F, S>(batch);

        // smoothed target action
        let ab_next = A::batch(&next_states);
        let (mut a_next, _) = self.actor_target.forward(&ab_next);
        for b in 0..n {
            for (k, dim) in self.space.dims.iter().enumerate() {
                let half = dim.half_range();
                let noise = Normal::new(0.0, self.cfg.smoothing_sigma * half)
                    .expect("sigma")
                    .sample(rng)
                    .clamp(-self.cfg.smoothing_clip * half, self.cfg.smoothing_clip * half);
                let v = dim.project(a_next[(b, k)].to_f64() + noise);
                a_next[(b, k)] = F::c(v);
            }
        }
        let (q1_next, _) = self.critic1_target.forward(&cb_next, &a_next);
        let (q2_next, _) = self.critic2_target.forward(&cb_next, &a_next);
        let q_next = ndarray::Zip::from(&q1_next).and(&q2_next).map_collect(|&a, &b| a.min(b));
        let y = td_targets(batch, &q_next, self.cfg.gamma);

        let mut critic_loss = 0.0;
        for (critic, opt) in [
            (&mut self.critic1, &mut self.critic1_opt),
            (&mut self.critic2, &mut self.critic2_opt),
        ] {
            let (q, cache) = critic.forward(&cb, &actions);
            let diff = &q - &y;
            let loss = diff.iter().map(|&d| { let d = Scalar::to_f64(d); d * d }).sum::<f64>() / n as f64;
            if !loss.is_finite() {
                return Err(NetError::NonFiniteLoss(format!("critic loss {loss}")));
            }
            critic_loss += loss / 2.0;
            let d_q = diff.mapv(|d| F::c(2.0 / n as f64) * d);
            let (grads, _) = critic.backward(&cb, &cache, &d_q);
            opt.step(critic, &grads)?;
        }

        self.steps += 1;
        let mut actor_loss = None;
        if self.steps % self.cfg.policy_delay == 0 {
            let ab = A::batch(&states);
            let (a_pi, acache) = self.actor.forward(&ab);
            let (q_pi, ccache_pi) = self.critic1.forward(&cb, &a_pi);
            actor_loss = Some(-q_pi.iter().map(|&v| Scalar::to_f64(v)).sum::<f64>() / n as f64);
            let d_q_pi = Array1::from_elem(n, F::c(-1.0 / n as f64));
            let (_, d_action) = self.critic1.backward(&cb, &ccache_pi, &d_q_pi);
            let agrads = self.actor.backward(&ab, &acache, &d_action);
            self.actor_opt.step(&mut self.actor, &agrads)?;

            soft_update(&mut self.actor_target, &self.actor, self.cfg.tau);
            soft_update(&mut self.critic1_target, &self.critic1, self.cfg.tau);
            soft_update(&mut self.critic2_target, &self.critic2, self.cfg.tau);
        }
        Ok(UpdateStats { critic_loss, actor_loss })
    }
}
