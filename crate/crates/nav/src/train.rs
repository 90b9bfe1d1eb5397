//! Two-stage training: the motion agent learns target reaching on a
//! three-mode curriculum with TD3, then the subgoal agent learns on full
//! episodes against the frozen motion agent with DDPG.
//!
//! Runs are reproducible from (config, master seed) at thread count 1.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{motion_reward, ActionSpace, Ddpg, ReplayBuffer, Td3, Transition, UpdateConfig};
use crate::core::{dist, normalize_angle, Point2, Pose2D, Subgoal, VelocityCommand};
use crate::envloop::{
    run_episode, EpisodeConfig, EpisodeObserver, Outcome, SubgoalPolicy,
    SUBGOAL_RADIUS,
};
use crate::net::{
    ActorNet, Adam, MotionActor, MotionCritic, MotionState, NetError, Real, Scalar,
    SubgoalActor, SubgoalBatch, SubgoalCritic, SubgoalState,
};
use crate::world::{
    sample_obstacles, sample_scene, sample_start_goal, step_robot, ObstacleConfig, SceneKind,
    WorldState, ROBOT_RADIUS,
};

/// Motion-agent training parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionTrainConfig {
    /// Hard episode cap; non-convergence by then is reported as failure.
    pub max_episodes: usize,
    /// Consecutive successful episodes required to declare convergence.
    pub convergence_successes: usize,
    /// Per-target time budget, seconds.
    pub target_budget: f64,
    /// Targets per episode, inclusive range.
    pub targets_min: usize,
    pub targets_max: usize,
    /// Target distance range (0, hi].
    pub target_range: f64,
    /// Curriculum mode probabilities: straight, curvy, random.
    pub mode_probs: [f64; 3],
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Transitions collected before updates start.
    pub warmup: usize,
    /// Exploration noise, fraction of each action half-range.
    pub sigma_start: f64,
    pub sigma_end: f64,
    /// Episodes over which the noise anneals linearly.
    pub anneal_episodes: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
}

impl Default for MotionTrainConfig {
    fn default() -> Self {
        Self {
            max_episodes: 30_000,
            convergence_successes: 50,
            target_budget: 3.0,
            targets_min: 5,
            targets_max: 15,
            target_range: 0.7,
            mode_probs: [0.2, 0.3, 0.5],
            batch_size: 128,
            buffer_capacity: 1_000_000,
            warmup: 1_000,
            sigma_start: 0.1,
            sigma_end: 0.01,
            anneal_episodes: 2_000,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
        }
    }
}

/// Subgoal-agent training parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SubgoalTrainConfig {
    pub episodes: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup: usize,
    /// Gradient updates applied after each episode. The paper does not
    /// state an update cadence; a fixed per-episode budget keeps the
    /// wall-clock cost of the large attention networks bounded.
    pub updates_per_episode: usize,
    /// Scripted path-following episodes that seed the replay buffer before
    /// any learning. Standing still is a strong local optimum of the
    /// subgoal reward (moving risks the collision penalty immediately,
    /// waiting only pays the small path penalty), and DDPG reliably
    /// collapses into it from scratch; demonstrations give the critic
    /// evidence that making progress pays.
    pub bc_episodes: usize,
    /// Supervised steps regressing the actor onto the demonstrator.
    pub bc_steps: usize,
    pub bc_lr: f64,
    /// Cloning steps interleaved after each episode's DDPG updates. They
    /// anchor the actor to the path-following demonstrator (TD3+BC style):
    /// the anchor gradient vanishes where the actor already imitates, so
    /// it only resists drift, and the critic's collision signal is strong
    /// enough locally to push dodging maneuvers through it.
    pub bc_anchor_steps: usize,
    pub bc_anchor_lr: f64,
    /// Episodes at the start of the main loop that update only the critic,
    /// so an untrained critic cannot pull the cloned actor apart.
    pub critic_warmup_episodes: usize,
    /// The actor steps once per this many critic updates (delayed policy
    /// updates, as in TD3), keeping the policy slower than the value
    /// estimate it follows.
    pub actor_every: usize,
    /// If a periodic evaluation scores this far below the best one, the
    /// actor reverts to the best parameters and its optimizers restart;
    /// the critic and buffer keep everything learned meanwhile.
    pub revert_drop: f64,
    pub sigma_start: f64,
    pub sigma_end: f64,
    pub anneal_episodes: usize,
    /// Evaluate on held-out seeds every this many episodes.
    pub eval_every: usize,
    pub eval_seeds: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub obstacles: ObstacleConfig,
}

impl Default for SubgoalTrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2_000,
            batch_size: 128,
            buffer_capacity: 1_000_000,
            warmup: 2_000,
            updates_per_episode: 32,
            bc_episodes: 100,
            bc_steps: 15_000,
            bc_lr: 1e-3,
            bc_anchor_steps: 16,
            bc_anchor_lr: 1e-4,
            critic_warmup_episodes: 300,
            actor_every: 4,
            revert_drop: 0.08,
            sigma_start: 0.1,
            sigma_end: 0.01,
            anneal_episodes: 1_500,
            eval_every: 200,
            eval_seeds: 50,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            obstacles: ObstacleConfig::default(),
        }
    }
}

/// Full training configuration, loadable from TOML.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub motion: MotionTrainConfig,
    pub subgoal: SubgoalTrainConfig,
}

/// Reads a TOML config and returns it with the SHA-256 of the raw file,
/// echoed into every training report for provenance.
pub fn load_config(path: &Path) -> Result<(TrainConfig, String), String> {
    let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let cfg: TrainConfig = toml::from_str(&raw).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((cfg, hex_digest(raw.as_bytes())))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// The three target-sequence modes of the motion curriculum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurriculumMode {
    /// Targets along one straight line.
    Straight,
    /// Direction changes bounded by +/- pi/2 between targets.
    Curvy,
    /// Fully random direction changes.
    Random,
}

/// Samples a mode with the configured probabilities.
pub fn sample_mode<R: Rng>(probs: [f64; 3], rng: &mut R) -> CurriculumMode {
    let x = rng.gen_range(0.0..probs.iter().sum());
    if x < probs[0] {
        CurriculumMode::Straight
    } else if x < probs[0] + probs[1] {
        CurriculumMode::Curvy
    } else {
        CurriculumMode::Random
    }
}

/// Generates a target course starting from `origin`: each target is a
/// nearby position within `(0, range]` of the previous one, direction per
/// curriculum mode.
pub fn sample_targets<R: Rng>(
    origin: Point2,
    mode: CurriculumMode,
    n: usize,
    range: f64,
    rng: &mut R,
) -> Vec<Point2> {
    let mut dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut pos = origin;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            match mode {
                CurriculumMode::Straight => {}
                CurriculumMode::Curvy => {
                    dir += rng.gen_range(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2)
                }
                CurriculumMode::Random => dir = rng.gen_range(0.0..std::f64::consts::TAU),
            }
        }
        let d = rng.gen_range(f64::EPSILON..=range);
        pos = [pos[0] + d * dir.cos(), pos[1] + d * dir.sin()];
        out.push(pos);
    }
    out
}

/// Counts consecutive successes; any failure resets the streak.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceLatch {
    pub needed: usize,
    pub streak: usize,
}

impl ConvergenceLatch {
    pub fn new(needed: usize) -> Self {
        Self { needed, streak: 0 }
    }

    /// Records one episode outcome; true once the streak is long enough.
    pub fn record(&mut self, success: bool) -> bool {
        self.streak = if success { self.streak + 1 } else { 0 };
        self.streak >= self.needed
    }
}

/// One row of the training metrics stream.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub steps: usize,
    pub return_: f64,
    pub success: u8,
    pub collision: u8,
    pub critic_loss: f64,
    pub actor_loss: f64,
}

/// Writes the metrics stream as CSV.
pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<(), std::io::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["episode", "steps", "return", "success", "collision", "critic_loss", "actor_loss"])?;
    for r in rows {
        w.write_record([
            r.episode.to_string(),
            r.steps.to_string(),
            format!("{:.6}", r.return_),
            r.success.to_string(),
            r.collision.to_string(),
            format!("{:.6}", r.critic_loss),
            format!("{:.6}", r.actor_loss),
        ])?;
    }
    w.flush()
}

fn anneal_sigma(start: f64, end: f64, horizon: usize, episode: usize) -> f64 {
    if horizon == 0 {
        return end;
    }
    let t = (episode as f64 / horizon as f64).min(1.0);
    start + (end - start) * t
}

/// Training report shared by both stages.
#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub episodes_run: usize,
    pub converged: bool,
    pub config_hash: Option<String>,
    pub master_seed: u64,
    /// Success rate over the final 100 episodes.
    pub recent_success_rate: f64,
}

pub struct MotionTrainResult {
    pub actor: MotionActor<Real>,
    pub report: TrainReport,
    pub metrics: Vec<MetricsRow>,
}

/// Stage one: TD3 on the three-mode target-reaching curriculum in free
/// space. Converges when `convergence_successes` consecutive episodes
/// reach every target within budget.
pub fn train_motion(
    cfg: &MotionTrainConfig,
    master_seed: u64,
    mut progress: Option<&mut dyn std::io::Write>,
) -> Result<MotionTrainResult, NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let space = ActionSpace::motion();
    let actor = MotionActor::<Real>::init(&mut rng);
    let c1 = MotionCritic::<Real>::init(&mut rng);
    let c2 = MotionCritic::<Real>::init(&mut rng);
    let mut td3 = Td3::new(actor, c1, c2, cfg.actor_lr, cfg.critic_lr, UpdateConfig::td3(), space);
    let mut buffer: ReplayBuffer<MotionState> = ReplayBuffer::new(cfg.buffer_capacity);
    let mut latch = ConvergenceLatch::new(cfg.convergence_successes);
    let mut metrics = Vec::new();
    let mut converged = false;
    let mut episodes_run = 0;
    let dt = 0.05;
    let steps_per_target = (cfg.target_budget / dt).round() as usize;

    for episode in 0..cfg.max_episodes {
        episodes_run = episode + 1;
        let sigma = anneal_sigma(cfg.sigma_start, cfg.sigma_end, cfg.anneal_episodes, episode);
        let mode = sample_mode(cfg.mode_probs, &mut rng);
        let n_targets = rng.gen_range(cfg.targets_min..=cfg.targets_max);
        let start = Pose2D::new(0.0, 0.0, rng.gen_range(0.0..std::f64::consts::TAU));
        let targets = sample_targets(start.position(), mode, n_targets, cfg.target_range, &mut rng);

        let mut world = WorldState::initial(start, &[]);
        let mut episode_return = 0.0;
        let mut steps = 0;
        let mut success = true;
        let mut critic_loss_sum = 0.0;
        let mut actor_loss_sum = 0.0;
        let mut updates = 0usize;
        let mut actor_updates = 0usize;

        'targets: for &target in &targets {
            let mut reached = false;
            for _ in 0..steps_per_target {
                let rel = world.robot_pose.to_robot_frame(target);
                let state = MotionState {
                    v: world.robot_velocity.v,
                    w: world.robot_velocity.w,
                    dx: rel[0],
                    dy: rel[1],
                    bearing: rel[1].atan2(rel[0]),
                };
                let greedy = td3.actor.predict(&state);
                let a = space.explore([greedy.v, greedy.w], sigma, &mut rng);
                let cmd = VelocityCommand::clamped(a[0], a[1]);
                world = step_robot(&world, cmd, dt);
                steps += 1;
                let d = dist(world.robot_pose.position(), target);
                reached = d <= SUBGOAL_RADIUS;
                let r = motion_reward(reached, d).total();
                episode_return += r;
                let rel2 = world.robot_pose.to_robot_frame(target);
                buffer.push(Transition {
                    state,
                    action: a,
                    reward: r,
                    next_state: MotionState {
                        v: world.robot_velocity.v,
                        w: world.robot_velocity.w,
                        dx: rel2[0],
                        dy: rel2[1],
                        bearing: rel2[1].atan2(rel2[0]),
                    },
                    done: reached,
                });
                if buffer.len() >= cfg.warmup.max(cfg.batch_size) {
                    let batch = buffer.sample(cfg.batch_size, &mut rng);
                    let stats = td3.update(&batch, &mut rng)?;
                    critic_loss_sum += stats.critic_loss;
                    updates += 1;
                    if let Some(al) = stats.actor_loss {
                        actor_loss_sum += al;
                        actor_updates += 1;
                    }
                }
                if reached {
                    break;
                }
            }
            if !reached {
                success = false;
                break 'targets;
            }
        }

        metrics.push(MetricsRow {
            episode,
            steps,
            return_: episode_return,
            success: success as u8,
            collision: 0,
            critic_loss: if updates > 0 { critic_loss_sum / updates as f64 } else { 0.0 },
            actor_loss: if actor_updates > 0 { actor_loss_sum / actor_updates as f64 } else { 0.0 },
        });
        if let Some(w) = progress.as_deref_mut() {
            if (episode + 1) % 100 == 0 {
                let recent = recent_success(&metrics, 100);
                let _ = writeln!(
                    w,
                    "motion episode {}: recent success {:.2}, streak {}",
                    episode + 1,
                    recent,
                    latch.streak
                );
            }
        }
        if latch.record(success) {
            converged = true;
            break;
        }
    }

    let recent = recent_success(&metrics, 100);
    Ok(MotionTrainResult {
        actor: td3.actor,
        report: TrainReport {
            episodes_run,
            converged,
            config_hash: None,
            master_seed,
            recent_success_rate: recent,
        },
        metrics,
    })
}

fn recent_success(metrics: &[MetricsRow], window: usize) -> f64 {
    let tail = &metrics[metrics.len().saturating_sub(window)..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().map(|m| m.success as usize).sum::<usize>() as f64 / tail.len() as f64
}

/// Exploration wrapper around a subgoal actor.
struct NoisySubgoal<'a> {
    actor: &'a SubgoalActor<Real>,
    space: ActionSpace,
    sigma: f64,
    rng: &'a mut ChaCha8Rng,
}

impl SubgoalPolicy for NoisySubgoal<'_> {
    fn subgoal(&mut self, state: &SubgoalState) -> Subgoal {
        let g = self.actor.predict(state);
        let a = self.space.explore([g.l, g.theta], self.sigma, self.rng);
        Subgoal::new(a[0], a[1])
    }
}

/// The demonstrator's action for a state: a potential field attracted to
/// the third waypoint and repelled by sensed points, with a tangential
/// component that routes around head-on obstacles instead of stalling in
/// front of them. The escape direction is clamped into the forward
/// half-plane because the robot cannot reverse: a backward subgoal only
/// makes it turn in place while the obstacle keeps closing.
pub fn demo_subgoal(state: &SubgoalState) -> Subgoal {
    const REPULSE: f64 = 0.15;
    const INFLUENCE: f64 = 1.0;
    const SWIRL: f64 = 0.8;
    const FRONT: f64 = 2.0; // extra weight on points ahead
    const L_MIN: f64 = 0.15;

    let (x, y) = (state.waypoints[4], state.waypoints[5]);
    let d_att = (x * x + y * y).sqrt();
    if d_att < 1e-9 {
        return Subgoal::new(0.0, 0.0);
    }
    let (ax, ay) = (x / d_att, y / d_att);
    let (mut vx, mut vy) = (ax, ay);
    for s in &state.sectors {
        for p in s.chunks(2) {
            let d = (p[0] * p[0] + p[1] * p[1]).sqrt().max(1e-6);
            if d < INFLUENCE {
                let mut w = REPULSE * (1.0 / d - 1.0 / INFLUENCE) / (d * d);
                w *= 1.0 + FRONT * (p[0] / d).max(0.0);
                let (ux, uy) = (p[0] / d, p[1] / d);
                vx -= w * ux;
                vy -= w * uy;
                // deflect around the point toward the waypoint side
                let side = if ux * ay - uy * ax >= 0.0 { 1.0 } else { -1.0 };
                vx += SWIRL * w * side * -uy;
                vy += SWIRL * w * side * ux;
            }
        }
    }
    let mag = (vx * vx + vy * vy).sqrt();
    let l = (mag * 0.6).clamp(L_MIN, Subgoal::L_MAX);
    let theta = vy.atan2(vx).clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
    Subgoal::new(l, theta)
}

/// Scripted path follower with exploration noise, used to seed the replay
/// buffer and as the behavior-cloning target.
struct ScriptedSubgoal<'a> {
    space: ActionSpace,
    sigma: f64,
    rng: &'a mut ChaCha8Rng,
}

impl SubgoalPolicy for ScriptedSubgoal<'_> {
    fn subgoal(&mut self, state: &SubgoalState) -> Subgoal {
        let g = demo_subgoal(state);
        let a = self.space.explore([g.l, g.theta], self.sigma, self.rng);
        Subgoal::new(a[0], a[1])
    }
}

/// One supervised step regressing the actor onto the demonstrator over a
/// batch of buffer states; returns the batch imitation loss.
fn bc_step(
    actor: &mut SubgoalActor<Real>,
    opt: &mut Adam<Real>,
    buffer: &ReplayBuffer<SubgoalState>,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64, NetError> {
    let batch = buffer.sample(batch_size, rng);
    let states: Vec<SubgoalState> = batch.iter().map(|t| t.state.clone()).collect();
    let ab = SubgoalBatch::from_states(&states);
    let (a, cache) = actor.forward(&ab);
    let n = states.len();
    let mut d = ndarray::Array2::<Real>::zeros((n, 2));
    let mut loss = 0.0;
    for (b, s) in states.iter().enumerate() {
        let t = demo_subgoal(s);
        let dl = Scalar::to_f64(a[(b, 0)]) - t.l;
        let dth = normalize_angle(Scalar::to_f64(a[(b, 1)]) - t.theta);
        loss += dl * dl + dth * dth;
        d[(b, 0)] = Scalar::c(2.0 * dl / n as f64);
        d[(b, 1)] = Scalar::c(2.0 * dth / n as f64);
    }
    let grads = actor.backward(&ab, &cache, &d);
    opt.step(actor, &grads)?;
    Ok(loss / n as f64)
}

/// Observer that feeds the subgoal replay buffer.
struct SubgoalCollector<'a> {
    buffer: &'a mut ReplayBuffer<SubgoalState>,
}

impl EpisodeObserver for SubgoalCollector<'_> {
    fn on_subgoal_transition(&mut self, t: &Transition<SubgoalState>) {
        self.buffer.push(t.clone());
    }
}

/// Samples one full episode setup: uniform scene kind, scene, endpoints,
/// and path-relative obstacles.
pub fn sample_episode<R: Rng>(obstacles: &ObstacleConfig, rng: &mut R) -> Option<EpisodeConfig> {
    let kind = SceneKind::ALL[rng.gen_range(0..SceneKind::ALL.len())];
    let scene = sample_scene(kind, rng);
    let grid = scene.occupancy_grid(ROBOT_RADIUS);
    let (start, goal) = sample_start_goal(&scene, &grid, rng);
    let path = crate::planner::plan(&grid, start.position(), goal).ok()?;
    let specs = sample_obstacles(&scene, &grid, &path, obstacles, rng);
    Some(EpisodeConfig::new(scene, start, goal, specs))
}

/// One evaluation sweep with greedy policies; returns the success rate.
fn eval_success_rate(
    actor: &SubgoalActor<Real>,
    motion: &MotionActor<Real>,
    obstacles: &ObstacleConfig,
    seeds: std::ops::Range<u64>,
) -> f64 {
    let mut wins = 0usize;
    let mut total = 0usize;
    for seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(cfg) = sample_episode(obstacles, &mut rng) else { continue };
        let mut sa = actor.clone();
        let mut ma = motion.clone();
        let Ok(res) = run_episode(&cfg, &mut sa, &mut ma, &mut crate::envloop::NullObserver) else {
            continue;
        };
        total += 1;
        if res.outcome == Outcome::ReachedGoal {
            wins += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        wins as f64 / total as f64
    }
}

pub struct SubgoalTrainResult {
    /// Parameters at the end of the final episode.
    pub final_actor: SubgoalActor<Real>,
    /// Best parameters by held-out success rate.
    pub best_actor: SubgoalActor<Real>,
    pub best_success: f64,
    pub report: TrainReport,
    pub metrics: Vec<MetricsRow>,
    /// (episode, success rate) of every periodic evaluation.
    pub eval_history: Vec<(usize, f64)>,
}

/// Held-out evaluation seeds live far away from training streams.
const EVAL_SEED_BASE: u64 = 1 << 40;

/// Stage two: DDPG for the subgoal agent against a frozen motion agent,
/// episodes sampled uniformly over the three scene kinds.
///
/// `on_eval` fires after every periodic held-out evaluation with the
/// episode number, the success rate, and the current best parameters, so
/// long runs can checkpoint as they go.
pub fn train_subgoal(
    cfg: &SubgoalTrainConfig,
    motion: &MotionActor<Real>,
    master_seed: u64,
    mut progress: Option<&mut dyn std::io::Write>,
    mut on_eval: Option<&mut dyn FnMut(usize, f64, &SubgoalActor<Real>)>,
) -> Result<SubgoalTrainResult, NetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let mut actor = SubgoalActor::<Real>::init(&mut rng);
    let critic = SubgoalCritic::<Real>::init(&mut rng);
    let mut buffer: ReplayBuffer<SubgoalState> = ReplayBuffer::new(cfg.buffer_capacity);
    let space = ActionSpace::subgoal();

    // phase zero: scripted demonstrations and behavior cloning
    if cfg.bc_episodes > 0 {
        let mut frozen = motion.clone();
        for _ in 0..cfg.bc_episodes {
            let Some(ep_cfg) = sample_episode(&cfg.obstacles, &mut rng) else { continue };
            let mut noise_rng = ChaCha8Rng::seed_from_u64(rng.gen());
            let mut sa = ScriptedSubgoal { space, sigma: cfg.sigma_start, rng: &mut noise_rng };
            let mut collector = SubgoalCollector { buffer: &mut buffer };
            let _ = run_episode(&ep_cfg, &mut sa, &mut frozen, &mut collector);
        }
        let mut bc_loss = f64::NAN;
        if cfg.bc_steps > 0 && !buffer.is_empty() {
            let mut bc_opt: Adam<Real> = Adam::new(cfg.bc_lr);
            for _ in 0..cfg.bc_steps {
                bc_loss = bc_step(&mut actor, &mut bc_opt, &buffer, cfg.batch_size, &mut rng)?;
            }
        }
        if let Some(w) = progress.as_deref_mut() {
            let _ = writeln!(
                w,
                "subgoal bc: {} demo transitions, final loss {bc_loss:.4}",
                buffer.len()
            );
        }
    }

    let mut ddpg = Ddpg::new(actor, critic, cfg.actor_lr, cfg.critic_lr, UpdateConfig::ddpg());
    let mut anchor_opt: Adam<Real> = Adam::new(cfg.bc_anchor_lr);
    let mut metrics = Vec::new();
    let mut eval_history = Vec::new();
    let mut best_actor = ddpg.actor.clone();
    let mut best_success = -1.0;
    let mut frozen_motion = motion.clone();

    // baseline: the cloned policy competes for best-so-far from the start
    if cfg.bc_episodes > 0 && cfg.episodes >= cfg.eval_every {
        let rate = eval_success_rate(
            &ddpg.actor,
            motion,
            &cfg.obstacles,
            EVAL_SEED_BASE..EVAL_SEED_BASE + cfg.eval_seeds as u64,
        );
        eval_history.push((0, rate));
        best_success = rate;
        if let Some(w) = progress.as_deref_mut() {
            let _ = writeln!(w, "subgoal episode 0: eval success {rate:.2} (cloned policy)");
        }
        if let Some(f) = on_eval.as_deref_mut() {
            f(0, rate, &best_actor);
        }
    }

    for episode in 0..cfg.episodes {
        let sigma = anneal_sigma(cfg.sigma_start, cfg.sigma_end, cfg.anneal_episodes, episode);
        let Some(ep_cfg) = sample_episode(&cfg.obstacles, &mut rng) else {
            // unplannable setup: counted as a skipped episode
            metrics.push(MetricsRow {
                episode,
                steps: 0,
                return_: 0.0,
                success: 0,
                collision: 0,
                critic_loss: 0.0,
                actor_loss: 0.0,
            });
            continue;
        };
        let mut noise_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let actor_snapshot = ddpg.actor.clone();
        let mut sa = NoisySubgoal {
            actor: &actor_snapshot,
            space,
            sigma,
            rng: &mut noise_rng,
        };
        let mut collector = SubgoalCollector { buffer: &mut buffer };
        let res = match run_episode(&ep_cfg, &mut sa, &mut frozen_motion, &mut collector) {
            Ok(r) => r,
            Err(_) => continue, // aborted: excluded from stats
        };

        let mut critic_loss_sum = 0.0;
        let mut actor_loss_sum = 0.0;
        let mut updates = 0usize;
        if buffer.len() >= cfg.warmup.max(cfg.batch_size) {
            let update_actor = episode >= cfg.critic_warmup_episodes;
            for u in 0..cfg.updates_per_episode {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                let delayed = update_actor && u % cfg.actor_every.max(1) == 0;
                let stats = ddpg.update_with(&batch, delayed)?;
                critic_loss_sum += stats.critic_loss;
                actor_loss_sum += stats.actor_loss.unwrap_or(0.0);
                updates += 1;
            }
            if update_actor {
                for _ in 0..cfg.bc_anchor_steps {
                    bc_step(&mut ddpg.actor, &mut anchor_opt, &buffer, cfg.batch_size, &mut rng)?;
                }
            }
        }

        metrics.push(MetricsRow {
            episode,
            steps: res.motion_steps,
            return_: res.subgoal_return,
            success: (res.outcome == Outcome::ReachedGoal) as u8,
            collision: (res.outcome == Outcome::Collision) as u8,
            critic_loss: if updates > 0 { critic_loss_sum / updates as f64 } else { 0.0 },
            actor_loss: if updates > 0 { actor_loss_sum / updates as f64 } else { 0.0 },
        });

        if (episode + 1) % cfg.eval_every == 0 {
            let rate = eval_success_rate(
                &ddpg.actor,
                motion,
                &cfg.obstacles,
                EVAL_SEED_BASE..EVAL_SEED_BASE + cfg.eval_seeds as u64,
            );
            eval_history.push((episode + 1, rate));
            let mut reverted = false;
            if rate > best_success {
                best_success = rate;
                best_actor = ddpg.actor.clone();
            } else if best_success - rate > cfg.revert_drop {
                // regression gate: restore the best actor and restart its
                // optimizers; the critic and buffer keep what they learned
                ddpg.actor = best_actor.clone();
                ddpg.actor_target = best_actor.clone();
                ddpg.actor_opt = Adam::new(cfg.actor_lr);
                anchor_opt = Adam::new(cfg.bc_anchor_lr);
                reverted = true;
            }
            if let Some(w) = progress.as_deref_mut() {
                // greedy-policy probe over recent buffer states
                let probe = buffer.sample(256.min(buffer.len()), &mut rng);
                let states: Vec<SubgoalState> =
                    probe.iter().map(|t| t.state.clone()).collect();
                let ab = SubgoalBatch::from_states(&states);
                let (a, _) = ddpg.actor.forward(&ab);
                let n = states.len() as f64;
                let mean_l: f64 =
                    (0..states.len()).map(|b| Scalar::to_f64(a[(b, 0)])).sum::<f64>() / n;
                let mean_th: f64 = (0..states.len())
                    .map(|b| Scalar::to_f64(a[(b, 1)]).abs())
                    .sum::<f64>()
                    / n;
                let recent: Vec<_> = metrics.iter().rev().take(cfg.eval_every).collect();
                let closs = recent.iter().map(|m| m.critic_loss).sum::<f64>()
                    / recent.len().max(1) as f64;
                let _ = writeln!(
                    w,
                    "subgoal episode {}: eval success {:.2} (best {:.2}) \
                     mean_l {mean_l:.2} mean_|th| {mean_th:.2} critic_loss {closs:.3}{}",
                    episode + 1,
                    rate,
                    best_success,
                    if reverted { " (reverted to best)" } else { "" }
                );
            }
            if let Some(f) = on_eval.as_deref_mut() {
                f(episode + 1, rate, &best_actor);
            }
        }
    }

    if best_success < 0.0 {
        best_actor = ddpg.actor.clone();
        best_success = 0.0;
    }
    let recent = recent_success(&metrics, 100);
    Ok(SubgoalTrainResult {
        final_actor: ddpg.actor,
        best_actor,
        best_success,
        report: TrainReport {
            episodes_run: cfg.episodes,
            converged: true,
            config_hash: None,
            master_seed,
            recent_success_rate: recent,
        },
        metrics,
        eval_history,
    })
}
