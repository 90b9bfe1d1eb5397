//! The closed-loop episode runner: global plan, subgoal predictions every
//! 0.2 s, motion commands every 0.05 s, deterministic world stepping, and
//! transition reporting for training.
//!
//! Event order within one motion step: obstacles move, the robot moves,
//! collision and clearance are evaluated, then rewards and terminal
//! checks. The subgoal agent is rewarded at its next tick from what
//! happened over the elapsed interval; collisions take precedence over
//! goal arrival.

use crate::agents::{motion_reward, subgoal_reward, Transition};
use crate::core::{dist, AgentClock, Point2, Pose2D, Subgoal, VelocityCommand};
use crate::net::{MotionActor, MotionState, Scalar, SubgoalActor, SubgoalState};
use crate::percept::preprocess;
use crate::planner::{plan, extract_waypoints, replan_scheduler, PlanError, PlannedPath};
use crate::world::{
    cast_lidar, check_collision, step_obstacles, step_robot, ObstacleSpec, SceneSpec, TraceRecord,
    WorldState, ROBOT_RADIUS,
};

/// How far the robot may be from the commanded subgoal to count it as
/// reached, m.
pub const SUBGOAL_RADIUS: f64 = 0.05;
/// Goal arrival radius, m.
pub const GOAL_RADIUS: f64 = 0.3;
/// Episode wall-clock budget in simulated seconds.
pub const MAX_SIM_TIME: f64 = 60.0;
/// Global replanning period, in subgoal predictions.
pub const REPLAN_PERIOD: usize = 3;

/// Anything that maps a subgoal-agent state to a subgoal. Trained actors
/// implement this greedily; training wraps them with exploration noise.
pub trait SubgoalPolicy {
    fn subgoal(&mut self, state: &SubgoalState) -> Subgoal;
}

impl<F: Scalar> SubgoalPolicy for SubgoalActor<F> {
    fn subgoal(&mut self, state: &SubgoalState) -> Subgoal {
        self.predict(state)
    }
}

/// Anything that maps a motion-agent state to a velocity command.
pub trait MotionPolicy {
    fn command(&mut self, state: &MotionState) -> VelocityCommand;
}

impl<F: Scalar> MotionPolicy for MotionActor<F> {
    fn command(&mut self, state: &MotionState) -> VelocityCommand {
        self.predict(state)
    }
}

/// Receives transitions and trace records as the episode unfolds.
pub trait EpisodeObserver {
    fn on_motion_transition(&mut self, _t: &Transition<MotionState>) {}
    fn on_subgoal_transition(&mut self, _t: &Transition<SubgoalState>) {}
    fn on_record(&mut self, _r: &TraceRecord) {}
}

/// Observer that drops everything.
pub struct NullObserver;
impl EpisodeObserver for NullObserver {}

/// How an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    ReachedGoal,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ReachedGoal => "goal",
            Self::Collision => "collision",
            Self::Timeout => "timeout",
        }
    }
}

/// Everything needed to run one episode.
#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub scene: SceneSpec,
    pub start: Pose2D,
    pub goal: Point2,
    pub obstacles: Vec<ObstacleSpec>,
    pub clock: AgentClock,
    pub max_sim_time: f64,
    pub goal_radius: f64,
    pub subgoal_radius: f64,
    pub replan_period: usize,
    /// When false the global path is planned once and never refreshed
    /// (the "no replan" ablation).
    pub replan_enabled: bool,
}

impl EpisodeConfig {
    pub fn new(scene: SceneSpec, start: Pose2D, goal: Point2, obstacles: Vec<ObstacleSpec>) -> Self {
        Self {
            scene,
            start,
            goal,
            obstacles,
            clock: AgentClock::default(),
            max_sim_time: MAX_SIM_TIME,
            goal_radius: GOAL_RADIUS,
            subgoal_radius: SUBGOAL_RADIUS,
            replan_period: REPLAN_PERIOD,
            replan_enabled: true,
        }
    }
}

/// Episode summary.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub outcome: Outcome,
    pub sim_time: f64,
    pub motion_steps: usize,
    pub subgoal_predictions: usize,
    pub replans: usize,
    /// Undiscounted return of the subgoal agent.
    pub subgoal_return: f64,
    /// Undiscounted return of the motion agent.
    pub motion_return: f64,
    pub final_pose: Pose2D,
    /// Smallest surface clearance seen over the episode, m.
    pub min_clearance: f64,
    /// Distance actually driven, m.
    pub path_length: f64,
    /// Every subgoal predicted over the episode, in prediction order.
    pub subgoals: Vec<Subgoal>,
}

/// Tracking state between two subgoal ticks.
struct SaInterval {
    state: SubgoalState,
    action: [f64; 2],
    collided: bool,
    min_clearance: f64,
}

fn sa_state(
    cfg: &EpisodeConfig,
    world: &WorldState,
    path: &PlannedPath,
) -> (SubgoalState, crate::planner::WaypointWindow) {
    let scan = cast_lidar(world, &cfg.scene.walls, &cfg.obstacles);
    let sectors = preprocess(&scan);
    let window = extract_waypoints(path, &world.robot_pose);
    (SubgoalState::new(&sectors, &window), window)
}

fn motion_state(world: &WorldState, subgoal_world: Point2) -> MotionState {
    let rel = world.robot_pose.to_robot_frame(subgoal_world);
    MotionState {
        v: world.robot_velocity.v,
        w: world.robot_velocity.w,
        dx: rel[0],
        dy: rel[1],
        bearing: rel[1].atan2(rel[0]),
    }
}

/// Runs one episode to termination. Fails only if the initial global plan
/// (or a replan from a position the robot has reached) is impossible; a
/// failed replan falls back to the previous path.
pub fn run_episode(
    cfg: &EpisodeConfig,
    sa: &mut dyn SubgoalPolicy,
    ma: &mut dyn MotionPolicy,
    observer: &mut dyn EpisodeObserver,
) -> Result<EpisodeResult, PlanError> {
    assert!(cfg.clock.is_consistent());
    let grid = cfg.scene.occupancy_grid(ROBOT_RADIUS);
    let mut path = plan(&grid, cfg.start.position(), cfg.goal)?;

    let mut world = WorldState::initial(cfg.start, &cfg.obstacles);
    let dt = cfg.clock.dt_motion;
    let max_steps = (cfg.max_sim_time / dt).round() as usize;

    let mut pending: Option<SaInterval> = None;
    let mut subgoal_world = cfg.start.position();
    let mut predictions = 0usize;
    let mut replans = 0usize;
    let mut subgoal_return = 0.0;
    let mut motion_return = 0.0;
    let mut min_clearance = f64::INFINITY;
    let mut path_length = 0.0;
    let mut outcome = Outcome::Timeout;
    let mut subgoals = Vec::new();
    // once the subgoal is reached the robot stops and waits for the next tick
    let mut holding = false;

    observer.on_record(&TraceRecord::from_state(&world, None));

    for step in 0..max_steps {
        if step % cfg.clock.motion_steps_per_subgoal == 0 {
            // subgoal tick: settle the previous interval, maybe replan,
            // then predict the next subgoal
            if cfg.replan_enabled
                && replan_scheduler(predictions)
                && predictions / cfg.replan_period == replans + 1
            {
                match plan(&grid, world.robot_pose.position(), cfg.goal) {
                    Ok(p) => path = p,
                    Err(_) => {} // keep following the old path
                }
                replans += 1;
            }
            let (state_now, window) = sa_state(cfg, &world, &path);
            if let Some(iv) = pending.take() {
                let d_path = dist(
                    world.robot_pose.position(),
                    world.robot_pose.to_world_frame(window.points[2]),
                );
                let r = subgoal_reward(iv.collided, d_path, iv.min_clearance).total();
                subgoal_return += r;
                observer.on_subgoal_transition(&Transition {
                    state: iv.state,
                    action: iv.action,
                    reward: r,
                    next_state: state_now.clone(),
                    done: false,
                });
            }
            let sg = sa.subgoal(&state_now);
            subgoal_world = world.robot_pose.to_world_frame(sg.to_cartesian());
            predictions += 1;
            subgoals.push(sg);
            // an already-reached subgoal (l = 0 in particular) means
            // "stop and hold" for the whole interval
            holding = dist(world.robot_pose.position(), subgoal_world) <= cfg.subgoal_radius;
            pending = Some(SaInterval {
                state: state_now,
                action: [sg.l, sg.theta],
                collided: false,
                min_clearance: f64::INFINITY,
            });
        }

        let ma_state = (!holding).then(|| motion_state(&world, subgoal_world));
        let cmd = match &ma_state {
            Some(s) => ma.command(s),
            None => VelocityCommand::STOP,
        };
        let before = world.robot_pose.position();
        world = step_obstacles(&world, &cfg.obstacles, dt);
        world = step_robot(&world, cmd, dt);
        path_length += dist(before, world.robot_pose.position());

        let (collided, clearance) =
            check_collision(&world, &cfg.scene.walls, &cfg.obstacles, ROBOT_RADIUS);
        min_clearance = min_clearance.min(clearance);
        if let Some(iv) = pending.as_mut() {
            iv.collided |= collided;
            iv.min_clearance = iv.min_clearance.min(clearance);
        }

        let d_sg = dist(world.robot_pose.position(), subgoal_world);
        let reached = d_sg <= cfg.subgoal_radius;
        let at_goal = dist(world.robot_pose.position(), cfg.goal) <= cfg.goal_radius;
        let terminal = collided || (at_goal && !collided);
        if let Some(state) = ma_state {
            let r_ma = motion_reward(reached, d_sg).total();
            motion_return += r_ma;
            observer.on_motion_transition(&Transition {
                state,
                action: [cmd.v, cmd.w],
                reward: r_ma,
                next_state: motion_state(&world, subgoal_world),
                done: reached || terminal,
            });
        }
        if reached {
            holding = true;
        }

        if collided {
            outcome = Outcome::Collision;
        } else if at_goal {
            outcome = Outcome::ReachedGoal;
        }
        let flag = (terminal || step + 1 == max_steps).then(|| outcome.as_str().to_string());
        let is_last = flag.is_some();
        observer.on_record(&TraceRecord::from_state(&world, flag));
        if is_last {
            break;
        }
    }

    // settle the final subgoal interval against the terminal state
    if let Some(iv) = pending.take() {
        let (state_end, window) = sa_state(cfg, &world, &path);
        let d_path = dist(
            world.robot_pose.position(),
            world.robot_pose.to_world_frame(window.points[2]),
        );
        let r = subgoal_reward(iv.collided, d_path, iv.min_clearance).total();
        subgoal_return += r;
        observer.on_subgoal_transition(&Transition {
            state: iv.state,
            action: iv.action,
            reward: r,
            next_state: state_end,
            done: true,
        });
    }

    Ok(EpisodeResult {
        outcome,
        sim_time: world.sim_time,
        motion_steps: (world.sim_time / dt).round() as usize,
        subgoal_predictions: predictions,
        replans,
        subgoal_return,
        motion_return,
        final_pose: world.robot_pose,
        min_clearance,
        path_length,
        subgoals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{sample_scene, sample_start_goal, SceneKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scripted policies for deterministic loop tests.
    struct FixedSubgoal(Subgoal);
    impl SubgoalPolicy for FixedSubgoal {
        fn subgoal(&mut self, _s: &SubgoalState) -> Subgoal {
            self.0
        }
    }

    struct CountingSubgoal {
        states: Vec<SubgoalState>,
    }
    impl SubgoalPolicy for CountingSubgoal {
        fn subgoal(&mut self, s: &SubgoalState) -> Subgoal {
            self.states.push(s.clone());
            Subgoal::new(0.0, 0.0)
        }
    }

    struct FixedMotion(VelocityCommand);
    impl MotionPolicy for FixedMotion {
        fn command(&mut self, _s: &MotionState) -> VelocityCommand {
            self.0
        }
    }

    struct Collector {
        sa: Vec<Transition<SubgoalState>>,
        ma: Vec<Transition<MotionState>>,
        records: Vec<TraceRecord>,
    }
    impl Collector {
        fn new() -> Self {
            Self { sa: Vec::new(), ma: Vec::new(), records: Vec::new() }
        }
    }
    impl EpisodeObserver for Collector {
        fn on_motion_transition(&mut self, t: &Transition<MotionState>) {
            self.ma.push(t.clone());
        }
        fn on_subgoal_transition(&mut self, t: &Transition<SubgoalState>) {
            self.sa.push(t.clone());
        }
        fn on_record(&mut self, r: &TraceRecord) {
            self.records.push(r.clone());
        }
    }

    fn corridor_config(seed: u64) -> EpisodeConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scene = sample_scene(SceneKind::Corridor, &mut rng);
        let grid = scene.occupancy_grid(ROBOT_RADIUS);
        let (start, goal) = sample_start_goal(&scene, &grid, &mut rng);
        EpisodeConfig::new(scene, start, goal, Vec::new())
    }

    #[test]
    fn stationary_robot_times_out() {
        let cfg = corridor_config(1);
        let mut sa = FixedSubgoal(Subgoal::new(0.0, 0.0));
        let mut ma = FixedMotion(VelocityCommand::STOP);
        let mut obs = Collector::new();
        let res = run_episode(&cfg, &mut sa, &mut ma, &mut obs).unwrap();
        assert_eq!(res.outcome, Outcome::Timeout);
        assert!((res.sim_time - cfg.max_sim_time).abs() < 1e-9);
        // 60 s at 20 Hz, one subgoal tick per 4 motion steps
        assert_eq!(res.motion_steps, 1200);
        assert_eq!(res.subgoal_predictions, 300);
        assert_eq!(res.subgoals.len(), 300);
        // the zero-length subgoal is already reached when predicted, so
        // the robot holds and the motion agent is never consulted
        assert_eq!(obs.ma.len(), 0);
        // every interval settles exactly once
        assert_eq!(obs.sa.len(), 300);
        assert!(obs.sa.last().unwrap().done);
        assert!(obs.sa[..299].iter().all(|t| !t.done));
        // stationary in the corridor center: no collisions
        assert!(obs.sa.iter().all(|t| t.reward > -10.0));
    }

    #[test]
    fn driving_into_wall_collides_and_penalizes() {
        let mut cfg = corridor_config(2);
        // aim straight at the near side wall
        cfg.start.heading = 0.0; // corridor is long in y; x is the narrow axis
        let mut sa = FixedSubgoal(Subgoal::new(0.6, 0.0));
        let mut ma = FixedMotion(VelocityCommand::clamped(0.5, 0.0));
        let mut obs = Collector::new();
        let res = run_episode(&cfg, &mut sa, &mut ma, &mut obs).unwrap();
        assert_eq!(res.outcome, Outcome::Collision);
        assert!(res.sim_time < 10.0, "sim_time {}", res.sim_time);
        assert!(res.min_clearance <= 0.0);
        let last_sa = obs.sa.last().unwrap();
        assert!(last_sa.done);
        assert!(last_sa.reward <= -10.0, "reward {}", last_sa.reward);
        // the last trace record carries the terminal flag
        assert_eq!(obs.records.last().unwrap().terminal.as_deref(), Some("collision"));
        assert!(obs.records[..obs.records.len() - 1].iter().all(|r| r.terminal.is_none()));
    }

    #[test]
    fn replans_every_third_prediction() {
        let cfg = corridor_config(3);
        let mut sa = FixedSubgoal(Subgoal::new(0.0, 0.0));
        let mut ma = FixedMotion(VelocityCommand::STOP);
        let res = run_episode(&cfg, &mut sa, &mut ma, &mut NullObserver).unwrap();
        // 300 predictions: replans before predictions 4, 7, ... -> 99
        assert_eq!(res.subgoal_predictions, 300);
        assert_eq!(res.replans, 99);
    }

    #[test]
    fn subgoal_cadence_is_four_motion_steps() {
        let cfg = corridor_config(4);
        let mut sa = CountingSubgoal { states: Vec::new() };
        let mut ma = FixedMotion(VelocityCommand::STOP);
        let res = run_episode(&cfg, &mut sa, &mut ma, &mut NullObserver).unwrap();
        assert_eq!(sa.states.len(), res.subgoal_predictions);
        assert_eq!(res.motion_steps, 4 * res.subgoal_predictions);
    }

    #[test]
    fn episode_is_deterministic() {
        let run = || {
            let cfg = corridor_config(5);
            let mut sa = FixedSubgoal(Subgoal::new(0.4, 0.1));
            let mut ma = FixedMotion(VelocityCommand::clamped(0.3, 0.05));
            let mut obs = Collector::new();
            let res = run_episode(&cfg, &mut sa, &mut ma, &mut obs).unwrap();
            (res.sim_time, res.path_length, res.final_pose, obs.records.len())
        };
        let a = run();
        let b = run();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1.to_bits(), b.1.to_bits());
        assert_eq!(a.2, b.2);
        assert_eq!(a.3, b.3);
    }

    #[test]
    fn motion_reward_reflects_subgoal_distance() {
        let cfg = corridor_config(6);
        let mut sa = FixedSubgoal(Subgoal::new(0.3, 0.0));
        let mut ma = FixedMotion(VelocityCommand::STOP);
        let mut obs = Collector::new();
        run_episode(&cfg, &mut sa, &mut ma, &mut obs).unwrap();
        // a stopped robot 0.3 m from its subgoal: no reach bonus, the
        // reward is minus the remaining distance
        let t = &obs.ma[0];
        assert!((t.reward + 0.3).abs() < 1e-9, "reward {}", t.reward);
        assert!(!t.done);
    }

    #[test]
    fn reaches_goal_with_path_following_policies() {
        // a scripted subgoal that tracks the waypoint window plus a
        // proportional motion controller must solve an empty corridor
        struct WindowFollower;
        impl SubgoalPolicy for WindowFollower {
            fn subgoal(&mut self, s: &SubgoalState) -> Subgoal {
                // chase the third window point (robot frame, meters)
                let (x, y) = (s.waypoints[4] , s.waypoints[5]);
                let l = (x * x + y * y).sqrt().min(Subgoal::L_MAX);
                Subgoal::new(l, y.atan2(x))
            }
        }
        struct PController;
        impl MotionPolicy for PController {
            fn command(&mut self, s: &MotionState) -> VelocityCommand {
                let d = (s.dx * s.dx + s.dy * s.dy).sqrt();
                let v = if s.bearing.abs() > 0.8 { 0.05 } else { (2.0 * d).min(0.5) };
                VelocityCommand::clamped(v, 2.0 * s.bearing)
            }
        }
        let cfg = corridor_config(7);
        let mut obs = Collector::new();
        let res = run_episode(&cfg, &mut WindowFollower, &mut PController, &mut obs).unwrap();
        assert_eq!(res.outcome, Outcome::ReachedGoal, "{:?}", res);
        assert!(res.min_clearance > 0.0);
        // the driven path is at least the straight-line distance
        let direct = dist(cfg.start.position(), cfg.goal);
        assert!(res.path_length >= direct - cfg.goal_radius - 1e-9);
    }
}
