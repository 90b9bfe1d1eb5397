//! Hierarchical subgoal-driven robot navigation.
//!
//! A high-level *subgoal agent* looks at attention-weighted 2D lidar sectors
//! and a window of global-path waypoints and predicts a nearby subgoal every
//! 0.2 s. A low-level *motion agent* runs at 20 Hz and converts the current
//! subgoal into differential-drive velocity commands. The global A* path is
//! replanned every three subgoal predictions so the robot recovers the
//! shortest route after detours around unknown obstacles.
//!
//! Everything runs inside a deterministic 2D kinematic simulator: randomized
//! corridor / intersection / office scenes, cuboid obstacles moving back and
//! forth along their own A* paths, and a 1,440-beam ray-cast lidar.
//!
//! The crate is organised bottom-up:
//!
//! - [`core`]: poses, angles, frame transforms.
//! - [`world`]: scene sampling, kinematics, lidar, collision.
//! - [`planner`]: occupancy-grid A*, waypoint windows, the replan schedule.
//! - [`percept`]: min-pooling and sectorisation of raw scans.
//! - [`net`]: fully-connected networks, the sector-attention block, exact
//!   backpropagation and an Adam optimizer (no autodiff framework).
//! - [`agents`]: rewards, replay buffer, DDPG and TD3 updates.
//! - [`envloop`]: hierarchical episode orchestration.
//! - [`train`]: the two-stage training procedure.
//! - [`eval`]: batch evaluation, sweeps, and subgoal histograms.
//!
//! ```
//! use subgoal_nav::core::{Pose2D, Subgoal};
//!
//! let pose = Pose2D::new(1.0, 1.0, std::f64::consts::FRAC_PI_2);
//! let local = pose.to_robot_frame([0.0, 0.0]);
//! assert!((local[0] - -1.0).abs() < 1e-12);
//! assert!((local[1] - 1.0).abs() < 1e-12);
//!
//! let sg = Subgoal::new(0.5, std::f64::consts::FRAC_PI_2);
//! let p = sg.to_cartesian();
//! assert!(p[0].abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
//! ```

/// The long-form guide, mirrored from `book/`. Including the chapters
/// here keeps every example in the book compiling and passing under
/// `cargo test`.
pub mod guide {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub mod overview {}
    #[doc = include_str!("../../../book/src/world.md")]
    pub mod world {}
    #[doc = include_str!("../../../book/src/planning.md")]
    pub mod planning {}
    #[doc = include_str!("../../../book/src/attention.md")]
    pub mod attention {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
}

pub mod agents;
pub mod core;
pub mod envloop;
pub mod eval;
pub mod net;
pub mod percept;
pub mod planner;
pub mod train;
pub mod world;
