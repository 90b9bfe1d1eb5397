//! Randomized scenes, kinematic robot and obstacle simulation, lidar ray
//! casting, and collision checks.
//!
//! The simulator is deterministic: the same scene and command sequence
//! produce a bit-identical trajectory. Robot motion uses the exact
//! unicycle arc so results do not depend on integrator substeps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::core::{dist, normalize_angle, Point2, Pose2D, VelocityCommand};
use crate::planner::{
    plan, point_segment_distance, OccupancyGrid, PlannedPath, DEFAULT_RESOLUTION,
};

/// Default robot footprint: a disc of this radius, meters.
pub const ROBOT_RADIUS: f64 = 0.18;

/// Number of lidar beams.
pub const LIDAR_BEAMS: usize = 1440;
/// Angular spacing between beams, radians (0.25 degrees).
pub const LIDAR_ANGULAR_RES: f64 = 0.25 * std::f64::consts::PI / 180.0;
/// Maximum lidar range, meters.
pub const LIDAR_MAX_RANGE: f64 = 12.0;

pub type Segment = [Point2; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Corridor,
    Intersection,
    Office,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [SceneKind::Corridor, SceneKind::Intersection, SceneKind::Office];

    pub fn as_str(&self) -> &'static str {
        match self {
            SceneKind::Corridor => "corridor",
            SceneKind::Intersection => "intersection",
            SceneKind::Office => "office",
        }
    }
}

impl std::str::FromStr for SceneKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corridor" => Ok(SceneKind::Corridor),
            "intersection" => Ok(SceneKind::Intersection),
            "office" => Ok(SceneKind::Office),
            _ => Err(format!("unknown scene kind {s:?}")),
        }
    }
}

/// Axis-aligned rectangle used for spawn sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point2 {
        [
            rng.gen_range(self.min[0]..=self.max[0]),
            rng.gen_range(self.min[1]..=self.max[1]),
        ]
    }

    pub fn center(&self) -> Point2 {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    pub fn contains(&self, p: Point2) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

/// A sampled scene: wall segments plus the regions start/goal are drawn
/// from. For corridor and intersection scenes the regions are the
/// dead-ends; for office scenes they are the four outer corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub walls: Vec<Segment>,
    pub spawn_regions: Vec<Rect>,
    pub bounds_min: Point2,
    pub bounds_max: Point2,
    pub rng_seed: u64,
}

impl SceneSpec {
    /// Static-walls occupancy grid, inflated by the robot radius.
    pub fn occupancy_grid(&self, robot_radius: f64) -> OccupancyGrid {
        OccupancyGrid::from_segments(
            &self.walls,
            [self.bounds_min[0] - 0.2, self.bounds_min[1] - 0.2],
            [self.bounds_max[0] + 0.2, self.bounds_max[1] + 0.2],
            DEFAULT_RESOLUTION,
            robot_radius,
        )
    }
}

fn rect_outline(min: Point2, max: Point2) -> Vec<Segment> {
    vec![
        [[min[0], min[1]], [max[0], min[1]]],
        [[max[0], min[1]], [max[0], max[1]]],
        [[max[0], max[1]], [min[0], max[1]]],
        [[min[0], max[1]], [min[0], min[1]]],
    ]
}

/// Recursive wall splitting for office scenes: each split adds a wall with
/// a door gap, producing rooms of different kinds and sizes.
fn subdivide_office<R: Rng>(min: Point2, max: Point2, depth: usize, rng: &mut R, walls: &mut Vec<Segment>) {
    const MIN_SIDE: f64 = 2.6;
    const DOOR: f64 = 1.0;
    if depth == 0 {
        return;
    }
    let w = max[0] - min[0];
    let h = max[1] - min[1];
    if w < 2.0 * MIN_SIDE && h < 2.0 * MIN_SIDE {
        return;
    }
    let split_x = if w >= 2.0 * MIN_SIDE && h >= 2.0 * MIN_SIDE {
        w >= h
    } else {
        w >= 2.0 * MIN_SIDE
    };
    if split_x {
        let x = min[0] + w * rng.gen_range(0.38..0.62);
        let door_start = rng.gen_range(min[1] + 0.3..max[1] - 0.3 - DOOR);
        if door_start - min[1] > 0.05 {
            walls.push([[x, min[1]], [x, door_start]]);
        }
        if max[1] - (door_start + DOOR) > 0.05 {
            walls.push([[x, door_start + DOOR], [x, max[1]]]);
        }
        subdivide_office(min, [x, max[1]], depth - 1, rng, walls);
        subdivide_office([x, min[1]], max, depth - 1, rng, walls);
    } else {
        let y = min[1] + h * rng.gen_range(0.38..0.62);
        let door_start = rng.gen_range(min[0] + 0.3..max[0] - 0.3 - DOOR);
        if door_start - min[0] > 0.05 {
            walls.push([[min[0], y], [door_start, y]]);
        }
        if max[0] - (door_start + DOOR) > 0.05 {
            walls.push([[door_start + DOOR, y], [max[0], y]]);
        }
        subdivide_office(min, [max[0], y], depth - 1, rng, walls);
        subdivide_office([min[0], y], max, depth - 1, rng, walls);
    }
}

/// Samples a randomized scene of the given kind.
///
/// Office layouts are rejection-resampled until all four corner regions
/// are mutually reachable on the inflated grid.
pub fn sample_scene<R: Rng>(kind: SceneKind, rng: &mut R) -> SceneSpec {
    let seed = rng.gen::<u64>();
    match kind {
        SceneKind::Corridor => {
            let width = rng.gen_range(1.8..=3.0);
            let length = rng.gen_range(10.0..=14.0);
            let min = [-length / 2.0, -width / 2.0];
            let max = [length / 2.0, width / 2.0];
            let m = 0.4; // spawn margin off the walls
            let spawn = vec![
                Rect { min: [min[0] + m, min[1] + m], max: [min[0] + 1.2, max[1] - m] },
                Rect { min: [max[0] - 1.2, min[1] + m], max: [max[0] - m, max[1] - m] },
            ];
            SceneSpec {
                kind,
                walls: rect_outline(min, max),
                spawn_regions: spawn,
                bounds_min: min,
                bounds_max: max,
                rng_seed: seed,
            }
        }
        SceneKind::Intersection => {
            let w = rng.gen_range(1.8..=2.5);
            let arm = rng.gen_range(4.0..=6.0);
            let h = w / 2.0;
            let a = arm + h;
            // plus-shaped outline, 12 segments
            let v: [Point2; 12] = [
                [a, h], [h, h], [h, a], [-h, a], [-h, h], [-a, h],
                [-a, -h], [-h, -h], [-h, -a], [h, -a], [h, -h], [a, -h],
            ];
            let mut walls = Vec::with_capacity(12);
            for i in 0..12 {
                walls.push([v[i], v[(i + 1) % 12]]);
            }
            let m = 0.4;
            let spawn = vec![
                Rect { min: [a - 1.2, -h + m], max: [a - m, h - m] },   // +x arm
                Rect { min: [-a + m, -h + m], max: [-a + 1.2, h - m] }, // -x arm
                Rect { min: [-h + m, a - 1.2], max: [h - m, a - m] },   // +y arm
                Rect { min: [-h + m, -a + m], max: [h - m, -a + 1.2] }, // -y arm
            ];
            SceneSpec {
                kind,
                walls,
                spawn_regions: spawn,
                bounds_min: [-a, -a],
                bounds_max: [a, a],
                rng_seed: seed,
            }
        }
        SceneKind::Office => {
            let min = [-3.5, -3.5];
            let max = [3.5, 3.5];
            let m = 0.4;
            let c = 1.3; // corner region size
            let spawn = vec![
                Rect { min: [min[0] + m, min[1] + m], max: [min[0] + c, min[1] + c] },
                Rect { min: [max[0] - c, min[1] + m], max: [max[0] - m, min[1] + c] },
                Rect { min: [max[0] - c, max[1] - c], max: [max[0] - m, max[1] - m] },
                Rect { min: [min[0] + m, max[1] - c], max: [min[0] + c, max[1] - m] },
            ];
            loop {
                let mut walls = rect_outline(min, max);
                subdivide_office(min, max, 2, rng, &mut walls);
                let scene = SceneSpec {
                    kind,
                    walls,
                    spawn_regions: spawn.clone(),
                    bounds_min: min,
                    bounds_max: max,
                    rng_seed: seed,
                };
                let grid = scene.occupancy_grid(ROBOT_RADIUS);
                let centers: Vec<Point2> = spawn.iter().map(|r| r.center()).collect();
                let all_connected = centers
                    .iter()
                    .all(|&c| grid.is_free_world(c))
                    && centers[1..].iter().all(|&c| grid.connected(centers[0], c));
                if all_connected {
                    return scene;
                }
            }
        }
    }
}

/// Samples a collision-free, grid-connected start pose and goal point.
///
/// Corridor and intersection scenes draw them from distinct dead-ends;
/// office scenes use opposing outer corners. The start heading roughly
/// faces the goal.
pub fn sample_start_goal<R: Rng>(
    scene: &SceneSpec,
    grid: &OccupancyGrid,
    rng: &mut R,
) -> (Pose2D, Point2) {
    loop {
        let (ri, gi) = match scene.kind {
            SceneKind::Corridor => {
                if rng.gen_bool(0.5) { (0, 1) } else { (1, 0) }
            }
            SceneKind::Intersection => {
                let a = rng.gen_range(0..4usize);
                let mut b = rng.gen_range(0..3usize);
                if b >= a {
                    b += 1;
                }
                (a, b)
            }
            SceneKind::Office => {
                // opposing corners: diagonal pairs (0,2) or (1,3)
                match rng.gen_range(0..4u8) {
                    0 => (0, 2),
                    1 => (2, 0),
                    2 => (1, 3),
                    _ => (3, 1),
                }
            }
        };
        let start = scene.spawn_regions[ri].sample(rng);
        let goal = scene.spawn_regions[gi].sample(rng);
        if !grid.is_free_world(start) || !grid.is_free_world(goal) {
            continue;
        }
        if !grid.connected(start, goal) {
            continue;
        }
        let bearing = (goal[1] - start[1]).atan2(goal[0] - start[0]);
        let heading = normalize_angle(bearing + rng.gen_range(-0.25..0.25) * std::f64::consts::PI);
        return (Pose2D::new(start[0], start[1], heading), goal);
    }
}

/// A cuboid obstacle, either fixed or moving back and forth along a
/// polyline at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    /// Axis-aligned half-extents, meters.
    pub half_extents: [f64; 2],
    pub kind: ObstacleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObstacleKind {
    Static { center: Point2 },
    Dynamic { path: Vec<Point2>, speed: f64 },
}

impl ObstacleSpec {
    pub fn is_dynamic(&self) -> bool {
        matches!(self.kind, ObstacleKind::Dynamic { .. })
    }

    pub fn initial_state(&self) -> ObstacleState {
        match &self.kind {
            ObstacleKind::Static { center } => ObstacleState {
                center: *center,
                arc_pos: 0.0,
                forward: true,
            },
            ObstacleKind::Dynamic { path, .. } => ObstacleState {
                center: path[0],
                arc_pos: 0.0,
                forward: true,
            },
        }
    }
}

/// Runtime pose of one obstacle: arc-length position along its path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleState {
    pub center: Point2,
    pub arc_pos: f64,
    pub forward: bool,
}

/// Obstacle sampling configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObstacleConfig {
    pub n_dynamic: usize,
    pub n_static: usize,
    /// Uniform speed range for dynamic obstacles, m/s.
    pub speed_range: (f64, f64),
    /// When set, all dynamic obstacles move at exactly this speed.
    pub fixed_speed: Option<f64>,
    /// Base half-extent of the cuboid footprint, meters.
    pub half_extent: f64,
    /// Relative half-extent jitter per episode (0.25 = +/-25%).
    pub half_extent_jitter: f64,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        Self {
            n_dynamic: 2,
            n_static: 1,
            speed_range: (0.1, 0.5),
            fixed_speed: None,
            half_extent: 0.2,
            half_extent_jitter: 0.25,
        }
    }
}

fn segments_intersect(a: &Segment, b: &Segment) -> bool {
    let d = |p: Point2, q: Point2, r: Point2| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let d1 = d(b[0], b[1], a[0]);
    let d2 = d(b[0], b[1], a[1]);
    let d3 = d(a[0], a[1], b[0]);
    let d4 = d(a[0], a[1], b[1]);
    ((d1 > 0.0) != (d2 > 0.0)) && ((d3 > 0.0) != (d4 > 0.0))
}

fn polylines_cross(a: &[Point2], b: &[Point2]) -> bool {
    for wa in a.windows(2) {
        for wb in b.windows(2) {
            if segments_intersect(&[wa[0], wa[1]], &[wb[0], wb[1]]) {
                return true;
            }
        }
    }
    false
}

/// Samples the episode's unknown obstacles relative to the robot's planned
/// path: one dynamic obstacle comes down the robot's own path (from its
/// middle or end toward the start), further dynamic obstacles cross the
/// path transversally, and each static obstacle sits directly on the path.
pub fn sample_obstacles<R: Rng>(
    _scene: &SceneSpec,
    grid: &OccupancyGrid,
    robot_path: &PlannedPath,
    cfg: &ObstacleConfig,
    rng: &mut R,
) -> Vec<ObstacleSpec> {
    let mut out = Vec::new();
    let robot_start = robot_path.points[0];
    let goal = robot_path.goal();
    let len = robot_path.length;
    let sample_speed = |rng: &mut R| match cfg.fixed_speed {
        Some(s) => s,
        None => rng.gen_range(cfg.speed_range.0..=cfg.speed_range.1),
    };
    let sample_he = |rng: &mut R| {
        let j = cfg.half_extent_jitter;
        [
            cfg.half_extent * rng.gen_range(1.0 - j..=1.0 + j),
            cfg.half_extent * rng.gen_range(1.0 - j..=1.0 + j),
        ]
    };

    for d in 0..cfg.n_dynamic {
        if d == 0 {
            // oncoming: travels the robot's global path from the middle or
            // the end toward the robot's start
            let mut path = Vec::new();
            for _ in 0..100 {
                let from = if rng.gen_bool(0.5) { 0.5 * len } else { len };
                let cand = robot_path.slice(from, 0.0);
                if dist(cand[0], robot_start) > 1.2 {
                    path = cand;
                    break;
                }
            }
            if path.is_empty() {
                path = robot_path.slice(len, 0.0);
            }
            out.push(ObstacleSpec {
                half_extents: sample_he(rng),
                kind: ObstacleKind::Dynamic { path, speed: sample_speed(rng) },
            });
        } else {
            // crossing: A* path between free points on opposite sides of
            // the robot path
            let mut chosen: Option<Vec<Point2>> = None;
            for attempt in 0..120 {
                let s = rng.gen_range(0.25..0.75) * len;
                let p = robot_path.point_at(s);
                let ahead = robot_path.point_at((s + 0.2).min(len));
                let behind = robot_path.point_at((s - 0.2).max(0.0));
                let tx = ahead[0] - behind[0];
                let ty = ahead[1] - behind[1];
                let n = (tx * tx + ty * ty).sqrt();
                if n < 1e-9 {
                    continue;
                }
                let (nx, ny) = (-ty / n, tx / n);
                let d1 = rng.gen_range(0.8..2.5);
                let d2 = rng.gen_range(0.8..2.5);
                let e1 = [p[0] + nx * d1, p[1] + ny * d1];
                let e2 = [p[0] - nx * d2, p[1] - ny * d2];
                let (Some(c1), Some(c2)) =
                    (grid.nearest_free_cell(e1, 0.8), grid.nearest_free_cell(e2, 0.8))
                else {
                    continue;
                };
                let w1 = grid.cell_center(c1.0, c1.1);
                let w2 = grid.cell_center(c2.0, c2.1);
                if dist(w1, w2) < 0.8 || dist(w1, robot_start) < 1.2 {
                    continue;
                }
                let Ok(obs_path) = plan(grid, w1, w2) else { continue };
                // require a genuine transversal crossing unless we are
                // running out of attempts
                if attempt < 100 && !polylines_cross(&obs_path.points, &robot_path.points) {
                    continue;
                }
                chosen = Some(obs_path.points);
                break;
            }
            let path = chosen.unwrap_or_else(|| robot_path.slice(len, 0.3 * len));
            out.push(ObstacleSpec {
                half_extents: sample_he(rng),
                kind: ObstacleKind::Dynamic { path, speed: sample_speed(rng) },
            });
        }
    }

    for _ in 0..cfg.n_static {
        let mut center = robot_path.point_at(0.5 * len);
        for _ in 0..200 {
            let c = robot_path.point_at(rng.gen_range(0.2..0.9) * len);
            if dist(c, robot_start) > 1.2 && dist(c, goal) > 0.9 {
                center = c;
                break;
            }
        }
        out.push(ObstacleSpec {
            half_extents: sample_he(rng),
            kind: ObstacleKind::Static { center },
        });
    }
    out
}

/// Full simulation state at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub robot_pose: Pose2D,
    pub robot_velocity: VelocityCommand,
    pub obstacles: Vec<ObstacleState>,
    pub sim_time: f64,
}

impl WorldState {
    pub fn initial(robot_pose: Pose2D, specs: &[ObstacleSpec]) -> Self {
        Self {
            robot_pose,
            robot_velocity: VelocityCommand::STOP,
            obstacles: specs.iter().map(|s| s.initial_state()).collect(),
            sim_time: 0.0,
        }
    }
}

/// Advances the robot by one exact unicycle arc.
pub fn step_robot(state: &WorldState, cmd: VelocityCommand, dt: f64) -> WorldState {
    debug_assert!(cmd.in_bounds());
    let mut next = state.clone();
    let h = state.robot_pose.heading;
    let (x, y) = if cmd.w.abs() > 1e-9 {
        let r = cmd.v / cmd.w;
        (
            state.robot_pose.x + r * ((h + cmd.w * dt).sin() - h.sin()),
            state.robot_pose.y - r * ((h + cmd.w * dt).cos() - h.cos()),
        )
    } else {
        (
            state.robot_pose.x + cmd.v * dt * h.cos(),
            state.robot_pose.y + cmd.v * dt * h.sin(),
        )
    };
    next.robot_pose = Pose2D::new(x, y, h + cmd.w * dt);
    next.robot_velocity = cmd;
    next.sim_time = state.sim_time + dt;
    next
}

/// Advances every dynamic obstacle along its polyline, reversing direction
/// at the endpoints (ping-pong). Static obstacles stay put. Does not touch
/// the robot or the clock.
pub fn step_obstacles(state: &WorldState, specs: &[ObstacleSpec], dt: f64) -> WorldState {
    let mut next = state.clone();
    for (st, spec) in next.obstacles.iter_mut().zip(specs) {
        let ObstacleKind::Dynamic { path, speed } = &spec.kind else {
            continue;
        };
        let poly = PlannedPath::from_points(path.clone());
        let total = poly.length;
        if total < 1e-12 {
            continue;
        }
        let mut s = st.arc_pos + if st.forward { *speed * dt } else { -*speed * dt };
        let mut forward = st.forward;
        while s < 0.0 || s > total {
            if s > total {
                s = 2.0 * total - s;
                forward = !forward;
            } else {
                s = -s;
                forward = !forward;
            }
        }
        st.arc_pos = s;
        st.forward = forward;
        st.center = poly.point_at(s);
    }
    next
}

fn ray_segment(origin: Point2, dir: Point2, seg: &Segment) -> Option<f64> {
    let ex = seg[1][0] - seg[0][0];
    let ey = seg[1][1] - seg[0][1];
    let denom = dir[0] * ey - dir[1] * ex;
    if denom.abs() < 1e-15 {
        return None;
    }
    let dx = seg[0][0] - origin[0];
    let dy = seg[0][1] - origin[1];
    let t = (dx * ey - dy * ex) / denom;
    let u = (dir[0] * dy - dir[1] * dx) / -denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

fn ray_aabb(origin: Point2, dir: Point2, min: Point2, max: Point2) -> Option<f64> {
    let mut tmin = 0.0f64;
    let mut tmax = f64::INFINITY;
    for k in 0..2 {
        if dir[k].abs() < 1e-15 {
            if origin[k] < min[k] || origin[k] > max[k] {
                return None;
            }
        } else {
            let inv = 1.0 / dir[k];
            let mut t0 = (min[k] - origin[k]) * inv;
            let mut t1 = (max[k] - origin[k]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            tmin = tmin.max(t0);
            tmax = tmax.min(t1);
            if tmin > tmax {
                return None;
            }
        }
    }
    Some(tmin)
}

/// One 1,440-beam scan. Beam `i` points at angle `i * 0.25` degrees in the
/// robot frame; ranges are clamped to 12 m when nothing is hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    pub ranges: Vec<f64>,
}

impl LidarScan {
    pub fn beam_angle(i: usize) -> f64 {
        i as f64 * LIDAR_ANGULAR_RES
    }
}

/// Casts the full scan against walls and obstacle cuboids.
pub fn cast_lidar(state: &WorldState, scene_walls: &[Segment], specs: &[ObstacleSpec]) -> LidarScan {
    let origin = state.robot_pose.position();
    let boxes: Vec<(Point2, Point2)> = specs
        .iter()
        .zip(&state.obstacles)
        .map(|(spec, st)| {
            (
                [st.center[0] - spec.half_extents[0], st.center[1] - spec.half_extents[1]],
                [st.center[0] + spec.half_extents[0], st.center[1] + spec.half_extents[1]],
            )
        })
        .collect();
    let mut ranges = Vec::with_capacity(LIDAR_BEAMS);
    for i in 0..LIDAR_BEAMS {
        let a = state.robot_pose.heading + LidarScan::beam_angle(i);
        let dir = [a.cos(), a.sin()];
        let mut r = LIDAR_MAX_RANGE;
        for seg in scene_walls {
            if let Some(t) = ray_segment(origin, dir, seg) {
                r = r.min(t);
            }
        }
        for (bmin, bmax) in &boxes {
            if let Some(t) = ray_aabb(origin, dir, *bmin, *bmax) {
                r = r.min(t);
            }
        }
        ranges.push(r.max(1e-6));
    }
    LidarScan { ranges }
}

fn point_aabb_distance(p: Point2, min: Point2, max: Point2) -> f64 {
    let cx = p[0].clamp(min[0], max[0]);
    let cy = p[1].clamp(min[1], max[1]);
    dist(p, [cx, cy])
}

/// Collision test of the robot disc against walls and obstacle cuboids.
/// Also returns the surface-to-surface distance to the closest entity
/// (negative when penetrating).
pub fn check_collision(
    state: &WorldState,
    scene_walls: &[Segment],
    specs: &[ObstacleSpec],
    robot_radius: f64,
) -> (bool, f64) {
    let p = state.robot_pose.position();
    let mut min_d = f64::INFINITY;
    for seg in scene_walls {
        min_d = min_d.min(point_segment_distance(p, seg));
    }
    for (spec, st) in specs.iter().zip(&state.obstacles) {
        let bmin = [st.center[0] - spec.half_extents[0], st.center[1] - spec.half_extents[1]];
        let bmax = [st.center[0] + spec.half_extents[0], st.center[1] + spec.half_extents[1]];
        min_d = min_d.min(point_aabb_distance(p, bmin, bmax));
    }
    let d_closest = min_d - robot_radius;
    (d_closest <= 0.0, d_closest)
}

/// One line of the episode trace log (line-delimited JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub w: f64,
    pub obstacles: Vec<Point2>,
    /// Termination flag, set on the final record only.
    pub terminal: Option<String>,
}

impl TraceRecord {
    pub fn from_state(state: &WorldState, terminal: Option<String>) -> Self {
        Self {
            t: state.sim_time,
            x: state.robot_pose.x,
            y: state.robot_pose.y,
            heading: state.robot_pose.heading,
            v: state.robot_velocity.v,
            w: state.robot_velocity.w,
            obstacles: state.obstacles.iter().map(|o| o.center).collect(),
            terminal,
        }
    }
}
