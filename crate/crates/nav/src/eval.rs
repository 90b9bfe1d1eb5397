//! Batch evaluation: paired-seed episode suites, success/collision/timeout
//! rates with binomial confidence intervals, obstacle sweeps, and the
//! subgoal direction histogram.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::core::{dist, normalize_angle, Pose2D, Subgoal};
use crate::envloop::{run_episode, NullObserver, SUBGOAL_RADIUS};
use crate::net::{MotionActor, MotionState, Real, SubgoalActor};
use crate::train::sample_episode;
use crate::world::{step_robot, ObstacleConfig, SceneKind, WorldState};

/// Suite parameters shared by `evaluate` and the sweeps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub episodes: usize,
    pub master_seed: u64,
    pub obstacles: ObstacleConfig,
    /// False runs the "no replan" ablation: one global plan per episode.
    pub replan: bool,
    /// Worker threads; results are identical at any count because every
    /// episode is driven by its own seed.
    pub parallel: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            master_seed: 0,
            obstacles: ObstacleConfig::default(),
            replan: true,
            parallel: 1,
        }
    }
}

/// One evaluated episode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub scene: SceneKind,
    pub outcome: String,
    pub sim_time: f64,
    pub path_length: f64,
    pub min_clearance: f64,
    pub subgoals: Vec<Subgoal>,
}

/// Outcome rates with a 95% Wilson interval on the success rate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Rates {
    pub n: usize,
    pub success: f64,
    pub collision: f64,
    pub timeout: f64,
    pub success_ci_lo: f64,
    pub success_ci_hi: f64,
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054; // 97.5% normal quantile
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

impl Rates {
    pub fn from_outcomes(outcomes: &[&str]) -> Self {
        let n = outcomes.len();
        let count = |k: &str| outcomes.iter().filter(|o| **o == k).count();
        let s = count("goal");
        let (lo, hi) = wilson_interval(s, n);
        let frac = |c: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        Self {
            n,
            success: frac(s),
            collision: frac(count("collision")),
            timeout: frac(count("timeout")),
            success_ci_lo: lo,
            success_ci_hi: hi,
        }
    }
}

/// Full evaluation output.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub overall: Rates,
    pub per_scene: Vec<(SceneKind, Rates)>,
    pub episodes: Vec<EpisodeSummary>,
}

fn run_one(
    actor: &SubgoalActor<Real>,
    motion: &MotionActor<Real>,
    cfg: &EvalConfig,
    seed: u64,
) -> Option<EpisodeSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ep = sample_episode(&cfg.obstacles, &mut rng)?;
    ep.replan_enabled = cfg.replan;
    let mut sa = actor.clone();
    let mut ma = motion.clone();
    let res = run_episode(&ep, &mut sa, &mut ma, &mut NullObserver).ok()?;
    Some(EpisodeSummary {
        seed,
        scene: ep.scene.kind,
        outcome: res.outcome.as_str().to_string(),
        sim_time: res.sim_time,
        path_length: res.path_length,
        min_clearance: res.min_clearance,
        subgoals: res.subgoals,
    })
}

/// Runs the suite on seeds `master_seed .. master_seed + episodes`.
/// Policies compared under the same config and master seed see identical
/// scenes and obstacles episode-by-episode (paired evaluation).
pub fn evaluate(
    actor: &SubgoalActor<Real>,
    motion: &MotionActor<Real>,
    cfg: &EvalConfig,
) -> EvalOutcome {
    let seeds: Vec<u64> = (0..cfg.episodes as u64).map(|i| cfg.master_seed + i).collect();
    let episodes: Vec<EpisodeSummary> = if cfg.parallel > 1 {
        let chunk = seeds.len().div_ceil(cfg.parallel);
        let mut slots: Vec<Vec<Option<EpisodeSummary>>> = Vec::new();
        std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .chunks(chunk.max(1))
                .map(|c| scope.spawn(move || c.iter().map(|&s| run_one(actor, motion, cfg, s)).collect::<Vec<_>>()))
                .collect();
            for h in handles {
                slots.push(h.join().expect("eval worker"));
            }
        });
        slots.into_iter().flatten().flatten().collect()
    } else {
        seeds.iter().filter_map(|&s| run_one(actor, motion, cfg, s)).collect()
    };

    let overall = Rates::from_outcomes(&episodes.iter().map(|e| e.outcome.as_str()).collect::<Vec<_>>());
    let per_scene = SceneKind::ALL
        .iter()
        .map(|&k| {
            let outs: Vec<&str> = episodes
                .iter()
                .filter(|e| e.scene == k)
                .map(|e| e.outcome.as_str())
                .collect();
            (k, Rates::from_outcomes(&outs))
        })
        .collect();
    EvalOutcome { overall, per_scene, episodes }
}

/// Per-point result of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub x: f64,
    pub rates: Rates,
}

/// Success vs number of dynamic obstacles at a fixed 0.3 m/s, paired
/// seeds across counts.
pub fn sweep_obstacle_count(
    actor: &SubgoalActor<Real>,
    motion: &MotionActor<Real>,
    counts: &[usize],
    base: &EvalConfig,
) -> Result<Vec<SweepPoint>, String> {
    if counts.is_empty() {
        return Err("empty obstacle-count sweep".into());
    }
    let mut out = Vec::new();
    for &c in counts {
        let mut cfg = base.clone();
        cfg.obstacles.n_dynamic = c;
        cfg.obstacles.fixed_speed = Some(0.3);
        let res = evaluate(actor, motion, &cfg);
        out.push(SweepPoint { x: c as f64, rates: res.overall });
    }
    Ok(out)
}

/// Success vs dynamic-obstacle speed with 2 dynamic + 1 static, paired
/// seeds across speeds. Returns warnings for speeds outside the training
/// range [0.1, 0.5].
pub fn sweep_obstacle_speed(
    actor: &SubgoalActor<Real>,
    motion: &MotionActor<Real>,
    speeds: &[f64],
    base: &EvalConfig,
) -> Result<(Vec<SweepPoint>, Vec<String>), String> {
    if speeds.is_empty() {
        return Err("empty obstacle-speed sweep".into());
    }
    let mut warnings = Vec::new();
    let mut out = Vec::new();
    for &s in speeds {
        if !(0.1..=0.5).contains(&s) {
            warnings.push(format!("speed {s} m/s is outside the training range [0.1, 0.5]"));
        }
        let mut cfg = base.clone();
        cfg.obstacles.n_dynamic = 2;
        cfg.obstacles.n_static = 1;
        cfg.obstacles.fixed_speed = Some(s);
        let res = evaluate(actor, motion, &cfg);
        out.push(SweepPoint { x: s, rates: res.overall });
    }
    Ok((out, warnings))
}

/// 2D polar histogram over subgoal direction (relative to heading) and
/// distance.
#[derive(Debug, Clone)]
pub struct SubgoalHistogram {
    pub theta_bins: usize,
    pub l_bins: usize,
    /// counts[t][l]
    pub counts: Vec<Vec<usize>>,
    pub total: usize,
    /// Fraction of subgoals within +/- pi/4 of the robot heading.
    pub forward_fraction: f64,
}

pub fn subgoal_histogram(episodes: &[EpisodeSummary]) -> Result<SubgoalHistogram, String> {
    let theta_bins = 16;
    let l_bins = 6;
    let mut counts = vec![vec![0usize; l_bins]; theta_bins];
    let mut total = 0usize;
    let mut forward = 0usize;
    for ep in episodes {
        for sg in &ep.subgoals {
            let th = normalize_angle(sg.theta);
            if th.abs() <= std::f64::consts::FRAC_PI_4 {
                forward += 1;
            }
            let tb = (((th + std::f64::consts::PI) / std::f64::consts::TAU * theta_bins as f64)
                as usize)
                .min(theta_bins - 1);
            let lb = ((sg.l / Subgoal::L_MAX * l_bins as f64) as usize).min(l_bins - 1);
            counts[tb][lb] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err("no subgoals in input".into());
    }
    Ok(SubgoalHistogram {
        theta_bins,
        l_bins,
        counts,
        total,
        forward_fraction: forward as f64 / total as f64,
    })
}

impl SubgoalHistogram {
    /// CSV with one row per (theta, l) bin: bin centers and count.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta_center,l_center,count\n");
        for (t, row) in self.counts.iter().enumerate() {
            let tc = -std::f64::consts::PI
                + (t as f64 + 0.5) * std::f64::consts::TAU / self.theta_bins as f64;
            for (l, &c) in row.iter().enumerate() {
                let lc = (l as f64 + 0.5) * Subgoal::L_MAX / self.l_bins as f64;
                s.push_str(&format!("{tc:.6},{lc:.6},{c}\n"));
            }
        }
        s
    }

    /// Simple polar wedge plot; opacity encodes bin density.
    pub fn to_svg(&self) -> String {
        let size = 400.0;
        let c = size / 2.0;
        let r_max = c - 10.0;
        let max = self.counts.iter().flatten().copied().max().unwrap_or(1).max(1) as f64;
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
        );
        s.push_str(&format!(
            "<circle cx=\"{c}\" cy=\"{c}\" r=\"{r_max}\" fill=\"none\" stroke=\"#999\"/>\n"
        ));
        for (t, row) in self.counts.iter().enumerate() {
            let a0 = -std::f64::consts::PI + t as f64 * std::f64::consts::TAU / self.theta_bins as f64;
            let a1 = a0 + std::f64::consts::TAU / self.theta_bins as f64;
            for (l, &cnt) in row.iter().enumerate() {
                if cnt == 0 {
                    continue;
                }
                let r0 = r_max * l as f64 / self.l_bins as f64;
                let r1 = r_max * (l as f64 + 1.0) / self.l_bins as f64;
                // screen y grows downward; heading (theta = 0) points right
                let p = |r: f64, a: f64| (c + r * a.cos(), c - r * a.sin());
                let (x0, y0) = p(r0, a0);
                let (x1, y1) = p(r1, a0);
                let (x2, y2) = p(r1, a1);
                let (x3, y3) = p(r0, a1);
                let opacity = (cnt as f64 / max).max(0.05);
                s.push_str(&format!(
                    "<path d=\"M{x0:.1},{y0:.1} L{x1:.1},{y1:.1} A{r1:.1},{r1:.1} 0 0,0 {x2:.1},{y2:.1} L{x3:.1},{y3:.1} A{r0:.1},{r0:.1} 0 0,1 {x0:.1},{y0:.1} Z\" fill=\"#2266cc\" fill-opacity=\"{opacity:.3}\"/>\n"
                ));
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Fraction of random curriculum targets the frozen motion agent reaches
/// within the 3 s budget (the stage-one acceptance check).
pub fn motion_target_success(actor: &MotionActor<Real>, n: usize, master_seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let dt = 0.05;
    let mut reached = 0usize;
    for _ in 0..n {
        let start = Pose2D::new(0.0, 0.0, rng.gen_range(0.0..std::f64::consts::TAU));
        let d = rng.gen_range(f64::EPSILON..=0.7);
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let target = [d * a.cos(), d * a.sin()];
        let mut world = WorldState::initial(start, &[]);
        for _ in 0..60 {
            let rel = world.robot_pose.to_robot_frame(target);
            let state = MotionState {
                v: world.robot_velocity.v,
                w: world.robot_velocity.w,
                dx: rel[0],
                dy: rel[1],
                bearing: rel[1].atan2(rel[0]),
            };
            let cmd = actor.predict(&state);
            world = step_robot(&world, cmd, dt);
            if dist(world.robot_pose.position(), target) <= SUBGOAL_RADIUS {
                reached += 1;
                break;
            }
        }
    }
    reached as f64 / n as f64
}

/// Writes an evaluation table as CSV (one row per scope).
pub fn rates_csv(overall: &Rates, per_scene: &[(SceneKind, Rates)]) -> String {
    let mut s = String::from("scope,n,success,collision,timeout,success_ci_lo,success_ci_hi\n");
    let row = |name: &str, r: &Rates| {
        format!(
            "{name},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            r.n, r.success, r.collision, r.timeout, r.success_ci_lo, r.success_ci_hi
        )
    };
    s.push_str(&row("overall", overall));
    for (k, r) in per_scene {
        s.push_str(&row(k.as_str(), r));
    }
    s
}
