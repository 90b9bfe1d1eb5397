//! Success rate of scripted subgoal policies, as feasibility baselines for
//! the learned agent. Run with `--features` nothing; tweak constants here.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subgoal_nav::core::{normalize_angle, Subgoal};
use subgoal_nav::envloop::{run_episode, EpisodeObserver, NullObserver, Outcome, SubgoalPolicy};
use subgoal_nav::world::TraceRecord;
use subgoal_nav::net::{load_checkpoint, MotionActor, Real, SubgoalState};
use subgoal_nav::train::sample_episode;
use subgoal_nav::world::ObstacleConfig;

struct Scripted {
    mode: f64,
    act_dist: f64,
    cone: f64,
    side_angle: f64,
    dodge_l: f64,
    // potential field
    repulse: f64,
    influence: f64,
    swirl: f64,
    l_min: f64,
    clamp: f64,
    front: f64,
}

impl SubgoalPolicy for Scripted {
    fn subgoal(&mut self, state: &SubgoalState) -> Subgoal {
        let (x, y) = (state.waypoints[4], state.waypoints[5]);
        let l = (x * x + y * y).sqrt().min(Subgoal::L_MAX);
        let theta = y.atan2(x);
        if self.mode < 0.5 {
            return Subgoal::new(l, theta);
        }
        if self.mode > 1.5 {
            // potential field: attraction to the third waypoint plus 1/d^2
            // repulsion from every sensed point within the influence radius
            let d_att = (x * x + y * y).sqrt().max(1e-9);
            let (ax, ay) = (x / d_att, y / d_att);
            let (mut vx, mut vy) = (ax, ay);
            for s in &state.sectors {
                for p in s.chunks(2) {
                    let d = (p[0] * p[0] + p[1] * p[1]).sqrt().max(1e-6);
                    if d < self.influence {
                        let mut w = self.repulse * (1.0 / d - 1.0 / self.influence) / (d * d);
                        // frontal points threaten forward motion more than
                        // lateral walls do
                        w *= 1.0 + self.front * (p[0] / d).max(0.0);
                        let (ux, uy) = (p[0] / d, p[1] / d);
                        vx -= w * ux;
                        vy -= w * uy;
                        // tangential component: deflect around the point
                        // toward the waypoint side to escape head-on minima
                        let side = if ux * ay - uy * ax >= 0.0 { 1.0 } else { -1.0 };
                        vx += self.swirl * w * side * -uy;
                        vy += self.swirl * w * side * ux;
                    }
                }
            }
            let mag = (vx * vx + vy * vy).sqrt();
            let l_out = (mag * 0.6).clamp(self.l_min, Subgoal::L_MAX);
            // the robot cannot reverse: a backward subgoal stalls it in a
            // turn-in-place; clamp the escape into the forward half-plane
            let mut th = vy.atan2(vx);
            if self.clamp > 0.0 {
                th = th.clamp(-self.clamp, self.clamp);
            }
            return Subgoal::new(l_out, th);
        }
        // single-threat sidestep
        let (mut dmin, mut phi) = (f64::INFINITY, 0.0);
        for s in &state.sectors {
            for p in s.chunks(2) {
                let d = (p[0] * p[0] + p[1] * p[1]).sqrt();
                let a = p[1].atan2(p[0]);
                if d < dmin && normalize_angle(a - theta).abs() < self.cone {
                    (dmin, phi) = (d, a);
                }
            }
        }
        if dmin < self.act_dist {
            let side = if normalize_angle(theta - phi) >= 0.0 { 1.0 } else { -1.0 };
            return Subgoal::new(self.dodge_l, phi + side * self.side_angle);
        }
        Subgoal::new(l, theta)
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let get = |k: &str, dflt: f64| {
        args.iter()
            .position(|a| a == k)
            .and_then(|i| args.get(i + 1))
            .and_then(|v| v.parse().ok())
            .unwrap_or(dflt)
    };
    let mut motion = MotionActor::<Real>::init(&mut ChaCha8Rng::seed_from_u64(0));
    load_checkpoint(std::path::Path::new("artifacts/motion.ckpt"), &mut motion).unwrap();
    let obstacles = ObstacleConfig { fixed_speed: Some(get("--speed", 0.3)), ..Default::default() };
    let n = get("--episodes", 100.0) as u64;
    let (mut wins, mut collisions, mut total) = (0, 0, 0);
    for seed in (1u64 << 40)..(1u64 << 40) + n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(cfg) = sample_episode(&obstacles, &mut rng) else { continue };
        let mut sa = Scripted {
            mode: get("--mode", 2.0),
            act_dist: get("--act", 0.6),
            cone: get("--cone", 1.2),
            side_angle: get("--side", 1.9),
            dodge_l: get("--dl", 0.35),
            repulse: get("--rep", 0.1),
            influence: get("--inf", 1.0),
            swirl: get("--swirl", 0.8),
            l_min: get("--lmin", 0.15),
            clamp: get("--clamp", 0.0),
            front: get("--front", 0.0),
        };
        let res = run_episode(&cfg, &mut sa, &mut motion.clone(), &mut NullObserver).unwrap();
        total += 1;
        match res.outcome {
            Outcome::ReachedGoal => wins += 1,
            Outcome::Collision => collisions += 1,
            _ => {}
        }
        if get("--dump", 0.0) > 0.0 && res.outcome == Outcome::Collision {
            struct Dump(Vec<TraceRecord>);
            impl EpisodeObserver for Dump {
                fn on_record(&mut self, r: &TraceRecord) { self.0.push(r.clone()); }
            }
            let mut sa2 = Scripted { ..sa };
            let mut d = Dump(Vec::new());
            let _ = run_episode(&cfg, &mut sa2, &mut motion.clone(), &mut d).unwrap();
            let f = std::fs::File::create(format!("/tmp/fails/seed_{}.jsonl", seed - (1u64 << 40))).unwrap();
            let mut w = std::io::BufWriter::new(f);
            use std::io::Write;
            for r in &d.0 { writeln!(w, "{}", serde_json::to_string(r).unwrap()).unwrap(); }
        }
    }
    println!("scripted: {wins}/{total} goal, {collisions} collisions");
}
