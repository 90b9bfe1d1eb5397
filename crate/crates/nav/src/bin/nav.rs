//! Command-line entry points: two-stage training, batch evaluation,
//! obstacle sweeps, subgoal histograms, and trace replay.
//!
//! Every run is fully determined by `--seed` (plus the config file, whose
//! SHA-256 is echoed into all reports). Exit code is nonzero when a
//! `--gate` check fails.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use subgoal_nav::envloop::{run_episode, EpisodeObserver};
use subgoal_nav::eval::{
    evaluate, rates_csv, subgoal_histogram, sweep_obstacle_count, sweep_obstacle_speed,
    EvalConfig, SweepPoint,
};
use subgoal_nav::net::{load_checkpoint, save_checkpoint, MotionActor, Real, SubgoalActor};
use subgoal_nav::train::{
    load_config, sample_episode, train_motion, train_subgoal, write_metrics_csv, TrainConfig,
};
use subgoal_nav::world::{SceneKind, TraceRecord};

#[derive(Parser)]
#[command(name = "nav", about = "Hierarchical subgoal-driven navigation", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Training/evaluation config (TOML). Defaults used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; everything downstream derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for checkpoints, CSVs, and plots.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Episode count (training or evaluation, depending on the verb).
    #[arg(long)]
    episodes: Option<usize>,
    /// Evaluation worker threads; results are identical at any count.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Exit nonzero when the verb's acceptance check fails.
    #[arg(long, default_value_t = false)]
    gate: bool,
}

#[derive(Copy, Clone, ValueEnum)]
enum SweepMode {
    /// Dynamic obstacle count 1..=3 at 0.3 m/s.
    Count,
    /// Dynamic obstacle speed 0.2..=0.5 m/s with 2 dynamic + 1 static.
    Speed,
}

#[derive(Subcommand)]
enum Cmd {
    /// Stage one: TD3 on the free-space target curriculum.
    TrainMotion {
        #[command(flatten)]
        common: Common,
    },
    /// Stage two: DDPG subgoal agent against a frozen motion agent.
    TrainSubgoal {
        #[command(flatten)]
        common: Common,
        /// Motion-agent checkpoint from stage one.
        #[arg(long)]
        motion: PathBuf,
    },
    /// Paired-seed evaluation suite with per-scene breakdown.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subgoal: PathBuf,
        #[arg(long)]
        motion: PathBuf,
        /// Run the "no replan" ablation (plan once per episode).
        #[arg(long, default_value_t = false)]
        no_replan: bool,
        /// All dynamic obstacles move at exactly this speed, m/s.
        #[arg(long, default_value_t = 0.3)]
        obstacle_speed: f64,
        /// Also write trace logs (JSONL) for the first N episodes.
        #[arg(long, default_value_t = 0)]
        trace: usize,
        /// Success-rate gate used with --gate.
        #[arg(long, default_value_t = 0.7)]
        gate_threshold: f64,
    },
    /// Success-rate sweep over obstacle count or speed.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subgoal: PathBuf,
        #[arg(long)]
        motion: PathBuf,
        #[arg(long, value_enum)]
        mode: SweepMode,
        /// Trend slack in percentage points used with --gate.
        #[arg(long, default_value_t = 5.0)]
        slack: f64,
    },
    /// Polar histogram of predicted subgoals over an evaluation suite.
    Histogram {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        subgoal: PathBuf,
        #[arg(long)]
        motion: PathBuf,
        /// Keep only episodes in this scene kind.
        #[arg(long)]
        scene: Option<String>,
        /// Forward-fraction gate used with --gate.
        #[arg(long, default_value_t = 0.5)]
        gate_threshold: f64,
    },
    /// Render a recorded trace log (JSONL) to SVG plus a text summary.
    ReplayTrace {
        /// Trace log written by `evaluate --trace`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn fail(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn load_train_config(path: &Option<PathBuf>) -> Result<(TrainConfig, Option<String>), String> {
    match path {
        Some(p) => load_config(p).map(|(c, h)| (c, Some(h))),
        None => Ok((TrainConfig::default(), None)),
    }
}

fn load_subgoal(path: &Path) -> Result<SubgoalActor<Real>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut actor = SubgoalActor::<Real>::init(&mut rng);
    load_checkpoint(path, &mut actor).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(actor)
}

fn load_motion(path: &Path) -> Result<MotionActor<Real>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut actor = MotionActor::<Real>::init(&mut rng);
    load_checkpoint(path, &mut actor).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(actor)
}

fn write(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn print_rates(label: &str, r: &subgoal_nav::eval::Rates) {
    println!(
        "{label:>14}  n={:<4} success {:.1}% [{:.1}, {:.1}]  collision {:.1}%  timeout {:.1}%",
        r.n,
        100.0 * r.success,
        100.0 * r.success_ci_lo,
        100.0 * r.success_ci_hi,
        100.0 * r.collision,
        100.0 * r.timeout
    );
}

struct TraceWriter {
    lines: Vec<String>,
}

impl EpisodeObserver for TraceWriter {
    fn on_record(&mut self, r: &TraceRecord) {
        self.lines.push(serde_json::to_string(r).expect("trace record"));
    }
}

fn write_traces(
    dir: &Path,
    eval_cfg: &EvalConfig,
    sa: &SubgoalActor<Real>,
    ma: &MotionActor<Real>,
    n: usize,
) -> Result<(), String> {
    let tdir = dir.join("traces");
    fs::create_dir_all(&tdir).map_err(|e| e.to_string())?;
    for i in 0..n as u64 {
        let seed = eval_cfg.master_seed + i;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(mut ep) = sample_episode(&eval_cfg.obstacles, &mut rng) else {
            continue;
        };
        ep.replan_enabled = eval_cfg.replan;
        let mut obs = TraceWriter { lines: Vec::new() };
        let (mut sa, mut ma) = (sa.clone(), ma.clone());
        if run_episode(&ep, &mut sa, &mut ma, &mut obs).is_err() {
            continue;
        }
        write(&tdir.join(format!("seed_{seed}.jsonl")), &(obs.lines.join("\n") + "\n"))?;
    }
    Ok(())
}

fn sweep_csv(points: &[SweepPoint], x_name: &str) -> String {
    let mut s = format!("{x_name},n,success,collision,timeout,success_ci_lo,success_ci_hi\n");
    for p in points {
        let r = &p.rates;
        s.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            p.x, r.n, r.success, r.collision, r.timeout, r.success_ci_lo, r.success_ci_hi
        ));
    }
    s
}

/// Success must not rise more than `slack` (fraction) at any step as the
/// difficulty axis increases.
fn trend_holds(points: &[SweepPoint], slack: f64) -> bool {
    points.windows(2).all(|w| w[1].rates.success <= w[0].rates.success + slack)
}

fn run() -> Result<bool, String> {
    let cli = Cli::parse();
    // Ok(true) = all gates passed (or no gates requested)
    match cli.cmd {
        Cmd::TrainMotion { common } => {
            fs::create_dir_all(&common.out_dir).map_err(|e| e.to_string())?;
            let (mut cfg, hash) = load_train_config(&common.config)?;
            if let Some(n) = common.episodes {
                cfg.motion.max_episodes = n;
            }
            let mut out = std::io::stderr();
            let mut res = train_motion(&cfg.motion, common.seed, Some(&mut out))
                .map_err(|e| e.to_string())?;
            res.report.config_hash = hash.clone();
            let meta = json!({
                "kind": "motion-actor",
                "seed": common.seed,
                "config_hash": hash,
                "episodes_run": res.report.episodes_run,
                "converged": res.report.converged,
            });
            save_checkpoint(&common.out_dir.join("motion.ckpt"), &meta, &res.actor)
                .map_err(|e| e.to_string())?;
            write_metrics_csv(&common.out_dir.join("motion_metrics.csv"), &res.metrics)
                .map_err(|e| e.to_string())?;
            write(
                &common.out_dir.join("motion_report.json"),
                &serde_json::to_string_pretty(&json!({
                    "episodes_run": res.report.episodes_run,
                    "converged": res.report.converged,
                    "recent_success_rate": res.report.recent_success_rate,
                    "master_seed": res.report.master_seed,
                    "config_hash": hash,
                }))
                .unwrap(),
            )?;
            println!(
                "motion training: {} episodes, converged={}, recent success {:.1}%",
                res.report.episodes_run,
                res.report.converged,
                100.0 * res.report.recent_success_rate
            );
            Ok(!common.gate || res.report.converged)
        }
        Cmd::TrainSubgoal { common, motion } => {
            fs::create_dir_all(&common.out_dir).map_err(|e| e.to_string())?;
            let (mut cfg, hash) = load_train_config(&common.config)?;
            if let Some(n) = common.episodes {
                cfg.subgoal.episodes = n;
            }
            let motion_actor = load_motion(&motion)?;
            let mut out = std::io::stderr();
            // checkpoint the running best after every periodic evaluation
            // so long runs can be inspected (or stopped) partway through
            let best_path = common.out_dir.join("subgoal_best.ckpt");
            let hash_cb = hash.clone();
            let seed = common.seed;
            let mut save_best = move |episode: usize, rate: f64, best: &SubgoalActor<Real>| {
                let meta = json!({
                    "kind": "subgoal-actor",
                    "which": "best",
                    "seed": seed,
                    "config_hash": hash_cb,
                    "held_out_success": rate,
                    "as_of_episode": episode,
                });
                if let Err(e) = save_checkpoint(&best_path, &meta, best) {
                    eprintln!("warning: periodic checkpoint failed: {e}");
                }
            };
            let res = train_subgoal(
                &cfg.subgoal,
                &motion_actor,
                common.seed,
                Some(&mut out),
                Some(&mut save_best),
            )
            .map_err(|e| e.to_string())?;
            let meta = |which: &str, success: f64| {
                json!({
                    "kind": "subgoal-actor",
                    "which": which,
                    "seed": common.seed,
                    "config_hash": hash,
                    "held_out_success": success,
                })
            };
            save_checkpoint(
                &common.out_dir.join("subgoal_best.ckpt"),
                &meta("best", res.best_success),
                &res.best_actor,
            )
            .map_err(|e| e.to_string())?;
            save_checkpoint(
                &common.out_dir.join("subgoal_final.ckpt"),
                &meta("final", f64::NAN),
                &res.final_actor,
            )
            .map_err(|e| e.to_string())?;
            write_metrics_csv(&common.out_dir.join("subgoal_metrics.csv"), &res.metrics)
                .map_err(|e| e.to_string())?;
            let mut hist = String::from("episode,success\n");
            for (ep, s) in &res.eval_history {
                hist.push_str(&format!("{ep},{s:.4}\n"));
            }
            write(&common.out_dir.join("subgoal_eval_history.csv"), &hist)?;
            write(
                &common.out_dir.join("subgoal_report.json"),
                &serde_json::to_string_pretty(&json!({
                    "episodes_run": res.report.episodes_run,
                    "best_held_out_success": res.best_success,
                    "master_seed": res.report.master_seed,
                    "config_hash": hash,
                }))
                .unwrap(),
            )?;
            println!(
                "subgoal training: {} episodes, best held-out success {:.1}%",
                res.report.episodes_run,
                100.0 * res.best_success
            );
            Ok(true)
        }
        Cmd::Evaluate {
            common,
            subgoal,
            motion,
            no_replan,
            obstacle_speed,
            trace,
            gate_threshold,
        } => {
            fs::create_dir_all(&common.out_dir).map_err(|e| e.to_string())?;
            let sa = load_subgoal(&subgoal)?;
            let ma = load_motion(&motion)?;
            let (cfg, _) = load_train_config(&common.config)?;
            let mut eval_cfg = EvalConfig {
                episodes: common.episodes.unwrap_or(200),
                master_seed: common.seed,
                obstacles: cfg.subgoal.obstacles.clone(),
                replan: !no_replan,
                parallel: common.parallel,
            };
            eval_cfg.obstacles.fixed_speed = Some(obstacle_speed);
            let out = evaluate(&sa, &ma, &eval_cfg);
            print_rates("overall", &out.overall);
            for (k, r) in &out.per_scene {
                print_rates(k.as_str(), r);
            }
            write(&common.out_dir.join("rates.csv"), &rates_csv(&out.overall, &out.per_scene))?;
            let episodes_json: Vec<_> =
                out.episodes.iter().map(|e| serde_json::to_string(e).unwrap()).collect();
            write(&common.out_dir.join("episodes.jsonl"), &(episodes_json.join("\n") + "\n"))?;
            if trace > 0 {
                write_traces(&common.out_dir, &eval_cfg, &sa, &ma, trace)?;
            }
            Ok(!common.gate || out.overall.success >= gate_threshold)
        }
        Cmd::Sweep { common, subgoal, motion, mode, slack } => {
            fs::create_dir_all(&common.out_dir).map_err(|e| e.to_string())?;
            let sa = load_subgoal(&subgoal)?;
            let ma = load_motion(&motion)?;
            let (cfg, _) = load_train_config(&common.config)?;
            let base = EvalConfig {
                episodes: common.episodes.unwrap_or(200),
                master_seed: common.seed,
                obstacles: cfg.subgoal.obstacles.clone(),
                replan: true,
                parallel: common.parallel,
            };
            let (points, x_name) = match mode {
                SweepMode::Count => {
                    (sweep_obstacle_count(&sa, &ma, &[1, 2, 3], &base)?, "count")
                }
                SweepMode::Speed => {
                    let (points, warnings) =
                        sweep_obstacle_speed(&sa, &ma, &[0.2, 0.3, 0.4, 0.5], &base)?;
                    for w in warnings {
                        eprintln!("warning: {w}");
                    }
                    (points, "speed")
                }
            };
            for p in &points {
                print_rates(&format!("{x_name}={}", p.x), &p.rates);
            }
            write(&common.out_dir.join(format!("sweep_{x_name}.csv")), &sweep_csv(&points, x_name))?;
            let ok = trend_holds(&points, slack / 100.0);
            if !ok {
                eprintln!("trend violation: success rose by more than {slack} pp along the {x_name} axis");
            }
            Ok(!common.gate || ok)
        }
        Cmd::Histogram { common, subgoal, motion, scene, gate_threshold } => {
            fs::create_dir_all(&common.out_dir).map_err(|e| e.to_string())?;
            let sa = load_subgoal(&subgoal)?;
            let ma = load_motion(&motion)?;
            let (cfg, _) = load_train_config(&common.config)?;
            let eval_cfg = EvalConfig {
                episodes: common.episodes.unwrap_or(200),
                master_seed: common.seed,
                obstacles: cfg.subgoal.obstacles.clone(),
                replan: true,
                parallel: common.parallel,
            };
            let out = evaluate(&sa, &ma, &eval_cfg);
            let episodes: Vec<_> = match &scene {
                Some(name) => {
                    let kind = SceneKind::ALL
                        .iter()
                        .copied()
                        .find(|k| k.as_str() == name)
                        .ok_or_else(|| format!("unknown scene kind: {name}"))?;
                    out.episodes.into_iter().filter(|e| e.scene == kind).collect()
                }
                None => out.episodes,
            };
            let h = subgoal_histogram(&episodes)?;
            write(&common.out_dir.join("histogram.csv"), &h.to_csv())?;
            write(&common.out_dir.join("histogram.svg"), &h.to_svg())?;
            println!(
                "{} subgoals over {} episodes; {:.1}% within +/- pi/4 of heading",
                h.total,
                episodes.len(),
                100.0 * h.forward_fraction
            );
            Ok(!common.gate || h.forward_fraction > gate_threshold)
        }
        Cmd::ReplayTrace { input, out_dir } => {
            fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
            let f = fs::File::open(&input).map_err(|e| format!("{}: {e}", input.display()))?;
            let records: Vec<TraceRecord> = BufReader::new(f)
                .lines()
                .map(|l| {
                    let l = l.map_err(|e| e.to_string())?;
                    serde_json::from_str(&l).map_err(|e| e.to_string())
                })
                .collect::<Result<_, String>>()?;
            if records.is_empty() {
                return Err("empty trace".into());
            }
            let path_len: f64 = records
                .windows(2)
                .map(|w| ((w[1].x - w[0].x).powi(2) + (w[1].y - w[0].y).powi(2)).sqrt())
                .sum();
            let terminal = records
                .last()
                .and_then(|r| r.terminal.clone())
                .unwrap_or_else(|| "none".into());
            write(&out_dir.join("trace.svg"), &trace_svg(&records))?;
            let summary = format!(
                "records: {}\nduration: {:.2} s\npath length: {:.2} m\nterminal: {}\n",
                records.len(),
                records.last().unwrap().t,
                path_len,
                terminal
            );
            let mut so = std::io::stdout();
            so.write_all(summary.as_bytes()).ok();
            write(&out_dir.join("trace_summary.txt"), &summary)?;
            Ok(true)
        }
    }
}

/// Robot path as a polyline, obstacle positions as faded dots.
fn trace_svg(records: &[TraceRecord]) -> String {
    let xs = records.iter().flat_map(|r| {
        std::iter::once([r.x, r.y]).chain(r.obstacles.iter().copied())
    });
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in xs {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let pad = 0.5;
    let (w, h) = (hi[0] - lo[0] + 2.0 * pad, hi[1] - lo[1] + 2.0 * pad);
    let scale = 600.0 / w.max(h);
    // svg y axis points down; flip so the world reads naturally
    let px = |p: [f64; 2]| ((p[0] - lo[0] + pad) * scale, (hi[1] + pad - p[1]) * scale);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\">\n",
        w * scale,
        h * scale
    );
    for r in records {
        for o in &r.obstacles {
            let (x, y) = px(*o);
            s.push_str(&format!(
                "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"2\" fill=\"#cc5533\" fill-opacity=\"0.08\"/>\n"
            ));
        }
    }
    let pts: Vec<String> = records
        .iter()
        .map(|r| {
            let (x, y) = px([r.x, r.y]);
            format!("{x:.1},{y:.1}")
        })
        .collect();
    s.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#2266cc\" stroke-width=\"2\"/>\n",
        pts.join(" ")
    ));
    let (x0, y0) = px([records[0].x, records[0].y]);
    let (x1, y1) = px([records.last().unwrap().x, records.last().unwrap().y]);
    s.push_str(&format!("<circle cx=\"{x0:.1}\" cy=\"{y0:.1}\" r=\"5\" fill=\"#22aa44\"/>\n"));
    s.push_str(&format!("<circle cx=\"{x1:.1}\" cy=\"{y1:.1}\" r=\"5\" fill=\"#aa2244\"/>\n"));
    s.push_str("</svg>\n");
    s
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("gated check failed");
            ExitCode::FAILURE
        }
        Err(e) => fail(&e),
    }
}
