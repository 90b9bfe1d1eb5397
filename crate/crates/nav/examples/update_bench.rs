use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subgoal_nav::net::{ActorNet, CriticNet, Scalar, SubgoalActor, SubgoalBatch, SubgoalCritic, SubgoalState};

fn bench<F: Scalar>(label: &str) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let actor = SubgoalActor::<F>::init(&mut rng);
    let critic = SubgoalCritic::<F>::init(&mut rng);
    let mut states = Vec::new();
    for _ in 0..128 {
        let mut s = SubgoalState { sectors: [[0.0; 16]; 10], waypoints: [0.0; 10] };
        for sec in s.sectors.iter_mut() { for v in sec.iter_mut() { *v = rng.gen_range(-4.0..4.0); } }
        for v in s.waypoints.iter_mut() { *v = rng.gen_range(-1.0..1.0); }
        states.push(s);
    }
    let batch: SubgoalBatch<F> = SubgoalActor::batch(&states);
    let actions = Array2::from_shape_fn((128, 2), |_| F::c(rng.gen_range(0.0..0.5)));
    let t0 = std::time::Instant::now();
    let iters = 10;
    for _ in 0..iters {
        // one DDPG update worth of passes: critic fwd+bwd (target + online), actor fwd+bwd, critic fwd+bwd for policy grad
        let (_q, c1) = critic.forward(&batch, &actions);
        let _ = critic.backward(&batch, &c1, &Array1::ones(128));
        let (a, ac) = actor.forward(&batch);
        let (_q2, c2) = critic.forward(&batch, &a);
        let (_, da) = critic.backward(&batch, &c2, &Array1::ones(128));
        let _ = actor.backward(&batch, &ac, &da);
        let (_qt, _) = critic.forward(&batch, &actions);
    }
    println!("{label}: {:.1} ms/update", t0.elapsed().as_secs_f64() * 1000.0 / iters as f64);
}

fn main() {
    bench::<f64>("f64");
    bench::<f32>("f32");
}
