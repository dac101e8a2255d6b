use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sao_core::ddm::ParameterOptionSpec;
use sao_core::paramopt::{propose_with, Evaluation, GaussianProcess, N_INIT};
use sao_core::{DataType, ParameterSetting, Value};

const ROUNDS: usize = 20;

fn objective(x: f64) -> f64 {
    -(x - 0.7) * (x - 0.7)
}

fn spec() -> Vec<ParameterOptionSpec> {
    vec![ParameterOptionSpec {
        name: "x".into(),
        data_type: DataType::Double,
        min: Value::Double(0.0),
        max: Value::Double(1.0),
        strategies: None,
    }]
}

fn x_of(p: &ParameterSetting) -> f64 {
    p.get("x").unwrap().as_f64()
}

/// Returns (best score, x at best score).
fn run_bo(seed: u64) -> (f64, f64) {
    let specs = spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let current = ParameterSetting::new().with("x", rng.random::<f64>());
    let mut history: Vec<Evaluation> = Vec::new();
    for _ in 0..ROUNDS {
        let model = if history.len() >= N_INIT {
            let x: Vec<Vec<f64>> = history.iter().map(|e| vec![x_of(&e.parameters)]).collect();
            let y: Vec<f64> = history.iter().map(|e| e.score).collect();
            Some(GaussianProcess::fit(&x, &y).unwrap())
        } else {
            None
        };
        let p = propose_with(&history, &specs, &current, model.as_ref(), seed).unwrap();
        let score = objective(x_of(&p));
        history.push(Evaluation { parameters: p, score });
    }
    let best = history.iter().max_by(|a, b| a.score.total_cmp(&b.score)).unwrap();
    (best.score, x_of(&best.parameters))
}

fn run_random(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..ROUNDS)
        .map(|_| objective(rng.random::<f64>()))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Grid search at step 0.01 is the reference optimum.
fn grid_optimum() -> f64 {
    (0..=100)
        .map(|i| i as f64 / 100.0)
        .max_by(|a, b| objective(*a).total_cmp(&objective(*b)))
        .unwrap()
}

#[test]
fn concave_benchmark_beats_random_search() {
    let opt = grid_optimum();
    assert!((opt - 0.7).abs() < 1e-12);
    let seeds: Vec<u64> = (1..=10).collect();
    let bo: Vec<(f64, f64)> = seeds.iter().map(|&s| run_bo(s)).collect();
    let rnd: Vec<f64> = seeds.iter().map(|&s| run_random(s)).collect();
    let bo_mean = bo.iter().map(|r| r.0).sum::<f64>() / 10.0;
    let rnd_mean = rnd.iter().sum::<f64>() / 10.0;
    let close = bo.iter().filter(|r| (r.1 - opt).abs() <= 0.1).count();
    println!("bo mean {bo_mean:e}, random mean {rnd_mean:e}, within 0.1: {close}/10");
    assert!(bo_mean > rnd_mean);
    assert!(close >= 8);
}

#[test]
fn proposals_are_deterministic() {
    assert_eq!(run_bo(42), run_bo(42));
}
