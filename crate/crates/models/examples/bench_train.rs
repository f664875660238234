use std::time::Instant;
use tprlab_models::{build_model, ModelConfig, ModelKind};
use tprlab_tensor::rng;
use tprlab_tensor::{Optimizer, OptimizerConfig};

fn bench(kind: ModelKind, steps: usize, batch: usize) {
    let cfg = ModelConfig::defaults(kind, 13, 16);
    let mut model = build_model::<f32>(&cfg).unwrap();
    let mut opt = Optimizer::new(OptimizerConfig::default());
    let mut rng = rng::master(1);
    // copy batch: 5-digit sequences
    let inputs: Vec<Vec<usize>> = (0..batch).map(|i| (0..5).map(|j| (i * 7 + j * 3) % 10).collect()).collect();
    let targets = inputs.clone();
    // warmup
    model.params_mut().zero_grads();
    model.train_loss(&inputs, &targets, &mut rng).unwrap();
    opt.step(model.params_mut()).unwrap();
    let t = Instant::now();
    for _ in 0..steps {
        model.params_mut().zero_grads();
        model.train_loss(&inputs, &targets, &mut rng).unwrap();
        opt.step(model.params_mut()).unwrap();
    }
    let dt = t.elapsed().as_secs_f64();
    println!("{kind:?} f32 B={batch}: {:.1} ms/step ({steps} steps in {dt:.2}s)", dt / steps as f64 * 1e3);
    // decode throughput
    let eval_inputs: Vec<Vec<usize>> = (0..512).map(|i| (0..5).map(|j| (i * 11 + j) % 10).collect()).collect();
    let t = Instant::now();
    let _ = model.greedy_decode(&eval_inputs, 6).unwrap();
    println!("  decode 512 seqs: {:.2}s", t.elapsed().as_secs_f64());
}

fn main() {
    for kind in [ModelKind::Transformer, ModelKind::Necst, ModelKind::Lstm] {
        bench(kind, 30, 128);
    }
}
