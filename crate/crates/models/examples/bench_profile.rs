use std::time::Instant;
use tprlab_models::transformer::TransformerModel;
use tprlab_models::{ModelConfig, ModelKind, SeqModel};
use tprlab_tensor::rng;

fn main() {
    let cfg = ModelConfig::defaults(ModelKind::Transformer, 13, 16);
    let mut model = TransformerModel::<f32>::new(cfg).unwrap();
    let mut rng = rng::master(1);
    for batch in [32usize, 128, 512] {
        let inputs: Vec<Vec<usize>> = (0..batch).map(|i| (0..5).map(|j| (i * 7 + j * 3) % 10).collect()).collect();
        let targets = inputs.clone();
        // forward only (teacher logits)
        let t = Instant::now();
        let reps = 10;
        for _ in 0..reps { let _ = model.teacher_logits(&inputs, &targets).unwrap(); }
        let fwd = t.elapsed().as_secs_f64() / reps as f64;
        // forward + backward
        let t = Instant::now();
        for _ in 0..reps {
            model.params_mut().zero_grads();
            let _ = model.train_loss(&inputs, &targets, &mut rng).unwrap();
        }
        let full = t.elapsed().as_secs_f64() / reps as f64;
        println!("B={batch}: forward {:.1} ms, forward+backward {:.1} ms", fwd * 1e3, full * 1e3);
    }
}
