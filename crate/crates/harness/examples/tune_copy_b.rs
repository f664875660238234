//! Scratch experiment: long fixed training schedules (no early stopping) to
//! see how withheld-coincidence generalization evolves after the train set
//! is memorised. Prints `probe` rows at checkpoints and a `final` row with
//! the full census per run.

use std::io::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use tprlab_harness::census::nin_census;
use tprlab_harness::digit_ids;
use tprlab_harness::eval::exact_match_em;
use tprlab_models::{build_model, ModelConfig, ModelKind, SeqModel};
use tprlab_tasks::copy::{gen_copy_splits, nin_sequences};
use tprlab_tensor::rng::stream;
use tprlab_tensor::Optimizer;

const STEPS: usize = 4_000;
const CHECKPOINTS: [usize; 5] = [500, 1_000, 2_000, 3_000, 4_000];

fn main() {
    // One fixed subsample of the withheld set, shared by every run.
    let mut probe: Vec<Vec<usize>> = nin_sequences(10)
        .unwrap()
        .iter()
        .map(|s| digit_ids(s))
        .collect();
    probe.shuffle(&mut stream(0, "nin-probe"));
    probe.truncate(4_096);

    println!("row\tkind\tsize\tseed\tstep\tavg_loss\ttrain_em\tnin_probe_em");
    println!("rowf\tkind\tsize\tseed\twall_s\tid_em_4096\tnin_em\tperfect\ts1\ts2\ts3\ts4\ts5");
    std::io::stdout().flush().unwrap();

    for &size in &[1_000usize, 2_000, 4_000] {
        for &seed in &[0u64, 1] {
            for &kind in &[ModelKind::Lstm, ModelKind::Transformer, ModelKind::Necst] {
                run(kind, size, seed, &probe);
            }
        }
    }
}

fn run(kind: ModelKind, size: usize, seed: u64, probe: &[Vec<usize>]) {
    let split = gen_copy_splits(10, size, seed).unwrap();
    let inputs: Vec<Vec<usize>> = split.train.iter().map(|s| digit_ids(s)).collect();
    let train_probe: Vec<Vec<usize>> = inputs.iter().take(2_048).cloned().collect();

    let mut mc = ModelConfig::defaults(kind, 13, 8);
    mc.seed = seed;
    let mut model = build_model::<f32>(&mc).unwrap();

    let mut batch_rng = stream(seed, "train-batches");
    let mut dropout_rng = stream(seed, "train-dropout");
    let mut opt = Optimizer::new(Default::default());
    let started = Instant::now();

    let mut step = 0usize;
    let mut loss_accum = 0.0f64;
    let mut loss_count = 0usize;
    'train: loop {
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut batch_rng);
        for chunk in order.chunks(128) {
            step += 1;
            let bi: Vec<Vec<usize>> = chunk.iter().map(|&i| inputs[i].clone()).collect();
            model.params_mut().zero_grads();
            let loss = model.train_loss(&bi, &bi, &mut dropout_rng).unwrap();
            assert!(loss.is_finite(), "loss blew up at step {step}");
            let norm = model.params().grad_norm();
            if norm > 1.0 {
                model.params_mut().scale_grads((1.0 / norm) as f32);
            }
            opt.step(model.params_mut()).unwrap();
            loss_accum += loss;
            loss_count += 1;

            if CHECKPOINTS.contains(&step) {
                let tem = exact_match_em(model.as_ref(), &train_probe, &train_probe, 512)
                    .unwrap()
                    .em();
                let nem = exact_match_em(model.as_ref(), probe, probe, 512).unwrap().em();
                println!(
                    "row\t{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}",
                    kind.as_str(),
                    size,
                    seed,
                    step,
                    loss_accum / loss_count.max(1) as f64,
                    tem,
                    nem
                );
                std::io::stdout().flush().unwrap();
                loss_accum = 0.0;
                loss_count = 0;
            }
            if step >= STEPS {
                break 'train;
            }
        }
    }

    let id_inputs: Vec<Vec<usize>> = split
        .id_test
        .iter()
        .take(4_096)
        .map(|s| digit_ids(s))
        .collect();
    let id_em = exact_match_em(model.as_ref(), &id_inputs, &id_inputs, 512)
        .unwrap()
        .em();
    let census = nin_census(model.as_ref() as &dyn SeqModel<f32>, 10, 512, false).unwrap();
    let s = census.stratum_em();
    println!(
        "rowf\t{}\t{}\t{}\t{:.1}\t{:.4}\t{:.4}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
        kind.as_str(),
        size,
        seed,
        started.elapsed().as_secs_f64(),
        id_em,
        census.em(),
        census.perfect(),
        s[0],
        s[1],
        s[2],
        s[3],
        s[4],
    );
    std::io::stdout().flush().unwrap();
}
