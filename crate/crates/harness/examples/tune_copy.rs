//! Scratch experiment: how the three model families behave on the copy task
//! across training-set sizes. Prints one TSV row per run so partial results
//! are usable while it runs.

use std::io::Write as _;

use tprlab_harness::census::nin_census;
use tprlab_harness::digit_ids;
use tprlab_harness::eval::exact_match_em;
use tprlab_harness::train::{train_run, TrainConfig};
use tprlab_models::{build_model, ModelConfig, ModelKind, SeqModel};
use tprlab_tasks::copy::gen_copy_splits;

fn main() {
    let sizes = [1_000usize, 2_000, 4_000];
    let seeds = [0u64, 1];
    let kinds = [ModelKind::Lstm, ModelKind::Transformer, ModelKind::Necst];

    println!(
        "kind\tsize\tseed\tsteps\tearly\twall_s\tlast_train_em\tid_em_4096\tnin_em\tperfect\ts1\ts2\ts3\ts4\ts5"
    );
    std::io::stdout().flush().unwrap();

    for &size in &sizes {
        for &seed in &seeds {
            for &kind in &kinds {
                run(kind, size, seed);
            }
        }
    }
}

fn run(kind: ModelKind, size: usize, seed: u64) {
    let split = gen_copy_splits(10, size, seed).unwrap();
    let inputs: Vec<Vec<usize>> = split.train.iter().map(|s| digit_ids(s)).collect();

    let mut mc = ModelConfig::defaults(kind, 13, 8);
    mc.seed = seed;
    let mut model = build_model::<f32>(&mc).unwrap();

    let tc = TrainConfig {
        steps: 4_000,
        batch_size: 128,
        eval_every: 250,
        patience: 2,
        seed,
        ..TrainConfig::default()
    };
    let record = train_run(model.as_mut(), &inputs, &inputs, &tc).unwrap();
    if let Some(f) = &record.failure {
        println!(
            "{}\t{}\t{}\tFAILED at {}: {}",
            kind.as_str(),
            size,
            seed,
            f.step,
            f.message
        );
        std::io::stdout().flush().unwrap();
        return;
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
        "{}\t{}\t{}\t{}\t{}\t{:.1}\t{:.4}\t{:.4}\t{:.4}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
        kind.as_str(),
        size,
        seed,
        record.steps_run,
        record.stopped_early,
        record.wall_seconds,
        record.history.last().map(|p| p.train_em).unwrap_or(0.0),
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
