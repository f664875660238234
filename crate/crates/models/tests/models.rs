//! Model-level oracles: exact parameter counts, bitwise degeneracy of the
//! role-binding variant, finite-difference gradients through full forward
//! passes, a hand-rolled LSTM cell reference, structural invariances, and
//! checkpoint round trips.

use tprlab_models::check::fd_loss_check;
use tprlab_models::transformer::TransformerModel;
use tprlab_models::{
    build_model, load_model, save_model, ModelConfig, ModelKind, PosEncoding, SeqModel,
};
use tprlab_tensor::rng;
use tprlab_tensor::{Optimizer, OptimizerConfig};

fn tiny_config(kind: ModelKind) -> ModelConfig {
    let mut c = ModelConfig::defaults(kind, 7, 8);
    c.d_model = 8;
    c.n_heads = 2;
    c.n_layers = 1;
    c.d_ff = 16;
    c.seed = 11;
    if kind == ModelKind::Lstm {
        c.lstm_hidden = Some(10);
    }
    c
}

fn tiny_batch() -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    // Vocab 7 leaves symbol ids 0..=3; markers are 4, 5, 6.
    let inputs = vec![vec![0, 1, 2], vec![3, 2, 1]];
    let targets = vec![vec![2, 1, 0], vec![1, 2, 3]];
    (inputs, targets)
}

// ----------------------------------------------------------------------
// Parameter budgets
// ----------------------------------------------------------------------

#[test]
fn parameter_counts_are_exact_and_within_budget() {
    let mk = |k| build_model::<f64>(&ModelConfig::defaults(k, 13, 16)).unwrap();
    let lstm = mk(ModelKind::Lstm);
    let plain = mk(ModelKind::Transformer);
    let roles = mk(ModelKind::Necst);

    assert_eq!(plain.params().total_elements(), 236_237);
    // Six attention blocks each add a (64×64) role projection and its bias.
    assert_eq!(roles.params().total_elements(), 261_197);
    assert_eq!(lstm.params().total_elements(), 274_797);

    let counts = [
        lstm.params().total_elements() as f64,
        plain.params().total_elements() as f64,
        roles.params().total_elements() as f64,
    ];
    let max = counts.iter().cloned().fold(f64::MIN, f64::max);
    let min = counts.iter().cloned().fold(f64::MAX, f64::min);
    assert!(
        max / min < 1.25,
        "parameter spread {max}/{min} exceeds 25 percent"
    );
}

// ----------------------------------------------------------------------
// Role-binding degeneracy
// ----------------------------------------------------------------------

#[test]
fn all_ones_roles_reproduce_the_plain_transformer_bit_for_bit() {
    let mut plain_cfg = ModelConfig::defaults(ModelKind::Transformer, 13, 16);
    plain_cfg.seed = 7;
    let mut roles_cfg = ModelConfig::defaults(ModelKind::Necst, 13, 16);
    roles_cfg.seed = 7;

    let plain = TransformerModel::<f64>::new(plain_cfg).unwrap();
    let mut bound = TransformerModel::<f64>::new(roles_cfg).unwrap();
    bound.force_identity_roles();

    let inputs = vec![vec![1, 2, 3, 4, 5], vec![9, 8, 7, 6, 5]];
    let targets = inputs.clone();

    let lp = plain.teacher_logits(&inputs, &targets).unwrap();
    let lb = bound.teacher_logits(&inputs, &targets).unwrap();
    assert_eq!(lp.shape(), &[2, 6, 13]);
    assert_eq!(lp.data(), lb.data(), "teacher-forced logits differ");

    let tp = plain.encode_trace(&inputs).unwrap();
    let tb = bound.encode_trace(&inputs).unwrap();
    for (a, b) in tp.layer_outputs.iter().zip(&tb.layer_outputs) {
        assert_eq!(a.data(), b.data(), "encoder layer outputs differ");
    }
    assert_eq!(tp.memory.data(), tb.memory.data());

    assert_eq!(tp.roles.len(), 0);
    assert_eq!(tb.roles.len(), 2, "one role tensor per encoder layer");
    for r in &tb.roles {
        assert_eq!(r.shape(), &[2 * 4, 5, 16]);
        assert!(r.data().iter().all(|&x| x == 1.0));
    }

    assert_eq!(
        plain.greedy_decode(&inputs, 7).unwrap(),
        bound.greedy_decode(&inputs, 7).unwrap()
    );
}

#[test]
fn shared_parameters_are_seeded_identically_across_variants() {
    let mut plain_cfg = ModelConfig::defaults(ModelKind::Transformer, 13, 16);
    plain_cfg.seed = 3;
    let mut roles_cfg = ModelConfig::defaults(ModelKind::Necst, 13, 16);
    roles_cfg.seed = 3;
    let plain = build_model::<f64>(&plain_cfg).unwrap();
    let bound = build_model::<f64>(&roles_cfg).unwrap();

    for p in plain.params().iter() {
        let q = bound.params().by_name(&p.name).unwrap();
        assert_eq!(p.value.data(), q.value.data(), "{} differs", p.name);
    }
}

// ----------------------------------------------------------------------
// Finite-difference gradients through full forwards
// ----------------------------------------------------------------------

fn fd_check_kind(cfg: ModelConfig) -> f64 {
    let mut model = build_model::<f64>(&cfg).unwrap();
    let (inputs, targets) = tiny_batch();
    let report = fd_loss_check(model.as_mut(), &inputs, &targets, 3, 1e-5, 5).unwrap();
    assert!(
        report.max_rel_err < 1e-4,
        "gradient mismatch: {report:?} (config {cfg:?})"
    );
    report.max_rel_err
}

#[test]
fn transformer_gradients_match_finite_differences() {
    fd_check_kind(tiny_config(ModelKind::Transformer));
}

#[test]
fn role_binding_gradients_match_finite_differences() {
    fd_check_kind(tiny_config(ModelKind::Necst));
}

#[test]
fn lstm_gradients_match_finite_differences() {
    fd_check_kind(tiny_config(ModelKind::Lstm));
}

#[test]
fn lstm_attention_gradients_match_finite_differences() {
    let mut cfg = tiny_config(ModelKind::Lstm);
    cfg.lstm_attention = true;
    fd_check_kind(cfg);
}

#[test]
fn learned_position_gradients_match_finite_differences() {
    let mut cfg = tiny_config(ModelKind::Transformer);
    cfg.pos_encoding = PosEncoding::Learned;
    fd_check_kind(cfg);
}

// ----------------------------------------------------------------------
// LSTM cell oracle
// ----------------------------------------------------------------------

#[test]
fn lstm_single_step_matches_a_hand_rolled_cell() {
    let mut cfg = ModelConfig::defaults(ModelKind::Lstm, 7, 8);
    cfg.d_model = 4;
    cfg.lstm_hidden = Some(6);
    cfg.n_layers = 1;
    cfg.seed = 2;
    let model = build_model::<f64>(&cfg).unwrap();

    // One token, one step from the zero state: pooled = [h1 | c1].
    let pooled = model.encode_pooled(&[vec![2]]).unwrap();
    assert_eq!(pooled.shape(), &[1, 12]);

    let ps = model.params();
    let x = &ps.by_name("src_embed").unwrap().value.data()[2 * 4..3 * 4];
    let wx = ps.by_name("enc.0.wx").unwrap().value.data();
    let b = ps.by_name("enc.0.b").unwrap().value.data();

    let sigmoid = |z: f64| 1.0 / (1.0 + (-z).exp());
    let mut gates = vec![0.0f64; 24];
    for (j, gate) in gates.iter_mut().enumerate() {
        *gate = b[j] + (0..4).map(|i| x[i] * wx[i * 24 + j]).sum::<f64>();
    }
    for k in 0..6 {
        let i = sigmoid(gates[k]);
        let f = sigmoid(gates[6 + k]);
        let g = gates[12 + k].tanh();
        let o = sigmoid(gates[18 + k]);
        // c0 = 0, so the forget term f·c0 vanishes.
        let c1 = i * g;
        let h1 = o * c1.tanh();
        assert!((pooled.data()[k] - h1).abs() < 1e-12, "h[{k}]");
        assert!((pooled.data()[6 + k] - c1).abs() < 1e-12, "c[{k}]");
        assert!(f > 0.5, "forget bias of one should open the gate");
    }
}

// ----------------------------------------------------------------------
// Structural invariances
// ----------------------------------------------------------------------

#[test]
fn encoder_without_positions_is_permutation_equivariant() {
    let mut cfg = tiny_config(ModelKind::Transformer);
    cfg.pos_encoding = PosEncoding::None;
    let model = TransformerModel::<f64>::new(cfg).unwrap();

    let a = vec![1usize, 2, 3, 0];
    let perm = [2usize, 0, 3, 1]; // b[j] = a[perm[j]]
    let b: Vec<usize> = perm.iter().map(|&j| a[j]).collect();

    let ma = model.encode_trace(&[a]).unwrap().memory;
    let mb = model.encode_trace(&[b]).unwrap().memory;
    let d = 8;
    for (j, &pj) in perm.iter().enumerate() {
        for col in 0..d {
            let va = ma.data()[pj * d + col];
            let vb = mb.data()[j * d + col];
            assert!(
                (va - vb).abs() < 1e-9,
                "memory rows fail to track the permutation at ({j},{col})"
            );
        }
    }
}

#[test]
fn greedy_decoding_is_deterministic() {
    let (inputs, _) = tiny_batch();
    for kind in [ModelKind::Lstm, ModelKind::Transformer, ModelKind::Necst] {
        let model = build_model::<f64>(&tiny_config(kind)).unwrap();
        let a = model.greedy_decode(&inputs, 6).unwrap();
        let b = model.greedy_decode(&inputs, 6).unwrap();
        assert_eq!(a, b, "{kind:?}");
        assert!(a.iter().all(|row| row.len() <= 6));
    }
}

#[test]
fn pooled_decoding_round_trips_through_plain_tensors() {
    let (inputs, _) = tiny_batch();
    for kind in [ModelKind::Lstm, ModelKind::Transformer, ModelKind::Necst] {
        let model = build_model::<f64>(&tiny_config(kind)).unwrap();
        let pooled = model.encode_pooled(&inputs).unwrap();
        assert_eq!(pooled.shape(), &[2, model.pooled_width()]);
        let out = model.decode_from_pooled(&pooled, 6).unwrap();
        assert_eq!(out.len(), 2);
    }
}

#[test]
fn pooled_decoding_is_refused_when_lstm_attention_is_on() {
    let mut cfg = tiny_config(ModelKind::Lstm);
    cfg.lstm_attention = true;
    let model = build_model::<f64>(&cfg).unwrap();
    let pooled = tprlab_tensor::Tensor::<f64>::zeros(&[1, model.pooled_width()]);
    assert!(model.decode_from_pooled(&pooled, 4).is_err());
}

// ----------------------------------------------------------------------
// Validation and persistence
// ----------------------------------------------------------------------

#[test]
fn ragged_and_out_of_range_batches_are_rejected() {
    let model = build_model::<f64>(&tiny_config(ModelKind::Transformer)).unwrap();
    assert!(model.greedy_decode(&[vec![0, 1], vec![0]], 4).is_err());
    assert!(model.greedy_decode(&[vec![0, 99]], 4).is_err());
    assert!(model.greedy_decode(&[], 4).is_err());
}

#[test]
fn checkpoint_round_trip_preserves_the_function() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    let (inputs, targets) = tiny_batch();

    for kind in [ModelKind::Lstm, ModelKind::Transformer, ModelKind::Necst] {
        let mut model = build_model::<f64>(&tiny_config(kind)).unwrap();
        // Move parameters off their initial values before saving.
        let mut opt = Optimizer::new(OptimizerConfig::default());
        let mut rng = rng::master(9);
        for _ in 0..3 {
            model.params_mut().zero_grads();
            model.train_loss(&inputs, &targets, &mut rng).unwrap();
            opt.step(model.params_mut()).unwrap();
        }

        save_model(&path, model.as_ref()).unwrap();
        let restored = load_model::<f64>(&path).unwrap();
        assert_eq!(restored.config(), model.config());
        for p in model.params().iter() {
            let q = restored.params().by_name(&p.name).unwrap();
            assert_eq!(p.value.data(), q.value.data(), "{kind:?} {}", p.name);
        }
        assert_eq!(
            model.greedy_decode(&inputs, 6).unwrap(),
            restored.greedy_decode(&inputs, 6).unwrap()
        );
    }
}

#[test]
fn training_reduces_the_loss_on_a_tiny_copy_problem() {
    for kind in [ModelKind::Lstm, ModelKind::Transformer, ModelKind::Necst] {
        let mut model = build_model::<f64>(&tiny_config(kind)).unwrap();
        let inputs: Vec<Vec<usize>> = vec![vec![0, 1, 2], vec![3, 2, 1], vec![1, 1, 3]];
        let targets = inputs.clone();
        let mut opt = Optimizer::new(OptimizerConfig {
            lr: 3e-3,
            ..OptimizerConfig::default()
        });
        let mut rng = rng::master(4);
        let mut first = 0.0;
        let mut last = 0.0;
        for step in 0..250 {
            model.params_mut().zero_grads();
            let loss = model.train_loss(&inputs, &targets, &mut rng).unwrap();
            opt.step(model.params_mut()).unwrap();
            if step == 0 {
                first = loss;
            }
            last = loss;
        }
        assert!(
            last < first * 0.2,
            "{kind:?}: loss {first} -> {last} barely moved"
        );
    }
}
