//! Closed-form edits on live encodings: subtracting and adding binding
//! vectors steers what the decoder emits, without touching a single weight.
//! An edit script names fillers and roles from a fitted approximation; the
//! arithmetic happens in the model's own encoder space.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use tprlab_models::SeqModel;
use tprlab_tasks::robo::robo_interpret;
use tprlab_tensor::rng::stream;
use tprlab_tensor::{Scalar, Tensor};

use crate::tpdn::{binding_vector, collect_encodings, decode_pooled_rows, TpdnFit};
use crate::{AnalysisError, Result};

// ---------------------------------------------------------------------------
// Edit scripts
// ---------------------------------------------------------------------------

/// One step of an edit script. Text form: `-token@role` / `+token@role`,
/// role ids 0-based in the fit's scheme.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditStep {
    Remove { token: String, role: usize },
    Insert { token: String, role: usize },
}

impl fmt::Display for EditStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EditStep::Remove { token, role } => write!(f, "-{token}@{role}"),
            EditStep::Insert { token, role } => write!(f, "+{token}@{role}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript(pub Vec<EditStep>);

impl EditScript {
    /// The script that undoes this one (inserts become removals; the order
    /// is reversed, though edits commute anyway).
    pub fn inverse(&self) -> Self {
        Self(
            self.0
                .iter()
                .rev()
                .map(|s| match s {
                    EditStep::Remove { token, role } => EditStep::Insert {
                        token: token.clone(),
                        role: *role,
                    },
                    EditStep::Insert { token, role } => EditStep::Remove {
                        token: token.clone(),
                        role: *role,
                    },
                })
                .collect(),
        )
    }

    /// Rejects a script before any arithmetic happens: every token must be a
    /// filler of `fit` and every role id in its scheme's range.
    pub fn validate<F: Scalar>(&self, fit: &TpdnFit<F>) -> Result<()> {
        for step in &self.0 {
            let (EditStep::Remove { token, role } | EditStep::Insert { token, role }) = step;
            fit.token_id(token)?;
            if *role >= fit.n_roles() {
                return Err(AnalysisError::UnknownRole {
                    role: *role,
                    n_roles: fit.n_roles(),
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for EditScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

impl FromStr for EditScript {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self> {
        let mut steps = Vec::new();
        for word in s.split_whitespace() {
            let (sign, rest) = word.split_at_checked(1).ok_or_else(|| {
                AnalysisError::Parse(format!("'{word}' must start with '+' or '-'"))
            })?;
            let (token, role) = rest
                .rsplit_once('@')
                .ok_or_else(|| AnalysisError::Parse(format!("'{word}' has no '@role'")))?;
            if token.is_empty() {
                return Err(AnalysisError::Parse(format!("'{word}' names no token")));
            }
            let role: usize = role
                .parse()
                .map_err(|_| AnalysisError::Parse(format!("'{word}' has a non-numeric role")))?;
            let token = token.to_string();
            steps.push(match sign {
                "-" => EditStep::Remove { token, role },
                "+" => EditStep::Insert { token, role },
                _ => {
                    return Err(AnalysisError::Parse(format!(
                        "'{word}' must start with '+' or '-'"
                    )))
                }
            });
        }
        Ok(EditScript(steps))
    }
}

/// `encoding − Σ removes + Σ inserts`. Pure vector arithmetic: steps
/// commute, and inverse pairs cancel. The whole script is validated before
/// the first operation.
pub fn apply_edit<F: Scalar>(
    encoding: &[F],
    script: &EditScript,
    fit: &TpdnFit<F>,
) -> Result<Vec<F>> {
    script.validate(fit)?;
    if encoding.len() != fit.width() {
        return Err(AnalysisError::Invalid(format!(
            "encoding has {} entries, the fit projects into {}",
            encoding.len(),
            fit.width()
        )));
    }
    let mut out = encoding.to_vec();
    for step in &script.0 {
        match step {
            EditStep::Remove { token, role } => {
                for (o, b) in out.iter_mut().zip(binding_vector(fit, token, *role)?) {
                    *o = *o - b;
                }
            }
            EditStep::Insert { token, role } => {
                for (o, b) in out.iter_mut().zip(binding_vector(fit, token, *role)?) {
                    *o = *o + b;
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The substitution-chain experiment
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Number of cumulative word substitutions applied.
    pub k: usize,
    pub trials: usize,
    pub matches: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EditCurve {
    /// k = 0: the unedited encodings against the oracle — the model's plain
    /// accuracy on the sampled bases.
    pub control: CurvePoint,
    /// One row per substitution count, k = 1..=chain.
    pub points: Vec<CurvePoint>,
    /// How many candidate substitutions were rejected and redrawn.
    pub resamples: usize,
    /// The first rejected candidates, for the record.
    pub resample_log: Vec<String>,
    /// Each trial's sampled base command.
    pub bases: Vec<Vec<String>>,
}

const RESAMPLE_LOG_CAP: usize = 200;
const MAX_DRAWS: usize = 10_000;

/// Per trial: sample a base command, make `chain` cumulative random word
/// substitutions (ungrammatical candidates are resampled and logged,
/// identity substitutions excluded), edit the *original live encoding*
/// step by step, and decode each edited vector. A virtual command counts as
/// correct when the decode exactly matches its symbolic interpretation.
#[allow(clippy::too_many_arguments)]
pub fn edit_experiment<F: Scalar>(
    decoder: &dyn SeqModel<F>,
    fit: &TpdnFit<F>,
    pool: &[Vec<String>],
    substitutable: &[String],
    chain: usize,
    trials: usize,
    seed: u64,
    max_out: usize,
    batch: usize,
) -> Result<EditCurve> {
    if pool.is_empty() || substitutable.len() < 2 {
        return Err(AnalysisError::Invalid(
            "need a non-empty pool and at least two substitutable words".into(),
        ));
    }
    if chain == 0 || trials == 0 {
        return Err(AnalysisError::Invalid(
            "chain length and trial count must be positive".into(),
        ));
    }

    let mut rng = stream(seed, "edit-trials");
    let mut resamples = 0usize;
    let mut resample_log = Vec::new();

    // The substitution chain of every trial, as words: commands[t][k].
    let mut commands: Vec<Vec<Vec<String>>> = Vec::with_capacity(trials);
    for t in 0..trials {
        let base = pool[rng.gen_range(0..pool.len())].clone();
        robo_interpret(&base).map_err(AnalysisError::Task)?;
        let mut steps = vec![base];
        for k in 1..=chain {
            let current = steps[k - 1].clone();
            let mut draws = 0usize;
            let next = loop {
                draws += 1;
                if draws > MAX_DRAWS {
                    return Err(AnalysisError::Invalid(format!(
                        "no grammatical substitution found for '{}' after {MAX_DRAWS} draws",
                        current.join(" ")
                    )));
                }
                let pos = rng.gen_range(0..current.len());
                let word = &substitutable[rng.gen_range(0..substitutable.len())];
                if *word == current[pos] {
                    continue; // identity substitutions are excluded
                }
                let mut candidate = current.clone();
                candidate[pos] = word.clone();
                match robo_interpret(&candidate) {
                    Ok(_) => break candidate,
                    Err(e) => {
                        resamples += 1;
                        if resample_log.len() < RESAMPLE_LOG_CAP {
                            resample_log.push(format!(
                                "trial {t} edit {k}: '{}' rejected: {e}",
                                candidate.join(" ")
                            ));
                        }
                    }
                }
            };
            steps.push(next);
        }
        commands.push(steps);
    }

    // Live encodings of the base commands, then cumulative edits on them.
    let base_ids: Vec<Vec<usize>> = commands
        .iter()
        .map(|steps| steps[0].iter().map(|w| fit.token_id(w)).collect())
        .collect::<Result<_>>()?;
    let encodings = collect_encodings(decoder, &base_ids, batch)?;
    let width = fit.width();
    if encodings.shape()[1] != width {
        return Err(AnalysisError::Invalid(format!(
            "model pools {} dims, the fit projects into {width}",
            encodings.shape()[1]
        )));
    }

    let mut vectors: Vec<Vec<F>> = (0..trials)
        .map(|t| encodings.data()[t * width..(t + 1) * width].to_vec())
        .collect();
    let mut curve = Vec::with_capacity(chain + 1);
    for k in 0..=chain {
        if k > 0 {
            for (t, steps) in commands.iter().enumerate() {
                let (before, after) = (&steps[k - 1], &steps[k]);
                let pos = before
                    .iter()
                    .zip(after)
                    .position(|(a, b)| a != b)
                    .expect("each edit changes exactly one word");
                let role = fit.scheme.role_ids(before.len(), fit.max_len)?[pos];
                let script = EditScript(vec![
                    EditStep::Remove {
                        token: before[pos].clone(),
                        role,
                    },
                    EditStep::Insert {
                        token: after[pos].clone(),
                        role,
                    },
                ]);
                vectors[t] = apply_edit(&vectors[t], &script, fit)?;
            }
        }
        let pooled = Tensor::new(
            vec![trials, width],
            vectors.iter().flatten().copied().collect(),
        )?;
        let decoded = decode_pooled_rows(decoder, &pooled, max_out, batch)?;
        let mut matches = 0usize;
        for (t, out_ids) in decoded.iter().enumerate() {
            let oracle = robo_interpret(&commands[t][k]).map_err(AnalysisError::Task)?;
            let named: Option<Vec<&str>> = out_ids
                .iter()
                .map(|&id| fit.tokens.get(id).map(String::as_str))
                .collect();
            if named.is_some_and(|n| n == oracle.iter().map(String::as_str).collect::<Vec<_>>()) {
                matches += 1;
            }
        }
        curve.push(CurvePoint {
            k,
            trials,
            matches,
            accuracy: matches as f64 / trials as f64,
        });
    }

    let control = curve.remove(0);
    Ok(EditCurve {
        control,
        points: curve,
        resamples,
        resample_log,
        bases: commands.iter().map(|s| s[0].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use tprlab_models::ModelKind;
    use tprlab_tasks::robo::{enumerate_commands, CONJUNCTION, DIRECTIONS, REPEATS, VERBS};
    use tprlab_tasks::vocab::robo_vocab;

    use super::*;
    use crate::testkit::{planted_fit, tiny_decoder};
    use crate::RoleScheme;

    // Pooled width of the tiny recurrent decoder: hidden and cell state per
    // layer, one layer, hidden size 3·16/2 = 24.
    const WIDTH: usize = 48;

    /// A fit over the joint robo vocabulary whose tables are simply planted
    /// (no training): enough for exercising the edit arithmetic.
    fn robo_fit() -> TpdnFit<f64> {
        let vocab = robo_vocab();
        let tokens: Vec<String> = (0..vocab.size())
            .map(|i| vocab.token(i).unwrap().to_string())
            .collect();
        planted_fit(&tokens, RoleScheme::LeftToRight, 8, 6, 5, WIDTH, 21)
    }

    fn command_words() -> Vec<String> {
        VERBS
            .iter()
            .chain(&DIRECTIONS)
            .chain(&REPEATS)
            .chain(std::iter::once(&CONJUNCTION))
            .map(|s| s.to_string())
            .collect()
    }

    fn test_encoding(width: usize) -> Vec<f64> {
        (0..width).map(|i| (i as f64) * 0.3 - 2.0).collect()
    }

    #[test]
    fn scripts_round_trip_through_text() {
        let text = "-twice@2 +thrice@2 +jump@0";
        let script: EditScript = text.parse().unwrap();
        assert_eq!(script.0.len(), 3);
        assert_eq!(script.to_string(), text);
        assert_eq!(
            script.0[0],
            EditStep::Remove {
                token: "twice".into(),
                role: 2
            }
        );
        for bad in ["twice@2", "+twice", "+twice@x", "-@1", "*twice@2", "\u{2013}twice@2"] {
            assert!(bad.parse::<EditScript>().is_err(), "accepted '{bad}'");
        }
        // No steps is a valid (identity) script.
        assert!("".parse::<EditScript>().unwrap().0.is_empty());
    }

    #[test]
    fn empty_scripts_are_identities_and_inverses_cancel() {
        let fit = robo_fit();
        let enc = test_encoding(WIDTH);
        let same = apply_edit(&enc, &EditScript(Vec::new()), &fit).unwrap();
        assert_eq!(same, enc);

        let script: EditScript = "-jump@0 +walk@0 +twice@1".parse().unwrap();
        assert_eq!(script.inverse().to_string(), "-twice@1 -walk@0 +jump@0");
        let there = apply_edit(&enc, &script, &fit).unwrap();
        let back = apply_edit(&there, &script.inverse(), &fit).unwrap();
        for (b, e) in back.iter().zip(&enc) {
            assert!((b - e).abs() < 1e-12);
        }
    }

    #[test]
    fn edit_steps_commute() {
        let fit = robo_fit();
        let enc = test_encoding(WIDTH);
        let forward: EditScript = "-jump@0 +look@2 -and@4".parse().unwrap();
        let backward: EditScript = "-and@4 +look@2 -jump@0".parse().unwrap();
        let a = apply_edit(&enc, &forward, &fit).unwrap();
        let b = apply_edit(&enc, &backward, &fit).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn edits_respect_blends_of_encodings() {
        let fit = robo_fit();
        let x = test_encoding(WIDTH);
        let y: Vec<f64> = (0..WIDTH).map(|i| ((i * i) % 7) as f64 - 3.0).collect();
        let alpha = 0.3;
        let blend: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        let script: EditScript = "-left@1 +right@1".parse().unwrap();
        let edited_blend = apply_edit(&blend, &script, &fit).unwrap();
        let ex = apply_edit(&x, &script, &fit).unwrap();
        let ey = apply_edit(&y, &script, &fit).unwrap();
        for ((eb, a), b) in edited_blend.iter().zip(&ex).zip(&ey) {
            assert!((eb - (alpha * a + (1.0 - alpha) * b)).abs() < 1e-10);
        }
    }

    #[test]
    fn bad_scripts_and_widths_are_rejected_before_any_arithmetic() {
        let fit = robo_fit();
        let enc = test_encoding(WIDTH);
        let unknown: EditScript = "-flap@0".parse().unwrap();
        assert!(matches!(
            apply_edit(&enc, &unknown, &fit),
            Err(AnalysisError::UnknownSymbol(_))
        ));
        let out_of_range: EditScript = "+jump@99".parse().unwrap();
        assert!(matches!(
            apply_edit(&enc, &out_of_range, &fit),
            Err(AnalysisError::UnknownRole { .. })
        ));
        let ok: EditScript = "+jump@0".parse().unwrap();
        assert!(matches!(
            apply_edit(&enc[..WIDTH - 1], &ok, &fit),
            Err(AnalysisError::Invalid(_))
        ));
    }

    #[test]
    fn planted_differences_isolate_single_bindings() {
        let fit = robo_fit();
        let jump = fit.token_id("jump").unwrap();
        let twice = fit.token_id("twice").unwrap();
        let pair = fit.reconstruct(&[vec![jump, twice]]).unwrap();
        let solo = fit.reconstruct(&[vec![jump]]).unwrap();
        let binding = binding_vector(&fit, "twice", 1).unwrap();
        for ((p, s), b) in pair.data().iter().zip(solo.data()).zip(&binding) {
            assert!((p - s - b).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_scripts_restore_every_decode() {
        let fit = robo_fit();
        let decoder = tiny_decoder(ModelKind::Lstm, 18, 16, 3);
        let pool = enumerate_commands(3);
        let ids: Vec<Vec<usize>> = pool
            .iter()
            .take(12)
            .map(|c| c.iter().map(|w| fit.token_id(w).unwrap()).collect())
            .collect();
        let enc = collect_encodings(decoder.as_ref(), &ids, 8).unwrap();
        let script: EditScript = "-jump@0 +walk@0 +thrice@2".parse().unwrap();
        let mut restored = Vec::with_capacity(enc.numel());
        for t in 0..ids.len() {
            let row = &enc.data()[t * WIDTH..(t + 1) * WIDTH];
            let edited = apply_edit(row, &script, &fit).unwrap();
            restored.extend(apply_edit(&edited, &script.inverse(), &fit).unwrap());
        }
        let restored = Tensor::new(vec![ids.len(), WIDTH], restored).unwrap();
        let before = decode_pooled_rows(decoder.as_ref(), &enc, 13, 8).unwrap();
        let after = decode_pooled_rows(decoder.as_ref(), &restored, 13, 8).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn experiments_report_an_honest_control() {
        let fit = robo_fit();
        let decoder = tiny_decoder(ModelKind::Lstm, 18, 16, 3);
        let pool = enumerate_commands(5);
        let words = command_words();
        let curve =
            edit_experiment(decoder.as_ref(), &fit, &pool, &words, 3, 10, 42, 13, 8).unwrap();

        assert_eq!(curve.control.k, 0);
        assert_eq!(curve.points.len(), 3);
        assert_eq!(curve.bases.len(), 10);
        for (i, p) in curve.points.iter().enumerate() {
            assert_eq!(p.k, i + 1);
            assert_eq!(p.trials, 10);
            assert!((p.accuracy - p.matches as f64 / 10.0).abs() < 1e-12);
        }

        // Recompute the control from the reported bases: encode, decode,
        // judge against the symbolic interpreter.
        let ids: Vec<Vec<usize>> = curve
            .bases
            .iter()
            .map(|c| c.iter().map(|w| fit.token_id(w).unwrap()).collect())
            .collect();
        let enc = collect_encodings(decoder.as_ref(), &ids, 8).unwrap();
        let decoded = decode_pooled_rows(decoder.as_ref(), &enc, 13, 8).unwrap();
        let mut matches = 0usize;
        for (t, out) in decoded.iter().enumerate() {
            let oracle = robo_interpret(&curve.bases[t]).unwrap();
            let named: Option<Vec<&str>> = out
                .iter()
                .map(|&id| fit.tokens.get(id).map(String::as_str))
                .collect();
            if named.is_some_and(|n| n == oracle.iter().map(String::as_str).collect::<Vec<_>>()) {
                matches += 1;
            }
        }
        assert_eq!(curve.control.matches, matches);

        // Same seed, same curve; a different seed samples different bases.
        let again =
            edit_experiment(decoder.as_ref(), &fit, &pool, &words, 3, 10, 42, 13, 8).unwrap();
        assert_eq!(again.bases, curve.bases);
        assert_eq!(again.control.matches, curve.control.matches);
        assert_eq!(again.resamples, curve.resamples);
        let shifted =
            edit_experiment(decoder.as_ref(), &fit, &pool, &words, 3, 10, 43, 13, 8).unwrap();
        assert_ne!(shifted.bases, curve.bases);
    }

    #[test]
    fn long_commands_and_resamples_are_reported() {
        let fit = robo_fit();
        let decoder = tiny_decoder(ModelKind::Lstm, 18, 16, 3);
        let pool = enumerate_commands(8);
        let words = command_words();
        let curve =
            edit_experiment(decoder.as_ref(), &fit, &pool, &words, 5, 40, 7, 13, 16).unwrap();
        assert!(curve.bases.iter().any(|b| b.len() == 8));
        assert!(curve.bases.iter().all(|b| robo_interpret(b).is_ok()));
        assert_eq!(curve.resample_log.len(), curve.resamples.min(200));
    }

    #[test]
    fn degenerate_experiments_are_rejected() {
        let fit = robo_fit();
        let decoder = tiny_decoder(ModelKind::Lstm, 18, 16, 3);
        let pool = enumerate_commands(3);
        let words = command_words();
        let empty_pool: &[Vec<String>] = &[];
        for result in [
            edit_experiment(decoder.as_ref(), &fit, empty_pool, &words, 3, 10, 0, 13, 8),
            edit_experiment(decoder.as_ref(), &fit, &pool, &words[..1], 3, 10, 0, 13, 8),
            edit_experiment(decoder.as_ref(), &fit, &pool, &words, 0, 10, 0, 13, 8),
            edit_experiment(decoder.as_ref(), &fit, &pool, &words, 3, 0, 0, 13, 8),
        ] {
            assert!(matches!(result, Err(AnalysisError::Invalid(_))));
        }
    }
}
