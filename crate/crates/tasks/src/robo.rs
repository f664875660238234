//! A miniature robot-command language and its compositional interpreter.
//!
//! Grammar (word order inside a clause is verb, optional direction,
//! optional repetition):
//!
//! ```text
//! command := clause ("and" clause)*      (at most MAX_CLAUSES clauses)
//! clause  := verb [direction] [repeat]
//! verb    := jump | walk | look | run
//! direction := left | right
//! repeat  := twice | thrice
//! ```
//!
//! Interpretation: a verb maps to its action token; a direction prepends a
//! turn (left → TL, right → TR); a repetition repeats the clause's actions
//! (twice → 2, thrice → 3); "and" concatenates clause interpretations.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Result, TaskError};

pub const VERBS: [&str; 4] = ["jump", "walk", "look", "run"];
pub const ACTIONS: [&str; 4] = ["JUMP", "WALK", "LOOK", "RUN"];
pub const DIRECTIONS: [&str; 2] = ["left", "right"];
pub const TURNS: [&str; 2] = ["TL", "TR"];
pub const REPEATS: [&str; 2] = ["twice", "thrice"];
pub const CONJUNCTION: &str = "and";
pub const MAX_CLAUSES: usize = 3;
pub const DEFAULT_MAX_WORDS: usize = 8;

fn action_for(verb: &str) -> Option<&'static str> {
    VERBS.iter().position(|&v| v == verb).map(|i| ACTIONS[i])
}

fn turn_for(dir: &str) -> Option<&'static str> {
    DIRECTIONS.iter().position(|&d| d == dir).map(|i| TURNS[i])
}

fn repeat_for(rep: &str) -> Option<usize> {
    match rep {
        "twice" => Some(2),
        "thrice" => Some(3),
        _ => None,
    }
}

/// Parses and interprets a command, or explains why it does not parse.
pub fn robo_interpret<S: AsRef<str>>(words: &[S]) -> Result<Vec<String>> {
    let words: Vec<&str> = words.iter().map(|w| w.as_ref()).collect();
    if words.is_empty() {
        return Err(TaskError::Parse("empty command".into()));
    }
    let mut clauses: Vec<&[&str]> = Vec::new();
    let mut start = 0usize;
    for (i, &w) in words.iter().enumerate() {
        if w == CONJUNCTION {
            if i == start {
                return Err(TaskError::Parse(format!(
                    "clause {} is empty",
                    clauses.len() + 1
                )));
            }
            clauses.push(&words[start..i]);
            start = i + 1;
        }
    }
    if start == words.len() {
        return Err(TaskError::Parse("command ends with 'and'".into()));
    }
    clauses.push(&words[start..]);
    if clauses.len() > MAX_CLAUSES {
        return Err(TaskError::Parse(format!(
            "{} clauses exceed the maximum of {MAX_CLAUSES}",
            clauses.len()
        )));
    }

    let mut out = Vec::new();
    for clause in clauses {
        out.extend(interpret_clause(clause)?);
    }
    Ok(out)
}

fn interpret_clause(clause: &[&str]) -> Result<Vec<String>> {
    let text = clause.join(" ");
    let mut it = clause.iter();
    let verb = it.next().ok_or_else(|| TaskError::Parse("empty clause".into()))?;
    let action = action_for(verb)
        .ok_or_else(|| TaskError::Parse(format!("'{text}': expected a verb, got '{verb}'")))?;

    let mut rest: Vec<&str> = it.copied().collect();
    let mut unit = vec![action.to_string()];
    if let Some(&first) = rest.first() {
        if let Some(turn) = turn_for(first) {
            unit.insert(0, turn.to_string());
            rest.remove(0);
        }
    }
    let mut times = 1usize;
    if let Some(&first) = rest.first() {
        if let Some(n) = repeat_for(first) {
            times = n;
            rest.remove(0);
        }
    }
    if !rest.is_empty() {
        return Err(TaskError::Parse(format!(
            "'{text}': unexpected '{}'",
            rest[0]
        )));
    }
    let mut out = Vec::with_capacity(unit.len() * times);
    for _ in 0..times {
        out.extend(unit.iter().cloned());
    }
    Ok(out)
}

/// All grammatical clauses as word vectors, in a fixed enumeration order
/// (verb-major, then direction, then repetition).
fn all_clauses() -> Vec<Vec<String>> {
    let mut out = Vec::with_capacity(36);
    for verb in VERBS {
        for dir in [None, Some("left"), Some("right")] {
            for rep in [None, Some("twice"), Some("thrice")] {
                let mut clause = vec![verb.to_string()];
                if let Some(d) = dir {
                    clause.push(d.to_string());
                }
                if let Some(r) = rep {
                    clause.push(r.to_string());
                }
                out.push(clause);
            }
        }
    }
    out
}

/// Enumerates every command of at most `max_words` words (and at most
/// [`MAX_CLAUSES`] clauses) in a deterministic order.
pub fn enumerate_commands(max_words: usize) -> Vec<Vec<String>> {
    let clauses = all_clauses();
    let mut out = Vec::new();
    let fits = |parts: &[&Vec<String>]| {
        let words: usize = parts.iter().map(|c| c.len()).sum::<usize>() + (parts.len() - 1);
        words <= max_words
    };
    let join = |parts: &[&Vec<String>]| {
        let mut cmd: Vec<String> = Vec::new();
        for (i, c) in parts.iter().enumerate() {
            if i > 0 {
                cmd.push(CONJUNCTION.to_string());
            }
            cmd.extend(c.iter().cloned());
        }
        cmd
    };
    for a in &clauses {
        if fits(&[a]) {
            out.push(join(&[a]));
        }
    }
    for a in &clauses {
        for b in &clauses {
            if fits(&[a, b]) {
                out.push(join(&[a, b]));
            }
        }
    }
    for a in &clauses {
        for b in &clauses {
            for c in &clauses {
                if fits(&[a, b, c]) {
                    out.push(join(&[a, b, c]));
                }
            }
        }
    }
    out
}

/// One command with its oracle interpretation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoboExample {
    pub command: Vec<String>,
    pub actions: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RoboSplit {
    pub seed: u64,
    pub policy: String,
    pub max_words: usize,
    pub train: Vec<RoboExample>,
    pub test: Vec<RoboExample>,
}

/// Enumerates the grammar up to `max_words`, attaches oracle outputs, and
/// splits i.i.d. by a seeded shuffle (`train_frac` of the whole).
pub fn gen_robo_dataset(seed: u64, max_words: usize, train_frac: f64) -> Result<RoboSplit> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(TaskError::Parse(format!(
            "train fraction {train_frac} outside [0,1]"
        )));
    }
    let mut examples: Vec<RoboExample> = enumerate_commands(max_words)
        .into_iter()
        .map(|command| {
            let actions = robo_interpret(&command)?;
            Ok(RoboExample { command, actions })
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x726f_626f_u64); // "robo" tag
    examples.shuffle(&mut rng);
    let n_train = (examples.len() as f64 * train_frac).round() as usize;
    let test = examples.split_off(n_train.min(examples.len()));
    Ok(RoboSplit {
        seed,
        policy: "iid-shuffle".to_string(),
        max_words,
        train: examples,
        test,
    })
}
