//! Token vocabularies shared by datasets and models.
//!
//! Layout convention: task symbols occupy the low ids (digit `d` is id `d`
//! in the copy vocabulary), followed by the three markers `<s>`, `</s>`,
//! `<pad>` in that order.

use std::collections::HashMap;

use crate::robo;
use crate::{Result, TaskError};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const PAD: &str = "<pad>";

#[derive(Clone, Debug)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from task symbols; the three markers are appended.
    pub fn new(symbols: &[&str]) -> Self {
        let mut tokens: Vec<String> = symbols.iter().map(|s| s.to_string()).collect();
        tokens.push(BOS.to_string());
        tokens.push(EOS.to_string());
        tokens.push(PAD.to_string());
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn bos(&self) -> usize {
        self.tokens.len() - 3
    }

    pub fn eos(&self) -> usize {
        self.tokens.len() - 2
    }

    pub fn pad(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn id(&self, token: &str) -> Result<usize> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| TaskError::UnknownToken(token.to_string()))
    }

    pub fn token(&self, id: usize) -> Result<&str> {
        self.tokens
            .get(id)
            .map(|s| s.as_str())
            .ok_or(TaskError::TokenIdOutOfRange(id, self.tokens.len()))
    }

    pub fn encode(&self, words: &[&str]) -> Result<Vec<usize>> {
        words.iter().map(|w| self.id(w)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>> {
        ids.iter()
            .map(|&i| self.token(i).map(|s| s.to_string()))
            .collect()
    }
}

/// Digits 0..9 (digit `d` is token id `d`) plus markers: 13 tokens.
pub fn copy_vocab() -> Vocab {
    let digits = ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"];
    Vocab::new(&digits)
}

/// Joint vocabulary for the robo task: command words first, then action
/// tokens, then markers (18 tokens). Models use one vocabulary for both
/// sides, so input words and output actions share an id space.
pub fn robo_vocab() -> Vocab {
    let mut symbols: Vec<&str> = robo::VERBS.to_vec();
    symbols.extend(robo::DIRECTIONS);
    symbols.extend(robo::REPEATS);
    symbols.push(robo::CONJUNCTION);
    symbols.extend(robo::ACTIONS);
    symbols.extend(robo::TURNS);
    Vocab::new(&symbols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn copy_vocab_has_thirteen_tokens_with_digit_ids() {
        let v = copy_vocab();
        assert_eq!(v.size(), 13);
        for d in 0..10usize {
            assert_eq!(v.id(&d.to_string()).unwrap(), d);
        }
        assert_eq!(v.bos(), 10);
        assert_eq!(v.eos(), 11);
        assert_eq!(v.pad(), 12);
    }

    #[test]
    fn encode_decode_round_trip_and_unknowns() {
        let v = robo_vocab();
        assert_eq!(v.size(), 18);
        let ids = v.encode(&["jump", "left", "and", "TL", "JUMP"]).unwrap();
        assert_eq!(v.decode(&ids).unwrap(), ["jump", "left", "and", "TL", "JUMP"]);
        assert!(matches!(v.id("fly"), Err(TaskError::UnknownToken(_))));
        assert!(matches!(
            v.token(99),
            Err(TaskError::TokenIdOutOfRange(99, _))
        ));
    }
}
