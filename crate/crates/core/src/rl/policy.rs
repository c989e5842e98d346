//! Tabular bigram policy: one logits row per previous token.

use serde::{Deserialize, Serialize};

use super::math::{kl_divergence, log_softmax, softmax};
use crate::error::RlError;

/// Index of the start-of-sequence token; only ever a state.
pub const START: usize = 0;
/// Index of the stop token; ends a completion.
pub const STOP: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub vocabulary: Vec<String>,
    /// `logits[state][action]`.
    pub logits: Vec<Vec<f64>>,
    /// Frozen copy of the logits the run started from.
    pub reference: Vec<Vec<f64>>,
}

impl PolicyTable {
    pub fn new(vocabulary: Vec<String>, logits: Vec<Vec<f64>>) -> Result<Self, RlError> {
        let n = vocabulary.len();
        if n < 3 {
            return Err(RlError::InvalidConfig(
                "vocabulary needs start, stop and at least one token".into(),
            ));
        }
        if logits.len() != n || logits.iter().any(|row| row.len() != n) {
            return Err(RlError::InvalidConfig(format!("logits must be {n} x {n}")));
        }
        if logits.iter().flatten().any(|l| !l.is_finite()) {
            return Err(RlError::Domain("non-finite logit".into()));
        }
        Ok(PolicyTable {
            vocabulary,
            reference: logits.clone(),
            logits,
        })
    }

    /// All-zero logits, so every row is uniform.
    pub fn uniform(vocabulary: Vec<String>) -> Result<Self, RlError> {
        let n = vocabulary.len();
        PolicyTable::new(vocabulary, vec![vec![0.0; n]; n])
    }

    pub fn size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn probs(&self, state: usize) -> Vec<f64> {
        softmax(&self.logits[state])
    }

    pub fn log_probs(&self, state: usize) -> Vec<f64> {
        log_softmax(&self.logits[state])
    }

    pub fn reference_probs(&self, state: usize) -> Vec<f64> {
        softmax(&self.reference[state])
    }

    /// Makes the current logits the new reference.
    pub fn freeze(&mut self) {
        self.reference = self.logits.clone();
    }

    /// `KL(π₀(·|s) ‖ π(·|s))` for one state.
    pub fn kl_row(&self, state: usize) -> f64 {
        kl_divergence(&self.reference_probs(state), &self.probs(state)).unwrap_or(f64::INFINITY)
    }

    /// Mean row KL over the given states; 0 for none.
    pub fn mean_kl(&self, states: &[usize]) -> f64 {
        if states.is_empty() {
            return 0.0;
        }
        states.iter().map(|&s| self.kl_row(s)).sum::<f64>() / states.len() as f64
    }

    /// Mean row KL over every state that can be visited (all but stop).
    pub fn mean_kl_all(&self) -> f64 {
        let states: Vec<usize> = (0..self.size()).filter(|&s| s != STOP).collect();
        self.mean_kl(&states)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.vocabulary[index]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.vocabulary.iter().position(|t| t == token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vec<String> {
        ["<s>", "</s>", "a", "b"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn uniform_rows() {
        let p = PolicyTable::uniform(vocab()).unwrap();
        for s in 0..4 {
            let row = p.probs(s);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|&x| (x - 0.25).abs() < 1e-12));
        }
        assert_eq!(p.mean_kl_all(), 0.0);
    }

    #[test]
    fn shape_is_checked() {
        assert!(PolicyTable::new(vocab(), vec![vec![0.0; 4]; 3]).is_err());
        assert!(PolicyTable::new(vocab()[..2].to_vec(), vec![vec![0.0; 2]; 2]).is_err());
        let mut bad = vec![vec![0.0; 4]; 4];
        bad[1][1] = f64::NAN;
        assert!(PolicyTable::new(vocab(), bad).is_err());
    }

    #[test]
    fn kl_grows_after_a_change() {
        let mut p = PolicyTable::uniform(vocab()).unwrap();
        p.logits[0][2] = 3.0;
        assert!(p.kl_row(0) > 0.0);
        assert_eq!(p.kl_row(2), 0.0);
        p.freeze();
        assert_eq!(p.kl_row(0), 0.0);
        assert_eq!(p.index_of("b"), Some(3));
    }
}
