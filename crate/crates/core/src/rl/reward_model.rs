//! Linear reward model over token-count features.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::math::{mse_grad, mse_loss};
use crate::error::RlError;
use crate::parser::tokenize;
use crate::reward::LabeledRecord;

/// Epochs without validation improvement before training stops.
pub const PATIENCE: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRewardModel {
    /// Token text to feature index.
    pub features: BTreeMap<String, usize>,
    /// Per-feature count divisor (largest count seen in training).
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModelReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch whose weights were kept; 0 means the initial model.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

fn token_counts(text: &str) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in tokenize(text) {
        if !t.kind.is_trivia() {
            *counts.entry(t.text).or_insert(0) += 1;
        }
    }
    counts
}

impl LinearRewardModel {
    /// Zero weights over the features seen in `texts`.
    pub fn zero_for<S: AsRef<str>>(texts: &[S]) -> Self {
        let mut features = BTreeMap::new();
        let mut scale = Vec::new();
        for text in texts {
            for (tok, c) in token_counts(text.as_ref()) {
                let next = features.len();
                let i = *features.entry(tok).or_insert(next);
                if i == scale.len() {
                    scale.push(0.0);
                }
                scale[i] = f64::max(scale[i], c as f64);
            }
        }
        let n = features.len();
        LinearRewardModel {
            features,
            scale,
            weights: vec![0.0; n],
            bias: 0.0,
        }
    }

    pub fn featurize(&self, text: &str) -> Vec<f64> {
        let mut x = vec![0.0; self.weights.len()];
        for (tok, c) in token_counts(text) {
            if let Some(&i) = self.features.get(&tok) {
                x[i] = c as f64 / self.scale[i].max(1.0);
            }
        }
        x
    }

    pub fn predict_features(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict(&self, text: &str) -> f64 {
        self.predict_features(&self.featurize(text))
    }
}

fn loss_on(model: &LinearRewardModel, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let pred: Vec<f64> = xs.iter().map(|x| model.predict_features(x)).collect();
    mse_loss(&pred, ys).unwrap_or(0.0)
}

/// Full-batch gradient descent on MSE with a 10% held-out split and early
/// stopping; the weights with the lowest validation loss are returned.
pub fn train_reward_model(
    labeled: &[LabeledRecord],
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<(LinearRewardModel, RewardModelReport), RlError> {
    if labeled.len() < 2 {
        return Err(RlError::InsufficientData(
            "need at least two labeled records".into(),
        ));
    }
    if labeled.iter().all(|l| l.reward == labeled[0].reward) {
        return Err(RlError::InsufficientData(format!(
            "all records have reward {}",
            labeled[0].reward
        )));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(RlError::InvalidConfig(
            "learning rate must be positive".into(),
        ));
    }
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (labeled.len() / 10).max(1);
    let (val_idx, train_idx) = order.split_at(n_val);

    let train_texts: Vec<&str> = train_idx
        .iter()
        .map(|&i| labeled[i].record.test.as_str())
        .collect();
    let mut model = LinearRewardModel::zero_for(&train_texts);
    let xs: Vec<Vec<f64>> = train_texts.iter().map(|t| model.featurize(t)).collect();
    let ys: Vec<f64> = train_idx
        .iter()
        .map(|&i| labeled[i].reward as f64)
        .collect();
    let vxs: Vec<Vec<f64>> = val_idx
        .iter()
        .map(|&i| model.featurize(&labeled[i].record.test))
        .collect();
    let vys: Vec<f64> = val_idx.iter().map(|&i| labeled[i].reward as f64).collect();

    let mut report = RewardModelReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        best_val_loss: loss_on(&model, &vxs, &vys),
        stopped_early: false,
    };
    let mut best = model.clone();
    for epoch in 1..=epochs {
        let pred: Vec<f64> = xs.iter().map(|x| model.predict_features(x)).collect();
        let g = mse_grad(&pred, &ys)?;
        for (x, gi) in xs.iter().zip(&g) {
            for (w, v) in model.weights.iter_mut().zip(x) {
                *w -= lr * gi * v;
            }
            model.bias -= lr * gi;
        }
        let val = loss_on(&model, &vxs, &vys);
        report.train_loss.push(loss_on(&model, &xs, &ys));
        report.val_loss.push(val);
        if val < report.best_val_loss {
            report.best_val_loss = val;
            report.best_epoch = epoch;
            best = model.clone();
        } else if epoch - report.best_epoch >= PATIENCE {
            report.stopped_early = true;
            break;
        }
    }
    Ok((best, report))
}
