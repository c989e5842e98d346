//! Loss functions, KL terms and the clipped surrogate, with analytic
//! gradients.

use serde::{Deserialize, Serialize};

use crate::error::RlError;

/// `-Σ ln p_i` over the probabilities assigned to the target tokens.
pub fn cross_entropy_loss(token_probs: &[f64]) -> Result<f64, RlError> {
    let mut loss = 0.0;
    for &p in token_probs {
        if !(p > 0.0 && p <= 1.0) {
            return Err(RlError::Domain(format!("probability {p} outside (0, 1]")));
        }
        loss -= p.ln();
    }
    Ok(loss)
}

fn check_lengths(pred: &[f64], target: &[f64]) -> Result<(), RlError> {
    if pred.len() != target.len() {
        return Err(RlError::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(RlError::Domain("mse over empty vectors".into()));
    }
    Ok(())
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64, RlError> {
    check_lengths(pred, target)?;
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// d mse / d pred_i = 2 (pred_i - target_i) / n.
pub fn mse_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>, RlError> {
    check_lengths(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect())
}

/// `rhat - beta * kl`.
pub fn kl_penalized_reward(rhat: f64, kl: f64, beta: f64) -> f64 {
    rhat - beta * kl
}

/// One policy decision in an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub state: usize,
    pub action: usize,
    pub logprob_new: f64,
    pub logprob_old: f64,
    pub advantage: f64,
}

impl TrajectoryStep {
    pub fn ratio(&self) -> f64 {
        (self.logprob_new - self.logprob_old).exp()
    }
}

pub fn clip(r: f64, epsilon: f64) -> f64 {
    r.clamp(1.0 - epsilon, 1.0 + epsilon)
}

pub fn surrogate_value(r: f64, advantage: f64, epsilon: f64) -> f64 {
    (r * advantage).min(clip(r, epsilon) * advantage)
}

/// `min(r A, clip(r, 1-ε, 1+ε) A)`.
pub fn clipped_surrogate(step: &TrajectoryStep, epsilon: f64) -> f64 {
    surrogate_value(step.ratio(), step.advantage, epsilon)
}

/// Derivative of the surrogate with respect to the ratio: `A` while the
/// unclipped branch is the minimum, 0 once clipping takes over.
pub fn surrogate_grad_ratio(r: f64, advantage: f64, epsilon: f64) -> f64 {
    if r * advantage <= clip(r, epsilon) * advantage {
        advantage
    } else {
        0.0
    }
}

/// Gradient of the surrogate with respect to one logits row, where the
/// ratio is `softmax(logits)[action] / exp(logprob_old)`.
pub fn surrogate_grad_logits(
    logits: &[f64],
    action: usize,
    logprob_old: f64,
    advantage: f64,
    epsilon: f64,
) -> Vec<f64> {
    let p = softmax(logits);
    let r = (p[action].ln() - logprob_old).exp();
    let scale = r * surrogate_grad_ratio(r, advantage, epsilon);
    p.iter()
        .enumerate()
        .map(|(j, &pj)| scale * (if j == action { 1.0 } else { 0.0 } - pj))
        .collect()
}

/// `Σ p ln(p / q)` with `0 ln 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, RlError> {
    if p.len() != q.len() {
        return Err(RlError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi < 0.0 || qi < 0.0 {
            return Err(RlError::Domain("negative probability".into()));
        }
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(RlError::Domain("q is zero where p is positive".into()));
        }
        kl += pi * (pi / qi).ln();
    }
    // rounding can leave tiny negatives for p == q
    Ok(kl.max(0.0))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[i] += h;
    minus[i] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// `|a - b| / max(|a|, |b|)`, or the absolute error when both are tiny.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}
