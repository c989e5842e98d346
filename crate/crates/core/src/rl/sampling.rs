//! Autoregressive sampling with temperature, frequency penalty and top-p.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{PolicyTable, START, STOP};
use crate::error::RlError;

/// Below this temperature sampling becomes argmax.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub max_tokens: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.7,
            top_p: 1.0,
            frequency_penalty: 0.5,
            max_tokens: 512,
        }
    }
}

impl SamplingParams {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), RlError> {
        if !(self.temperature > 0.0) {
            return Err(RlError::InvalidConfig(
                "temperature must be positive".into(),
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(RlError::InvalidConfig("top_p must lie in (0, 1]".into()));
        }
        if !(self.frequency_penalty >= 0.0) {
            return Err(RlError::InvalidConfig(
                "frequency_penalty must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature < GREEDY_TEMPERATURE
    }
}

/// `logits / T - penalty * count`, with the start token masked out.
pub fn adjusted_logits(logits: &[f64], counts: &[usize], params: &SamplingParams) -> Vec<f64> {
    let t = params.temperature.max(GREEDY_TEMPERATURE);
    logits
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(i, (&l, &c))| {
            if i == START {
                f64::NEG_INFINITY
            } else {
                l / t - params.frequency_penalty * c as f64
            }
        })
        .collect()
}

/// Next-token distribution after the adjustments and the nucleus cut.
pub fn next_token_distribution(
    logits: &[f64],
    counts: &[usize],
    params: &SamplingParams,
) -> Vec<f64> {
    let adjusted = adjusted_logits(logits, counts, params);
    let max = adjusted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = adjusted.iter().map(|&l| (l - max).exp()).collect();
    normalize(&mut probs);
    if params.top_p < 1.0 {
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        let mut mass = 0.0;
        let mut keep = vec![false; probs.len()];
        for &i in &order {
            keep[i] = true;
            mass += probs[i];
            if mass >= params.top_p {
                break;
            }
        }
        for (p, k) in probs.iter_mut().zip(keep) {
            if !k {
                *p = 0.0;
            }
        }
        normalize(&mut probs);
    }
    probs
}

fn normalize(probs: &mut [f64]) {
    let z: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= z;
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn draw(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples tokens from the start state until the stop token or
/// `max_tokens`. The stop token is not included.
pub fn sample_with_rng(
    policy: &PolicyTable,
    params: &SamplingParams,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let mut counts = vec![0usize; policy.size()];
    let mut out = Vec::new();
    let mut state = START;
    while out.len() < params.max_tokens {
        let next = if params.is_greedy() {
            argmax(&adjusted_logits(&policy.logits[state], &counts, params))
        } else {
            draw(
                &next_token_distribution(&policy.logits[state], &counts, params),
                rng,
            )
        };
        if next == STOP {
            break;
        }
        counts[next] += 1;
        out.push(next);
        state = next;
    }
    out
}

pub fn sample_completion(policy: &PolicyTable, params: &SamplingParams, seed: u64) -> Vec<usize> {
    sample_with_rng(policy, params, &mut ChaCha8Rng::seed_from_u64(seed))
}
