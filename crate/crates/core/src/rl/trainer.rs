//! Episodic PPO over the tabular policy.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::math::{kl_penalized_reward, surrogate_grad_logits};
use super::policy::{PolicyTable, START, STOP};
use super::sampling::{sample_with_rng, SamplingParams};
use super::vocab::ToyTask;
use crate::error::RlError;
use crate::quality::{analyze, score_corpus, CorpusStats, Property, ScoreConfig};
use crate::reward::{reward, RewardScheme};

/// Offset mixed into the seed for validation sampling, so validation draws
/// never coincide with training draws.
const VALIDATION_SEED_OFFSET: u64 = 0x05ee_d0f7_e570;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// KL coefficient.
    pub beta: f64,
    /// Clip range of the surrogate.
    pub epsilon: f64,
    pub learning_rate: f64,
    pub episodes: usize,
    pub max_tokens: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub seed: u64,
    /// Surrogate optimization passes per episode.
    pub ppo_epochs: usize,
    /// Weight of the old value in the moving reward baseline.
    pub baseline_decay: f64,
    /// Episodes between validation checkpoints.
    pub eval_every: usize,
    pub eval_samples: usize,
    /// Average the KL over every state instead of the visited ones.
    pub kl_full_state: bool,
    /// Score used to pick the best checkpoint.
    pub checkpoint: ScoreConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: 0.05,
            epsilon: 0.2,
            learning_rate: 0.05,
            episodes: 2000,
            max_tokens: 512,
            temperature: 0.7,
            top_p: 1.0,
            frequency_penalty: 0.5,
            seed: 0,
            ppo_epochs: 4,
            baseline_decay: 0.9,
            eval_every: 100,
            eval_samples: 100,
            kl_full_state: false,
            checkpoint: ScoreConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn sampling(&self) -> SamplingParams {
        SamplingParams {
            temperature: self.temperature,
            top_p: self.top_p,
            frequency_penalty: self.frequency_penalty,
            max_tokens: self.max_tokens,
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), RlError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(RlError::InvalidConfig("epsilon must lie in (0, 1)".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(RlError::InvalidConfig("beta must be non-negative".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RlError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(RlError::InvalidConfig(
                "baseline_decay must lie in [0, 1)".into(),
            ));
        }
        if self.eval_every == 0 || self.eval_samples == 0 {
            return Err(RlError::InvalidConfig(
                "eval_every and eval_samples must be positive".into(),
            ));
        }
        self.sampling().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Episodes completed when the metrics were taken.
    pub episodes: usize,
    /// Mean raw reward over the training episodes of this epoch.
    pub mean_reward: f64,
    /// Mean KL penalty term before scaling by beta.
    pub mean_kl: f64,
    /// Property frequencies on validation samples.
    pub frequencies: BTreeMap<Property, f64>,
    pub quality_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    /// Epoch 0 is the initial policy.
    pub epochs: Vec<EpochMetrics>,
    /// Epoch whose policy was returned.
    pub best_epoch: usize,
    pub best_score: f64,
}

/// Samples `n` completions, analyzes them and scores the batch.
pub fn evaluate_policy(
    policy: &PolicyTable,
    task: &ToyTask,
    params: &SamplingParams,
    n: usize,
    seed: u64,
    score: &ScoreConfig,
) -> CorpusStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reports: Vec<_> = (0..n)
        .map(|_| {
            let tokens = sample_with_rng(policy, params, &mut rng);
            analyze(
                &task.render(&policy.vocabulary, &tokens),
                &task.focal_method,
            )
        })
        .collect();
    score_corpus(&reports, score).unwrap_or(CorpusStats {
        count: 0,
        frequencies: BTreeMap::new(),
        quality_score: f64::NEG_INFINITY,
    })
}

/// Reward read straight off the analyzer.
pub fn analyzer_reward(scheme: RewardScheme, focal: String) -> impl Fn(&str) -> f64 {
    move |text: &str| reward(&analyze(text, &focal), &scheme) as f64
}

/// `(state, action)` pairs of a sampled sequence, ending with the stop
/// action when the sequence stopped on its own.
pub fn trajectory(tokens: &[usize], max_tokens: usize) -> Vec<(usize, usize)> {
    let mut steps = Vec::with_capacity(tokens.len() + 1);
    let mut state = START;
    for &t in tokens {
        steps.push((state, t));
        state = t;
    }
    if tokens.len() < max_tokens {
        steps.push((state, STOP));
    }
    steps
}

fn epoch_metrics(
    epoch: usize,
    episodes: usize,
    rewards: &[f64],
    kls: &[f64],
    stats: &CorpusStats,
) -> EpochMetrics {
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    EpochMetrics {
        epoch,
        episodes,
        mean_reward: mean(rewards),
        mean_kl: mean(kls),
        frequencies: stats.frequencies.clone(),
        quality_score: stats.quality_score,
    }
}

/// PPO on a bigram policy. `init` is both the starting point and the KL
/// reference, so passing a trained policy gives the sequential strategy.
/// Returns the checkpoint with the best validation score; ties go to the
/// later epoch.
pub fn train_toy_policy(
    init: &PolicyTable,
    task: &ToyTask,
    reward_fn: impl Fn(&str) -> f64,
    cfg: &TrainConfig,
) -> Result<(PolicyTable, TrainingMetrics), RlError> {
    cfg.validate()?;
    let params = cfg.sampling();
    let val_seed = cfg.seed.wrapping_add(VALIDATION_SEED_OFFSET);
    let mut policy = init.clone();
    policy.freeze();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let initial = evaluate_policy(
        &policy,
        task,
        &params,
        cfg.eval_samples,
        val_seed,
        &cfg.checkpoint,
    );
    let mut metrics = TrainingMetrics {
        epochs: vec![epoch_metrics(0, 0, &[], &[], &initial)],
        best_epoch: 0,
        best_score: initial.quality_score,
    };
    let mut best = policy.clone();
    let mut baseline: Option<f64> = None;
    let mut rewards = Vec::new();
    let mut kls = Vec::new();
    let n = policy.size();

    for episode in 1..=cfg.episodes {
        let tokens = sample_with_rng(&policy, &params, &mut rng);
        let r = reward_fn(&task.render(&policy.vocabulary, &tokens));
        let steps = trajectory(&tokens, params.max_tokens);
        let kl = if cfg.kl_full_state {
            policy.mean_kl_all()
        } else {
            let mut visited: Vec<usize> = steps.iter().map(|s| s.0).collect();
            visited.sort_unstable();
            visited.dedup();
            policy.mean_kl(&visited)
        };
        let shaped = kl_penalized_reward(r, kl, cfg.beta);
        let b = *baseline.get_or_insert(shaped);
        let advantage = shaped - b;
        baseline = Some(cfg.baseline_decay * b + (1.0 - cfg.baseline_decay) * shaped);
        rewards.push(r);
        kls.push(kl);

        if advantage != 0.0 {
            let old: Vec<f64> = steps.iter().map(|&(s, a)| policy.log_probs(s)[a]).collect();
            for _ in 0..cfg.ppo_epochs {
                let mut grads: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
                for (&(s, a), &lp_old) in steps.iter().zip(&old) {
                    let g =
                        surrogate_grad_logits(&policy.logits[s], a, lp_old, advantage, cfg.epsilon);
                    let acc = grads.entry(s).or_insert_with(|| vec![0.0; n]);
                    for (x, gi) in acc.iter_mut().zip(g) {
                        *x += gi;
                    }
                }
                for (s, g) in grads {
                    for (l, gi) in policy.logits[s].iter_mut().zip(g) {
                        *l += cfg.learning_rate * gi;
                    }
                }
            }
        }

        if episode % cfg.eval_every == 0 || episode == cfg.episodes {
            let stats = evaluate_policy(
                &policy,
                task,
                &params,
                cfg.eval_samples,
                val_seed,
                &cfg.checkpoint,
            );
            let epoch = metrics.epochs.len();
            metrics
                .epochs
                .push(epoch_metrics(epoch, episode, &rewards, &kls, &stats));
            rewards.clear();
            kls.clear();
            if stats.quality_score >= metrics.best_score {
                metrics.best_score = stats.quality_score;
                metrics.best_epoch = epoch;
                best = policy.clone();
            }
        }
    }
    Ok((best, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::vocab::toy_vocabulary;

    fn small_cfg(episodes: usize) -> TrainConfig {
        TrainConfig {
            episodes,
            eval_every: 50,
            eval_samples: 20,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn trajectory_steps() {
        assert_eq!(trajectory(&[4, 5], 10), vec![(START, 4), (4, 5), (5, STOP)]);
        assert_eq!(trajectory(&[4, 5], 2), vec![(START, 4), (4, 5)]);
        assert_eq!(trajectory(&[], 10), vec![(START, STOP)]);
    }

    #[test]
    fn zero_reward_leaves_logits_alone() {
        let init = PolicyTable::uniform(toy_vocabulary()).unwrap();
        let (out, metrics) =
            train_toy_policy(&init, &ToyTask::default(), |_| 0.0, &small_cfg(200)).unwrap();
        let drift = out
            .logits
            .iter()
            .flatten()
            .zip(init.logits.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-12, "{drift}");
        assert!(metrics.epochs.iter().all(|e| e.mean_reward == 0.0));
    }

    #[test]
    fn training_is_deterministic() {
        let init = PolicyTable::uniform(toy_vocabulary()).unwrap();
        let scheme = RewardScheme::individual(Property::HasAssertion).unwrap();
        let f = analyzer_reward(scheme, "Stop".into());
        let a = train_toy_policy(&init, &ToyTask::default(), &f, &small_cfg(100)).unwrap();
        let b = train_toy_policy(&init, &ToyTask::default(), &f, &small_cfg(100)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rows_stay_distributions() {
        let init = PolicyTable::uniform(toy_vocabulary()).unwrap();
        let scheme = RewardScheme::individual(Property::HasAssertion).unwrap();
        let (out, _) = train_toy_policy(
            &init,
            &ToyTask::default(),
            analyzer_reward(scheme, "Stop".into()),
            &small_cfg(150),
        )
        .unwrap();
        for s in 0..out.size() {
            let row = out.probs(s);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(row.iter().all(|p| p.is_finite() && *p >= 0.0));
        }
        assert_eq!(out.reference, init.logits);
    }

    #[test]
    fn config_validation() {
        let bad = |c: TrainConfig| c.validate().is_err();
        assert!(bad(TrainConfig {
            epsilon: 0.0,
            ..Default::default()
        }));
        assert!(bad(TrainConfig {
            epsilon: 1.0,
            ..Default::default()
        }));
        assert!(bad(TrainConfig {
            beta: -0.1,
            ..Default::default()
        }));
        assert!(bad(TrainConfig {
            temperature: 0.0,
            ..Default::default()
        }));
        assert!(bad(TrainConfig {
            top_p: 0.0,
            ..Default::default()
        }));
        assert!(TrainConfig::default().validate().is_ok());
    }
}
