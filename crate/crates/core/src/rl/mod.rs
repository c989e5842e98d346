//! Training mathematics and a toy PPO loop over a tabular bigram policy.

pub mod math;
pub mod policy;
pub mod reward_model;
pub mod sampling;
pub mod trainer;
pub mod vocab;

pub use math::{
    clipped_surrogate, cross_entropy_loss, kl_divergence, kl_penalized_reward, mse_grad, mse_loss,
    softmax, surrogate_grad_logits, surrogate_grad_ratio, TrajectoryStep,
};
pub use policy::{PolicyTable, START, STOP};
pub use reward_model::{train_reward_model, LinearRewardModel, RewardModelReport};
pub use sampling::{sample_completion, sample_with_rng, SamplingParams};
pub use trainer::{
    analyzer_reward, evaluate_policy, train_toy_policy, EpochMetrics, TrainConfig, TrainingMetrics,
};
pub use vocab::{toy_vocabulary, ToyTask, TOY_TOKENS};
