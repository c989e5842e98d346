//! Flat key/value pipeline settings.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;
use testqual_core::rl::TrainConfig;
use testqual_core::{BudgetConfig, Property, RewardScheme, ScoreConfig, SplitSpec, Strategy};

/// Every key is optional; missing keys keep the library defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,

    pub prompt_token_budget: Option<usize>,
    pub completion_token_budget: Option<usize>,
    pub chars_per_token: Option<usize>,
    pub context_window: Option<usize>,

    pub test_fraction: Option<f64>,
    pub val_fraction: Option<f64>,
    pub rl_three_way: Option<bool>,

    pub reward_strategy: Option<Strategy>,
    pub reward_properties: Option<Vec<String>>,

    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub learning_rate: Option<f64>,
    pub episodes: Option<usize>,
    pub max_tokens: Option<usize>,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub frequency_penalty: Option<f64>,
    pub ppo_epochs: Option<usize>,
    pub baseline_decay: Option<f64>,
    pub eval_every: Option<usize>,
    pub eval_samples: Option<usize>,
    pub kl_full_state: Option<bool>,
    pub focal_method: Option<String>,

    pub rm_epochs: Option<usize>,
    pub rm_learning_rate: Option<f64>,

    pub score_positives: Option<Vec<String>>,
    pub score_smells: Option<Vec<String>>,
}

fn properties(names: &[String]) -> Result<Vec<Property>> {
    names
        .iter()
        .map(|n| n.parse::<Property>().map_err(anyhow::Error::msg))
        .collect()
}

/// `individual:<p>` or `combined:<p>,<p>,...`.
pub fn parse_scheme(text: &str) -> Result<RewardScheme> {
    let (strategy, list) = text
        .split_once(':')
        .with_context(|| format!("scheme `{text}` is not `strategy:properties`"))?;
    let strategy = match strategy.trim() {
        "individual" => Strategy::Individual,
        "combined" => Strategy::Combined,
        other => anyhow::bail!("unknown strategy `{other}`"),
    };
    let names: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
    Ok(RewardScheme::new(properties(&names)?, strategy)?)
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(PipelineConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn budget(&self) -> BudgetConfig {
        let d = BudgetConfig::default();
        BudgetConfig {
            prompt_token_budget: self.prompt_token_budget.unwrap_or(d.prompt_token_budget),
            completion_token_budget: self
                .completion_token_budget
                .unwrap_or(d.completion_token_budget),
            chars_per_token: self.chars_per_token.unwrap_or(d.chars_per_token),
            context_window: self.context_window.unwrap_or(d.context_window),
        }
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        let d = SplitSpec::default();
        SplitSpec {
            test_fraction: self.test_fraction.unwrap_or(d.test_fraction),
            val_fraction: self.val_fraction.unwrap_or(d.val_fraction),
            rl_three_way: self.rl_three_way.unwrap_or(d.rl_three_way),
            seed,
        }
    }

    /// The flag wins over the config; no scheme at all is an error.
    pub fn scheme(&self, flag: Option<&str>) -> Result<RewardScheme> {
        if let Some(text) = flag {
            return parse_scheme(text);
        }
        match (&self.reward_strategy, &self.reward_properties) {
            (Some(strategy), Some(names)) => Ok(RewardScheme::new(properties(names)?, *strategy)?),
            _ => anyhow::bail!(
                "no reward scheme: pass --scheme or set reward_strategy and reward_properties"
            ),
        }
    }

    pub fn score(&self) -> Result<ScoreConfig> {
        let d = ScoreConfig::default();
        Ok(ScoreConfig {
            positives: match &self.score_positives {
                Some(names) => properties(names)?,
                None => d.positives,
            },
            smells: match &self.score_smells {
                Some(names) => properties(names)?,
                None => d.smells,
            },
        })
    }

    pub fn score_is_set(&self) -> bool {
        self.score_positives.is_some() || self.score_smells.is_some()
    }

    pub fn train(&self, seed: u64) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        Ok(TrainConfig {
            beta: self.beta.unwrap_or(d.beta),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            episodes: self.episodes.unwrap_or(d.episodes),
            max_tokens: self.max_tokens.unwrap_or(d.max_tokens),
            temperature: self.temperature.unwrap_or(d.temperature),
            top_p: self.top_p.unwrap_or(d.top_p),
            frequency_penalty: self.frequency_penalty.unwrap_or(d.frequency_penalty),
            seed,
            ppo_epochs: self.ppo_epochs.unwrap_or(d.ppo_epochs),
            baseline_decay: self.baseline_decay.unwrap_or(d.baseline_decay),
            eval_every: self.eval_every.unwrap_or(d.eval_every),
            eval_samples: self.eval_samples.unwrap_or(d.eval_samples),
            kl_full_state: self.kl_full_state.unwrap_or(d.kl_full_state),
            checkpoint: self.score()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_strings() {
        let s = parse_scheme("individual:assertion").unwrap();
        assert_eq!(s.properties, vec![Property::HasAssertion]);
        let s = parse_scheme("combined: has_assertion, cond").unwrap();
        assert_eq!(s.strategy, Strategy::Combined);
        assert_eq!(s.k(), 2);
        assert!(parse_scheme("individual:assertion,focal").is_err());
        assert!(parse_scheme("sequential:focal").is_err());
        assert!(parse_scheme("assertion").is_err());
    }

    #[test]
    fn flat_config_overrides_defaults() {
        let cfg: PipelineConfig = toml::from_str(
            "beta = 0.1\nprompt_token_budget = 100\nreward_strategy = \"combined\"\nreward_properties = [\"focal\", \"dup\"]\nscore_smells = []",
        )
        .unwrap();
        assert_eq!(cfg.train(3).unwrap().beta, 0.1);
        assert_eq!(cfg.train(3).unwrap().seed, 3);
        assert_eq!(cfg.budget().prompt_token_budget, 100);
        assert_eq!(cfg.scheme(None).unwrap().k(), 2);
        assert!(cfg.score().unwrap().smells.is_empty());
        assert!(toml::from_str::<PipelineConfig>("betta = 1.0").is_err());
    }
}
