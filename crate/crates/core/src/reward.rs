//! Reward assignment from quality reports and class-balanced resampling of
//! reward-model data.

use serde::{Deserialize, Serialize};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curation::CorpusRecord;
use crate::error::RewardError;
use crate::quality::{analyze, Property, QualityReport, ScoreConfig};

pub const SYNTAX_PENALTY: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Rewarded when present.
    Positive,
    /// Rewarded when absent.
    Negative,
}

impl Polarity {
    pub fn of(property: Property) -> Polarity {
        if property.is_smell() {
            Polarity::Negative
        } else {
            Polarity::Positive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Individual,
    Combined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardScheme {
    pub properties: Vec<Property>,
    pub strategy: Strategy,
}

impl RewardScheme {
    pub fn new(properties: Vec<Property>, strategy: Strategy) -> Result<Self, RewardError> {
        let scheme = RewardScheme {
            properties,
            strategy,
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn individual(property: Property) -> Result<Self, RewardError> {
        RewardScheme::new(vec![property], Strategy::Individual)
    }

    pub fn combined(properties: &[Property]) -> Result<Self, RewardError> {
        RewardScheme::new(properties.to_vec(), Strategy::Combined)
    }

    pub fn k(&self) -> usize {
        self.properties.len()
    }

    /// Corpus score over exactly the rewarded properties, split by polarity.
    pub fn score_config(&self) -> ScoreConfig {
        let (smells, positives) = self.properties.iter().partition(|p| p.is_smell());
        ScoreConfig { positives, smells }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        if self.properties.is_empty() {
            return Err(RewardError::InvalidScheme(
                "at least one property is required".into(),
            ));
        }
        if self.strategy == Strategy::Individual && self.properties.len() != 1 {
            return Err(RewardError::InvalidScheme(format!(
                "individual strategy takes exactly one property, got {}",
                self.properties.len()
            )));
        }
        if self.properties.contains(&Property::CorrectSyntax) {
            return Err(RewardError::InvalidScheme(
                "correct_syntax gates every reward and cannot be a rewarded property".into(),
            ));
        }
        for (i, p) in self.properties.iter().enumerate() {
            if self.properties[..i].contains(p) {
                return Err(RewardError::InvalidScheme(format!(
                    "duplicate property {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Presence for positive properties, absence for smells.
pub fn property_satisfied(report: &QualityReport, property: Property) -> bool {
    match Polarity::of(property) {
        Polarity::Positive => report.get(property),
        Polarity::Negative => !report.get(property),
    }
}

/// Reward for the scheme's single property: −1, 0 or 1.
pub fn individual_reward(report: &QualityReport, scheme: &RewardScheme) -> i32 {
    debug_assert_eq!(scheme.strategy, Strategy::Individual);
    if !report.correct_syntax {
        return SYNTAX_PENALTY;
    }
    scheme
        .properties
        .first()
        .map_or(0, |&p| property_satisfied(report, p) as i32)
}

/// −1 on incorrect syntax, otherwise the number of satisfied properties.
pub fn combined_reward(report: &QualityReport, scheme: &RewardScheme) -> i32 {
    if !report.correct_syntax {
        return SYNTAX_PENALTY;
    }
    scheme
        .properties
        .iter()
        .filter(|&&p| property_satisfied(report, p))
        .count() as i32
}

pub fn reward(report: &QualityReport, scheme: &RewardScheme) -> i32 {
    match scheme.strategy {
        Strategy::Individual => individual_reward(report, scheme),
        Strategy::Combined => combined_reward(report, scheme),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub record: CorpusRecord,
    pub report: QualityReport,
    pub reward: i32,
}

pub fn label_record(record: &CorpusRecord, scheme: &RewardScheme) -> LabeledRecord {
    let report = analyze(&record.test, &record.focal_method);
    LabeledRecord {
        reward: reward(&report, scheme),
        record: record.clone(),
        report,
    }
}

pub fn label_dataset(records: &[CorpusRecord], scheme: &RewardScheme) -> Vec<LabeledRecord> {
    records.iter().map(|r| label_record(r, scheme)).collect()
}

/// Reward value separating the low and high classes: the upper median of
/// non-negative rewards, moved up to the next distinct value when nothing
/// lies below it. With rewards in {0, 1} this is always 1.
pub fn class_threshold(rewards: &[i32]) -> Option<i32> {
    let mut values: Vec<i32> = rewards.iter().copied().filter(|&r| r >= 0).collect();
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let median = values[values.len() / 2];
    if values[0] < median {
        return Some(median);
    }
    values.into_iter().find(|&v| v > median)
}

/// Sizes `(low, high, negative)` the resampler will produce.
pub fn balanced_sizes(low: usize, high: usize, negative: usize) -> (usize, usize, usize) {
    let d = low.min(high);
    (d, d, negative.min(2 * d))
}

/// Takes `d = min(|low|, |high|)` from both reward classes and up to `2d`
/// syntax-error records, uniformly without replacement. Output is grouped
/// low, high, negative; each group keeps input order.
pub fn resample_balanced(
    labeled: &[LabeledRecord],
    seed: u64,
) -> Result<Vec<LabeledRecord>, RewardError> {
    let rewards: Vec<i32> = labeled.iter().map(|l| l.reward).collect();
    let threshold = class_threshold(&rewards).ok_or_else(|| {
        RewardError::InsufficientData("need records in two non-negative reward classes".into())
    })?;
    let mut low = Vec::new();
    let mut high = Vec::new();
    let mut negative = Vec::new();
    for (i, &r) in rewards.iter().enumerate() {
        match r {
            r if r < 0 => negative.push(i),
            r if r < threshold => low.push(i),
            _ => high.push(i),
        }
    }
    if low.is_empty() || high.is_empty() {
        return Err(RewardError::InsufficientData(format!(
            "low class has {} records, high class has {}",
            low.len(),
            high.len()
        )));
    }
    let (n_low, n_high, n_neg) = balanced_sizes(low.len(), high.len(), negative.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_low + n_high + n_neg);
    for (class, n) in [(&low, n_low), (&high, n_high), (&negative, n_neg)] {
        let mut picked = index::sample(&mut rng, class.len(), n).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|j| labeled[class[j]].clone()));
    }
    Ok(out)
}
