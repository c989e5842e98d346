//! Golden-set filtering, deduplication, repository-disjoint splits and
//! subsampling.

use std::collections::{BTreeMap, HashSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CurationError;
use crate::quality::analyze;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordSource {
    #[default]
    Generated,
    Human,
}

/// One prompt/test pair with its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub repo: String,
    pub focal_class: String,
    pub focal_method: String,
    pub prompt: String,
    pub test: String,
    #[serde(default)]
    pub source: RecordSource,
}

pub fn is_golden_record(record: &CorpusRecord) -> bool {
    analyze(&record.test, &record.focal_method).is_golden()
}

/// Keeps records whose test re-analyzes as golden.
pub fn filter_golden(records: &[CorpusRecord]) -> Vec<CorpusRecord> {
    records
        .iter()
        .filter(|r| is_golden_record(r))
        .cloned()
        .collect()
}

/// Stable, first occurrence wins, keyed on `(prompt, test)`.
pub fn dedupe(records: &[CorpusRecord]) -> Vec<CorpusRecord> {
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert((r.prompt.as_str(), r.test.as_str())))
        .cloned()
        .collect()
}

/// Uniform sample of `min(n, len)` records without replacement. Input order
/// is kept among the chosen records.
pub fn subsample<T: Clone>(records: &[T], n: usize, seed: u64) -> Vec<T> {
    let amount = n.min(records.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, records.len(), amount).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| records[i].clone()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Sft,
    Rm,
    Pm,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Sft => "sft",
            SplitName::Rm => "rm",
            SplitName::Pm => "pm",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

impl std::fmt::Display for SplitName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub val_fraction: f64,
    /// Partition the training share into three repo-disjoint parts
    /// (sft, rm, pm).
    pub rl_three_way: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 0.05,
            val_fraction: 0.10,
            rl_three_way: false,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CurationError> {
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(self.test_fraction) || !ok(self.val_fraction) {
            return Err(CurationError::InvalidSplit(
                "fractions must lie in (0, 1)".into(),
            ));
        }
        if self.test_fraction + self.val_fraction >= 1.0 {
            return Err(CurationError::InvalidSplit(
                "test and validation fractions must sum below 1".into(),
            ));
        }
        Ok(())
    }

    pub fn min_repos(&self) -> usize {
        if self.rl_three_way {
            5
        } else {
            3
        }
    }

    /// Target mass per split, in split order.
    pub fn targets(&self) -> Vec<(SplitName, f64)> {
        let train = 1.0 - self.test_fraction - self.val_fraction;
        let mut out = if self.rl_three_way {
            vec![
                (SplitName::Sft, train / 3.0),
                (SplitName::Rm, train / 3.0),
                (SplitName::Pm, train / 3.0),
            ]
        } else {
            vec![(SplitName::Train, train)]
        };
        out.push((SplitName::Val, self.val_fraction));
        out.push((SplitName::Test, self.test_fraction));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub total_records: usize,
    pub assignments: BTreeMap<String, SplitName>,
    pub counts: BTreeMap<SplitName, usize>,
    pub targets: BTreeMap<SplitName, f64>,
    pub fractions: BTreeMap<SplitName, f64>,
    /// `|fraction - target|` per split.
    pub deviations: BTreeMap<SplitName, f64>,
    /// Share of the largest repository; bounds the achievable deviation.
    pub largest_repo_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub parts: BTreeMap<SplitName, Vec<CorpusRecord>>,
    pub manifest: SplitManifest,
}

impl Splits {
    pub fn get(&self, name: SplitName) -> &[CorpusRecord] {
        self.parts.get(&name).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Greedy packing of whole repositories toward the target fractions.
///
/// Repositories are shuffled with the seed, then stable-sorted by record
/// count, largest first; each goes to the split with the largest remaining
/// deficit. Once the repositories left are only just enough to give every
/// still-empty split one, they are forced into those splits.
pub fn split_by_repository(
    records: &[CorpusRecord],
    spec: &SplitSpec,
) -> Result<Splits, CurationError> {
    spec.validate()?;
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *sizes.entry(r.repo.as_str()).or_default() += 1;
    }
    if sizes.len() < spec.min_repos() {
        return Err(CurationError::TooFewRepos {
            needed: spec.min_repos(),
            found: sizes.len(),
        });
    }

    let mut repos: Vec<(&str, usize)> = sizes.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    repos.shuffle(&mut rng);
    repos.sort_by_key(|r| std::cmp::Reverse(r.1));

    let total = records.len();
    let targets = spec.targets();
    let mut filled = vec![0usize; targets.len()];
    let mut repo_counts = vec![0usize; targets.len()];
    let mut assignments: BTreeMap<String, SplitName> = BTreeMap::new();

    for (i, &(repo, size)) in repos.iter().enumerate() {
        let remaining = repos.len() - i;
        let empty: Vec<usize> = (0..targets.len())
            .filter(|&s| repo_counts[s] == 0)
            .collect();
        let deficit = |s: usize| targets[s].1 * total as f64 - filled[s] as f64;
        let candidates: Vec<usize> = if remaining <= empty.len() {
            empty
        } else {
            (0..targets.len()).collect()
        };
        let mut best = candidates[0];
        for &s in &candidates[1..] {
            if deficit(s) > deficit(best) {
                best = s;
            }
        }
        filled[best] += size;
        repo_counts[best] += 1;
        assignments.insert(repo.to_string(), targets[best].0);
    }

    let mut parts: BTreeMap<SplitName, Vec<CorpusRecord>> =
        targets.iter().map(|(n, _)| (*n, Vec::new())).collect();
    for r in records {
        parts
            .get_mut(&assignments[&r.repo])
            .expect("every split is present")
            .push(r.clone());
    }

    let frac = |n: usize| {
        if total == 0 {
            0.0
        } else {
            n as f64 / total as f64
        }
    };
    let counts: BTreeMap<SplitName, usize> = parts.iter().map(|(n, v)| (*n, v.len())).collect();
    let fractions: BTreeMap<SplitName, f64> = counts.iter().map(|(n, c)| (*n, frac(*c))).collect();
    let target_map: BTreeMap<SplitName, f64> = targets.iter().copied().collect();
    let deviations = fractions
        .iter()
        .map(|(n, f)| (*n, (f - target_map[n]).abs()))
        .collect();
    let largest_repo_share = frac(repos.first().map(|r| r.1).unwrap_or(0));

    Ok(Splits {
        parts,
        manifest: SplitManifest {
            seed: spec.seed,
            total_records: total,
            assignments,
            counts,
            targets: target_map,
            fractions,
            deviations,
            largest_repo_share,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GOOD: &str = "[TestMethod]\npublic void TestStop()\n{\n\tvar c = new Cmd();\n\tc.Stop();\n\tAssert.IsTrue(c.IsStopped());\n}";

    fn rec(repo: &str, prompt: &str, test: &str) -> CorpusRecord {
        CorpusRecord {
            repo: repo.into(),
            focal_class: "Cmd".into(),
            focal_method: "Stop".into(),
            prompt: prompt.into(),
            test: test.into(),
            source: RecordSource::Generated,
        }
    }

    #[test]
    fn golden_filter_examples() {
        let no_assert = "[TestMethod]\npublic void TestStop()\n{\n\tnew Cmd().Stop();\n}";
        let try_catch = "[TestMethod]\npublic void TestStop()\n{\n\ttry { new Cmd().Stop(); } catch { }\n\tAssert.IsTrue(true);\n}";
        let records = vec![
            rec("r", "p", GOOD),
            rec("r", "p", no_assert),
            rec("r", "p", try_catch),
        ];
        let kept = filter_golden(&records);
        assert_eq!(kept, vec![records[0].clone()]);
    }

    #[test]
    fn dedupe_examples() {
        let a = rec("r", "p", "t");
        assert_eq!(dedupe(&[a.clone(), a.clone()]).len(), 1);
        assert_eq!(dedupe(&[a.clone(), rec("r", "p", "u")]).len(), 2);
        assert_eq!(dedupe(&[a.clone(), rec("r", "q", "t")]).len(), 2);
        // metadata is not part of the key
        assert_eq!(dedupe(&[a.clone(), rec("other", "p", "t")]), vec![a]);
    }

    #[test]
    fn subsample_examples() {
        let xs: Vec<u32> = (0..100).collect();
        let s = subsample(&xs, 10, 3);
        assert_eq!(s.len(), 10);
        assert_eq!(s, subsample(&xs, 10, 3));
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample(&xs, 500, 3), xs);
        assert!(subsample(&xs, 0, 3).is_empty());
    }

    #[test]
    fn split_three_equal_repos() {
        let records: Vec<_> = ["a", "b", "c"]
            .iter()
            .flat_map(|r| (0..10).map(move |i| rec(r, &i.to_string(), "t")))
            .collect();
        let splits = split_by_repository(&records, &SplitSpec::default()).unwrap();
        for name in [SplitName::Train, SplitName::Val, SplitName::Test] {
            assert_eq!(splits.get(name).len(), 10, "{name}");
        }
    }

    #[test]
    fn split_rejects_too_few_repos() {
        let records = vec![rec("a", "p", "t")];
        assert_eq!(
            split_by_repository(&records, &SplitSpec::default()),
            Err(CurationError::TooFewRepos {
                needed: 3,
                found: 1
            })
        );
        let four: Vec<_> = ["a", "b", "c", "d"]
            .iter()
            .map(|r| rec(r, "p", "t"))
            .collect();
        let spec = SplitSpec {
            rl_three_way: true,
            ..SplitSpec::default()
        };
        assert!(matches!(
            split_by_repository(&four, &spec),
            Err(CurationError::TooFewRepos {
                needed: 5,
                found: 4
            })
        ));
    }

    #[test]
    fn split_twenty_repos_near_target() {
        let records: Vec<_> = (0..20)
            .flat_map(|r| (0..50).map(move |i| rec(&format!("repo{r}"), &i.to_string(), "t")))
            .collect();
        let splits = split_by_repository(&records, &SplitSpec::default()).unwrap();
        let m = &splits.manifest;
        assert!((m.fractions[&SplitName::Test] - 0.05).abs() <= m.largest_repo_share.max(0.05));
        assert_eq!(m.counts.values().sum::<usize>(), 1000);
    }

    #[test]
    fn invalid_fractions() {
        let spec = SplitSpec {
            test_fraction: 0.6,
            val_fraction: 0.5,
            ..SplitSpec::default()
        };
        assert!(matches!(
            spec.validate(),
            Err(CurationError::InvalidSplit(_))
        ));
    }

    fn corpus() -> impl Strategy<Value = Vec<CorpusRecord>> {
        prop::collection::vec((0usize..12, 0usize..6), 1..200).prop_map(|pairs| {
            pairs
                .into_iter()
                .map(|(repo, p)| rec(&format!("r{repo}"), &p.to_string(), "t"))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn splits_are_repo_disjoint(records in corpus(), seed in 0u64..50, three in any::<bool>()) {
            let spec = SplitSpec { seed, rl_three_way: three, ..SplitSpec::default() };
            let repos: HashSet<&str> = records.iter().map(|r| r.repo.as_str()).collect();
            match split_by_repository(&records, &spec) {
                Ok(s) => {
                    let mut owner: BTreeMap<&str, SplitName> = BTreeMap::new();
                    for (name, part) in &s.parts {
                        for r in part {
                            let prev = owner.insert(r.repo.as_str(), *name);
                            prop_assert!(prev.is_none() || prev == Some(*name));
                        }
                    }
                    prop_assert_eq!(s.parts.values().map(Vec::len).sum::<usize>(), records.len());
                    prop_assert!(s.parts.values().all(|p| !p.is_empty()));
                    prop_assert_eq!(split_by_repository(&records, &spec).unwrap(), s);
                }
                Err(CurationError::TooFewRepos { found, .. }) => prop_assert_eq!(found, repos.len()),
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }

        #[test]
        fn dedupe_idempotent(records in corpus()) {
            let once = dedupe(&records);
            prop_assert_eq!(dedupe(&once), once);
        }
    }
}
