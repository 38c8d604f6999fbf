//! Training-set assembly with uniform and hard negatives.
//!
//! Every skill keeps all of its positives and receives `k` negatives per
//! positive. A fraction of the negatives is drawn from sentences of related
//! skills (one pool per enabled strategy), the rest uniformly from every other
//! skill's positives. Sentences that are themselves positives of the target
//! skill never enter a negative pool.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io;
use crate::matcher::PositiveSets;
use crate::related::{RelatedIndex, Strategy};
use crate::seed;
use crate::taxonomy::SkillId;

pub const DEFAULT_NEGATIVES_PER_POSITIVE: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingConfig {
    pub negatives_per_positive: usize,
    pub hard_fraction: f64,
    pub enabled_strategies: BTreeSet<Strategy>,
    /// Relative share of the hard budget per strategy. Missing means equal shares.
    pub strategy_weights: Option<BTreeMap<Strategy, f64>>,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            negatives_per_positive: DEFAULT_NEGATIVES_PER_POSITIVE,
            hard_fraction: 0.0,
            enabled_strategies: BTreeSet::new(),
            strategy_weights: None,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn baseline(seed: u64) -> Self {
        SamplingConfig {
            seed,
            ..Self::default()
        }
    }

    pub fn hard(fraction: f64, strategies: impl IntoIterator<Item = Strategy>, seed: u64) -> Self {
        SamplingConfig {
            hard_fraction: fraction,
            enabled_strategies: strategies.into_iter().collect(),
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.negatives_per_positive == 0 {
            return Err(Error::InvalidConfig("negatives per positive must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.hard_fraction) {
            return Err(Error::InvalidConfig(format!(
                "hard fraction {} is outside [0, 1]",
                self.hard_fraction
            )));
        }
        if self.hard_fraction > 0.0 && self.enabled_strategies.is_empty() {
            return Err(Error::InvalidConfig(
                "a positive hard fraction needs at least one strategy".into(),
            ));
        }
        if let Some(w) = &self.strategy_weights {
            let enabled: Vec<f64> = self
                .enabled_strategies
                .iter()
                .map(|s| w.get(s).copied().unwrap_or(0.0))
                .collect();
            if enabled.iter().any(|&x| !x.is_finite() || x < 0.0)
                || (self.hard_fraction > 0.0 && enabled.iter().sum::<f64>() <= 0.0)
            {
                return Err(Error::InvalidConfig(
                    "strategy weights must be non-negative with a positive sum".into(),
                ));
            }
        }
        Ok(())
    }

    /// Split a hard budget over the enabled strategies.
    ///
    /// Equal shares by default; the remainder goes one unit at a time to the
    /// strategies in the order siblings, levenshtein, embedding.
    pub fn split_hard_budget(&self, budget: usize) -> Vec<(Strategy, usize)> {
        let strategies: Vec<Strategy> = self.enabled_strategies.iter().copied().collect();
        if strategies.is_empty() {
            return Vec::new();
        }
        let weights: Vec<f64> = match &self.strategy_weights {
            None => vec![1.0; strategies.len()],
            Some(w) => strategies.iter().map(|s| w.get(s).copied().unwrap_or(0.0)).collect(),
        };
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return strategies.into_iter().map(|s| (s, 0)).collect();
        }
        let exact: Vec<f64> = weights.iter().map(|w| budget as f64 * w / total).collect();
        let mut shares: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut left = budget - shares.iter().sum::<usize>();
        // largest fractional part first; canonical order among equals
        let mut order: Vec<usize> = (0..strategies.len()).filter(|&i| weights[i] > 0.0).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            shares[i] += 1;
            left -= 1;
        }
        strategies.into_iter().zip(shares).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Provenance {
    /// Negatives drawn from the uniform pool, including hard fallback.
    pub uniform: usize,
    /// Part of `uniform` that replaced an exhausted hard pool.
    pub fallback: usize,
    pub hard: BTreeMap<Strategy, usize>,
}

impl Provenance {
    pub fn total(&self) -> usize {
        self.uniform + self.hard.values().sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrainingSet {
    pub skill: SkillId,
    pub positive_ids: Vec<String>,
    /// May repeat ids once a pool is exhausted.
    pub negative_ids: Vec<String>,
    pub provenance: Provenance,
}

/// Preprocessed positive sets and related indices, shared across skills.
#[derive(Debug)]
pub struct Sampler<'a> {
    /// Sentence ids in ascending order; positions are the interned ids.
    sentences: Vec<&'a str>,
    skills: BTreeMap<&'a str, Vec<u32>>,
    indices: BTreeMap<Strategy, &'a RelatedIndex>,
}

impl<'a> Sampler<'a> {
    pub fn new(positives: &'a PositiveSets, indices: &'a [RelatedIndex]) -> Self {
        let all: BTreeSet<&str> = positives
            .sets
            .values()
            .flat_map(|ids| ids.iter().map(String::as_str))
            .collect();
        let sentences: Vec<&str> = all.into_iter().collect();
        let skills = positives
            .sets
            .iter()
            .map(|(skill, ids)| {
                let interned = ids
                    .iter()
                    .map(|id| sentences.binary_search(&id.as_str()).unwrap() as u32)
                    .collect();
                (skill.as_str(), interned)
            })
            .collect();
        let indices = indices.iter().map(|i| (i.strategy, i)).collect();
        Sampler {
            sentences,
            skills,
            indices,
        }
    }

    /// Number of distinct sentences across all positive sets.
    pub fn pool_size(&self) -> usize {
        self.sentences.len()
    }

    fn hard_pool(&self, skill: &str, strategy: Strategy, own: &[u32]) -> Vec<u32> {
        let index = self.indices[&strategy];
        let mut pool: Vec<u32> = index
            .neighbors(skill)
            .iter()
            .filter(|n| n.as_str() != skill)
            .filter_map(|n| self.skills.get(n.as_str()))
            .flatten()
            .copied()
            .collect();
        pool.sort_unstable();
        pool.dedup();
        pool.retain(|x| own.binary_search(x).is_err());
        pool
    }

    pub fn sample(&self, skill: &str, config: &SamplingConfig) -> Result<TrainingSet> {
        config.validate()?;
        let own = self
            .skills
            .get(skill)
            .ok_or_else(|| Error::UnknownSkill(skill.to_string()))?;
        if config.hard_fraction > 0.0 {
            if let Some(s) = config.enabled_strategies.iter().find(|s| !self.indices.contains_key(s)) {
                return Err(Error::InvalidConfig(format!("no related index for strategy {s}")));
            }
        }

        let n_neg = config.negatives_per_positive * own.len();
        let hard_budget = ((config.hard_fraction * n_neg as f64).round() as usize).min(n_neg);
        let mut rng = seed::rng_for(config.seed, "negatives", skill);
        let mut negatives: Vec<u32> = Vec::with_capacity(n_neg);
        let mut provenance = Provenance::default();

        for (strategy, budget) in config.split_hard_budget(hard_budget) {
            if budget == 0 {
                provenance.hard.insert(strategy, 0);
                continue;
            }
            let pool = self.hard_pool(skill, strategy, own);
            let take = budget.min(pool.len());
            if take > 0 {
                negatives.extend(index::sample(&mut rng, pool.len(), take).into_iter().map(|i| pool[i]));
            }
            provenance.hard.insert(strategy, take);
            provenance.fallback += budget - take;
        }

        let uniform_needed = n_neg - negatives.len();
        let uniform = Excluding::new(self.sentences.len(), own);
        if uniform_needed > 0 {
            if uniform.len() == 0 {
                return Err(Error::EmptyUniformPool(skill.to_string()));
            }
            draw(&mut rng, &uniform, uniform_needed, &mut negatives);
        }
        provenance.uniform = uniform_needed;

        Ok(TrainingSet {
            skill: SkillId::new(skill)?,
            positive_ids: own.iter().map(|&i| self.sentences[i as usize].to_string()).collect(),
            negative_ids: negatives
                .into_iter()
                .map(|i| self.sentences[i as usize].to_string())
                .collect(),
            provenance,
        })
    }
}

/// `0..n` with a sorted list of values removed, indexable without materializing.
struct Excluding<'a> {
    n: usize,
    excluded: &'a [u32],
}

impl<'a> Excluding<'a> {
    fn new(n: usize, excluded: &'a [u32]) -> Self {
        Excluding { n, excluded }
    }

    fn len(&self) -> usize {
        self.n - self.excluded.len()
    }

    /// The `i`-th surviving value.
    fn get(&self, i: usize) -> u32 {
        // e_j - j is non-decreasing; count the excluded values below the answer
        let mut lo = 0usize;
        let mut hi = self.excluded.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            if (self.excluded[mid] as usize) - mid <= i {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        (i + lo) as u32
    }
}

/// Without replacement while the pool suffices, then with replacement.
fn draw<R: Rng>(rng: &mut R, pool: &Excluding<'_>, n: usize, out: &mut Vec<u32>) {
    let m = pool.len();
    let distinct = n.min(m);
    out.extend(index::sample(rng, m, distinct).into_iter().map(|i| pool.get(i)));
    for _ in distinct..n {
        out.push(pool.get(rng.random_range(0..m)));
    }
}

/// Assemble one skill's training set. See [`Sampler`] for batch use.
pub fn sample_negatives(
    skill: &str,
    positives: &PositiveSets,
    indices: &[RelatedIndex],
    config: &SamplingConfig,
) -> Result<TrainingSet> {
    Sampler::new(positives, indices).sample(skill, config)
}

/// Audit dump of training sets, one JSON object per line.
pub fn write_training_sets(sets: &[TrainingSet], path: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Dump<'a> {
        skill_id: &'a SkillId,
        positives: &'a [String],
        negatives: &'a [String],
        provenance: &'a Provenance,
    }
    let mut w = io::create(path)?;
    for set in sets {
        let line = serde_json::to_string(&Dump {
            skill_id: &set.skill,
            positives: &set.positive_ids,
            negatives: &set.negative_ids,
            provenance: &set.provenance,
        })
        .unwrap();
        io::write_line(&mut w, path, &line)?;
    }
    io::finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn positives(layout: &[(&str, std::ops::Range<usize>)]) -> PositiveSets {
        let mut p = PositiveSets::default();
        for (skill, range) in layout {
            p.sets.insert(
                SkillId::new(*skill).unwrap(),
                range.clone().map(|i| format!("s{i:04}")).collect(),
            );
        }
        p
    }

    fn index(strategy: Strategy, pairs: &[(&str, &[&str])]) -> RelatedIndex {
        RelatedIndex {
            strategy,
            limit: None,
            neighbors: pairs
                .iter()
                .map(|(k, v)| {
                    (
                        SkillId::new(*k).unwrap(),
                        v.iter().map(|n| SkillId::new(*n).unwrap()).collect(),
                    )
                })
                .collect(),
        }
    }

    #[test]
    fn excluding_view_matches_materialized() {
        let excluded = [0u32, 3, 4, 9];
        let view = Excluding::new(10, &excluded);
        let expect: Vec<u32> = (0..10).filter(|x| !excluded.contains(x)).collect();
        let got: Vec<u32> = (0..view.len()).map(|i| view.get(i)).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn zero_fraction_needs_no_index() {
        let p = positives(&[("A", 0..3), ("B", 3..50)]);
        let cfg = SamplingConfig::hard(0.0, Strategy::ALL, 4);
        let set = sample_negatives("A", &p, &[], &cfg).unwrap();
        assert_eq!(set.negative_ids.len(), 30);
        assert_eq!(set.provenance.uniform, 30);
    }

    #[test]
    fn baseline_is_all_uniform() {
        let p = positives(&[("A", 0..3), ("B", 3..50), ("C", 50..60)]);
        let set = sample_negatives("A", &p, &[], &SamplingConfig::baseline(1)).unwrap();
        assert_eq!(set.negative_ids.len(), 30);
        assert_eq!(set.provenance.uniform, 30);
        assert_eq!(set.provenance.total(), 30);
        let own: HashSet<_> = set.positive_ids.iter().collect();
        assert!(set.negative_ids.iter().all(|n| !own.contains(n)));
        // enough pool: no repeats
        let distinct: HashSet<_> = set.negative_ids.iter().collect();
        assert_eq!(distinct.len(), 30);
    }

    #[test]
    fn empty_hard_pool_falls_back() {
        let p = positives(&[("A", 0..4), ("B", 4..100)]);
        let idx = [index(Strategy::Siblings, &[("A", &[])])];
        let cfg = SamplingConfig::hard(1.0, [Strategy::Siblings], 3);
        let set = sample_negatives("A", &p, &idx, &cfg).unwrap();
        assert_eq!(set.negative_ids.len(), 40);
        assert_eq!(set.provenance.hard[&Strategy::Siblings], 0);
        assert_eq!(set.provenance.fallback, 40);
        assert_eq!(set.provenance.uniform, 40);
    }

    #[test]
    fn budget_split_follows_remainder_rule() {
        let cfg = SamplingConfig::hard(0.05, Strategy::ALL, 0);
        assert_eq!(
            cfg.split_hard_budget(50),
            vec![
                (Strategy::Siblings, 17),
                (Strategy::Levenshtein, 17),
                (Strategy::Embedding, 16)
            ]
        );
        let two = SamplingConfig::hard(0.05, [Strategy::Levenshtein, Strategy::Embedding], 0);
        assert_eq!(
            two.split_hard_budget(5),
            vec![(Strategy::Levenshtein, 3), (Strategy::Embedding, 2)]
        );
        let mut weighted = cfg.clone();
        weighted.strategy_weights = Some(
            [
                (Strategy::Siblings, 2.0),
                (Strategy::Levenshtein, 1.0),
                (Strategy::Embedding, 1.0),
            ]
            .into_iter()
            .collect(),
        );
        assert_eq!(
            weighted.split_hard_budget(10),
            vec![
                (Strategy::Siblings, 5),
                (Strategy::Levenshtein, 3),
                (Strategy::Embedding, 2)
            ]
        );
    }

    #[test]
    fn combined_budget_on_large_pools() {
        let mut layout: Vec<(String, std::ops::Range<usize>)> = vec![("T".into(), 0..100)];
        for i in 0..20 {
            layout.push((format!("N{i:02}"), 100 + i * 100..200 + i * 100));
        }
        let layout_ref: Vec<(&str, std::ops::Range<usize>)> = layout.iter().map(|(s, r)| (s.as_str(), r.clone())).collect();
        let p = positives(&layout_ref);
        let idx = [
            index(Strategy::Siblings, &[("T", &["N00", "N01"])]),
            index(Strategy::Levenshtein, &[("T", &["N02"])]),
            index(Strategy::Embedding, &[("T", &["N03", "T"])]),
        ];
        let cfg = SamplingConfig::hard(0.05, Strategy::ALL, 11);
        let set = sample_negatives("T", &p, &idx, &cfg).unwrap();
        assert_eq!(set.negative_ids.len(), 1000);
        assert_eq!(set.provenance.hard[&Strategy::Siblings], 17);
        assert_eq!(set.provenance.hard[&Strategy::Levenshtein], 17);
        assert_eq!(set.provenance.hard[&Strategy::Embedding], 16);
        assert_eq!(set.provenance.uniform, 950);
        // first 17 come from the sibling pool
        let sib: HashSet<String> = (100..300).map(|i| format!("s{i:04}")).collect();
        assert!(set.negative_ids[..17].iter().all(|n| sib.contains(n)));
    }

    #[test]
    fn shared_sentences_never_become_negatives() {
        // B's sentences overlap A's; the overlap must be excluded
        let mut p = positives(&[("A", 0..10), ("B", 5..12)]);
        p.sets.insert(SkillId::new("C").unwrap(), ["s0003".to_string()].into());
        let idx = [index(Strategy::Siblings, &[("A", &["B", "C"])])];
        let cfg = SamplingConfig::hard(0.5, [Strategy::Siblings], 5);
        let set = sample_negatives("A", &p, &idx, &cfg).unwrap();
        assert_eq!(set.negative_ids.len(), 100);
        assert!(set.negative_ids.iter().all(|n| n == "s0010" || n == "s0011"));
        assert_eq!(set.provenance.hard[&Strategy::Siblings], 2);
        assert_eq!(set.provenance.fallback, 48);
    }

    #[test]
    fn errors() {
        let p = positives(&[("A", 0..3)]);
        assert!(matches!(
            sample_negatives("A", &p, &[], &SamplingConfig::baseline(0)),
            Err(Error::EmptyUniformPool(_))
        ));
        assert!(matches!(
            sample_negatives("Z", &p, &[], &SamplingConfig::baseline(0)),
            Err(Error::UnknownSkill(_))
        ));
        let cfg = SamplingConfig::hard(0.1, [Strategy::Embedding], 0);
        assert!(matches!(
            sample_negatives("A", &p, &[], &cfg),
            Err(Error::InvalidConfig(_))
        ));
        let bad = SamplingConfig::hard(1.5, [Strategy::Siblings], 0);
        assert!(bad.validate().is_err());
        assert!(SamplingConfig::hard(0.1, [], 0).validate().is_err());
        let mut zero_k = SamplingConfig::baseline(0);
        zero_k.negatives_per_positive = 0;
        assert!(zero_k.validate().is_err());
    }

    #[test]
    fn deterministic_per_skill() {
        let p = positives(&[("A", 0..5), ("B", 5..40), ("C", 40..41)]);
        let cfg = SamplingConfig::baseline(9);
        let s = Sampler::new(&p, &[]);
        let a1 = s.sample("A", &cfg).unwrap();
        let _ = s.sample("B", &cfg).unwrap();
        let a2 = s.sample("A", &cfg).unwrap();
        assert_eq!(a1, a2);
        let other = s.sample("A", &SamplingConfig::baseline(10)).unwrap();
        assert_ne!(a1.negative_ids, other.negative_ids);
    }

    #[test]
    fn small_pool_uses_replacement() {
        let p = positives(&[("A", 0..5), ("B", 5..7)]);
        let set = sample_negatives("A", &p, &[], &SamplingConfig::baseline(2)).unwrap();
        assert_eq!(set.negative_ids.len(), 50);
        let distinct: HashSet<_> = set.negative_ids.iter().collect();
        assert_eq!(distinct.len(), 2);
    }
}
