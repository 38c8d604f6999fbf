//! Synthetic taxonomy, corpus and benchmark with a known structure.
//!
//! Skills come in families (siblings under one parent) and, independently, in
//! domains that cut across families. Training sentences mention the skill name
//! literally; benchmark sentences never do and must be recognised from
//! signature words amid context. Sibling names share a head word. Family and
//! domain words co-occur with every skill of the family or domain and act as
//! confusers; benchmark sentences also carry words of one unrelated family.

use std::collections::{BTreeSet, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::evaluation::{Dataset, GoldSentence, Split};
use crate::matcher::Sentence;
use crate::seed;
use crate::taxonomy::{Skill, SkillId, Taxonomy};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub families: usize,
    pub family_size: usize,
    pub domains: usize,
    pub signature_size: usize,
    pub family_confusers: usize,
    pub domain_confusers: usize,
    /// Positives per skill are drawn log-uniformly from this range.
    pub train_per_skill: (usize, usize),
    pub test_per_skill: usize,
    pub train_signature_words: usize,
    pub test_signature_words: usize,
    pub test_family_words: usize,
    pub test_domain_words: usize,
    /// Confusers from one other, randomly chosen family.
    pub test_foreign_words: usize,
    /// Chance that a benchmark sentence contains the family head word.
    pub test_head_prob: f64,
    /// Chance that it contains the skill's own name word.
    pub test_own_prob: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            families: 12,
            family_size: 5,
            domains: 4,
            signature_size: 5,
            family_confusers: 10,
            domain_confusers: 8,
            train_per_skill: (200, 200),
            test_per_skill: 50,
            train_signature_words: 1,
            test_signature_words: 2,
            test_family_words: 2,
            test_domain_words: 2,
            test_foreign_words: 2,
            test_head_prob: 0.0,
            test_own_prob: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub taxonomy: Taxonomy,
    pub corpus: Vec<Sentence>,
    pub benchmark: Vec<GoldSentence>,
}

const FILLER: &[&str] = &[
    "team",
    "experience",
    "strong",
    "work",
    "ability",
    "role",
    "our",
    "you",
    "with",
    "and",
    "years",
    "plus",
    "good",
    "knowledge",
    "daily",
    "client",
    "projects",
    "environment",
];

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

struct Words {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Words {
    fn fresh(&mut self) -> String {
        loop {
            let syllables = self.rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(CONSONANTS[self.rng.random_range(0..CONSONANTS.len())] as char);
                w.push(VOWELS[self.rng.random_range(0..VOWELS.len())] as char);
            }
            w.push(CONSONANTS[self.rng.random_range(0..CONSONANTS.len())] as char);
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn many(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.fresh()).collect()
    }
}

struct SkillSpec {
    id: SkillId,
    name: String,
    family: usize,
    domain: usize,
    own: String,
    signature: Vec<String>,
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &'a [String], n: usize) -> Vec<&'a str> {
    words.choose_multiple(rng, n).map(String::as_str).collect()
}

fn sentence(rng: &mut ChaCha8Rng, mut units: Vec<&str>) -> String {
    units.shuffle(rng);
    units.join(" ")
}

pub fn generate(cfg: &SynthConfig) -> SynthWorld {
    let mut words = Words {
        rng: seed::rng_for(cfg.seed, "synth-words", ""),
        used: FILLER.iter().map(|s| s.to_string()).collect(),
    };
    let heads = words.many(cfg.families);
    let family_words: Vec<Vec<String>> = (0..cfg.families).map(|_| words.many(cfg.family_confusers)).collect();
    let domain_words: Vec<Vec<String>> = (0..cfg.domains).map(|_| words.many(cfg.domain_confusers)).collect();
    let n = cfg.families * cfg.family_size;
    let specs: Vec<SkillSpec> = (0..n)
        .map(|i| {
            let family = i / cfg.family_size;
            let own = words.fresh();
            SkillSpec {
                id: SkillId::new(format!("syn:{i:03}")).unwrap(),
                name: format!("{} {own}", heads[family]),
                family,
                domain: i % cfg.domains,
                own,
                signature: words.many(cfg.signature_size),
            }
        })
        .collect();

    let taxonomy = Taxonomy::from_skills(
        specs
            .iter()
            .map(|s| Skill::new(s.id.clone(), s.name.clone(), vec![], [format!("family:{}", s.family)]).unwrap()),
    )
    .unwrap();

    let filler: Vec<String> = FILLER.iter().map(|s| s.to_string()).collect();
    let mut rng = seed::rng_for(cfg.seed, "synth-sentences", "");
    let mut corpus = Vec::new();
    let mut benchmark = Vec::new();
    let (lo, hi) = cfg.train_per_skill;
    for s in &specs {
        let n_train = if lo >= hi {
            lo
        } else {
            let u: f64 = rng.random();
            ((lo as f64).ln() + u * ((hi as f64).ln() - (lo as f64).ln()))
                .exp()
                .round() as usize
        };
        for j in 0..n_train {
            let mut units = vec![s.name.as_str()];
            units.extend(pick(&mut rng, &s.signature, cfg.train_signature_words));
            units.extend(pick(&mut rng, &family_words[s.family], 2));
            units.extend(pick(&mut rng, &domain_words[s.domain], 2));
            let k = rng.random_range(2..=3);
            units.extend(pick(&mut rng, &filler, k));
            corpus.push(Sentence {
                id: format!("tr-{}-{j:04}", s.id),
                text: sentence(&mut rng, units),
            });
        }
        for j in 0..cfg.test_per_skill {
            let mut units = pick(&mut rng, &s.signature, cfg.test_signature_words);
            // never the literal name: own word, if present, precedes the head
            let mention = match (rng.random_bool(cfg.test_own_prob), rng.random_bool(cfg.test_head_prob)) {
                (true, true) => Some(format!("{} {}", s.own, heads[s.family])),
                (true, false) => Some(s.own.clone()),
                (false, true) => Some(heads[s.family].clone()),
                (false, false) => None,
            };
            units.extend(mention.as_deref());
            units.extend(pick(&mut rng, &family_words[s.family], cfg.test_family_words));
            units.extend(pick(&mut rng, &domain_words[s.domain], cfg.test_domain_words));
            if cfg.families > 1 {
                let other = (s.family + rng.random_range(1..cfg.families)) % cfg.families;
                units.extend(pick(&mut rng, &family_words[other], cfg.test_foreign_words));
            }
            units.extend(pick(&mut rng, &filler, 2));
            let text = sentence(&mut rng, units);
            benchmark.push(GoldSentence {
                sentence_id: format!("te-{}-{j:04}", s.id),
                dataset: Dataset::Tech,
                split: Split::Test,
                spans: vec![crate::evaluation::Span {
                    start: 0,
                    end: text.chars().count(),
                    label: s.id.to_string(),
                }],
                text,
                gold_labels: BTreeSet::from([s.id.clone()]),
            });
        }
    }
    corpus.shuffle(&mut rng);
    SynthWorld {
        taxonomy,
        corpus,
        benchmark,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::{label_corpus, Matcher};

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            seed: 3,
            ..SynthConfig::default()
        };
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.corpus, b.corpus);
        assert_eq!(a.benchmark, b.benchmark);
        assert_ne!(generate(&SynthConfig::default()).corpus, a.corpus);
    }

    #[test]
    fn matcher_recovers_training_labels_only() {
        let cfg = SynthConfig::default();
        let w = generate(&cfg);
        let m = Matcher::build(&w.taxonomy);
        let pos = label_corpus(&m, w.corpus.iter().cloned().map(Ok), 1000, 0).unwrap();
        assert_eq!(pos.len(), 60);
        for (skill, ids) in &pos.sets {
            assert_eq!(ids.len(), 200);
            assert!(ids.iter().all(|id| id.starts_with(&format!("tr-{skill}-"))));
        }
        assert!(w.benchmark.iter().all(|s| m.labels(&s.text).is_empty()));
        assert_eq!(w.taxonomy.siblings("syn:000").unwrap().len(), 4);
    }
}
