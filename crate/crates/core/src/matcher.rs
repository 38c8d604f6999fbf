//! Distant supervision by literal matching.
//!
//! Every surface form in the taxonomy is normalized into a token sequence and
//! compiled into an Aho-Corasick automaton over token ids. A sentence is
//! labeled with a skill when any of the skill's token sequences occurs as a
//! contiguous run of the sentence's tokens. Matching on tokens rather than
//! bytes keeps "art" from firing inside "part".

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::seed;
use crate::taxonomy::{SkillId, Taxonomy};

pub use crate::text::normalize;

/// Default ceiling on retained positives per skill.
pub const DEFAULT_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
}

/// Stream sentences from a corpus JSONL file (`{"id": ..., "text": ...}`).
pub fn read_corpus(path: &Path) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    io::read_jsonl(path, |line, s: Sentence| {
        if s.text.trim().is_empty() {
            return Err(Error::parse(path, line, Error::EmptySentence(s.id)));
        }
        out.push(s);
        Ok(())
    })?;
    Ok(out)
}

const ROOT: u32 = 0;

#[derive(Debug, Default, Clone)]
struct State {
    next: HashMap<u32, u32>,
    fail: u32,
    /// Nearest state on the failure chain (excluding self) that has outputs.
    dict: Option<u32>,
    outputs: Vec<u32>,
}

/// Multi-pattern matcher over normalized token sequences.
#[derive(Debug, Clone)]
pub struct Matcher {
    vocab: HashMap<String, u32>,
    states: Vec<State>,
    /// Pattern id → skill indices.
    pattern_skills: Vec<Vec<u32>>,
    skills: Vec<SkillId>,
    skipped_forms: usize,
}

impl Matcher {
    pub fn build(taxonomy: &Taxonomy) -> Self {
        Self::build_with_stoplist(taxonomy, &HashSet::new())
    }

    /// Build while excluding any surface form whose normalized tokens appear in `stoplist`.
    pub fn build_with_stoplist(taxonomy: &Taxonomy, stoplist: &HashSet<Vec<String>>) -> Self {
        let mut vocab: HashMap<String, u32> = HashMap::new();
        let mut states = vec![State::default()];
        let mut pattern_ids: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut pattern_skills: Vec<Vec<u32>> = Vec::new();
        let mut skills = Vec::with_capacity(taxonomy.len());
        let mut skipped = 0;

        for (skill_idx, skill) in taxonomy.skills().enumerate() {
            skills.push(skill.id.clone());
            let forms = taxonomy
                .surface_forms(skill.id.as_str())
                .expect("skill comes from this taxonomy");
            for form in forms {
                let tokens = normalize(&form);
                if tokens.is_empty() {
                    skipped += 1;
                    continue;
                }
                if stoplist.contains(&tokens) {
                    continue;
                }
                let ids: Vec<u32> = tokens
                    .into_iter()
                    .map(|t| {
                        let next = vocab.len() as u32;
                        *vocab.entry(t).or_insert(next)
                    })
                    .collect();
                let pid = match pattern_ids.get(&ids) {
                    Some(&pid) => pid,
                    None => {
                        let pid = pattern_skills.len() as u32;
                        pattern_skills.push(Vec::new());
                        let mut state = ROOT;
                        for &tok in &ids {
                            state = match states[state as usize].next.get(&tok) {
                                Some(&s) => s,
                                None => {
                                    let s = states.len() as u32;
                                    states.push(State::default());
                                    states[state as usize].next.insert(tok, s);
                                    s
                                }
                            };
                        }
                        states[state as usize].outputs.push(pid);
                        pattern_ids.insert(ids, pid);
                        pid
                    }
                };
                let owners = &mut pattern_skills[pid as usize];
                if owners.last() != Some(&(skill_idx as u32)) {
                    owners.push(skill_idx as u32);
                }
            }
        }
        if skipped > 0 {
            log::warn!("skipped {skipped} surface form(s) that normalize to no tokens");
        }

        link_failures(&mut states);
        Matcher {
            vocab,
            states,
            pattern_skills,
            skills,
            skipped_forms: skipped,
        }
    }

    pub fn pattern_count(&self) -> usize {
        self.pattern_skills.len()
    }

    /// Surface forms dropped because they normalize to nothing.
    pub fn skipped_forms(&self) -> usize {
        self.skipped_forms
    }

    /// Skills whose surface forms occur in `text`, in ascending id order.
    pub fn labels(&self, text: &str) -> Vec<SkillId> {
        self.label_indices(&normalize(text))
            .into_iter()
            .map(|i| self.skills[i as usize].clone())
            .collect()
    }

    fn label_indices(&self, tokens: &[String]) -> Vec<u32> {
        let mut found = BTreeSet::new();
        let mut state = ROOT;
        for tok in tokens {
            let Some(&tok) = self.vocab.get(tok) else {
                state = ROOT;
                continue;
            };
            loop {
                if let Some(&s) = self.states[state as usize].next.get(&tok) {
                    state = s;
                    break;
                }
                if state == ROOT {
                    break;
                }
                state = self.states[state as usize].fail;
            }
            let mut out = Some(state);
            if self.states[state as usize].outputs.is_empty() {
                out = self.states[state as usize].dict;
            }
            while let Some(s) = out {
                for &pid in &self.states[s as usize].outputs {
                    found.extend(self.pattern_skills[pid as usize].iter().copied());
                }
                out = self.states[s as usize].dict;
            }
        }
        found.into_iter().collect()
    }
}

fn link_failures(states: &mut [State]) {
    let mut queue = VecDeque::new();
    let root_children: Vec<u32> = states[ROOT as usize].next.values().copied().collect();
    for child in root_children {
        states[child as usize].fail = ROOT;
        queue.push_back(child);
    }
    while let Some(s) = queue.pop_front() {
        let edges: Vec<(u32, u32)> = states[s as usize].next.iter().map(|(&t, &c)| (t, c)).collect();
        for (tok, child) in edges {
            let mut f = states[s as usize].fail;
            let target = loop {
                if let Some(&n) = states[f as usize].next.get(&tok) {
                    break n;
                }
                if f == ROOT {
                    break ROOT;
                }
                f = states[f as usize].fail;
            };
            states[child as usize].fail = target;
            states[child as usize].dict = if !states[target as usize].outputs.is_empty() {
                Some(target)
            } else {
                states[target as usize].dict
            };
            queue.push_back(child);
        }
    }
}

/// Per-skill positive sentence sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PositiveSets {
    /// Only skills with at least one positive are present.
    pub sets: BTreeMap<SkillId, BTreeSet<String>>,
    /// Ceiling applied when the sets were built, if known.
    pub cap: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct PositiveLine {
    skill_id: SkillId,
    sentence_ids: Vec<String>,
}

#[derive(Serialize)]
struct PositiveLineRef<'a> {
    skill_id: &'a SkillId,
    sentence_ids: &'a BTreeSet<String>,
}

impl PositiveSets {
    pub fn get(&self, skill: &str) -> Option<&BTreeSet<String>> {
        self.sets.get(skill)
    }

    pub fn count(&self, skill: &str) -> usize {
        self.sets.get(skill).map_or(0, BTreeSet::len)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = io::create(path)?;
        for (skill, ids) in &self.sets {
            let line = serde_json::to_string(&PositiveLineRef {
                skill_id: skill,
                sentence_ids: ids,
            })
            .expect("positive set serializes");
            io::write_line(&mut w, path, &line)?;
        }
        io::finish(w, path)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let mut sets = BTreeMap::new();
        io::read_jsonl(path, |line, rec: PositiveLine| {
            if rec.sentence_ids.is_empty() {
                return Ok(());
            }
            let ids: BTreeSet<String> = rec.sentence_ids.into_iter().collect();
            if sets.insert(rec.skill_id.clone(), ids).is_some() {
                return Err(Error::parse(
                    path,
                    line,
                    Error::DuplicateSkill(rec.skill_id.to_string()),
                ));
            }
            Ok(())
        })?;
        Ok(PositiveSets { sets, cap: None })
    }
}

/// Label every sentence of `corpus` and keep at most `cap` positives per skill.
///
/// When a skill matches more than `cap` sentences, a uniform sample of exactly
/// `cap` ids is kept. The sample depends only on `seed`, the skill id and the
/// set of matching ids.
pub fn label_corpus<I>(matcher: &Matcher, corpus: I, cap: usize, seed: u64) -> Result<PositiveSets>
where
    I: IntoIterator<Item = Result<Sentence>>,
{
    if cap == 0 {
        return Err(Error::InvalidConfig("cap must be at least 1".into()));
    }
    let mut seen = HashSet::new();
    let mut sentences = Vec::new();
    for s in corpus {
        let s = s?;
        if !seen.insert(s.id.clone()) {
            return Err(Error::DuplicateSentence(s.id));
        }
        sentences.push(s);
    }

    let labels: Vec<Vec<u32>> = sentences
        .par_iter()
        .map(|s| matcher.label_indices(&normalize(&s.text)))
        .collect();

    let mut by_skill: BTreeMap<u32, BTreeSet<String>> = BTreeMap::new();
    for (s, skills) in sentences.iter().zip(labels) {
        for k in skills {
            by_skill.entry(k).or_default().insert(s.id.clone());
        }
    }

    let sets = by_skill
        .into_par_iter()
        .map(|(k, ids)| {
            let skill = matcher.skills[k as usize].clone();
            let ids = cap_sample(ids, cap, seed, skill.as_str());
            (skill, ids)
        })
        .collect();
    Ok(PositiveSets { sets, cap: Some(cap) })
}

fn cap_sample(ids: BTreeSet<String>, cap: usize, seed: u64, skill: &str) -> BTreeSet<String> {
    if ids.len() <= cap {
        return ids;
    }
    let sorted: Vec<String> = ids.into_iter().collect();
    let mut rng = seed::rng_for(seed, "positive-cap", skill);
    index::sample(&mut rng, sorted.len(), cap)
        .into_iter()
        .map(|i| sorted[i].clone())
        .collect()
}

/// Long-tail statistics of a labeled corpus over the whole taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub skills: usize,
    pub mean_positives_all_skills: f64,
    pub mean_positives_nonempty: f64,
    pub fraction_skills_le_10: f64,
    pub per_skill: BTreeMap<SkillId, usize>,
}

pub fn corpus_stats(positives: &PositiveSets, taxonomy: &Taxonomy) -> CorpusStats {
    let per_skill: BTreeMap<SkillId, usize> = taxonomy
        .ids()
        .map(|id| (id.clone(), positives.count(id.as_str())))
        .collect();
    let n = per_skill.len();
    let total: usize = per_skill.values().sum();
    let nonempty = per_skill.values().filter(|&&c| c > 0).count();
    let small = per_skill.values().filter(|&&c| c <= 10).count();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    CorpusStats {
        skills: n,
        mean_positives_all_skills: ratio(total, n),
        mean_positives_nonempty: ratio(total, nonempty),
        fraction_skills_le_10: if n == 0 { 1.0 } else { ratio(small, n) },
        per_skill,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::Skill;

    fn taxonomy(skills: &[(&str, &str, &[&str])]) -> Taxonomy {
        Taxonomy::from_skills(skills.iter().map(|(id, pref, alts)| {
            Skill::new(
                SkillId::new(*id).unwrap(),
                *pref,
                alts.iter().map(|s| s.to_string()).collect(),
                [],
            )
            .unwrap()
        }))
        .unwrap()
    }

    fn sentences(texts: &[&str]) -> Vec<Result<Sentence>> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Ok(Sentence {
                    id: format!("s{i:05}"),
                    text: t.to_string(),
                })
            })
            .collect()
    }

    #[test]
    fn builds_patterns() {
        let m = Matcher::build(&taxonomy(&[("S1", "Haskell", &[])]));
        assert_eq!(m.pattern_count(), 1);

        let m = Matcher::build(&taxonomy(&[("A", "Data Mining", &[]), ("B", "data  mining", &[])]));
        assert_eq!(m.pattern_count(), 1);
        let ids: Vec<_> = m.labels("we do data mining").iter().map(|s| s.to_string()).collect();
        assert_eq!(ids, ["A", "B"]);
    }

    #[test]
    fn empty_forms_are_skipped() {
        let m = Matcher::build(&taxonomy(&[("A", "!!", &["ok"])]));
        assert_eq!(m.skipped_forms(), 1);
        assert_eq!(m.pattern_count(), 1);
    }

    #[test]
    fn literal_token_matches() {
        let t = taxonomy(&[
            ("H", "Haskell", &[]),
            ("P", "PostgreSQL", &[]),
            ("D", "disarm land mine", &[]),
            ("A", "art", &[]),
        ]);
        let m = Matcher::build(&t);
        let got: Vec<_> = m
            .labels("experience with haskell and postgresql")
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(got, ["H", "P"]);
        assert!(m.labels("we dismantle machines").is_empty());
        assert!(m.labels("spare part").is_empty());
    }

    #[test]
    fn overlapping_and_nested_matches_all_count() {
        let t = taxonomy(&[
            ("A", "land mine", &[]),
            ("B", "disarm land mine", &[]),
            ("C", "mine clearance", &[]),
            ("D", "mine", &[]),
        ]);
        let m = Matcher::build(&t);
        let got: Vec<_> = m
            .labels("disarm land mine clearance")
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(got, ["A", "B", "C", "D"]);
    }

    #[test]
    fn stoplist_excludes_forms() {
        let t = taxonomy(&[("A", "art", &["fine art"])]);
        let stop: HashSet<Vec<String>> = [vec!["art".to_string()]].into_iter().collect();
        let m = Matcher::build_with_stoplist(&t, &stop);
        assert!(m.labels("modern art").is_empty());
        assert_eq!(m.labels("fine art").len(), 1);
    }

    #[test]
    fn cap_is_exact_and_seeded() {
        let t = taxonomy(&[("H", "haskell", &[])]);
        let m = Matcher::build(&t);
        let texts: Vec<String> = (0..1500).map(|i| format!("haskell job {i}")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let a = label_corpus(&m, sentences(&refs), 1000, 7).unwrap();
        let b = label_corpus(&m, sentences(&refs), 1000, 7).unwrap();
        assert_eq!(a.count("H"), 1000);
        assert_eq!(a, b);
        let mut rev = sentences(&refs);
        rev.reverse();
        assert_eq!(label_corpus(&m, rev, 1000, 7).unwrap(), a);
        let c = label_corpus(&m, sentences(&refs), 1000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn duplicate_sentence_ids_error() {
        let m = Matcher::build(&taxonomy(&[("H", "haskell", &[])]));
        let dup = vec![
            Ok(Sentence {
                id: "x".into(),
                text: "a".into(),
            }),
            Ok(Sentence {
                id: "x".into(),
                text: "b".into(),
            }),
        ];
        assert!(matches!(label_corpus(&m, dup, 10, 0), Err(Error::DuplicateSentence(_))));
        assert!(matches!(label_corpus(&m, vec![], 0, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn stats_over_whole_taxonomy() {
        let t = taxonomy(&[("A", "a", &[]), ("B", "b", &[])]);
        let mut pos = PositiveSets::default();
        pos.sets
            .insert(SkillId::new("A").unwrap(), (0..10).map(|i| i.to_string()).collect());
        let s = corpus_stats(&pos, &t);
        assert_eq!(s.mean_positives_all_skills, 5.0);
        assert_eq!(s.mean_positives_nonempty, 10.0);
        assert_eq!(s.fraction_skills_le_10, 1.0);

        let s = corpus_stats(&PositiveSets::default(), &t);
        assert_eq!(s.mean_positives_all_skills, 0.0);
        assert_eq!(s.fraction_skills_le_10, 1.0);

        for id in ["A", "B"] {
            pos.sets.insert(
                SkillId::new(id).unwrap(),
                (0..365).map(|i| format!("{id}{i}")).collect(),
            );
        }
        let s = corpus_stats(&pos, &t);
        assert_eq!(s.mean_positives_all_skills, 365.0);
        assert_eq!(s.fraction_skills_le_10, 0.0);
    }

    #[test]
    fn positive_sets_file_round_trip() {
        let t = taxonomy(&[("H", "haskell", &[]), ("P", "postgresql", &[])]);
        let m = Matcher::build(&t);
        let pos = label_corpus(&m, sentences(&["haskell", "postgresql and haskell", "nothing"]), 10, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pos.jsonl");
        pos.write_jsonl(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "{\"skill_id\":\"H\",\"sentence_ids\":[\"s00000\",\"s00001\"]}\n\
             {\"skill_id\":\"P\",\"sentence_ids\":[\"s00001\"]}\n"
        );
        let back = PositiveSets::read_jsonl(&path).unwrap();
        assert_eq!(back.sets, pos.sets);
    }
}
