//! Related-skill indices that define the hard-negative pools.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine, EmbeddingStore};
use crate::error::{Error, Result};
use crate::io;
use crate::taxonomy::{SkillId, Taxonomy};

/// Neighbor count kept by the ranked strategies.
pub const NEIGHBOR_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Siblings,
    Levenshtein,
    Embedding,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Siblings, Strategy::Levenshtein, Strategy::Embedding];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Siblings => "siblings",
            Strategy::Levenshtein => "levenshtein",
            Strategy::Embedding => "embedding",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "siblings" | "sibling" => Ok(Strategy::Siblings),
            "levenshtein" => Ok(Strategy::Levenshtein),
            "embedding" | "embeddings" => Ok(Strategy::Embedding),
            other => Err(Error::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn fold(label: &str) -> String {
    label.to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelatedIndex {
    pub strategy: Strategy,
    /// `None` for siblings, which are unbounded sets.
    pub limit: Option<usize>,
    pub neighbors: BTreeMap<SkillId, Vec<SkillId>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    strategy: Strategy,
    limit: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct Line {
    skill_id: SkillId,
    neighbors: Vec<SkillId>,
}

#[derive(Serialize)]
struct LineRef<'a> {
    skill_id: &'a SkillId,
    neighbors: &'a [SkillId],
}

impl RelatedIndex {
    pub fn neighbors(&self, skill: &str) -> &[SkillId] {
        self.neighbors.get(skill).map_or(&[], Vec::as_slice)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = io::create(path)?;
        let header = Header {
            strategy: self.strategy,
            limit: self.limit,
        };
        io::write_line(&mut w, path, &serde_json::to_string(&header).unwrap())?;
        for (skill_id, neighbors) in &self.neighbors {
            let line = LineRef { skill_id, neighbors };
            io::write_line(&mut w, path, &serde_json::to_string(&line).unwrap())?;
        }
        io::finish(w, path)
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing index header"))?;
        let header: Header = serde_json::from_str(first).map_err(|e| Error::parse(path, 1, e))?;
        let mut neighbors = BTreeMap::new();
        for (idx, line) in lines {
            let rec: Line = serde_json::from_str(line).map_err(|e| Error::parse(path, idx + 1, e))?;
            if neighbors.insert(rec.skill_id.clone(), rec.neighbors).is_some() {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    Error::DuplicateSkill(rec.skill_id.to_string()),
                ));
            }
        }
        Ok(RelatedIndex {
            strategy: header.strategy,
            limit: header.limit,
            neighbors,
        })
    }
}

/// Build the neighbor lists for one strategy.
///
/// Ranked strategies keep the [`NEIGHBOR_LIMIT`] best other skills, ordered by
/// (distance, id) for Levenshtein and (-cosine, id) for embeddings.
pub fn build_related_index(
    taxonomy: &Taxonomy,
    strategy: Strategy,
    label_vectors: Option<&EmbeddingStore>,
) -> Result<RelatedIndex> {
    build_related_index_with_limit(taxonomy, strategy, label_vectors, NEIGHBOR_LIMIT)
}

pub fn build_related_index_with_limit(
    taxonomy: &Taxonomy,
    strategy: Strategy,
    label_vectors: Option<&EmbeddingStore>,
    limit: usize,
) -> Result<RelatedIndex> {
    let ids: Vec<&SkillId> = taxonomy.ids().collect();
    let neighbors: BTreeMap<SkillId, Vec<SkillId>> = match strategy {
        Strategy::Siblings => ids
            .iter()
            .map(|&id| {
                let sib = taxonomy.siblings(id.as_str())?;
                Ok((id.clone(), sib.into_iter().collect()))
            })
            .collect::<Result<_>>()?,
        Strategy::Levenshtein => {
            let labels: Vec<String> = taxonomy.skills().map(|s| fold(&s.preferred_label)).collect();
            (0..ids.len())
                .into_par_iter()
                .map(|i| {
                    let scored: Vec<(usize, usize)> = (0..ids.len())
                        .filter(|&j| j != i)
                        .map(|j| (levenshtein(&labels[i], &labels[j]), j))
                        .collect();
                    // ids are sorted, so index order is id order
                    let top = top_k(scored, limit, |a, b| a.cmp(b));
                    (ids[i].clone(), top.into_iter().map(|(_, j)| ids[j].clone()).collect())
                })
                .collect()
        }
        Strategy::Embedding => {
            let store = label_vectors
                .ok_or_else(|| Error::InvalidConfig("embedding strategy needs skill label vectors".into()))?;
            let missing: Vec<String> = ids
                .iter()
                .filter(|id| !store.contains(id.as_str()))
                .map(|id| id.to_string())
                .collect();
            if !missing.is_empty() {
                return Err(Error::MissingVectors(missing));
            }
            let vecs: Vec<_> = ids.iter().map(|id| store.get(id.as_str()).unwrap()).collect();
            (0..ids.len())
                .into_par_iter()
                .map(|i| {
                    let scored = (0..ids.len())
                        .filter(|&j| j != i)
                        .map(|j| Ok((cosine(vecs[i], vecs[j])?, j)))
                        .collect::<Result<Vec<(f64, usize)>>>()?;
                    let top = top_k(scored, limit, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                    Ok((ids[i].clone(), top.into_iter().map(|(_, j)| ids[j].clone()).collect()))
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(RelatedIndex {
        strategy,
        limit: (strategy != Strategy::Siblings).then_some(limit),
        neighbors,
    })
}

fn top_k<T, F>(mut items: Vec<T>, k: usize, cmp: F) -> Vec<T>
where
    F: Fn(&T, &T) -> Ordering,
{
    if k == 0 {
        return Vec::new();
    }
    if items.len() > k {
        items.select_nth_unstable_by(k - 1, &cmp);
        items.truncate(k);
    }
    items.sort_unstable_by(&cmp);
    items
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::hash_encode;
    use crate::taxonomy::Skill;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn taxonomy(skills: &[(&str, &str, &[&str])]) -> Taxonomy {
        Taxonomy::from_skills(skills.iter().map(|(id, pref, parents)| {
            Skill::new(
                SkillId::new(*id).unwrap(),
                *pref,
                vec![],
                parents.iter().map(|p| p.to_string()),
            )
            .unwrap()
        }))
        .unwrap()
    }

    fn names(v: &[SkillId]) -> Vec<&str> {
        v.iter().map(SkillId::as_str).collect()
    }

    #[test]
    fn levenshtein_reference_values() {
        assert_eq!(levenshtein("haskell", "haskell"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("flaw", "lawn"), 2);
        assert_eq!(levenshtein("ça", "ca"), 1);
    }

    proptest! {
        #[test]
        fn levenshtein_is_a_metric(a in "[a-d ]{0,8}", b in "[a-d ]{0,8}", c in "[a-d ]{0,8}") {
            let ab = levenshtein(&a, &b);
            prop_assert_eq!(ab, levenshtein(&b, &a));
            prop_assert!(levenshtein(&a, &c) <= ab + levenshtein(&b, &c));
            prop_assert_eq!(ab == 0, a == b);
        }
    }

    #[test]
    fn small_taxonomy_lists_all_others() {
        let t = taxonomy(&[("A", "abc", &[]), ("B", "abd", &[]), ("C", "xyz", &[])]);
        let idx = build_related_index(&t, Strategy::Levenshtein, None).unwrap();
        for list in idx.neighbors.values() {
            assert_eq!(list.len(), 2);
        }
        assert_eq!(names(idx.neighbors("A")), ["B", "C"]);
        assert_eq!(idx.limit, Some(100));
    }

    #[test]
    fn levenshtein_prefers_close_labels() {
        let t = taxonomy(&[
            ("d", "disarm land mine", &[]),
            ("f", "find land mines", &[]),
            ("m", "dismantle machines", &[]),
            ("h", "Haskell", &[]),
        ]);
        let idx = build_related_index(&t, Strategy::Levenshtein, None).unwrap();
        let list = names(idx.neighbors("d"));
        let pos = |x| list.iter().position(|&n| n == x).unwrap();
        assert!(pos("f") < pos("m"));
    }

    #[test]
    fn ties_break_by_id() {
        let t = taxonomy(&[("Z", "aa", &[]), ("B", "ab", &[]), ("A", "ba", &[]), ("Q", "aa", &[])]);
        let idx = build_related_index(&t, Strategy::Levenshtein, None).unwrap();
        // from "aa": Z/Q distance 0, then A and B at distance 1 (ascending id)
        assert_eq!(names(idx.neighbors("Q")), ["Z", "A", "B"]);
    }

    #[test]
    fn siblings_strategy() {
        let t = taxonomy(&[("A", "a", &["G"]), ("B", "b", &["G"]), ("C", "c", &[])]);
        let idx = build_related_index(&t, Strategy::Siblings, None).unwrap();
        assert_eq!(names(idx.neighbors("A")), ["B"]);
        assert!(idx.neighbors("C").is_empty());
        assert_eq!(idx.limit, None);
    }

    #[test]
    fn embedding_strategy_needs_vectors() {
        let t = taxonomy(&[
            ("m", "manage musical staff", &[]),
            ("s", "manage staff", &[]),
            ("p", "PostgreSQL", &[]),
            ("e", "Erlang", &[]),
        ]);
        assert!(matches!(
            build_related_index(&t, Strategy::Embedding, None),
            Err(Error::InvalidConfig(_))
        ));
        let partial = EmbeddingStore::from_hashed(64, [("m", "x")]).unwrap();
        assert!(matches!(
            build_related_index(&t, Strategy::Embedding, Some(&partial)),
            Err(Error::MissingVectors(v)) if v.len() == 3
        ));
        let store =
            EmbeddingStore::from_hashed(64, t.skills().map(|s| (s.id.as_str(), s.preferred_label.as_str()))).unwrap();
        let idx = build_related_index_with_limit(&t, Strategy::Embedding, Some(&store), 1).unwrap();
        assert_eq!(names(idx.neighbors("m")), ["s"]);
        // brute-force check of the chosen neighbor
        let q = hash_encode("manage musical staff", 64).unwrap();
        let best = ["manage staff", "PostgreSQL", "Erlang"]
            .iter()
            .max_by(|a, b| {
                cosine(&q, &hash_encode(a, 64).unwrap())
                    .unwrap()
                    .total_cmp(&cosine(&q, &hash_encode(b, 64).unwrap()).unwrap())
            })
            .unwrap();
        assert_eq!(*best, "manage staff");
    }

    #[test]
    fn index_file_round_trip() {
        let t = taxonomy(&[("A", "abc", &["G"]), ("B", "abd", &["G"]), ("C", "xyz", &[])]);
        let dir = tempfile::tempdir().unwrap();
        for strategy in [Strategy::Siblings, Strategy::Levenshtein] {
            let idx = build_related_index(&t, strategy, None).unwrap();
            let path = dir.path().join(format!("{strategy}.jsonl"));
            idx.write_jsonl(&path).unwrap();
            assert_eq!(RelatedIndex::read_jsonl(&path).unwrap(), idx);
        }
        let text = std::fs::read_to_string(dir.path().join("levenshtein.jsonl")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "{\"strategy\":\"levenshtein\",\"limit\":100}");
        assert_eq!(
            lines.next().unwrap(),
            "{\"skill_id\":\"A\",\"neighbors\":[\"B\",\"C\"]}"
        );
    }

    #[test]
    fn strategy_names_parse() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("bogus".parse::<Strategy>().is_err());
    }
}
