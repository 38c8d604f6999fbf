//! Benchmark loading, ranking metrics and supervision-quality audit.
//!
//! The benchmark is span-annotated: every span carries a skill id or one of
//! the markers `UNDERSPECIFIED` / `LABEL_NOT_PRESENT`. Predictions are made per
//! sentence, so gold labels are the union of a sentence's skill spans.
//! Sentences without any skill label are skipped by the ranking metrics but
//! still take part in the supervision audit.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::ModelSet;
use crate::embeddings::SentenceEncoder;
use crate::error::{Error, Result};
use crate::io;
use crate::matcher::PositiveSets;
use crate::ranking::rank_skills;
use crate::taxonomy::{SkillId, Taxonomy};

pub const UNDERSPECIFIED: &str = "UNDERSPECIFIED";
pub const LABEL_NOT_PRESENT: &str = "LABEL_NOT_PRESENT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "TECH")]
    Tech,
    #[serde(rename = "HOUSE")]
    House,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Val,
    Test,
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dataset::Tech => "TECH",
            Dataset::House => "HOUSE",
        })
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Dataset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TECH" => Ok(Dataset::Tech),
            "HOUSE" => Ok(Dataset::House),
            _ => Err(Error::InvalidConfig(format!("unknown dataset {s:?}"))),
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "val" | "validation" | "dev" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidConfig(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl Span {
    pub fn is_skill(&self) -> bool {
        self.label != UNDERSPECIFIED && self.label != LABEL_NOT_PRESENT
    }
}

/// One line of the benchmark JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub dataset: Dataset,
    pub split: Split,
    pub sentence_id: String,
    pub text: String,
    pub spans: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldSentence {
    pub sentence_id: String,
    pub text: String,
    pub dataset: Dataset,
    pub split: Split,
    pub spans: Vec<Span>,
    pub gold_labels: BTreeSet<SkillId>,
}

impl GoldSentence {
    fn from_record(rec: BenchmarkRecord) -> Result<Self> {
        let len = rec.text.chars().count();
        let mut gold = BTreeSet::new();
        for span in &rec.spans {
            if span.start > span.end || span.end > len {
                return Err(Error::Invalid(format!(
                    "sentence {:?}: span {}..{} out of bounds for {} characters",
                    rec.sentence_id, span.start, span.end, len
                )));
            }
            if span.is_skill() {
                gold.insert(SkillId::new(span.label.clone())?);
            }
        }
        Ok(GoldSentence {
            sentence_id: rec.sentence_id,
            text: rec.text,
            dataset: rec.dataset,
            split: rec.split,
            spans: rec.spans,
            gold_labels: gold,
        })
    }

    pub fn to_record(&self) -> BenchmarkRecord {
        BenchmarkRecord {
            dataset: self.dataset,
            split: self.split,
            sentence_id: self.sentence_id.clone(),
            text: self.text.clone(),
            spans: self.spans.clone(),
        }
    }
}

pub fn load_benchmark(path: &Path) -> Result<Vec<GoldSentence>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    io::read_jsonl(path, |line, rec: BenchmarkRecord| {
        if !seen.insert(rec.sentence_id.clone()) {
            return Err(Error::parse(path, line, Error::DuplicateSentence(rec.sentence_id)));
        }
        out.push(GoldSentence::from_record(rec).map_err(|e| Error::parse(path, line, e))?);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_benchmark(bench: &[GoldSentence], path: &Path) -> Result<()> {
    let mut w = io::create(path)?;
    for s in bench {
        io::write_line(&mut w, path, &serde_json::to_string(&s.to_record()).unwrap())?;
    }
    io::finish(w, path)
}

/// Sentence and span bookkeeping for one (dataset, split) partition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PartitionStats {
    pub sentences: usize,
    pub spans: usize,
    pub labeled_spans: usize,
    pub unique_labels: usize,
}

pub fn benchmark_stats(bench: &[GoldSentence]) -> BTreeMap<(Dataset, Split), PartitionStats> {
    let mut out: BTreeMap<(Dataset, Split), PartitionStats> = BTreeMap::new();
    let mut labels: BTreeMap<(Dataset, Split), BTreeSet<&SkillId>> = BTreeMap::new();
    for s in bench {
        let e = out.entry((s.dataset, s.split)).or_default();
        e.sentences += 1;
        e.spans += s.spans.len();
        e.labeled_spans += s.spans.iter().filter(|sp| sp.is_skill()).count();
        labels.entry((s.dataset, s.split)).or_default().extend(&s.gold_labels);
    }
    for (key, set) in labels {
        out.get_mut(&key).unwrap().unique_labels = set.len();
    }
    out
}

/// R-Precision@K for one sentence: hits in the top `k` over `min(k, |gold|)`.
pub fn rp_at_k(ranked: &[SkillId], gold: &BTreeSet<SkillId>, k: usize) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    let hits = ranked.iter().take(k).filter(|s| gold.contains(*s)).count();
    Ok(hits as f64 / k.min(gold.len()) as f64)
}

/// Reciprocal rank of the first gold label; 0 when none is ranked.
pub fn mrr(ranked: &[SkillId], gold: &BTreeSet<SkillId>) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::EmptyGold);
    }
    Ok(ranked
        .iter()
        .position(|s| gold.contains(s))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GroupMetrics {
    pub mrr: f64,
    pub rp5: f64,
    pub rp10: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub groups: BTreeMap<(Dataset, Split), GroupMetrics>,
}

impl EvalReport {
    pub fn get(&self, dataset: Dataset, split: Split) -> Option<&GroupMetrics> {
        self.groups.get(&(dataset, split))
    }

    /// CSV with one row per partition; RP values scaled to percent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,split,n,mrr,rp5,rp10\n");
        for ((d, s), m) in &self.groups {
            out.push_str(&format!(
                "{d},{s},{},{:.6},{:.4},{:.4}\n",
                m.n,
                m.mrr,
                100.0 * m.rp5,
                100.0 * m.rp10
            ));
        }
        out
    }
}

/// Per-sentence metrics; exposed so callers can audit single sentences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceMetrics {
    pub mrr: f64,
    pub rp5: f64,
    pub rp10: f64,
}

pub fn sentence_metrics(ranked: &[SkillId], gold: &BTreeSet<SkillId>) -> Result<SentenceMetrics> {
    Ok(SentenceMetrics {
        mrr: mrr(ranked, gold)?,
        rp5: rp_at_k(ranked, gold, 5)?,
        rp10: rp_at_k(ranked, gold, 10)?,
    })
}

/// Macro-averaged MRR, RP@5 and RP@10 per (dataset, split).
///
/// Averages are summed in sentence-id order so the report does not depend on
/// the order of `bench`.
pub fn evaluate(models: &ModelSet, bench: &[GoldSentence], encoder: &dyn SentenceEncoder) -> Result<EvalReport> {
    let full = models.len() + models.untrained.len();
    let scored = bench
        .par_iter()
        .filter(|s| !s.gold_labels.is_empty())
        .map(|s| {
            let x = encoder.encode(&s.sentence_id, &s.text)?;
            let ranked: Vec<SkillId> = rank_skills(models, &x, full)?.into_iter().map(|r| r.skill_id).collect();
            Ok((s, sentence_metrics(&ranked, &s.gold_labels)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(scored))
}

fn aggregate(mut scored: Vec<(&GoldSentence, SentenceMetrics)>) -> EvalReport {
    scored.sort_by(|a, b| a.0.sentence_id.cmp(&b.0.sentence_id));
    let mut groups: BTreeMap<(Dataset, Split), GroupMetrics> = BTreeMap::new();
    for (s, m) in &scored {
        let g = groups.entry((s.dataset, s.split)).or_default();
        g.mrr += m.mrr;
        g.rp5 += m.rp5;
        g.rp10 += m.rp10;
        g.n += 1;
    }
    for g in groups.values_mut() {
        let n = g.n as f64;
        g.mrr /= n;
        g.rp5 /= n;
        g.rp10 /= n;
    }
    EvalReport { groups }
}

/// Micro-averaged agreement between distant labels and gold labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupervisionQuality {
    pub precision: f64,
    pub recall: f64,
    pub auto_pairs: usize,
    pub gold_pairs: usize,
    pub overlap: usize,
    /// Set when there were no automatic labels; precision is then reported as 1.
    pub precision_undefined: bool,
}

/// Compare distant labels on the benchmark sentences against gold.
///
/// Only `(sentence, skill)` pairs whose sentence is in `bench` are counted.
pub fn supervision_quality(auto: &PositiveSets, bench: &[GoldSentence]) -> SupervisionQuality {
    let gold: HashMap<&str, &BTreeSet<SkillId>> =
        bench.iter().map(|s| (s.sentence_id.as_str(), &s.gold_labels)).collect();
    let mut auto_pairs = 0;
    let mut overlap = 0;
    for (skill, ids) in &auto.sets {
        for id in ids {
            if let Some(g) = gold.get(id.as_str()) {
                auto_pairs += 1;
                if g.contains(skill) {
                    overlap += 1;
                }
            }
        }
    }
    let gold_pairs: usize = bench.iter().map(|s| s.gold_labels.len()).sum();
    let undefined = auto_pairs == 0;
    SupervisionQuality {
        precision: if undefined {
            1.0
        } else {
            overlap as f64 / auto_pairs as f64
        },
        recall: if gold_pairs == 0 {
            0.0
        } else {
            overlap as f64 / gold_pairs as f64
        },
        auto_pairs,
        gold_pairs,
        overlap,
        precision_undefined: undefined,
    }
}

/// Convert span annotations from a CSV export into benchmark records.
///
/// One row per annotated span. Required columns: `sentence` and `label`.
/// Optional: `sentence_id` (or `idx`) to group rows, and `span` holding the
/// span text. Without an id column, consecutive rows with the same sentence
/// text form one sentence. Span offsets are found by searching the span text
/// in the sentence; a missing or unmatched span covers the whole sentence. A
/// row with an empty label and empty span only registers the sentence.
///
/// Labels may be skill ids, preferred labels (case-insensitive), or the
/// markers `UNDERSPECIFIED` and `LABEL NOT PRESENT`.
pub fn convert_annotations_csv(
    path: &Path,
    dataset: Dataset,
    split: Split,
    taxonomy: &Taxonomy,
    id_prefix: &str,
) -> Result<Vec<BenchmarkRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.contains(&h.trim_start_matches('\u{feff}').trim().to_lowercase().as_str()))
    };
    let sentence_col = find(&["sentence", "text"]).ok_or_else(|| Error::MissingColumn {
        path: path.to_path_buf(),
        column: "sentence".into(),
    })?;
    let label_col = find(&["label"]).ok_or_else(|| Error::MissingColumn {
        path: path.to_path_buf(),
        column: "label".into(),
    })?;
    let id_col = find(&["sentence_id", "idx", "id"]);
    let span_col = find(&["span"]);

    let by_label: HashMap<String, &SkillId> = taxonomy
        .skills()
        .map(|s| (s.preferred_label.to_lowercase(), &s.id))
        .collect();

    let mut records: Vec<BenchmarkRecord> = Vec::new();
    let mut cursor = 0usize;
    let mut group_key: Option<String> = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let line = row + 2;
        let get = |c: Option<usize>| c.and_then(|c| record.get(c)).unwrap_or("").trim();
        let text = get(Some(sentence_col)).to_string();
        let key = match id_col {
            Some(_) => get(id_col).to_string(),
            None => text.clone(),
        };
        if group_key.as_deref() != Some(key.as_str()) {
            group_key = Some(key.clone());
            cursor = 0;
            let sentence_id = match id_col {
                Some(_) => format!("{id_prefix}{key}"),
                None => format!("{id_prefix}{}", records.len()),
            };
            records.push(BenchmarkRecord {
                dataset,
                split,
                sentence_id,
                text: text.clone(),
                spans: Vec::new(),
            });
        }
        let rec = records.last_mut().unwrap();
        let raw_label = get(Some(label_col));
        let span_text = get(span_col);
        if raw_label.is_empty() && span_text.is_empty() {
            continue;
        }
        let label = match raw_label.to_uppercase().replace(' ', "_").as_str() {
            UNDERSPECIFIED => UNDERSPECIFIED.to_string(),
            LABEL_NOT_PRESENT => LABEL_NOT_PRESENT.to_string(),
            _ if taxonomy.contains(raw_label) => raw_label.to_string(),
            _ => match by_label.get(&raw_label.to_lowercase()) {
                Some(id) => id.to_string(),
                None => {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("label {raw_label:?} is not a known skill or marker"),
                    ))
                }
            },
        };
        let chars: Vec<char> = rec.text.chars().collect();
        let (start, end) = locate(&chars, span_text, cursor).unwrap_or((0, chars.len()));
        cursor = end;
        rec.spans.push(Span { start, end, label });
    }
    Ok(records)
}

fn locate(haystack: &[char], needle: &str, from: usize) -> Option<(usize, usize)> {
    let needle: Vec<char> = needle.chars().collect();
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    let search = |lo: usize| {
        (lo..=haystack.len() - needle.len())
            .find(|&i| haystack[i..i + needle.len()] == needle[..])
            .map(|i| (i, i + needle.len()))
    };
    search(from.min(haystack.len())).or_else(|| search(0))
}
