//! Skill taxonomy: surface forms and sibling relations.
//!
//! The canonical on-disk form is JSONL, one skill per line:
//!
//! ```text
//! {"id": "S1", "preferred_label": "Haskell", "alt_labels": [], "broader": ["G7"]}
//! ```
//!
//! Parent ids in `broader` are opaque. They are usually skill groups that are
//! not themselves skills, and siblings only need the ids to match.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SkillId(String);

impl SkillId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::Invalid("skill id must be non-empty".into()));
        }
        Ok(SkillId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for SkillId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for SkillId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skill {
    pub id: SkillId,
    pub preferred_label: String,
    #[serde(default)]
    pub alt_labels: Vec<String>,
    #[serde(default)]
    pub broader: BTreeSet<String>,
}

impl Skill {
    /// Validate and canonicalize a skill record.
    ///
    /// Alternate labels that normalize to the same tokens as an earlier
    /// alternate label are dropped.
    pub fn new(
        id: SkillId,
        preferred_label: impl Into<String>,
        alt_labels: Vec<String>,
        broader: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let preferred_label = preferred_label.into();
        if preferred_label.trim().is_empty() {
            return Err(Error::EmptyLabel(id.0));
        }
        let broader: BTreeSet<String> = broader.into_iter().collect();
        if broader.contains(id.as_str()) {
            return Err(Error::SelfParent(id.0));
        }
        let mut seen = HashSet::new();
        let alt_labels = alt_labels.into_iter().filter(|l| seen.insert(normalize(l))).collect();
        Ok(Skill {
            id,
            preferred_label,
            alt_labels,
            broader,
        })
    }
}

/// An immutable, validated set of skills keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Taxonomy {
    skills: BTreeMap<SkillId, Skill>,
    children: BTreeMap<String, BTreeSet<SkillId>>,
}

impl Taxonomy {
    pub fn from_skills(skills: impl IntoIterator<Item = Skill>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for skill in skills {
            let skill = Skill::new(skill.id, skill.preferred_label, skill.alt_labels, skill.broader)?;
            if map.contains_key(&skill.id) {
                return Err(Error::DuplicateSkill(skill.id.0));
            }
            map.insert(skill.id.clone(), skill);
        }
        Ok(Self::index(map))
    }

    fn index(skills: BTreeMap<SkillId, Skill>) -> Self {
        let mut children: BTreeMap<String, BTreeSet<SkillId>> = BTreeMap::new();
        for skill in skills.values() {
            for parent in &skill.broader {
                children.entry(parent.clone()).or_default().insert(skill.id.clone());
            }
        }
        Taxonomy { skills, children }
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Skill> {
        self.skills.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.skills.contains_key(id)
    }

    fn require(&self, id: &str) -> Result<&Skill> {
        self.get(id).ok_or_else(|| Error::UnknownSkill(id.to_string()))
    }

    /// Skills in ascending id order.
    pub fn skills(&self) -> impl ExactSizeIterator<Item = &Skill> {
        self.skills.values()
    }

    pub fn ids(&self) -> impl ExactSizeIterator<Item = &SkillId> {
        self.skills.keys()
    }

    /// All other skills sharing at least one broader concept with `id`.
    pub fn siblings(&self, id: &str) -> Result<BTreeSet<SkillId>> {
        let skill = self.require(id)?;
        let mut out = BTreeSet::new();
        for parent in &skill.broader {
            if let Some(kids) = self.children.get(parent) {
                out.extend(kids.iter().filter(|k| k.as_str() != id).cloned());
            }
        }
        Ok(out)
    }

    /// Preferred label followed by alternate labels, without normalized duplicates.
    pub fn surface_forms(&self, id: &str) -> Result<Vec<String>> {
        let skill = self.require(id)?;
        let mut seen = HashSet::new();
        Ok(std::iter::once(&skill.preferred_label)
            .chain(&skill.alt_labels)
            .filter(|form| seen.insert(normalize(form)))
            .cloned()
            .collect())
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = io::create(path)?;
        for skill in self.skills.values() {
            let line = serde_json::to_string(skill).expect("skill serializes");
            io::write_line(&mut w, path, &line)?;
        }
        io::finish(w, path)
    }
}

/// Load a taxonomy from its JSONL form.
pub fn load_taxonomy(path: &Path) -> Result<Taxonomy> {
    let mut skills = BTreeMap::new();
    io::read_jsonl(path, |line, skill: Skill| {
        let skill = Skill::new(skill.id, skill.preferred_label, skill.alt_labels, skill.broader)
            .map_err(|e| Error::parse(path, line, e))?;
        if skills.contains_key(&skill.id) {
            return Err(Error::parse(path, line, Error::DuplicateSkill(skill.id.0.clone())));
        }
        skills.insert(skill.id.clone(), skill);
        Ok(())
    })?;
    Ok(Taxonomy::index(skills))
}

/// Result of converting the public ESCO CSV distribution.
#[derive(Debug, Clone)]
pub struct EscoImport {
    pub taxonomy: Taxonomy,
    /// Relations skipped because their child concept is not a known skill.
    pub skipped_relations: usize,
}

/// Build a taxonomy from ESCO's skills CSV and its broader-relations CSV.
///
/// The skills file needs `conceptUri`, `preferredLabel` and `altLabels`
/// (newline-separated inside the cell); the relations file needs
/// `conceptUri` and `broaderUri`.
pub fn import_esco_csv(skills_path: &Path, relations_path: &Path) -> Result<EscoImport> {
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Csv {
            path: path.clone(),
            source,
        }
    };

    let mut reader = open_csv(skills_path)?;
    let headers = reader.headers().map_err(csv_err(skills_path))?.clone();
    let uri = column(&headers, "conceptUri", skills_path)?;
    let pref = column(&headers, "preferredLabel", skills_path)?;
    let alts = column(&headers, "altLabels", skills_path)?;

    let mut rows: BTreeMap<SkillId, (String, Vec<String>)> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(skills_path))?;
        let line = idx + 2;
        let id = SkillId::new(record.get(uri).unwrap_or("").trim()).map_err(|e| Error::parse(skills_path, line, e))?;
        let label = record.get(pref).unwrap_or("").trim().to_string();
        if label.is_empty() {
            return Err(Error::parse(skills_path, line, Error::EmptyLabel(id.0)));
        }
        let alt_labels = record
            .get(alts)
            .unwrap_or("")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        if rows.insert(id.clone(), (label, alt_labels)).is_some() {
            return Err(Error::parse(skills_path, line, Error::DuplicateSkill(id.0)));
        }
    }

    let mut reader = open_csv(relations_path)?;
    let headers = reader.headers().map_err(csv_err(relations_path))?.clone();
    let child = column(&headers, "conceptUri", relations_path)?;
    let parent = column(&headers, "broaderUri", relations_path)?;

    let mut broader: BTreeMap<SkillId, BTreeSet<String>> = BTreeMap::new();
    let mut skipped = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err(relations_path))?;
        let c = record.get(child).unwrap_or("").trim();
        let p = record.get(parent).unwrap_or("").trim();
        match rows.get_key_value(c) {
            Some((id, _)) if !p.is_empty() && p != c => {
                broader.entry(id.clone()).or_default().insert(p.to_string());
            }
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!(
            "skipped {skipped} relation(s) in {} with unknown or invalid concepts",
            relations_path.display()
        );
    }

    let skills = rows
        .into_iter()
        .map(|(id, (label, alts))| {
            let parents = broader.remove(&id).unwrap_or_default();
            Skill::new(id, label, alts, parents)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EscoImport {
        taxonomy: Taxonomy::from_skills(skills)?,
        skipped_relations: skipped,
    })
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().flexible(true).from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim_start_matches('\u{feff}') == name)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn skill(id: &str, pref: &str, alts: &[&str], broader: &[&str]) -> Skill {
        Skill::new(
            SkillId::new(id).unwrap(),
            pref,
            alts.iter().map(|s| s.to_string()).collect(),
            broader.iter().map(|s| s.to_string()),
        )
        .unwrap()
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        path
    }

    #[test]
    fn loads_valid_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "t.jsonl",
            "{\"id\":\"S1\",\"preferred_label\":\"Haskell\",\"alt_labels\":[],\"broader\":[\"G\"]}\n\
             {\"id\":\"S2\",\"preferred_label\":\"Erlang\",\"alt_labels\":[],\"broader\":[]}\n",
        );
        let t = load_taxonomy(&path).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("S1").unwrap().preferred_label, "Haskell");
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let line = "{\"id\":\"S1\",\"preferred_label\":\"a\",\"alt_labels\":[],\"broader\":[]}\n";
        let path = write(&dir, "t.jsonl", &line.repeat(2));
        let err = load_taxonomy(&path).unwrap_err().to_string();
        assert!(err.contains("\"S1\""), "{err}");
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn empty_file_and_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "e.jsonl", "");
        assert!(load_taxonomy(&path).unwrap().is_empty());

        let path = write(&dir, "b.jsonl", "{\"id\":\"S1\",\"preferred_label\":\"\"}\n");
        assert!(matches!(load_taxonomy(&path), Err(Error::Parse { line: 1, .. })));
        let path = write(&dir, "c.jsonl", "\n{not json\n");
        assert!(matches!(load_taxonomy(&path), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn siblings_share_a_parent() {
        let t = Taxonomy::from_skills([
            skill("A", "a", &[], &["G"]),
            skill("B", "b", &[], &["G"]),
            skill("C", "c", &[], &["G", "H"]),
            skill("D", "d", &[], &["H"]),
            skill("E", "e", &[], &[]),
        ])
        .unwrap();
        let ids = |v: BTreeSet<SkillId>| v.into_iter().map(|s| s.0).collect::<Vec<_>>();
        assert_eq!(ids(t.siblings("A").unwrap()), ["B", "C"]);
        assert_eq!(ids(t.siblings("C").unwrap()), ["A", "B", "D"]);
        assert!(t.siblings("E").unwrap().is_empty());
        assert!(matches!(t.siblings("Z"), Err(Error::UnknownSkill(_))));
    }

    #[test]
    fn surface_forms_dedup_after_normalization() {
        let t = Taxonomy::from_skills([
            skill("H", "Haskell", &[], &[]),
            skill("X", "X", &["x", "Y"], &[]),
            skill("M", "manage musical staff", &["manage musicians"], &[]),
        ])
        .unwrap();
        assert_eq!(t.surface_forms("H").unwrap(), ["Haskell"]);
        assert_eq!(t.surface_forms("X").unwrap(), ["X", "Y"]);
        assert_eq!(
            t.surface_forms("M").unwrap(),
            ["manage musical staff", "manage musicians"]
        );
    }

    #[test]
    fn skill_validation() {
        let id = SkillId::new("S").unwrap();
        assert!(matches!(
            Skill::new(id.clone(), " ", vec![], []),
            Err(Error::EmptyLabel(_))
        ));
        assert!(matches!(
            Skill::new(id.clone(), "s", vec![], ["S".to_string()]),
            Err(Error::SelfParent(_))
        ));
        let s = Skill::new(id, "s", vec!["C++".into(), "c++".into(), "b".into()], []).unwrap();
        assert_eq!(s.alt_labels, ["C++", "b"]);
        assert!(SkillId::new("").is_err());
    }

    #[test]
    fn esco_import() {
        let dir = tempfile::tempdir().unwrap();
        let skills = write(
            &dir,
            "skills.csv",
            "conceptType,conceptUri,preferredLabel,altLabels\n\
             KnowledgeSkillCompetence,u1,disarm land mine,\"find land mines\nsearch for land mines\"\n\
             KnowledgeSkillCompetence,u2,signal for explosion,\n",
        );
        let rels = write(&dir, "rel.csv", "conceptUri,broaderUri\nu1,g1\nu2,g1\nu9,g1\n");
        let import = import_esco_csv(&skills, &rels).unwrap();
        assert_eq!(import.skipped_relations, 1);
        let t = import.taxonomy;
        assert_eq!(t.len(), 2);
        assert_eq!(
            t.get("u1").unwrap().alt_labels,
            ["find land mines", "search for land mines"]
        );
        assert_eq!(t.siblings("u1").unwrap().len(), 1);

        // round trip through the canonical JSONL form
        let out = dir.path().join("t.jsonl");
        t.write_jsonl(&out).unwrap();
        assert_eq!(load_taxonomy(&out).unwrap(), t);
    }

    #[test]
    fn esco_single_row_no_relations() {
        let dir = tempfile::tempdir().unwrap();
        let skills = write(&dir, "s.csv", "conceptUri,preferredLabel,altLabels\nu1,Haskell,\n");
        let rels = write(&dir, "r.csv", "conceptUri,broaderUri\n");
        let import = import_esco_csv(&skills, &rels).unwrap();
        assert_eq!(import.taxonomy.len(), 1);
        assert!(import.taxonomy.get("u1").unwrap().broader.is_empty());
    }

    #[test]
    fn esco_missing_column() {
        let dir = tempfile::tempdir().unwrap();
        let skills = write(&dir, "s.csv", "conceptUri,altLabels\nu1,\n");
        let rels = write(&dir, "r.csv", "conceptUri,broaderUri\n");
        match import_esco_csv(&skills, &rels) {
            Err(Error::MissingColumn { column, .. }) => assert_eq!(column, "preferredLabel"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            import_esco_csv(&dir.path().join("nope.csv"), &rels),
            Err(Error::Io { .. })
        ));
    }
}
