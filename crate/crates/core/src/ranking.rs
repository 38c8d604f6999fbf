//! Score every skill for a sentence and keep the best `K`.

use std::path::Path;

use serde::Serialize;

use crate::classifier::{predict, ModelSet};
use crate::embeddings::{EmbeddingVector, SentenceEncoder};
use crate::error::{Error, Result};
use crate::io;
use crate::taxonomy::SkillId;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredSkill {
    pub skill_id: SkillId,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedPrediction {
    pub sentence_id: String,
    pub top: Vec<ScoredSkill>,
}

impl RankedPrediction {
    pub fn skill_ids(&self) -> Vec<SkillId> {
        self.top.iter().map(|s| s.skill_id.clone()).collect()
    }
}

/// Top `k` skills by score, ties broken by ascending id.
///
/// Skills known to the model set but never trained score 0 and always come
/// after every trained skill.
pub fn rank_skills(models: &ModelSet, x: &EmbeddingVector, k: usize) -> Result<Vec<ScoredSkill>> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if models.is_empty() {
        return Err(Error::EmptyModelSet);
    }
    if x.dim() != models.dim {
        return Err(Error::DimensionMismatch {
            expected: models.dim,
            found: x.dim(),
        });
    }
    let mut scored = models
        .classifiers
        .values()
        .map(|clf| {
            Ok(ScoredSkill {
                skill_id: clf.skill.clone(),
                score: predict(clf, x)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let order =
        |a: &ScoredSkill, b: &ScoredSkill| b.score.total_cmp(&a.score).then_with(|| a.skill_id.cmp(&b.skill_id));
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    let room = k - scored.len();
    scored.extend(models.untrained.iter().take(room).map(|id| ScoredSkill {
        skill_id: id.clone(),
        score: 0.0,
    }));
    Ok(scored)
}

/// Encode `text` and rank skills for it.
pub fn extract(
    sentence_id: &str,
    text: &str,
    encoder: &dyn SentenceEncoder,
    models: &ModelSet,
    k: usize,
) -> Result<RankedPrediction> {
    if encoder.dim() != models.dim {
        return Err(Error::DimensionMismatch {
            expected: models.dim,
            found: encoder.dim(),
        });
    }
    let x = encoder.encode(sentence_id, text)?;
    Ok(RankedPrediction {
        sentence_id: sentence_id.to_string(),
        top: rank_skills(models, &x, k)?,
    })
}

pub fn write_predictions(preds: &[RankedPrediction], path: &Path) -> Result<()> {
    let mut w = io::create(path)?;
    for p in preds {
        io::write_line(&mut w, path, &serde_json::to_string(p).unwrap())?;
    }
    io::finish(w, path)
}
