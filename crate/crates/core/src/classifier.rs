//! Per-skill L2-regularized logistic regression.
//!
//! The objective for one skill with `N` examples is
//!
//! ```text
//! (1/N) * sum BCE(sigmoid(w.x + b), y) + ||w||^2 / (2 * C * N)
//! ```
//!
//! which has the same minimizer as the usual `C * sum BCE + ||w||^2 / 2`
//! form. The bias is not regularized. Training is full-batch gradient descent
//! with Armijo backtracking, started from zero, so it is deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embeddings::{EmbeddingStore, EmbeddingVector};
use crate::error::{Error, Result};
use crate::matcher::PositiveSets;
use crate::related::RelatedIndex;
use crate::sampler::{Sampler, SamplingConfig};
use crate::taxonomy::{SkillId, Taxonomy};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub inverse_reg_c: f64,
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub dim: usize,
}

impl TrainConfig {
    pub fn new(dim: usize) -> Self {
        TrainConfig {
            inverse_reg_c: 0.1,
            max_iterations: 500,
            grad_tolerance: 1e-6,
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inverse_reg_c > 0.0 && self.inverse_reg_c.is_finite()) {
            return Err(Error::InvalidConfig("C must be positive".into()));
        }
        if self.max_iterations == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig("iterations and dim must be positive".into()));
        }
        if self.grad_tolerance.is_nan() || self.grad_tolerance <= 0.0 {
            return Err(Error::InvalidConfig("gradient tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryClassifier {
    pub skill: SkillId,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl BinaryClassifier {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Probability that `x` carries the classifier's skill.
pub fn predict(classifier: &BinaryClassifier, x: &EmbeddingVector) -> Result<f64> {
    if x.dim() != classifier.dim() {
        return Err(Error::DimensionMismatch {
            expected: classifier.dim(),
            found: x.dim(),
        });
    }
    Ok(sigmoid(x.dot(&classifier.weights) + classifier.bias))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Row-major design matrix with 0/1 labels.
struct Dataset {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    fn new(dim: usize) -> Self {
        Dataset {
            dim,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    fn push(&mut self, v: &EmbeddingVector, label: f64) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        self.x.extend(v.values().iter().map(|&f| f64::from(f)));
        self.y.push(label);
        Ok(())
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.dim)
    }

    fn margins(&self, w: &[f64], b: f64) -> Vec<f64> {
        self.rows().map(|row| dot(row, w) + b).collect()
    }

    /// Mean BCE given precomputed margins, plus the penalty term.
    fn objective(&self, z: &[f64], w_sq: f64, c: f64) -> f64 {
        let n = self.len() as f64;
        let bce: f64 = z.iter().zip(&self.y).map(|(&z, &y)| softplus(z) - y * z).sum();
        bce / n + w_sq / (2.0 * c * n)
    }

    /// Gradient in `(w, b)` given margins; returns it as a `dim + 1` vector.
    fn gradient(&self, z: &[f64], w: &[f64], c: f64) -> Vec<f64> {
        let n = self.len() as f64;
        let mut g = vec![0f64; self.dim + 1];
        for ((row, &zi), &yi) in self.rows().zip(z).zip(&self.y) {
            let r = (sigmoid(zi) - yi) / n;
            for (gj, &xj) in g[..self.dim].iter_mut().zip(row) {
                *gj += r * xj;
            }
            g[self.dim] += r;
        }
        for (gj, &wj) in g[..self.dim].iter_mut().zip(w) {
            *gj += wj / (c * n);
        }
        g
    }
}

/// Objective value and its exact gradient (weights first, bias last).
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    examples: &[(EmbeddingVector, u8)],
    config: &TrainConfig,
) -> Result<(f64, Vec<f64>)> {
    if examples.is_empty() {
        return Err(Error::Invalid("no training examples".into()));
    }
    let mut data = Dataset::new(weights.len());
    for (x, y) in examples {
        if *y > 1 {
            return Err(Error::Invalid(format!("label {y} is not 0 or 1")));
        }
        data.push(x, f64::from(*y))?;
    }
    let z = data.margins(weights, bias);
    let loss = data.objective(&z, dot(weights, weights), config.inverse_reg_c);
    Ok((loss, data.gradient(&z, weights, config.inverse_reg_c)))
}

/// Optimizer trace for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Objective at the start and after every accepted step.
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn train_classifier(
    skill: SkillId,
    positives: &[&EmbeddingVector],
    negatives: &[&EmbeddingVector],
    config: &TrainConfig,
) -> Result<BinaryClassifier> {
    train_classifier_with_report(skill, positives, negatives, config).map(|(c, _)| c)
}

pub fn train_classifier_with_report(
    skill: SkillId,
    positives: &[&EmbeddingVector],
    negatives: &[&EmbeddingVector],
    config: &TrainConfig,
) -> Result<(BinaryClassifier, TrainReport)> {
    config.validate()?;
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Invalid(format!(
            "skill {skill} needs at least one positive and one negative"
        )));
    }
    let mut data = Dataset::new(config.dim);
    for v in positives {
        data.push(v, 1.0)?;
    }
    for v in negatives {
        data.push(v, 0.0)?;
    }
    let c = config.inverse_reg_c;
    let dim = config.dim;

    let mut w = vec![0f64; dim];
    let mut b = 0f64;
    let mut w_sq = 0f64;
    let mut z = data.margins(&w, b);
    let mut loss = data.objective(&z, w_sq, c);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss(skill.to_string()));
    }
    let mut losses = vec![loss];
    let mut step = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        let g = data.gradient(&z, &w, c);
        let g_inf = g.iter().fold(0f64, |m, v| m.max(v.abs()));
        if !g_inf.is_finite() {
            return Err(Error::NonFiniteLoss(skill.to_string()));
        }
        if g_inf <= config.grad_tolerance {
            converged = true;
            break;
        }
        let (gw, gb) = g.split_at(dim);
        let g_sq = dot(&g, &g);
        if !g_sq.is_finite() {
            return Err(Error::NonFiniteLoss(skill.to_string()));
        }
        let w_dot_g = dot(&w, gw);
        let gw_sq = dot(gw, gw);
        // margins move along X.gw + gb, so trial points cost O(N)
        let dz: Vec<f64> = data.rows().map(|row| dot(row, gw) + gb[0]).collect();

        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial_z: Vec<f64> = z.iter().zip(&dz).map(|(zi, di)| zi - t * di).collect();
            let trial_w_sq = w_sq - 2.0 * t * w_dot_g + t * t * gw_sq;
            let trial = data.objective(&trial_z, trial_w_sq, c);
            if trial.is_finite() && trial <= loss - ARMIJO_C * t * g_sq {
                accepted = Some((t, trial_z, trial));
                break;
            }
            t *= 0.5;
        }
        let Some((t, new_z, new_loss)) = accepted else {
            log::warn!("line search for {skill} stalled after {iterations} iterations");
            break;
        };
        for (wj, gj) in w.iter_mut().zip(gw) {
            *wj -= t * gj;
        }
        b -= t * gb[0];
        w_sq = dot(&w, &w);
        z = new_z;
        loss = new_loss;
        losses.push(loss);
        iterations += 1;
        step = t * 2.0;
    }

    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::NonFiniteLoss(skill.to_string()));
    }
    Ok((
        BinaryClassifier {
            skill,
            weights: w,
            bias: b,
            n_pos: positives.len(),
            n_neg: negatives.len(),
        },
        TrainReport {
            losses,
            iterations,
            converged,
        },
    ))
}

/// One classifier per skill plus the provenance needed to reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    pub dim: usize,
    pub fingerprint: String,
    /// How training vectors were produced, e.g. `hash:256` or `external`.
    pub encoder: String,
    pub classifiers: BTreeMap<SkillId, BinaryClassifier>,
    /// Known skills without positives, hence without a classifier.
    pub untrained: BTreeSet<SkillId>,
}

pub const EXTERNAL_ENCODER: &str = "external";

pub fn hash_encoder_tag(dim: usize) -> String {
    format!("hash:{dim}")
}

/// Stable digest of the configurations a model set was trained with.
pub fn fingerprint(training: &TrainConfig, sampling: &SamplingConfig) -> String {
    let canon = serde_json::json!({ "training": training, "sampling": sampling }).to_string();
    let digest = Sha256::digest(canon.as_bytes());
    digest[..16].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    dim: usize,
    count: usize,
    fingerprint: String,
    #[serde(default = "external")]
    encoder: String,
    #[serde(default)]
    untrained: BTreeSet<SkillId>,
}

fn external() -> String {
    EXTERNAL_ENCODER.to_string()
}

#[derive(Deserialize)]
struct ModelLine {
    skill_id: SkillId,
    bias: f64,
    weights: Vec<f64>,
    n_pos: usize,
    n_neg: usize,
}

fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

impl ModelSet {
    pub fn len(&self) -> usize {
        self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classifiers.is_empty()
    }

    pub fn is_hash_trained(&self) -> bool {
        self.encoder == hash_encoder_tag(self.dim)
    }

    /// Serialize to the line-oriented model format.
    pub fn to_string_canonical(&self) -> String {
        let header = ModelHeader {
            dim: self.dim,
            count: self.classifiers.len(),
            fingerprint: self.fingerprint.clone(),
            encoder: self.encoder.clone(),
            untrained: self.untrained.clone(),
        };
        let mut out = serde_json::to_string(&header).unwrap();
        out.push('\n');
        for (id, clf) in &self.classifiers {
            out.push_str("{\"skill_id\":");
            out.push_str(&serde_json::to_string(id).unwrap());
            out.push_str(",\"bias\":");
            out.push_str(&float17(clf.bias));
            out.push_str(",\"weights\":[");
            for (i, w) in clf.weights.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&float17(*w));
            }
            let _ = writeln!(out, "],\"n_pos\":{},\"n_neg\":{}}}", clf.n_pos, clf.n_neg);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string_canonical()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing model header"))?;
        let header: ModelHeader = serde_json::from_str(first).map_err(|e| Error::parse(path, 1, e))?;
        let mut classifiers = BTreeMap::new();
        for (idx, line) in lines {
            let rec: ModelLine = serde_json::from_str(line).map_err(|e| Error::parse(path, idx + 1, e))?;
            if rec.weights.len() != header.dim {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    Error::DimensionMismatch {
                        expected: header.dim,
                        found: rec.weights.len(),
                    },
                ));
            }
            let clf = BinaryClassifier {
                skill: rec.skill_id.clone(),
                weights: rec.weights,
                bias: rec.bias,
                n_pos: rec.n_pos,
                n_neg: rec.n_neg,
            };
            if classifiers.insert(rec.skill_id.clone(), clf).is_some() {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    Error::DuplicateSkill(rec.skill_id.to_string()),
                ));
            }
        }
        if classifiers.len() != header.count {
            return Err(Error::parse(
                path,
                1,
                format!("header says {} models, found {}", header.count, classifiers.len()),
            ));
        }
        Ok(ModelSet {
            dim: header.dim,
            fingerprint: header.fingerprint,
            encoder: header.encoder,
            classifiers,
            untrained: header.untrained,
        })
    }
}

/// Train a classifier for every skill that has positives.
///
/// Skills of `taxonomy` without positives are listed in
/// [`ModelSet::untrained`]. Work is spread over the current rayon pool; the
/// result does not depend on scheduling.
pub fn train_all(
    taxonomy: &Taxonomy,
    positives: &PositiveSets,
    store: &EmbeddingStore,
    indices: &[RelatedIndex],
    sampling: &SamplingConfig,
    training: &TrainConfig,
) -> Result<ModelSet> {
    sampling.validate()?;
    training.validate()?;
    if store.dim() != training.dim {
        return Err(Error::DimensionMismatch {
            expected: training.dim,
            found: store.dim(),
        });
    }
    let missing: BTreeSet<&str> = positives
        .sets
        .values()
        .flatten()
        .map(String::as_str)
        .filter(|id| !store.contains(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingVectors(missing.into_iter().map(String::from).collect()));
    }

    let sampler = Sampler::new(positives, indices);
    let skills: Vec<&SkillId> = positives.sets.keys().collect();
    let classifiers = skills
        .par_iter()
        .map(|&skill| {
            let set = sampler.sample(skill.as_str(), sampling)?;
            let vec = |id: &String| store.get(id).expect("checked above");
            let pos: Vec<_> = set.positive_ids.iter().map(vec).collect();
            let neg: Vec<_> = set.negative_ids.iter().map(vec).collect();
            let clf = train_classifier(skill.clone(), &pos, &neg, training)?;
            Ok((skill.clone(), clf))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;

    let untrained = taxonomy
        .ids()
        .filter(|id| !classifiers.contains_key(*id))
        .cloned()
        .collect();
    Ok(ModelSet {
        dim: training.dim,
        fingerprint: fingerprint(training, sampling),
        encoder: EXTERNAL_ENCODER.to_string(),
        classifiers,
        untrained,
    })
}
