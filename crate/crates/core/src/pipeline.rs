//! Train-and-evaluate loops behind the sweep and ablation commands.

use std::collections::BTreeSet;

use crate::classifier::{train_all, ModelSet, TrainConfig};
use crate::embeddings::{EmbeddingStore, SentenceEncoder};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Dataset, EvalReport, GoldSentence, Split};
use crate::matcher::PositiveSets;
use crate::related::{RelatedIndex, Strategy};
use crate::sampler::SamplingConfig;
use crate::taxonomy::Taxonomy;

pub const DEFAULT_FRACTIONS: [f64; 8] = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];

/// Everything needed to train a model set and score it on a benchmark.
pub struct Experiment<'a> {
    pub taxonomy: &'a Taxonomy,
    pub positives: &'a PositiveSets,
    pub store: &'a EmbeddingStore,
    pub indices: &'a [RelatedIndex],
    pub benchmark: &'a [GoldSentence],
    pub encoder: &'a dyn SentenceEncoder,
    pub training: TrainConfig,
    /// Recorded in every model set produced here.
    pub encoder_tag: String,
}

/// A named set of strategies that share the hard budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arm {
    pub name: String,
    pub strategies: BTreeSet<Strategy>,
}

impl Arm {
    pub fn single(s: Strategy) -> Self {
        Arm {
            name: s.name().to_string(),
            strategies: BTreeSet::from([s]),
        }
    }

    pub fn all() -> Self {
        Arm {
            name: "all".into(),
            strategies: Strategy::ALL.into_iter().collect(),
        }
    }

    /// `siblings`, `levenshtein`, `embedding` or `all`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(Arm::all()),
            other => Ok(Arm::single(other.parse()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub strategy: String,
    pub hard_fraction: f64,
    pub dataset: Dataset,
    pub split: Split,
    pub mrr: f64,
    pub rp5: f64,
    pub rp10: f64,
}

fn rows(strategy: &str, hard_fraction: f64, report: &EvalReport) -> Vec<SweepRow> {
    report
        .groups
        .iter()
        .map(|(&(dataset, split), m)| SweepRow {
            strategy: strategy.to_string(),
            hard_fraction,
            dataset,
            split,
            mrr: m.mrr,
            rp5: m.rp5,
            rp10: m.rp10,
        })
        .collect()
}

/// Header plus one line per row; RP values are percentages.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("strategy,hard_fraction,dataset,split,mrr,rp5,rp10\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{:.4},{:.4}\n",
            r.strategy,
            r.hard_fraction,
            r.dataset,
            r.split,
            r.mrr,
            100.0 * r.rp5,
            100.0 * r.rp10
        ));
    }
    out
}

impl Experiment<'_> {
    pub fn train(&self, sampling: &SamplingConfig) -> Result<ModelSet> {
        let mut models = train_all(
            self.taxonomy,
            self.positives,
            self.store,
            self.indices,
            sampling,
            &self.training,
        )?;
        models.encoder = self.encoder_tag.clone();
        Ok(models)
    }

    pub fn run(&self, sampling: &SamplingConfig) -> Result<(ModelSet, EvalReport)> {
        let models = self.train(sampling)?;
        let report = evaluate(&models, self.benchmark, self.encoder)?;
        Ok((models, report))
    }

    /// Every arm at every fraction. Fraction 0 is trained once and reported
    /// under each arm.
    pub fn sweep(&self, arms: &[Arm], fractions: &[f64], seed: u64) -> Result<Vec<SweepRow>> {
        if arms.is_empty() || fractions.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep needs at least one arm and one fraction".into(),
            ));
        }
        let mut baseline: Option<EvalReport> = None;
        let mut out = Vec::new();
        for arm in arms {
            for &rho in fractions {
                let report = if rho == 0.0 {
                    if baseline.is_none() {
                        baseline = Some(self.run(&SamplingConfig::baseline(seed))?.1);
                    }
                    baseline.clone().unwrap()
                } else {
                    let cfg = SamplingConfig::hard(rho, arm.strategies.iter().copied(), seed);
                    self.run(&cfg)?.1
                };
                log::info!("{} at {rho}: {:?}", arm.name, report.groups);
                out.extend(rows(&arm.name, rho, &report));
            }
        }
        Ok(out)
    }

    /// All strategies combined, then each one left out, at one fraction.
    pub fn ablate(&self, fraction: f64, seed: u64) -> Result<Vec<SweepRow>> {
        let mut arms = vec![Arm::all()];
        for s in Strategy::ALL {
            let mut strategies: BTreeSet<Strategy> = Strategy::ALL.into_iter().collect();
            strategies.remove(&s);
            arms.push(Arm {
                name: format!("-{}", s.name()),
                strategies,
            });
        }
        let mut out = Vec::new();
        for arm in &arms {
            let cfg = SamplingConfig::hard(fraction, arm.strategies.iter().copied(), seed);
            out.extend(rows(&arm.name, fraction, &self.run(&cfg)?.1));
        }
        Ok(out)
    }
}
