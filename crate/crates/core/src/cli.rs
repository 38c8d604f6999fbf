//! Command-line front end.
//!
//! Every subcommand accepts `--config FILE` with `key = value` lines (keys are
//! long flag names without dashes, `#` starts a comment). Values from the file
//! are used only for flags not given on the command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::classifier::{hash_encoder_tag, ModelSet, TrainConfig, EXTERNAL_ENCODER};
use crate::embeddings::{read_store, EmbeddingStore, HashEncoder, SentenceEncoder, StoreEncoder};
use crate::error::{Error, Result};
use crate::evaluation::{
    benchmark_stats, convert_annotations_csv, evaluate, load_benchmark, supervision_quality, Dataset, GoldSentence,
    Split,
};
use crate::matcher::{corpus_stats, label_corpus, read_corpus, Matcher, PositiveSets, DEFAULT_CAP};
use crate::pipeline::{rows_to_csv, Arm, Experiment, DEFAULT_FRACTIONS};
use crate::ranking::{extract, write_predictions};
use crate::related::{build_related_index_with_limit, RelatedIndex, Strategy, NEIGHBOR_LIMIT};
use crate::sampler::{write_training_sets, Sampler, SamplingConfig, DEFAULT_NEGATIVES_PER_POSITIVE};
use crate::taxonomy::{import_esco_csv, load_taxonomy, Taxonomy};

#[derive(Parser, Debug)]
#[command(name = "skillex", version, about = "Distantly supervised skill extraction")]
struct Cli {
    /// Read default flag values from a `key = value` file
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for labeling, indexing and training (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Log progress to standard error
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert ESCO skill and relation CSV exports to a taxonomy file
    ImportEsco {
        /// Skills CSV with conceptUri, preferredLabel and altLabels columns
        #[arg(long)]
        skills: PathBuf,
        /// Broader-relation CSV with conceptUri and broaderUri columns
        #[arg(long)]
        relations: PathBuf,
        /// Taxonomy JSONL to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Label a corpus by literal matching and write positive sets
    Label {
        /// Taxonomy JSONL
        #[arg(long)]
        taxonomy: PathBuf,
        /// Corpus JSONL with `id` and `text` fields
        #[arg(long)]
        corpus: PathBuf,
        /// Maximum positives kept per skill
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        /// Seed for all sampling
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path
        #[arg(long)]
        out: PathBuf,
    },
    /// Report long-tail statistics of positive sets and benchmark bookkeeping
    Stats {
        /// Taxonomy JSONL
        #[arg(long)]
        taxonomy: PathBuf,
        /// Positive sets JSONL written by `label`
        #[arg(long)]
        positives: PathBuf,
        /// Also count sentences and spans of this benchmark
        #[arg(long)]
        benchmark: Option<PathBuf>,
        /// JSON report path (standard output when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a related-skill index
    BuildIndex {
        /// Taxonomy JSONL
        #[arg(long)]
        taxonomy: PathBuf,
        /// siblings, levenshtein or embedding
        #[arg(long)]
        strategy: Strategy,
        /// Skill label vectors keyed by skill id (embedding strategy)
        #[arg(long)]
        label_embeddings: Option<PathBuf>,
        /// Hash-encode labels with this dimension when no label vectors are given
        #[arg(long, default_value_t = 256)]
        hash_dim: usize,
        /// Neighbors kept per skill for ranked strategies
        #[arg(long, default_value_t = NEIGHBOR_LIMIT)]
        limit: usize,
        /// Output path
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one classifier per skill
    Train {
        #[command(flatten)]
        data: TrainArgs,
        /// Fraction of negatives drawn from related skills
        #[arg(long, default_value_t = 0.0)]
        hard_fraction: f64,
        /// Comma-separated strategies sharing the hard budget
        #[arg(long, value_delimiter = ',', default_value = "siblings,levenshtein,embedding")]
        strategies: Vec<Strategy>,
        /// Also write the sampled training sets as JSONL
        #[arg(long)]
        dump_training_sets: Option<PathBuf>,
        /// Model file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate over a grid of hard fractions
    Sweep {
        #[command(flatten)]
        data: TrainArgs,
        #[command(flatten)]
        bench: BenchArgs,
        /// Comma-separated hard fractions
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_FRACTIONS.to_vec())]
        fractions: Vec<f64>,
        /// Comma-separated arms: siblings, levenshtein, embedding or all
        #[arg(long, value_delimiter = ',', default_value = "siblings")]
        strategy: Vec<String>,
        /// CSV path (standard output when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train with all strategies and with each strategy left out
    Ablate {
        #[command(flatten)]
        data: TrainArgs,
        #[command(flatten)]
        bench: BenchArgs,
        /// Fraction of negatives drawn from related skills
        #[arg(long, default_value_t = 0.05)]
        hard_fraction: f64,
        /// CSV path (standard output when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model file on a benchmark
    Evaluate {
        /// Model file written by `train`
        #[arg(long)]
        models: PathBuf,
        #[command(flatten)]
        bench: BenchArgs,
        /// CSV path (standard output when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank skills for sentences
    Extract {
        /// Model file written by `train`
        #[arg(long)]
        models: PathBuf,
        /// Corpus JSONL of sentences to rank
        #[arg(long, conflicts_with = "text", required_unless_present = "text")]
        input: Option<PathBuf>,
        /// A single sentence to rank
        #[arg(long)]
        text: Option<String>,
        /// Sentence vectors; hash-encoded when absent and the models allow it
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Number of skills to return per sentence
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// JSONL path (standard output when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare literal-match labels with benchmark gold labels
    AuditSupervision {
        /// Taxonomy JSONL
        #[arg(long)]
        taxonomy: PathBuf,
        /// Benchmark JSONL
        #[arg(long)]
        benchmark: PathBuf,
        /// Only audit sentences of this split
        #[arg(long)]
        split: Option<Split>,
        /// JSON report path (standard output when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a span-annotation CSV to benchmark JSONL
    ConvertBenchmark {
        /// Taxonomy JSONL
        #[arg(long)]
        taxonomy: PathBuf,
        /// CSV with `sentence` and `label` columns, optionally `span` and `sentence_id`
        #[arg(long)]
        input: PathBuf,
        /// TECH or HOUSE
        #[arg(long)]
        dataset: Dataset,
        /// val or test
        #[arg(long)]
        split: Split,
        /// Prepended to every sentence id
        #[arg(long, default_value = "")]
        id_prefix: String,
        /// Output path
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Taxonomy JSONL
    #[arg(long)]
    taxonomy: PathBuf,
    /// Positive sets JSONL written by `label`
    #[arg(long)]
    positives: PathBuf,
    /// Corpus JSONL; needed to hash-encode sentences when --embeddings is absent
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Sentence vectors keyed by sentence id
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Dimension of the hash encoder used when --embeddings is absent
    #[arg(long, default_value_t = 256)]
    hash_dim: usize,
    /// Prebuilt related-skill index (repeatable); missing ones are built
    #[arg(long = "index")]
    indices: Vec<PathBuf>,
    /// Skill label vectors for the embedding strategy
    #[arg(long)]
    label_embeddings: Option<PathBuf>,
    /// Negatives sampled per positive sentence
    #[arg(long, default_value_t = DEFAULT_NEGATIVES_PER_POSITIVE)]
    negatives_per_positive: usize,
    /// Seed for all sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inverse regularization strength
    #[arg(long, default_value_t = 0.1)]
    c: f64,
    /// Maximum gradient-descent iterations
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Stop when the largest gradient component falls below this
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Benchmark JSONL
    #[arg(long)]
    benchmark: PathBuf,
    /// Vectors for benchmark sentences; hash-encoded when absent and the models allow it
    #[arg(long)]
    benchmark_embeddings: Option<PathBuf>,
}

/// Run the command line; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match merge_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Append `--key value` for config entries whose flag is not on the command line.
///
/// Only flags accepted by the chosen subcommand are injected, so one file can
/// serve several subcommands; keys no subcommand knows are rejected.
fn merge_config(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    use clap::CommandFactory;
    let path = args.iter().enumerate().find_map(|(i, a)| {
        let s = a.to_str()?;
        if s == "--config" {
            args.get(i + 1).map(PathBuf::from)
        } else {
            s.strip_prefix("--config=").map(PathBuf::from)
        }
    });
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;

    let cmd = Cli::command();
    let longs = |c: &clap::Command| -> BTreeSet<String> {
        c.get_arguments()
            .filter_map(|a| a.get_long())
            .map(String::from)
            .collect()
    };
    let global = longs(&cmd);
    let sub = args
        .iter()
        .filter_map(|a| a.to_str())
        .find_map(|a| cmd.find_subcommand(a));
    let accepted: BTreeSet<String> = match sub {
        Some(s) => global.iter().cloned().chain(longs(s)).collect(),
        None => global.clone(),
    };
    let known: BTreeSet<String> = cmd.get_subcommands().flat_map(longs).chain(global).collect();
    let given: BTreeSet<String> = args
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap().to_string())
        .collect();

    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(&path, i + 1, "expected `key = value`"))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if !known.contains(&key) {
            return Err(Error::parse(&path, i + 1, format!("unknown option {key:?}")));
        }
        if key == "config" || given.contains(&key) || !accepted.contains(&key) {
            continue;
        }
        match value {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{key}").into());
                args.push(value.into());
            }
        }
    }
    Ok(args)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).unwrap();
    s.push('\n');
    s
}

/// Loaded training inputs shared by train, sweep and ablate.
struct Loaded {
    /// Taxonomy JSONL
    taxonomy: Taxonomy,
    /// Positive sets JSONL written by `label`
    positives: PositiveSets,
    store: EmbeddingStore,
    indices: Vec<RelatedIndex>,
    hash_dim: Option<usize>,
    training: TrainConfig,
}

impl TrainArgs {
    fn load(&self, strategies: &BTreeSet<Strategy>) -> Result<Loaded> {
        let taxonomy = load_taxonomy(&self.taxonomy)?;
        let positives = PositiveSets::read_jsonl(&self.positives)?;
        let (store, hash_dim) = match &self.embeddings {
            Some(p) => (read_store(p)?, None),
            None => {
                let corpus = self.corpus.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("pass --embeddings, or --corpus to hash-encode sentences".into())
                })?;
                let needed: BTreeSet<&str> = positives.sets.values().flatten().map(String::as_str).collect();
                let sentences = read_corpus(corpus)?;
                let store = EmbeddingStore::from_hashed(
                    self.hash_dim,
                    sentences
                        .iter()
                        .filter(|s| needed.contains(s.id.as_str()))
                        .map(|s| (s.id.as_str(), s.text.as_str())),
                )?;
                (store, Some(self.hash_dim))
            }
        };
        let indices = self.indices(&taxonomy, strategies, hash_dim)?;
        let mut training = TrainConfig::new(store.dim());
        training.inverse_reg_c = self.c;
        training.max_iterations = self.max_iter;
        training.grad_tolerance = self.tol;
        Ok(Loaded {
            taxonomy,
            positives,
            store,
            indices,
            hash_dim,
            training,
        })
    }

    fn indices(
        &self,
        taxonomy: &Taxonomy,
        strategies: &BTreeSet<Strategy>,
        hash_dim: Option<usize>,
    ) -> Result<Vec<RelatedIndex>> {
        let mut out: BTreeMap<Strategy, RelatedIndex> = BTreeMap::new();
        for p in &self.indices {
            let idx = RelatedIndex::read_jsonl(p)?;
            out.insert(idx.strategy, idx);
        }
        for &s in strategies {
            if out.contains_key(&s) {
                continue;
            }
            log::info!("building {s} index");
            let labels = match s {
                Strategy::Embedding => Some(label_store(taxonomy, self.label_embeddings.as_deref(), hash_dim)?),
                _ => None,
            };
            out.insert(
                s,
                build_related_index_with_limit(taxonomy, s, labels.as_ref(), NEIGHBOR_LIMIT)?,
            );
        }
        Ok(out.into_values().collect())
    }

    fn sampling(&self, hard_fraction: f64, strategies: &BTreeSet<Strategy>) -> SamplingConfig {
        SamplingConfig {
            negatives_per_positive: self.negatives_per_positive,
            hard_fraction,
            enabled_strategies: strategies.clone(),
            strategy_weights: None,
            seed: self.seed,
        }
    }
}

fn label_store(taxonomy: &Taxonomy, path: Option<&Path>, hash_dim: Option<usize>) -> Result<EmbeddingStore> {
    match (path, hash_dim) {
        (Some(p), _) => read_store(p),
        (None, Some(dim)) => EmbeddingStore::from_hashed(
            dim,
            taxonomy.skills().map(|s| (s.id.as_str(), s.preferred_label.as_str())),
        ),
        (None, None) => Err(Error::InvalidConfig(
            "the embedding strategy needs --label-embeddings".into(),
        )),
    }
}

fn encoder_tag(hash_dim: Option<usize>) -> String {
    hash_dim.map_or_else(|| EXTERNAL_ENCODER.to_string(), hash_encoder_tag)
}

/// Benchmark vectors from a store, or the hash encoder when models were hash-trained.
fn bench_encoder<'a>(
    store: Option<&'a EmbeddingStore>,
    dim: usize,
    hash_trained: bool,
) -> Result<Box<dyn SentenceEncoder + 'a>> {
    match store {
        Some(s) => Ok(Box::new(StoreEncoder {
            store: s,
            fallback: None,
        })),
        None if hash_trained => Ok(Box::new(HashEncoder { dim })),
        None => Err(Error::InvalidConfig(
            "models were trained on external vectors; pass vectors for the benchmark sentences".into(),
        )),
    }
}

fn load_optional_store(path: Option<&Path>) -> Result<Option<EmbeddingStore>> {
    path.map(read_store).transpose()
}

fn experiment_rows<F>(data: &TrainArgs, bench: &BenchArgs, strategies: BTreeSet<Strategy>, f: F) -> Result<String>
where
    F: FnOnce(&Experiment<'_>) -> Result<Vec<crate::pipeline::SweepRow>>,
{
    let loaded = data.load(&strategies)?;
    let benchmark = load_benchmark(&bench.benchmark)?;
    let bench_store = load_optional_store(bench.benchmark_embeddings.as_deref())?;
    let encoder = bench_encoder(bench_store.as_ref(), loaded.store.dim(), loaded.hash_dim.is_some())?;
    let exp = Experiment {
        taxonomy: &loaded.taxonomy,
        positives: &loaded.positives,
        store: &loaded.store,
        indices: &loaded.indices,
        benchmark: &benchmark,
        encoder: encoder.as_ref(),
        training: loaded.training.clone(),
        encoder_tag: encoder_tag(loaded.hash_dim),
    };
    Ok(rows_to_csv(&f(&exp)?))
}

#[derive(Serialize)]
struct PartitionRow {
    dataset: Dataset,
    split: Split,
    sentences: usize,
    spans: usize,
    labeled_spans: usize,
    unique_labels: usize,
}

fn partition_rows(bench: &[GoldSentence]) -> Vec<PartitionRow> {
    benchmark_stats(bench)
        .into_iter()
        .map(|((dataset, split), s)| PartitionRow {
            dataset,
            split,
            sentences: s.sentences,
            spans: s.spans,
            labeled_spans: s.labeled_spans,
            unique_labels: s.unique_labels,
        })
        .collect()
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::ImportEsco { skills, relations, out } => {
            let imported = import_esco_csv(&skills, &relations)?;
            log::info!(
                "{} skills, {} relations skipped",
                imported.taxonomy.len(),
                imported.skipped_relations
            );
            imported.taxonomy.write_jsonl(&out)
        }
        Command::Label {
            taxonomy,
            corpus,
            cap,
            seed,
            out,
        } => {
            let taxonomy = load_taxonomy(&taxonomy)?;
            let matcher = Matcher::build(&taxonomy);
            let sentences = read_corpus(&corpus)?;
            let positives = label_corpus(&matcher, sentences.into_iter().map(Ok), cap, seed)?;
            log::info!("{} skills with positives", positives.len());
            positives.write_jsonl(&out)
        }
        Command::Stats {
            taxonomy,
            positives,
            benchmark,
            out,
        } => {
            #[derive(Serialize)]
            struct Report {
                /// Corpus JSONL with `id` and `text` fields
                corpus: crate::matcher::CorpusStats,
                #[serde(skip_serializing_if = "Option::is_none")]
                benchmark: Option<Vec<PartitionRow>>,
            }
            let taxonomy = load_taxonomy(&taxonomy)?;
            let positives = PositiveSets::read_jsonl(&positives)?;
            let benchmark = benchmark.map(|p| load_benchmark(&p)).transpose()?;
            let report = Report {
                corpus: corpus_stats(&positives, &taxonomy),
                benchmark: benchmark.as_deref().map(partition_rows),
            };
            emit(out.as_deref(), &json(&report))
        }
        Command::BuildIndex {
            taxonomy,
            strategy,
            label_embeddings,
            hash_dim,
            limit,
            out,
        } => {
            let taxonomy = load_taxonomy(&taxonomy)?;
            let labels = match strategy {
                Strategy::Embedding => Some(label_store(&taxonomy, label_embeddings.as_deref(), Some(hash_dim))?),
                _ => None,
            };
            build_related_index_with_limit(&taxonomy, strategy, labels.as_ref(), limit)?.write_jsonl(&out)
        }
        Command::Train {
            data,
            hard_fraction,
            strategies,
            dump_training_sets,
            out,
        } => {
            let strategies: BTreeSet<Strategy> = strategies.into_iter().collect();
            let needed = if hard_fraction > 0.0 {
                strategies.clone()
            } else {
                BTreeSet::new()
            };
            let loaded = data.load(&needed)?;
            let sampling = data.sampling(hard_fraction, &strategies);
            let mut models = crate::classifier::train_all(
                &loaded.taxonomy,
                &loaded.positives,
                &loaded.store,
                &loaded.indices,
                &sampling,
                &loaded.training,
            )?;
            models.encoder = encoder_tag(loaded.hash_dim);
            if let Some(path) = dump_training_sets {
                let sampler = Sampler::new(&loaded.positives, &loaded.indices);
                let sets = loaded
                    .positives
                    .sets
                    .keys()
                    .map(|s| sampler.sample(s.as_str(), &sampling))
                    .collect::<Result<Vec<_>>>()?;
                write_training_sets(&sets, &path)?;
            }
            log::info!("{} classifiers, {} untrained", models.len(), models.untrained.len());
            models.write(&out)
        }
        Command::Sweep {
            data,
            bench,
            fractions,
            strategy,
            out,
        } => {
            let arms = strategy.iter().map(|s| Arm::parse(s)).collect::<Result<Vec<_>>>()?;
            if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
                return Err(Error::InvalidConfig(format!("fraction {f} is outside [0, 1]")));
            }
            let needed: BTreeSet<Strategy> = if fractions.iter().any(|&f| f > 0.0) {
                arms.iter().flat_map(|a| a.strategies.iter().copied()).collect()
            } else {
                BTreeSet::new()
            };
            let csv = experiment_rows(&data, &bench, needed, |exp| exp.sweep(&arms, &fractions, data.seed))?;
            emit(out.as_deref(), &csv)
        }
        Command::Ablate {
            data,
            bench,
            hard_fraction,
            out,
        } => {
            let all = Strategy::ALL.into_iter().collect();
            let csv = experiment_rows(&data, &bench, all, |exp| exp.ablate(hard_fraction, data.seed))?;
            emit(out.as_deref(), &csv)
        }
        Command::Evaluate { models, bench, out } => {
            let models = ModelSet::read(&models)?;
            let benchmark = load_benchmark(&bench.benchmark)?;
            let store = load_optional_store(bench.benchmark_embeddings.as_deref())?;
            let encoder = bench_encoder(store.as_ref(), models.dim, models.is_hash_trained())?;
            let report = evaluate(&models, &benchmark, encoder.as_ref())?;
            emit(out.as_deref(), &report.to_csv())
        }
        Command::Extract {
            models,
            input,
            text,
            embeddings,
            k,
            out,
        } => {
            let models = ModelSet::read(&models)?;
            let store = load_optional_store(embeddings.as_deref())?;
            let encoder = bench_encoder(store.as_ref(), models.dim, models.is_hash_trained())?;
            let sentences = match (input, text) {
                (Some(p), _) => read_corpus(&p)?,
                (None, Some(t)) => vec![crate::matcher::Sentence {
                    id: "0".into(),
                    text: t,
                }],
                (None, None) => unreachable!("clap requires one of --input and --text"),
            };
            use rayon::prelude::*;
            let preds = sentences
                .par_iter()
                .map(|s| extract(&s.id, &s.text, encoder.as_ref(), &models, k))
                .collect::<Result<Vec<_>>>()?;
            match out {
                Some(p) => write_predictions(&preds, &p),
                None => {
                    for p in &preds {
                        println!("{}", serde_json::to_string(p).unwrap());
                    }
                    Ok(())
                }
            }
        }
        Command::AuditSupervision {
            taxonomy,
            benchmark,
            split,
            out,
        } => {
            #[derive(Serialize)]
            struct Report {
                #[serde(flatten)]
                quality: crate::evaluation::SupervisionQuality,
                sentences: usize,
                partitions: Vec<PartitionRow>,
            }
            let taxonomy = load_taxonomy(&taxonomy)?;
            let mut bench = load_benchmark(&benchmark)?;
            if let Some(split) = split {
                bench.retain(|s| s.split == split);
            }
            let matcher = Matcher::build(&taxonomy);
            let auto = label_corpus(
                &matcher,
                bench.iter().map(|s| {
                    Ok(crate::matcher::Sentence {
                        id: s.sentence_id.clone(),
                        text: s.text.clone(),
                    })
                }),
                usize::MAX,
                0,
            )?;
            let report = Report {
                quality: supervision_quality(&auto, &bench),
                sentences: bench.len(),
                partitions: partition_rows(&bench),
            };
            emit(out.as_deref(), &json(&report))
        }
        Command::ConvertBenchmark {
            taxonomy,
            input,
            dataset,
            split,
            id_prefix,
            out,
        } => {
            let taxonomy = load_taxonomy(&taxonomy)?;
            let records = convert_annotations_csv(&input, dataset, split, &taxonomy, &id_prefix)?;
            let mut text = String::new();
            for r in &records {
                text.push_str(&serde_json::to_string(r).unwrap());
                text.push('\n');
            }
            std::fs::write(&out, text).map_err(|e| Error::io(&out, e))
        }
    }
}
