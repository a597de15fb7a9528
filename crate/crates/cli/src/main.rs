use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cqa_core::corpus::{load_documents, sample_question, write_documents_jsonl, SeedMode, StrataSpec};
use cqa_core::evaluation::{judgments_from_questions, load_qrels, per_query_diff, EvalOptions, MatchPolicy, Metric, TmrrMode};
use cqa_core::pipeline::{
    config_record, embedding_texts, load_annotator, load_provider, load_taxonomy, qc_hyperparams, run_ablation, run_latency_bench,
    run_pipeline, write_atomic, write_run, AblationGrid, Comparison, Dataset, PipelineConfig, ProviderKind, Resources,
};
use cqa_core::qtype::{
    coarse_accuracy, load_labeled, majority_baseline, split_train_test, train_embedding, train_svm, AnswerTypeClassifier,
    EmbeddingClassifier, SvmClassifier,
};
use cqa_core::ranking::load_runs;
use cqa_core::scoring::{cache_jsonl, WordAverageProvider};
use cqa_core::{Error, Result};

#[derive(Parser)]
#[command(name = "cqa", version, about = "Unsupervised answer ranking for complex questions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set aggregation=avg`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (overrides `workers`).
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        for o in &self.overrides {
            cfg.set(o)?;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Rank answers for every question and write a run file.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Evaluate the classifier x embedding x aggregation x combination grid.
    Ablate {
        #[command(flatten)]
        config: ConfigArgs,
        /// CSV report.
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Only the configured variant instead of the full grid.
        #[arg(long)]
        single: bool,
    },
    /// Score run files against judgments; t-test every pair of runs.
    Evaluate {
        /// Run files, as `name=path` or `path`.
        #[arg(short, long = "run", required = true)]
        runs: Vec<String>,
        /// Judgments JSONL (`question_id`, `answers`).
        #[arg(long, conflicts_with = "questions")]
        qrels: Option<PathBuf>,
        /// Questions JSONL; gold answers serve as judgments.
        #[arg(long)]
        questions: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Policy::Containment)]
        match_policy: Policy,
        #[arg(long, value_enum, default_value_t = Tmrr::ExpectedReciprocal)]
        tmrr: Tmrr,
        /// Summary CSV (stdout when absent).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Pairwise significance CSV.
        #[arg(long)]
        significance: Option<PathBuf>,
        /// Full reports as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Directory for per-query difference CSVs of the first two runs.
        #[arg(long)]
        diff_dir: Option<PathBuf>,
    },
    /// Time the per-question pipeline on a single worker.
    Bench {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 5)]
        iterations: usize,
        /// Another system's per-collection timings (JSON).
        #[arg(long)]
        compare: Option<PathBuf>,
        /// CSV report (stdout when absent).
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Draw a per-question document collection from ranked documents.
    SampleStrata {
        /// Ranked documents JSONL (ranks 1-50).
        #[arg(short, long)]
        documents: PathBuf,
        /// Standard collection name (`Top10`, `Strata-1` ... `Strata-5`).
        #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
        collection: Option<String>,
        /// Custom strata spec (JSON).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Use the seed for every question instead of deriving one per question.
        #[arg(long)]
        global_seed: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Train an answer-type classifier and report held-out accuracy.
    TrainQc {
        /// Labeled questions (`COARSE:fine question`).
        #[arg(short, long)]
        training: PathBuf,
        /// Configuration providing annotator, taxonomy and embeddings.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Kind::Svm)]
        kind: Kind,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Fraction of the data used for training in the held-out check.
        #[arg(long, default_value_t = 0.9)]
        train_fraction: f64,
        /// Model trained on all the data (JSON).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Precompute an embedding cache for every text a run will embed.
    EmbedCache {
        #[command(flatten)]
        config: ConfigArgs,
        /// Word vectors to embed with.
        #[arg(long)]
        vectors: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Exact,
    Containment,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tmrr {
    ExpectedReciprocal,
    ReciprocalOfExpected,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Svm,
    ExternalEmbedding,
}

fn write_or_print(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn to_json(value: &serde_json::Value) -> String {
    format!("{}\n", serde_json::to_string_pretty(value).expect("value serializes"))
}

/// Exit status for a run: per-question failures make it a data error.
fn run(config: &ConfigArgs, output: &Path) -> Result<ExitCode> {
    let cfg = config.load()?;
    let res = Resources::load(&cfg)?;
    let dataset = Dataset::load(&cfg)?;
    let out = run_pipeline(&cfg, &res, &dataset)?;
    write_run(output, &out, &cfg)?;
    eprintln!(
        "{} runs written to {} (config {}); {} questions failed",
        out.runs.len(),
        output.display(),
        out.config_id,
        out.errors.len()
    );
    if out.errors.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for e in &out.errors {
        eprintln!("  {}: {}", e.question_id, e.message);
    }
    Ok(ExitCode::from(1))
}

fn ablate(config: &ConfigArgs, output: &Path, json: Option<&Path>, single: bool) -> Result<ExitCode> {
    let cfg = config.load()?;
    let dataset = Dataset::load(&cfg)?;
    let grid = if single { AblationGrid::single(&cfg) } else { AblationGrid::default() };
    let report = run_ablation(&cfg, &dataset, &grid)?;
    write_atomic(output, &report.to_csv())?;
    if let Some(p) = json {
        let mut value = serde_json::to_value(&report).expect("report serializes");
        value["base_config"] = config_record(&cfg);
        write_atomic(p, &to_json(&value))?;
    }
    eprintln!("{} configurations evaluated", report.rows.len());
    for (variant, errors) in &report.errors {
        eprintln!("  {variant}: {} questions failed", errors.len());
    }
    Ok(if report.errors.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    runs: &[String],
    qrels: Option<&Path>,
    questions: Option<&Path>,
    policy: Policy,
    tmrr: Tmrr,
    output: Option<&Path>,
    significance: Option<&Path>,
    json: Option<&Path>,
    diff_dir: Option<&Path>,
) -> Result<ExitCode> {
    let policy = match policy {
        Policy::Exact => MatchPolicy::Exact,
        Policy::Containment => MatchPolicy::Containment,
    };
    let judgments = match (qrels, questions) {
        (Some(p), _) => load_qrels(p, policy)?,
        (None, Some(p)) => judgments_from_questions(&cqa_core::corpus::load_questions(p, cqa_core::corpus::SourceSet::Custom)?, policy)?,
        (None, None) => return Err(Error::Config("either --qrels or --questions is required".into())),
    };
    let mut named = Vec::new();
    for spec in runs {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| spec.clone());
                (name, p)
            }
        };
        named.push((name, load_runs(&path)?));
    }
    let options = EvalOptions {
        tmrr_mode: match tmrr {
            Tmrr::ExpectedReciprocal => TmrrMode::ExpectedReciprocal,
            Tmrr::ReciprocalOfExpected => TmrrMode::ReciprocalOfExpected,
        },
    };
    let eval = cqa_core::pipeline::evaluate_runs(&named, &judgments, options)?;
    write_or_print(output, &eval.summary_csv()?)?;
    if let Some(p) = significance {
        write_atomic(p, &eval.significance_csv())?;
    }
    if let Some(p) = json {
        write_atomic(p, &to_json(&serde_json::to_value(&eval).expect("evaluation serializes")))?;
    }
    if let Some(dir) = diff_dir {
        if eval.reports.len() < 2 {
            return Err(Error::Config("--diff-dir needs at least two runs".into()));
        }
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for metric in Metric::ALL {
            let diff = per_query_diff(&eval.reports[0], &eval.reports[1], metric)?;
            let file = format!("{}.csv", metric.name().replace('@', "_at_"));
            write_atomic(&dir.join(file), &diff.to_csv())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn bench(config: &ConfigArgs, iterations: usize, compare: Option<&Path>, output: Option<&Path>, json: Option<&Path>) -> Result<ExitCode> {
    let mut cfg = config.load()?;
    cfg.workers = 1;
    let res = Resources::load(&cfg)?;
    let dataset = Dataset::load(&cfg)?;
    let mut report = run_latency_bench(&cfg, &res, &dataset, iterations)?;
    if let Some(p) = compare {
        report = report.with_comparison(Comparison::load(p)?);
    }
    if report.low_confidence {
        eprintln!("single iteration: timings are low-confidence");
    }
    eprintln!("resource loading took {:.3} s (excluded)", report.load_seconds);
    write_or_print(output, &report.to_csv())?;
    if let Some(p) = json {
        let mut value = serde_json::to_value(&report).expect("report serializes");
        value["config"] = config_record(&cfg);
        write_atomic(p, &to_json(&value))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn sample_strata(
    documents: &Path,
    collection: Option<&str>,
    spec: Option<&Path>,
    seed: u64,
    global_seed: bool,
    output: &Path,
) -> Result<ExitCode> {
    let spec = match (collection, spec) {
        (Some(name), _) => StrataSpec::named(name, seed).ok_or_else(|| Error::Config(format!("unknown collection `{name}`")))?,
        (None, Some(p)) => StrataSpec { seed, ..StrataSpec::load(p)? },
        (None, None) => return Err(Error::Config("--collection or --spec is required".into())),
    };
    let mode = if global_seed { SeedMode::Global } else { SeedMode::PerQuestion };
    let mut sets = Vec::new();
    for docs in load_documents(documents)?.values() {
        sets.push(sample_question(docs, &spec, mode)?);
    }
    write_atomic(output, &write_documents_jsonl(&sets))?;
    eprintln!("{} questions sampled with {}", sets.len(), spec.name);
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn train_qc(
    training: &Path,
    config: Option<&Path>,
    kind: Kind,
    seed: Option<u64>,
    lambda: Option<f64>,
    epochs: Option<usize>,
    train_fraction: f64,
    output: Option<&Path>,
) -> Result<ExitCode> {
    let mut cfg = match config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(l) = lambda {
        cfg.qc_lambda = l;
    }
    if let Some(e) = epochs {
        cfg.qc_epochs = e;
    }
    cfg.validate()?;
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(Error::Config("--train-fraction must lie strictly between 0 and 1".into()));
    }
    let (taxonomy, type_map) = load_taxonomy(&cfg)?;
    let data = load_labeled(training, &taxonomy)?;
    let (train, test) = split_train_test(&data, train_fraction, cfg.seed);
    let params = qc_hyperparams(&cfg);

    let (accuracy, model_json) = match kind {
        Kind::Svm => {
            let annotator = load_annotator(&cfg)?;
            let mut held_out = SvmClassifier::new(train_svm(&train, annotator.as_ref(), &taxonomy, params)?, annotator.clone());
            held_out.taxonomy = taxonomy.clone();
            held_out.type_map = type_map.clone();
            let accuracy = coarse_accuracy(&held_out as &dyn AnswerTypeClassifier, &test)?;
            (accuracy, train_svm(&data, annotator.as_ref(), &taxonomy, params)?.to_json())
        }
        Kind::ExternalEmbedding => {
            let provider = match &cfg.paths.question_embeddings {
                Some(_) => load_provider(&cfg_with_cache(&cfg), ProviderKind::Cache)?,
                None => load_provider(&cfg, cfg.embedding_provider)?,
            };
            let mut held_out = EmbeddingClassifier::new(train_embedding(&train, provider.as_ref(), &taxonomy, params)?, provider.clone())?;
            held_out.taxonomy = taxonomy.clone();
            held_out.type_map = type_map.clone();
            let accuracy = coarse_accuracy(&held_out as &dyn AnswerTypeClassifier, &test)?;
            (accuracy, train_embedding(&data, provider.as_ref(), &taxonomy, params)?.to_json())
        }
    };
    let (majority, baseline) = majority_baseline(&train, &test);
    println!(
        "{{\"train\":{},\"test\":{},\"coarse_accuracy\":{accuracy:.4},\"majority_class\":\"{majority}\",\"majority_accuracy\":{baseline:.4}}}",
        train.len(),
        test.len()
    );
    if let Some(p) = output {
        write_atomic(p, &format!("{model_json}\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}

/// A config whose embedding cache is the question-embedding cache.
fn cfg_with_cache(cfg: &PipelineConfig) -> PipelineConfig {
    let mut c = cfg.clone();
    c.paths.embedding_cache = cfg.paths.question_embeddings.clone();
    c
}

fn embed_cache(config: &ConfigArgs, vectors: &Path, output: &Path) -> Result<ExitCode> {
    let cfg = config.load()?;
    let dataset = Dataset::load(&cfg)?;
    let provider = WordAverageProvider::load(vectors)?;
    let texts = embedding_texts(&cfg, &dataset)?;
    write_atomic(output, &cache_jsonl(&provider, texts.iter().map(String::as_str))?)?;
    eprintln!("{} texts embedded", texts.len());
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, output } => run(&config, &output),
        Command::Ablate { config, output, json, single } => ablate(&config, &output, json.as_deref(), single),
        Command::Evaluate {
            runs,
            qrels,
            questions,
            match_policy,
            tmrr,
            output,
            significance,
            json,
            diff_dir,
        } => evaluate(
            &runs,
            qrels.as_deref(),
            questions.as_deref(),
            match_policy,
            tmrr,
            output.as_deref(),
            significance.as_deref(),
            json.as_deref(),
            diff_dir.as_deref(),
        ),
        Command::Bench {
            config,
            iterations,
            compare,
            output,
            json,
        } => bench(&config, iterations, compare.as_deref(), output.as_deref(), json.as_deref()),
        Command::SampleStrata {
            documents,
            collection,
            spec,
            seed,
            global_seed,
            output,
        } => sample_strata(&documents, collection.as_deref(), spec.as_deref(), seed, global_seed, &output),
        Command::TrainQc {
            training,
            config,
            kind,
            seed,
            lambda,
            epochs,
            train_fraction,
            output,
        } => train_qc(&training, config.as_deref(), kind, seed, lambda, epochs, train_fraction, output.as_deref()),
        Command::EmbedCache { config, vectors, output } => embed_cache(&config, &vectors, &output),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
