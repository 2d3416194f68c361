//! The `newsclass` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 memory budget
//! exhausted.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::classifier::FeatureMode;
use crate::corpus::{self, CorpusError, Document, FsSource, SynthSpec};
use crate::engine::{run_training, EngineConfig, EngineError, TrainParams};
use crate::eval::{run_learning_curve, run_scaling_bench, EvalError, LearningCurveSpec};
use crate::kv;
use crate::pipeline::{PipelineError, TrainedPipeline};
use crate::preprocess::{PreprocessConfig, PreprocessError, StemmerSpec, StopList};
use crate::vectorize::LogBase;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "newsclass", version, about = "TF-IDF + Naive Bayes news classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Concatenate a directory of item XML files into one bundle
    Pack {
        dir: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Generate a synthetic labeled corpus from a key=value spec file
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Train a model from a bundle
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        opts: TrainingOpts,
    },
    /// Label every document of a bundle or item XML file
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learning curve: accuracy per category over training-set sizes
    Curve {
        #[arg(long)]
        corpus: PathBuf,
        /// Comma-separated training documents per category
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long = "test-per-cat")]
        test_per_cat: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated categories (default: every label in the corpus)
        #[arg(long)]
        categories: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the confusion matrix of the largest size
        #[arg(long)]
        confusion: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        opts: TrainingOpts,
    },
    /// Training time over corpus sizes and worker counts
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        sizes: Option<String>,
        /// Comma-separated worker counts
        #[arg(long = "workers")]
        worker_counts: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: TrainingOpts,
    },
    /// Check that a bundle decodes and report its contents
    Validate {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Print version information
    Version,
}

/// Flags shared by the training subcommands. Every one may also come from
/// `--config`; flags win.
#[derive(Debug, Args, Default)]
struct TrainingOpts {
    /// key=value file supplying defaults for these flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<String>,
    /// counts or tfidf
    #[arg(long)]
    mode: Option<String>,
    #[arg(long = "min-words")]
    min_words: Option<String>,
    /// Stop list file, or "none"
    #[arg(long)]
    stoplist: Option<String>,
    /// Suffix table file (suffix<TAB>min_stem_length)
    #[arg(long)]
    stemmer: Option<String>,
    /// Per-worker memory budget in bytes
    #[arg(long = "mem-budget")]
    mem_budget: Option<String>,
    /// contiguous or round_robin
    #[arg(long = "shard-strategy")]
    shard_strategy: Option<String>,
    /// Logarithm base for TF-IDF (default e)
    #[arg(long = "log-base")]
    log_base: Option<String>,
}

/// What went wrong, classified by exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Resource(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Resource(_) => EXIT_RESOURCE,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Resource(m) => m,
        }
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::InvalidSpec(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::ResourceExhausted { .. } => Failure::Resource(e.to_string()),
            EngineError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Engine(inner) => inner.into(),
            EvalError::InvalidSpec(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<PreprocessError> for Failure {
    fn from(e: PreprocessError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| io_failure(path, e))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read(path)?).map_err(|_| Failure::Data(format!("{}: not UTF-8", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T, Failure> {
    raw.trim().parse().map_err(|_| Failure::Usage(format!("--{key}: invalid value {raw:?}")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>, Failure> {
    let items = raw.split(',').map(|s| parse_value(key, s)).collect::<Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err(Failure::Usage(format!("--{key}: empty list")));
    }
    Ok(items)
}

const CONFIG_KEYS: &[&str] = &[
    "workers",
    "alpha",
    "mode",
    "min-words",
    "stoplist",
    "stemmer",
    "mem-budget",
    "shard-strategy",
    "log-base",
    "sizes",
    "test-per-cat",
    "seed",
    "categories",
];

/// Flag values layered over an optional config file.
struct Settings {
    values: HashMap<&'static str, String>,
}

impl Settings {
    fn resolve(opts: &TrainingOpts, extra: &[(&'static str, Option<String>)]) -> Result<Self, Failure> {
        let mut values = HashMap::new();
        if let Some(path) = &opts.config {
            let pairs = kv::parse(&read_text(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            for (k, v) in pairs {
                let key = CONFIG_KEYS
                    .iter()
                    .find(|known| **known == k)
                    .ok_or_else(|| Failure::Usage(format!("{}: unknown key {k:?}", path.display())))?;
                values.insert(*key, v);
            }
        }
        let flags = [
            ("alpha", &opts.alpha),
            ("mode", &opts.mode),
            ("min-words", &opts.min_words),
            ("stoplist", &opts.stoplist),
            ("stemmer", &opts.stemmer),
            ("mem-budget", &opts.mem_budget),
            ("shard-strategy", &opts.shard_strategy),
            ("log-base", &opts.log_base),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k, v.clone());
            }
        }
        for (k, v) in extra {
            if let Some(v) = v {
                values.insert(k, v.clone());
            }
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        self.get(key).map(|v| parse_value(key, v)).transpose()
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, Failure> {
        self.get(key).map(|v| parse_list(key, v)).transpose()
    }

    fn preprocess(&self) -> Result<PreprocessConfig, Failure> {
        let mut cfg = PreprocessConfig::default();
        if let Some(n) = self.parsed("min-words")? {
            cfg.min_words = n;
        }
        match self.get("stoplist") {
            Some("none") => cfg.stoplist = StopList::empty(),
            Some(path) => cfg.stoplist = StopList::parse(&read_text(Path::new(path))?)?,
            None => {}
        }
        if let Some(path) = self.get("stemmer") {
            cfg.stemmer = StemmerSpec::parse(&read_text(Path::new(path))?)?;
        }
        Ok(cfg)
    }

    fn engine(&self) -> Result<EngineConfig, Failure> {
        let mut cfg = EngineConfig::default();
        if let Some(w) = self.parsed("workers")? {
            cfg.workers = w;
        }
        cfg.memory_budget_bytes = self.parsed("mem-budget")?;
        if let Some(s) = self.get("shard-strategy") {
            cfg.shard_strategy = s.parse().map_err(Failure::Usage)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn params(&self) -> Result<TrainParams, Failure> {
        let mut p = TrainParams::default();
        if let Some(a) = self.parsed::<f64>("alpha")? {
            if !(a.is_finite() && a > 0.0) {
                return Err(Failure::Usage(format!("--alpha must be positive, got {a}")));
            }
            p.alpha = a;
        }
        if let Some(m) = self.get("mode") {
            p.mode = FeatureMode::from_str(m).map_err(Failure::Usage)?;
        }
        if let Some(b) = self.parsed::<f64>("log-base")? {
            p.log_base = LogBase::new(b).map_err(|e| Failure::Usage(e.to_string()))?;
        }
        Ok(p)
    }
}

fn load_corpus(path: &Path) -> Result<Vec<Document>, Failure> {
    corpus::load_bundle(&FsSource, path).map_err(|e| match e {
        CorpusError::Io(io) => io_failure(path, io),
        other => Failure::Data(format!("{}: {other}", path.display())),
    })
}

fn cmd_pack(dir: &Path, out: &Path) -> Result<(), Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_failure(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_failure(dir, e))?.path();
        let is_xml = path.extension().is_some_and(|x| x.eq_ignore_ascii_case("xml"));
        if is_xml && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    let docs = corpus::load_item_files(&FsSource, &paths)?;
    write(out, corpus::pack(&docs).as_bytes())?;
    eprintln!("pack: {} items from {} files -> {}", docs.len(), paths.len(), out.display());
    Ok(())
}

fn cmd_synth(spec: &Path, out: &Path) -> Result<(), Failure> {
    let spec = SynthSpec::from_kv(&read_text(spec)?)?;
    let docs = corpus::synthesize(&spec)?;
    write(out, corpus::pack(&docs).as_bytes())?;
    eprintln!("synth: {} documents over {} categories -> {}", docs.len(), spec.categories.len(), out.display());
    Ok(())
}

fn cmd_train(corpus_path: &Path, out: &Path, workers: Option<usize>, opts: &TrainingOpts) -> Result<(), Failure> {
    let settings = Settings::resolve(opts, &[("workers", workers.map(|n| n.to_string()))])?;
    let (preprocess, engine, params) = (settings.preprocess()?, settings.engine()?, settings.params()?);
    let docs = load_corpus(corpus_path)?;
    eprintln!("train: {} documents, {} workers", docs.len(), engine.workers);
    let output = run_training(&docs, &preprocess, &engine, &params)?;
    let stats = output.stats.clone();
    let pipeline = TrainedPipeline::new(preprocess, &params, output);
    write(out, &pipeline.save())?;
    eprintln!(
        "train: {} terms, {} categories, {:.3}s, peak shard estimate {} bytes -> {}",
        pipeline.vocabulary.len(),
        pipeline.model.categories().len(),
        stats.wall_time.as_secs_f64(),
        stats.peak_estimated_bytes,
        out.display()
    );
    Ok(())
}

fn cmd_predict(model: &Path, input: &Path, out: &Path) -> Result<(), Failure> {
    let pipeline = TrainedPipeline::load(&read(model)?)?;
    let bytes = read(input)?;
    let docs = if corpus::is_bundle(&bytes) {
        corpus::unpack(&corpus::CorpusBundle::from_bytes(bytes))?
    } else {
        corpus::load_item_files(&InMemory(bytes), &[input])?
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::Data(e.to_string());
    w.write_record(["id", "label"]).map_err(csv_err)?;
    for doc in &docs {
        let p = pipeline.classify(doc);
        w.write_record([doc.id.as_str(), p.label.as_str()]).map_err(csv_err)?;
    }
    let csv = w.into_inner().map_err(|e| Failure::Data(e.to_string()))?;
    write(out, &csv)?;
    eprintln!("predict: {} documents -> {}", docs.len(), out.display());
    Ok(())
}

/// Serves already-read bytes for any path.
struct InMemory(Vec<u8>);

impl corpus::ByteSource for InMemory {
    fn read_all(&self, _: &Path) -> std::io::Result<Vec<u8>> {
        Ok(self.0.clone())
    }
}

fn corpus_labels(docs: &[Document]) -> Vec<String> {
    let mut labels: Vec<String> = docs.iter().filter_map(|d| d.label.clone()).collect();
    labels.sort();
    labels.dedup();
    labels
}

#[allow(clippy::too_many_arguments)]
fn cmd_curve(
    corpus_path: &Path,
    sizes: Option<String>,
    test_per_cat: Option<usize>,
    seed: Option<u64>,
    categories: Option<String>,
    out: &Path,
    confusion: Option<&Path>,
    workers: Option<usize>,
    opts: &TrainingOpts,
) -> Result<(), Failure> {
    let settings = Settings::resolve(
        opts,
        &[
            ("workers", workers.map(|n| n.to_string())),
            ("sizes", sizes),
            ("test-per-cat", test_per_cat.map(|n| n.to_string())),
            ("seed", seed.map(|n| n.to_string())),
            ("categories", categories),
        ],
    )?;
    let docs = load_corpus(corpus_path)?;
    let categories = match settings.get("categories") {
        Some(list) => list.split(',').map(|c| c.trim().to_owned()).collect(),
        None => corpus_labels(&docs),
    };
    let sizes = settings.list("sizes")?.unwrap_or_else(|| vec![10, 50, 100]);
    let mut spec = LearningCurveSpec::new(categories, sizes);
    if let Some(t) = settings.parsed("test-per-cat")? {
        spec.test_docs_per_category = t;
    }
    if let Some(s) = settings.parsed("seed")? {
        spec.seed = s;
    }
    spec.preprocess = settings.preprocess()?;
    spec.engine = settings.engine()?;
    spec.params = settings.params()?;
    eprintln!(
        "curve: {} categories, sizes {:?}, {} test docs per category",
        spec.categories.len(),
        spec.train_sizes,
        spec.test_docs_per_category
    );
    let report = run_learning_curve(&docs, &spec)?;
    write(out, report.to_csv().as_bytes())?;
    if let Some(path) = confusion {
        write(path, report.confusion_csv().as_bytes())?;
    }
    eprintln!("curve: {} rows -> {}", report.rows.len(), out.display());
    Ok(())
}

fn cmd_bench(
    corpus_path: &Path,
    sizes: Option<String>,
    worker_counts: Option<String>,
    out: &Path,
    opts: &TrainingOpts,
) -> Result<(), Failure> {
    // `workers` is a list here, from the flag or the config file.
    let settings = Settings::resolve(opts, &[("sizes", sizes), ("workers", worker_counts)])?;
    let sizes: Vec<usize> = settings.list("sizes")?.ok_or_else(|| Failure::Usage("bench needs --sizes".into()))?;
    let workers: Vec<usize> = settings.list("workers")?.unwrap_or_else(|| vec![1, 2, 4]);
    let mut base = settings.engine_without_workers()?;
    base.workers = 1;
    let docs = load_corpus(corpus_path)?;
    eprintln!("bench: sizes {sizes:?}, workers {workers:?}");
    let report = run_scaling_bench(&docs, &sizes, &workers, &base, &settings.preprocess()?, &settings.params()?)?;
    write(out, report.to_csv().as_bytes())?;
    eprintln!("bench: {} cells -> {}", report.rows.len(), out.display());
    Ok(())
}

impl Settings {
    fn engine_without_workers(&self) -> Result<EngineConfig, Failure> {
        let mut cfg = EngineConfig { memory_budget_bytes: self.parsed("mem-budget")?, ..EngineConfig::default() };
        if let Some(s) = self.get("shard-strategy") {
            cfg.shard_strategy = s.parse().map_err(Failure::Usage)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn cmd_validate(corpus_path: &Path) -> Result<(), Failure> {
    let docs = load_corpus(corpus_path)?;
    let mut per_label: BTreeMap<&str, usize> = BTreeMap::new();
    let mut unlabeled = 0;
    for (i, d) in docs.iter().enumerate() {
        if d.text.trim().is_empty() {
            return Err(Failure::Data(format!("item {i} ({:?}) has empty text", d.id)));
        }
        match d.label.as_deref() {
            Some(l) if l.is_empty() || l.trim() != l => {
                return Err(Failure::Data(format!("item {i} ({:?}) has a malformed label", d.id)));
            }
            Some(l) => *per_label.entry(l).or_default() += 1,
            None => unlabeled += 1,
        }
        if d.tokens.iter().any(String::is_empty) {
            return Err(Failure::Data(format!("item {i} ({:?}) has an empty token", d.id)));
        }
    }
    println!("items: {}", docs.len());
    println!("unlabeled: {unlabeled}");
    for (label, n) in per_label {
        println!("category {label}: {n}");
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Pack { dir, out } => cmd_pack(&dir, &out),
        Command::Synth { spec, out } => cmd_synth(&spec, &out),
        Command::Train { corpus, out, workers, opts } => cmd_train(&corpus, &out, workers, &opts),
        Command::Predict { model, input, out } => cmd_predict(&model, &input, &out),
        Command::Curve { corpus, sizes, test_per_cat, seed, categories, out, confusion, workers, opts } => {
            cmd_curve(&corpus, sizes, test_per_cat, seed, categories, &out, confusion.as_deref(), workers, &opts)
        }
        Command::Bench { corpus, sizes, worker_counts, out, opts } => {
            cmd_bench(&corpus, sizes, worker_counts, &out, &opts)
        }
        Command::Validate { corpus } => cmd_validate(&corpus),
        Command::Version => {
            println!("newsclass {}", env!("CARGO_PKG_VERSION"));
            println!("synthetic corpus generator: {}", crate::rng::ALGORITHM_ID);
            Ok(())
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}
