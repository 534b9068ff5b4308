//! The `fscache` command line.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on I/O
//! errors. Diagnostics go to stderr; data goes to files or stdout.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::cache::{build_cache, sample_support, CacheModel, SupportSet, DEFAULT_ALPHA};
use crate::embedding::{merge, EmbeddingRecord, EmbeddingSet, Label};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_with, sweep, write_csv, EvalOptions, EvalReport, RealPool, SweepGrid, Variant,
};
use crate::finetune::{finetune, AdamWConfig, TrainLog};
use crate::format::{read_embedding_file, write_embedding_file};
use crate::inference::batch_predict;
use crate::synthetic::{generate, split_pools, SyntheticSpec};

const DEFAULT_K: usize = 4;
const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(
    name = "fscache",
    version,
    about = "Few-shot cache classifier for AI-generated image detection"
)]
struct Cli {
    /// TOML file with defaults for alpha, k, seed, lr, epochs, weight_decay, workers, variant.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for batch prediction and sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Omit timestamps from reports.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge and L2-normalize embedding files (.fseb or .jsonl) into one set.
    Ingest(IngestArgs),
    /// Check embedding files and print a JSON summary per file.
    Validate(ValidateArgs),
    /// Sample a k-shot support set and build the key-value cache.
    BuildCache(BuildCacheArgs),
    /// Classify queries, one NDJSON line per query.
    Predict(PredictArgs),
    /// Fine-tune cache keys on their support set.
    Finetune(FinetuneArgs),
    /// Evaluate a cache on a labeled query set.
    Eval(EvalArgs),
    /// Evaluate over a grid of shots, seeds and alphas.
    Sweep(SweepArgs),
    /// Generate a synthetic embedding world.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Backbone tag for .jsonl inputs.
    #[arg(long, default_value = "unknown")]
    backbone: String,
    /// Layer tag for .jsonl inputs.
    #[arg(long, default_value_t = 0)]
    layer: i64,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildCacheArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the sampled support records.
    #[arg(long)]
    support_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    cache: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Override the cache's alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// NDJSON output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OptimizerArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
}

#[derive(Debug, Args)]
struct FinetuneArgs {
    #[arg(long)]
    cache: PathBuf,
    #[arg(long)]
    support: PathBuf,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    cache: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    variant: Option<Variant>,
    /// Support set for fine-tuning an untuned cache inline (ftnet-t only).
    #[arg(long)]
    support: Option<PathBuf>,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[arg(long, default_value = "shared")]
    real_pool: RealPool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// One or more corpora (e.g. one per backbone layer).
    #[arg(long = "corpus", required = true)]
    corpora: Vec<PathBuf>,
    /// Fixed query set; otherwise each point evaluates on held-out corpus records.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    shots: Vec<usize>,
    /// Comma list or inclusive range, e.g. `0..4`.
    #[arg(long, default_value = "0..4")]
    seeds: String,
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "ftnet")]
    variants: Vec<Variant>,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[arg(long, default_value = "shared")]
    real_pool: RealPool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// JSON synthetic spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Write the query pool here and only the support pool to `--out`.
    #[arg(long)]
    queries_out: Option<PathBuf>,
}

impl clap::ValueEnum for Variant {
    fn value_variants<'a>() -> &'a [Self] {
        &[Variant::Ftnet, Variant::FtnetT]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            Variant::Ftnet => "ftnet",
            Variant::FtnetT => "ftnet-t",
        }))
    }
}

impl clap::ValueEnum for RealPool {
    fn value_variants<'a>() -> &'a [Self] {
        &[RealPool::Shared, RealPool::ByIdPrefix]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            RealPool::Shared => "shared",
            RealPool::ByIdPrefix => "by-id-prefix",
        }))
    }
}

/// Values a `--config` file may supply.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    alpha: Option<f64>,
    k: Option<usize>,
    seed: Option<u64>,
    lr: Option<f64>,
    epochs: Option<usize>,
    weight_decay: Option<f64>,
    workers: Option<usize>,
    variant: Option<Variant>,
}

/// Fully resolved settings, embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub inputs: BTreeMap<String, String>,
    pub k: usize,
    pub seed: u64,
    pub alpha: f64,
    pub variant: Option<Variant>,
    pub optimizer: AdamWConfig,
    pub outputs: BTreeMap<String, String>,
    pub workers: Option<usize>,
    pub verbosity: u8,
}

struct Resolver {
    file: ConfigFile,
}

impl Resolver {
    fn k(&self, flag: Option<usize>) -> usize {
        flag.or(self.file.k).unwrap_or(DEFAULT_K)
    }

    fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.file.seed).unwrap_or(DEFAULT_SEED)
    }

    fn alpha(&self, flag: Option<f64>) -> f64 {
        flag.or(self.file.alpha).unwrap_or(DEFAULT_ALPHA)
    }

    fn variant(&self, flag: Option<Variant>) -> Variant {
        flag.or(self.file.variant).unwrap_or(Variant::Ftnet)
    }

    fn optimizer(&self, args: &OptimizerArgs) -> AdamWConfig {
        let d = AdamWConfig::default();
        AdamWConfig {
            lr: args.lr.or(self.file.lr).unwrap_or(d.lr),
            weight_decay: args
                .weight_decay
                .or(self.file.weight_decay)
                .unwrap_or(d.weight_decay),
            epochs: args.epochs.or(self.file.epochs).unwrap_or(d.epochs),
            ..d
        }
    }
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();

    match run(cli) {
        Ok(()) => 0,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| at_path(path)(e.into()))?;
            toml::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let workers = cli.workers.or(file.workers);
    let ctx = Context {
        resolver: Resolver { file },
        deterministic: cli.deterministic,
        workers,
        verbosity: cli.verbose,
    };
    match workers {
        Some(0) => Err(Error::InvalidConfig("--workers must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            pool.install(|| dispatch(&ctx, cli.command))
        }
        None => dispatch(&ctx, cli.command),
    }
}

struct Context {
    resolver: Resolver,
    deterministic: bool,
    workers: Option<usize>,
    verbosity: u8,
}

impl Context {
    fn run_config(&self, subcommand: &str) -> RunConfig {
        RunConfig {
            subcommand: subcommand.to_string(),
            inputs: BTreeMap::new(),
            k: self.resolver.k(None),
            seed: self.resolver.seed(None),
            alpha: self.resolver.alpha(None),
            variant: None,
            optimizer: AdamWConfig::default(),
            outputs: BTreeMap::new(),
            workers: self.workers,
            verbosity: self.verbosity,
        }
    }

    fn timestamp(&self) -> Option<u64> {
        if self.deterministic {
            None
        } else {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .ok()
                .map(|d| d.as_secs())
        }
    }
}

fn at_path(path: &Path) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Io(io) => Error::Io(io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    }
}

fn read_set(path: &Path) -> Result<EmbeddingSet> {
    read_embedding_file(path).map_err(at_path(path))
}

fn load_cache(path: &Path) -> Result<CacheModel> {
    CacheModel::load(path).map_err(at_path(path))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn dispatch(ctx: &Context, command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Validate(a) => validate(a),
        Command::BuildCache(a) => build(ctx, a),
        Command::Predict(a) => predict_cmd(a),
        Command::Finetune(a) => finetune_cmd(ctx, a),
        Command::Eval(a) => eval_cmd(ctx, a),
        Command::Sweep(a) => sweep_cmd(ctx, a),
        Command::Synth(a) => synth(ctx, a),
    }
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    source: String,
    label: Label,
    vector: Vec<f32>,
}

fn read_jsonl(path: &Path, backbone: &str, layer: i64) -> Result<EmbeddingSet> {
    let text = fs::read_to_string(path).map_err(|e| at_path(path)(e.into()))?;
    let mut records = Vec::new();
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let r: JsonRecord = serde_json::from_str(line)
            .map_err(|e| Error::InvalidConfig(format!("{}:{}: {e}", path.display(), i + 1)))?;
        records.push(EmbeddingRecord::new(r.id, r.source, r.label, r.vector));
    }
    let dimension = records.first().map_or(0, |r| r.vector.len());
    let set = EmbeddingSet {
        dimension,
        backbone: backbone.to_string(),
        layer,
        normalized: false,
        records,
    };
    set.validate()?;
    Ok(set)
}

fn ingest(a: IngestArgs) -> Result<()> {
    let sets = a
        .inputs
        .iter()
        .map(|p| match p.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => read_jsonl(p, &a.backbone, a.layer),
            _ => read_set(p),
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = merge(&sets)?.normalized_copy()?;
    write_embedding_file(&merged, &a.out)?;
    log::info!("wrote {} records to {}", merged.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct FileSummary {
    path: String,
    dimension: usize,
    backbone: String,
    layer: i64,
    normalized: bool,
    count: usize,
    sources: BTreeMap<String, usize>,
}

fn validate(a: ValidateArgs) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for path in &a.files {
        let set = read_set(path)?;
        let summary = FileSummary {
            path: path_str(path),
            dimension: set.dimension,
            backbone: set.backbone.clone(),
            layer: set.layer,
            normalized: set.normalized,
            count: set.len(),
            sources: set.source_counts(),
        };
        serde_json::to_writer(&mut out, &summary).map_err(io::Error::from)?;
        writeln!(out)?;
    }
    Ok(())
}

fn build(ctx: &Context, a: BuildCacheArgs) -> Result<()> {
    let corpus = read_set(&a.corpus)?;
    let k = ctx.resolver.k(a.k);
    let seed = ctx.resolver.seed(a.seed);
    let support = sample_support(&corpus, k, seed)?;
    for (source, taken) in &support.shortfall {
        log::warn!("source {source:?} supplied only {taken} of {k} requested shots");
    }
    let cache = build_cache(&support, ctx.resolver.alpha(a.alpha))?;
    cache.save(&a.out)?;
    if let Some(path) = &a.support_out {
        write_embedding_file(&support.to_embedding_set(corpus.normalized), path)?;
    }
    log::info!(
        "cache of {} entries written to {}",
        cache.len(),
        a.out.display()
    );
    Ok(())
}

fn check_dims(cache: &CacheModel, queries: &EmbeddingSet) -> Result<()> {
    if cache.dimension() != queries.dimension {
        return Err(Error::MetadataMismatch(format!(
            "cache has dimension {} but queries have dimension {}",
            cache.dimension(),
            queries.dimension
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    label: Label,
    logit_real: f64,
    logit_fake: f64,
    max_similarity: f64,
    nearest_source: &'a str,
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let mut cache = load_cache(&a.cache)?;
    if let Some(alpha) = a.alpha {
        cache = cache.with_alpha(alpha)?;
    }
    let queries = read_set(&a.queries)?;
    check_dims(&cache, &queries)?;
    let preds = batch_predict(&queries, &cache)?;
    let mut out = open_output(a.out.as_deref())?;
    for (r, p) in queries.records.iter().zip(&preds) {
        let line = PredictionLine {
            id: &r.id,
            label: p.label,
            logit_real: p.logits.real(),
            logit_fake: p.logits.fake(),
            max_similarity: p.logits.affinity_stats.max_similarity,
            nearest_source: &cache.entry_sources[p.logits.affinity_stats.argmax_entry_index],
        };
        serde_json::to_writer(&mut out, &line).map_err(io::Error::from)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn load_support(path: &Path, cache: &CacheModel) -> Result<SupportSet> {
    let set = read_set(path)?;
    Ok(SupportSet::from_embedding_set(
        &set,
        cache.metadata.k,
        cache.metadata.seed,
    ))
}

#[derive(Serialize)]
struct TrainLogFile<'a> {
    run: &'a RunConfig,
    #[serde(flatten)]
    log: &'a TrainLog,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_unix_secs: Option<u64>,
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn finetune_cmd(ctx: &Context, a: FinetuneArgs) -> Result<()> {
    let cache = load_cache(&a.cache)?;
    let support = load_support(&a.support, &cache)?;
    let hyper = ctx.resolver.optimizer(&a.optimizer);
    let (tuned, log) = finetune(&cache, &support, hyper)?;
    tuned.save(&a.out)?;
    log::info!(
        "loss {:.6} -> {:.6}, support accuracy {:.4}",
        log.initial_loss(),
        log.final_loss,
        log.final_support_accuracy
    );
    if let Some(path) = &a.log {
        let mut run = ctx.run_config("finetune");
        run.inputs.insert("cache".into(), path_str(&a.cache));
        run.inputs.insert("support".into(), path_str(&a.support));
        run.outputs.insert("out".into(), path_str(&a.out));
        run.outputs.insert("log".into(), path_str(path));
        run.k = cache.metadata.k;
        run.seed = cache.metadata.seed;
        run.alpha = cache.alpha;
        run.variant = Some(Variant::FtnetT);
        run.optimizer = hyper;
        let file = TrainLogFile {
            run: &run,
            log: &log,
            generated_unix_secs: ctx.timestamp(),
        };
        write_json(&file, Some(path))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalFile<'a> {
    run: &'a RunConfig,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn eval_cmd(ctx: &Context, a: EvalArgs) -> Result<()> {
    let mut cache = load_cache(&a.cache)?;
    let queries = read_set(&a.queries)?;
    check_dims(&cache, &queries)?;
    let variant = ctx.resolver.variant(a.variant);
    let hyper = ctx.resolver.optimizer(&a.optimizer);
    let mut tuned_with = None;
    if variant == Variant::FtnetT && cache.key_mode == crate::cache::KeyMode::Normalized {
        let support_path = a.support.as_ref().ok_or_else(|| {
            Error::InvalidConfig(
                "ftnet-t on an untuned cache needs --support (or run `finetune` first)".into(),
            )
        })?;
        let support = load_support(support_path, &cache)?;
        cache = finetune(&cache, &support, hyper)?.0;
        tuned_with = Some(hyper);
    }
    let mut report = evaluate_with(
        &cache,
        &queries,
        variant,
        EvalOptions {
            real_pool: a.real_pool,
            finetune: tuned_with,
        },
    )?;
    report.generated_unix_secs = ctx.timestamp();

    let mut run = ctx.run_config("eval");
    run.inputs.insert("cache".into(), path_str(&a.cache));
    run.inputs.insert("queries".into(), path_str(&a.queries));
    if let Some(s) = &a.support {
        run.inputs.insert("support".into(), path_str(s));
    }
    if let Some(p) = &a.out {
        run.outputs.insert("out".into(), path_str(p));
    }
    if let Some(p) = &a.csv {
        run.outputs.insert("csv".into(), path_str(p));
    }
    run.k = cache.metadata.k;
    run.seed = cache.metadata.seed;
    run.alpha = cache.alpha;
    run.variant = Some(variant);
    run.optimizer = hyper;

    write_json(
        &EvalFile {
            run: &run,
            report: &report,
        },
        a.out.as_deref(),
    )?;
    if let Some(path) = &a.csv {
        write_csv(
            std::slice::from_ref(&report),
            BufWriter::new(File::create(path)?),
        )?;
    }
    Ok(())
}

/// Parses `"0..4"` (inclusive) or `"1,3,5"`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidConfig(format!("bad seed list {spec:?}"));
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

#[derive(Serialize)]
struct SweepFile<'a> {
    run: &'a RunConfig,
    reports: &'a [EvalReport],
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_unix_secs: Option<u64>,
}

fn sweep_cmd(ctx: &Context, a: SweepArgs) -> Result<()> {
    let seeds = parse_seeds(&a.seeds)?;
    let alphas = if a.alphas.is_empty() {
        vec![ctx.resolver.alpha(None)]
    } else {
        a.alphas.clone()
    };
    let grid = SweepGrid {
        shots: a.shots.clone(),
        alphas: alphas.clone(),
        seeds: seeds.clone(),
        variants: a.variants.clone(),
        finetune: ctx.resolver.optimizer(&a.optimizer),
        real_pool: a.real_pool,
    };
    let queries = a.queries.as_deref().map(read_set).transpose()?;
    let mut reports = Vec::new();
    for path in &a.corpora {
        let corpus = read_set(path)?;
        log::info!("sweeping {} (layer {})", path.display(), corpus.layer);
        reports.extend(sweep(&corpus, queries.as_ref(), &grid)?);
    }

    let mut run = ctx.run_config("sweep");
    for (i, p) in a.corpora.iter().enumerate() {
        run.inputs.insert(format!("corpus{i}"), path_str(p));
    }
    if let Some(q) = &a.queries {
        run.inputs.insert("queries".into(), path_str(q));
    }
    if let Some(p) = &a.out {
        run.outputs.insert("out".into(), path_str(p));
    }
    if let Some(p) = &a.csv {
        run.outputs.insert("csv".into(), path_str(p));
    }
    run.optimizer = grid.finetune;
    let file = SweepFile {
        run: &run,
        reports: &reports,
        generated_unix_secs: ctx.timestamp(),
    };
    write_json(&file, a.out.as_deref())?;
    if let Some(path) = &a.csv {
        write_csv(&reports, BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

fn synth(ctx: &Context, a: SynthArgs) -> Result<()> {
    let mut spec = match (&a.preset, &a.spec) {
        (_, Some(path)) => SyntheticSpec::from_json_file(path)?,
        (Some(name), None) => SyntheticSpec::preset(name, DEFAULT_SEED)?,
        (None, None) => SyntheticSpec::preset("genimage6", DEFAULT_SEED)?,
    };
    if a.seed.is_some() || a.spec.is_none() {
        spec.seed = ctx.resolver.seed(a.seed);
    }
    let world = generate(&spec)?;
    match &a.queries_out {
        Some(qpath) => {
            let (pool, queries) = split_pools(&world);
            write_embedding_file(&pool, &a.out)?;
            write_embedding_file(&queries, qpath)?;
        }
        None => write_embedding_file(&world, &a.out)?,
    }
    Ok(())
}
