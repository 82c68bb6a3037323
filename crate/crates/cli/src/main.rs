//! `shotcol` command line: generate a corpus, pretrain, extract embeddings,
//! train the boundary classifier, predict, evaluate and retrieve.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shotcol::boundary::{predict_boundaries, train_classifier, BoundaryClassifier, BoundarySample, PredictionRecord};
use shotcol::config::{Profile, RunConfig};
use shotcol::corpus::{generate_corpus, load_corpus, save_corpus, split_corpus, Corpus, Split, CORPUS_VERSION};
use shotcol::eval::{average_precision, recall_at_threshold, MetricsCounts, MetricsReport, RankedPredictions};
use shotcol::io::{read_jsonl, sha256_hex, write_json, write_jsonl};
use shotcol::pipeline::{
    corpus_knn, corpus_samples, cue_points_from_predictions, embed_corpus, prediction_records, random_encoder,
    raw_pixel_embeddings, title_durations, EmbeddingSet,
};
use shotcol::pretrain::{pretrain, Modality, PretrainOutcome};

#[derive(Parser, Debug)]
#[command(name = "shotcol", version, about = "Shot-contrastive pretraining and scene-boundary detection")]
struct Cli {
    /// TOML overlay applied on top of the profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "desk")]
    profile: String,
    /// Overrides the run seed (and the generator seed for `generate`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory; every default input and output path is resolved inside it.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic corpus.
    Generate(OutputArg),
    /// Pretrain the shot encoder.
    Pretrain(PretrainArgs),
    /// Embed every shot with a pretrained or baseline encoder.
    Extract(ExtractArgs),
    /// Train the boundary classifier on the training titles.
    Train(TrainArgs),
    /// Score boundaries and select cue-points.
    Predict(PredictArgs),
    /// Compute AP, recall and k-NN precision.
    Evaluate(EvaluateArgs),
    /// k-NN same-scene retrieval precision for several k.
    Retrieve(RetrieveArgs),
}

#[derive(Args, Debug)]
struct OutputArg {
    /// Output location (defaults to the configured path inside --out).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PretrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    modality: Option<ModalityArg>,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModalityArg {
    Visual,
    Audio,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Visual => Modality::Visual,
            ModalityArg::Audio => Modality::Audio,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Baseline {
    RandomEncoder,
    RawPixel,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Pretraining output directory.
    #[arg(long, conflicts_with = "baseline")]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// Encoder input for the random-encoder baseline.
    #[arg(long, value_enum, requires = "baseline")]
    modality: Option<ModalityArg>,
    /// Embedding directory to concatenate after the extracted features.
    #[arg(long)]
    fuse_with: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Leading fraction of the training titles that keep their labels.
    #[arg(long, default_value_t = 1.0)]
    label_fraction: f64,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitName {
    Train,
    Val,
    Test,
    All,
}

#[derive(Args, Debug)]
struct ModelInputs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    classifier: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    inputs: ModelInputs,
    #[command(flatten)]
    output: OutputArg,
    /// Cue-point output (defaults to the configured path inside --out).
    #[arg(long)]
    cuepoints: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Labelled prediction records; scored with the classifier when absent.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[command(flatten)]
    inputs: ModelInputs,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Comma-separated neighbour counts (defaults to the configured list).
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    #[arg(long, value_enum, default_value = "all")]
    split: SplitName,
    #[command(flatten)]
    output: OutputArg,
}

/// Everything needed to re-run the command that produced a directory.
#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    args: Vec<String>,
    profile: &'a str,
    seed: u64,
    config_hash: String,
    config: &'a RunConfig,
    versions: BTreeMap<&'static str, String>,
    outputs: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct ErrorRecord {
    status: &'static str,
    kind: String,
    path: Option<String>,
    message: String,
}

#[derive(Serialize)]
struct RetrievalTable {
    source: String,
    titles: usize,
    precision_by_k: BTreeMap<usize, f64>,
    queries: usize,
    skipped_titles_by_k: BTreeMap<usize, usize>,
}

struct RunContext {
    cfg: RunConfig,
    out: PathBuf,
    profile: String,
    args: Vec<String>,
}

impl RunContext {
    fn resolve(&self, explicit: &Option<PathBuf>, configured: &Path) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.out.join(configured))
    }
}

fn require(path: &Path) -> shotcol::Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(shotcol::Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "input does not exist"),
        })
    }
}

fn load_corpus_at(path: &Path) -> anyhow::Result<Corpus> {
    require(path)?;
    Ok(load_corpus(path)?)
}

fn load_embeddings_at(path: &Path) -> anyhow::Result<EmbeddingSet> {
    require(path)?;
    Ok(EmbeddingSet::load(path)?)
}

/// Hashes every regular file under `root` (or `root` itself), keyed by path
/// relative to `base`.
fn hash_outputs(base: &Path, root: &Path, out: &mut BTreeMap<String, String>) -> anyhow::Result<()> {
    if root.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(root)
            .with_context(|| format!("listing {}", root.display()))?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.sort();
        for p in entries {
            hash_outputs(base, &p, out)?;
        }
    } else if root.is_file() {
        let name = root.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if !name.starts_with("run_manifest.") {
            let rel = root.strip_prefix(base).unwrap_or(root);
            out.insert(rel.to_string_lossy().into_owned(), sha256_hex(&std::fs::read(root)?));
        }
    }
    Ok(())
}

/// Writes `run_manifest.<command>.json` into `dir`, hashing `outputs`.
fn write_manifest(ctx: &RunContext, command: &str, dir: &Path, outputs: &[&Path]) -> anyhow::Result<()> {
    let mut hashes = BTreeMap::new();
    for o in outputs {
        hash_outputs(dir, o, &mut hashes)?;
    }
    let versions = BTreeMap::from([
        ("shotcol", env!("CARGO_PKG_VERSION").to_string()),
        ("corpus_format", CORPUS_VERSION.to_string()),
    ]);
    let manifest = RunManifest {
        command,
        args: ctx.args.clone(),
        profile: &ctx.profile,
        seed: ctx.cfg.seed,
        config_hash: ctx.cfg.hash(),
        config: &ctx.cfg,
        versions,
        outputs: hashes,
    };
    write_json(&dir.join(format!("run_manifest.{command}.json")), &manifest)?;
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn select_titles(corpus: &Corpus, split: &Split, which: SplitName) -> anyhow::Result<Corpus> {
    let ids = match which {
        SplitName::Train => &split.train,
        SplitName::Val => &split.val,
        SplitName::Test => &split.test,
        SplitName::All => return Ok(corpus.clone()),
    };
    Ok(corpus.subset(ids)?)
}

fn run_split(ctx: &RunContext, corpus: &Corpus) -> anyhow::Result<Split> {
    Ok(split_corpus(&corpus.title_ids(), ctx.cfg.task.split_ratios, ctx.cfg.seed)?)
}

fn cmd_generate(ctx: &RunContext, args: &OutputArg) -> anyhow::Result<()> {
    let dir = ctx.resolve(&args.output, &ctx.cfg.paths.corpus);
    let corpus = generate_corpus(&ctx.cfg.generator)?;
    save_corpus(&corpus, &dir)?;
    log::info!("wrote {} titles, {} shots to {}", corpus.titles.len(), corpus.shot_count(), dir.display());
    write_manifest(ctx, "generate", &dir, &[&dir])
}

fn cmd_pretrain(ctx: &RunContext, args: &PretrainArgs) -> anyhow::Result<()> {
    let corpus = load_corpus_at(&ctx.resolve(&args.corpus, &ctx.cfg.paths.corpus))?;
    let dir = ctx.resolve(&args.output.output, &ctx.cfg.paths.pretrain);
    let mut cfg = ctx.cfg.pretrain.clone();
    if let Some(m) = args.modality {
        cfg.encoder.modality = m.into();
    }
    let outcome = pretrain(&corpus, &cfg, ctx.cfg.seed)?;
    outcome.save(&dir)?;
    write_manifest(ctx, "pretrain", &dir, &[&dir])
}

fn cmd_extract(ctx: &RunContext, args: &ExtractArgs) -> anyhow::Result<()> {
    let corpus = load_corpus_at(&ctx.resolve(&args.corpus, &ctx.cfg.paths.corpus))?;
    let dir = ctx.resolve(&args.output.output, &ctx.cfg.paths.embeddings);
    let normalize = ctx.cfg.pretrain.normalize_embeddings;
    let mut encoder_cfg = ctx.cfg.pretrain.encoder.clone();
    if let Some(m) = args.modality {
        encoder_cfg.modality = m.into();
    }
    let set = match args.baseline {
        Some(Baseline::RandomEncoder) => {
            let (encoder, params) = random_encoder(&encoder_cfg, &corpus, ctx.cfg.seed)?;
            embed_corpus(&encoder, &params, &corpus, normalize, "random-encoder")?
        }
        Some(Baseline::RawPixel) => raw_pixel_embeddings(&encoder_cfg, &corpus)?,
        None => {
            let ckpt = ctx.resolve(&args.checkpoint, &ctx.cfg.paths.pretrain);
            require(&ckpt)?;
            let outcome = PretrainOutcome::load(&ckpt)?;
            embed_corpus(&outcome.encoder, &outcome.query, &corpus, normalize, "shotcol")?
        }
    };
    let set = match &args.fuse_with {
        Some(other) => set.fuse(Some(&load_embeddings_at(other)?))?,
        None if ctx.cfg.task.fuse_modalities => {
            anyhow::bail!(shotcol::Error::Config("task.fuse_modalities is set but --fuse-with was not given".into()))
        }
        None => set,
    };
    set.save(&dir)?;
    write_manifest(ctx, "extract", &dir, &[&dir])
}

fn cmd_train(ctx: &RunContext, args: &TrainArgs) -> anyhow::Result<()> {
    if !(args.label_fraction > 0.0 && args.label_fraction <= 1.0) {
        anyhow::bail!(shotcol::Error::InvalidArgument(format!(
            "--label-fraction must be in (0, 1], got {}",
            args.label_fraction
        )));
    }
    let corpus = load_corpus_at(&ctx.resolve(&args.corpus, &ctx.cfg.paths.corpus))?;
    let embeddings = load_embeddings_at(&ctx.resolve(&args.embeddings, &ctx.cfg.paths.embeddings))?;
    let path = ctx.resolve(&args.output.output, &ctx.cfg.paths.classifier);
    let dir = parent_dir(&path);

    let split = run_split(ctx, &corpus)?;
    let keep = ((split.train.len() as f64 * args.label_fraction).round() as usize).clamp(1, split.train.len());
    let train = corpus.subset(&split.train[..keep])?;
    let samples = corpus_samples(&train, &embeddings, ctx.cfg.classifier.context, ctx.cfg.task.sample_mode)?;
    let (classifier, curves) = train_classifier(&samples, &ctx.cfg.classifier, ctx.cfg.seed)?;
    log::info!(
        "trained on {} titles ({} samples): loss {:.4} -> {:.4}",
        keep,
        samples.len(),
        curves.initial_loss,
        curves.loss.last().copied().unwrap_or(curves.initial_loss)
    );
    classifier.save(&path)?;
    let curves_path = dir.join("curves.json");
    let split_path = dir.join("split.json");
    write_json(&curves_path, &curves)?;
    write_json(&split_path, &split)?;
    let params = path.with_extension("params.json");
    let blob = path.with_extension("params.bin");
    write_manifest(ctx, "train", &dir, &[&path, &params, &blob, &curves_path, &split_path])
}

/// Test-split samples and labelled prediction records from a classifier.
fn score_split(
    ctx: &RunContext,
    inputs: &ModelInputs,
) -> anyhow::Result<(Corpus, EmbeddingSet, Vec<BoundarySample>, Vec<PredictionRecord>)> {
    let corpus = load_corpus_at(&ctx.resolve(&inputs.corpus, &ctx.cfg.paths.corpus))?;
    let embeddings = load_embeddings_at(&ctx.resolve(&inputs.embeddings, &ctx.cfg.paths.embeddings))?;
    let clf_path = ctx.resolve(&inputs.classifier, &ctx.cfg.paths.classifier);
    require(&clf_path)?;
    let classifier = BoundaryClassifier::load(&clf_path)?;
    let split = run_split(ctx, &corpus)?;
    let subset = select_titles(&corpus, &split, inputs.split)?;
    let samples = corpus_samples(&subset, &embeddings, classifier.context, shotcol::boundary::SampleMode::AllBoundaries)?;
    let scores = predict_boundaries(&classifier, &samples)?;
    let records = prediction_records(&samples, &scores, true);
    Ok((subset, embeddings, samples, records))
}

fn cmd_predict(ctx: &RunContext, args: &PredictArgs) -> anyhow::Result<()> {
    let (subset, _, _, records) = score_split(ctx, &args.inputs)?;
    let pred_path = ctx.resolve(&args.output.output, &ctx.cfg.paths.predictions);
    let cue_path = ctx.resolve(&args.cuepoints, &ctx.cfg.paths.cuepoints);
    let task = &ctx.cfg.task;
    let cues = cue_points_from_predictions(
        &records,
        &title_durations(&subset),
        task.cuepoint_min_gap_s,
        task.cuepoints_per_hour,
        task.cuepoint_threshold,
    )?;
    write_jsonl(&pred_path, &records)?;
    write_jsonl(&cue_path, &cues)?;
    log::info!("{} predictions, {} cue-points", records.len(), cues.len());
    write_manifest(ctx, "predict", &parent_dir(&pred_path), &[&pred_path, &cue_path])
}

fn cmd_evaluate(ctx: &RunContext, args: &EvaluateArgs) -> anyhow::Result<()> {
    let eval = &ctx.cfg.eval;
    let (records, subset, embeddings) = match &args.predictions {
        Some(p) => {
            require(p)?;
            let records: Vec<PredictionRecord> = read_jsonl(p)?;
            let corpus_path = ctx.resolve(&args.inputs.corpus, &ctx.cfg.paths.corpus);
            let emb_path = ctx.resolve(&args.inputs.embeddings, &ctx.cfg.paths.embeddings);
            // k-NN needs embeddings; explicit paths must exist, defaults may be absent
            let knn_inputs = args.inputs.corpus.is_some()
                || args.inputs.embeddings.is_some()
                || (corpus_path.exists() && emb_path.exists());
            if knn_inputs {
                let corpus = load_corpus_at(&corpus_path)?;
                let split = run_split(ctx, &corpus)?;
                let subset = select_titles(&corpus, &split, args.inputs.split)?;
                (records, Some(subset), Some(load_embeddings_at(&emb_path)?))
            } else {
                (records, None, None)
            }
        }
        None => {
            let (subset, embeddings, _, records) = score_split(ctx, &args.inputs)?;
            (records, Some(subset), Some(embeddings))
        }
    };

    let preds = RankedPredictions::from_records(&records)?;
    let mut report = MetricsReport {
        recall_threshold: eval.score_threshold,
        ..MetricsReport::default()
    };
    let mut counts = MetricsCounts {
        samples: preds.len(),
        positives: preds.positives(),
        titles: preds.title_ids.iter().collect::<std::collections::BTreeSet<_>>().len(),
        ..MetricsCounts::default()
    };
    if preds.positives() > 0 {
        report.ap = Some(average_precision(&preds)?);
        report.recall_at_threshold = Some(recall_at_threshold(&preds, eval.score_threshold)?);
    }
    let time_recall = preds.recall_at_3s(eval.score_threshold, eval.recall_window_s)?;
    report.recall_at_3s = Some(time_recall.recall);
    counts.ground_truth_boundaries = time_recall.ground_truth;
    counts.recall_at_3s_vacuous = time_recall.vacuous;

    if let (Some(subset), Some(embeddings)) = (&subset, &embeddings) {
        for &k in &eval.knn_k {
            let knn = corpus_knn(subset, embeddings, k)?;
            report.knn_precision_by_k.insert(k, knn.precision);
            counts.knn_queries = counts.knn_queries.max(knn.queries);
            counts.knn_skipped_titles = counts.knn_skipped_titles.max(knn.skipped_titles);
        }
    }
    report.counts = counts;

    let path = ctx.resolve(&args.output.output, &ctx.cfg.paths.metrics);
    write_json(&path, &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    write_manifest(ctx, "evaluate", &parent_dir(&path), &[&path])
}

fn cmd_retrieve(ctx: &RunContext, args: &RetrieveArgs) -> anyhow::Result<()> {
    let corpus = load_corpus_at(&ctx.resolve(&args.corpus, &ctx.cfg.paths.corpus))?;
    let embeddings = load_embeddings_at(&ctx.resolve(&args.embeddings, &ctx.cfg.paths.embeddings))?;
    let split = run_split(ctx, &corpus)?;
    let subset = select_titles(&corpus, &split, args.split)?;
    let ks = if args.k.is_empty() { ctx.cfg.eval.knn_k.clone() } else { args.k.clone() };
    if ks.contains(&0) {
        anyhow::bail!(shotcol::Error::InvalidArgument("k must be positive".into()));
    }
    let mut table = RetrievalTable {
        source: embeddings.source.clone(),
        titles: subset.titles.len(),
        precision_by_k: BTreeMap::new(),
        queries: 0,
        skipped_titles_by_k: BTreeMap::new(),
    };
    for k in ks {
        let knn = corpus_knn(&subset, &embeddings, k)?;
        table.precision_by_k.insert(k, knn.precision);
        table.skipped_titles_by_k.insert(k, knn.skipped_titles);
        table.queries = table.queries.max(knn.queries);
    }
    let path = ctx.resolve(&args.output.output, Path::new("retrieval.json"));
    write_json(&path, &table)?;
    println!("{}", serde_json::to_string_pretty(&table)?);
    write_manifest(ctx, "retrieve", &parent_dir(&path), &[&path])
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let profile: Profile = cli.profile.parse()?;
    if let Some(p) = &cli.config {
        require(p)?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref(), profile)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        if matches!(cli.command, Command::Generate(_)) {
            cfg.generator.seed = seed;
        }
    }
    let ctx = RunContext {
        cfg,
        out: cli.out.clone(),
        profile: cli.profile.clone(),
        args: std::env::args().skip(1).collect(),
    };
    match &cli.command {
        Command::Generate(a) => cmd_generate(&ctx, a),
        Command::Pretrain(a) => cmd_pretrain(&ctx, a),
        Command::Extract(a) => cmd_extract(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Predict(a) => cmd_predict(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Retrieve(a) => cmd_retrieve(&ctx, a),
    }
}

fn error_record(err: &anyhow::Error) -> ErrorRecord {
    let core = err.chain().find_map(|e| e.downcast_ref::<shotcol::Error>());
    ErrorRecord {
        status: "error",
        kind: core.map_or("cli", |e| e.kind()).to_string(),
        path: core.and_then(|e| e.path()).map(|p| p.display().to_string()),
        message: core.map_or_else(|| format!("{err:#}"), |e| e.to_string()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SHOTCOL_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = error_record(&err);
            eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
            ExitCode::FAILURE
        }
    }
}
