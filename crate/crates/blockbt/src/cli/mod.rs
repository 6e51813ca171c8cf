//! Command-line entry point: one subcommand per pipeline stage.
//!
//! Every command reads optional defaults from a `key = value` config file
//! (`--config`), validates its parameters, writes outputs atomically (temp
//! file + rename, so failed runs never leave partial files), and prints a
//! single machine-readable `key=value` summary line to stdout. Exit status
//! 1 means an input or validation error, 2 a runtime error.

mod config;

use std::collections::{BTreeMap, HashMap};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{self, CheckpointId, DatasetTag, NBestList};
use crate::error::{Error, Result};
use crate::mbr::{self, BlockAvailability, HypothesisPool};
use crate::metrics::{self, ChrF, SentenceBleu, Utility};
use crate::params::{self, ParamSnapshot};
use crate::schedule::{self, BlockType, Regime};
use crate::toytrain::{self, StopMode, SyntheticDomain, ToyConfig, Variant};

pub use config::FileConfig;

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (formats: psnap1, manifest-tsv1, nbest-moses3, config-kv1)"
);

#[derive(Debug, Parser)]
#[command(
    name = "blockbt",
    version = LONG_VERSION,
    about = "Block-backtranslation schedules, parameter averaging, MBR reranking and MT metrics"
)]
pub struct Cli {
    /// Config file with `key = value` defaults; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a block or mixed training schedule into a manifest file.
    Schedule(ScheduleArgs),
    /// Stream deterministic batches for a manifest into a TSV file.
    Stream(StreamArgs),
    /// Replay exponential smoothing over a stream of snapshot files.
    Smooth(SmoothArgs),
    /// Average the last k of the given snapshot files.
    Avgk(AvgkArgs),
    /// MBR consensus reranking over concatenated n-best lists.
    Mbr(MbrArgs),
    /// Exhaustive search over per-block checkpoint combinations.
    Combsearch(CombsearchArgs),
    /// Score hypotheses against references (chrf, sbleu, bleu, external).
    Score(ScoreArgs),
    /// Named-entity translation accuracy on a test set.
    #[command(name = "ne-acc")]
    NeAcc(NeAccArgs),
    /// Train the synthetic-domain toy model under a schedule.
    Toytrain(ToytrainArgs),
    /// Apply the early-stopping rule to a list of validation scores.
    #[command(name = "early-stop")]
    EarlyStop(EarlyStopArgs),
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// block | mixed
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long = "block-size")]
    block_size: Option<u64>,
    /// Total training updates.
    #[arg(long)]
    total: Option<u64>,
    #[arg(long = "ckpt-interval")]
    ckpt_interval: Option<u64>,
    /// Manifest output path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the checkpoint tag file here.
    #[arg(long = "tags-output")]
    tags_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    auth: Option<PathBuf>,
    #[arg(long)]
    bt: Option<PathBuf>,
    #[arg(long)]
    ft: Option<PathBuf>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Batches are written here as `update\tsource\ttarget`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// Snapshot files in update order (one per update, consecutive).
    #[arg(long, num_args = 1.., required = true)]
    snapshots: Vec<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "emit-every")]
    emit_every: Option<u64>,
    /// Smoothed snapshots are written here as smoothed-<update>.psnap.
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AvgkArgs {
    /// Snapshot files, ordered by update.
    #[arg(long, num_args = 1.., required = true)]
    snapshots: Vec<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MbrArgs {
    /// N-best list files; the order defines the checkpoint order.
    #[arg(long, num_args = 1.., required = true)]
    nbest: Vec<PathBuf>,
    /// Checkpoint tag file (adds block types to the pool origins).
    #[arg(long)]
    tags: Option<PathBuf>,
    /// chrf | sbleu
    #[arg(long)]
    utility: Option<String>,
    /// Selected translations, one per line.
    #[arg(long)]
    output: Option<PathBuf>,
    /// TSV of sentence_index, chosen_pool_index, consensus.
    #[arg(long = "dump-scores")]
    dump_scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CombsearchArgs {
    #[arg(long, num_args = 1.., required = true)]
    nbest: Vec<PathBuf>,
    /// Checkpoint tag file mapping each n-best list to its block type.
    #[arg(long)]
    tags: Option<PathBuf>,
    /// Per-checkpoint external scores (line i belongs to the i-th --nbest),
    /// used to sort each block's checkpoints best-first.
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long = "total-k")]
    total_k: Option<usize>,
    #[arg(long)]
    utility: Option<String>,
    /// References (one per line) to score the reranked output against.
    #[arg(long)]
    refs: Option<PathBuf>,
    /// Also evaluate combinations taking fewer than total-k lists.
    #[arg(long = "allow-fewer")]
    allow_fewer: bool,
    /// Ranked combinations as TSV n_auth, n_bt, n_ft, score.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// chrf | sbleu | bleu | external
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    hyp: Option<PathBuf>,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// External score file (for --metric external).
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Write per-sentence scores here (loadable as an external score file).
    #[arg(long = "per-sentence")]
    per_sentence: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NeAccArgs {
    #[arg(long)]
    hyp: Option<PathBuf>,
    #[arg(long)]
    testset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToytrainArgs {
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long = "block-size")]
    block_size: Option<u64>,
    #[arg(long)]
    total: Option<u64>,
    #[arg(long = "ckpt-interval")]
    ckpt_interval: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "avg-k")]
    avg_k: Option<usize>,
    #[arg(long = "eval-every")]
    eval_every: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dim: Option<usize>,
    /// Distance of each domain's true weights from the origin.
    #[arg(long = "domain-scale")]
    domain_scale: Option<f64>,
    #[arg(long = "noise-sigma")]
    noise_sigma: Option<f64>,
    #[arg(long = "train-size")]
    train_size: Option<usize>,
    #[arg(long = "eval-size")]
    eval_size: Option<usize>,
    /// Loss curves are written here as CSV update,variant,domain,loss.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the compiled manifest here.
    #[arg(long = "manifest-output")]
    manifest_output: Option<PathBuf>,
    /// Also write raw-/exp- checkpoint snapshots into this directory.
    #[arg(long = "snapshots-dir")]
    snapshots_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EarlyStopArgs {
    /// Validation scores, one per line (external score file format).
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    patience: Option<usize>,
    /// max | min
    #[arg(long)]
    mode: Option<StopMode>,
}

/// Parses argv, runs the command, prints the summary or the error. Returns
/// the process exit status.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

/// Dispatches one parsed invocation and returns its summary line.
pub fn run(cli: Cli) -> Result<String> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::empty(),
    };
    match cli.command {
        Command::Schedule(args) => cmd_schedule(args, &file),
        Command::Stream(args) => cmd_stream(args, &file),
        Command::Smooth(args) => cmd_smooth(args, &file),
        Command::Avgk(args) => cmd_avgk(args, &file),
        Command::Mbr(args) => cmd_mbr(args, &file),
        Command::Combsearch(args) => cmd_combsearch(args, &file),
        Command::Score(args) => cmd_score(args, &file),
        Command::NeAcc(args) => cmd_ne_acc(args, &file),
        Command::Toytrain(args) => cmd_toytrain(args, &file),
        Command::EarlyStop(args) => cmd_early_stop(args, &file),
    }
}

/// Stages every output in a temp file first, then renames them into place;
/// an error before the rename phase leaves no destination touched.
fn write_outputs(outputs: Vec<(PathBuf, Vec<u8>)>) -> Result<()> {
    let mut staged = Vec::new();
    for (path, bytes) in outputs {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(&path, e))?;
        tmp.write_all(&bytes).map_err(|e| Error::io(&path, e))?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = corpus::read_utf8(path)?;
    if text.is_empty() {
        return Err(Error::data(path, "empty file"));
    }
    Ok(text
        .strip_suffix('\n')
        .unwrap_or(&text)
        .split('\n')
        .map(str::to_string)
        .collect())
}

fn utility_from_name(name: &str) -> Result<Box<dyn Utility>> {
    match name {
        "chrf" => Ok(Box::new(ChrF::default())),
        "sbleu" => Ok(Box::new(SentenceBleu::default())),
        other => Err(Error::input(format!(
            "unknown utility '{other}' (expected chrf or sbleu)"
        ))),
    }
}

fn summary(pairs: &[(&str, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_schedule(args: ScheduleArgs, file: &FileConfig) -> Result<String> {
    file.ensure_known(
        "schedule",
        &[
            "regime",
            "block-size",
            "total",
            "ckpt-interval",
            "output",
            "tags-output",
        ],
    )?;
    let regime = file.parse("regime", args.regime, None)?;
    let total = file.u64("total", args.total, None)?;
    let interval = file.u64(
        "ckpt-interval",
        args.ckpt_interval,
        Some(schedule::DEFAULT_CHECKPOINT_INTERVAL),
    )?;
    let output = file.path("output", args.output)?;
    let tags_output = file.path_opt("tags-output", args.tags_output);
    let manifest = match regime {
        Regime::Block => {
            let block_size = file.u64("block-size", args.block_size, None)?;
            schedule::compile_block_schedule(block_size, total, interval)?
        }
        Regime::Mixed => schedule::compile_mixed_schedule(total, interval)?,
    };
    for warning in manifest.warnings() {
        eprintln!("warning: {warning}");
    }
    let tags = manifest.checkpoint_tags();
    let mut outputs = vec![(
        output.clone(),
        schedule::manifest_to_string(&manifest).into_bytes(),
    )];
    if let Some(tags_path) = &tags_output {
        outputs.push((
            tags_path.clone(),
            schedule::tags_to_string(&tags).into_bytes(),
        ));
    }
    write_outputs(outputs)?;
    Ok(summary(&[
        ("regime", manifest.regime.to_string()),
        ("blocks", manifest.entries().len().to_string()),
        ("checkpoints", tags.len().to_string()),
        ("total_updates", manifest.total_updates.to_string()),
        ("output", output.display().to_string()),
    ]))
}

fn cmd_stream(args: StreamArgs, file: &FileConfig) -> Result<String> {
    file.ensure_known(
        "stream",
        &[
            "manifest",
            "auth",
            "bt",
            "ft",
            "batch-size",
            "seed",
            "output",
        ],
    )?;
    let manifest_path = file.path("manifest", args.manifest)?;
    let batch_size = file.usize("batch-size", args.batch_size, None)?;
    let seed = file.u64("seed", args.seed, Some(0))?;
    let output = file.path("output", args.output)?;
    let manifest = schedule::load_manifest(&manifest_path)?;
    let mut corpora = BTreeMap::new();
    for (tag, path) in [
        (DatasetTag::Auth, file.path_opt("auth", args.auth)),
        (DatasetTag::Bt, file.path_opt("bt", args.bt)),
        (DatasetTag::Ft, file.path_opt("ft", args.ft)),
    ] {
        if let Some(path) = path {
            corpora.insert(tag, corpus::load_parallel(&path, tag)?);
        }
    }
    let stream = schedule::batch_stream(&manifest, &corpora, batch_size, seed)?;
    let mut out = String::new();
    let mut pairs = 0u64;
    let mut updates = 0u64;
    for (update, batch) in stream {
        updates += 1;
        for pair in batch {
            pairs += 1;
            out.push_str(&format!("{update}\t{}\t{}\n", pair.source, pair.target));
        }
    }
    write_outputs(vec![(output.clone(), out.into_bytes())])?;
    Ok(summary(&[
        ("updates", updates.to_string()),
        ("pairs", pairs.to_string()),
        ("seed", seed.to_string()),
        ("output", output.display().to_string()),
    ]))
}

fn load_snapshot_series(paths: &[PathBuf]) -> Result<Vec<ParamSnapshot>> {
    paths.iter().map(|p| params::load_snapshot(p)).collect()
}

fn cmd_smooth(args: SmoothArgs, file: &FileConfig) -> Result<String> {
    file.ensure_known("smooth", &["alpha", "emit-every", "output-dir"])?;
    let alpha = file.f64("alpha", args.alpha, Some(0.001))?;
    let emit_every = file.u64("emit-every", args.emit_every, None)?;
    let output_dir = file.path("output-dir", args.output_dir)?;
    let stream = load_snapshot_series(&args.snapshots)?;
    let emitted = params::replay_smoothing(stream, alpha, emit_every)?;
    std::fs::create_dir_all(&output_dir).map_err(|e| Error::io(&output_dir, e))?;
    let mut outputs = Vec::new();
    for snap in &emitted {
        let path = output_dir.join(format!("smoothed-{:08}.psnap", snap.update));
        outputs.push((path, params::snapshot_to_bytes(snap)?));
    }
    write_outputs(outputs)?;
    Ok(summary(&[
        ("inputs", args.snapshots.len().to_string()),
        ("emitted", emitted.len().to_string()),
        ("alpha", alpha.to_string()),
        ("output_dir", output_dir.display().to_string()),
    ]))
}

fn cmd_avgk(args: AvgkArgs, file: &FileConfig) -> Result<String> {
    file.ensure_known("avgk", &["k", "output"])?;
    let k = file.usize("k", args.k, None)?;
    let output = file.path("output", args.output)?;
    let snapshots = load_snapshot_series(&args.snapshots)?;
    let averaged = params::average_consecutive(&snapshots, k)?;
    write_outputs(vec![(
        output.clone(),
        params::snapshot_to_bytes(&averaged)?,
    )])?;
    Ok(summary(&[
        ("averaged", k.to_string()),
        ("update", averaged.update.to_string()),
        ("dim", averaged.dim().to_string()),
        ("spans_blocks", averaged.spans_blocks().to_string()),
        ("output", output.display().to_string()),
    ]))
}

fn load_nbest_series(paths: &[PathBuf]) -> Result<Vec<NBestList>> {
    let mut lists = Vec::with_capacity(paths.len());
    let mut seen = std::collections::BTreeSet::new();
    for path in paths {
        let list = corpus::load_nbest(path)?;
        let id = list
            .origin()
            .ok_or_else(|| Error::data(path, "cannot derive a checkpoint id from this path"))?;
        if !seen.insert(id.clone()) {
            return Err(Error::input(format!(
                "duplicate checkpoint id '{id}' among the n-best files"
            )));
        }
        lists.push(list);
    }
    Ok(lists)
}

fn block_types_from_tags(path: &Path) -> Result<HashMap<CheckpointId, BlockType>> {
    Ok(schedule::load_checkpoint_tags(path)?
        .into_iter()
        .map(|t| (t.checkpoint_id, t.block_type))
        .collect())
}

/// Concatenates whole n-best lists (in the given order) into one pool.
fn concat_pool(
    lists: &[NBestList],
    types: Option<&HashMap<CheckpointId, BlockType>>,
) -> Result<HypothesisPool> {
    let num_sentences = lists[0].num_sentences();
    let mut origins = Vec::new();
    for list in lists {
        if list.num_sentences() != num_sentences {
            return Err(Error::input(format!(
                "n-best list {} covers {} sentences, expected {num_sentences}",
                list.origin().map(|o| o.to_string()).unwrap_or_default(),
                list.num_sentences()
            )));
        }
        if let (Some(types), Some(id)) = (types, list.origin()) {
            let block_type = types.get(id).ok_or_else(|| {
                Error::input(format!("checkpoint '{id}' is missing from the tag file"))
            })?;
            origins.push((id.clone(), *block_type));
        }
    }
    let mut sentences = vec![Vec::new(); num_sentences];
    for list in lists {
        for (idx, group) in list.groups().iter().enumerate() {
            sentences[idx].extend(group.iter().cloned());
        }
    }
    HypothesisPool::from_sentences(sentences, origins)
}

fn cmd_mbr(args: MbrArgs, file: &FileConfig) -> Result<String> {
    file.ensure_known("mbr", &["tags", "utility", "output", "dump-scores"])?;
    let utility_name = file.string("utility", args.utility, Some("chrf"))?;
    let utility = utility_from_name(&utility_name)?;
    let output = file.path("output", args.output)?;
    let dump_scores = file.path_opt("dump-scores", args.dump_scores);
    let lists = load_nbest_series(&args.nbest)?;
    let types = match file.path_opt("tags", args.tags) {
        Some(path) => Some(block_types_from_tags(&path)?),
        None => None,
    };
    let pool = concat_pool(&lists, types.as_ref())?;
    let result = mbr::mbr_rerank(&pool, utility.as_ref())?;
    let mut translations = String::new();
    for selection in &result.selections {
        translations.push_str(&selection.hypothesis.text);
        translations.push('\n');
    }
    let mut outputs = vec![(output.clone(), translations.into_bytes())];
    if let Some(dump_path) = &dump_scores {
        let mut dump = String::new();
        for selection in &result.selections {
            dump.push_str(&format!(
                "{}\t{}\t{}\n",
                selection.sentence_index, selection.chosen_index, selection.consensus
            ));
        }
        outputs.push((dump_path.clone(), dump.into_bytes()));
    }
    write_outputs(outputs)?;
    Ok(summary(&[
        ("sentences", result.selections.len().to_string()),
        ("checkpoints", lists.len().to_string()),
        ("utility", utility_name),
        ("consensus", result.corpus_consensus.to_string()),
        ("output", output.display().to_string()),
    ]))
}

fn cmd_combsearch(args: CombsearchArgs, file: &FileConfig) -> Result<String> {
    file.ensure_known(
        "combsearch",
        &[
            "tags",
            "scores",
            "total-k",
            "utility",
            "refs",
            "allow-fewer",
            "output",
        ],
    )?;
    let total_k = file.usize("total-k", args.total_k, None)?;
    let utility_name = file.string("utility", args.utility, Some("chrf"))?;
    let utility = utility_from_name(&utility_name)?;
    let allow_fewer = file.flag("allow-fewer", args.allow_fewer)?;
    let output = file.path("output", args.output)?;
    let tags_path = file.path("tags", args.tags)?;
    let lists = load_nbest_series(&args.nbest)?;
    let types = block_types_from_tags(&tags_path)?;
    let typed_ids: Vec<(CheckpointId, BlockType)> = lists
        .iter()
        .map(|list| {
            let id = list.origin().expect("origin set by loader").clone();
            let block_type = types.get(&id).copied().ok_or_else(|| {
                Error::input(format!("checkpoint '{id}' is missing from the tag file"))
            })?;
            Ok((id, block_type))
        })
        .collect::<Result<_>>()?;
    let checkpoint_scores = match file.path_opt("scores", args.scores) {
        Some(path) => {
            let report = metrics::load_external_scores(&path)?;
            if report.per_sentence.len() != lists.len() {
                return Err(Error::input(format!(
                    "{} checkpoint scores but {} n-best files",
                    report.per_sentence.len(),
                    lists.len()
                )));
            }
            Some(report.per_sentence)
        }
        None => None,
    };
    let available = BlockAvailability::from_typed_ids(&typed_ids, checkpoint_scores.as_deref())?;
    let refs = match file.path_opt("refs", args.refs) {
        Some(path) => Some(read_lines(&path)?),
        None => None,
    };
    let store: HashMap<CheckpointId, NBestList> = lists
        .into_iter()
        .map(|l| (l.origin().expect("origin set by loader").clone(), l))
        .collect();
    let ranked = mbr::combination_search(
        &available,
        total_k,
        &store,
        utility.as_ref(),
        refs.as_deref(),
        allow_fewer,
    )?;
    let mut out = String::new();
    for (spec, score) in &ranked {
        let (a, c, e) = spec.counts();
        out.push_str(&format!("{a}\t{c}\t{e}\t{score}\n"));
    }
    write_outputs(vec![(output.clone(), out.into_bytes())])?;
    let (best_spec, best_score) = &ranked[0];
    let (a, c, e) = best_spec.counts();
    Ok(summary(&[
        ("specs", ranked.len().to_string()),
        ("best_auth", a.to_string()),
        ("best_bt", c.to_string()),
        ("best_ft", e.to_string()),
        ("best_score", best_score.to_string()),
        (
            "scored_by",
            if refs.is_some() {
                "references"
            } else {
                "consensus"
            }
            .to_string(),
        ),
        ("output", output.display().to_string()),
    ]))
}

fn cmd_score(args: ScoreArgs, file: &FileConfig) -> Result<String> {
    file.ensure_known("score", &["metric", "hyp", "ref", "scores", "per-sentence"])?;
    let metric = file.string("metric", args.metric, None)?;
    let per_sentence_out = file.path_opt("per-sentence", args.per_sentence);
    let report = match metric.as_str() {
        "external" => {
            let scores_path = file.path("scores", args.scores)?;
            metrics::load_external_scores(&scores_path)?
        }
        "chrf" | "sbleu" | "bleu" => {
            let hyp_path = file.path("hyp", args.hyp)?;
            let ref_path = file.path("ref", args.reference)?;
            let hyps = read_lines(&hyp_path)?;
            let refs = read_lines(&ref_path)?;
            if hyps.len() != refs.len() {
                return Err(Error::input(format!(
                    "{} hypotheses vs {} references",
                    hyps.len(),
                    refs.len()
                )));
            }
            match metric.as_str() {
                "bleu" => {
                    let sbleu = SentenceBleu::default();
                    let per: Vec<f64> = hyps
                        .iter()
                        .zip(&refs)
                        .map(|(h, r)| sbleu.score(h, r))
                        .collect();
                    let mut report = metrics::ScoreReport::from_scores("bleu", per)?;
                    report.corpus_score = metrics::corpus_bleu(&hyps, &refs)?;
                    report
                }
                name => {
                    let utility = utility_from_name(name)?;
                    let per: Vec<f64> = hyps
                        .iter()
                        .zip(&refs)
                        .map(|(h, r)| utility.score(h, r))
                        .collect();
                    metrics::ScoreReport::from_scores(name, per)?
                }
            }
        }
        other => {
            return Err(Error::input(format!(
                "unknown metric '{other}' (expected chrf, sbleu, bleu or external)"
            )))
        }
    };
    if let Some(path) = &per_sentence_out {
        let mut out = format!("# metric={}\n", report.metric);
        for score in &report.per_sentence {
            out.push_str(&format!("{score}\n"));
        }
        write_outputs(vec![(path.clone(), out.into_bytes())])?;
    }
    Ok(summary(&[
        ("metric", report.metric.clone()),
        ("corpus_score", report.corpus_score.to_string()),
        ("sentences", report.per_sentence.len().to_string()),
    ]))
}

fn cmd_ne_acc(args: NeAccArgs, file: &FileConfig) -> Result<String> {
    file.ensure_known("ne-acc", &["hyp", "testset"])?;
    let hyp_path = file.path("hyp", args.hyp)?;
    let testset_path = file.path("testset", args.testset)?;
    let hyps = read_lines(&hyp_path)?;
    let cases = corpus::load_ne_testset(&testset_path)?;
    let hits = metrics::ne_matches(&hyps, &cases)?;
    let matched = hits.iter().filter(|&&h| h).count();
    let accuracy = metrics::ne_accuracy(&hyps, &cases)?;
    Ok(summary(&[
        ("accuracy", accuracy.to_string()),
        ("cases", cases.len().to_string()),
        ("matched", matched.to_string()),
    ]))
}

fn cmd_toytrain(args: ToytrainArgs, file: &FileConfig) -> Result<String> {
    file.ensure_known(
        "toytrain",
        &[
            "regime",
            "block-size",
            "total",
            "ckpt-interval",
            "lr",
            "batch-size",
            "alpha",
            "avg-k",
            "eval-every",
            "seed",
            "dim",
            "domain-scale",
            "noise-sigma",
            "train-size",
            "eval-size",
            "output",
            "manifest-output",
            "snapshots-dir",
        ],
    )?;
    let regime = file.parse("regime", args.regime, Some(Regime::Block))?;
    let total = file.u64("total", args.total, Some(3200))?;
    let interval = file.u64("ckpt-interval", args.ckpt_interval, Some(50))?;
    let output = file.path("output", args.output)?;
    let manifest = match regime {
        Regime::Block => {
            let block_size = file.u64("block-size", args.block_size, Some(200))?;
            schedule::compile_block_schedule(block_size, total, interval)?
        }
        Regime::Mixed => schedule::compile_mixed_schedule(total, interval)?,
    };
    let config = ToyConfig {
        lr: file.f64("lr", args.lr, Some(0.05))?,
        batch_size: file.usize("batch-size", args.batch_size, Some(8))?,
        alpha: file.f64("alpha", args.alpha, Some(0.001))?,
        avg_k: file.usize("avg-k", args.avg_k, Some(8))?,
        eval_every: file.u64("eval-every", args.eval_every, Some(25))?,
        seed: file.u64("seed", args.seed, Some(0))?,
        record_trajectory: false,
    };
    let dim = file.usize("dim", args.dim, Some(6))?;
    let scale = file.f64("domain-scale", args.domain_scale, Some(2.0))?;
    let sigma = file.f64("noise-sigma", args.noise_sigma, Some(0.05))?;
    let train_size = file.usize("train-size", args.train_size, Some(512))?;
    let eval_size = file.usize("eval-size", args.eval_size, Some(256))?;
    if dim < 3 {
        return Err(Error::input(
            "dim must be at least 3 for three separated domains",
        ));
    }
    let domains: Vec<SyntheticDomain> = DatasetTag::ALL
        .iter()
        .enumerate()
        .map(|(i, &tag)| {
            SyntheticDomain::axis(
                tag,
                dim,
                i,
                scale,
                sigma,
                train_size,
                eval_size,
                config.seed.wrapping_add(100 + i as u64),
            )
        })
        .collect::<Result<_>>()?;
    let result = toytrain::run_toy_experiment(&domains, &manifest, &config)?;
    let mut csv = Vec::new();
    toytrain::write_curve_csv(&mut csv, &result.curve).map_err(|e| Error::io(&output, e))?;
    let mut outputs = vec![(output.clone(), csv)];
    if let Some(manifest_path) = file.path_opt("manifest-output", args.manifest_output) {
        outputs.push((
            manifest_path,
            schedule::manifest_to_string(&manifest).into_bytes(),
        ));
    }
    if let Some(dir) = file.path_opt("snapshots-dir", args.snapshots_dir) {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for snap in &result.raw_checkpoints {
            outputs.push((
                dir.join(format!("raw-{:08}.psnap", snap.update)),
                params::snapshot_to_bytes(snap)?,
            ));
        }
        for snap in &result.smoothed_checkpoints {
            outputs.push((
                dir.join(format!("exp-{:08}.psnap", snap.update)),
                params::snapshot_to_bytes(snap)?,
            ));
        }
    }
    write_outputs(outputs)?;
    let final_mean = |variant: Variant| -> String {
        result
            .curve
            .iter()
            .rev()
            .find(|p| p.variant == variant)
            .map(|p| p.mean_loss().to_string())
            .unwrap_or_else(|| "none".to_string())
    };
    Ok(summary(&[
        ("updates", manifest.total_updates.to_string()),
        ("evals", (result.curve.len() / 4).to_string()),
        ("checkpoints", result.raw_checkpoints.len().to_string()),
        ("final_raw", final_mean(Variant::Raw)),
        ("final_exp", final_mean(Variant::Exp)),
        ("final_avgk", final_mean(Variant::AvgK)),
        ("final_expavgk", final_mean(Variant::ExpAvgK)),
        ("output", output.display().to_string()),
    ]))
}

fn cmd_early_stop(args: EarlyStopArgs, file: &FileConfig) -> Result<String> {
    file.ensure_known("early-stop", &["scores", "patience", "mode"])?;
    let scores_path = file.path("scores", args.scores)?;
    let patience = file.usize("patience", args.patience, Some(toytrain::DEFAULT_PATIENCE))?;
    if patience == 0 {
        return Err(Error::input("patience must be at least 1"));
    }
    let mode = file.parse("mode", args.mode, Some(StopMode::Max))?;
    let report = metrics::load_external_scores(&scores_path)?;
    let stop = toytrain::early_stop(&report.per_sentence, patience, mode);
    let best_index = match mode {
        StopMode::Max => report
            .per_sentence
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i),
        StopMode::Min => report
            .per_sentence
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i),
    };
    Ok(summary(&[
        ("evaluated", report.per_sentence.len().to_string()),
        ("patience", patience.to_string()),
        (
            "stop_index",
            stop.map(|i| i.to_string())
                .unwrap_or_else(|| "none".to_string()),
        ),
        (
            "best_index",
            best_index
                .map(|i| i.to_string())
                .unwrap_or_else(|| "none".to_string()),
        ),
    ]))
}
