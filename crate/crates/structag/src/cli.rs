//! Batch-pipeline command surface.
//!
//! Subcommands mirror the pipeline stages: `split`, `count`, `cluster`,
//! `extend`, `train-lm`, `perplexity`, `rank`, `inspect`, `purity`. Every
//! artifact-producing run writes a manifest beside its outputs recording
//! the full configuration and SHA-256 checksums of the inputs, so a run
//! can be reconstructed from the manifest alone.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical
//! failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest as _, Sha256};

use crate::cluster::{
    assign_unique_suffix, cluster_topdown, export_hierarchy, extend_rare_words, to_newick, TagMap,
};
use crate::corpus::{
    split_bounds, tokenize, NGramCounts, TokenStream, VocabCutoff, Vocabulary, WordId,
};
use crate::eval::{
    cluster_purity, format_ranking, format_report_table, perplexity, rank_sentences,
    reports_to_tsv, GoldLexicon,
};
use crate::lm::{em_train_lambdas, ComponentSpec, EmOptions, LambdaTable, Model, ModelKind};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "structag",
    about = "Hierarchical word classification and class-based n-gram language models",
    version
)]
struct Cli {
    /// Cap the number of worker threads (results are identical for any
    /// value).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a text corpus into contiguous 60/30/10 train/heldout/test files.
    Split(SplitArgs),
    /// Build a vocabulary and n-gram count tables from text.
    Count(CountArgs),
    /// Build the structural-tag hierarchy over the most frequent words.
    Cluster(ClusterArgs),
    /// Attach remaining words to a hierarchy and make codes unique.
    Extend(ExtendArgs),
    /// Train interpolation weights and write a model configuration.
    TrainLm(TrainLmArgs),
    /// Measure test-set perplexity of a model.
    Perplexity(PerplexityArgs),
    /// Rank alternative sentences by normalised model probability.
    Rank(RankArgs),
    /// Render a tag hierarchy as an indented tree (or Newick).
    Inspect(InspectArgs),
    /// Score a classification against a gold lexicon.
    Purity(PurityArgs),
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for train.txt, heldout.txt and test.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CountArgs {
    /// Text to count (typically the train split).
    #[arg(long)]
    corpus: PathBuf,
    /// Keep this many word types (the unknown entry is extra).
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Keep word types occurring at least this often.
    #[arg(long)]
    min_count: Option<u64>,
    /// Maximum n-gram order.
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Output directory for vocab.tsv and counts.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Number of levels to optimize.
    #[arg(long)]
    depth: u8,
    /// PRNG seed (mandatory: runs must be reproducible).
    #[arg(long)]
    seed: u64,
    /// Cluster only the top-k most frequent words (default: all).
    #[arg(long)]
    top_k: Option<usize>,
    /// Output directory for tags.tsv and mi_log.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtendArgs {
    /// Tag map over the frequent words.
    #[arg(long)]
    tags: PathBuf,
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Output file for the completed tag map.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainLmArgs {
    /// equiprobable | unigram | interp-trigram | weighted-average | structural-tag
    #[arg(long)]
    kind: String,
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Held-out text for weight estimation (interpolated kinds).
    #[arg(long)]
    heldout: Option<PathBuf>,
    /// Completed tag map (structural-tag kind).
    #[arg(long)]
    tags: Option<PathBuf>,
    /// Hierarchy depths to interpolate, e.g. 16,8,5.
    #[arg(long, default_value = "16,8,5")]
    levels: String,
    /// Train one weight vector per previous-word frequency bucket.
    #[arg(long, default_value_t = false)]
    bucketed: bool,
    /// Output directory for lambdas.tsv and model.cfg.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PerplexityArgs {
    /// Model configuration written by train-lm.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Shortcut for untrained kinds (equiprobable | unigram |
    /// weighted-average) without a configuration file.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Test text.
    #[arg(long)]
    test: PathBuf,
    /// Optional TSV report output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    model: PathBuf,
    /// File with one candidate sentence per line.
    #[arg(long)]
    sentences: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    tags: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    depth: u8,
    /// Emit Newick instead of the indented tree.
    #[arg(long, default_value_t = false)]
    newick: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PurityArgs {
    #[arg(long)]
    tags: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// Gold lexicon TSV (word<TAB>label).
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    level: u8,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse and execute `argv` (including the program name), returning the
/// process exit code.
pub fn run(args: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders --help/--version as "errors" with success status
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.threads {
        Some(threads) if threads > 0 => {
            match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(|| dispatch(cli.command)),
                Err(e) => Err(Error::InvalidConfiguration(format!("thread pool: {e}"))),
            }
        }
        _ => dispatch(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfiguration(_) | Error::InvalidDepth(_) => 1,
        Error::EvaluationFailure { .. } => 3,
        _ => 2,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Split(args) => cmd_split(args),
        Command::Count(args) => cmd_count(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Extend(args) => cmd_extend(args),
        Command::TrainLm(args) => cmd_train_lm(args),
        Command::Perplexity(args) => cmd_perplexity(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Inspect(args) => cmd_inspect(args),
        Command::Purity(args) => cmd_purity(args),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Write a reconstruction manifest: the command, its configuration and a
/// checksum per input file.
fn write_manifest(
    manifest_path: &Path,
    command: &str,
    config: &[(&str, String)],
    inputs: &[&Path],
) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "command\t{command}").unwrap();
    for (key, value) in config {
        writeln!(out, "config.{key}\t{value}").unwrap();
    }
    for input in inputs {
        writeln!(out, "input.{}\tsha256:{}", input.display(), sha256_hex(input)?).unwrap();
    }
    write_text(manifest_path, &out)
}

fn tokens_to_lines(tokens: &[String]) -> String {
    let mut out = String::new();
    for chunk in tokens.chunks(40) {
        out.push_str(&chunk.join(" "));
        out.push('\n');
    }
    out
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    let text = read_text(&args.corpus)?;
    let tokens = tokenize(&text);
    let (b1, b2) = split_bounds(tokens.len())?;
    ensure_dir(&args.out)?;
    write_text(&args.out.join("train.txt"), &tokens_to_lines(&tokens[..b1]))?;
    write_text(&args.out.join("heldout.txt"), &tokens_to_lines(&tokens[b1..b2]))?;
    write_text(&args.out.join("test.txt"), &tokens_to_lines(&tokens[b2..]))?;
    write_manifest(
        &args.out.join("split.manifest.tsv"),
        "split",
        &[
            ("corpus", args.corpus.display().to_string()),
            ("tokens", tokens.len().to_string()),
            ("boundaries", format!("{b1},{b2}")),
        ],
        &[&args.corpus],
    )?;
    println!(
        "split {} tokens into {} / {} / {}",
        tokens.len(),
        b1,
        b2 - b1,
        tokens.len() - b2
    );
    Ok(())
}

fn cmd_count(args: CountArgs) -> Result<()> {
    let cutoff = match (args.vocab_size, args.min_count) {
        (Some(n), None) => VocabCutoff::MaxSize(n),
        (None, Some(c)) => VocabCutoff::MinCount(c),
        _ => {
            return Err(Error::InvalidConfiguration(
                "pass exactly one of --vocab-size or --min-count".into(),
            ))
        }
    };
    let text = read_text(&args.corpus)?;
    let tokens = tokenize(&text);
    let vocab = Vocabulary::build(&tokens, cutoff)?;
    let (stream, oov) = vocab.map_tokens(&tokens);
    let counts = NGramCounts::count_parallel(
        &stream,
        args.order,
        vocab.len() as u32,
        rayon::current_num_threads(),
    )?;
    ensure_dir(&args.out)?;
    vocab.write_tsv(&args.out.join("vocab.tsv"))?;
    counts.write_tsv(&args.out.join("counts.tsv"))?;
    write_manifest(
        &args.out.join("count.manifest.tsv"),
        "count",
        &[
            ("corpus", args.corpus.display().to_string()),
            ("vocab_size", vocab.len().to_string()),
            ("order", args.order.to_string()),
            ("tokens", stream.len().to_string()),
            ("unk_mapped", oov.to_string()),
        ],
        &[&args.corpus],
    )?;
    println!(
        "counted {} tokens, vocabulary {} (unknown mass {})",
        counts.n(),
        vocab.len(),
        vocab.frequency(crate::corpus::UNK_ID)
    );
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let vocab = Vocabulary::read_tsv(&args.vocab)?;
    let counts = NGramCounts::read_tsv(&args.counts)?;
    let top_k = args.top_k.unwrap_or(vocab.len());
    let (tags, trace) = cluster_topdown(&counts, top_k, args.depth, args.seed)?;
    ensure_dir(&args.out)?;
    tags.write_tsv(&args.out.join("tags.tsv"), &vocab)?;
    let mut log = String::from("level\tinitial_mi\tfinal_mi\tflips\n");
    for level in &trace.levels {
        writeln!(
            log,
            "{}\t{:.9}\t{:.9}\t{}",
            level.level, level.initial_mi, level.final_mi, level.flips
        )
        .unwrap();
    }
    write_text(&args.out.join("mi_log.tsv"), &log)?;
    write_manifest(
        &args.out.join("cluster.manifest.tsv"),
        "cluster",
        &[
            ("counts", args.counts.display().to_string()),
            ("vocab", args.vocab.display().to_string()),
            ("depth", args.depth.to_string()),
            ("seed", args.seed.to_string()),
            ("top_k", top_k.to_string()),
        ],
        &[&args.counts, &args.vocab],
    )?;
    for level in &trace.levels {
        println!(
            "level {}: M = {:.6} -> {:.6} after {} flips",
            level.level, level.initial_mi, level.final_mi, level.flips
        );
    }
    Ok(())
}

fn cmd_extend(args: ExtendArgs) -> Result<()> {
    let vocab = Vocabulary::read_tsv(&args.vocab)?;
    let counts = NGramCounts::read_tsv(&args.counts)?;
    let mut tags = TagMap::read_tsv(&args.tags, &vocab)?;
    let remaining: Vec<WordId> = vocab.ids().filter(|&id| !tags.is_assigned(id)).collect();
    extend_rare_words(&mut tags, &counts, &remaining)?;
    assign_unique_suffix(&mut tags, &counts)?;
    tags.write_tsv(&args.out, &vocab)?;
    let manifest = args.out.with_extension("manifest.tsv");
    write_manifest(
        &manifest,
        "extend",
        &[
            ("tags", args.tags.display().to_string()),
            ("counts", args.counts.display().to_string()),
            ("vocab", args.vocab.display().to_string()),
            ("attached", remaining.len().to_string()),
            ("seed", tags.seed().to_string()),
        ],
        &[&args.tags, &args.counts, &args.vocab],
    )?;
    println!("attached {} words; codes are unique", remaining.len());
    Ok(())
}

fn parse_levels(spec: &str) -> Result<Vec<u8>> {
    let mut levels = Vec::new();
    for part in spec.split(',') {
        let level: u8 = part
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfiguration(format!("bad level `{part}`")))?;
        levels.push(level);
    }
    if levels.is_empty() {
        return Err(Error::InvalidConfiguration("no levels given".into()));
    }
    Ok(levels)
}

fn components_for(levels: &[u8], max_order: usize) -> Vec<ComponentSpec> {
    let mut specs = Vec::new();
    for &level in levels {
        for order in 1..=max_order as u8 {
            specs.push(ComponentSpec::new(level, order));
        }
    }
    specs
}

fn cmd_train_lm(args: TrainLmArgs) -> Result<()> {
    let kind: ModelKind = args.kind.parse()?;
    let vocab = Vocabulary::read_tsv(&args.vocab)?;
    let counts = NGramCounts::read_tsv(&args.counts)?;
    ensure_dir(&args.out)?;

    let mut cfg: Vec<(String, String)> = vec![
        ("kind".into(), kind.to_string()),
        ("order".into(), counts.max_order().to_string()),
        ("counts".into(), args.counts.display().to_string()),
        ("vocab".into(), args.vocab.display().to_string()),
    ];
    let mut inputs: Vec<&Path> = vec![&args.counts, &args.vocab];

    match kind {
        ModelKind::Equiprobable | ModelKind::Unigram | ModelKind::WeightedAverage => {}
        ModelKind::InterpTrigram | ModelKind::StructuralTag => {
            let heldout_path = args.heldout.as_ref().ok_or_else(|| {
                Error::InvalidConfiguration(format!("{kind} model needs --heldout"))
            })?;
            let heldout_text = read_text(heldout_path)?;
            let heldout_tokens = tokenize(&heldout_text);
            let (heldout, _): (TokenStream, usize) = vocab.map_tokens(&heldout_tokens);

            let (components, tags) = if kind == ModelKind::StructuralTag {
                let tags_path = args.tags.as_ref().ok_or_else(|| {
                    Error::InvalidConfiguration("structural-tag model needs --tags".into())
                })?;
                let tags = TagMap::read_tsv(tags_path, &vocab)?;
                let levels = parse_levels(&args.levels)?;
                cfg.push(("tags".into(), tags_path.display().to_string()));
                cfg.push(("levels".into(), args.levels.clone()));
                (components_for(&levels, counts.max_order()), Some(tags))
            } else {
                (ComponentSpec::word_orders(counts.max_order() as u8), None)
            };

            let options = EmOptions {
                bucketed: args.bucketed,
                ..EmOptions::default()
            };
            let (lambdas, trace) =
                em_train_lambdas(&components, &heldout, &counts, tags.as_ref(), options)?;
            let lambda_path = args.out.join("lambdas.tsv");
            lambdas.write_tsv(&lambda_path)?;
            cfg.push(("lambdas".into(), lambda_path.display().to_string()));
            cfg.push(("bucketed".into(), args.bucketed.to_string()));
            cfg.push((
                "components".into(),
                components
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            ));
            cfg.push(("heldout".into(), heldout_path.display().to_string()));
            println!(
                "EM converged after {} iterations over {} buckets ({} without events)",
                trace.iterations,
                lambdas.bucket_count(),
                trace.zero_event_buckets.len()
            );
        }
    }

    let mut cfg_text = String::new();
    for (key, value) in &cfg {
        writeln!(cfg_text, "{key}\t{value}").unwrap();
    }
    let cfg_path = args.out.join("model.cfg");
    write_text(&cfg_path, &cfg_text)?;
    if let Some(heldout) = &args.heldout {
        inputs.push(heldout);
    }
    if let Some(tags) = &args.tags {
        inputs.push(tags);
    }
    let config_pairs: Vec<(&str, String)> =
        cfg.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    write_manifest(
        &args.out.join("train-lm.manifest.tsv"),
        "train-lm",
        &config_pairs,
        &inputs,
    )?;
    println!("wrote {}", cfg_path.display());
    Ok(())
}

/// A model's inputs, loaded and owned. `model()` borrows them into an
/// evaluable [`Model`].
pub struct LoadedModel {
    pub kind: ModelKind,
    pub counts: NGramCounts,
    pub vocab: Vocabulary,
    pub tags: Option<TagMap>,
    pub lambdas: Option<LambdaTable>,
    pub components: Vec<ComponentSpec>,
}

impl LoadedModel {
    pub fn from_config(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut fields: std::collections::HashMap<&str, &str> = std::collections::HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            match line.split_once('\t') {
                Some((k, v)) => {
                    fields.insert(k, v);
                }
                None => return Err(Error::parse(path, lineno + 1, "expected key<TAB>value")),
            }
        }
        let get = |key: &str| -> Result<&str> {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| Error::parse(path, 0, format!("missing `{key}`")))
        };
        let kind: ModelKind = get("kind")?.parse()?;
        let counts = NGramCounts::read_tsv(Path::new(get("counts")?))?;
        let vocab = Vocabulary::read_tsv(Path::new(get("vocab")?))?;
        let tags = match fields.get("tags") {
            Some(p) => Some(TagMap::read_tsv(Path::new(p), &vocab)?),
            None => None,
        };
        let lambdas = match fields.get("lambdas") {
            Some(p) => Some(LambdaTable::read_tsv(Path::new(p))?),
            None => None,
        };
        let components = match fields.get("levels") {
            Some(levels) => components_for(&parse_levels(levels)?, counts.max_order()),
            None => Vec::new(),
        };
        Ok(LoadedModel {
            kind,
            counts,
            vocab,
            tags,
            lambdas,
            components,
        })
    }

    /// An untrained model over existing count/vocab files.
    pub fn untrained(kind: ModelKind, counts_path: &Path, vocab_path: &Path) -> Result<Self> {
        match kind {
            ModelKind::Equiprobable | ModelKind::Unigram | ModelKind::WeightedAverage => {}
            other => {
                return Err(Error::InvalidConfiguration(format!(
                    "{other} needs a trained configuration; use train-lm"
                )))
            }
        }
        Ok(LoadedModel {
            kind,
            counts: NGramCounts::read_tsv(counts_path)?,
            vocab: Vocabulary::read_tsv(vocab_path)?,
            tags: None,
            lambdas: None,
            components: Vec::new(),
        })
    }

    pub fn model(&self) -> Result<Model<'_>> {
        Model::build(
            self.kind,
            &self.counts,
            self.tags.as_ref(),
            self.components.clone(),
            self.lambdas.clone(),
        )
    }
}

fn cmd_perplexity(args: PerplexityArgs) -> Result<()> {
    let loaded = match (&args.model, &args.kind) {
        (Some(model_path), None) => LoadedModel::from_config(model_path)?,
        (None, Some(kind)) => {
            let counts = args.counts.as_ref().ok_or_else(|| {
                Error::InvalidConfiguration("--kind needs --counts and --vocab".into())
            })?;
            let vocab = args.vocab.as_ref().ok_or_else(|| {
                Error::InvalidConfiguration("--kind needs --counts and --vocab".into())
            })?;
            LoadedModel::untrained(kind.parse()?, counts, vocab)?
        }
        _ => {
            return Err(Error::InvalidConfiguration(
                "pass exactly one of --model or --kind".into(),
            ))
        }
    };
    let model = loaded.model()?;
    let test_text = read_text(&args.test)?;
    let test_tokens = tokenize(&test_text);
    let (test, _): (TokenStream, usize) = loaded.vocab.map_tokens(&test_tokens);
    let report = perplexity(&model, &test, loaded.kind.as_str())?;
    print!("{}", format_report_table(std::slice::from_ref(&report)));
    println!(
        "({} tokens, {} mapped to {}, log2 sum {:.3})",
        report.tokens,
        report.unk_tokens,
        crate::corpus::UNK_TOKEN,
        report.log_prob_sum
    );
    if let Some(out) = &args.out {
        write_text(out, &reports_to_tsv(std::slice::from_ref(&report)))?;
        let mut inputs: Vec<&Path> = vec![&args.test];
        if let Some(m) = &args.model {
            inputs.push(m);
        }
        write_manifest(
            &out.with_extension("manifest.tsv"),
            "perplexity",
            &[
                ("model", loaded.kind.to_string()),
                ("test", args.test.display().to_string()),
                ("perplexity", format!("{:.6}", report.perplexity)),
            ],
            &inputs,
        )?;
    }
    Ok(())
}

fn cmd_rank(args: RankArgs) -> Result<()> {
    let loaded = LoadedModel::from_config(&args.model)?;
    let model = loaded.model()?;
    let text = read_text(&args.sentences)?;
    let sentences: Vec<String> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.to_string())
        .collect();
    let ranked = rank_sentences(&model, &loaded.vocab, &sentences)?;
    print!("{}", format_ranking(loaded.kind.as_str(), &ranked));
    if let Some(out) = &args.out {
        let mut tsv = String::from("sentence\tnormalized_probability\n");
        for (sentence, p) in &ranked {
            writeln!(tsv, "{sentence}\t{p:.6}").unwrap();
        }
        write_text(out, &tsv)?;
        write_manifest(
            &out.with_extension("manifest.tsv"),
            "rank",
            &[
                ("model", args.model.display().to_string()),
                ("sentences", args.sentences.display().to_string()),
            ],
            &[&args.model, &args.sentences],
        )?;
    }
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> Result<()> {
    let vocab = Vocabulary::read_tsv(&args.vocab)?;
    let tags = TagMap::read_tsv(&args.tags, &vocab)?;
    let rendered = if args.newick {
        to_newick(&tags, &vocab, args.depth)?
    } else {
        export_hierarchy(&tags, &vocab, args.depth)?
    };
    match &args.out {
        Some(out) => {
            write_text(out, &rendered)?;
            write_manifest(
                &out.with_extension("manifest.tsv"),
                "inspect",
                &[
                    ("tags", args.tags.display().to_string()),
                    ("depth", args.depth.to_string()),
                    ("newick", args.newick.to_string()),
                ],
                &[&args.tags, &args.vocab],
            )?;
        }
        None => print!("{rendered}"),
    }
    Ok(())
}

fn cmd_purity(args: PurityArgs) -> Result<()> {
    let vocab = Vocabulary::read_tsv(&args.vocab)?;
    let tags = TagMap::read_tsv(&args.tags, &vocab)?;
    let gold = GoldLexicon::read_tsv(&args.gold)?;
    let report = cluster_purity(&tags, &vocab, &gold, args.level)?;
    println!(
        "level {} purity: {:.4} ({} covered types, {} uncovered, {} tokens)",
        report.level, report.purity, report.covered_types, report.uncovered_types, report.covered_mass
    );
    if let Some(out) = &args.out {
        write_text(
            out,
            &format!(
                "level\tpurity\tcovered_types\tuncovered_types\tcovered_mass\n{}\t{:.6}\t{}\t{}\t{}\n",
                report.level, report.purity, report.covered_types, report.uncovered_types, report.covered_mass
            ),
        )?;
        write_manifest(
            &out.with_extension("manifest.tsv"),
            "purity",
            &[
                ("tags", args.tags.display().to_string()),
                ("gold", args.gold.display().to_string()),
                ("level", args.level.to_string()),
            ],
            &[&args.tags, &args.vocab, &args.gold],
        )?;
    }
    Ok(())
}
