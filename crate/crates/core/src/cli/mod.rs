//! The `uedp` command-line tool.
//!
//! ```text
//! uedp [--seed N] [--config FILE] [--out-dir DIR] <ingest|train|account|eval> ...
//! ```
//!
//! Exit codes: 0 on success, 2 for usage, configuration, input and I/O
//! errors, 3 when training or evaluation produces non-finite numbers.

mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::accountant::{budget_curve, effective_rate, AccountantError, Strategy};
use crate::corpus::{
    build_entity_sets, conll::parse_conll_str, jsonl::parse_jsonl_str, partition_users_gaussian, Category, Corpus,
    CorpusError, Ingested, Vocab, DEFAULT_MIN_COUNT,
};
use crate::dpfed::{metrics_csv, train, DpError, EvalSet, Mode, TrainConfig, Weights};
use crate::model::{checkpoint, ModelError};

pub use manifest::{tool_version, write_atomic, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: CorpusError },
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Accountant(#[from] AccountantError),
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: ModelError },
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Dp(DpError::NonFinite { .. }) | CliError::Numerical(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "uedp", version, about = "User-entity private federated training of small language models")]
pub struct Cli {
    /// Seed for partitioning, initialization, sampling and noise; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML training configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for every output file; created if missing.
    #[arg(long = "out-dir", global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a corpus and write its canonical form, entity sets and statistics.
    Ingest(IngestArgs),
    /// Train a model and write metrics, checkpoint, vocabulary and manifest.
    Train(TrainArgs),
    /// Write privacy budget curves, one CSV per strategy.
    Account(AccountArgs),
    /// Evaluate a checkpoint on a corpus.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Conll,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    /// Minimum token frequency for a vocabulary entry.
    #[arg(long = "min-count", default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    /// Comma-separated sensitive categories; all categories when absent.
    #[arg(long, value_delimiter = ',')]
    pub categories: Option<Vec<String>>,
    /// Reassign sentences to users with Gaussian sizes of this mean.
    #[arg(long = "users-mean")]
    pub users_mean: Option<f64>,
    #[arg(long = "users-std", default_value_t = 0.0)]
    pub users_std: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Canonical JSONL corpus.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Overrides the mode from the config file.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long = "min-count", default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    #[arg(long, value_delimiter = ',')]
    pub categories: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct AccountArgs {
    #[arg(long = "q_u", alias = "q-u")]
    pub q_u: Option<f64>,
    #[arg(long = "q_e", alias = "q-e")]
    pub q_e: Option<f64>,
    #[arg(long = "q_s", alias = "q-s")]
    pub q_s: Option<f64>,
    #[arg(long)]
    pub z: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of rounds.
    #[arg(long = "T")]
    pub rounds: Option<u64>,
    /// Strategy to evaluate; repeatable. Defaults to user_only.
    #[arg(long)]
    pub strategy: Vec<String>,
    /// Detected entity weight total `W_e`.
    #[arg(long = "w-e")]
    pub w_e: Option<f64>,
    /// Extended entity weight total `W_s`.
    #[arg(long = "w-s")]
    pub w_s: Option<f64>,
    /// Derive `W_e` and `W_s` from this canonical JSONL corpus.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long = "min-count", default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Canonical JSONL split to evaluate on.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Vocabulary written by `train`; rebuilt from the corpus when absent.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long = "min-count", default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: usize,
}

/// Parses `args` (including the program name) and runs the command; returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    std::fs::create_dir_all(&cli.out_dir).map_err(|source| CliError::Io {
        path: cli.out_dir.clone(),
        source,
    })?;
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Account(a) => cmd_account(cli, a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_out(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

fn load_config(cli: &Cli) -> Result<TrainConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => TrainConfig::from_toml_str(&read_text(path)?).map_err(|e| match e {
            DpError::ConfigParse(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => CliError::Dp(other),
        })?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn parse_categories(list: &Option<Vec<String>>) -> Result<Option<Vec<Category>>, CliError> {
    list.as_ref()
        .map(|names| {
            names
                .iter()
                .filter(|n| !n.trim().is_empty())
                .map(|n| n.trim().parse::<Category>().map_err(|e| CliError::Usage(e.to_string())))
                .collect()
        })
        .transpose()
}

fn report_warnings(path: &Path, ingested: &Ingested) {
    for w in &ingested.warnings {
        eprintln!("warning: {}: line {}: {}", path.display(), w.line, w.message);
    }
}

fn load_jsonl(path: &Path, min_count: usize, categories: &Option<Vec<String>>) -> Result<Corpus, CliError> {
    let ingested = parse_jsonl_str(&read_text(path)?, min_count).map_err(|source| CliError::Corpus {
        path: path.to_path_buf(),
        source,
    })?;
    report_warnings(path, &ingested);
    let mut corpus = ingested.corpus;
    if let Some(active) = parse_categories(categories)? {
        corpus = corpus.with_active_categories(active);
    }
    Ok(corpus)
}

fn stats_csv(corpus: &Corpus) -> String {
    let mut out = String::from("category,sensitive_sentences\n");
    for (cat, n) in corpus.sensitive_count_by_category() {
        out.push_str(&format!("{cat},{n}\n"));
    }
    out.push_str(&format!("All,{}\n", corpus.sensitive_count()));
    out
}

fn summary_csv(corpus: &Corpus) -> String {
    format!(
        "users,sentences,vocab,sensitive_sentences\n{},{},{},{}\n",
        corpus.num_users(),
        corpus.num_sentences(),
        corpus.vocab().len(),
        corpus.sensitive_count()
    )
}

fn cmd_ingest(cli: &Cli, a: &IngestArgs) -> Result<(), CliError> {
    let text = read_text(&a.input)?;
    let parsed = match a.format {
        Format::Conll => parse_conll_str(&text, a.min_count),
        Format::Jsonl => parse_jsonl_str(&text, a.min_count),
    }
    .map_err(|source| CliError::Corpus {
        path: a.input.clone(),
        source,
    })?;
    report_warnings(&a.input, &parsed);
    let mut corpus = parsed.corpus;
    if let Some(mean) = a.users_mean {
        corpus = partition_users_gaussian(&corpus, mean, a.users_std, cli.seed.unwrap_or(0)).map_err(|source| {
            CliError::Corpus {
                path: a.input.clone(),
                source,
            }
        })?;
    }
    if let Some(active) = parse_categories(&a.categories)? {
        corpus = corpus.with_active_categories(active);
    }
    let sets = build_entity_sets(&corpus);
    let mut entities = serde_json::to_string(&sets).expect("entity sets serialize");
    entities.push('\n');

    write_out(&cli.out_dir, "corpus.jsonl", &corpus.to_jsonl())?;
    write_out(&cli.out_dir, "entities.json", &entities)?;
    write_out(&cli.out_dir, "stats.csv", &stats_csv(&corpus))?;
    write_out(&cli.out_dir, "summary.csv", &summary_csv(&corpus))?;
    println!(
        "users={} sentences={} vocab={} sensitive={} detected_entities={} extended_entities={}",
        corpus.num_users(),
        corpus.num_sentences(),
        corpus.vocab().len(),
        corpus.sensitive_count(),
        sets.num_detected(),
        sets.num_extended()
    );
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<(), CliError> {
    let mut cfg = load_config(cli)?;
    if let Some(mode) = &a.mode {
        cfg.mode = mode.parse::<Mode>()?;
    }
    cfg.validate()?;
    let corpus = load_jsonl(&a.corpus, a.min_count, &a.categories)?;
    let sets = build_entity_sets(&corpus);

    let dir = &cli.out_dir;
    let names = ["metrics.csv", "model.ckpt", "vocab.txt"];
    let mut manifest = RunManifest {
        tool_version: tool_version(),
        command: "train".to_string(),
        seed: cfg.seed,
        corpus_path: a.corpus.clone(),
        corpus_fingerprint: corpus.fingerprint(),
        min_count: a.min_count,
        config: cfg.clone(),
        started_at: manifest::now(),
        finished_at: None,
        status: "running".to_string(),
        outputs: names.iter().map(|n| dir.join(n)).collect(),
    };
    let manifest_path = dir.join("manifest.json");
    manifest.write(&manifest_path)?;

    let outcome = match train(&corpus, &sets, &cfg) {
        Ok(o) => o,
        Err(e) => {
            manifest.status = format!("failed: {e}");
            manifest.finished_at = Some(manifest::now());
            manifest.write(&manifest_path)?;
            return Err(e.into());
        }
    };
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    write_out(dir, "metrics.csv", &metrics_csv(&outcome.log))?;
    let ckpt = dir.join("model.ckpt");
    write_atomic(&ckpt, &checkpoint::encode(&outcome.params))?;
    write_out(dir, "vocab.txt", &corpus.vocab().to_text())?;

    manifest.status = "complete".to_string();
    manifest.finished_at = Some(manifest::now());
    manifest.write(&manifest_path)?;

    let (name, value) = match outcome.log.last() {
        Some(row) => (row.metric_name, row.metric_value),
        None => {
            let eval = EvalSet::from_corpus(&corpus, cfg.task);
            (eval.name(), outcome.initial_metric)
        }
    };
    println!("epsilon={} delta={} {name}={value}", outcome.final_epsilon, cfg.delta);
    Ok(())
}

fn cmd_account(cli: &Cli, a: &AccountArgs) -> Result<(), CliError> {
    let mut cfg = load_config(cli)?;
    for (slot, flag) in [
        (&mut cfg.q_u, a.q_u),
        (&mut cfg.q_e, a.q_e),
        (&mut cfg.q_s, a.q_s),
        (&mut cfg.z, a.z),
        (&mut cfg.delta, a.delta),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    if let Some(t) = a.rounds {
        cfg.rounds = t;
    }
    cfg.validate()?;

    let strategies: Vec<Strategy> = if a.strategy.is_empty() {
        vec![Strategy::UserOnly]
    } else {
        a.strategy.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    };

    let (mut w_e, mut w_s) = (a.w_e, a.w_s);
    if let Some(path) = &a.corpus {
        let corpus = load_jsonl(path, a.min_count, &None)?;
        let weights = Weights::compute(&corpus, &build_entity_sets(&corpus), &cfg);
        w_e = w_e.or(Some(weights.total_e));
        w_s = w_s.or(Some(weights.total_s));
    }

    for strategy in strategies {
        let (we, ws) = match (strategy, w_e, w_s) {
            (Strategy::JointMixture, None, _) | (Strategy::JointMixture, _, None) => {
                return Err(CliError::Usage(
                    "joint_mixture needs --w-e and --w-s or --corpus".to_string(),
                ))
            }
            (_, we, ws) => (we.unwrap_or(0.0), ws.unwrap_or(0.0)),
        };
        let q = effective_rate(strategy, cfg.q_u, cfg.q_e, cfg.q_s, we, ws)?;
        let curve = budget_curve(q, cfg.z, cfg.delta, cfg.rounds, strategy)?;
        let mut csv = String::from("t,epsilon,best_order\n");
        for p in &curve {
            let order = p.order.map(|o| o.to_string()).unwrap_or_default();
            csv.push_str(&format!("{},{},{}\n", p.t, p.epsilon, order));
        }
        write_out(&cli.out_dir, &format!("account_{strategy}.csv"), &csv)?;
        let last = curve.last().map_or(0.0, |p| p.epsilon);
        println!("strategy={strategy} q_eff={q} T={} epsilon={last}", cfg.rounds);
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<(), CliError> {
    let params = checkpoint::decode(&std::fs::read(&a.checkpoint).map_err(|source| CliError::Io {
        path: a.checkpoint.clone(),
        source,
    })?)
    .map_err(|source| CliError::Model {
        path: a.checkpoint.clone(),
        source,
    })?;
    let mut corpus = load_jsonl(&a.corpus, a.min_count, &None)?;
    if let Some(path) = &a.vocab {
        let vocab = Vocab::from_text(&read_text(path)?).map_err(|m| CliError::Usage(format!("{}: {m}", path.display())))?;
        corpus = corpus.with_vocab(vocab);
    }
    if corpus.vocab().len() != params.dims.vocab {
        return Err(CliError::Usage(format!(
            "checkpoint expects a vocabulary of {} tokens, the corpus gives {}",
            params.dims.vocab,
            corpus.vocab().len()
        )));
    }
    let eval = EvalSet::from_corpus(&corpus, params.dims.task);
    if eval.is_empty() {
        return Err(CliError::Usage("corpus has nothing to evaluate on".to_string()));
    }
    if let EvalSet::ErrorRate(items) = &eval {
        if let Some((_, y)) = items.iter().find(|(_, y)| *y as usize >= params.dims.classes) {
            return Err(CliError::Usage(format!(
                "label {y} is outside the checkpoint's {} classes",
                params.dims.classes
            )));
        }
    }
    let value = eval.evaluate(&params);
    if !value.is_finite() {
        return Err(CliError::Numerical(format!("{} is {value}", eval.name())));
    }
    println!("{}={value}", eval.name());
    Ok(())
}
