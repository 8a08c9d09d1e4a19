use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use qgharvest::corpus::{parse_squad, read_articles, tokenize, SquadCorpus};
use qgharvest::eval::{evaluate_questions, floor_violations, overlap_metrics, question_type_distribution};
use qgharvest::extractor::{examples_from_squad, train_extractor_with, ExtractorConfig, ExtractorModel, PredictedSpanRecord, RuleNerTagger};
use qgharvest::gradsuite::{gradient_suite, GRADIENT_TOLERANCE};
use qgharvest::harvest::{default_resolver, harvest_jsonl, PipelineConfig};
use qgharvest::qg::{build_qg_vocab, instances_from_squad, train_qg_with, write_training_csv, QgConfig};
use qgharvest::synthetic::{desk_articles, desk_squad_json};

#[derive(Parser)]
#[command(name = "qgharvest", version, about = "Harvest question/answer pairs from articles")]
struct Cli {
    /// JSON config for the subcommand (model, pipeline or metric floors).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the question generator on SQuAD-format data.
    TrainQg {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        preset: String,
        /// Per-epoch CSV log.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Write the vocabulary as JSON.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Train the answer-span extractor on SQuAD-format data.
    TrainExt {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        preset: String,
    },
    /// Run extraction and generation over articles, writing JSONL records.
    Harvest {
        /// Text file, JSONL file or directory of articles.
        #[arg(long)]
        articles: PathBuf,
        #[arg(long)]
        extractor: Option<PathBuf>,
        #[arg(long)]
        qg: Option<PathBuf>,
    },
    /// BLEU over line-aligned candidate and reference questions.
    EvalQg {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        references: PathBuf,
        /// Epsilon for zero-match n-gram orders.
        #[arg(long)]
        smoothing: Option<f64>,
    },
    /// Exact/binary/proportional span overlap of an extractor on SQuAD-format data.
    EvalExt {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write predicted spans as JSONL.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Check every analytic gradient against central differences.
    Gradcheck,
    /// Question-type histogram of plain-text or harvested JSONL questions.
    Stats {
        #[arg(long)]
        questions: PathBuf,
    },
    /// Write the built-in synthetic corpus (SQuAD JSON and an article file).
    DeskCorpus,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<qgharvest::Error> for Failure {
    fn from(e: qgharvest::Error) -> Self {
        match e {
            qgharvest::Error::Io(io) if io.kind() == io::ErrorKind::NotFound => Failure::Usage(io.to_string()),
            qgharvest::Error::Config(msg) => Failure::Usage(format!("config: {msg}")),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        qgharvest::Error::Io(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn require(path: &Path) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{} not found", path.display())))
    }
}

fn read_squad(path: &Path) -> Result<SquadCorpus, Failure> {
    require(path)?;
    let corpus = parse_squad(&std::fs::read(path)?)?;
    let r = &corpus.report;
    log::info!(
        "{}: {} paragraphs, {} examples ({} text mismatches, {} cross-sentence skipped)",
        path.display(),
        corpus.paragraphs.len(),
        corpus.examples.len(),
        r.text_mismatch,
        r.cross_sentence
    );
    Ok(corpus)
}

/// Preset values overlaid with the fields present in the config file.
fn layered<T: Serialize + DeserializeOwned>(base: T, config: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = config else { return Ok(base) };
    require(path)?;
    let over: Value = serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let Value::Object(over) = over else {
        return Err(Failure::Usage(format!("{}: expected a JSON object", path.display())));
    };
    let mut merged = serde_json::to_value(base)?;
    let obj = merged.as_object_mut().expect("config serializes to an object");
    for (k, v) in over {
        if !obj.contains_key(&k) {
            return Err(Failure::Usage(format!("{}: unknown field {k:?}", path.display())));
        }
        obj.insert(k, v);
    }
    serde_json::from_value(merged).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn required_out(out: Option<&Path>, what: &str) -> Result<PathBuf, Failure> {
    out.map(Path::to_path_buf)
        .ok_or_else(|| Failure::Usage(format!("--out is required for {what}")))
}

/// `--out` file or stdout.
fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Metric floors, e.g. `{"bleu4": 0.1}`.
fn floors(config: Option<&Path>) -> Result<BTreeMap<String, f64>, Failure> {
    let Some(p) = config else { return Ok(BTreeMap::new()) };
    require(p)?;
    serde_json::from_str(&std::fs::read_to_string(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))
}

fn check_floors(metrics: &BTreeMap<String, f64>, config: Option<&Path>) -> CliResult {
    let violations = floor_violations(metrics, &floors(config)?);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Run(format!("below floor: {}", violations.join("; "))))
    }
}

fn question_lines(path: &Path) -> Result<Vec<Vec<String>>, Failure> {
    require(path)?;
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let q = if l.trim_start().starts_with('{') {
                let v: Value = serde_json::from_str(l)?;
                v.get("question")
                    .and_then(Value::as_str)
                    .ok_or_else(|| Failure::Run(format!("{}: record without a question", path.display())))?
                    .to_string()
            } else {
                l.to_string()
            };
            Ok(tokenize(&q).into_iter().map(|t| t.surface).collect())
        })
        .collect()
}

fn train_qg_cmd(cli: &Cli, train: &Path, dev: Option<&Path>, preset: &str, log_path: Option<&Path>, vocab_path: Option<&Path>) -> CliResult {
    let out = required_out(cli.out.as_deref(), "train-qg")?;
    let mut config = layered(QgConfig::preset(preset)?, cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let resolver = default_resolver();
    let (train_set, skipped) = instances_from_squad(&read_squad(train)?, &resolver);
    let dev_set = match dev {
        Some(d) => instances_from_squad(&read_squad(d)?, &resolver).0,
        None => Vec::new(),
    };
    log::info!("{} training instances ({skipped} skipped), {} dev", train_set.len(), dev_set.len());
    let vocab = build_qg_vocab(&train_set, config.vocab_limit);
    if let Some(p) = vocab_path {
        std::fs::write(p, serde_json::to_string(&vocab)?)?;
    }
    let outcome = train_qg_with(&train_set, &dev_set, vocab, config, |_| {})?;
    outcome.model.save(&out)?;
    if let Some(p) = log_path {
        write_training_csv(BufWriter::new(File::create(p)?), &outcome.log)?;
    }
    if let Some(e) = outcome.diverged {
        log::warn!("training stopped at epoch {e} on a non-finite value");
    }
    println!(
        "best epoch {} dev perplexity {:.4}; saved {}",
        outcome.best_epoch,
        outcome.best_dev_perplexity,
        out.display()
    );
    Ok(())
}

fn train_ext_cmd(cli: &Cli, train: &Path, dev: Option<&Path>, preset: &str) -> CliResult {
    let out = required_out(cli.out.as_deref(), "train-ext")?;
    let mut config = layered(ExtractorConfig::preset(preset)?, cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let train_set = examples_from_squad(&read_squad(train)?);
    let dev_set = match dev {
        Some(d) => examples_from_squad(&read_squad(d)?),
        None => Vec::new(),
    };
    let outcome = train_extractor_with(&train_set, &dev_set, config, &RuleNerTagger, |_| {})?;
    outcome.model.save(&out)?;
    println!(
        "best epoch {} dev exact F1 {:.4}; saved {}",
        outcome.best_epoch,
        outcome.best_dev_f1,
        out.display()
    );
    Ok(())
}

fn harvest_cmd(cli: &Cli, articles: &Path, extractor: Option<&Path>, qg: Option<&Path>) -> CliResult {
    let mut config = match &cli.config {
        Some(p) => {
            require(p)?;
            PipelineConfig::from_json_file(p)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(p) = extractor {
        config.extractor_checkpoint = p.to_path_buf();
    }
    if let Some(p) = qg {
        config.qg_checkpoint = p.to_path_buf();
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    require(articles)?;
    for p in config.referenced_files() {
        require(p)?;
    }
    let (ext, gen) = config.load_models()?;
    let docs = read_articles(articles)?;
    let stats = harvest_jsonl(&docs, &ext, &gen, &default_resolver(), &config, sink(cli.out.as_deref())?)?;
    eprintln!("{}", serde_json::to_string(&stats)?);
    Ok(())
}

fn eval_qg_cmd(cli: &Cli, candidates: &Path, references: &Path, smoothing: Option<f64>) -> CliResult {
    let c = question_lines(candidates)?;
    let r = question_lines(references)?;
    let report = evaluate_questions(&c, &r, smoothing).map_err(|e| Failure::Usage(e.to_string()))?;
    print!("{}", report.to_text());
    if let Some(p) = &cli.out {
        std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
    }
    check_floors(&report.metrics(), cli.config.as_deref())
}

fn eval_ext_cmd(cli: &Cli, model: &Path, data: &Path, predictions: Option<&Path>) -> CliResult {
    require(model)?;
    let model = ExtractorModel::load(model)?;
    let examples = examples_from_squad(&read_squad(data)?);
    let mut pred = Vec::with_capacity(examples.len());
    let mut records = Vec::new();
    for e in &examples {
        let p = model.predict(&e.paragraph)?;
        records.extend(p.spans.iter().map(|s| PredictedSpanRecord::new(&e.paragraph, s)));
        pred.push(p.spans);
    }
    let gold: Vec<_> = examples.iter().map(|e| e.gold.clone()).collect();
    let report = overlap_metrics(&pred, &gold);
    print!("{}", report.to_text());
    if let Some(p) = &cli.out {
        std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(p) = predictions {
        let mut w = BufWriter::new(File::create(p)?);
        for r in &records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    check_floors(&report.metrics(), cli.config.as_deref())
}

fn gradcheck_cmd(cli: &Cli) -> CliResult {
    let cases = gradient_suite(cli.seed.unwrap_or(2018))?;
    let mut w = sink(cli.out.as_deref())?;
    let mut worst = 0.0f64;
    for c in &cases {
        worst = worst.max(c.report.max_rel_error);
        writeln!(
            w,
            "{:<6} {:<44} max rel error {:.3e} over {} coordinates",
            if c.passes() { "ok" } else { "FAIL" },
            c.name,
            c.report.max_rel_error,
            c.report.coordinates
        )?;
    }
    writeln!(w, "max rel error {worst:.3e} (tolerance {GRADIENT_TOLERANCE:e})")?;
    w.flush()?;
    if cases.iter().all(|c| c.passes()) {
        Ok(())
    } else {
        Err(Failure::Run("gradient check failed".into()))
    }
}

fn stats_cmd(cli: &Cli, questions: &Path) -> CliResult {
    let qs = question_lines(questions)?;
    let hist = question_type_distribution(&qs);
    let mut w = sink(cli.out.as_deref())?;
    writeln!(w, "{:<16} {:>7} {:>8}", "type", "count", "share")?;
    for (k, n) in &hist {
        let share = if qs.is_empty() { 0.0 } else { *n as f64 / qs.len() as f64 };
        writeln!(w, "{k:<16} {n:>7} {share:>8.4}")?;
    }
    writeln!(w, "{:<16} {:>7}", "total", qs.len())?;
    w.flush()?;
    Ok(())
}

fn desk_corpus_cmd(cli: &Cli) -> CliResult {
    let dir = required_out(cli.out.as_deref(), "desk-corpus")?;
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("desk.squad.json"), serde_json::to_string_pretty(&desk_squad_json())?)?;
    for a in desk_articles() {
        std::fs::write(dir.join(format!("{}.txt", a.article_id)), &a.text)?;
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult {
    let no_config = |name: &str| match &cli.config {
        Some(_) => Err(Failure::Usage(format!("{name} takes no --config"))),
        None => Ok(()),
    };
    match &cli.command {
        Command::TrainQg { train, dev, preset, log, vocab } => {
            train_qg_cmd(cli, train, dev.as_deref(), preset, log.as_deref(), vocab.as_deref())
        }
        Command::TrainExt { train, dev, preset } => train_ext_cmd(cli, train, dev.as_deref(), preset),
        Command::Harvest { articles, extractor, qg } => harvest_cmd(cli, articles, extractor.as_deref(), qg.as_deref()),
        Command::EvalQg { candidates, references, smoothing } => eval_qg_cmd(cli, candidates, references, *smoothing),
        Command::EvalExt { model, data, predictions } => eval_ext_cmd(cli, model, data, predictions.as_deref()),
        Command::Gradcheck => no_config("gradcheck").and_then(|_| gradcheck_cmd(cli)),
        Command::Stats { questions } => no_config("stats").and_then(|_| stats_cmd(cli, questions)),
        Command::DeskCorpus => no_config("desk-corpus").and_then(|_| desk_corpus_cmd(cli)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun `qgharvest --help` for usage.");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
