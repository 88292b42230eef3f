use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rorokit::eval::{benchmark_report, System};
use rorokit::layout::io::read_records;
use rorokit::layout::{
    corpus_stats, derive_word_level, load_corpus, nonlinear_stats, save_corpus, synth_generate, validate_annotation,
    Corpus, LayoutError, NonLinearDefinition, Split, SynthConfig,
};
use rorokit::nn::{EncoderConfig, NnError};
use rorokit::order::{transitive_closure, Relation};
use rorokit::render::render_svg;
use rorokit::rop::{predict_pseudo_labels, train, RopConfig, RopError, RopModel};
use rorokit::rore::{rore_demo_entity_linking, RoreDemoConfig, RoreError};

#[derive(Parser)]
#[command(name = "rorokit", version, about = "Reading order relations for document layouts")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Output {
    /// Write the JSON result here instead of standard output.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Word,
    Segment,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Baseline {
    Heuristic,
    PermutationOracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check every document's layout and isdr annotation.
    Validate {
        corpus: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Corpus size and non-linear reading order statistics.
    Stats {
        corpus: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Transitive closure of a relation file `{"n": N, "pairs": [[i, j], ...]}`.
    Closure {
        input: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Word-level relations derived from segment-level isdr, one JSON line per document.
    Convert {
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "word")]
        level: LevelArg,
        #[command(flatten)]
        output: Output,
    },
    /// Generate a synthetic corpus.
    Synth {
        /// Generator configuration (JSON); defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train a reading order model on the corpus's train split.
    Train {
        corpus: PathBuf,
        /// `{"rop": {...}, "encoder": {...}}`; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Model checkpoint path.
        #[arg(short, long)]
        out: PathBuf,
        /// Training report path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Pair precision, recall and F1 of models and baselines against gold isdr.
    Eval {
        corpus: PathBuf,
        /// Model checkpoints to evaluate.
        #[arg(long)]
        model: Vec<PathBuf>,
        /// Baselines to evaluate; both run when no model or baseline is given.
        #[arg(long, value_enum)]
        baseline: Vec<Baseline>,
        /// Restrict evaluation to one split.
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        #[command(flatten)]
        output: Output,
    },
    /// Fill every document's isdr with model predictions.
    Predict {
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Remove the weakest edge of each predicted cycle.
        #[arg(long)]
        enforce_acyclic: bool,
        /// Output corpus; a `<out>.report.json` prediction report is written next to it.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Key-to-value linking with and without reading order attention bias.
    DemoRore {
        /// `{"synth": {...}, "demo": {...}}`; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Use this corpus instead of generating form pages.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Draw one document and its relation as SVG.
    Render {
        corpus: PathBuf,
        /// Document id; the first document when omitted.
        #[arg(long)]
        doc: Option<String>,
        #[arg(short, long)]
        out: PathBuf,
    },
}

/// Failure reading, writing or parsing input; exits with status 2.
#[derive(Debug)]
struct IoFailure(String);

impl fmt::Display for IoFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for IoFailure {}

fn io_failure(e: impl fmt::Display) -> anyhow::Error {
    anyhow!(IoFailure(e.to_string()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<IoFailure>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<LayoutError>() {
            if e.is_io() {
                return 2;
            }
        }
        if let Some(NnError::Io { .. } | NnError::Checkpoint(_)) = cause.downcast_ref::<NnError>() {
            return 2;
        }
        if let Some(RopError::Nn(NnError::Io { .. } | NnError::Checkpoint(_))) = cause.downcast_ref::<RopError>() {
            return 2;
        }
        if let Some(RoreError::Rop(RopError::Nn(NnError::Io { .. } | NnError::Checkpoint(_)))) =
            cause.downcast_ref::<RoreError>()
        {
            return 2;
        }
    }
    1
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| io_failure(format!("{}: {e}", path.display())))
}

fn config_section<T: serde::de::DeserializeOwned + Default>(config: &Option<Value>, key: &str) -> Result<T> {
    match config.as_ref().and_then(|c| c.get(key)) {
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| io_failure(format!("config section {key}: {e}"))),
        None => Ok(T::default()),
    }
}

fn load(path: &Path) -> Result<Corpus> {
    Ok(load_corpus(path)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_failure(format!("{}: {e}", path.display())))
}

fn emit(output: &Output, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("output serializes") + "\n";
    match &output.out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fraction(f: Option<f64>) -> String {
    f.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v))
}

fn cmd_validate(corpus: &Path, output: &Output) -> Result<u8> {
    let records = read_records(corpus)?;
    let reports: Vec<_> = records.iter().map(validate_annotation).collect();
    let with_isdr = reports.iter().filter(|r| r.has_isdr).count();
    let acyclic = reports.iter().filter(|r| r.has_isdr && r.cycle.is_none()).count();
    let failing: Vec<_> = reports.iter().filter(|r| !r.is_clean()).collect();
    for r in &failing {
        let mut parts = Vec::new();
        if let Some(c) = &r.cycle {
            parts.push(format!("cycle {c:?}"));
        }
        for (name, v) in [("out of range", &r.out_of_range), ("duplicate", &r.duplicates), ("self pair", &r.self_pairs)] {
            if !v.is_empty() {
                parts.push(format!("{name} {v:?}"));
            }
        }
        parts.extend(r.layout.iter().cloned());
        eprintln!("{}: {}", r.doc_id, parts.join("; "));
    }
    eprintln!(
        "{} documents, {} with violations, acyclic isdr {}/{}",
        reports.len(),
        failing.len(),
        acyclic,
        with_isdr
    );
    emit(
        output,
        &json!({
            "documents": reports.len(),
            "valid": failing.is_empty(),
            "acyclic_rate": (with_isdr > 0).then(|| acyclic as f64 / with_isdr as f64),
            "violations": failing,
        }),
    )?;
    Ok(if failing.is_empty() { 0 } else { 1 })
}

fn cmd_stats(corpus: &Path, output: &Output) -> Result<u8> {
    let c = load(corpus)?;
    let s = corpus_stats(&c);
    eprintln!("documents  {:>10}", s.documents);
    eprintln!("segments   {:>10}", s.segments);
    eprintln!("words      {:>10}", s.words);
    eprintln!("pairs      {:>10}", s.pairs);
    eprintln!("non-linear {:>10}  (degree)", fraction(s.nonlinear_fraction));
    eprintln!("non-linear {:>10}  (literal)", fraction(s.nonlinear_fraction_literal));
    if s.nonlinear_fraction.is_none() && !c.is_empty() {
        if let Err(e) = nonlinear_stats(&c, NonLinearDefinition::Degree) {
            log::warn!("{e}");
        }
    }
    emit(output, &s)?;
    Ok(0)
}

fn cmd_closure(input: &Path, output: &Output) -> Result<u8> {
    let v = read_json(input)?;
    let rel: Relation = serde_json::from_value(v).map_err(|e| io_failure(format!("{}: {e}", input.display())))?;
    let text = serde_json::to_string(&transitive_closure(&rel)).expect("relation serializes") + "\n";
    match &output.out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_convert(corpus: &Path, level: LevelArg, output: &Output) -> Result<u8> {
    let c = load(corpus)?;
    let mut lines = String::new();
    for doc in &c.documents {
        let rel = match level {
            LevelArg::Word => derive_word_level(doc)?,
            LevelArg::Segment => doc.require_isdr()?.clone(),
        };
        let mut v = serde_json::to_value(&rel).expect("relation serializes");
        v["id"] = json!(doc.id);
        lines.push_str(&serde_json::to_string(&v).expect("value serializes"));
        lines.push('\n');
    }
    match &output.out {
        Some(p) => write_text(p, &lines)?,
        None => print!("{lines}"),
    }
    Ok(0)
}

fn cmd_synth(config: Option<&Path>, seed: u64, out: &Path) -> Result<u8> {
    let cfg: SynthConfig = match config {
        Some(p) => serde_json::from_value(read_json(p)?).map_err(|e| io_failure(format!("{}: {e}", p.display())))?,
        None => SynthConfig::default(),
    };
    let corpus = synth_generate(&cfg, seed)?;
    save_corpus(&corpus, out)?;
    eprintln!("wrote {} documents to {}", corpus.len(), out.display());
    Ok(0)
}

fn cmd_train(corpus: &Path, config: Option<&Path>, seed: Option<u64>, out: &Path, report: Option<&Path>) -> Result<u8> {
    let c = load(corpus)?;
    let cfg = config.map(read_json).transpose()?;
    let mut rop: RopConfig = config_section(&cfg, "rop")?;
    let encoder: EncoderConfig = config_section(&cfg, "encoder")?;
    if let Some(s) = seed {
        rop.seed = s;
    }
    let (model, r) = train(&c, &rop, &encoder)?;
    model.save(out)?;
    eprintln!(
        "trained on {} documents ({} skipped), {} epochs, best {} pair-F1 {:.4} at epoch {}",
        r.trained_documents,
        r.skipped.len(),
        r.epochs_run,
        r.monitor,
        r.best_f1,
        r.best_epoch
    );
    if let Some(p) = report {
        write_text(p, &(serde_json::to_string_pretty(&r).expect("report serializes") + "\n"))?;
    }
    Ok(0)
}

fn cmd_eval(
    corpus: &Path,
    models: &[PathBuf],
    baselines: &[Baseline],
    split: Option<SplitArg>,
    output: &Output,
) -> Result<u8> {
    let mut c = load(corpus)?;
    if let Some(s) = split {
        c = c.subset(s.into());
    }
    let loaded = models.iter().map(|p| RopModel::load(p)).collect::<Result<Vec<_>, _>>()?;
    let mut systems: Vec<System> = loaded
        .iter()
        .zip(models)
        .map(|(m, p)| System::Model {
            name: p.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned()),
            model: m,
        })
        .collect();
    let baselines = if models.is_empty() && baselines.is_empty() {
        vec![Baseline::Heuristic, Baseline::PermutationOracle]
    } else {
        baselines.to_vec()
    };
    for b in baselines {
        systems.push(match b {
            Baseline::Heuristic => System::Heuristic,
            Baseline::PermutationOracle => System::PermutationOracle,
        });
    }
    let report = benchmark_report(&c, &systems)?;
    eprint!("{}", report.to_text());
    emit(output, &report)?;
    Ok(0)
}

fn cmd_predict(corpus: &Path, model: &Path, enforce_acyclic: bool, out: &Path) -> Result<u8> {
    let c = load(corpus)?;
    let mut m = RopModel::load(model)?;
    if enforce_acyclic {
        m.config.enforce_acyclic = true;
    }
    let (pred, report) = predict_pseudo_labels(&m, &c)?;
    save_corpus(&pred, out)?;
    let mut sidecar = out.as_os_str().to_owned();
    sidecar.push(".report.json");
    write_text(Path::new(&sidecar), &(report.sidecar_json() + "\n"))?;
    eprintln!(
        "predicted {} documents ({} skipped), acyclic rate {}",
        report.documents.len(),
        report.skipped.len(),
        fraction(report.acyclic_rate())
    );
    Ok(0)
}

fn cmd_demo_rore(config: Option<&Path>, corpus: Option<&Path>, seed: u64, output: &Output) -> Result<u8> {
    let cfg = config.map(read_json).transpose()?;
    let mut demo: RoreDemoConfig = config_section(&cfg, "demo")?;
    demo.link.seed = seed;
    demo.pseudo.seed = seed;
    let c = match corpus {
        Some(p) => load(p)?,
        None => {
            let synth: SynthConfig = match cfg.as_ref().and_then(|c| c.get("synth")) {
                Some(_) => config_section(&cfg, "synth")?,
                None => SynthConfig {
                    n_docs: 300,
                    mix: rorokit::layout::LayoutMix {
                        chain: 0.0,
                        two_column: 0.0,
                        grid: 0.0,
                        header_footer: 0.0,
                        form: 1.0,
                    },
                    ..Default::default()
                },
            };
            synth_generate(&synth, seed)?
        }
    };
    let report = rore_demo_entity_linking(&c, &demo)?;
    eprintln!("test documents {}", report.test_documents);
    eprintln!("vanilla        f1 {:.4}", report.f1_vanilla);
    for arm in &report.rore {
        eprintln!("rore ({})    f1 {:.4}", arm.kind, arm.f1);
    }
    emit(output, &report)?;
    Ok(0)
}

fn cmd_render(corpus: &Path, doc: Option<&str>, out: &Path) -> Result<u8> {
    let records = read_records(corpus)?;
    let rec = match doc {
        Some(id) => records.iter().find(|r| r.id == id).ok_or_else(|| anyhow!("no document {id}"))?,
        None => records.first().ok_or_else(|| anyhow!("corpus is empty"))?,
    };
    let d = rorokit::layout::Document::try_from(rec)?;
    write_text(out, &render_svg(&d, None))?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Validate { corpus, output } => cmd_validate(&corpus, &output),
        Command::Stats { corpus, output } => cmd_stats(&corpus, &output),
        Command::Closure { input, output } => cmd_closure(&input, &output),
        Command::Convert { corpus, level, output } => cmd_convert(&corpus, level, &output),
        Command::Synth { config, seed, out } => cmd_synth(config.as_deref(), seed, &out),
        Command::Train {
            corpus,
            config,
            seed,
            out,
            report,
        } => cmd_train(&corpus, config.as_deref(), seed, &out, report.as_deref()),
        Command::Eval {
            corpus,
            model,
            baseline,
            split,
            output,
        } => cmd_eval(&corpus, &model, &baseline, split, &output),
        Command::Predict {
            corpus,
            model,
            enforce_acyclic,
            out,
        } => cmd_predict(&corpus, &model, enforce_acyclic, &out),
        Command::DemoRore {
            config,
            corpus,
            seed,
            output,
        } => cmd_demo_rore(config.as_deref(), corpus.as_deref(), seed, &output),
        Command::Render { corpus, doc, out } => cmd_render(&corpus, doc.as_deref(), &out),
    }
}

fn threads() -> Result<usize> {
    match std::env::var("ROROKIT_THREADS") {
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => bail!("ROROKIT_THREADS must be a positive integer, got {v:?}"),
        },
        Err(_) => Ok(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = threads()
        .and_then(|n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring worker threads")
        })
        .and_then(|_| run(cli));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
