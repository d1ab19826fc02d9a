use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use clara::corpus::{load_corpus, synth_corpus, synth_recording, write_corpus, Modality, Report, Vocabulary};
use clara::metrics::{evaluate_records, read_eval_records, EvalRecord, EvalReport};
use clara::pipeline::{
    anchor_sweep, check_disjoint, evaluate_reports, generate_records, split_by_patient, write_sweep, AnchorSource,
    GeneratedSentence, GenerationConfig, Mode, PipelineConfig, RecordingSource, System,
};
use clara::prototype::PrototypeRepository;

use crate::api::{serve, AppState};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8787";

#[derive(Parser, Debug)]
#[command(name = "clara", version, about = "Sentence-by-sentence report completion")]
pub struct Cli {
    /// Seed for splits, initialization and synthetic data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON pipeline configuration; missing fields take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic corpus.
    Synth {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value = "eeg")]
        modality: Modality,
        #[arg(long)]
        out: PathBuf,
        /// Also write one recording file per report here and point the
        /// reports' signal_ref at them.
        #[arg(long)]
        signals: Option<PathBuf>,
    },
    /// Build the vocabulary and sentence repository of a corpus.
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Vocabulary file; defaults to vocab.tsv next to the repository.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Train one component (or all) on the corpus train split.
    Train {
        #[arg(value_enum)]
        component: Component,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model_dir: PathBuf,
    },
    /// Generate reports for a corpus split as evaluation records.
    Generate {
        #[arg(long)]
        model_dir: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitPart::Test)]
        split: SplitPart,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Evaluate generation on the test split, or score a record file.
    Eval {
        #[arg(long, required_unless_present = "records")]
        corpus: Option<PathBuf>,
        /// Separate test corpus; the main corpus is then used for training.
        #[arg(long)]
        test_corpus: Option<PathBuf>,
        #[arg(long)]
        model_dir: Option<PathBuf>,
        /// Score an existing JSONL file of evaluation records instead.
        #[arg(long, conflicts_with_all = ["corpus", "test_corpus"])]
        records: Option<PathBuf>,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Evaluate with gold anchors truncated to each count.
    Sweep {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model_dir: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        counts: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Run the HTTP service.
    Serve {
        /// Defaults to $CLARA_MODEL_DIR.
        #[arg(long)]
        model_dir: Option<PathBuf>,
        /// Defaults to $CLARA_ADDR, then 127.0.0.1:8787.
        #[arg(long)]
        addr: Option<String>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Component {
    Editor,
    Anchors,
    Phenotype,
    All,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitPart {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    RetrieveOnly,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum AnchorArg {
    User,
    Predicted,
}

#[derive(clap::Args, Debug)]
pub struct GenArgs {
    /// Generation mode; `eval` runs both when omitted.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    anchors: Option<AnchorArg>,
    /// Feed the first N gold tokens of each sentence as its prefix.
    #[arg(long)]
    prefix_len: Option<usize>,
}

impl GenArgs {
    fn apply(&self, base: &GenerationConfig, mode: Option<ModeArg>) -> GenerationConfig {
        let mut g = base.clone();
        if let Some(m) = mode.or(self.mode) {
            g.mode = match m {
                ModeArg::Full => Mode::Full,
                ModeArg::RetrieveOnly => Mode::RetrieveOnly,
            };
        }
        if let Some(a) = self.anchors {
            g.anchors_source = match a {
                AnchorArg::User => AnchorSource::User,
                AnchorArg::Predicted => AnchorSource::Predicted,
            };
        }
        if let Some(n) = self.prefix_len {
            g.gold_prefix = true;
            g.prefix_len = n;
        }
        g
    }
}

/// Failure of a command: bad usage exits 1, bad data or models exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(clara::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Data(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<clara::Error> for CliError {
    fn from(e: clara::Error) -> Self {
        CliError::Data(e)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(clara::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::from_json_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn source_for(corpus: &Path, config: &PipelineConfig) -> RecordingSource {
    RecordingSource {
        base_dir: corpus.parent().map(Path::to_path_buf),
        synth_seed: config.seed,
    }
}

fn has_system(dir: &Path) -> bool {
    dir.join("system.json").exists()
}

/// Loads the system in `model_dir` if there is one; otherwise fits every
/// component on `train` and stores the result in `model_dir` if given.
fn obtain_system(
    model_dir: Option<&Path>,
    train: &[Report],
    config: &PipelineConfig,
    source: &RecordingSource,
) -> CliResult<System> {
    if let Some(dir) = model_dir.filter(|d| has_system(d)) {
        return Ok(System::load(dir)?);
    }
    let system = System::fit(train, config, source)?;
    if let Some(dir) = model_dir {
        system.save(dir)?;
    }
    Ok(system)
}

pub fn run(cli: Cli) -> CliResult {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Synth {
            n,
            modality,
            out,
            signals,
        } => synth(&config, *n, *modality, out, signals.as_deref()),
        Command::Index { corpus, out, vocab } => index(&config, corpus, out, vocab.as_deref()),
        Command::Train {
            component,
            corpus,
            model_dir,
        } => train(&config, *component, corpus, model_dir),
        Command::Generate {
            model_dir,
            corpus,
            out,
            split,
            gen,
        } => generate(&config, model_dir, corpus, out, *split, gen),
        Command::Eval {
            corpus,
            test_corpus,
            model_dir,
            records,
            gen,
        } => match records {
            Some(path) => eval_records(path, model_dir.as_deref()),
            None => {
                let corpus = corpus.as_deref().expect("clap requires corpus without records");
                eval(&config, corpus, test_corpus.as_deref(), model_dir.as_deref(), gen)
            }
        },
        Command::Sweep {
            corpus,
            model_dir,
            counts,
            out,
            gen,
        } => sweep(&config, corpus, model_dir.as_deref(), counts, out, gen),
        Command::Serve { model_dir, addr } => serve_cmd(model_dir.clone(), addr.clone()),
    }
}

fn synth(config: &PipelineConfig, n: usize, modality: Modality, out: &Path, signals: Option<&Path>) -> CliResult {
    if n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let mut reports = synth_corpus(config.seed, n, modality);
    if let Some(dir) = signals {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let base = out.parent().filter(|p| !p.as_os_str().is_empty());
        for r in &mut reports {
            let path = dir.join(format!("{}.rec", r.id.replace(':', "_")));
            synth_recording(r, config.seed).write(&path)?;
            let rel = match base {
                Some(b) => path.strip_prefix(b).unwrap_or(&path),
                None => &path,
            };
            r.signal_ref = Some(rel.to_string_lossy().into_owned());
        }
    }
    write_corpus(out, &reports)?;
    log::info!("wrote {} reports to {}", reports.len(), out.display());
    Ok(())
}

fn index(config: &PipelineConfig, corpus: &Path, out: &Path, vocab: Option<&Path>) -> CliResult {
    let reports = load_corpus(corpus)?;
    let section = config.section.as_deref();
    let v = Arc::new(Vocabulary::build(&reports, config.min_count, section)?);
    let repo = PrototypeRepository::build_in(&reports, v.clone(), section)?;
    let vocab_path = match vocab {
        Some(p) => p.to_path_buf(),
        None => out.with_file_name("vocab.tsv"),
    };
    v.write_tsv(&vocab_path)?;
    let vocab_ref = match (vocab_path.parent(), out.parent()) {
        (Some(a), Some(b)) if a == b => vocab_path.file_name().unwrap().to_string_lossy().into_owned(),
        _ => vocab_path.to_string_lossy().into_owned(),
    };
    repo.save(out, &vocab_ref)?;
    log::info!("indexed {} sentences from {} reports", repo.len(), reports.len());
    Ok(())
}

fn train(config: &PipelineConfig, component: Component, corpus: &Path, model_dir: &Path) -> CliResult {
    let reports = load_corpus(corpus)?;
    let split = split_by_patient(&reports, config.seed, config.train_fraction, config.validation_fraction)?;
    let source = source_for(corpus, config);
    let mut system = if has_system(model_dir) {
        System::load(model_dir)?
    } else {
        System::fit_base(&split.train, config, &source)?
    };
    let needs_embeddings = matches!(component, Component::Editor | Component::Anchors | Component::All);
    let embeddings = if needs_embeddings {
        system.embed_reports(&split.train, &source)?
    } else {
        Vec::new()
    };
    if matches!(component, Component::Anchors | Component::All) {
        system.fit_anchors(&split.train, &embeddings)?;
    }
    if matches!(component, Component::Editor | Component::All) {
        let curve = system.fit_editor(&split.train, &embeddings)?;
        log::info!("editor loss per epoch: {curve:?}");
    }
    if matches!(component, Component::Phenotype | Component::All) {
        system.fit_phenotype(&split.train)?;
    }
    system.save(model_dir)?;
    Ok(())
}

#[derive(Serialize)]
struct GenerationLine<'a> {
    #[serde(flatten)]
    record: &'a EvalRecord,
    anchors: Vec<&'a str>,
    sentences: &'a [GeneratedSentence],
    stopped_at: Option<usize>,
}

fn generate(
    config: &PipelineConfig,
    model_dir: &Path,
    corpus: &Path,
    out: &Path,
    part: SplitPart,
    gen: &GenArgs,
) -> CliResult {
    let system = System::load(model_dir)?;
    let reports = load_corpus(corpus)?;
    let split = split_by_patient(&reports, config.seed, config.train_fraction, config.validation_fraction)?;
    let chosen = match part {
        SplitPart::Train => split.train,
        SplitPart::Validation => split.validation,
        SplitPart::Test => split.test,
        SplitPart::All => reports,
    };
    let source = source_for(corpus, config);
    let embeddings = system.embed_reports(&chosen, &source)?;
    let gen_config = gen.apply(&system.config().generation, None);
    let (records, generated) = generate_records(&system, &chosen, &embeddings, &gen_config)?;
    let mut text = String::new();
    for (rec, g) in records.iter().zip(&generated) {
        let line = GenerationLine {
            record: rec,
            anchors: g.anchors.iter().map(|a| a.label()).collect(),
            sentences: &g.sentences,
            stopped_at: g.stopped_at,
        };
        text.push_str(&serde_json::to_string(&line).map_err(clara::Error::from)?);
        text.push('\n');
    }
    std::fs::write(out, text).map_err(|e| io_err(out, e))?;
    log::info!("wrote {} generated reports to {}", records.len(), out.display());
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    println!("{}", serde_json::to_string_pretty(value).map_err(clara::Error::from)?);
    Ok(())
}

fn eval_records(path: &Path, model_dir: Option<&Path>) -> CliResult {
    let records = read_eval_records(path)?;
    let system = match model_dir {
        Some(d) => Some(System::load(d)?),
        None => None,
    };
    let report = evaluate_records(&records, system.as_ref().and_then(System::phenotype))?;
    print_json(&report)
}

#[derive(Serialize)]
struct EvalSummary {
    train_reports: usize,
    test_reports: usize,
    seed: u64,
    config_hash: String,
    results: Vec<ModeResult>,
}

#[derive(Serialize)]
struct ModeResult {
    config: GenerationConfig,
    metrics: EvalReport,
}

fn eval(
    config: &PipelineConfig,
    corpus: &Path,
    test_corpus: Option<&Path>,
    model_dir: Option<&Path>,
    gen: &GenArgs,
) -> CliResult {
    let reports = load_corpus(corpus)?;
    let (train, test) = match test_corpus {
        Some(t) => {
            let test = load_corpus(t)?;
            check_disjoint(&[&reports, &test])?;
            (reports, test)
        }
        None => {
            let split = split_by_patient(&reports, config.seed, config.train_fraction, config.validation_fraction)?;
            split.check()?;
            (split.train, split.test)
        }
    };
    if test.is_empty() {
        return Err(CliError::Data(clara::Error::Invalid("test split is empty".into())));
    }
    let source = source_for(corpus, config);
    let system = obtain_system(model_dir, &train, config, &source)?;
    let test_source = source_for(test_corpus.unwrap_or(corpus), config);
    let embeddings = system.embed_reports(&test, &test_source)?;
    let modes: Vec<Option<ModeArg>> = match gen.mode {
        Some(_) => vec![None],
        None => vec![Some(ModeArg::Full), Some(ModeArg::RetrieveOnly)],
    };
    let mut results = Vec::new();
    for m in modes {
        let g = gen.apply(&system.config().generation, m);
        let e = evaluate_reports(&system, &test, &embeddings, &g)?;
        results.push(ModeResult {
            config: g,
            metrics: e.metrics,
        });
    }
    print_json(&EvalSummary {
        train_reports: train.len(),
        test_reports: test.len(),
        seed: system.config().seed,
        config_hash: system.config().hash(),
        results,
    })
}

fn sweep(
    config: &PipelineConfig,
    corpus: &Path,
    model_dir: Option<&Path>,
    counts: &[usize],
    out: &Path,
    gen: &GenArgs,
) -> CliResult {
    if counts.is_empty() || counts.iter().any(|c| !(1..=5).contains(c)) {
        return Err(CliError::Usage("--counts must be values in 1..=5".into()));
    }
    let reports = load_corpus(corpus)?;
    let split = split_by_patient(&reports, config.seed, config.train_fraction, config.validation_fraction)?;
    let source = source_for(corpus, config);
    let system = obtain_system(model_dir, &split.train, config, &source)?;
    let embeddings = system.embed_reports(&split.test, &source)?;
    let g = gen.apply(&system.config().generation, None);
    let rows = anchor_sweep(&system, &split.test, &embeddings, counts, &g)?;
    let meta = write_sweep(out, &rows, &system)?;
    print_json(&meta)
}

fn serve_cmd(model_dir: Option<PathBuf>, addr: Option<String>) -> CliResult {
    let addr = addr
        .or_else(|| std::env::var("CLARA_ADDR").ok())
        .unwrap_or_else(|| DEFAULT_ADDR.to_string());
    let model_dir = model_dir.or_else(|| std::env::var_os("CLARA_MODEL_DIR").map(PathBuf::from));
    let system = match model_dir {
        Some(dir) => Some(System::load(&dir)?),
        None => {
            log::warn!("no model directory; model-backed endpoints answer 503");
            None
        }
    };
    let state = AppState::new(system);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| io_err(Path::new(&addr), e))?;
    runtime
        .block_on(serve(&addr, state))
        .map_err(|e| io_err(Path::new(&addr), e))
}
