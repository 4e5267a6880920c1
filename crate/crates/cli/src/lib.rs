//! `policyloop` subcommands. `main.rs` only parses arguments, sets up
//! logging and maps [`CliError`] to an exit code.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use policyloop_core::corpus::{load_policy_file, policy_files, write_corpus, CorpusFormat, LoadOptions, Segmentation};
use policyloop_core::evaluation::{run_benchmark, BenchmarkConfig, EvaluationReport, DEFAULT_KS};
use policyloop_core::manager::{RegistryConfig, DEFAULT_AUTOTRAIN_N};
use policyloop_core::rights::{rights_schema, Right};
use policyloop_core::synth::{synth_corpus, SynthConfig};
use policyloop_core::{
    load_label_schema, Corpus, ExtractionManager, LabelId, LabelSchema, ModelKind, ModelSettings, DEFAULT_K,
};
use policyloop_service::config::{
    ENV_AUTOTRAIN_N, ENV_DATA_DIR, ENV_EXTRACTION_URL, ENV_PORT, ENV_REGISTRY_DIR, ENV_ROLE,
};
use policyloop_service::{Role, ServiceConfig, ServiceError};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_MISSING_REGISTRY: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("no policy files in {0}")]
    EmptyCorpus(PathBuf),
    #[error("{} file(s) failed to parse:\n{}", .0.len(), format_failures(.0))]
    ParseFailures(Vec<(PathBuf, String)>),
    #[error("no extractor registry at {0}; run `policyloop init-registry --corpus <dir> --registry {0}` first")]
    MissingRegistry(PathBuf),
    #[error("{0} does not exist")]
    MissingPath(PathBuf),
    #[error("every benchmark cell failed")]
    AllCellsFailed,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Core(#[from] policyloop_core::Error),
    #[error(transparent)]
    Service(ServiceError),
    #[error("io error on {0}: {1}")]
    Io(PathBuf, std::io::Error),
}

fn format_failures(failures: &[(PathBuf, String)]) -> String {
    failures
        .iter()
        .map(|(p, e)| format!("  {}: {e}", p.display()))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::EmptyCorpus(_) | CliError::ParseFailures(_) => EXIT_PARSE,
            CliError::MissingRegistry(_) | CliError::Service(ServiceError::MissingRegistry(_)) => EXIT_MISSING_REGISTRY,
            _ => EXIT_FAILURE,
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::MissingRegistry(p) => CliError::MissingRegistry(p),
            other => CliError::Service(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "policyloop",
    version,
    about = "Guided retrieval of data subject rights from privacy policies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a directory of policies and print corpus statistics.
    Ingest(IngestArgs),
    /// Train and evaluate every (right, model kind) pair on a fixed split.
    Benchmark(BenchmarkArgs),
    /// Create an extractor registry and train all extractors.
    InitRegistry(InitArgs),
    /// Run the annotation service against a registry.
    Serve(ServeArgs),
    /// Print top-k suggestions for a policy file.
    Suggest(SuggestArgs),
    /// Write a synthetic German policy corpus.
    Synth(SynthArgs),
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    ModelKind::from_str(s).map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<CorpusFormat, String> {
    match s {
        "auto" => Ok(CorpusFormat::Auto),
        "policy" => Ok(CorpusFormat::Policy),
        "tiltify" => Ok(CorpusFormat::Tiltify),
        _ => Err(format!("unknown format `{s}` (expected auto, policy or tiltify)")),
    }
}

fn parse_segmentation(s: &str) -> Result<Segmentation, String> {
    match s {
        "paragraph" => Ok(Segmentation::Paragraph),
        "line" => Ok(Segmentation::Line),
        _ => Err(format!("unknown segmentation `{s}` (expected paragraph or line)")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// `auto`, `policy` (policy file format) or `tiltify` (published dataset layout).
    #[arg(long, default_value = "auto", value_parser = parse_format)]
    pub format: CorpusFormat,
    /// Blob segmentation for the published dataset layout: `line` or `paragraph`.
    #[arg(long, value_parser = parse_segmentation)]
    pub segmentation: Option<Segmentation>,
}

impl CorpusArgs {
    fn options(&self) -> LoadOptions {
        LoadOptions {
            format: self.format,
            segmentation: self.segmentation,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SettingsArgs {
    /// Model settings JSON; missing fields take their defaults.
    #[arg(long)]
    pub settings: Option<PathBuf>,
    /// Small encoders and one epoch, for smoke runs.
    #[arg(long, conflicts_with = "settings")]
    pub fast: bool,
}

impl SettingsArgs {
    fn check(&self) -> Result<(), CliError> {
        self.settings.as_deref().map(require_file).transpose().map(|_| ())
    }

    fn load(&self) -> Result<ModelSettings, CliError> {
        match (&self.settings, self.fast) {
            (Some(path), _) => {
                let raw = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.clone(), e))?;
                Ok(serde_json::from_str(&raw).map_err(policyloop_core::Error::from)?)
            }
            (None, true) => Ok(ModelSettings::fast()),
            (None, false) => Ok(ModelSettings::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub dir: PathBuf,
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub corpus_format: CorpusArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS)]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    pub kinds: Vec<ModelKind>,
    /// Restrict to these rights; default is every right in the corpus.
    #[arg(long, value_delimiter = ',')]
    pub rights: Vec<String>,
    /// Base seed; repetition r uses seed + r.
    #[arg(long, default_value_t = 2023)]
    pub seed: u64,
    #[arg(long, default_value_t = 7)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub settings: SettingsArgs,
    #[arg(long, default_value = "report.json")]
    pub out: PathBuf,
    #[arg(long, default_value = "report.txt")]
    pub table: PathBuf,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[command(flatten)]
    pub corpus_format: CorpusArgs,
    /// Label schema JSON; defaults to the five data subject rights.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, env = ENV_REGISTRY_DIR, default_value = "registry")]
    pub registry: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    pub kinds: Vec<ModelKind>,
    #[arg(long, value_parser = parse_kind, default_value = "sentence_embedder")]
    pub serving_kind: ModelKind,
    /// Labels to train; default is every schema label present in the corpus.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[arg(long, default_value_t = 2023)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_AUTOTRAIN_N)]
    pub autotrain_every: usize,
    /// Retrain every kind of a label instead of only the serving kind.
    #[arg(long)]
    pub retrain_all_kinds: bool,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = ENV_REGISTRY_DIR, default_value = "registry")]
    pub registry: PathBuf,
    #[arg(long, env = ENV_DATA_DIR, default_value = "data")]
    pub data: PathBuf,
    /// 0 picks a free port.
    #[arg(long, env = ENV_PORT, default_value_t = policyloop_service::config::DEFAULT_PORT)]
    pub port: u16,
    #[arg(long, env = ENV_AUTOTRAIN_N)]
    pub autotrain_n: Option<usize>,
    /// `combined`, `annotation` or `extraction`.
    #[arg(long, env = ENV_ROLE, default_value = "combined")]
    pub role: String,
    /// Extraction service base URL, for the `annotation` role.
    #[arg(long, env = ENV_EXTRACTION_URL)]
    pub extraction_url: Option<String>,
}

#[derive(Debug, Args)]
pub struct SuggestArgs {
    #[arg(long, env = ENV_REGISTRY_DIR, default_value = "registry")]
    pub registry: PathBuf,
    /// Policy file in the policy file format.
    pub policy: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[arg(short, long, default_value_t = DEFAULT_K)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub documents: usize,
    #[arg(long, default_value_t = 30)]
    pub blobs: usize,
    #[arg(long, default_value_t = 0.85)]
    pub right_probability: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

fn require_dir(path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::MissingPath(path.to_path_buf()))
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingPath(path.to_path_buf()))
    }
}

fn labels(raw: &[String]) -> Vec<LabelId> {
    raw.iter().map(|s| LabelId::new(s.trim())).collect()
}

/// Loads every policy file, collecting all parse failures instead of
/// stopping at the first.
pub fn load_corpus_checked(dir: &Path, options: &LoadOptions) -> Result<Corpus, CliError> {
    require_dir(dir)?;
    let files = policy_files(dir)?;
    if files.is_empty() {
        return Err(CliError::EmptyCorpus(dir.to_path_buf()));
    }
    let mut documents = Vec::with_capacity(files.len());
    let mut failures = Vec::new();
    for file in files {
        match load_policy_file(&file, options) {
            Ok(d) => documents.push(d),
            Err(e) => failures.push((file, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::ParseFailures(failures));
    }
    Ok(Corpus::new(documents))
}

/// Corpus statistics with a count for each of the five rights, plus any
/// other label found.
pub fn summary_text(corpus: &Corpus) -> String {
    let summary = corpus.summary();
    let mut out = format!("{} documents, {} blobs\n", summary.documents, summary.blobs);
    for r in Right::ALL {
        let n = summary.positives.get(&r.label()).copied().unwrap_or(0);
        out.push_str(&format!("{}: {n}\n", r.id()));
    }
    for (label, n) in &summary.positives {
        if Right::from_id(label.as_str()).is_none() {
            out.push_str(&format!("{label}: {n}\n"));
        }
    }
    out
}

pub fn ingest(args: &IngestArgs, out: &mut dyn Write) -> Result<Corpus, CliError> {
    let corpus = load_corpus_checked(&args.dir, &args.corpus.options())?;
    let text = if args.json {
        serde_json::to_string_pretty(&corpus.summary()).map_err(policyloop_core::Error::from)? + "\n"
    } else {
        summary_text(&corpus)
    };
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Io("stdout".into(), e))?;
    Ok(corpus)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io(parent.to_path_buf(), e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

pub fn benchmark(args: &BenchmarkArgs, out: &mut dyn Write) -> Result<EvaluationReport, CliError> {
    require_dir(&args.corpus)?;
    args.settings.check()?;
    if args.reps == 0 {
        return Err(CliError::Argument("--reps must be at least 1".into()));
    }
    let corpus = load_corpus_checked(&args.corpus, &args.corpus_format.options())?;
    let config = BenchmarkConfig {
        kinds: if args.kinds.is_empty() {
            ModelKind::ALL.to_vec()
        } else {
            args.kinds.clone()
        },
        rights: labels(&args.rights),
        ks: args.ks.clone(),
        repetitions: args.reps,
        seeds: Vec::new(),
        seed: args.seed,
        split_seed: args.split_seed,
        test_fraction: args.test_fraction,
        threshold: args.threshold,
        settings: args.settings.load()?,
        jobs: args.jobs,
    };
    let report = run_benchmark(&corpus, &config)?;
    let table = report.to_table();
    write_file(
        &args.out,
        &(report.to_json().map_err(policyloop_core::Error::from)? + "\n"),
    )?;
    write_file(&args.table, &table)?;
    out.write_all(table.as_bytes())
        .map_err(|e| CliError::Io("stdout".into(), e))?;
    if report.succeeded() == 0 {
        return Err(CliError::AllCellsFailed);
    }
    Ok(report)
}

pub fn init_registry(args: &InitArgs, out: &mut dyn Write) -> Result<ExtractionManager, CliError> {
    require_dir(&args.corpus)?;
    if let Some(s) = &args.schema {
        require_file(s)?;
    }
    args.settings.check()?;
    let schema: LabelSchema = match &args.schema {
        Some(path) => load_label_schema(path)?,
        None => rights_schema(),
    };
    let corpus = load_corpus_checked(&args.corpus, &args.corpus_format.options())?;
    let config = RegistryConfig {
        labels: labels(&args.labels),
        kinds: if args.kinds.is_empty() {
            ModelKind::ALL.to_vec()
        } else {
            args.kinds.clone()
        },
        serving_kind: args.serving_kind,
        retrain_all_kinds: args.retrain_all_kinds,
        autotrain_every: args.autotrain_every,
        settings: args.settings.load()?,
        seed: args.seed,
        ..RegistryConfig::default()
    };
    let manager = ExtractionManager::initialize(&args.registry, &corpus, &schema, config)?;
    let extractors = manager.extractors();
    let trained = extractors.iter().filter(|e| e.version.is_some()).count();
    let mut text = format!(
        "trained {trained} of {} extractors in {}\n",
        extractors.len(),
        args.registry.display()
    );
    for e in &extractors {
        let version = e
            .version
            .map(|v| format!("v{v:03}"))
            .unwrap_or_else(|| "untrained".into());
        text.push_str(&format!("  {} / {}: {version}", e.label, e.kind));
        if let Some(n) = &e.notice {
            text.push_str(&format!(" ({n})"));
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Io("stdout".into(), e))?;
    Ok(manager)
}

pub fn service_config(args: &ServeArgs) -> Result<ServiceConfig, CliError> {
    let config = ServiceConfig {
        data_dir: args.data.clone(),
        registry_dir: args.registry.clone(),
        port: args.port,
        autotrain_every: args.autotrain_n,
        role: args.role.parse::<Role>()?,
        extraction_url: args.extraction_url.clone(),
    };
    config.validate()?;
    if config.role != Role::Annotation
        && !config
            .registry_dir
            .join(policyloop_core::manager::REGISTRY_FILE)
            .is_file()
    {
        return Err(CliError::MissingRegistry(config.registry_dir));
    }
    Ok(config)
}

pub fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let config = service_config(args)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io("tokio runtime".into(), e))?;
    runtime.block_on(policyloop_service::serve(config, async {
        let _ = tokio::signal::ctrl_c().await;
    }))?;
    Ok(())
}

pub fn suggest(args: &SuggestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    require_file(&args.policy)?;
    if !args.registry.join(policyloop_core::manager::REGISTRY_FILE).is_file() {
        return Err(CliError::MissingRegistry(args.registry.clone()));
    }
    let raw = std::fs::read_to_string(&args.policy).map_err(|e| CliError::Io(args.policy.clone(), e))?;
    let doc = policyloop_core::parse_policy(&raw)
        .map_err(|e| CliError::ParseFailures(vec![(args.policy.clone(), e.to_string())]))?;
    let manager = ExtractionManager::open(&args.registry)?;
    let wanted = if args.labels.is_empty() {
        manager.labels().to_vec()
    } else {
        labels(&args.labels)
    };
    let prediction = manager.predict(&doc, &wanted, args.k)?;
    let json = serde_json::to_string_pretty(&prediction).map_err(policyloop_core::Error::from)?;
    writeln!(out, "{json}").map_err(|e| CliError::Io("stdout".into(), e))?;
    Ok(())
}

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let docs = synth_corpus(&SynthConfig {
        documents: args.documents,
        blobs_per_document: args.blobs,
        right_probability: args.right_probability,
        seed: args.seed,
    });
    write_corpus(&args.out, &docs)?;
    writeln!(out, "wrote {} policies to {}", docs.len(), args.out.display())
        .map_err(|e| CliError::Io("stdout".into(), e))?;
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest(a) => ingest(a, out).map(|_| ()),
        Command::Benchmark(a) => benchmark(a, out).map(|_| ()),
        Command::InitRegistry(a) => init_registry(a, out).map(|_| ()),
        Command::Serve(a) => serve(a),
        Command::Suggest(a) => suggest(a, out),
        Command::Synth(a) => synth(a, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn benchmark_defaults() {
        let cli = Cli::try_parse_from(["policyloop", "benchmark", "--corpus", "c"]).unwrap();
        let Command::Benchmark(a) = cli.command else { panic!() };
        assert_eq!(a.ks, vec![5, 10, 25]);
        assert_eq!(a.reps, 2);
        assert!(a.kinds.is_empty());
        let cli = Cli::try_parse_from([
            "policyloop",
            "benchmark",
            "--corpus",
            "c",
            "--kinds",
            "gaussian_nb,binary_classifier",
            "--ks",
            "1,3",
        ])
        .unwrap();
        let Command::Benchmark(a) = cli.command else { panic!() };
        assert_eq!(a.kinds, vec![ModelKind::GaussianNb, ModelKind::BinaryClassifier]);
        assert_eq!(a.ks, vec![1, 3]);
        assert!(Cli::try_parse_from(["policyloop", "benchmark", "--corpus", "c", "--kinds", "bert"]).is_err());
        assert!(Cli::try_parse_from([
            "policyloop",
            "benchmark",
            "--corpus",
            "c",
            "--fast",
            "--settings",
            "s.json"
        ])
        .is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::EmptyCorpus("x".into()).exit_code(), EXIT_PARSE);
        assert_eq!(CliError::ParseFailures(vec![]).exit_code(), EXIT_PARSE);
        assert_eq!(CliError::MissingRegistry("x".into()).exit_code(), EXIT_MISSING_REGISTRY);
        assert_eq!(
            CliError::from(ServiceError::MissingRegistry("x".into())).exit_code(),
            EXIT_MISSING_REGISTRY
        );
        assert_eq!(CliError::AllCellsFailed.exit_code(), EXIT_FAILURE);
    }

    #[test]
    fn failures_are_listed() {
        let e = CliError::ParseFailures(vec![("a.json".into(), "bad".into()), ("b.json".into(), "worse".into())]);
        let text = e.to_string();
        assert!(text.contains("a.json: bad") && text.contains("b.json: worse"), "{text}");
    }
}
