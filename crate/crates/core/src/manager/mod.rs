//! Extractor registry: one model per (label, kind), trained on the seed
//! corpus plus the human feedback log, versioned on disk and served from
//! immutable snapshots that are swapped atomically after each retrain.
//!
//! Layout under the registry root:
//!
//! ```text
//! registry.json          configuration
//! schema.json            label schema
//! seed_corpus.json       seed documents with their annotations
//! documents/<id>.json    documents registered for feedback
//! annotations.ndjson     feedback log
//! <label>/<kind>/v<NNN>/{manifest.json, weights.bin}
//! ```

mod jobs;
mod log;

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex, RwLock, Weak};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{sanitize_file_stem, Annotation, Corpus, Document, LabelId, LabelSchema};
use crate::error::{Error, Result};
use crate::fsutil::{copy_dir, write_json_atomic};
use crate::models::data::{Coverage, TrainingSet};
use crate::models::{load_model, save_model, train_model, ExtractionModel, ModelKind, ModelSettings};
use crate::retrieval::{suggest, SuggestionSet};
use crate::rights::{rights_schema, Right};
use crate::text::{hash_str, mix64};

pub use jobs::{JobId, JobInfo, JobStatus};
pub use log::{FeedbackEntry, FeedbackLog};

pub const REGISTRY_FILE: &str = "registry.json";
pub const SCHEMA_FILE: &str = "schema.json";
pub const SEED_FILE: &str = "seed_corpus.json";
pub const LOG_FILE: &str = "annotations.ndjson";
pub const DOCUMENTS_DIR: &str = "documents";
pub const DEFAULT_AUTOTRAIN_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistryConfig {
    /// Labels that get extractors. Empty at initialisation means the
    /// corpus rights.
    pub labels: Vec<LabelId>,
    pub kinds: Vec<ModelKind>,
    pub serving_kind: ModelKind,
    pub serving_overrides: BTreeMap<LabelId, ModelKind>,
    /// Retrain every configured kind instead of only the serving one.
    pub retrain_all_kinds: bool,
    /// Human annotations per label that trigger a retrain; 0 disables.
    pub autotrain_every: usize,
    pub settings: ModelSettings,
    pub seed: u64,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        RegistryConfig {
            labels: Vec::new(),
            kinds: ModelKind::ALL.to_vec(),
            serving_kind: ModelKind::SentenceEmbedder,
            serving_overrides: BTreeMap::new(),
            retrain_all_kinds: false,
            autotrain_every: DEFAULT_AUTOTRAIN_N,
            settings: ModelSettings::default(),
            seed: 2023,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorStatus {
    Untrained,
    Trained,
    Training,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorInfo {
    pub label: LabelId,
    pub kind: ModelKind,
    pub status: ExtractorStatus,
    pub version: Option<u64>,
    pub serving: bool,
    pub notice: Option<String>,
}

/// Suggestions per label plus notices for labels that could not be served.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sets: BTreeMap<LabelId, SuggestionSet>,
    pub versions: BTreeMap<LabelId, u64>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct OpenOptions {
    pub autotrain_every: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReceipt {
    pub appended: usize,
    pub triggered_jobs: Vec<JobId>,
}

#[derive(Default)]
struct Slot {
    model: RwLock<Option<Arc<ExtractionModel>>>,
    training: AtomicBool,
    notice: Mutex<Option<String>>,
}

impl Slot {
    fn snapshot(&self) -> Option<Arc<ExtractionModel>> {
        self.model.read().expect("slot poisoned").clone()
    }

    fn set_notice(&self, notice: Option<String>) {
        *self.notice.lock().expect("slot poisoned") = notice;
    }
}

struct LogState {
    log: FeedbackLog,
    /// Human annotations per label since the last retrain trigger.
    pending: HashMap<LabelId, usize>,
}

struct Inner {
    root: PathBuf,
    config: RegistryConfig,
    schema: LabelSchema,
    seed_docs: Vec<Document>,
    documents: RwLock<BTreeMap<String, Document>>,
    log: Mutex<LogState>,
    slots: BTreeMap<(LabelId, ModelKind), Slot>,
    jobs: jobs::JobTable,
    queue: Mutex<mpsc::Sender<JobId>>,
    initialized: bool,
}

/// Handle to a registry. Cloning is cheap and shares state.
#[derive(Clone)]
pub struct ExtractionManager {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for ExtractionManager {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtractionManager")
            .field("root", &self.inner.root)
            .field("labels", &self.inner.config.labels)
            .field("kinds", &self.inner.config.kinds)
            .finish()
    }
}

fn version_dir_name(version: u64) -> String {
    format!("v{version:03}")
}

fn parse_version_dir(name: &str) -> Option<u64> {
    name.strip_prefix('v')?.parse().ok()
}

fn kind_dir(root: &Path, label: &LabelId, kind: ModelKind) -> PathBuf {
    root.join(sanitize_file_stem(label.as_str())).join(kind.as_str())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_path_to_error::deserialize(&mut serde_json::Deserializer::from_slice(&raw)).map_err(|e| Error::Parse {
        path: format!("{}: {}", path.display(), e.path()),
        message: e.inner().to_string(),
    })
}

/// Copy of `doc` with its annotations removed; feedback is tracked in the log.
fn strip_annotations(doc: &Document) -> Document {
    let mut d = doc.clone();
    d.blobs.iter_mut().for_each(|b| b.annotations.clear());
    d
}

impl ExtractionManager {
    /// Creates a registry at `root`, persists the seed corpus and schema and
    /// trains one extractor per (label, kind). Failures are isolated: the
    /// affected extractor stays untrained with a notice.
    pub fn initialize(
        root: impl AsRef<Path>,
        corpus: &Corpus,
        schema: &LabelSchema,
        mut config: RegistryConfig,
    ) -> Result<Self> {
        let root = root.as_ref();
        if root.join(REGISTRY_FILE).exists() {
            return Err(Error::Validation(format!(
                "registry already exists at {}",
                root.display()
            )));
        }
        corpus.validate_labels(schema)?;
        if config.labels.is_empty() {
            config.labels = corpus.rights.iter().filter(|r| schema.contains(r)).cloned().collect();
        }
        for l in &config.labels {
            if !schema.contains(l) {
                return Err(Error::Schema(format!("label `{l}` is not in the schema")));
            }
        }
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        write_json_atomic(&root.join(SCHEMA_FILE), schema)?;
        write_json_atomic(&root.join(SEED_FILE), &corpus.documents)?;
        write_json_atomic(&root.join(REGISTRY_FILE), &config)?;
        let manager = Self::open(root)?;
        let pairs: Vec<(LabelId, ModelKind)> = manager.inner.slots.keys().cloned().collect();
        pairs.par_iter().for_each(|(label, kind)| {
            if let Err(e) = manager.inner.train_pair(label, *kind) {
                tracing::warn!(%label, %kind, error = %e, "extractor left untrained");
            }
        });
        Ok(manager)
    }

    /// Opens a registry. A missing or empty directory yields an empty,
    /// uninitialised registry.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        Self::open_with(root, &OpenOptions::default())
    }

    /// [`Self::open`] with in-memory overrides of the stored configuration.
    pub fn open_with(root: impl AsRef<Path>, options: &OpenOptions) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let initialized = root.join(REGISTRY_FILE).exists();
        let (config, schema, seed_docs) = if initialized {
            let config: RegistryConfig = read_json(&root.join(REGISTRY_FILE))?;
            let schema_path = root.join(SCHEMA_FILE);
            let schema = if schema_path.exists() {
                crate::corpus::load_label_schema(&schema_path)?
            } else {
                rights_schema()
            };
            let seed_path = root.join(SEED_FILE);
            let seed: Vec<Document> = if seed_path.exists() {
                read_json(&seed_path)?
            } else {
                Vec::new()
            };
            (config, schema, seed)
        } else {
            (RegistryConfig::default(), rights_schema(), Vec::new())
        };
        let mut config = config;
        if let Some(n) = options.autotrain_every {
            config.autotrain_every = n;
        }

        let mut documents = BTreeMap::new();
        let docs_dir = root.join(DOCUMENTS_DIR);
        if docs_dir.is_dir() {
            for entry in std::fs::read_dir(&docs_dir).map_err(|e| Error::io(&docs_dir, e))? {
                let path = entry.map_err(|e| Error::io(&docs_dir, e))?.path();
                if path.extension().is_some_and(|x| x == "json") {
                    let doc: Document = read_json(&path)?;
                    documents.insert(doc.id.clone(), doc);
                }
            }
        }
        let log = FeedbackLog::open(&root.join(LOG_FILE))?;

        let mut slots = BTreeMap::new();
        for label in &config.labels {
            for kind in &config.kinds {
                let slot = Slot::default();
                if let Some(version) = latest_version(&root, label, *kind)? {
                    let model = load_model(&kind_dir(&root, label, *kind).join(version_dir_name(version)))?;
                    *slot.model.write().expect("fresh lock") = Some(Arc::new(model));
                }
                slots.insert((label.clone(), *kind), slot);
            }
        }

        let (tx, rx) = mpsc::channel();
        let inner = Inner {
            root,
            config,
            schema,
            seed_docs,
            documents: RwLock::new(documents),
            log: Mutex::new(LogState {
                log,
                pending: HashMap::new(),
            }),
            slots,
            jobs: jobs::JobTable::default(),
            queue: Mutex::new(tx),
            initialized,
        };
        inner.recount_pending();
        let inner = Arc::new(inner);
        let weak = Arc::downgrade(&inner);
        std::thread::Builder::new()
            .name("policyloop-train".into())
            .spawn(move || worker(weak, rx))
            .map_err(|e| Error::io("training worker", e))?;
        Ok(ExtractionManager { inner })
    }

    pub fn root(&self) -> &Path {
        &self.inner.root
    }

    pub fn is_initialized(&self) -> bool {
        self.inner.initialized
    }

    pub fn config(&self) -> &RegistryConfig {
        &self.inner.config
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.inner.schema
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.inner.config.labels
    }

    pub fn seed_documents(&self) -> &[Document] {
        &self.inner.seed_docs
    }

    pub fn serving_kind(&self, label: &LabelId) -> ModelKind {
        self.inner.serving_kind(label)
    }

    pub fn extractors(&self) -> Vec<ExtractorInfo> {
        self.inner
            .slots
            .iter()
            .map(|((label, kind), slot)| {
                let model = slot.snapshot();
                let status = if slot.training.load(Ordering::SeqCst) {
                    ExtractorStatus::Training
                } else if model.is_some() {
                    ExtractorStatus::Trained
                } else {
                    ExtractorStatus::Untrained
                };
                ExtractorInfo {
                    label: label.clone(),
                    kind: *kind,
                    status,
                    version: model.map(|m| m.version),
                    serving: self.inner.serving_kind(label) == *kind,
                    notice: slot.notice.lock().expect("slot poisoned").clone(),
                }
            })
            .collect()
    }

    /// The currently served model for `(label, kind)`.
    pub fn snapshot(&self, label: &LabelId, kind: ModelKind) -> Option<Arc<ExtractionModel>> {
        self.inner.slots.get(&(label.clone(), kind)).and_then(Slot::snapshot)
    }

    pub fn serving_snapshot(&self, label: &LabelId) -> Option<Arc<ExtractionModel>> {
        self.snapshot(label, self.inner.serving_kind(label))
    }

    /// Top-`k` suggestions per label from each label's serving model.
    /// Labels without a trained extractor are omitted with a notice.
    pub fn predict(&self, document: &Document, labels: &[LabelId], k: usize) -> Result<Prediction> {
        if k < 1 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        let mut out = Prediction::default();
        for label in labels {
            let Some(model) = self.serving_snapshot(label) else {
                out.notices.push(format!("no trained extractor for `{label}`"));
                continue;
            };
            let set = suggest(document, &model, label, k)?;
            out.versions.insert(label.clone(), model.version);
            out.sets.insert(label.clone(), set);
        }
        Ok(out)
    }

    /// Known document by id: registered documents shadow nothing, since ids
    /// are unique across seed and registered documents.
    pub fn document(&self, id: &str) -> Option<Document> {
        if let Some(d) = self.inner.seed_docs.iter().find(|d| d.id == id) {
            return Some(strip_annotations(d));
        }
        self.inner
            .documents
            .read()
            .expect("documents poisoned")
            .get(id)
            .cloned()
    }

    /// Makes a document available for feedback. Embedded annotations are
    /// dropped; submit them through [`Self::record_feedback`].
    pub fn register_document(&self, doc: &Document) -> Result<()> {
        let stripped = strip_annotations(doc);
        if self.inner.seed_docs.iter().any(|d| d.id == doc.id) {
            return Err(Error::Validation(format!(
                "document `{}` is part of the seed corpus",
                doc.id
            )));
        }
        let mut docs = self.inner.documents.write().expect("documents poisoned");
        if let Some(existing) = docs.get(&doc.id) {
            if existing == &stripped {
                return Ok(());
            }
            return Err(Error::Validation(format!(
                "document `{}` is already registered with different content",
                doc.id
            )));
        }
        let path = self
            .inner
            .root
            .join(DOCUMENTS_DIR)
            .join(format!("{}.json", sanitize_file_stem(&doc.id)));
        write_json_atomic(&path, &stripped)?;
        docs.insert(doc.id.clone(), stripped);
        Ok(())
    }

    /// Validates and appends feedback. Every `autotrain_every` human
    /// annotations for a label enqueue a retrain of that label.
    pub fn record_feedback(&self, entries: &[FeedbackEntry]) -> Result<FeedbackReceipt> {
        self.inner.validate_feedback(entries)?;
        let mut triggered = Vec::new();
        let mut to_enqueue = Vec::new();
        {
            let mut state = self.inner.log.lock().expect("log poisoned");
            state.log.append(entries)?;
            let n = self.inner.config.autotrain_every;
            for e in entries {
                let count = state.pending.entry(e.label.clone()).or_default();
                *count += 1;
                if n > 0 && *count >= n && self.inner.config.labels.contains(&e.label) {
                    *count = 0;
                    to_enqueue.push(e.label.clone());
                }
            }
        }
        for label in to_enqueue {
            triggered.push(self.enqueue_retrain(&label)?);
        }
        Ok(FeedbackReceipt {
            appended: entries.len(),
            triggered_jobs: triggered,
        })
    }

    pub fn feedback(&self) -> Vec<FeedbackEntry> {
        self.inner.log.lock().expect("log poisoned").log.entries().to_vec()
    }

    /// Queues a retrain of `label`. Jobs run one at a time in FIFO order.
    pub fn enqueue_retrain(&self, label: &LabelId) -> Result<JobId> {
        if !self.inner.config.labels.contains(label) {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        let kinds = self.inner.retrain_kinds(label);
        let id = self.inner.jobs.create(label.clone(), kinds);
        self.inner
            .queue
            .lock()
            .expect("queue poisoned")
            .send(id)
            .map_err(|_| Error::Validation("training worker has stopped".into()))?;
        Ok(id)
    }

    /// Appends `delta`, retrains the label and waits for the new serving
    /// version. The served snapshot is unchanged if training fails.
    pub fn retrain(&self, label: &LabelId, delta: &[FeedbackEntry]) -> Result<u64> {
        if delta.is_empty() {
            return Err(Error::Argument("feedback delta is empty".into()));
        }
        if !self.inner.config.labels.contains(label) {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        self.inner.validate_feedback(delta)?;
        {
            let mut state = self.inner.log.lock().expect("log poisoned");
            state.log.append(delta)?;
            state.pending.insert(label.clone(), 0);
        }
        let id = self.enqueue_retrain(label)?;
        let job = self.wait_job(id, Duration::MAX).expect("job exists");
        match (job.status, job.version) {
            (JobStatus::Done, Some(v)) => Ok(v),
            _ => Err(Error::JobFailed {
                job: id,
                label: label.to_string(),
                message: job.error.unwrap_or_else(|| "no version produced".into()),
            }),
        }
    }

    pub fn job(&self, id: JobId) -> Option<JobInfo> {
        self.inner.jobs.get(id)
    }

    pub fn jobs(&self) -> Vec<JobInfo> {
        self.inner.jobs.list()
    }

    pub fn wait_job(&self, id: JobId, timeout: Duration) -> Option<JobInfo> {
        self.inner
            .jobs
            .wait(id, timeout.min(Duration::from_secs(60 * 60 * 24 * 365)))
    }

    /// Training set for `label` from the seed corpus and the first
    /// `log_prefix` feedback records.
    pub fn training_set(&self, label: &LabelId, log_prefix: usize) -> TrainingSet {
        let entries = {
            let state = self.inner.log.lock().expect("log poisoned");
            state.log.entries()[..log_prefix.min(state.log.len())].to_vec()
        };
        self.inner.training_set(label, &entries)
    }

    /// Copies the registry (configuration, corpus, log and every model
    /// version) to `path`.
    pub fn save_registry(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        // Holding the log lock keeps the log and model set consistent.
        let _guard = self.inner.log.lock().expect("log poisoned");
        std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
        write_json_atomic(&path.join(REGISTRY_FILE), &self.inner.config)?;
        write_json_atomic(&path.join(SCHEMA_FILE), &self.inner.schema)?;
        write_json_atomic(&path.join(SEED_FILE), &self.inner.seed_docs)?;
        for entry in std::fs::read_dir(&self.inner.root).map_err(|e| Error::io(&self.inner.root, e))? {
            let entry = entry.map_err(|e| Error::io(&self.inner.root, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.starts_with('.') || [REGISTRY_FILE, SCHEMA_FILE, SEED_FILE].contains(&name.as_str()) {
                continue;
            }
            let src = entry.path();
            if src.is_dir() {
                copy_dir(&src, &path.join(&name))?;
            } else {
                std::fs::copy(&src, path.join(&name)).map_err(|e| Error::io(&src, e))?;
            }
        }
        Ok(())
    }
}

pub fn load_registry(path: impl AsRef<Path>) -> Result<ExtractionManager> {
    ExtractionManager::open(path)
}

fn latest_version(root: &Path, label: &LabelId, kind: ModelKind) -> Result<Option<u64>> {
    let dir = kind_dir(root, label, kind);
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut best = None;
    for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        if let Some(v) = parse_version_dir(&entry.file_name().to_string_lossy()) {
            best = best.max(Some(v));
        }
    }
    Ok(best)
}

fn worker(inner: Weak<Inner>, rx: mpsc::Receiver<JobId>) {
    while let Ok(id) = rx.recv() {
        let Some(inner) = inner.upgrade() else { break };
        inner.run_job(id);
    }
}

impl Inner {
    fn serving_kind(&self, label: &LabelId) -> ModelKind {
        let wanted = self
            .config
            .serving_overrides
            .get(label)
            .copied()
            .unwrap_or(self.config.serving_kind);
        if self.config.kinds.contains(&wanted) {
            wanted
        } else {
            self.config.kinds.first().copied().unwrap_or(wanted)
        }
    }

    fn retrain_kinds(&self, label: &LabelId) -> Vec<ModelKind> {
        if self.config.retrain_all_kinds {
            self.config.kinds.clone()
        } else {
            vec![self.serving_kind(label)]
        }
    }

    /// Rebuilds the per-label counters from log records newer than the
    /// serving model.
    fn recount_pending(&self) {
        let mut state = self.log.lock().expect("log poisoned");
        let every = self.config.autotrain_every.max(1);
        let mut pending = HashMap::new();
        for label in &self.config.labels {
            let seen = self
                .slots
                .get(&(label.clone(), self.serving_kind(label)))
                .and_then(Slot::snapshot)
                .map(|m| m.info.delta_count)
                .unwrap_or(0);
            let n = state
                .log
                .entries()
                .iter()
                .skip(seen)
                .filter(|e| &e.label == label)
                .count();
            pending.insert(label.clone(), n % every);
        }
        state.pending = pending;
    }

    fn validate_feedback(&self, entries: &[FeedbackEntry]) -> Result<()> {
        let docs = self.documents.read().expect("documents poisoned");
        for e in entries {
            if !self.schema.contains(&e.label) {
                return Err(Error::Validation(format!("label `{}` is not in the schema", e.label)));
            }
            let blobs = self
                .seed_docs
                .iter()
                .find(|d| d.id == e.document_id)
                .or_else(|| docs.get(&e.document_id))
                .map(|d| d.blobs.len())
                .ok_or_else(|| Error::Validation(format!("unknown document `{}`", e.document_id)))?;
            if e.blob_index >= blobs {
                return Err(Error::Validation(format!(
                    "blob {} out of range for document `{}` with {blobs} blobs",
                    e.blob_index, e.document_id
                )));
            }
        }
        Ok(())
    }

    fn anchor_text(&self, label: &LabelId, language: &str) -> String {
        if let Some(r) = Right::from_id(label.as_str()) {
            return r.anchor_text(language);
        }
        match self.schema.find(label) {
            Some(n) if !n.description.trim().is_empty() => n.description.clone(),
            Some(n) => n.name.clone(),
            None => label.to_string(),
        }
    }

    fn training_set(&self, label: &LabelId, entries: &[FeedbackEntry]) -> TrainingSet {
        let mut overlay: HashMap<&str, Vec<&FeedbackEntry>> = HashMap::new();
        for e in entries.iter().filter(|e| &e.label == label) {
            overlay.entry(e.document_id.as_str()).or_default().push(e);
        }
        let apply = |doc: &Document| -> Document {
            let mut d = doc.clone();
            for e in overlay.get(doc.id.as_str()).into_iter().flatten() {
                if let Some(b) = d.blobs.get_mut(e.blob_index) {
                    let mut a = Annotation::human(e.label.clone(), e.value);
                    a.created_at = e.timestamp;
                    b.annotate(a);
                }
            }
            d
        };
        let docs = self.documents.read().expect("documents poisoned");
        let mut all: Vec<(Cow<'_, Document>, Coverage)> = Vec::new();
        for d in &self.seed_docs {
            let doc = if overlay.contains_key(d.id.as_str()) {
                Cow::Owned(apply(d))
            } else {
                Cow::Borrowed(d)
            };
            all.push((doc, Coverage::Full));
        }
        for d in docs.values() {
            if overlay.contains_key(d.id.as_str()) {
                all.push((Cow::Owned(apply(d)), Coverage::Partial));
            }
        }
        TrainingSet::from_documents(label, all.iter().map(|(d, c)| (d.as_ref(), *c)))
    }

    fn next_version(&self, label: &LabelId, kind: ModelKind) -> Result<u64> {
        let on_disk = latest_version(&self.root, label, kind)?.unwrap_or(0);
        let served = self
            .slots
            .get(&(label.clone(), kind))
            .and_then(Slot::snapshot)
            .map(|m| m.version)
            .unwrap_or(0);
        Ok(on_disk.max(served) + 1)
    }

    /// Trains, persists and swaps in a new version of one extractor.
    fn train_pair(&self, label: &LabelId, kind: ModelKind) -> Result<u64> {
        let slot = self
            .slots
            .get(&(label.clone(), kind))
            .ok_or_else(|| Error::UnknownLabel(format!("{label}/{kind}")))?;
        slot.training.store(true, Ordering::SeqCst);
        let result = self.train_pair_inner(label, kind, slot);
        slot.training.store(false, Ordering::SeqCst);
        match &result {
            Ok(_) => slot.set_notice(None),
            Err(e) => slot.set_notice(Some(e.to_string())),
        }
        result
    }

    fn train_pair_inner(&self, label: &LabelId, kind: ModelKind, slot: &Slot) -> Result<u64> {
        let (entries, fingerprint) = {
            let state = self.log.lock().expect("log poisoned");
            let entries = state.log.entries().to_vec();
            let fp = state.log.fingerprint(entries.len());
            (entries, fp)
        };
        let set = self.training_set(label, &entries);
        let version = self.next_version(label, kind)?;
        let seed = mix64(self.config.seed ^ hash_str(label.as_str(), kind as u64) ^ version.wrapping_mul(0x9e37_79b9));
        let anchor = self.anchor_text(label, &set.language);
        let mut model = train_model(kind, &set, &self.config.settings, &anchor, seed)?;
        model.version = version;
        model.info.delta_count = entries.len();
        model.info.delta_fingerprint = Some(fingerprint);

        let kind_dir = kind_dir(&self.root, label, kind);
        let tmp = kind_dir.join(format!(".tmp-{}-{}", version_dir_name(version), std::process::id()));
        if tmp.exists() {
            std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        }
        save_model(&tmp, &model)?;
        let final_dir = kind_dir.join(version_dir_name(version));
        std::fs::rename(&tmp, &final_dir).map_err(|e| Error::io(&final_dir, e))?;
        *slot.model.write().expect("slot poisoned") = Some(Arc::new(model));
        tracing::info!(%label, %kind, version, examples = set.len(), "extractor trained");
        Ok(version)
    }

    fn run_job(&self, id: JobId) {
        let Some(job) = self.jobs.get(id) else { return };
        self.jobs.update(id, |j| {
            j.status = JobStatus::Running;
            j.started_at = Some(chrono::Utc::now());
        });
        let serving = self.serving_kind(&job.label);
        let mut versions = BTreeMap::new();
        let mut errors = Vec::new();
        for kind in &job.kinds {
            match self.train_pair(&job.label, *kind) {
                Ok(v) => {
                    versions.insert(*kind, v);
                }
                Err(e) => {
                    tracing::warn!(job = id, label = %job.label, %kind, error = %e, "retrain failed");
                    errors.push(format!("{kind}: {e}"));
                }
            }
        }
        self.jobs.update(id, |j| {
            j.version = versions
                .get(&serving)
                .copied()
                .or_else(|| versions.values().next().copied());
            j.versions = versions;
            j.status = if errors.is_empty() {
                JobStatus::Done
            } else {
                JobStatus::Failed
            };
            j.error = (!errors.is_empty()).then(|| errors.join("; "));
            j.finished_at = Some(chrono::Utc::now());
        });
    }
}
