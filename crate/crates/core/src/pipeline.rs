//! Corpus-level orchestration: fuse, linearize, extract, refine, evaluate.
//!
//! Resumes run on a bounded worker pool. A failing resume is recorded in
//! the [`RunManifest`] and never stops the batch; only configuration
//! problems are fatal.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::doc_model::{IndexedDocument, TextPrimitive};
use crate::eval::{Accumulator, EvalConfig, Evaluator, MetricsReport};
use crate::extract::{run_extraction, CompletionBackend, DecodeConfig, HttpBackend, MockBackend, ResumeRecord};
use crate::ingest::{fuse_content, read_primitives_jsonl, PageGeometry, DEFAULT_OVERLAP_THRESHOLD};
use crate::layout::{linearize, ExternalDetector, GeometricCutDetector, LayoutParams, NaiveSortDetector, SegmentDetector};
use crate::refine::{AuditEntry, RefineConfig, Refiner};
use crate::synth::OracleBackend;

pub const ENV_PREFIX: &str = "RF_";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    #[default]
    Geometric,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub url: Option<String>,
    pub timeout_secs: f64,
    pub geometric: GeometricCutDetector,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { kind: DetectorKind::Geometric, url: None, timeout_secs: 10.0, geometric: GeometricCutDetector::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Http,
    Mock,
    /// Answers from each input's `oracle.json`.
    Oracle,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Shared mock table; without it each input's `mock.json` is used.
    pub mock_file: Option<PathBuf>,
    /// Environment variable holding a bearer token for the HTTP backend.
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Directory with one sub-directory per resume.
    pub inputs: PathBuf,
    pub output: PathBuf,
    pub worker_count: usize,
    /// Sort each page as a single block instead of detecting segments.
    pub no_layout: bool,
    pub overlap_threshold: f64,
    pub detector: DetectorConfig,
    pub layout: LayoutParams,
    pub backend: BackendConfig,
    pub decode: DecodeConfig,
    pub refine: RefineConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inputs: PathBuf::from("inputs"),
            output: PathBuf::from("out"),
            worker_count: 4,
            no_layout: false,
            overlap_threshold: DEFAULT_OVERLAP_THRESHOLD,
            detector: DetectorConfig::default(),
            layout: LayoutParams::default(),
            backend: BackendConfig::default(),
            decode: DecodeConfig::default(),
            refine: RefineConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Parses an override value as a TOML scalar, falling back to a string.
fn env_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .and_then(|v| serde_json::to_value(v).ok())
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies `RF_SECTION__KEY=value` overrides. `__` separates nesting levels.
pub fn apply_env_overrides(
    mut config: Value,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<Value, PipelineError> {
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_lowercase).collect();
        if path.iter().any(String::is_empty) {
            return Err(PipelineError::Config(format!("malformed override {key}")));
        }
        let mut node = &mut config;
        for segment in &path[..path.len() - 1] {
            let obj = node.as_object_mut().ok_or_else(|| PipelineError::Config(format!("{key}: not a table")))?;
            node = obj.entry(segment.clone()).or_insert_with(|| Value::Object(Default::default()));
        }
        let obj = node.as_object_mut().ok_or_else(|| PipelineError::Config(format!("{key}: not a table")))?;
        obj.insert(path[path.len() - 1].clone(), env_value(&raw));
    }
    Ok(config)
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        Self::from_toml_with_env(text, std::iter::empty())
    }

    pub fn from_toml_with_env(
        text: &str,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, PipelineError> {
        let table: toml::Table = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        let value = serde_json::to_value(table).map_err(|e| PipelineError::Config(e.to_string()))?;
        let value = apply_env_overrides(value, vars)?;
        let config: PipelineConfig = serde_json::from_value(value).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` (if any) and applies overrides from the process
    /// environment.
    pub fn load(path: Option<&Path>) -> Result<Self, PipelineError> {
        let text = match path {
            Some(p) => fs::read_to_string(p).map_err(|e| PipelineError::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.worker_count == 0 {
            return bad("worker_count must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.overlap_threshold) {
            return bad(format!("overlap_threshold {} outside [0, 1]", self.overlap_threshold));
        }
        if self.detector.kind == DetectorKind::External && self.detector.url.is_none() {
            return bad("external detector needs detector.url".into());
        }
        self.decode.validate().map_err(PipelineError::Config)?;
        self.refine.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Evaluator::new(self.eval.clone()).map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// Checks that files the run depends on exist.
    pub fn check_paths(&self) -> Result<(), PipelineError> {
        if !self.inputs.is_dir() {
            return Err(PipelineError::Config(format!("inputs directory {} not found", self.inputs.display())));
        }
        if let Some(m) = &self.backend.mock_file {
            if !m.is_file() {
                return Err(PipelineError::Config(format!("mock file {} not found", m.display())));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn build_detector(&self) -> Box<dyn SegmentDetector> {
        if self.no_layout {
            return Box::new(NaiveSortDetector);
        }
        match self.detector.kind {
            DetectorKind::Geometric => Box::new(self.detector.geometric),
            DetectorKind::External => Box::new(ExternalDetector::new(
                self.detector.url.clone().unwrap_or_default(),
                Duration::from_secs_f64(self.detector.timeout_secs),
            )),
        }
    }
}

/// One resume's input directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputCase {
    pub id: String,
    pub dir: PathBuf,
}

/// Sub-directories of `root` holding `metadata.jsonl` or `fused.jsonl`,
/// sorted by name.
pub fn discover_inputs(root: &Path) -> Result<Vec<InputCase>, PipelineError> {
    let mut cases = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| PipelineError::io(root, e))? {
        let entry = entry.map_err(|e| PipelineError::io(root, e))?;
        let dir = entry.path();
        if dir.is_dir() && (dir.join("metadata.jsonl").is_file() || dir.join("fused.jsonl").is_file()) {
            cases.push(InputCase { id: entry.file_name().to_string_lossy().into_owned(), dir });
        }
    }
    cases.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(cases)
}

fn read_jsonl(path: &Path) -> Result<Vec<TextPrimitive>, String> {
    let f = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    read_primitives_jsonl(BufReader::new(f)).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Page geometry for `primitives`: the given list, or A4 for every page
/// that carries content.
pub fn pages_or_default(pages: Option<Vec<PageGeometry>>, primitives: &[TextPrimitive]) -> Vec<PageGeometry> {
    pages.unwrap_or_else(|| {
        let mut ids: Vec<usize> = primitives.iter().map(|p| p.page).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().map(PageGeometry::a4).collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResumeStatus {
    Ok,
    /// Some extraction sub-tasks failed; the record is incomplete.
    Partial,
    Failed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub ingest_ms: f64,
    pub layout_ms: f64,
    pub extract_ms: f64,
    pub refine_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub status: ResumeStatus,
    pub timings: StageTimings,
    pub failures: Vec<String>,
    pub audit_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub worker_count: usize,
    pub wall_ms: f64,
    pub entries: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn failed(&self) -> usize {
        self.entries.iter().filter(|e| e.status == ResumeStatus::Failed).count()
    }

    /// 0 when no resume failed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        i32::from(self.failed() > 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResumeOutput {
    pub id: String,
    pub document: Option<IndexedDocument>,
    pub record: Option<ResumeRecord>,
    pub audit: Vec<AuditEntry>,
    pub truth: Option<ResumeRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub resumes: Vec<ResumeOutput>,
    pub report: Option<MetricsReport>,
}

/// Creates the completion backend for one input.
pub type BackendFactory<'a> = dyn Fn(&InputCase) -> Result<Arc<dyn CompletionBackend>, String> + Sync + 'a;

/// The backend selection described by `config.backend`.
pub fn default_backend_factory(config: &PipelineConfig) -> Result<Box<BackendFactory<'static>>, PipelineError> {
    let decode = &config.decode;
    Ok(match config.backend.kind {
        BackendKind::Http => {
            let mut http = HttpBackend::new(decode.timeout());
            if let Some(var) = &config.backend.api_key_env {
                let key = std::env::var(var).map_err(|_| PipelineError::Config(format!("{var} is not set")))?;
                http = http.with_api_key(key);
            }
            let shared: Arc<dyn CompletionBackend> = Arc::new(http);
            Box::new(move |_| Ok(shared.clone()))
        }
        BackendKind::Mock => match &config.backend.mock_file {
            Some(path) => {
                let shared: Arc<dyn CompletionBackend> =
                    Arc::new(MockBackend::from_file(path).map_err(|e| PipelineError::Config(e.to_string()))?);
                Box::new(move |_| Ok(shared.clone()))
            }
            None => Box::new(|case: &InputCase| {
                let b = MockBackend::from_file(&case.dir.join("mock.json")).map_err(|e| e.to_string())?;
                Ok(Arc::new(b) as Arc<dyn CompletionBackend>)
            }),
        },
        BackendKind::Oracle => Box::new(|case: &InputCase| {
            let surface: ResumeRecord = read_json(&case.dir.join("oracle.json"))?;
            Ok(Arc::new(OracleBackend::new(surface)) as Arc<dyn CompletionBackend>)
        }),
    })
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

struct Stages<'a> {
    config: &'a PipelineConfig,
    detector: &'a dyn SegmentDetector,
    refiner: &'a Refiner,
    backends: &'a BackendFactory<'a>,
}

impl Stages<'_> {
    fn run(&self, case: &InputCase) -> (ManifestEntry, ResumeOutput) {
        let started = Instant::now();
        let mut timings = StageTimings::default();
        let mut failures = Vec::new();
        let truth = case.dir.join("truth.json");
        let truth = truth.is_file().then(|| read_json::<ResumeRecord>(&truth)).transpose();
        let mut output = ResumeOutput { id: case.id.clone(), document: None, record: None, audit: Vec::new(), truth: None };
        let status = match truth {
            Err(e) => {
                failures.push(format!("truth: {e}"));
                ResumeStatus::Failed
            }
            Ok(t) => {
                output.truth = t;
                self.process(case, &mut timings, &mut failures, &mut output)
            }
        };
        timings.total_ms = ms(started.elapsed());
        if status != ResumeStatus::Ok {
            log::warn!("{}: {:?}: {}", case.id, status, failures.join("; "));
        }
        let entry = ManifestEntry { id: case.id.clone(), status, timings, failures, audit_entries: output.audit.len() };
        (entry, output)
    }

    fn process(
        &self,
        case: &InputCase,
        timings: &mut StageTimings,
        failures: &mut Vec<String>,
        output: &mut ResumeOutput,
    ) -> ResumeStatus {
        let mut fail = |stage: &str, msg: String| {
            failures.push(format!("{stage}: {msg}"));
            ResumeStatus::Failed
        };

        let t = Instant::now();
        let loaded = (|| -> Result<(Vec<PageGeometry>, Vec<TextPrimitive>), String> {
            let meta = case.dir.join("metadata.jsonl");
            let primitives = if meta.is_file() {
                let ocr = case.dir.join("ocr.jsonl");
                let ocr = if ocr.is_file() { read_jsonl(&ocr)? } else { Vec::new() };
                fuse_content(&read_jsonl(&meta)?, &ocr, self.config.overlap_threshold)
            } else {
                read_jsonl(&case.dir.join("fused.jsonl"))?
            };
            let pages_path = case.dir.join("pages.json");
            let pages = pages_path.is_file().then(|| read_json(&pages_path)).transpose()?;
            Ok((pages_or_default(pages, &primitives), primitives))
        })();
        timings.ingest_ms = ms(t.elapsed());
        let (pages, primitives) = match loaded {
            Ok(v) => v,
            Err(e) => return fail("ingest", e),
        };

        let t = Instant::now();
        let doc = linearize(&pages, &primitives, self.detector, self.config.layout);
        timings.layout_ms = ms(t.elapsed());
        let doc = match doc {
            Ok(d) => d,
            Err(e) => return fail("layout", e.to_string()),
        };

        let t = Instant::now();
        let outcome = (self.backends)(case).and_then(|b| run_extraction(&doc, b.as_ref(), &self.config.decode).map_err(|e| e.to_string()));
        timings.extract_ms = ms(t.elapsed());
        output.document = Some(doc);
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => return fail("extract", e),
        };
        let partial = !outcome.failures.is_empty();
        for f in &outcome.failures {
            failures.push(format!("extract {:?}: {}", f.task, f.message));
        }

        let t = Instant::now();
        let refined = self.refiner.refine(outcome.record, output.document.as_ref().expect("set above"));
        timings.refine_ms = ms(t.elapsed());
        output.record = Some(refined.record);
        output.audit = refined.audit;
        if partial {
            ResumeStatus::Partial
        } else {
            ResumeStatus::Ok
        }
    }
}

/// Runs every case with backends from `backends`. Results keep the order
/// of `cases` regardless of completion order.
pub fn run_cases(
    config: &PipelineConfig,
    cases: &[InputCase],
    backends: &BackendFactory<'_>,
) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    let refiner = Refiner::new(config.refine.clone()).map_err(|e| PipelineError::Config(e.to_string()))?;
    let evaluator = Evaluator::new(config.eval.clone()).map_err(|e| PipelineError::Config(e.to_string()))?;
    let detector = config.build_detector();
    let stages = Stages { config, detector: detector.as_ref(), refiner: &refiner, backends };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let started = Instant::now();
    let results: Vec<(ManifestEntry, ResumeOutput)> = pool.install(|| cases.par_iter().map(|c| stages.run(c)).collect());
    let wall_ms = ms(started.elapsed());

    let mut acc = Accumulator::default();
    let mut any_truth = false;
    for (_, out) in &results {
        if let Some(gt) = &out.truth {
            any_truth = true;
            let pred = out.record.clone().unwrap_or_default();
            acc.add_resume(&evaluator.evaluate_resume(gt, &pred));
        }
    }
    let (entries, resumes) = results.into_iter().unzip();
    Ok(RunOutput {
        manifest: RunManifest { config_hash: config.hash(), worker_count: config.worker_count, wall_ms, entries },
        resumes,
        report: any_truth.then(|| acc.report()),
    })
}

/// Discovers inputs under `config.inputs`, runs them with the configured
/// backend and writes results under `config.output`.
pub fn run_e2e(config: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    config.validate()?;
    config.check_paths()?;
    let cases = discover_inputs(&config.inputs)?;
    let factory = default_backend_factory(config)?;
    let out = run_cases(config, &cases, factory.as_ref())?;
    write_outputs(&out, &config.output)?;
    Ok(out)
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

/// Writes `<id>/record.json`, `<id>/indexed.json`, `<id>/audit.json`,
/// `manifest.json` and, when ground truth was present, `report.json`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    for r in &out.resumes {
        let sub = dir.join(&r.id);
        fs::create_dir_all(&sub).map_err(|e| PipelineError::io(&sub, e))?;
        if let Some(doc) = &r.document {
            write_pretty(&sub.join("indexed.json"), doc)?;
        }
        if let Some(rec) = &r.record {
            write_pretty(&sub.join("record.json"), rec)?;
            write_pretty(&sub.join("audit.json"), &r.audit)?;
        }
    }
    write_pretty(&dir.join("manifest.json"), &out.manifest)?;
    if let Some(report) = &out.report {
        write_pretty(&dir.join("report.json"), report)?;
    }
    Ok(())
}
