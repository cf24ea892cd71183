//! LLM-backed extraction: three independent prompts per resume, tolerant
//! JSON recovery, and index-pointer resolution for long descriptions.

mod backend;
mod prompt;
mod record;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

pub use backend::{
    chat_request_body, first_choice_text, BackendError, CompletionBackend, DecodeConfig, HttpBackend, MockBackend,
};
pub use prompt::{build_prompt, build_prompt_with, prompt_document, EmptyDocument, ExtractionTask, INPUT_HEADER, NO_THINK, TEMPLATE_VERSION};
pub use record::{BasicInfo, EducationEntry, ResumeRecord, WorkEntry};

use crate::doc_model::{slice_lines, IndexedDocument, LineRange};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractError {
    #[error("no JSON object found in model output")]
    NoJsonFound,
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    EmptyDocument(#[from] EmptyDocument),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
}

/// Substring from the first `{` to the last `}`, which must parse as JSON.
pub fn extract_json_block(raw: &str) -> Result<&str, ExtractError> {
    let start = raw.find('{').ok_or(ExtractError::NoJsonFound)?;
    let end = raw.rfind('}').ok_or(ExtractError::NoJsonFound)?;
    if end < start {
        return Err(ExtractError::NoJsonFound);
    }
    let block = &raw[start..=end];
    serde_json::from_str::<Value>(block).map_err(|e| ExtractError::MalformedJson(e.to_string()))?;
    Ok(block)
}

/// Result of one sub-task.
#[derive(Debug, Clone, PartialEq)]
pub enum PartialRecord {
    Basic(Box<BasicInfo>),
    Education(Vec<EducationEntry>),
    Work(Vec<WorkEntry>),
}

impl PartialRecord {
    pub fn empty(task: ExtractionTask) -> Self {
        match task {
            ExtractionTask::BasicInfo => PartialRecord::Basic(Box::default()),
            ExtractionTask::Education => PartialRecord::Education(Vec::new()),
            ExtractionTask::WorkExperience => PartialRecord::Work(Vec::new()),
        }
    }

    pub fn merge_into(self, record: &mut ResumeRecord) {
        match self {
            PartialRecord::Basic(b) => record.basic = *b,
            PartialRecord::Education(e) => record.education = e,
            PartialRecord::Work(w) => record.work = w,
        }
    }
}

fn scalar(v: Option<&Value>) -> String {
    match v {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(Value::Bool(b)) => b.to_string(),
        Some(Value::Array(items)) => items.iter().map(|i| scalar(Some(i))).filter(|s| !s.is_empty()).collect::<Vec<_>>().join(", "),
        _ => String::new(),
    }
}

fn string_list(v: Option<&Value>) -> Vec<String> {
    match v {
        Some(Value::Array(items)) => items.iter().map(|i| scalar(Some(i))).filter(|s| !s.is_empty()).collect(),
        Some(Value::String(s)) if !s.trim().is_empty() => vec![s.clone()],
        _ => Vec::new(),
    }
}

/// A `[start, end]` pair of non-negative integers.
fn as_pointer(v: &Value) -> Option<LineRange> {
    let items = v.as_array()?;
    if items.len() != 2 {
        return None;
    }
    let start = items[0].as_u64()?;
    let end = items[1].as_u64()?;
    Some(LineRange::new(start as usize, end as usize))
}

fn top_level(root: &Value, task: ExtractionTask) -> Result<&Value, ExtractError> {
    let key = task.key();
    let v = root.get(key).ok_or_else(|| ExtractError::SchemaMismatch(format!("missing top-level key `{key}`")))?;
    let kind_ok = match task {
        ExtractionTask::BasicInfo => v.is_object(),
        _ => v.is_array(),
    };
    if !kind_ok {
        return Err(ExtractError::SchemaMismatch(format!("`{key}` has the wrong JSON kind")));
    }
    Ok(v)
}

/// Maps a task's JSON output onto typed fields. Missing keys become empty
/// values and unknown keys are ignored.
pub fn parse_task_output(task: ExtractionTask, json_text: &str) -> Result<PartialRecord, ExtractError> {
    let root: Value = serde_json::from_str(json_text).map_err(|e| ExtractError::MalformedJson(e.to_string()))?;
    let body = top_level(&root, task)?;
    let objects = || body.as_array().into_iter().flatten().filter_map(Value::as_object);
    Ok(match task {
        ExtractionTask::BasicInfo => {
            let o = body.as_object().expect("checked kind");
            let mut basic = BasicInfo {
                desired_location: string_list(o.get("desiredLocation")),
                ..Default::default()
            };
            for (key, _) in BasicInfo::default().scalar_fields() {
                *basic.scalar_field_mut(key).expect("schema key") = scalar(o.get(key));
            }
            PartialRecord::Basic(Box::new(basic))
        }
        ExtractionTask::Education => PartialRecord::Education(
            objects()
                .map(|o| EducationEntry {
                    school: scalar(o.get("school")),
                    major: scalar(o.get("major")),
                    degree: scalar(o.get("degree")),
                    start_date: scalar(o.get("startDate")),
                    end_date: scalar(o.get("endDate")),
                    location: scalar(o.get("location")),
                })
                .collect(),
        ),
        ExtractionTask::WorkExperience => PartialRecord::Work(
            objects()
                .map(|o| {
                    let (description, description_range) = match o.get("description") {
                        Some(v) => match as_pointer(v) {
                            Some(range) => (String::new(), Some(range)),
                            None => (scalar(Some(v)), None),
                        },
                        None => (String::new(), None),
                    };
                    WorkEntry {
                        company: scalar(o.get("company")),
                        position: scalar(o.get("position")),
                        start_date: scalar(o.get("startDate")),
                        end_date: scalar(o.get("endDate")),
                        location: scalar(o.get("location")),
                        description,
                        description_range,
                    }
                })
                .collect(),
        ),
    })
}

/// Model-style JSON output for one task of `record`: the inverse of
/// [`parse_task_output`]. Descriptions with a range are emitted as pointers.
pub fn task_output_json(task: ExtractionTask, record: &ResumeRecord) -> Value {
    match task {
        ExtractionTask::BasicInfo => json!({ "basicInfo": record.basic }),
        ExtractionTask::Education => json!({ "education": record.education }),
        ExtractionTask::WorkExperience => {
            let entries: Vec<Value> = record
                .work
                .iter()
                .map(|w| {
                    let mut o = Map::new();
                    for (k, v) in w.fields() {
                        o.insert(k.to_string(), Value::String(v.to_string()));
                    }
                    if let Some(r) = w.description_range {
                        o.insert("description".into(), json!([r.start, r.end]));
                    }
                    Value::Object(o)
                })
                .collect();
            json!({ "workExperience": entries })
        }
    }
}

/// A pointer that had to be adjusted to fit the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointerWarning {
    pub work_index: usize,
    pub requested: LineRange,
    pub resolved: Option<LineRange>,
    pub message: String,
}

/// Replaces every pointer description with the verbatim source lines.
/// Out-of-bounds ranges are clamped to the document and reported.
pub fn resolve_pointers(mut record: ResumeRecord, doc: &IndexedDocument) -> (ResumeRecord, Vec<PointerWarning>) {
    let mut warnings = Vec::new();
    let len = doc.len();
    for (work_index, entry) in record.work.iter_mut().enumerate() {
        let Some(requested) = entry.description_range else { continue };
        if len == 0 {
            entry.description.clear();
            entry.description_range = None;
            warnings.push(PointerWarning {
                work_index,
                requested,
                resolved: None,
                message: "document is empty; pointer dropped".into(),
            });
            continue;
        }
        let mut notes = Vec::new();
        let (mut start, mut end) = (requested.start, requested.end);
        if start > end {
            std::mem::swap(&mut start, &mut end);
            notes.push("inverted range swapped");
        }
        if end >= len {
            end = len - 1;
            notes.push("end clamped to last line");
        }
        if start > end {
            start = end;
            notes.push("start clamped to last line");
        }
        let resolved = LineRange::new(start, end);
        entry.description = slice_lines(doc, resolved).expect("range clamped to document");
        entry.description_range = Some(resolved);
        if !notes.is_empty() {
            warnings.push(PointerWarning { work_index, requested, resolved: Some(resolved), message: notes.join("; ") });
        }
    }
    (record, warnings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Transport,
    Parse,
}

/// A sub-task that produced nothing usable after all attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task: ExtractionTask,
    pub attempts: u32,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionOutcome {
    pub record: ResumeRecord,
    pub failures: Vec<TaskFailure>,
    pub warnings: Vec<PointerWarning>,
    /// Wall time of each sub-task, in `ExtractionTask::ALL` order.
    #[serde(skip)]
    pub task_latencies: Vec<Duration>,
}

fn run_task(
    task: ExtractionTask,
    prompt: &str,
    backend: &dyn CompletionBackend,
    config: &DecodeConfig,
) -> Result<PartialRecord, TaskFailure> {
    let attempts = config.retries + 1;
    let mut last = (FailureKind::Transport, String::new());
    for _ in 0..attempts {
        match backend.complete(prompt, config) {
            Err(e) => {
                log::debug!("{task:?} attempt failed: {e}");
                last = (FailureKind::Transport, e.to_string());
            }
            Ok(raw) => match extract_json_block(&raw).and_then(|block| parse_task_output(task, block)) {
                Ok(partial) => return Ok(partial),
                Err(e) => last = (FailureKind::Parse, e.to_string()),
            },
        }
    }
    Err(TaskFailure { task, attempts, kind: last.0, message: last.1 })
}

/// Runs the three sub-tasks concurrently against `backend`, merges their
/// outputs and resolves description pointers against `doc`.
///
/// A sub-task whose output cannot be used after `config.retries` retries is
/// replaced by an empty partial and recorded in `failures`. The call only
/// fails when every sub-task failed at the transport level.
pub fn run_extraction(
    doc: &IndexedDocument,
    backend: &dyn CompletionBackend,
    config: &DecodeConfig,
) -> Result<ExtractionOutcome, ExtractError> {
    let prompts = ExtractionTask::ALL
        .map(|task| build_prompt_with(task, doc, config.suppress_reasoning).map(|p| (task, p)));
    let prompts: Vec<(ExtractionTask, String)> = prompts.into_iter().collect::<Result<_, _>>()?;

    let results: Vec<(Result<PartialRecord, TaskFailure>, Duration)> = std::thread::scope(|scope| {
        let handles: Vec<_> = prompts
            .iter()
            .map(|(task, prompt)| {
                scope.spawn(move || {
                    let started = std::time::Instant::now();
                    let r = run_task(*task, prompt, backend, config);
                    (r, started.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("extraction task panicked")).collect()
    });

    let mut record = ResumeRecord::default();
    let mut failures = Vec::new();
    let mut task_latencies = Vec::new();
    for ((task, _), (result, latency)) in prompts.iter().zip(results) {
        task_latencies.push(latency);
        match result {
            Ok(partial) => partial.merge_into(&mut record),
            Err(failure) => {
                PartialRecord::empty(*task).merge_into(&mut record);
                failures.push(failure);
            }
        }
    }
    if failures.len() == ExtractionTask::ALL.len() && failures.iter().all(|f| f.kind == FailureKind::Transport) {
        return Err(ExtractError::BackendUnavailable(
            failures.iter().map(|f| format!("{}: {}", f.task, f.message)).collect::<Vec<_>>().join("; "),
        ));
    }
    let (record, warnings) = resolve_pointers(record, doc);
    Ok(ExtractionOutcome { record, failures, warnings, task_latencies })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE_BASIC_OUTPUT: &str = r#"{
  "basicInfo": {
    "name": "Gu Dabai",
    "phoneNumber": "13987898888",
    "personalEmail": "123245677@123.com",
    "age": "",
    "born": "",
    "gender": "",
    "desiredLocation": [],
    "currentLocation": "",
    "placeOfOrigin": ""
  }
}"#;

    #[test]
    fn json_block_single() {
        assert_eq!(extract_json_block(r#"Sure! {"a":1} Done."#).unwrap(), r#"{"a":1}"#);
    }

    #[test]
    fn json_block_nested_uses_first_and_last_brace() {
        assert_eq!(extract_json_block(r#"{"a":{"b":2}}"#).unwrap(), r#"{"a":{"b":2}}"#);
    }

    #[test]
    fn json_block_errors() {
        assert_eq!(extract_json_block("no braces here"), Err(ExtractError::NoJsonFound));
        assert_eq!(extract_json_block("} backwards {"), Err(ExtractError::NoJsonFound));
        assert!(matches!(extract_json_block("{not json}"), Err(ExtractError::MalformedJson(_))));
    }

    #[test]
    fn parses_reference_basic_info() {
        let PartialRecord::Basic(b) = parse_task_output(ExtractionTask::BasicInfo, SAMPLE_BASIC_OUTPUT).unwrap() else {
            panic!("wrong partial")
        };
        assert_eq!(b.name, "Gu Dabai");
        assert_eq!(b.phone_number, "13987898888");
        assert_eq!(b.personal_email, "123245677@123.com");
        assert_eq!(
            *b,
            BasicInfo {
                name: "Gu Dabai".into(),
                phone_number: "13987898888".into(),
                personal_email: "123245677@123.com".into(),
                ..Default::default()
            }
        );
    }

    #[test]
    fn parses_empty_education() {
        assert_eq!(
            parse_task_output(ExtractionTask::Education, r#"{"education":[]}"#).unwrap(),
            PartialRecord::Education(vec![])
        );
    }

    #[test]
    fn parses_pointer_description() {
        let PartialRecord::Work(w) =
            parse_task_output(ExtractionTask::WorkExperience, r#"{"workExperience":[{"company":"X","description":[15,25]}]}"#)
                .unwrap()
        else {
            panic!()
        };
        assert_eq!(w[0].company, "X");
        assert_eq!(w[0].description_range, Some(LineRange::new(15, 25)));

        let record = ResumeRecord { work: w, ..Default::default() };
        let again = task_output_json(ExtractionTask::WorkExperience, &record).to_string();
        let PartialRecord::Work(w2) = parse_task_output(ExtractionTask::WorkExperience, &again).unwrap() else { panic!() };
        assert_eq!(w2, record.work);
    }

    #[test]
    fn string_description_passes_through() {
        let PartialRecord::Work(w) =
            parse_task_output(ExtractionTask::WorkExperience, r#"{"workExperience":[{"description":"did things","extra":1}]}"#)
                .unwrap()
        else {
            panic!()
        };
        assert_eq!(w[0].description, "did things");
        assert_eq!(w[0].description_range, None);
    }

    #[test]
    fn numbers_become_strings() {
        let PartialRecord::Basic(b) =
            parse_task_output(ExtractionTask::BasicInfo, r#"{"basicInfo":{"age":28,"desiredLocation":"Beijing"}}"#).unwrap()
        else {
            panic!()
        };
        assert_eq!(b.age, "28");
        assert_eq!(b.desired_location, vec!["Beijing"]);
    }

    #[test]
    fn schema_mismatch() {
        assert!(matches!(
            parse_task_output(ExtractionTask::Education, r#"{"workExperience":[]}"#),
            Err(ExtractError::SchemaMismatch(_))
        ));
        assert!(matches!(
            parse_task_output(ExtractionTask::BasicInfo, r#"{"basicInfo":[]}"#),
            Err(ExtractError::SchemaMismatch(_))
        ));
    }

    fn thirty_lines() -> IndexedDocument {
        let texts: Vec<String> = (0..30).map(|i| format!("source line {i}")).collect();
        IndexedDocument::from_texts(&texts).unwrap()
    }

    #[test]
    fn resolves_pointer_verbatim() {
        let doc = thirty_lines();
        let record = ResumeRecord {
            work: vec![WorkEntry { description_range: Some(LineRange::new(15, 25)), ..Default::default() }],
            ..Default::default()
        };
        let (r, warnings) = resolve_pointers(record, &doc);
        assert!(warnings.is_empty());
        assert_eq!(r.work[0].description.lines().count(), 11);
        assert_eq!(r.work[0].description, slice_lines(&doc, LineRange::new(15, 25)).unwrap());
    }

    #[test]
    fn record_without_pointers_is_unchanged() {
        let record = ResumeRecord {
            work: vec![WorkEntry { description: "free text".into(), ..Default::default() }],
            ..Default::default()
        };
        let (r, warnings) = resolve_pointers(record.clone(), &thirty_lines());
        assert_eq!(r, record);
        assert!(warnings.is_empty());
    }

    #[test]
    fn out_of_bounds_pointer_is_clamped() {
        let record = ResumeRecord {
            work: vec![WorkEntry { description_range: Some(LineRange::new(5, 999)), ..Default::default() }],
            ..Default::default()
        };
        let (r, warnings) = resolve_pointers(record, &thirty_lines());
        assert_eq!(warnings.len(), 1);
        assert_eq!(r.work[0].description_range, Some(LineRange::new(5, 29)));
        assert_eq!(r.work[0].description.lines().count(), 25);
    }

    #[test]
    fn pointer_on_empty_document_is_dropped() {
        let record = ResumeRecord {
            work: vec![WorkEntry { description_range: Some(LineRange::new(0, 3)), ..Default::default() }],
            ..Default::default()
        };
        let (r, warnings) = resolve_pointers(record, &IndexedDocument::default());
        assert_eq!(warnings.len(), 1);
        assert_eq!(r.work[0].description_range, None);
    }

    #[test]
    fn extraction_with_mock_backend() {
        let doc = IndexedDocument::from_texts(&["Gu Dabai", "Phone: 13987898888", "Email: 123245677@123.com"]).unwrap();
        let mock = MockBackend::new()
            .with(ExtractionTask::BasicInfo, format!("Here you go:\n{SAMPLE_BASIC_OUTPUT}\n"))
            .with(ExtractionTask::Education, r#"{"education":[]}"#)
            .with(ExtractionTask::WorkExperience, r#"{"workExperience":[]}"#);
        let out = run_extraction(&doc, &mock, &DecodeConfig::default()).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.record.basic.name, "Gu Dabai");
    }

    #[test]
    fn garbage_for_one_task_degrades() {
        let doc = IndexedDocument::from_texts(&["Gu Dabai"]).unwrap();
        let mock = MockBackend::new()
            .with(ExtractionTask::BasicInfo, SAMPLE_BASIC_OUTPUT)
            .with(ExtractionTask::Education, "I could not find anything")
            .with(ExtractionTask::WorkExperience, r#"{"workExperience":[]}"#);
        let out = run_extraction(&doc, &mock, &DecodeConfig::default()).unwrap();
        assert!(out.record.education.is_empty());
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].task, ExtractionTask::Education);
        assert_eq!(out.failures[0].kind, FailureKind::Parse);
        assert_eq!(out.failures[0].attempts, 3);
    }

    #[test]
    fn empty_document_is_rejected() {
        let err = run_extraction(&IndexedDocument::default(), &MockBackend::new(), &DecodeConfig::default());
        assert!(matches!(err, Err(ExtractError::EmptyDocument(_))));
    }
}
