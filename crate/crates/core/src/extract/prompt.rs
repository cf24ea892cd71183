//! Task prompts. Templates live in `prompts/<version>/` and are embedded at
//! build time.

use serde::{Deserialize, Serialize};

use crate::doc_model::{render_indexed, IndexedDocument};

pub const TEMPLATE_VERSION: &str = "v1";

const PREAMBLE: &str = include_str!("../../prompts/v1/preamble.txt");
const BASIC_INFO: &str = include_str!("../../prompts/v1/basic_info.txt");
const EDUCATION: &str = include_str!("../../prompts/v1/education.txt");
const WORK_EXPERIENCE: &str = include_str!("../../prompts/v1/work_experience.txt");

/// Marker emitted before the indexed text when reasoning is suppressed.
pub const NO_THINK: &str = "/no_think";
/// Header separating the instructions from the indexed resume text.
pub const INPUT_HEADER: &str = "Input (Indexed Resume Text):";

/// One independent extraction sub-task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExtractionTask {
    #[serde(rename = "basicInfo")]
    BasicInfo,
    #[serde(rename = "education")]
    Education,
    #[serde(rename = "workExperience")]
    WorkExperience,
}

impl ExtractionTask {
    pub const ALL: [ExtractionTask; 3] =
        [ExtractionTask::BasicInfo, ExtractionTask::Education, ExtractionTask::WorkExperience];

    /// Top-level key of the task's JSON output.
    pub fn key(self) -> &'static str {
        match self {
            ExtractionTask::BasicInfo => "basicInfo",
            ExtractionTask::Education => "education",
            ExtractionTask::WorkExperience => "workExperience",
        }
    }

    pub fn template(self) -> &'static str {
        match self {
            ExtractionTask::BasicInfo => BASIC_INFO,
            ExtractionTask::Education => EDUCATION,
            ExtractionTask::WorkExperience => WORK_EXPERIENCE,
        }
    }

    /// Recognizes which task a prompt built by [`build_prompt`] belongs to
    /// by looking at the schema section only.
    pub fn from_prompt(prompt: &str) -> Option<ExtractionTask> {
        let head = prompt.split(INPUT_HEADER).next().unwrap_or(prompt);
        ExtractionTask::ALL.into_iter().find(|t| {
            let opener = if *t == ExtractionTask::BasicInfo { '{' } else { '[' };
            head.contains(&format!("\"{}\": {opener}", t.key()))
        })
    }
}

impl std::fmt::Display for ExtractionTask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, thiserror::Error, Clone, Copy, PartialEq, Eq)]
#[error("cannot build a prompt for an empty document")]
pub struct EmptyDocument;

pub fn build_prompt(task: ExtractionTask, doc: &IndexedDocument) -> Result<String, EmptyDocument> {
    build_prompt_with(task, doc, false)
}

pub fn build_prompt_with(task: ExtractionTask, doc: &IndexedDocument, suppress_reasoning: bool) -> Result<String, EmptyDocument> {
    if doc.is_empty() {
        return Err(EmptyDocument);
    }
    let mut prompt = String::new();
    prompt.push_str(PREAMBLE.trim_end());
    prompt.push_str("\n\n");
    prompt.push_str(task.template().trim_end());
    prompt.push_str("\n\n");
    if suppress_reasoning {
        prompt.push_str(NO_THINK);
        prompt.push_str("\n\n");
    }
    prompt.push_str(INPUT_HEADER);
    prompt.push('\n');
    prompt.push_str(&render_indexed(doc));
    Ok(prompt)
}

/// The indexed-text part of a prompt built by [`build_prompt`].
pub fn prompt_document(prompt: &str) -> Option<&str> {
    prompt.split_once(&format!("{INPUT_HEADER}\n")).map(|(_, rest)| rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc() -> IndexedDocument {
        IndexedDocument::from_texts(&["Gu Dabai", "Phone: 13987898888"]).unwrap()
    }

    #[test]
    fn basic_info_prompt_lists_schema_keys() {
        let p = build_prompt(ExtractionTask::BasicInfo, &doc()).unwrap();
        for key in ["personalEmail", "phoneNumber", "desiredLocation"] {
            assert!(p.contains(key), "{key}");
        }
    }

    #[test]
    fn education_prompt_lists_schema_keys() {
        let p = build_prompt(ExtractionTask::Education, &doc()).unwrap();
        for key in ["school", "major", "degree", "startDate", "endDate"] {
            assert!(p.contains(key), "{key}");
        }
    }

    #[test]
    fn work_prompt_requests_line_range() {
        let p = build_prompt(ExtractionTask::WorkExperience, &doc()).unwrap();
        assert!(p.contains("\"description\": [0, 0]"));
        assert!(p.contains("[start, end]"));
    }

    #[test]
    fn prompts_embed_rendered_document() {
        for task in ExtractionTask::ALL {
            let p = build_prompt(task, &doc()).unwrap();
            assert!(p.contains("[0]: Gu Dabai\n[1]: Phone: 13987898888"));
            assert_eq!(prompt_document(&p), Some("[0]: Gu Dabai\n[1]: Phone: 13987898888"));
            assert_eq!(ExtractionTask::from_prompt(&p), Some(task));
            assert!(!p.contains(NO_THINK));
        }
    }

    #[test]
    fn no_think_marker_is_optional() {
        let p = build_prompt_with(ExtractionTask::BasicInfo, &doc(), true).unwrap();
        assert!(p.contains("/no_think\n\nInput (Indexed Resume Text):"));
    }

    #[test]
    fn empty_document_has_no_prompt() {
        assert_eq!(build_prompt(ExtractionTask::Education, &IndexedDocument::default()), Err(EmptyDocument));
    }

    #[test]
    fn resume_text_does_not_confuse_task_detection() {
        let d = IndexedDocument::from_texts(&["\"education\": [ trick"]).unwrap();
        let p = build_prompt(ExtractionTask::BasicInfo, &d).unwrap();
        assert_eq!(ExtractionTask::from_prompt(&p), Some(ExtractionTask::BasicInfo));
    }
}
