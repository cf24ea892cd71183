//! Post-processing of extracted records.
//!
//! Four stages run in order: grounded re-extraction of pointer
//! descriptions, normalization of dates and organization names, span-based
//! de-duplication, and source text verification. Every mutation or drop is
//! written to an audit log.

use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc_model::IndexedDocument;
use crate::extract::{resolve_pointers, ResumeRecord};
use crate::text::{collapse_whitespace, normalize};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("invalid refine config: {0}")]
    InvalidConfig(String),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NormalizedDate {
    YearMonth { year: u16, month: u8 },
    YearOnly { year: u16 },
    Present,
    Empty,
    Unparsed { raw: String },
}

impl NormalizedDate {
    /// Canonical text form: `YYYY-MM`, `YYYY`, `present`, empty, or the raw
    /// input for unparsed values.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    pub fn year(&self) -> Option<u16> {
        match self {
            NormalizedDate::YearMonth { year, .. } | NormalizedDate::YearOnly { year } => Some(*year),
            _ => None,
        }
    }
}

impl fmt::Display for NormalizedDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizedDate::YearMonth { year, month } => write!(f, "{year:04}-{month:02}"),
            NormalizedDate::YearOnly { year } => write!(f, "{year:04}"),
            NormalizedDate::Present => f.write_str("present"),
            NormalizedDate::Empty => Ok(()),
            NormalizedDate::Unparsed { raw } => f.write_str(raw),
        }
    }
}

/// Refinement settings. Serializable to TOML or JSON; omitted keys take the
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    pub org_suffixes: Vec<String>,
    pub present_tokens: Vec<String>,
    pub dedup_overlap: f64,
    /// Regular expressions tried in order; each needs a `year` group and
    /// may carry a `month` group.
    pub date_patterns: Vec<String>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        RefineConfig {
            org_suffixes: s(&[
                "Co., Ltd.", "Co.,Ltd.", "Co. Ltd.", "Co., Ltd", "Ltd.", "Ltd", "Inc.", "Inc", "LLC", "Corp.",
                "Co.", "股份有限公司", "有限责任公司", "有限公司",
            ]),
            present_tokens: s(&["present", "now", "至今", "current"]),
            dedup_overlap: 0.5,
            date_patterns: s(&[
                r"^(?P<year>\d{4})-(?P<month>\d{1,2})$",
                r"^(?P<year>\d{4})\.(?P<month>\d{1,2})$",
                r"^(?P<year>\d{4})/(?P<month>\d{1,2})$",
                r"^(?P<year>\d{4})年(?P<month>\d{1,2})月$",
                r"^(?P<year>\d{4})$",
            ]),
        }
    }
}

impl RefineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, RefineError> {
        let c: RefineConfig = toml::from_str(text).map_err(|e| RefineError::InvalidConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(text: &str) -> Result<Self, RefineError> {
        let c: RefineConfig = serde_json::from_str(text).map_err(|e| RefineError::InvalidConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self, RefineError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn validate(&self) -> Result<(), RefineError> {
        if self.org_suffixes.is_empty() || self.present_tokens.is_empty() || self.date_patterns.is_empty() {
            return Err(RefineError::InvalidConfig("suffix, present-token and date-pattern lists must be non-empty".into()));
        }
        if !(0.0..=1.0).contains(&self.dedup_overlap) {
            return Err(RefineError::InvalidConfig(format!("dedup_overlap {} outside [0, 1]", self.dedup_overlap)));
        }
        self.compiled_patterns()?;
        Ok(())
    }

    fn compiled_patterns(&self) -> Result<Vec<Regex>, RefineError> {
        self.date_patterns
            .iter()
            .map(|p| {
                let re = Regex::new(p).map_err(|e| RefineError::InvalidConfig(e.to_string()))?;
                if !re.capture_names().any(|n| n == Some("year")) {
                    return Err(RefineError::InvalidConfig(format!("date pattern `{p}` has no `year` group")));
                }
                Ok(re)
            })
            .collect()
    }
}

/// Pre-compiled form of a [`RefineConfig`].
pub struct Refiner {
    config: RefineConfig,
    patterns: Vec<Regex>,
    suffixes: Vec<String>,
}

impl Refiner {
    pub fn new(config: RefineConfig) -> Result<Self, RefineError> {
        config.validate()?;
        let patterns = config.compiled_patterns()?;
        let mut suffixes = config.org_suffixes.clone();
        // Longest first so "Co., Ltd." wins over "Ltd.".
        suffixes.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
        Ok(Refiner { config, patterns, suffixes })
    }

    pub fn config(&self) -> &RefineConfig {
        &self.config
    }

    pub fn normalize_date(&self, raw: &str) -> NormalizedDate {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return NormalizedDate::Empty;
        }
        let lowered = trimmed.to_lowercase();
        if self.config.present_tokens.iter().any(|t| t.to_lowercase() == lowered) {
            return NormalizedDate::Present;
        }
        for re in &self.patterns {
            let Some(caps) = re.captures(trimmed) else { continue };
            let Some(year) = caps.name("year").and_then(|m| m.as_str().parse::<u16>().ok()) else { continue };
            if !(1900..=2100).contains(&year) {
                continue;
            }
            return match caps.name("month") {
                None => NormalizedDate::YearOnly { year },
                Some(m) => match m.as_str().parse::<u8>() {
                    Ok(month) if (1..=12).contains(&month) => NormalizedDate::YearMonth { year, month },
                    _ => continue,
                },
            };
        }
        NormalizedDate::Unparsed { raw: raw.to_string() }
    }

    /// Strips a single configured suffix from the end of `name`, respecting
    /// word boundaries for suffixes that start with a letter or digit.
    fn strip_one_suffix<'a>(&self, name: &'a str) -> Option<&'a str> {
        let lower = name.to_lowercase();
        for suffix in &self.suffixes {
            let s_lower = suffix.to_lowercase();
            if lower.len() != name.len() || !lower.ends_with(&s_lower) {
                continue;
            }
            let head = &name[..name.len() - s_lower.len()];
            let needs_boundary = suffix.chars().next().is_some_and(|c| c.is_ascii_alphanumeric());
            if needs_boundary && head.chars().next_back().is_some_and(|c| c.is_alphanumeric()) {
                continue;
            }
            let head = head.trim_end_matches(|c: char| c.is_whitespace() || c == ',' || c == '，');
            if head.is_empty() {
                continue;
            }
            return Some(head);
        }
        None
    }

    /// Trims, collapses whitespace and strips configured suffixes until none
    /// applies.
    pub fn normalize_org(&self, raw: &str) -> String {
        let mut name = collapse_whitespace(raw);
        while let Some(stripped) = self.strip_one_suffix(&name) {
            name = stripped.to_string();
        }
        name
    }
}

pub fn normalize_date(raw: &str, config: &RefineConfig) -> NormalizedDate {
    Refiner::new(config.clone()).map(|r| r.normalize_date(raw)).unwrap_or(NormalizedDate::Unparsed { raw: raw.to_string() })
}

pub fn normalize_org(raw: &str, config: &RefineConfig) -> String {
    Refiner::new(config.clone()).map(|r| r.normalize_org(raw)).unwrap_or_else(|_| collapse_whitespace(raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    GroundedReextraction,
    Normalization,
    Deduplication,
    SourceVerification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Modified,
    Dropped,
    Blanked,
}

/// One change made by the refiner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub stage: Stage,
    pub action: Action,
    /// Affected entity or field, e.g. `workExperience[2].company`.
    pub target: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refined {
    pub record: ResumeRecord,
    pub audit: Vec<AuditEntry>,
}

fn set_field(target: &mut String, value: String, stage: Stage, path: String, audit: &mut Vec<AuditEntry>) {
    if *target != value {
        audit.push(AuditEntry {
            stage,
            action: Action::Modified,
            target: path,
            detail: format!("{:?} -> {:?}", target, value),
        });
        *target = value;
    }
}

/// Rewrites dates in canonical form and strips organization suffixes.
pub fn normalize_record(mut record: ResumeRecord, refiner: &Refiner, audit: &mut Vec<AuditEntry>) -> ResumeRecord {
    let stage = Stage::Normalization;
    let date = |s: &str| refiner.normalize_date(s).canonical();
    let born = date(&record.basic.born);
    set_field(&mut record.basic.born, born, stage, "basicInfo.born".into(), audit);
    for (i, e) in record.education.iter_mut().enumerate() {
        let v = refiner.normalize_org(&e.school);
        set_field(&mut e.school, v, stage, format!("education[{i}].school"), audit);
        let v = date(&e.start_date);
        set_field(&mut e.start_date, v, stage, format!("education[{i}].startDate"), audit);
        let v = date(&e.end_date);
        set_field(&mut e.end_date, v, stage, format!("education[{i}].endDate"), audit);
    }
    for (i, w) in record.work.iter_mut().enumerate() {
        let v = refiner.normalize_org(&w.company);
        set_field(&mut w.company, v, stage, format!("workExperience[{i}].company"), audit);
        let v = date(&w.start_date);
        set_field(&mut w.start_date, v, stage, format!("workExperience[{i}].startDate"), audit);
        let v = date(&w.end_date);
        set_field(&mut w.end_date, v, stage, format!("workExperience[{i}].endDate"), audit);
    }
    record
}

/// Drops entities whose source spans overlap an earlier-kept span by more
/// than `dedup_overlap`, measured against the smaller of the two ranges.
/// Entities without a span are never dropped.
pub fn deduplicate(mut record: ResumeRecord, config: &RefineConfig, audit: &mut Vec<AuditEntry>) -> ResumeRecord {
    let mut spanned: Vec<(usize, crate::doc_model::LineRange)> =
        record.work.iter().enumerate().filter_map(|(i, w)| w.description_range.map(|r| (i, r))).collect();
    // Document order: by span start, then list position.
    spanned.sort_by_key(|&(i, r)| (r.start, r.end, i));

    let mut kept: Vec<crate::doc_model::LineRange> = Vec::new();
    let mut drop = vec![false; record.work.len()];
    for (i, range) in spanned {
        let duplicate_of = kept.iter().find(|k| {
            let smaller = range.len().min(k.len()).max(1);
            range.intersection_len(k) as f64 / smaller as f64 > config.dedup_overlap
        });
        match duplicate_of {
            Some(k) => {
                drop[i] = true;
                audit.push(AuditEntry {
                    stage: Stage::Deduplication,
                    action: Action::Dropped,
                    target: format!("workExperience[{i}]"),
                    detail: format!("span {range} overlaps kept span {k}"),
                });
            }
            None => kept.push(range),
        }
    }
    let mut i = 0;
    record.work.retain(|_| {
        let keep = !drop[i];
        i += 1;
        keep
    });
    record
}

/// Removes entities whose key fields do not occur in the document and
/// blanks basic-info fields that do not occur. `age` and `born` are exempt
/// because either may be derived from the other.
pub fn verify_source(mut record: ResumeRecord, doc: &IndexedDocument, audit: &mut Vec<AuditEntry>) -> ResumeRecord {
    let haystack = normalize(&doc.full_text());
    let found = |needle: &str| {
        let n = normalize(needle);
        !n.is_empty() && haystack.contains(&n)
    };
    let stage = Stage::SourceVerification;

    let mut index = 0;
    record.work.retain(|w| {
        let keep = found(&w.company) || found(&w.position);
        if !keep {
            audit.push(AuditEntry {
                stage,
                action: Action::Dropped,
                target: format!("workExperience[{index}]"),
                detail: format!("neither company {:?} nor position {:?} found in source", w.company, w.position),
            });
        }
        index += 1;
        keep
    });

    let mut index = 0;
    record.education.retain(|e| {
        let keep = found(&e.school);
        if !keep {
            audit.push(AuditEntry {
                stage,
                action: Action::Dropped,
                target: format!("education[{index}]"),
                detail: format!("school {:?} not found in source", e.school),
            });
        }
        index += 1;
        keep
    });

    let keys: Vec<&'static str> = record.basic.scalar_fields().iter().map(|(k, _)| *k).collect();
    for key in keys {
        if key == "age" || key == "born" {
            continue;
        }
        let field = record.basic.scalar_field_mut(key).expect("schema key");
        if !field.trim().is_empty() && !found(field) {
            audit.push(AuditEntry {
                stage,
                action: Action::Blanked,
                target: format!("basicInfo.{key}"),
                detail: format!("{field:?} not found in source"),
            });
            field.clear();
        }
    }
    let mut index = 0;
    record.basic.desired_location.retain(|loc| {
        let keep = found(loc);
        if !keep {
            audit.push(AuditEntry {
                stage,
                action: Action::Blanked,
                target: format!("basicInfo.desiredLocation[{index}]"),
                detail: format!("{loc:?} not found in source"),
            });
        }
        index += 1;
        keep
    });
    record
}

impl Refiner {
    /// Runs all four stages.
    pub fn refine(&self, record: ResumeRecord, doc: &IndexedDocument) -> Refined {
        let mut audit = Vec::new();

        let before: Vec<String> = record.work.iter().map(|w| w.description.clone()).collect();
        let (record, warnings) = resolve_pointers(record, doc);
        for (i, (w, old)) in record.work.iter().zip(before).enumerate() {
            if w.description != old {
                audit.push(AuditEntry {
                    stage: Stage::GroundedReextraction,
                    action: Action::Modified,
                    target: format!("workExperience[{i}].description"),
                    detail: format!("re-extracted from lines {}", w.description_range.map(|r| r.to_string()).unwrap_or_default()),
                });
            }
        }
        for w in warnings {
            audit.push(AuditEntry {
                stage: Stage::GroundedReextraction,
                action: Action::Modified,
                target: format!("workExperience[{}].descriptionRange", w.work_index),
                detail: w.message,
            });
        }
        let record = normalize_record(record, self, &mut audit);
        let record = deduplicate(record, &self.config, &mut audit);
        let record = verify_source(record, doc, &mut audit);
        Refined { record, audit }
    }
}

pub fn refine(record: ResumeRecord, doc: &IndexedDocument, config: &RefineConfig) -> Result<Refined, RefineError> {
    Ok(Refiner::new(config.clone())?.refine(record, doc))
}
