//! Two-stage evaluation of extracted records.
//!
//! Entity lists are first aligned one-to-one by maximizing key-field
//! similarity ([`hungarian_align`]). Each aligned pair is then compared
//! field by field with a rule chosen by the field's [`FieldKind`].
//! Outcomes are pooled into precision, recall, F1 and alignment accuracy.

mod hungarian;
mod similarity;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hungarian::{hungarian_align, AlignedPair, Alignment, SimilarityMatrix};
pub use similarity::{levenshtein, mean_similarity, string_similarity};

use crate::extract::{BasicInfo, EducationEntry, ResumeRecord, WorkEntry};
use crate::refine::{NormalizedDate, RefineConfig, RefineError, Refiner};
use crate::text::normalize;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid similarity matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid eval config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Period,
    NamedEntity,
    LongText,
    Other,
}

impl FieldKind {
    pub const ALL: [FieldKind; 4] = [FieldKind::Period, FieldKind::NamedEntity, FieldKind::LongText, FieldKind::Other];

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Period => "period",
            FieldKind::NamedEntity => "named_entity",
            FieldKind::LongText => "long_text",
            FieldKind::Other => "other",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Entity list a field belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    #[serde(rename = "basicInfo")]
    Basic,
    #[serde(rename = "education")]
    Education,
    #[serde(rename = "workExperience")]
    Work,
}

impl EntityKind {
    pub fn key(self) -> &'static str {
        match self {
            EntityKind::Basic => "basicInfo",
            EntityKind::Education => "education",
            EntityKind::Work => "workExperience",
        }
    }
}

/// Default field-kind registry, keyed by qualified field name.
pub fn default_field_kinds() -> BTreeMap<String, FieldKind> {
    let mut m = BTreeMap::new();
    for (k, _) in BasicInfo::default().scalar_fields() {
        m.insert(format!("basicInfo.{k}"), FieldKind::Other);
    }
    m.insert("basicInfo.desiredLocation".into(), FieldKind::Other);
    for (k, _) in EducationEntry::default().fields() {
        let kind = match k {
            "startDate" | "endDate" => FieldKind::Period,
            "school" | "major" | "degree" => FieldKind::NamedEntity,
            _ => FieldKind::Other,
        };
        m.insert(format!("education.{k}"), kind);
    }
    for (k, _) in WorkEntry::default().fields() {
        let kind = match k {
            "startDate" | "endDate" => FieldKind::Period,
            "company" | "position" => FieldKind::NamedEntity,
            "description" => FieldKind::LongText,
            _ => FieldKind::Other,
        };
        m.insert(format!("workExperience.{k}"), kind);
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Aligned pairs below this similarity become unmatched. `None` keeps
    /// every pair the assignment produces.
    pub min_similarity: Option<f64>,
    /// Minimum normalized edit similarity for long-text fields.
    pub long_text_threshold: f64,
    pub work_key_fields: Vec<String>,
    pub education_key_fields: Vec<String>,
    /// Overrides or extensions of the field-kind registry.
    pub field_kinds: BTreeMap<String, FieldKind>,
    /// Date patterns used by period matching.
    pub dates: RefineConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            min_similarity: None,
            long_text_threshold: 0.9,
            work_key_fields: vec!["company".into(), "position".into()],
            education_key_fields: vec!["school".into(), "major".into()],
            field_kinds: BTreeMap::new(),
            dates: RefineConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, EvalError> {
        toml::from_str(text).map_err(|e| EvalError::InvalidConfig(e.to_string()))
    }
}

/// An entity flattened to `(field, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub kind: EntityKind,
    pub fields: Vec<(&'static str, String)>,
}

impl Entity {
    pub fn get(&self, field: &str) -> &str {
        self.fields.iter().find(|(k, _)| *k == field).map_or("", |(_, v)| v.as_str())
    }

    pub fn from_basic(b: &BasicInfo) -> Self {
        let mut fields: Vec<(&'static str, String)> = b.scalar_fields().iter().map(|(k, v)| (*k, v.to_string())).collect();
        // Order-insensitive list comparison.
        let mut locs: Vec<String> = b.desired_location.iter().map(|l| normalize(l)).filter(|l| !l.is_empty()).collect();
        locs.sort();
        fields.push(("desiredLocation", locs.join(", ")));
        Entity { kind: EntityKind::Basic, fields }
    }

    pub fn from_education(e: &EducationEntry) -> Self {
        Entity { kind: EntityKind::Education, fields: e.fields().iter().map(|(k, v)| (*k, v.to_string())).collect() }
    }

    pub fn from_work(w: &WorkEntry) -> Self {
        Entity { kind: EntityKind::Work, fields: w.fields().iter().map(|(k, v)| (*k, v.to_string())).collect() }
    }
}

/// Mean string similarity over `key_fields`.
pub fn entity_similarity(gt: &Entity, pred: &Entity, key_fields: &[String]) -> f64 {
    let pairs: Vec<(&str, &str)> = key_fields.iter().map(|k| (gt.get(k), pred.get(k))).collect();
    mean_similarity(&pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldStatus {
    Correct,
    AlignedButWrong,
    MissedGt,
    Spurious,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldOutcome {
    /// Qualified name, e.g. `workExperience.company`.
    pub field: String,
    pub kind: FieldKind,
    pub status: FieldStatus,
}

/// Compiled evaluation settings.
pub struct Evaluator {
    config: EvalConfig,
    kinds: BTreeMap<String, FieldKind>,
    dates: Refiner,
}

impl Evaluator {
    pub fn new(config: EvalConfig) -> Result<Self, EvalError> {
        if !(0.0..=1.0).contains(&config.long_text_threshold) {
            return Err(EvalError::InvalidConfig(format!("long_text_threshold {} outside [0, 1]", config.long_text_threshold)));
        }
        if config.work_key_fields.is_empty() || config.education_key_fields.is_empty() {
            return Err(EvalError::InvalidConfig("key field lists must be non-empty".into()));
        }
        let mut kinds = default_field_kinds();
        kinds.extend(config.field_kinds.clone());
        let dates = Refiner::new(config.dates.clone())?;
        Ok(Evaluator { config, kinds, dates })
    }

    pub fn config(&self) -> &EvalConfig {
        &self.config
    }

    pub fn kind_of(&self, qualified: &str) -> FieldKind {
        self.kinds.get(qualified).copied().unwrap_or(FieldKind::Other)
    }

    fn period_match(&self, gt: &str, pred: &str) -> bool {
        use NormalizedDate::*;
        match (self.dates.normalize_date(gt), self.dates.normalize_date(pred)) {
            (YearMonth { year: a, month: ma }, YearMonth { year: b, month: mb }) => a == b && ma == mb,
            (YearOnly { year: a }, YearOnly { year: b })
            | (YearOnly { year: a }, YearMonth { year: b, .. })
            | (YearMonth { year: a, .. }, YearOnly { year: b }) => a == b,
            (Present, Present) | (Empty, Empty) => true,
            (Unparsed { raw: a }, Unparsed { raw: b }) => normalize(&a) == normalize(&b),
            _ => false,
        }
    }

    /// Kind-dependent field comparison.
    pub fn match_field(&self, kind: FieldKind, gt: &str, pred: &str) -> bool {
        match kind {
            FieldKind::Period => self.period_match(gt, pred),
            FieldKind::NamedEntity => {
                let (g, p) = (normalize(gt), normalize(pred));
                !g.is_empty() && !p.is_empty() && (g.contains(&p) || p.contains(&g))
            }
            FieldKind::LongText => string_similarity(gt, pred) >= self.config.long_text_threshold,
            FieldKind::Other => normalize(gt) == normalize(pred),
        }
    }

    fn key_fields(&self, kind: EntityKind) -> &[String] {
        match kind {
            EntityKind::Work => &self.config.work_key_fields,
            EntityKind::Education => &self.config.education_key_fields,
            EntityKind::Basic => &[],
        }
    }

    fn outcome(&self, entity: EntityKind, field: &str, status: FieldStatus) -> FieldOutcome {
        let field = format!("{}.{field}", entity.key());
        FieldOutcome { kind: self.kind_of(&field), field, status }
    }

    fn compare_pair(&self, gt: &Entity, pred: &Entity, out: &mut Vec<FieldOutcome>) {
        for (field, g) in &gt.fields {
            let p = pred.get(field);
            if g.trim().is_empty() && p.trim().is_empty() {
                continue;
            }
            let kind = self.kind_of(&format!("{}.{field}", gt.kind.key()));
            let status = if self.match_field(kind, g, p) { FieldStatus::Correct } else { FieldStatus::AlignedButWrong };
            out.push(self.outcome(gt.kind, field, status));
        }
    }

    fn unmatched(&self, e: &Entity, status: FieldStatus, out: &mut Vec<FieldOutcome>) {
        for (field, v) in &e.fields {
            if !v.trim().is_empty() {
                out.push(self.outcome(e.kind, field, status));
            }
        }
    }

    /// Aligns two entity lists of the same kind.
    pub fn align(&self, gt: &[Entity], pred: &[Entity]) -> Alignment {
        let kind = gt.first().or(pred.first()).map_or(EntityKind::Work, |e| e.kind);
        let keys = self.key_fields(kind);
        let s = SimilarityMatrix::from_fn(gt.len(), pred.len(), |i, j| entity_similarity(&gt[i], &pred[j], keys))
            .expect("similarities lie in [0, 1]");
        hungarian_align(&s, self.config.min_similarity)
    }

    fn evaluate_list(&self, gt: &[Entity], pred: &[Entity], out: &mut Vec<FieldOutcome>) {
        let alignment = self.align(gt, pred);
        for pair in &alignment.pairs {
            self.compare_pair(&gt[pair.gt_index], &pred[pair.pred_index], out);
        }
        for &i in &alignment.unmatched_gt {
            self.unmatched(&gt[i], FieldStatus::MissedGt, out);
        }
        for &j in &alignment.unmatched_pred {
            self.unmatched(&pred[j], FieldStatus::Spurious, out);
        }
    }

    /// Field outcomes for one resume. Basic info is always aligned; the
    /// education and work lists are aligned independently.
    pub fn evaluate_resume(&self, gt: &ResumeRecord, pred: &ResumeRecord) -> Vec<FieldOutcome> {
        let mut out = Vec::new();
        self.compare_pair(&Entity::from_basic(&gt.basic), &Entity::from_basic(&pred.basic), &mut out);
        let edu = |r: &ResumeRecord| r.education.iter().map(Entity::from_education).collect::<Vec<_>>();
        let work = |r: &ResumeRecord| r.work.iter().map(Entity::from_work).collect::<Vec<_>>();
        self.evaluate_list(&edu(gt), &edu(pred), &mut out);
        self.evaluate_list(&work(gt), &work(pred), &mut out);
        out
    }
}

pub fn match_field(kind: FieldKind, gt: &str, pred: &str, config: &EvalConfig) -> Result<bool, EvalError> {
    Ok(Evaluator::new(config.clone())?.match_field(kind, gt, pred))
}

pub fn evaluate_resume(gt: &ResumeRecord, pred: &ResumeRecord, config: &EvalConfig) -> Result<Vec<FieldOutcome>, EvalError> {
    Ok(Evaluator::new(config.clone())?.evaluate_resume(gt, pred))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub e_gt: u64,
    pub e_pred: u64,
    pub e_align: u64,
    pub e_correct: u64,
}

impl Counts {
    pub fn of(status: FieldStatus) -> Self {
        let (correct, aligned, missed, spurious) = match status {
            FieldStatus::Correct => (1, 1, 0, 0),
            FieldStatus::AlignedButWrong => (0, 1, 0, 0),
            FieldStatus::MissedGt => (0, 0, 1, 0),
            FieldStatus::Spurious => (0, 0, 0, 1),
        };
        Counts { e_correct: correct, e_align: aligned, e_gt: aligned + missed, e_pred: aligned + spurious }
    }
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            e_gt: self.e_gt + o.e_gt,
            e_pred: self.e_pred + o.e_pred,
            e_align: self.e_align + o.e_align,
            e_correct: self.e_correct + o.e_correct,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Counts with the metrics derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

impl Metrics {
    pub fn from_counts(counts: Counts) -> Self {
        let precision = ratio(counts.e_correct, counts.e_pred);
        let recall = ratio(counts.e_correct, counts.e_gt);
        Metrics { counts, precision, recall, f1: harmonic_mean(precision, recall), accuracy: ratio(counts.e_correct, counts.e_align) }
    }
}

/// Unweighted mean over fields. F1 is the harmonic mean of the averaged
/// precision and recall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroAverage {
    pub fields: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub resumes: usize,
    pub fields: BTreeMap<String, Metrics>,
    pub groups: BTreeMap<FieldKind, Metrics>,
    /// Pooled counts over every field.
    pub micro: Metrics,
    /// Macro average across fields.
    pub overall: MacroAverage,
}

/// Running totals; folding is associative so per-resume accumulators can be
/// merged in any grouping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Accumulator {
    pub resumes: usize,
    fields: BTreeMap<String, (FieldKind, Counts)>,
}

impl Accumulator {
    pub fn add_resume(&mut self, outcomes: &[FieldOutcome]) {
        self.resumes += 1;
        for o in outcomes {
            let entry = self.fields.entry(o.field.clone()).or_insert((o.kind, Counts::default()));
            entry.1 += Counts::of(o.status);
        }
    }

    pub fn merge(mut self, other: Accumulator) -> Accumulator {
        self.resumes += other.resumes;
        for (field, (kind, counts)) in other.fields {
            self.fields.entry(field).or_insert((kind, Counts::default())).1 += counts;
        }
        self
    }

    pub fn report(&self) -> MetricsReport {
        let fields: BTreeMap<String, Metrics> =
            self.fields.iter().map(|(f, (_, c))| (f.clone(), Metrics::from_counts(*c))).collect();
        let mut group_counts: BTreeMap<FieldKind, Counts> = BTreeMap::new();
        let mut total = Counts::default();
        for (kind, c) in self.fields.values() {
            *group_counts.entry(*kind).or_default() += *c;
            total += *c;
        }
        let n = fields.len();
        let mean = |f: fn(&Metrics) -> f64| if n == 0 { 0.0 } else { fields.values().map(f).sum::<f64>() / n as f64 };
        let (precision, recall) = (mean(|m| m.precision), mean(|m| m.recall));
        MetricsReport {
            resumes: self.resumes,
            groups: group_counts.into_iter().map(|(k, c)| (k, Metrics::from_counts(c))).collect(),
            micro: Metrics::from_counts(total),
            overall: MacroAverage { fields: n, precision, recall, f1: harmonic_mean(precision, recall), accuracy: mean(|m| m.accuracy) },
            fields,
        }
    }
}

/// Aggregates per-resume outcome lists into a report.
pub fn aggregate<'a>(per_resume: impl IntoIterator<Item = &'a [FieldOutcome]>) -> MetricsReport {
    let mut acc = Accumulator::default();
    for outcomes in per_resume {
        acc.add_resume(outcomes);
    }
    acc.report()
}

impl MetricsReport {
    /// Rows as `(scope, name, metrics)` for tabular output.
    pub fn rows(&self) -> Vec<(&'static str, String, Metrics)> {
        let mut rows: Vec<(&'static str, String, Metrics)> =
            self.fields.iter().map(|(f, m)| ("field", f.clone(), *m)).collect();
        rows.extend(self.groups.iter().map(|(k, m)| ("group", k.to_string(), *m)));
        rows.push(("micro", "all".into(), self.micro));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scope,name,e_gt,e_pred,e_align,e_correct,precision,recall,f1,accuracy\n");
        for (scope, name, m) in self.rows() {
            let c = m.counts;
            out.push_str(&format!(
                "{scope},{name},{},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
                c.e_gt, c.e_pred, c.e_align, c.e_correct, m.precision, m.recall, m.f1, m.accuracy
            ));
        }
        let o = &self.overall;
        out.push_str(&format!("macro,all,,,,,{:.6},{:.6},{:.6},{:.6}\n", o.precision, o.recall, o.f1, o.accuracy));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_model::LineRange;

    fn ev() -> Evaluator {
        Evaluator::new(EvalConfig::default()).unwrap()
    }

    #[test]
    fn registry_covers_schema_fields() {
        let kinds = default_field_kinds();
        assert_eq!(kinds["workExperience.startDate"], FieldKind::Period);
        assert_eq!(kinds["education.endDate"], FieldKind::Period);
        assert_eq!(kinds["workExperience.company"], FieldKind::NamedEntity);
        assert_eq!(kinds["education.degree"], FieldKind::NamedEntity);
        assert_eq!(kinds["workExperience.description"], FieldKind::LongText);
        assert_eq!(kinds["workExperience.location"], FieldKind::Other);
        assert_eq!(kinds["basicInfo.born"], FieldKind::Other);
        assert_eq!(kinds.len(), 10 + 6 + 6);
    }

    #[test]
    fn period_rules() {
        let e = ev();
        assert!(e.match_field(FieldKind::Period, "2018-09", "2018.09"));
        assert!(e.match_field(FieldKind::Period, "2018", "2018-09"));
        assert!(e.match_field(FieldKind::Period, "Present", "至今"));
        assert!(!e.match_field(FieldKind::Period, "2018-09", "2018-10"));
        assert!(!e.match_field(FieldKind::Period, "2018-09", "present"));
    }

    #[test]
    fn named_entity_substring() {
        let e = ev();
        assert!(e.match_field(FieldKind::NamedEntity, "Tsinghua University", "tsinghua university."));
        assert!(e.match_field(FieldKind::NamedEntity, "Alibaba Group", "Alibaba"));
        assert!(!e.match_field(FieldKind::NamedEntity, "Alibaba", ""));
        assert!(!e.match_field(FieldKind::NamedEntity, "Alibaba", "Tencent"));
    }

    #[test]
    fn long_text_edit_threshold() {
        let e = ev();
        let gt: String = (0..100).map(|i| (b'a' + (i % 26) as u8) as char).collect();
        let mut chars: Vec<char> = gt.chars().collect();
        for i in [3, 20, 41, 60, 97] {
            chars[i] = 'z';
        }
        let pred: String = chars.into_iter().collect();
        assert_eq!(levenshtein(&gt, &pred), 5);
        assert_eq!(string_similarity(&gt, &pred), 0.95);
        assert!(e.match_field(FieldKind::LongText, &gt, &pred));
        assert!(!e.match_field(FieldKind::LongText, &gt, &gt[..80]));
    }

    #[test]
    fn other_is_normalized_exact() {
        assert!(ev().match_field(FieldKind::Other, "zhang san", "Zhang  San."));
        assert!(!ev().match_field(FieldKind::Other, "zhang san", "zhang"));
    }

    #[test]
    fn entity_similarity_is_key_field_mean() {
        let keys = EvalConfig::default().work_key_fields;
        let a = Entity::from_work(&WorkEntry { company: "Acme".into(), position: "Engineer".into(), ..Default::default() });
        let b = Entity::from_work(&WorkEntry { company: "Acme".into(), position: "".into(), ..Default::default() });
        assert_eq!(entity_similarity(&a, &a, &keys), 1.0);
        assert_eq!(entity_similarity(&a, &b, &keys), 0.5);
    }

    fn sample() -> ResumeRecord {
        let w = |c: &str, p: &str, desc: &str| WorkEntry {
            company: c.into(),
            position: p.into(),
            start_date: "2019-01".into(),
            end_date: "2020-01".into(),
            description: desc.into(),
            description_range: Some(LineRange::new(0, 0)),
            ..Default::default()
        };
        ResumeRecord {
            basic: BasicInfo { name: "Zhang San".into(), ..Default::default() },
            education: vec![EducationEntry { school: "Tsinghua University".into(), major: "CS".into(), ..Default::default() }],
            work: vec![
                w("Alibaba Group", "Backend Engineer", "built services"),
                w("Tencent", "Data Analyst", "analysed data"),
                w("Baidu", "Researcher", "wrote papers"),
            ],
        }
    }

    #[test]
    fn identical_records_are_all_correct() {
        let r = sample();
        let out = ev().evaluate_resume(&r, &r);
        assert!(out.iter().all(|o| o.status == FieldStatus::Correct));
        // name + school/major + 3 * 5 work fields.
        assert_eq!(out.len(), 1 + 2 + 15);
    }

    #[test]
    fn order_of_predictions_does_not_matter() {
        let gt = sample();
        let mut pred = sample();
        pred.work.reverse();
        let mut a = ev().evaluate_resume(&gt, &gt);
        let mut b = ev().evaluate_resume(&gt, &pred);
        a.sort_by(|x, y| x.field.cmp(&y.field));
        b.sort_by(|x, y| x.field.cmp(&y.field));
        assert_eq!(a, b);
    }

    #[test]
    fn missing_entity_fields_are_missed() {
        let gt = sample();
        let mut pred = sample();
        pred.work.remove(2);
        let out = ev().evaluate_resume(&gt, &pred);
        let missed = out.iter().filter(|o| o.status == FieldStatus::MissedGt).count();
        assert_eq!(missed, 5);
        assert!(out.iter().filter(|o| o.status != FieldStatus::MissedGt).all(|o| o.status == FieldStatus::Correct));
    }

    #[test]
    fn spurious_entity_fields() {
        let gt = sample();
        let mut pred = sample();
        pred.work.push(WorkEntry { company: "Ghost".into(), position: "Phantom".into(), ..Default::default() });
        let out = ev().evaluate_resume(&gt, &pred);
        assert_eq!(out.iter().filter(|o| o.status == FieldStatus::Spurious).count(), 2);
    }

    #[test]
    fn doubly_empty_fields_do_not_participate() {
        let out = ev().evaluate_resume(&ResumeRecord::default(), &ResumeRecord::default());
        assert!(out.is_empty());
    }

    fn outcomes(correct: usize, wrong: usize, missed: usize, spurious: usize) -> Vec<FieldOutcome> {
        let mk = |status| FieldOutcome { field: "basicInfo.name".into(), kind: FieldKind::Other, status };
        std::iter::repeat_n(mk(FieldStatus::Correct), correct)
            .chain(std::iter::repeat_n(mk(FieldStatus::AlignedButWrong), wrong))
            .chain(std::iter::repeat_n(mk(FieldStatus::MissedGt), missed))
            .chain(std::iter::repeat_n(mk(FieldStatus::Spurious), spurious))
            .collect()
    }

    #[test]
    fn all_correct_is_perfect() {
        let o = outcomes(7, 0, 0, 0);
        let r = aggregate([o.as_slice()]);
        assert_eq!((r.micro.precision, r.micro.recall, r.micro.f1, r.micro.accuracy), (1.0, 1.0, 1.0, 1.0));
        assert_eq!((r.overall.precision, r.overall.recall, r.overall.f1, r.overall.accuracy), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn eight_of_ten_aligned() {
        let o = outcomes(8, 2, 0, 0);
        let m = aggregate([o.as_slice()]).micro;
        assert_eq!(m.counts, Counts { e_gt: 10, e_pred: 10, e_align: 10, e_correct: 8 });
        assert_eq!((m.precision, m.recall, m.accuracy), (0.8, 0.8, 0.8));
        assert!((m.f1 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_predictions() {
        let o = outcomes(0, 0, 4, 0);
        let m = aggregate([o.as_slice()]).micro;
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let r = aggregate(std::iter::empty::<&[FieldOutcome]>());
        assert_eq!(r.overall.fields, 0);
        assert_eq!(r.micro.f1, 0.0);
    }

    #[test]
    fn accumulators_merge_associatively() {
        let (a, b, c) = (outcomes(3, 1, 0, 0), outcomes(0, 0, 2, 1), outcomes(5, 0, 0, 2));
        let mut x = Accumulator::default();
        x.add_resume(&a);
        let mut y = Accumulator::default();
        y.add_resume(&b);
        let mut z = Accumulator::default();
        z.add_resume(&c);
        let left = x.clone().merge(y.clone()).merge(z.clone());
        let right = x.merge(y.merge(z));
        assert_eq!(left.report(), right.report());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let o = outcomes(1, 1, 0, 0);
        let csv = aggregate([o.as_slice()]).to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "scope,name,e_gt,e_pred,e_align,e_correct,precision,recall,f1,accuracy");
        assert!(lines[1].starts_with("field,basicInfo.name,2,2,2,1,"));
        assert!(lines.last().unwrap().starts_with("macro,all"));
    }
}
