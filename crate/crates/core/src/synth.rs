//! Deterministic synthetic resumes.
//!
//! A [`ResumeTemplate`] fixes the page structure; [`generate`] fills it from
//! [`ContentPools`] with a seeded RNG and places every line on an A4 page.
//! Each fixture carries its metadata and OCR primitive streams, the reading
//! order a correct layout pass must produce, the values as printed
//! (`surface`) and the canonical ground truth (`truth`).
//!
//! [`OracleBackend`] answers extraction prompts from the printed values,
//! locating description pointers in whatever document it is shown.
//! [`corrupt`] derives degraded predictions with closed-form count deltas.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::seq::{index, IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::doc_model::{parse_rendered, BoundingBox, LineRange, Source, TextPrimitive};
use crate::eval::Counts;
use crate::extract::{
    prompt_document, task_output_json, BackendError, BasicInfo, CompletionBackend, DecodeConfig, EducationEntry,
    ExtractionTask, ResumeRecord, WorkEntry,
};
use crate::ingest::{fuse_content, write_primitives_jsonl, PageGeometry, DEFAULT_OVERLAP_THRESHOLD};
use crate::refine::{NormalizedDate, RefineConfig, Refiner};
use crate::text::normalize;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("content pool `{0}` is empty")]
    EmptyPool(&'static str),
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("content does not fit column {column} on one page")]
    Overflow { column: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub const CHAR_WIDTH: f64 = 5.0;
pub const LINE_HEIGHT: f64 = 10.0;
pub const LINE_PITCH: f64 = 14.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 800.0;
const HEADER_GAP: f64 = 30.0;
const BLOCK_GAP: f64 = 10.0;
const LINEAR_SECTION_GAP: f64 = 20.0;
const MIN_COLUMN_GAP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    Linear,
    TwoColumn,
    #[serde(rename = "sidebar")]
    SidebarRight,
}

impl LayoutKind {
    pub const ALL: [LayoutKind; 3] = [LayoutKind::Linear, LayoutKind::TwoColumn, LayoutKind::SidebarRight];

    pub fn name(self) -> &'static str {
        match self {
            LayoutKind::Linear => "linear",
            LayoutKind::TwoColumn => "two-column",
            LayoutKind::SidebarRight => "sidebar",
        }
    }

    pub fn parse(s: &str) -> Option<LayoutKind> {
        LayoutKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Work,
    Education,
    Skills,
    Languages,
}

impl Section {
    fn heading(self) -> &'static str {
        match self {
            Section::Work => "Work Experience",
            Section::Education => "Education",
            Section::Skills => "Skills",
            Section::Languages => "Languages",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub x_min: f64,
    pub x_max: f64,
}

impl Column {
    fn max_units(&self) -> usize {
        ((self.x_max - self.x_min) / CHAR_WIDTH).floor() as usize
    }
}

/// Page structure: a full-width header followed by sections flowed into
/// columns. Columns are read left to right; sections within a column top
/// to bottom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResumeTemplate {
    pub layout_kind: LayoutKind,
    pub header: Column,
    pub columns: Vec<Column>,
    /// Section placement as `(section, column index)`, in flow order.
    pub slots: Vec<(Section, usize)>,
    pub max_work_entries: usize,
}

impl ResumeTemplate {
    pub fn linear() -> Self {
        ResumeTemplate {
            layout_kind: LayoutKind::Linear,
            header: Column { x_min: 40.0, x_max: 555.0 },
            columns: vec![Column { x_min: 40.0, x_max: 555.0 }],
            slots: vec![(Section::Education, 0), (Section::Work, 0), (Section::Skills, 0)],
            max_work_entries: 4,
        }
    }

    pub fn two_column() -> Self {
        ResumeTemplate {
            layout_kind: LayoutKind::TwoColumn,
            header: Column { x_min: 40.0, x_max: 555.0 },
            columns: vec![Column { x_min: 40.0, x_max: 280.0 }, Column { x_min: 315.0, x_max: 555.0 }],
            slots: vec![(Section::Education, 0), (Section::Skills, 0), (Section::Work, 1)],
            max_work_entries: 3,
        }
    }

    pub fn sidebar_right() -> Self {
        ResumeTemplate {
            layout_kind: LayoutKind::SidebarRight,
            header: Column { x_min: 40.0, x_max: 555.0 },
            columns: vec![Column { x_min: 40.0, x_max: 355.0 }, Column { x_min: 395.0, x_max: 555.0 }],
            slots: vec![(Section::Work, 0), (Section::Education, 0), (Section::Skills, 1), (Section::Languages, 1)],
            max_work_entries: 3,
        }
    }

    pub fn for_kind(kind: LayoutKind) -> Self {
        match kind {
            LayoutKind::Linear => Self::linear(),
            LayoutKind::TwoColumn => Self::two_column(),
            LayoutKind::SidebarRight => Self::sidebar_right(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidTemplate(m));
        let (w, _) = PageGeometry::A4;
        for c in self.columns.iter().chain([&self.header]) {
            if !(0.0 <= c.x_min && c.x_min < c.x_max && c.x_max <= w) || c.max_units() < 20 {
                return bad(format!("column {:?} is not a usable page span", c));
            }
        }
        for pair in self.columns.windows(2) {
            if pair[1].x_min - pair[0].x_max < MIN_COLUMN_GAP {
                return bad(format!("columns closer than {MIN_COLUMN_GAP}pt"));
            }
        }
        if self.layout_kind == LayoutKind::Linear && self.columns.len() != 1 {
            return bad("a linear template has exactly one column".into());
        }
        if let Some((s, c)) = self.slots.iter().find(|(_, c)| *c >= self.columns.len()) {
            return bad(format!("section {s:?} placed in missing column {c}"));
        }
        for s in [Section::Work, Section::Education] {
            if self.slots.iter().filter(|(x, _)| *x == s).count() != 1 {
                return bad(format!("section {s:?} must appear exactly once"));
            }
        }
        if self.max_work_entries == 0 {
            return bad("max_work_entries must be positive".into());
        }
        Ok(())
    }
}

/// Value pools sampled by [`generate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentPools {
    pub names: Vec<String>,
    pub email_domains: Vec<String>,
    /// Company names without legal suffix.
    pub companies: Vec<String>,
    /// Legal suffixes printed after company names; may contain `""`.
    pub company_suffixes: Vec<String>,
    pub positions: Vec<String>,
    pub schools: Vec<String>,
    pub majors: Vec<String>,
    pub cities: Vec<String>,
    pub sentences: Vec<String>,
    pub skills: Vec<String>,
    pub languages: Vec<String>,
    /// Inclusive range of first-enrolment years.
    pub start_years: (u16, u16),
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for ContentPools {
    fn default() -> Self {
        ContentPools {
            names: strings(&[
                "Zhang San", "Li Wei", "Wang Fang", "Liu Yang", "Chen Jing", "Yang Lei", "Zhao Min", "Huang Tao",
                "Zhou Xin", "Wu Hao", "Xu Ning", "Sun Yue", "Ma Lin", "Zhu Kai", "Hu Bo", "Guo Rui", "He Jun",
                "Lin Xiao", "Gao Peng", "Luo Dan", "Ada Park", "Maria Lopez", "Tom Becker", "Nina Petrova",
            ]),
            email_domains: strings(&["example.com", "mail.test", "inbox.example.org"]),
            companies: strings(&[
                "Alibaba Group", "Tencent Technology", "Baidu Online", "ByteDance", "Meituan", "JD Logistics",
                "NetEase", "Xiaomi", "Huawei Cloud", "Kuaishou", "Ant Financial", "Pinduoduo", "DiDi Mobility",
                "Lenovo Research", "Trip Services", "Northwind Traders", "Contoso Analytics", "Fabrikam Robotics",
                "Initech Systems", "Umbrella Biotech", "华为技术", "腾讯科技", "字节跳动", "美团点评",
            ]),
            company_suffixes: strings(&["", " Co., Ltd.", " Ltd.", " Inc.", " LLC", "有限公司"]),
            positions: strings(&[
                "Backend Engineer", "Data Analyst", "Product Manager", "Frontend Developer", "Research Scientist",
                "QA Engineer", "DevOps Engineer", "Machine Learning Engineer", "Technical Writer", "UX Designer",
                "Sales Manager", "Operations Specialist", "Financial Analyst", "Project Coordinator",
            ]),
            schools: strings(&[
                "Tsinghua University", "Peking University", "Fudan University", "Zhejiang University",
                "Nanjing University", "Wuhan University", "Sun Yat-sen University", "Xiamen University",
                "Harbin Institute of Technology", "Sichuan University", "Tongji University", "Shandong University",
                "University of Toronto", "ETH Zurich",
            ]),
            majors: strings(&[
                "Computer Science", "Software Engineering", "Statistics", "Electrical Engineering", "Economics",
                "Mathematics", "Industrial Design", "Finance", "Information Systems", "Automation",
            ]),
            cities: strings(&[
                "Beijing", "Shanghai", "Shenzhen", "Hangzhou", "Guangzhou", "Chengdu", "Nanjing", "Wuhan", "Xian",
                "Suzhou", "Tianjin", "Chongqing",
            ]),
            sentences: strings(&[
                "Designed and maintained order processing services handling two million requests per day.",
                "Migrated the reporting stack to a columnar warehouse and cut query latency by sixty percent.",
                "Led a team of five engineers delivering the mobile checkout redesign on schedule.",
                "Built real-time dashboards that tracked inventory levels across forty regional warehouses.",
                "Introduced contract testing between teams, reducing integration failures in staging.",
                "Owned the recommendation ranking model and improved click-through rate by eight percent.",
                "Automated release pipelines so that deployments went from weekly to several per day.",
                "Interviewed users and translated findings into a prioritized quarterly roadmap.",
                "Wrote the internal style guide and reviewed documentation for every public API.",
                "Reduced cloud spending by right-sizing clusters and scheduling batch jobs off-peak.",
                "Coordinated vendor onboarding for a new payments provider across three markets.",
                "Developed anomaly detection for transaction streams using robust statistical baselines.",
                "Refactored a legacy monolith into services with clear ownership boundaries.",
                "Ran A/B experiments on onboarding flows and documented the results for leadership.",
                "Mentored junior developers and organized a weekly reading group on system design.",
                "Implemented role-based access control for the administration console.",
                "Prepared monthly financial forecasts and variance analyses for the regional office.",
                "Set up on-call rotations, runbooks and alerting that lowered mean time to recovery.",
                "Created a labeling tool that halved the cost of building training datasets.",
                "Negotiated annual contracts with key accounts and grew renewals by twelve percent.",
                "Published two papers on efficient sequence models at peer-reviewed venues.",
                "Optimized database indexes and query plans for the search backend.",
                "Drove accessibility fixes across the web client to meet compliance targets.",
                "Integrated logistics partners through a unified shipment tracking interface.",
                "Maintained the data catalog and defined quality checks for critical tables.",
                "Streamlined the hiring pipeline by standardizing technical interview rubrics.",
            ]),
            skills: strings(&[
                "Python", "Rust", "Java", "Go", "SQL", "Kubernetes", "Docker", "Spark", "PyTorch", "TensorFlow",
                "React", "TypeScript", "Linux", "Kafka", "Redis", "PostgreSQL", "Tableau", "Excel", "Figma",
                "Terraform", "Airflow", "Git",
            ]),
            languages: strings(&["English (fluent)", "Mandarin (native)", "Japanese (basic)", "German (intermediate)", "French (basic)"]),
            start_years: (1998, 2014),
        }
    }
}

impl ContentPools {
    pub fn validate(&self) -> Result<(), SynthError> {
        let pools: [(&'static str, usize); 11] = [
            ("names", self.names.len()),
            ("email_domains", self.email_domains.len()),
            ("companies", self.companies.len()),
            ("company_suffixes", self.company_suffixes.len()),
            ("positions", self.positions.len()),
            ("schools", self.schools.len()),
            ("majors", self.majors.len()),
            ("cities", self.cities.len()),
            ("sentences", self.sentences.len()),
            ("skills", self.skills.len()),
            ("languages", self.languages.len()),
        ];
        if let Some((name, _)) = pools.iter().find(|(_, n)| *n == 0) {
            return Err(SynthError::EmptyPool(name));
        }
        if self.start_years.0 > self.start_years.1 {
            return Err(SynthError::EmptyPool("start_years"));
        }
        Ok(())
    }
}

/// A single placed line of the expected linearization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedLine {
    pub text: String,
    pub page: usize,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFixture {
    pub seed: u64,
    pub layout: LayoutKind,
    pub pages: Vec<PageGeometry>,
    /// Embedded-text stream, in arbitrary order.
    pub metadata: Vec<TextPrimitive>,
    /// OCR stream: near-duplicates of some metadata lines plus lines that
    /// only exist as image text.
    pub ocr: Vec<TextPrimitive>,
    /// Result of fusing both streams.
    pub primitives: Vec<TextPrimitive>,
    /// Line texts in correct reading order.
    pub expected_lines: Vec<String>,
    /// Values exactly as printed on the page.
    pub surface: ResumeRecord,
    /// Canonical values: dates normalized, legal suffixes removed,
    /// descriptions with their line ranges in `expected_lines`.
    pub truth: ResumeRecord,
}

impl SynthFixture {
    /// Writes the fixture's files into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir)?;
        let jsonl = |name: &str, prims: &[TextPrimitive]| -> Result<(), SynthError> {
            let f = BufWriter::new(fs::File::create(dir.join(name))?);
            write_primitives_jsonl(f, prims).map_err(|e| SynthError::Io(std::io::Error::other(e.to_string())))
        };
        jsonl("metadata.jsonl", &self.metadata)?;
        jsonl("ocr.jsonl", &self.ocr)?;
        jsonl("fused.jsonl", &self.primitives)?;
        write_json(&dir.join("pages.json"), &self.pages)?;
        write_json(&dir.join("truth.json"), &self.truth)?;
        write_json(&dir.join("oracle.json"), &self.surface)?;
        write_json(&dir.join("expected_lines.json"), &self.expected_lines)?;
        Ok(())
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), SynthError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[derive(Clone, Copy)]
enum DateStyle {
    Dash,
    Dot,
    Slash,
    Cjk,
}

impl DateStyle {
    fn render(self, year: u16, month: Option<u8>) -> String {
        match (self, month) {
            (_, None) => format!("{year}"),
            (DateStyle::Dash, Some(m)) => format!("{year}-{m:02}"),
            (DateStyle::Dot, Some(m)) => format!("{year}.{m:02}"),
            (DateStyle::Slash, Some(m)) => format!("{year}/{m:02}"),
            (DateStyle::Cjk, Some(m)) => format!("{year}年{m}月"),
        }
    }
}

fn canonical(year: u16, month: Option<u8>) -> String {
    match month {
        Some(m) => NormalizedDate::YearMonth { year, month: m }.canonical(),
        None => NormalizedDate::YearOnly { year }.canonical(),
    }
}

/// Month index from year 0, so durations are simple additions.
fn ym(months: u32) -> (u16, u8) {
    ((months / 12) as u16, (months % 12 + 1) as u8)
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [String]) -> &'a str {
    pool.choose(rng).expect("validated pool")
}

fn pick_distinct<'a>(rng: &mut ChaCha8Rng, pool: &'a [String], n: usize) -> Vec<&'a str> {
    index::sample(rng, pool.len(), n.min(pool.len())).into_iter().map(|i| pool[i].as_str()).collect()
}

fn units(s: &str) -> usize {
    s.chars().map(|c| if (c as u32) >= 0x2E80 { 2 } else { 1 }).sum()
}

/// Greedy word wrap to at most `max` width units per line.
pub fn wrap(text: &str, max: usize) -> Vec<String> {
    let mut lines = Vec::new();
    let mut cur = String::new();
    for word in text.split_whitespace() {
        if !cur.is_empty() && units(&cur) + 1 + units(word) > max {
            lines.push(std::mem::take(&mut cur));
        }
        if !cur.is_empty() {
            cur.push(' ');
        }
        cur.push_str(word);
    }
    if !cur.is_empty() {
        lines.push(cur);
    }
    lines
}

fn email_for(name: &str, domain: &str, n: u32) -> String {
    let local: Vec<String> = name
        .split_whitespace()
        .map(|p| p.chars().filter(char::is_ascii_alphanumeric).collect::<String>().to_lowercase())
        .filter(|p| !p.is_empty())
        .collect();
    let local = if local.is_empty() { "user".to_string() } else { local.join(".") };
    format!("{local}{n}@{domain}")
}

/// Sampled content before layout; descriptions are still unwrapped.
struct Content {
    surface: ResumeRecord,
    truth: ResumeRecord,
    header_lines: Vec<String>,
    descriptions: Vec<String>,
    skills: Vec<String>,
    languages: Vec<String>,
}

fn sample_content(rng: &mut ChaCha8Rng, pools: &ContentPools, max_work: usize) -> Content {
    let style = *[DateStyle::Dash, DateStyle::Dot, DateStyle::Slash, DateStyle::Cjk].choose(rng).unwrap();
    let present_surface = *["Present", "至今", "Now"].choose(rng).unwrap();

    let name = pick(rng, &pools.names).to_string();
    let email = email_for(&name, pick(rng, &pools.email_domains), rng.random_range(1..100));
    let phone = format!(
        "1{}{}-{:04}-{:04}",
        rng.random_range(3..10),
        rng.random_range(0..10),
        rng.random_range(0..10000),
        rng.random_range(0..10000)
    );
    let age: u16 = rng.random_range(22..46);
    let birth_month: u8 = rng.random_range(1..13);
    let birth_year = 2024 - age;
    let show_age = rng.random_bool(0.7);
    let show_born = rng.random_bool(0.6);
    let gender = if rng.random_bool(0.8) { *["Male", "Female"].choose(rng).unwrap() } else { "" };
    let current = pick(rng, &pools.cities).to_string();
    let origin = if rng.random_bool(0.7) { pick(rng, &pools.cities).to_string() } else { String::new() };
    let n_desired = rng.random_range(1..4);
    let desired: Vec<String> =
        pick_distinct(rng, &pools.cities, n_desired).into_iter().map(String::from).collect();
    let intention = pick(rng, &pools.positions).to_string();

    let mut surface_basic = BasicInfo {
        name: name.clone(),
        personal_email: email.clone(),
        phone_number: phone.clone(),
        gender: gender.to_string(),
        job_intention: intention.clone(),
        current_location: current.clone(),
        place_of_origin: origin.clone(),
        desired_location: desired.clone(),
        ..Default::default()
    };
    let mut truth_basic = surface_basic.clone();
    if show_age {
        surface_basic.age = age.to_string();
        truth_basic.age = age.to_string();
    }
    if show_born {
        surface_basic.born = style.render(birth_year, Some(birth_month));
        truth_basic.born = canonical(birth_year, Some(birth_month));
    }

    let mut header_lines = vec![name.clone(), format!("Email: {email} | Phone: {phone}")];
    let mut personal = Vec::new();
    if !gender.is_empty() {
        personal.push(format!("Gender: {gender}"));
    }
    if show_age {
        personal.push(format!("Age: {age}"));
    }
    if show_born {
        personal.push(format!("Born: {}", surface_basic.born));
    }
    if !personal.is_empty() {
        header_lines.push(personal.join(" | "));
    }
    let mut place = vec![format!("Location: {current}")];
    if !origin.is_empty() {
        place.push(format!("Hometown: {origin}"));
    }
    header_lines.push(place.join(" | "));
    header_lines.push(format!("Job Intention: {intention} | Desired: {}", desired.join(", ")));

    // Education, chronological, consecutive degrees.
    let degrees = ["Bachelor", "Master", "PhD"];
    let durations = [4u32, 3, 4];
    let n_edu = rng.random_range(1..4).min(pools.schools.len());
    let schools = pick_distinct(rng, &pools.schools, n_edu);
    let year_only = rng.random_bool(0.3);
    let mut year = rng.random_range(pools.start_years.0..=pools.start_years.1) as u32;
    let mut edu_surface = Vec::new();
    let mut edu_truth = Vec::new();
    for (i, school) in schools.iter().enumerate() {
        let (start, end) = (year, year + durations[i]);
        year = end;
        let (sm, em) = if year_only { (None, None) } else { (Some(9u8), Some(6u8)) };
        let location = if rng.random_bool(0.6) { pick(rng, &pools.cities).to_string() } else { String::new() };
        let major = pick(rng, &pools.majors).to_string();
        let s = EducationEntry {
            school: school.to_string(),
            major: major.clone(),
            degree: degrees[i].to_string(),
            start_date: style.render(start as u16, sm),
            end_date: style.render(end as u16, em),
            location: location.clone(),
        };
        edu_truth.push(EducationEntry {
            start_date: canonical(start as u16, sm),
            end_date: canonical(end as u16, em),
            ..s.clone()
        });
        edu_surface.push(s);
    }

    // Work, sampled chronologically and listed newest first.
    let n_work = rng.random_range(1..=max_work).min(pools.companies.len());
    let companies = pick_distinct(rng, &pools.companies, n_work);
    let sentence_ids = index::sample(rng, pools.sentences.len(), (n_work * 3).min(pools.sentences.len())).into_vec();
    let mut sentences = sentence_ids.into_iter().map(|i| pools.sentences[i].as_str());
    let mut month = year * 12 + 7 + rng.random_range(0..4);
    let mut works = Vec::new();
    let mut descriptions = Vec::new();
    for (i, company) in companies.iter().enumerate() {
        let start = month;
        let end = start + rng.random_range(6..40);
        month = end + rng.random_range(0..4);
        let ongoing = i + 1 == n_work && rng.random_bool(0.5);
        let suffix = pick(rng, &pools.company_suffixes);
        let position = pick(rng, &pools.positions).to_string();
        let location = if rng.random_bool(0.7) { pick(rng, &pools.cities).to_string() } else { String::new() };
        let n_sent = rng.random_range(1..4);
        let desc: Vec<&str> = sentences.by_ref().take(n_sent).collect();
        let (sy, sm) = ym(start);
        let (ey, em) = ym(end);
        let surface = WorkEntry {
            company: format!("{company}{suffix}"),
            position: position.clone(),
            start_date: style.render(sy, Some(sm)),
            end_date: if ongoing { present_surface.to_string() } else { style.render(ey, Some(em)) },
            location: location.clone(),
            description: String::new(),
            description_range: None,
        };
        let truth = WorkEntry {
            company: company.to_string(),
            start_date: canonical(sy, Some(sm)),
            end_date: if ongoing { NormalizedDate::Present.canonical() } else { canonical(ey, Some(em)) },
            ..surface.clone()
        };
        works.push((surface, truth));
        descriptions.push(desc.join(" "));
    }
    works.reverse();
    descriptions.reverse();
    let (work_surface, work_truth): (Vec<_>, Vec<_>) = works.into_iter().unzip();

    let (n_skills, n_langs) = (rng.random_range(6..13), rng.random_range(2..4));
    let skills = pick_distinct(rng, &pools.skills, n_skills).into_iter().map(String::from).collect();
    let languages = pick_distinct(rng, &pools.languages, n_langs).into_iter().map(String::from).collect();

    Content {
        surface: ResumeRecord { basic: surface_basic, education: edu_surface, work: work_surface },
        truth: ResumeRecord { basic: truth_basic, education: edu_truth, work: work_truth },
        header_lines,
        descriptions,
        skills,
        languages,
    }
}

/// A line before placement. `work` marks description lines.
struct DraftLine {
    text: String,
    work: Option<usize>,
}

fn plain(text: impl Into<String>) -> DraftLine {
    DraftLine { text: text.into(), work: None }
}

/// Blocks of lines for one section; blocks are separated by a gap.
fn section_blocks(section: Section, content: &Content, width: usize, linear: bool) -> Vec<Vec<DraftLine>> {
    let wrapped = |t: &str| wrap(t, width).into_iter().map(plain).collect::<Vec<_>>();
    let mut blocks = vec![vec![plain(section.heading())]];
    match section {
        Section::Work => {
            for (i, w) in content.surface.work.iter().enumerate() {
                let mut b = wrapped(&w.company);
                b.extend(wrapped(&w.position));
                let mut when = format!("{} - {}", w.start_date, w.end_date);
                if !w.location.is_empty() {
                    when = format!("{when} | {}", w.location);
                }
                b.extend(wrapped(&when));
                b.extend(wrap(&content.descriptions[i], width).into_iter().map(|t| DraftLine { text: t, work: Some(i) }));
                blocks.push(b);
            }
        }
        Section::Education => {
            for e in &content.surface.education {
                let mut b = wrapped(&e.school);
                b.extend(wrapped(&format!("{} | {}", e.degree, e.major)));
                let mut when = format!("{} - {}", e.start_date, e.end_date);
                if !e.location.is_empty() {
                    when = format!("{when} | {}", e.location);
                }
                b.extend(wrapped(&when));
                blocks.push(b);
            }
        }
        Section::Skills | Section::Languages => {
            let items = if section == Section::Skills { &content.skills } else { &content.languages };
            if linear {
                blocks[0].extend(wrapped(&items.join(", ")));
            } else {
                blocks[0].extend(items.iter().flat_map(|s| wrapped(s)));
            }
        }
    }
    blocks
}

struct Cursor {
    page: usize,
    y: f64,
    allow_break: bool,
    column: usize,
}

impl Cursor {
    fn place(&mut self, col: &Column, line: &DraftLine) -> Result<PlacedLine, SynthError> {
        if self.y + LINE_HEIGHT > BOTTOM {
            if !self.allow_break {
                return Err(SynthError::Overflow { column: self.column });
            }
            self.page += 1;
            self.y = TOP;
        }
        let width = (units(&line.text) as f64 * CHAR_WIDTH).min(col.x_max - col.x_min).max(CHAR_WIDTH);
        let bbox = BoundingBox { x_min: col.x_min, y_min: self.y, x_max: col.x_min + width, y_max: self.y + LINE_HEIGHT };
        self.y += LINE_PITCH;
        Ok(PlacedLine { text: line.text.clone(), page: self.page, bbox })
    }

    fn gap(&mut self, g: f64) {
        self.y += g - (LINE_PITCH - LINE_HEIGHT);
    }
}

fn noisy(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            'o' => '0',
            'l' => '1',
            'S' => '5',
            c => c,
        })
        .collect()
}

/// Builds one fixture. Same inputs always give the same fixture.
pub fn generate(seed: u64, template: &ResumeTemplate, pools: &ContentPools) -> Result<SynthFixture, SynthError> {
    template.validate()?;
    pools.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let content = sample_content(&mut rng, pools, template.max_work_entries);
    let linear = template.layout_kind == LayoutKind::Linear;

    let mut placed: Vec<(PlacedLine, Option<usize>)> = Vec::new();
    let mut cursor = Cursor { page: 0, y: TOP, allow_break: linear, column: 0 };
    for text in &content.header_lines {
        for t in wrap(text, template.header.max_units()) {
            placed.push((cursor.place(&template.header, &plain(t))?, None));
        }
    }
    cursor.gap(HEADER_GAP);
    let body_top = (cursor.page, cursor.y);

    for (ci, col) in template.columns.iter().enumerate() {
        let mut cur = Cursor { page: body_top.0, y: body_top.1, allow_break: linear, column: ci };
        let mut first = true;
        for (section, _) in template.slots.iter().filter(|(_, c)| *c == ci) {
            if !first {
                cur.gap(if linear { LINEAR_SECTION_GAP } else { BLOCK_GAP });
            }
            first = false;
            for (bi, block) in section_blocks(*section, &content, col.max_units(), linear).iter().enumerate() {
                if bi > 0 {
                    cur.gap(BLOCK_GAP);
                }
                for line in block {
                    placed.push((cur.place(col, line)?, line.work));
                }
            }
        }
    }

    let expected_lines: Vec<String> = placed.iter().map(|(p, _)| p.text.clone()).collect();
    let mut truth = content.truth.clone();
    let mut surface = content.surface.clone();
    for (i, (t, s)) in truth.work.iter_mut().zip(surface.work.iter_mut()).enumerate() {
        let idx: Vec<usize> = placed.iter().enumerate().filter(|(_, (_, w))| *w == Some(i)).map(|(k, _)| k).collect();
        let range = LineRange::new(idx[0], *idx.last().unwrap());
        let text = expected_lines[range.start..=range.end].join("\n");
        t.description = text.clone();
        t.description_range = Some(range);
        s.description = text;
        s.description_range = Some(range);
    }

    let prim = |p: &PlacedLine, source| TextPrimitive { text: p.text.clone(), bbox: p.bbox, page: p.page, source };
    let name_from_ocr = rng.random_bool(0.5);
    let mut metadata = Vec::new();
    let mut ocr = Vec::new();
    for (k, (p, _)) in placed.iter().enumerate() {
        if k == 0 && name_from_ocr {
            ocr.push(prim(p, Source::Ocr));
            continue;
        }
        metadata.push(prim(p, Source::Metadata));
        if rng.random_bool(0.2) {
            let b = p.bbox;
            let echo = BoundingBox { x_min: b.x_min + 1.0, y_min: b.y_min + 1.0, x_max: b.x_max + 1.0, y_max: b.y_max + 1.0 };
            ocr.push(TextPrimitive { text: noisy(&p.text), bbox: echo, page: p.page, source: Source::Ocr });
        }
    }
    metadata.shuffle(&mut rng);
    let primitives = fuse_content(&metadata, &ocr, DEFAULT_OVERLAP_THRESHOLD);
    let last_page = placed.iter().map(|(p, _)| p.page).max().unwrap_or(0);

    Ok(SynthFixture {
        seed,
        layout: template.layout_kind,
        pages: (0..=last_page).map(PageGeometry::a4).collect(),
        metadata,
        ocr,
        primitives,
        expected_lines,
        surface,
        truth,
    })
}

/// Layout used by [`generate_corpus`] for the `i`-th fixture of a mixed corpus.
pub fn mixed_layout(i: usize) -> LayoutKind {
    LayoutKind::ALL[i % LayoutKind::ALL.len()]
}

/// `count` fixtures with seeds `seed, seed + 1, ...`; `layout = None`
/// cycles through all layouts.
pub fn generate_corpus(
    count: usize,
    seed: u64,
    layout: Option<LayoutKind>,
    pools: &ContentPools,
) -> Result<Vec<SynthFixture>, SynthError> {
    (0..count)
        .map(|i| {
            let kind = layout.unwrap_or_else(|| mixed_layout(i));
            generate(seed.wrapping_add(i as u64), &ResumeTemplate::for_kind(kind), pools)
        })
        .collect()
}

/// Answers extraction prompts as a perfect reader of the printed resume.
///
/// Scalar values come from the printed record. Description pointers are
/// located in the document embedded in each prompt, so the answer reflects
/// whatever reading order produced that document.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    answers: ResumeRecord,
}

impl OracleBackend {
    pub fn new(surface: ResumeRecord) -> Self {
        OracleBackend { answers: surface }
    }

    pub fn for_fixture(fixture: &SynthFixture) -> Self {
        Self::new(fixture.surface.clone())
    }
}

/// Range of `desc` lines within `lines`: an exact contiguous run if one
/// exists, otherwise the span from the first line containing the first
/// description line to the next one containing the last.
pub fn locate_description(lines: &[String], desc: &[&str]) -> Option<LineRange> {
    let k = desc.len();
    if k == 0 || lines.len() < k {
        return None;
    }
    if let Some(s) = (0..=lines.len() - k).find(|&s| lines[s..s + k].iter().zip(desc).all(|(a, b)| a == b)) {
        return Some(LineRange::new(s, s + k - 1));
    }
    let start = lines.iter().position(|l| l.contains(desc[0]))?;
    let end = (start + k - 1..lines.len()).find(|&i| lines[i].contains(desc[k - 1]))?;
    Some(LineRange::new(start, end))
}

impl CompletionBackend for OracleBackend {
    fn complete(&self, prompt: &str, _config: &DecodeConfig) -> Result<String, BackendError> {
        let task = ExtractionTask::from_prompt(prompt).ok_or_else(|| BackendError::Protocol("unknown task".into()))?;
        let lines = prompt_document(prompt)
            .and_then(parse_rendered)
            .ok_or_else(|| BackendError::Protocol("prompt carries no indexed document".into()))?;
        let mut record = self.answers.clone();
        for w in &mut record.work {
            let desc: Vec<&str> = w.description.split('\n').collect();
            w.description_range = locate_description(&lines, &desc);
            if w.description_range.is_none() {
                w.description.clear();
            }
        }
        let body: Value = task_output_json(task, &record);
        Ok(format!("```json\n{}\n```", serde_json::to_string_pretty(&body).expect("serializable")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionSpec {
    DropEntity(usize),
    ShuffleEntities,
    PerturbDates(usize),
    HallucinateEntity,
    TruncateDescription(f64),
}

/// Signed change of the four evaluation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountDelta {
    pub e_gt: i64,
    pub e_pred: i64,
    pub e_align: i64,
    pub e_correct: i64,
}

impl CountDelta {
    pub fn apply(&self, c: Counts) -> Counts {
        let f = |base: u64, d: i64| (base as i64 + d) as u64;
        Counts {
            e_gt: f(c.e_gt, self.e_gt),
            e_pred: f(c.e_pred, self.e_pred),
            e_align: f(c.e_align, self.e_align),
            e_correct: f(c.e_correct, self.e_correct),
        }
    }
}

/// What a corruption injected, with the count changes it causes relative to
/// evaluating the truth against itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionManifest {
    pub spec: CorruptionSpec,
    pub injected: Vec<String>,
    /// Keyed by qualified field name.
    pub deltas: BTreeMap<String, CountDelta>,
}

impl CorruptionManifest {
    fn add(&mut self, field: String, f: impl FnOnce(&mut CountDelta)) {
        f(self.deltas.entry(field).or_default());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corrupted {
    pub record: ResumeRecord,
    pub manifest: CorruptionManifest,
}

fn shifted_year(canonical: &str) -> String {
    match Refiner::new(RefineConfig::default()).expect("default config").normalize_date(canonical) {
        NormalizedDate::YearMonth { year, month } => NormalizedDate::YearMonth { year: year + 1, month }.canonical(),
        NormalizedDate::YearOnly { year } => NormalizedDate::YearOnly { year: year + 1 }.canonical(),
        _ => NormalizedDate::YearMonth { year: 2000, month: 1 }.canonical(),
    }
}

/// Degrades the fixture's truth into a prediction. Deterministic in `seed`.
pub fn corrupt(fixture: &SynthFixture, spec: CorruptionSpec, seed: u64) -> Corrupted {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut record = fixture.truth.clone();
    let mut m = CorruptionManifest { spec, injected: Vec::new(), deltas: BTreeMap::new() };
    let work_field = |k: &str| format!("workExperience.{k}");
    match spec {
        CorruptionSpec::DropEntity(k) => {
            let n = record.work.len();
            let mut drop = index::sample(&mut rng, n, k.min(n)).into_vec();
            drop.sort_unstable();
            for &i in drop.iter().rev() {
                let w = record.work.remove(i);
                for (field, v) in w.fields() {
                    if !v.trim().is_empty() {
                        m.add(work_field(field), |d| {
                            d.e_pred -= 1;
                            d.e_align -= 1;
                            d.e_correct -= 1;
                        });
                    }
                }
                m.injected.push(format!("dropped workExperience[{i}] {:?}", w.company));
            }
        }
        CorruptionSpec::ShuffleEntities => {
            record.work.shuffle(&mut rng);
            record.education.shuffle(&mut rng);
            record.basic.desired_location.shuffle(&mut rng);
            m.injected.push("shuffled entity lists".into());
        }
        CorruptionSpec::PerturbDates(n) => {
            let mut slots: Vec<(bool, usize, &'static str)> = Vec::new();
            for (i, e) in record.education.iter().enumerate() {
                for (k, v) in [("startDate", &e.start_date), ("endDate", &e.end_date)] {
                    if !v.is_empty() {
                        slots.push((false, i, k));
                    }
                }
            }
            for (i, w) in record.work.iter().enumerate() {
                for (k, v) in [("startDate", &w.start_date), ("endDate", &w.end_date)] {
                    if !v.is_empty() {
                        slots.push((true, i, k));
                    }
                }
            }
            let chosen = index::sample(&mut rng, slots.len(), n.min(slots.len())).into_vec();
            for c in chosen {
                let (is_work, i, k) = slots[c];
                let (field, prefix) = if is_work {
                    let w = &mut record.work[i];
                    (if k == "startDate" { &mut w.start_date } else { &mut w.end_date }, "workExperience")
                } else {
                    let e = &mut record.education[i];
                    (if k == "startDate" { &mut e.start_date } else { &mut e.end_date }, "education")
                };
                let new = shifted_year(field);
                m.injected.push(format!("{prefix}[{i}].{k}: {field} -> {new}"));
                *field = new;
                m.add(format!("{prefix}.{k}"), |d| d.e_correct -= 1);
            }
        }
        CorruptionSpec::HallucinateEntity => {
            let ghost = WorkEntry {
                company: "Quillfeather Dynamics".into(),
                position: "Chief Imagination Officer".into(),
                start_date: "1990-01".into(),
                end_date: "1991-02".into(),
                location: "Atlantis".into(),
                description: "Invented a perpetual motion engine.".into(),
                description_range: None,
            };
            for (field, v) in ghost.fields() {
                if !v.is_empty() {
                    m.add(work_field(field), |d| d.e_pred += 1);
                }
            }
            let at = rng.random_range(0..=record.work.len());
            record.work.insert(at, ghost);
            m.injected.push(format!("hallucinated workExperience[{at}]"));
        }
        CorruptionSpec::TruncateDescription(frac) => {
            let frac = frac.clamp(0.0, 1.0);
            for (i, w) in record.work.iter_mut().enumerate() {
                let full = normalize(&w.description);
                if full.is_empty() {
                    continue;
                }
                let keep = (w.description.chars().count() as f64 * frac).ceil() as usize;
                let cut: String = w.description.chars().take(keep).collect();
                // A prefix stays a prefix after normalization, so the edit
                // distance is the length difference.
                let kept = normalize(&cut).chars().count();
                let similarity = kept as f64 / full.chars().count() as f64;
                if similarity < 0.9 {
                    m.add(work_field("description"), |d| d.e_correct -= 1);
                }
                m.injected.push(format!("workExperience[{i}].description kept {keep} chars"));
                w.description = cut;
                w.description_range = None;
            }
        }
    }
    Corrupted { record, manifest: m }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc_model::{BoundingBox, IndexedDocument};
    use crate::eval::{EvalConfig, Evaluator, FieldStatus};
    use crate::extract::{build_prompt, run_extraction};
    use crate::layout::{linearize, GeometricCutDetector, LayoutParams};

    fn fixture(seed: u64, kind: LayoutKind) -> SynthFixture {
        generate(seed, &ResumeTemplate::for_kind(kind), &ContentPools::default()).unwrap()
    }

    fn texts(doc: &IndexedDocument) -> Vec<String> {
        doc.lines().iter().map(|l| l.text.clone()).collect()
    }

    fn layout_of(f: &SynthFixture) -> IndexedDocument {
        linearize(&f.pages, &f.primitives, &GeometricCutDetector::default(), LayoutParams::default()).unwrap()
    }

    #[test]
    fn same_seed_is_byte_identical() {
        for kind in LayoutKind::ALL {
            let a = serde_json::to_string(&fixture(7, kind)).unwrap();
            let b = serde_json::to_string(&fixture(7, kind)).unwrap();
            assert_eq!(a, b);
        }
        assert_ne!(fixture(7, LayoutKind::Linear).truth, fixture(8, LayoutKind::Linear).truth);
    }

    #[test]
    fn empty_pool_is_rejected() {
        let pools = ContentPools { sentences: vec![], ..Default::default() };
        assert!(matches!(generate(1, &ResumeTemplate::linear(), &pools), Err(SynthError::EmptyPool("sentences"))));
    }

    #[test]
    fn narrow_column_gap_is_rejected() {
        let mut t = ResumeTemplate::two_column();
        t.columns[1].x_min = 290.0;
        assert!(matches!(t.validate(), Err(SynthError::InvalidTemplate(_))));
    }

    #[test]
    fn linear_expected_order_is_naive_sort() {
        for seed in 0..20 {
            let f = fixture(seed, LayoutKind::Linear);
            let mut prims = f.primitives.clone();
            prims.sort_by(|a, b| {
                a.page.cmp(&b.page).then(a.bbox.y_min.total_cmp(&b.bbox.y_min)).then(a.bbox.x_min.total_cmp(&b.bbox.x_min))
            });
            let sorted: Vec<String> = prims.into_iter().map(|p| p.text).collect();
            assert_eq!(sorted, f.expected_lines);
        }
    }

    #[test]
    fn every_layout_linearizes_to_expected_order() {
        for kind in LayoutKind::ALL {
            for seed in 0..40 {
                let f = fixture(seed, kind);
                assert_eq!(texts(&layout_of(&f)), f.expected_lines, "{kind:?} seed {seed}");
            }
        }
    }

    #[test]
    fn column_layouts_fit_on_one_page() {
        for kind in [LayoutKind::TwoColumn, LayoutKind::SidebarRight] {
            for seed in 0..300 {
                let f = fixture(seed, kind);
                assert_eq!(f.pages.len(), 1);
            }
        }
    }

    #[test]
    fn column_gap_is_at_least_thirty_points() {
        let f = fixture(3, LayoutKind::TwoColumn);
        let body: Vec<&BoundingBox> = f.primitives.iter().map(|p| &p.bbox).filter(|b| b.y_min > 130.0).collect();
        let left_max = body.iter().filter(|b| b.x_min < 300.0).map(|b| b.x_max).fold(0.0, f64::max);
        let right_min = body.iter().filter(|b| b.x_min >= 300.0).map(|b| b.x_min).fold(f64::INFINITY, f64::min);
        assert!(right_min - left_max >= 30.0);
    }

    #[test]
    fn surface_values_are_printed_and_truth_is_canonical() {
        let refiner = Refiner::new(RefineConfig::default()).unwrap();
        for kind in LayoutKind::ALL {
            for seed in 0..30 {
                let f = fixture(seed, kind);
                let page = f.expected_lines.join("\n");
                for w in &f.surface.work {
                    for v in [&w.company, &w.position, &w.start_date, &w.end_date, &w.location] {
                        assert!(page.contains(v.as_str()), "{v}");
                    }
                }
                for e in &f.surface.education {
                    for v in [&e.school, &e.major, &e.degree, &e.start_date, &e.end_date, &e.location] {
                        assert!(page.contains(v.as_str()), "{v}");
                    }
                }
                for (_, v) in f.surface.basic.scalar_fields() {
                    assert!(page.contains(v), "{v}");
                }
                for (s, t) in f.surface.work.iter().zip(&f.truth.work) {
                    assert_eq!(refiner.normalize_org(&s.company), t.company);
                    assert_eq!(refiner.normalize_date(&s.end_date).canonical(), t.end_date);
                }
            }
        }
    }

    #[test]
    fn truth_descriptions_are_expected_line_slices() {
        for kind in LayoutKind::ALL {
            let f = fixture(11, kind);
            for w in &f.truth.work {
                let r = w.description_range.unwrap();
                assert_eq!(w.description, f.expected_lines[r.start..=r.end].join("\n"));
            }
        }
    }

    #[test]
    fn fusion_drops_echoes_and_keeps_ocr_only_lines() {
        let mut saw_ocr_only = false;
        for seed in 0..20 {
            let f = fixture(seed, LayoutKind::Linear);
            assert_eq!(f.primitives.len(), f.expected_lines.len());
            saw_ocr_only |= f.primitives.iter().any(|p| p.source == Source::Ocr);
        }
        assert!(saw_ocr_only);
    }

    #[test]
    fn oracle_reproduces_truth_through_extraction() {
        for kind in LayoutKind::ALL {
            let f = fixture(5, kind);
            let doc = layout_of(&f);
            let outcome = run_extraction(&doc, &OracleBackend::for_fixture(&f), &DecodeConfig::default()).unwrap();
            assert!(outcome.failures.is_empty());
            let refined = Refiner::new(RefineConfig::default()).unwrap().refine(outcome.record, &doc);
            assert_eq!(refined.record, f.truth);
        }
    }

    #[test]
    fn oracle_rejects_foreign_prompts() {
        let f = fixture(1, LayoutKind::Linear);
        assert!(OracleBackend::for_fixture(&f).complete("hello", &DecodeConfig::default()).is_err());
        let doc = IndexedDocument::from_texts(&["x"]).unwrap();
        let prompt = build_prompt(ExtractionTask::WorkExperience, &doc).unwrap();
        let raw = OracleBackend::for_fixture(&f).complete(&prompt, &DecodeConfig::default()).unwrap();
        assert!(raw.contains("workExperience"));
    }

    #[test]
    fn locate_prefers_exact_runs() {
        let lines: Vec<String> = ["a b", "b", "x", "a b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(locate_description(&lines, &["a b", "c"]), Some(LineRange::new(3, 4)));
        assert_eq!(locate_description(&lines, &["a", "c"]), Some(LineRange::new(0, 4)));
        assert_eq!(locate_description(&lines, &["zzz"]), None);
    }

    fn eval_counts(gt: &ResumeRecord, pred: &ResumeRecord) -> Vec<crate::eval::FieldOutcome> {
        Evaluator::new(EvalConfig::default()).unwrap().evaluate_resume(gt, pred)
    }

    #[test]
    fn drop_one_of_four_work_entries() {
        let f = (0..200).map(|s| fixture(s, LayoutKind::Linear)).find(|f| f.truth.work.len() == 4).unwrap();
        let c = corrupt(&f, CorruptionSpec::DropEntity(1), 9);
        assert_eq!(c.record.work.len(), 3);
        let missed = eval_counts(&f.truth, &c.record).iter().filter(|o| o.status == FieldStatus::MissedGt).count() as i64;
        let predicted: i64 = c.manifest.deltas.values().map(|d| -d.e_align).sum();
        assert_eq!(missed, predicted);
        assert!((5..=6).contains(&missed));
    }

    #[test]
    fn hallucination_only_adds_spurious_fields() {
        let f = fixture(2, LayoutKind::TwoColumn);
        let c = corrupt(&f, CorruptionSpec::HallucinateEntity, 1);
        let out = eval_counts(&f.truth, &c.record);
        assert_eq!(out.iter().filter(|o| o.status == FieldStatus::Spurious).count(), 6);
        assert!(out.iter().filter(|o| o.status != FieldStatus::Spurious).all(|o| o.status == FieldStatus::Correct));
    }

    #[test]
    fn perturbed_dates_become_aligned_but_wrong() {
        let f = fixture(4, LayoutKind::SidebarRight);
        let c = corrupt(&f, CorruptionSpec::PerturbDates(2), 3);
        let wrong = eval_counts(&f.truth, &c.record).iter().filter(|o| o.status == FieldStatus::AlignedButWrong).count();
        assert_eq!(wrong, 2);
        assert_eq!(c.manifest.injected.len(), 2);
    }

    #[test]
    fn shifted_year_changes_every_kind() {
        assert_eq!(shifted_year("2019-03"), "2020-03");
        assert_eq!(shifted_year("2019"), "2020");
        assert_eq!(shifted_year("present"), "2000-01");
    }

    #[test]
    fn truncation_prediction_matches_evaluation() {
        for frac in [0.2, 0.85, 0.95, 1.0] {
            let f = fixture(6, LayoutKind::Linear);
            let c = corrupt(&f, CorruptionSpec::TruncateDescription(frac), 0);
            let wrong = eval_counts(&f.truth, &c.record).iter().filter(|o| o.status == FieldStatus::AlignedButWrong).count() as i64;
            let predicted: i64 = c.manifest.deltas.values().map(|d| -d.e_correct).sum();
            assert_eq!(wrong, predicted, "frac {frac}");
        }
    }

    #[test]
    fn wrap_respects_width() {
        let lines = wrap("aaa bbb ccc ddd", 7);
        assert_eq!(lines, vec!["aaa bbb", "ccc ddd"]);
        assert_eq!(wrap("", 5), Vec::<String>::new());
        assert_eq!(wrap("toolongword x", 4), vec!["toolongword", "x"]);
    }
}
