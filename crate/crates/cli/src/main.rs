use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use resumeflow::doc_model::TextPrimitive;
use resumeflow::eval::{Accumulator, EvalConfig, Evaluator};
use resumeflow::extract::{run_extraction, CompletionBackend, HttpBackend, MockBackend};
use resumeflow::ingest::{compute_ocr_regions, fuse_content, read_primitives_jsonl, write_primitives_jsonl, RegionParams};
use resumeflow::layout::{linearize, ExternalDetector, NaiveSortDetector, SegmentDetector};
use resumeflow::pipeline::{pages_or_default, read_json, run_e2e, BackendKind, DetectorKind, PipelineConfig, PipelineError};
use resumeflow::refine::{RefineConfig, Refiner};
use resumeflow::synth::{generate_corpus, ContentPools, LayoutKind, OracleBackend};
use resumeflow::{IndexedDocument, ResumeRecord};

/// Marks errors caused by configuration rather than data.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Parser)]
#[command(name = "rf", version, about = "Layout-aware resume parsing pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Content intake.
    #[command(subcommand)]
    Ingest(IngestCommand),
    /// Reading-order reconstruction.
    #[command(subcommand)]
    Layout(LayoutCommand),
    /// Run the three extraction tasks against a backend.
    Extract(ExtractArgs),
    /// Ground, normalize, deduplicate and verify a record.
    Refine(RefineArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Generate synthetic fixtures.
    Synth(SynthArgs),
    /// Run the whole pipeline over a directory of resumes.
    E2e(E2eArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline TOML; `RF_*` environment variables override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl PipelineArgs {
    fn load(&self) -> Result<PipelineConfig> {
        PipelineConfig::load(self.config.as_deref()).map_err(config_error)
    }
}

#[derive(Subcommand)]
enum IngestCommand {
    /// Merge metadata and OCR primitives.
    Fuse {
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        ocr: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the pipeline config value.
        #[arg(long)]
        overlap: Option<f64>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Page areas without embedded text, where OCR should run.
    Regions {
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        pages: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        grid: f64,
        #[arg(long, default_value_t = 400.0)]
        min_area: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Geometric,
    External,
    Naive,
}

#[derive(Subcommand)]
enum LayoutCommand {
    /// Build the indexed document from fused primitives.
    Linearize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        pages: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        detector: Option<DetectorArg>,
        #[arg(long)]
        detector_url: Option<String>,
        /// Also write the `[i]: text` rendering.
        #[arg(long)]
        rendered: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Http,
    Mock,
    Oracle,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temp: Option<f64>,
    #[arg(long)]
    rep_penalty: Option<f64>,
    /// Mock response table (JSON keyed by task).
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Printed-values record answered by the oracle backend.
    #[arg(long)]
    oracle: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    doc: PathBuf,
    /// Refine settings (TOML, or JSON by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    audit: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Evaluation settings (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Linear,
    TwoColumn,
    Sidebar,
    Mixed,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = LayoutArg::Mixed)]
    layout: LayoutArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct E2eArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    inputs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Sort each page as one block instead of detecting segments.
    #[arg(long)]
    no_layout: bool,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
}

fn config_error(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow::Error::new(ConfigError(e.to_string()))
}

fn read_primitives(path: &Path) -> Result<Vec<TextPrimitive>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_primitives_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    read_json(path).map_err(anyhow::Error::msg)
}

fn write_json<T: serde::Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn read_records_jsonl(path: &Path) -> Result<Vec<ResumeRecord>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn ingest(cmd: IngestCommand) -> Result<()> {
    match cmd {
        IngestCommand::Fuse { metadata, ocr, out, overlap, pipeline } => {
            let overlap = match overlap {
                Some(v) => v,
                None => pipeline.load()?.overlap_threshold,
            };
            if !(0.0..=1.0).contains(&overlap) {
                return Err(config_error(format!("--overlap {overlap} outside [0, 1]")));
            }
            let meta = read_primitives(&metadata)?;
            let ocr = match ocr {
                Some(p) => read_primitives(&p)?,
                None => Vec::new(),
            };
            let fused = fuse_content(&meta, &ocr, overlap);
            let f = BufWriter::new(fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            write_primitives_jsonl(f, &fused)?;
            eprintln!("{} metadata + {} ocr -> {} primitives", meta.len(), ocr.len(), fused.len());
        }
        IngestCommand::Regions { metadata, pages, out, grid, min_area } => {
            let meta = read_primitives(&metadata)?;
            let pages = pages.map(|p| load_json(&p)).transpose()?;
            let params = RegionParams { grid_resolution: grid, min_area };
            let mut regions = Vec::new();
            for page in pages_or_default(pages, &meta) {
                let boxes: Vec<_> = meta.iter().filter(|p| p.page == page.page).map(|p| p.bbox).collect();
                regions.extend(compute_ocr_regions(&page, &boxes, params).map_err(config_error)?);
            }
            write_json(&out, &regions)?;
        }
    }
    Ok(())
}

fn layout(cmd: LayoutCommand) -> Result<()> {
    let LayoutCommand::Linearize { input, pages, out, detector, detector_url, rendered, pipeline } = cmd;
    let mut config = pipeline.load()?;
    match detector {
        Some(DetectorArg::Naive) => config.no_layout = true,
        Some(DetectorArg::External) => config.detector.kind = DetectorKind::External,
        Some(DetectorArg::Geometric) => config.detector.kind = DetectorKind::Geometric,
        None => {}
    }
    if detector_url.is_some() {
        config.detector.url = detector_url;
    }
    config.validate().map_err(config_error)?;
    let detector: Box<dyn SegmentDetector> = if config.no_layout {
        Box::new(NaiveSortDetector)
    } else if config.detector.kind == DetectorKind::External {
        Box::new(ExternalDetector::new(
            config.detector.url.clone().unwrap_or_default(),
            Duration::from_secs_f64(config.detector.timeout_secs),
        ))
    } else {
        Box::new(config.detector.geometric)
    };
    let prims = read_primitives(&input)?;
    let pages = pages_or_default(pages.map(|p| load_json(&p)).transpose()?, &prims);
    let doc = linearize(&pages, &prims, detector.as_ref(), config.layout)?;
    write_json(&out, &doc)?;
    if let Some(path) = rendered {
        fs::write(&path, resumeflow::doc_model::render_indexed(&doc))?;
    }
    eprintln!("{} lines", doc.len());
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let mut config = args.pipeline.load()?;
    if let Some(v) = args.endpoint {
        config.decode.endpoint = v;
    }
    if let Some(v) = args.model {
        config.decode.model = v;
    }
    if let Some(v) = args.temp {
        config.decode.temperature = v;
    }
    if let Some(v) = args.rep_penalty {
        config.decode.repetition_penalty = v;
    }
    config.decode.validate().map_err(config_error)?;
    let kind = match args.backend {
        Some(BackendArg::Http) => BackendKind::Http,
        Some(BackendArg::Mock) => BackendKind::Mock,
        Some(BackendArg::Oracle) => BackendKind::Oracle,
        None => config.backend.kind,
    };
    let backend: Box<dyn CompletionBackend> = match kind {
        BackendKind::Http => Box::new(HttpBackend::new(config.decode.timeout())),
        BackendKind::Mock => {
            let path = args.mock.or(config.backend.mock_file).ok_or_else(|| config_error("mock backend needs --mock"))?;
            Box::new(MockBackend::from_file(&path).map_err(config_error)?)
        }
        BackendKind::Oracle => {
            let path = args.oracle.ok_or_else(|| config_error("oracle backend needs --oracle"))?;
            Box::new(OracleBackend::new(load_json(&path)?))
        }
    };
    let doc: IndexedDocument = load_json(&args.input)?;
    let outcome = run_extraction(&doc, backend.as_ref(), &config.decode)?;
    for f in &outcome.failures {
        eprintln!("task {:?} failed after {} attempts: {}", f.task, f.attempts, f.message);
    }
    for w in &outcome.warnings {
        eprintln!("pointer warning for work entry {}: {}", w.work_index, w.message);
    }
    write_json(&args.out, &outcome.record)?;
    if !outcome.failures.is_empty() {
        bail!("{} extraction task(s) failed", outcome.failures.len());
    }
    Ok(())
}

fn refine(args: RefineArgs) -> Result<()> {
    let config = match &args.config {
        Some(p) => RefineConfig::from_path(p).map_err(config_error)?,
        None => PipelineConfig::load(None).map_err(config_error)?.refine,
    };
    let refiner = Refiner::new(config).map_err(config_error)?;
    let record: ResumeRecord = load_json(&args.input)?;
    let doc: IndexedDocument = load_json(&args.doc)?;
    let refined = refiner.refine(record, &doc);
    write_json(&args.out, &refined.record)?;
    if let Some(a) = &args.audit {
        write_json(a, &refined.audit)?;
    }
    eprintln!("{} audit entries", refined.audit.len());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let config = match &args.config {
        Some(p) => EvalConfig::from_toml_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .map_err(config_error)?,
        None => PipelineConfig::load(None).map_err(config_error)?.eval,
    };
    let evaluator = Evaluator::new(config).map_err(config_error)?;
    let gt = read_records_jsonl(&args.gt)?;
    let pred = read_records_jsonl(&args.pred)?;
    if gt.len() != pred.len() {
        bail!("{} ground-truth records but {} predictions", gt.len(), pred.len());
    }
    let mut acc = Accumulator::default();
    for (g, p) in gt.iter().zip(&pred) {
        acc.add_resume(&evaluator.evaluate_resume(g, p));
    }
    let report = acc.report();
    write_json(&args.report, &report)?;
    if let Some(csv) = &args.csv {
        fs::write(csv, report.to_csv())?;
    }
    let o = &report.overall;
    println!(
        "resumes={} precision={:.4} recall={:.4} f1={:.4} accuracy={:.4}",
        report.resumes, o.precision, o.recall, o.f1, o.accuracy
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let layout = match args.layout {
        LayoutArg::Linear => Some(LayoutKind::Linear),
        LayoutArg::TwoColumn => Some(LayoutKind::TwoColumn),
        LayoutArg::Sidebar => Some(LayoutKind::SidebarRight),
        LayoutArg::Mixed => None,
    };
    let fixtures = generate_corpus(args.count, args.seed, layout, &ContentPools::default())?;
    fs::create_dir_all(&args.out)?;
    let mut truth = BufWriter::new(fs::File::create(args.out.join("truth.jsonl"))?);
    for (i, f) in fixtures.iter().enumerate() {
        let dir = args.out.join(format!("resume-{i:04}"));
        f.write_to(&dir)?;
        let doc = IndexedDocument::from_texts(&f.expected_lines)?;
        write_json(&dir.join("indexed.json"), &doc)?;
        serde_json::to_writer(&mut truth, &f.truth)?;
        truth.write_all(b"\n")?;
    }
    truth.flush()?;
    eprintln!("wrote {} fixtures to {}", fixtures.len(), args.out.display());
    Ok(())
}

fn e2e(args: E2eArgs) -> Result<ExitCode> {
    let mut config = args.pipeline.load()?;
    if let Some(v) = args.inputs {
        config.inputs = v;
    }
    if let Some(v) = args.out {
        config.output = v;
    }
    if let Some(v) = args.workers {
        config.worker_count = v;
    }
    if args.no_layout {
        config.no_layout = true;
    }
    match args.backend {
        Some(BackendArg::Http) => config.backend.kind = BackendKind::Http,
        Some(BackendArg::Mock) => config.backend.kind = BackendKind::Mock,
        Some(BackendArg::Oracle) => config.backend.kind = BackendKind::Oracle,
        None => {}
    }
    let out = run_e2e(&config).map_err(|e| match e {
        PipelineError::Config(_) => config_error(e),
        other => anyhow::Error::new(other),
    })?;
    let m = &out.manifest;
    println!("resumes={} failed={} wall_ms={:.1}", m.entries.len(), m.failed(), m.wall_ms);
    for e in m.entries.iter().filter(|e| !e.failures.is_empty()) {
        eprintln!("{}: {:?}: {}", e.id, e.status, e.failures.join("; "));
    }
    if let Some(r) = &out.report {
        let o = &r.overall;
        println!("precision={:.4} recall={:.4} f1={:.4} accuracy={:.4}", o.precision, o.recall, o.f1, o.accuracy);
    }
    Ok(ExitCode::from(m.exit_code() as u8))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ingest(c) => ingest(c)?,
        Command::Layout(c) => layout(c)?,
        Command::Extract(a) => extract(a)?,
        Command::Refine(a) => refine(a)?,
        Command::Evaluate(a) => evaluate(a)?,
        Command::Synth(a) => synth(a)?,
        Command::E2e(a) => return e2e(a),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
