use resumeflow::doc_model::{IndexedDocument, LineRange};
use resumeflow::extract::{BasicInfo, ResumeRecord, WorkEntry};
use resumeflow::pipeline::{run_e2e, BackendKind, PipelineConfig, ResumeStatus, RunManifest};
use resumeflow::refine::{refine, Action, RefineConfig, Stage};
use resumeflow::synth::{generate_corpus, ContentPools};

#[test]
fn oracle_run_reproduces_truth_and_writes_outputs() {
    let inputs = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let fixtures = generate_corpus(10, 500, None, &ContentPools::default()).unwrap();
    for (i, f) in fixtures.iter().enumerate() {
        f.write_to(&inputs.path().join(format!("r{i:02}"))).unwrap();
    }
    let mut config = PipelineConfig { inputs: inputs.path().into(), output: out.path().into(), ..Default::default() };
    config.backend.kind = BackendKind::Oracle;
    let run = run_e2e(&config).unwrap();

    assert_eq!(run.manifest.exit_code(), 0);
    assert!(run.manifest.entries.iter().all(|e| e.status == ResumeStatus::Ok));
    for (i, f) in fixtures.iter().enumerate() {
        let dir = out.path().join(format!("r{i:02}"));
        let record: ResumeRecord = serde_json::from_str(&std::fs::read_to_string(dir.join("record.json")).unwrap()).unwrap();
        assert_eq!(record, f.truth, "r{i:02}");
        let doc: IndexedDocument = serde_json::from_str(&std::fs::read_to_string(dir.join("indexed.json")).unwrap()).unwrap();
        let texts: Vec<&str> = doc.lines().iter().map(|l| l.text.as_str()).collect();
        assert_eq!(texts, f.expected_lines);
    }
    let report = run.report.unwrap();
    for m in [report.micro, report.fields["workExperience.description"]] {
        assert_eq!((m.precision, m.recall, m.f1, m.accuracy), (1.0, 1.0, 1.0, 1.0));
    }
    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.entries.len(), 10);
    assert_eq!(manifest.config_hash, config.hash());
    assert!(out.path().join("report.json").is_file());
}

#[test]
fn duplicate_and_ungrounded_entries_are_dropped_with_audit() {
    let doc = IndexedDocument::from_texts(&[
        "Gu Dabai",
        "Acme Ltd. Analyst 2019.01 - 2020.03",
        "Built reports.",
        "Ran audits.",
    ])
    .unwrap();
    let real = WorkEntry {
        company: "Acme".into(),
        position: "Analyst".into(),
        start_date: "2019-01".into(),
        end_date: "2020-03".into(),
        location: String::new(),
        description: "Built reports.\nRan audits.".into(),
        description_range: Some(LineRange::new(2, 3)),
    };
    let ghost = WorkEntry {
        company: "Quillfeather Dynamics".into(),
        position: "Director".into(),
        description: String::new(),
        description_range: None,
        ..real.clone()
    };
    let record = ResumeRecord {
        basic: BasicInfo { name: "Gu Dabai".into(), ..Default::default() },
        education: vec![],
        work: vec![real.clone(), real.clone(), ghost],
    };
    let refined = refine(record, &doc, &RefineConfig::default()).unwrap();
    assert_eq!(refined.record.work, vec![real]);
    assert_eq!(refined.audit.len(), 2, "{:#?}", refined.audit);
    assert!(refined.audit.iter().all(|a| a.action == Action::Dropped));
    assert_eq!(refined.audit[0].stage, Stage::Deduplication);
    assert_eq!(refined.audit[1].stage, Stage::SourceVerification);
}
