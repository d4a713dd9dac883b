//! Pipeline integration tests against the fake toolchain and the stub judge
//! endpoint: gating, mode behavior, abort, and resume.

mod common;

use std::path::Path;
use std::sync::atomic::Ordering;

use common::{fake_toolchain, spawn_judge, stub_case, StubJudge, StubReply};
use probejudge::corpus::{IssueKind, TestCase};
use probejudge::error::Error;
use probejudge::judge::{JudgeConfig, PromptStyle, PromptVariant};
use probejudge::metrics::Validity;
use probejudge::pipeline::{
    self, JudgeLabelConfig, PipelineConfig, PipelineMode, StageReached,
};

fn judge_label(endpoint: &str) -> JudgeLabelConfig {
    JudgeLabelConfig {
        label: "j".into(),
        style: PromptStyle::builtin(PromptVariant::DirectAgent),
        config: JudgeConfig {
            endpoint: endpoint.to_string(),
            retries: 0,
            ..JudgeConfig::default()
        },
    }
}

fn pipeline_config(mode: PipelineMode, endpoint: &str, log: &Path) -> PipelineConfig {
    PipelineConfig {
        mode,
        compile_workers: 1,
        execute_workers: 1,
        judge_workers: 1,
        judges: vec![judge_label(endpoint)],
        record_log: log.to_path_buf(),
    }
}

/// Judge that says valid exactly when the prompt carries JUDGE_VALID.
fn marker_judge() -> StubJudge {
    spawn_judge(|_, prompt| {
        if prompt.contains("JUDGE_VALID") {
            StubReply::Content("Reviewed. FINAL JUDGEMENT: valid".into())
        } else {
            StubReply::Content("Reviewed. FINAL JUDGEMENT: invalid".into())
        }
    })
}

fn mixed_suite() -> Vec<TestCase> {
    vec![
        stub_case("a.c", IssueKind::RemovedOpeningBracket, "COMPILE_FAIL"),
        stub_case("b.c", IssueKind::UndeclaredVariable, "RUN_FAIL"),
        stub_case("c.c", IssueKind::NoIssue, "JUDGE_VALID"),
        stub_case("d.c", IssueKind::ReplacedWithGeneratedCode, "nothing special"),
    ]
}

#[test]
fn early_exit_gates_and_skips_the_judge() {
    let dir = tempfile::tempdir().unwrap();
    let tc = fake_toolchain(dir.path(), None);
    let judge = marker_judge();
    let log = dir.path().join("records.jsonl");
    let pc = pipeline_config(PipelineMode::EarlyExit, &judge.endpoint, &log);

    let records = pipeline::run_pipeline(&mixed_suite(), &tc, &pc).unwrap();
    assert_eq!(records.len(), 4);
    // only the two compile+run clean files ever reached the judge
    assert_eq!(judge.hits.load(Ordering::SeqCst), 2);

    let by_id: std::collections::BTreeMap<_, _> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();
    let a = by_id["a.c"];
    assert_eq!(a.stage_reached, StageReached::Compile);
    assert!(a.run.is_none());
    assert!(a.verdicts.is_empty());
    assert_eq!(a.pipeline_verdict["j"], Validity::Invalid);

    let b = by_id["b.c"];
    assert_eq!(b.stage_reached, StageReached::Execute);
    assert_eq!(b.run.as_ref().unwrap().return_code, 7);
    assert!(b.verdicts.is_empty());
    assert_eq!(b.pipeline_verdict["j"], Validity::Invalid);

    let c = by_id["c.c"];
    assert_eq!(c.stage_reached, StageReached::Judge);
    assert_eq!(c.pipeline_verdict["j"], Validity::Valid);

    let d = by_id["d.c"];
    assert_eq!(d.pipeline_verdict["j"], Validity::Invalid);
}

#[test]
fn full_trace_judges_everything_with_identical_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let tc = fake_toolchain(dir.path(), None);
    let judge = marker_judge();

    let early_log = dir.path().join("early.jsonl");
    let early = pipeline::run_pipeline(
        &mixed_suite(),
        &tc,
        &pipeline_config(PipelineMode::EarlyExit, &judge.endpoint, &early_log),
    )
    .unwrap();
    let hits_after_early = judge.hits.load(Ordering::SeqCst);

    let full_log = dir.path().join("full.jsonl");
    let full = pipeline::run_pipeline(
        &mixed_suite(),
        &tc,
        &pipeline_config(PipelineMode::FullTrace, &judge.endpoint, &full_log),
    )
    .unwrap();
    // full-trace judges all four files, including the compile failure
    assert_eq!(judge.hits.load(Ordering::SeqCst) - hits_after_early, 4);

    for (e, f) in early.iter().zip(&full) {
        assert_eq!(e.id, f.id);
        assert_eq!(e.pipeline_verdict, f.pipeline_verdict, "case {}", e.id);
        assert_eq!(f.stage_reached, StageReached::Judge);
        assert!(f.run.is_some());
    }
    // the compile-failed file carries the synthesized skipped-run outcome
    let a = full.iter().find(|r| r.id == "a.c").unwrap();
    assert_eq!(a.run.as_ref().unwrap().return_code, -1);
    assert!(a.run.as_ref().unwrap().stderr.contains("execution skipped"));
}

#[test]
fn record_log_round_trips_through_read_log() {
    let dir = tempfile::tempdir().unwrap();
    let tc = fake_toolchain(dir.path(), None);
    let judge = marker_judge();
    let log = dir.path().join("records.jsonl");
    let pc = pipeline_config(PipelineMode::EarlyExit, &judge.endpoint, &log);
    let records = pipeline::run_pipeline(&mixed_suite(), &tc, &pc).unwrap();

    let (mode, labels, read_back) = pipeline::read_log(&log).unwrap();
    assert_eq!(mode, PipelineMode::EarlyExit);
    assert_eq!(labels, vec!["j".to_string()]);
    assert_eq!(read_back.len(), records.len());
    let mut ids: Vec<_> = read_back.iter().map(|r| r.id.clone()).collect();
    ids.sort();
    assert_eq!(ids, vec!["a.c", "b.c", "c.c", "d.c"]);
}

#[test]
fn judge_failure_aborts_with_partial_log_then_resume_completes() {
    let dir = tempfile::tempdir().unwrap();
    let invocations = dir.path().join("invocations.log");
    let tc = fake_toolchain(dir.path(), Some(&invocations));
    let log = dir.path().join("records.jsonl");

    // all six files compile and run clean, so each needs a judge call
    let suite: Vec<TestCase> = (0..6)
        .map(|i| stub_case(&format!("t{i}.c"), IssueKind::NoIssue, "JUDGE_VALID"))
        .collect();

    // first three requests succeed, then the endpoint turns into a hard 400
    let flaky = spawn_judge(|n, _| {
        if n < 3 {
            StubReply::Content("FINAL JUDGEMENT: valid".into())
        } else {
            StubReply::Status(400, "{\"error\": \"bad request\"}".into())
        }
    });
    let pc = pipeline_config(PipelineMode::EarlyExit, &flaky.endpoint, &log);
    let err = pipeline::run_pipeline(&suite, &tc, &pc).unwrap_err();
    let completed = match err {
        Error::Aborted { completed, .. } => completed,
        other => panic!("expected abort, got {other:?}"),
    };
    let (_, _, partial) = pipeline::read_log(&log).unwrap();
    assert_eq!(partial.len(), completed);
    assert!(completed >= 3 && completed < 6);
    let done_ids: Vec<String> = partial.iter().map(|r| r.id.clone()).collect();

    // resume against a healthy endpoint with the same label
    let healthy = spawn_judge(|_, _| StubReply::Content("FINAL JUDGEMENT: valid".into()));
    let pc2 = pipeline_config(PipelineMode::EarlyExit, &healthy.endpoint, &log);
    let all = pipeline::resume(&log, &suite, &tc, &pc2).unwrap();
    assert_eq!(all.len(), 6);
    let mut ids: Vec<_> = all.iter().map(|r| r.id.clone()).collect();
    ids.dedup();
    assert_eq!(ids.len(), 6, "no duplicate records after resume");

    // files that made it into the log were never recompiled
    let log_text = std::fs::read_to_string(&invocations).unwrap();
    for id in &done_ids {
        let marker = format!("// id:{id}");
        let n = log_text.lines().filter(|l| *l == marker).count();
        assert_eq!(n, 1, "case {id} compiled more than once");
    }
}

#[test]
fn resume_rejects_mode_and_label_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let tc = fake_toolchain(dir.path(), None);
    let judge = marker_judge();
    let log = dir.path().join("records.jsonl");
    let pc = pipeline_config(PipelineMode::EarlyExit, &judge.endpoint, &log);
    let suite = vec![stub_case("x.c", IssueKind::NoIssue, "JUDGE_VALID")];
    pipeline::run_pipeline(&suite, &tc, &pc).unwrap();

    let mut wrong_mode = pc.clone();
    wrong_mode.mode = PipelineMode::FullTrace;
    assert!(matches!(
        pipeline::resume(&log, &suite, &tc, &wrong_mode),
        Err(Error::Config(_))
    ));

    let mut wrong_label = pc.clone();
    wrong_label.judges[0].label = "other".into();
    assert!(matches!(
        pipeline::resume(&log, &suite, &tc, &wrong_label),
        Err(Error::LabelMismatch { .. })
    ));
}

#[test]
fn empty_suite_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let tc = fake_toolchain(dir.path(), None);
    let judge = marker_judge();
    let log = dir.path().join("records.jsonl");
    let pc = pipeline_config(PipelineMode::EarlyExit, &judge.endpoint, &log);
    assert!(matches!(
        pipeline::run_pipeline(&[], &tc, &pc),
        Err(Error::Input(_))
    ));
}
