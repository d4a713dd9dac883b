//! The staged validation pipeline: compile -> execute -> judge with per-stage
//! worker pools, bounded hand-off queues, an append-only record log, and
//! crash resumption. Early-exit mode stops a file at its first failing stage;
//! full-trace mode runs everything and computes the pipeline verdict
//! retroactively by the same gating law.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use chrono::{DateTime, Utc};
use crossbeam_channel::{bounded, unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};

use crate::corpus::{IssueKind, TestCase};
use crate::error::{Error, Result};
use crate::judge::{render_prompt, JudgeClient, JudgeConfig, PromptStyle, Verdict, VerdictValue};
use crate::metrics::{ground_truth, Validity};
use crate::toolchain::{self, ToolOutcome, ToolStep, ToolchainConfig};

pub const RECORD_SCHEMA: &str = "probejudge-records-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    EarlyExit,
    FullTrace,
}

impl std::str::FromStr for PipelineMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "early-exit" => Ok(PipelineMode::EarlyExit),
            "full-trace" => Ok(PipelineMode::FullTrace),
            other => Err(Error::Input(format!("unknown pipeline mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageReached {
    Compile,
    Execute,
    Judge,
}

/// The full per-file trace: tool outcomes, judge transcripts, and the gated
/// pipeline verdict per judge configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub id: String,
    pub issue: IssueKind,
    pub stage_reached: StageReached,
    pub compile: Option<ToolOutcome>,
    pub run: Option<ToolOutcome>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub pipeline_verdict: BTreeMap<String, Validity>,
    pub ground_truth: Validity,
    /// Labels whose judge response failed the FINAL JUDGEMENT protocol; their
    /// pipeline verdict is Invalid.
    pub indeterminate_labels: Vec<String>,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
}

/// One judge configuration the pipeline runs per file.
#[derive(Debug, Clone)]
pub struct JudgeLabelConfig {
    pub label: String,
    pub style: PromptStyle,
    pub config: JudgeConfig,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub compile_workers: usize,
    pub execute_workers: usize,
    pub judge_workers: usize,
    pub judges: Vec<JudgeLabelConfig>,
    pub record_log: PathBuf,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        for (n, name) in [
            (self.compile_workers, "compile_workers"),
            (self.execute_workers, "execute_workers"),
            (self.judge_workers, "judge_workers"),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.judges.is_empty() {
            return Err(Error::Config("at least one judge configuration is required".into()));
        }
        let mut seen = BTreeSet::new();
        for j in &self.judges {
            if !seen.insert(&j.label) {
                return Err(Error::Config(format!("duplicate judge label `{}`", j.label)));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.judges.iter().map(|j| j.label.clone()).collect()
    }
}

/// The gating law: a compile or run failure is Invalid regardless of any
/// judge verdict; otherwise the judge decides, with Indeterminate mapped to
/// Invalid.
fn gate(compile: &ToolOutcome, run: Option<&ToolOutcome>, verdict: Option<&Verdict>) -> Validity {
    if compile.return_code != 0 {
        return Validity::Invalid;
    }
    match run {
        Some(r) if r.return_code == 0 => {}
        _ => return Validity::Invalid,
    }
    match verdict.map(|v| v.value) {
        Some(VerdictValue::Valid) => Validity::Valid,
        _ => Validity::Invalid,
    }
}

/// Placeholder run outcome for full-trace files whose compilation produced no
/// binary; lets agent prompts still render with both tool sections.
fn skipped_run_outcome() -> ToolOutcome {
    ToolOutcome {
        step: ToolStep::Execute,
        return_code: -1,
        stdout: String::new(),
        stderr: "execution skipped: compilation produced no binary".into(),
        duration_ms: 0,
        timed_out: false,
    }
}

#[derive(Serialize, Deserialize)]
struct LogHeader {
    schema: String,
    mode: PipelineMode,
    labels: Vec<String>,
}

/// Parse a record log: header line, then one record per line.
pub fn read_log(path: &Path) -> Result<(PipelineMode, Vec<String>, Vec<EvaluationRecord>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, first) = lines.next().ok_or(Error::RecordLogParse {
        line: 1,
        message: "empty log".into(),
    })?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: LogHeader = serde_json::from_str(&first).map_err(|e| Error::RecordLogParse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.schema != RECORD_SCHEMA {
        return Err(Error::RecordLogParse {
            line: 1,
            message: format!("unknown schema `{}`", header.schema),
        });
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EvaluationRecord =
            serde_json::from_str(&line).map_err(|e| Error::RecordLogParse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok((header.mode, header.labels, records))
}

/// Run the full pipeline over a suite, starting a fresh record log.
pub fn run_pipeline(
    suite: &[TestCase],
    tc: &ToolchainConfig,
    pc: &PipelineConfig,
) -> Result<Vec<EvaluationRecord>> {
    if suite.is_empty() {
        return Err(Error::Input("suite is empty".into()));
    }
    tc.validate()?;
    pc.validate()?;
    run_stages(suite.to_vec(), tc, pc, Vec::new(), true)
}

/// Resume a partially completed run: already-logged case ids are skipped and
/// never touch the toolchain or judge again.
pub fn resume(
    log_path: &Path,
    suite: &[TestCase],
    tc: &ToolchainConfig,
    pc: &PipelineConfig,
) -> Result<Vec<EvaluationRecord>> {
    tc.validate()?;
    pc.validate()?;
    let (mode, labels, existing) = read_log(log_path)?;
    if mode != pc.mode {
        return Err(Error::Config(format!(
            "log was produced in {mode:?} mode but config requests {:?}",
            pc.mode
        )));
    }
    let config_labels = pc.labels();
    if labels != config_labels {
        return Err(Error::LabelMismatch {
            log_labels: labels,
            config_labels,
        });
    }
    let done: BTreeSet<&str> = existing.iter().map(|r| r.id.as_str()).collect();
    let remaining: Vec<TestCase> = suite
        .iter()
        .filter(|c| !done.contains(c.id.as_str()))
        .cloned()
        .collect();
    run_stages(remaining, tc, pc, existing, false)
}

struct CompiledItem {
    case: TestCase,
    compile: ToolOutcome,
    binary: Option<PathBuf>,
    // keeps the binary's directory alive through the execute stage
    _workdir: Option<tempfile::TempDir>,
    started: DateTime<Utc>,
}

struct ExecutedItem {
    case: TestCase,
    compile: ToolOutcome,
    run: ToolOutcome,
    started: DateTime<Utc>,
}

struct Abort {
    flag: AtomicBool,
    cause: Mutex<Option<Error>>,
}

impl Abort {
    fn new() -> Self {
        Abort {
            flag: AtomicBool::new(false),
            cause: Mutex::new(None),
        }
    }

    fn raised(&self) -> bool {
        self.flag.load(Ordering::SeqCst)
    }

    fn raise(&self, err: Error) {
        let mut cause = self.cause.lock().unwrap();
        if cause.is_none() {
            *cause = Some(err);
        }
        self.flag.store(true, Ordering::SeqCst);
    }
}

fn send_or_abort<T>(tx: &Sender<T>, mut item: T, abort: &Abort) -> bool {
    loop {
        if abort.raised() {
            return false;
        }
        match tx.send_timeout(item, Duration::from_millis(50)) {
            Ok(()) => return true,
            Err(crossbeam_channel::SendTimeoutError::Timeout(back)) => item = back,
            Err(crossbeam_channel::SendTimeoutError::Disconnected(_)) => return false,
        }
    }
}

fn run_stages(
    todo: Vec<TestCase>,
    tc: &ToolchainConfig,
    pc: &PipelineConfig,
    existing: Vec<EvaluationRecord>,
    fresh_log: bool,
) -> Result<Vec<EvaluationRecord>> {
    let labels = pc.labels();
    let mut log = OpenOptions::new()
        .create(true)
        .append(!fresh_log)
        .truncate(fresh_log)
        .write(true)
        .open(&pc.record_log)
        .map_err(|e| Error::io(&pc.record_log, e))?;
    if fresh_log {
        let header = LogHeader {
            schema: RECORD_SCHEMA.to_string(),
            mode: pc.mode,
            labels: labels.clone(),
        };
        writeln!(log, "{}", serde_json::to_string(&header).expect("header serializes"))
            .map_err(|e| Error::io(&pc.record_log, e))?;
    }

    // judge clients are shared across judge workers; admission control lives
    // in the client itself
    let mut clients = Vec::new();
    for j in &pc.judges {
        clients.push((j.label.clone(), j.style.clone(), JudgeClient::new(j.config.clone())?));
    }
    let clients = &clients;

    let abort = Abort::new();
    let abort = &abort;
    let mode = pc.mode;

    let (work_tx, work_rx) = bounded::<TestCase>(2 * pc.compile_workers);
    let (exec_tx, exec_rx) = bounded::<CompiledItem>(2 * pc.execute_workers);
    let (judge_tx, judge_rx) = bounded::<ExecutedItem>(2 * pc.judge_workers);
    let (done_tx, done_rx) = unbounded::<EvaluationRecord>();

    let mut new_records: Vec<EvaluationRecord> = Vec::new();
    std::thread::scope(|scope| {
        // feeder
        scope.spawn({
            let work_tx = work_tx.clone();
            move || {
                for case in todo {
                    if !send_or_abort(&work_tx, case, abort) {
                        break;
                    }
                }
            }
        });
        drop(work_tx);

        for _ in 0..pc.compile_workers {
            let work_rx: Receiver<TestCase> = work_rx.clone();
            let exec_tx = exec_tx.clone();
            let done_tx = done_tx.clone();
            let labels = labels.clone();
            scope.spawn(move || {
                for case in work_rx.iter() {
                    if abort.raised() {
                        break;
                    }
                    let started = Utc::now();
                    let result = match toolchain::compile(&case, tc) {
                        Ok(r) => r,
                        Err(e) => {
                            abort.raise(e);
                            break;
                        }
                    };
                    let failed = result.outcome.return_code != 0;
                    if failed && mode == PipelineMode::EarlyExit {
                        let record = finalize_record(
                            case,
                            StageReached::Compile,
                            result.outcome,
                            None,
                            BTreeMap::new(),
                            &labels,
                            started,
                        );
                        if !send_or_abort(&done_tx, record, abort) {
                            break;
                        }
                        continue;
                    }
                    let item = CompiledItem {
                        case,
                        compile: result.outcome,
                        binary: result.binary,
                        _workdir: Some(result.workdir),
                        started,
                    };
                    if !send_or_abort(&exec_tx, item, abort) {
                        break;
                    }
                }
            });
        }
        drop(exec_tx);

        for _ in 0..pc.execute_workers {
            let exec_rx = exec_rx.clone();
            let judge_tx = judge_tx.clone();
            let done_tx = done_tx.clone();
            let labels = labels.clone();
            scope.spawn(move || {
                for item in exec_rx.iter() {
                    if abort.raised() {
                        break;
                    }
                    let run = match &item.binary {
                        Some(binary) => match toolchain::execute(binary, tc) {
                            Ok(outcome) => outcome,
                            Err(e) => {
                                abort.raise(e);
                                break;
                            }
                        },
                        None => skipped_run_outcome(),
                    };
                    let failed = run.return_code != 0;
                    if failed && mode == PipelineMode::EarlyExit {
                        let record = finalize_record(
                            item.case,
                            StageReached::Execute,
                            item.compile,
                            Some(run),
                            BTreeMap::new(),
                            &labels,
                            item.started,
                        );
                        if !send_or_abort(&done_tx, record, abort) {
                            break;
                        }
                        continue;
                    }
                    let next = ExecutedItem {
                        case: item.case,
                        compile: item.compile,
                        run,
                        started: item.started,
                    };
                    if !send_or_abort(&judge_tx, next, abort) {
                        break;
                    }
                }
            });
        }
        drop(judge_tx);

        for _ in 0..pc.judge_workers {
            let judge_rx = judge_rx.clone();
            let done_tx = done_tx.clone();
            let labels = labels.clone();
            scope.spawn(move || {
                for item in judge_rx.iter() {
                    if abort.raised() {
                        break;
                    }
                    let mut verdicts = BTreeMap::new();
                    let mut failed = false;
                    for (label, style, client) in clients {
                        let prompt = match render_prompt(
                            style,
                            &item.case,
                            Some(&item.compile),
                            Some(&item.run),
                        ) {
                            Ok(p) => p,
                            Err(e) => {
                                abort.raise(e);
                                failed = true;
                                break;
                            }
                        };
                        match client.query(&prompt) {
                            Ok(response) => {
                                verdicts
                                    .insert(label.clone(), crate::judge::parse_verdict(&response, style));
                            }
                            Err(e) => {
                                abort.raise(e);
                                failed = true;
                                break;
                            }
                        }
                    }
                    if failed {
                        break;
                    }
                    let record = finalize_record(
                        item.case,
                        StageReached::Judge,
                        item.compile,
                        Some(item.run),
                        verdicts,
                        &labels,
                        item.started,
                    );
                    if !send_or_abort(&done_tx, record, abort) {
                        break;
                    }
                }
            });
        }
        drop(done_tx);

        // single serialized log sink
        for record in done_rx.iter() {
            match serde_json::to_string(&record) {
                Ok(line) => {
                    if let Err(e) = writeln!(log, "{line}") {
                        abort.raise(Error::io(&pc.record_log, e));
                    }
                }
                Err(e) => abort.raise(Error::Config(format!("record serialization: {e}"))),
            }
            new_records.push(record);
        }
    });

    let _ = log.flush();
    if let Some(cause) = abort.cause.lock().unwrap().take() {
        return Err(Error::Aborted {
            completed: existing.len() + new_records.len(),
            log: pc.record_log.clone(),
            source: Box::new(cause),
        });
    }
    let mut all: Vec<EvaluationRecord> = existing.into_iter().chain(new_records).collect();
    all.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(all)
}

fn finalize_record(
    case: TestCase,
    stage_reached: StageReached,
    compile: ToolOutcome,
    run: Option<ToolOutcome>,
    verdicts: BTreeMap<String, Verdict>,
    labels: &[String],
    started: DateTime<Utc>,
) -> EvaluationRecord {
    let mut pipeline_verdict = BTreeMap::new();
    let mut indeterminate_labels = Vec::new();
    for label in labels {
        let verdict = verdicts.get(label);
        if matches!(verdict.map(|v| v.value), Some(VerdictValue::Indeterminate)) {
            indeterminate_labels.push(label.clone());
        }
        pipeline_verdict.insert(label.clone(), gate(&compile, run.as_ref(), verdict));
    }
    EvaluationRecord {
        ground_truth: ground_truth(case.issue),
        id: case.id,
        issue: case.issue,
        stage_reached,
        compile: Some(compile),
        run,
        verdicts,
        pipeline_verdict,
        indeterminate_labels,
        started,
        finished: Utc::now(),
    }
}
