//! Shared helpers for the integration tests: an in-process stub chat
//! endpoint, a fake shell toolchain, and record fixtures.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use chrono::Utc;
use probejudge::corpus::{IssueKind, Language, ProgrammingModel, TestCase};
use probejudge::judge::{Verdict, VerdictValue};
use probejudge::metrics::{ground_truth, Validity};
use probejudge::pipeline::{EvaluationRecord, StageReached};
use probejudge::toolchain::ToolchainConfig;

pub enum StubReply {
    /// 200 with this assistant message content.
    Content(String),
    /// Arbitrary HTTP status with a raw body.
    Status(u16, String),
}

pub struct StubJudge {
    pub endpoint: String,
    /// Total chat requests received so far.
    pub hits: Arc<AtomicUsize>,
}

/// Spawn a one-connection-at-a-time chat-completions stub. `respond` gets the
/// zero-based request index and the user prompt. The listener thread lives
/// until process exit.
pub fn spawn_judge<F>(respond: F) -> StubJudge
where
    F: Fn(usize, &str) -> StubReply + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub listener");
    let addr = listener.local_addr().unwrap();
    let hits = Arc::new(AtomicUsize::new(0));
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { break };
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let _ = handle(stream, n, &respond);
        }
    });
    StubJudge {
        endpoint: format!("http://{addr}/v1/chat/completions"),
        hits,
    }
}

fn handle<F: Fn(usize, &str) -> StubReply>(
    mut stream: TcpStream,
    n: usize,
    respond: &F,
) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut content_length = 0usize;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 {
            break;
        }
        let h = header.trim();
        if h.is_empty() {
            break;
        }
        if let Some(v) = h.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = v.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let prompt = serde_json::from_slice::<serde_json::Value>(&body)
        .ok()
        .and_then(|v| v["messages"][0]["content"].as_str().map(str::to_string))
        .unwrap_or_default();
    let (status_line, reply_body) = match respond(n, &prompt) {
        StubReply::Content(text) => (
            "200 OK".to_string(),
            serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": text}}]
            })
            .to_string(),
        ),
        StubReply::Status(code, body) => (format!("{code} Stub"), body),
    };
    write!(
        stream,
        "HTTP/1.1 {status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply_body}",
        reply_body.len()
    )?;
    stream.flush()
}

/// A shell-script toolchain. The "compiler" logs the first line of its input
/// to `$INVOCATION_LOG` (if set), fails on sources containing COMPILE_FAIL,
/// and otherwise emits a tiny script binary that exits 7 when the source
/// contained RUN_FAIL and 0 otherwise.
pub fn fake_toolchain(dir: &Path, invocation_log: Option<&Path>) -> ToolchainConfig {
    let cc = dir.join("fakecc");
    std::fs::write(
        &cc,
        "#!/bin/sh\n\
         if [ -n \"$INVOCATION_LOG\" ]; then head -n 1 \"$1\" >> \"$INVOCATION_LOG\"; fi\n\
         if grep -q COMPILE_FAIL \"$1\"; then echo 'stub compile error' >&2; exit 1; fi\n\
         if grep -q RUN_FAIL \"$1\"; then printf '#!/bin/sh\\nexit 7\\n' > \"$2\"; \
         else printf '#!/bin/sh\\nexit 0\\n' > \"$2\"; fi\n\
         chmod +x \"$2\"\n\
         exit 0\n",
    )
    .unwrap();
    let mut perms = std::fs::metadata(&cc).unwrap().permissions();
    std::os::unix::fs::PermissionsExt::set_mode(&mut perms, 0o755);
    std::fs::set_permissions(&cc, perms).unwrap();
    let mut cfg = ToolchainConfig {
        compile_template: format!("{} {{input}} {{output}}", cc.display()),
        run_template: "{binary}".into(),
        ..ToolchainConfig::default()
    };
    if let Some(log) = invocation_log {
        cfg.compile_env
            .push(("INVOCATION_LOG".into(), log.display().to_string()));
    }
    cfg
}

/// Build an in-memory case whose first source line carries the id, for the
/// fake compiler's invocation log. `markers` lands in a trailing comment.
pub fn stub_case(id: &str, issue: IssueKind, markers: &str) -> TestCase {
    TestCase {
        id: id.to_string(),
        language: Language::C,
        model: ProgrammingModel::OpenAcc,
        source: format!("// id:{id}\nint main() {{ return 0; }}\n// {markers}\n"),
        issue,
        origin: id.to_string(),
    }
}

/// Minimal scored record: `predicted` doubles as the judge verdict for label
/// "j" and the pipeline verdict.
pub fn record(id: &str, issue: IssueKind, predicted: Validity) -> EvaluationRecord {
    let verdict_value = match predicted {
        Validity::Valid => VerdictValue::Valid,
        Validity::Invalid => VerdictValue::Invalid,
    };
    let mut verdicts = BTreeMap::new();
    verdicts.insert(
        "j".to_string(),
        Verdict {
            value: verdict_value,
            marker_found: None,
            raw_response: String::new(),
        },
    );
    let mut pipeline_verdict = BTreeMap::new();
    pipeline_verdict.insert("j".to_string(), predicted);
    EvaluationRecord {
        id: id.to_string(),
        issue,
        stage_reached: StageReached::Judge,
        compile: None,
        run: None,
        verdicts,
        pipeline_verdict,
        ground_truth: ground_truth(issue),
        indeterminate_labels: Vec::new(),
        started: Utc::now(),
        finished: Utc::now(),
    }
}

/// Expand per-issue (count, correct) pairs, issue codes 0 through 5, into
/// individual records.
pub fn fixture(pairs: [(usize, usize); 6]) -> Vec<EvaluationRecord> {
    let mut records = Vec::new();
    for (code, (count, correct)) in pairs.iter().enumerate() {
        let issue = IssueKind::from_code(code as u8).unwrap();
        let truth = ground_truth(issue);
        let wrong = match truth {
            Validity::Valid => Validity::Invalid,
            Validity::Invalid => Validity::Valid,
        };
        for i in 0..*count {
            let predicted = if i < *correct { truth } else { wrong };
            records.push(record(&format!("i{code}-{i}"), issue, predicted));
        }
    }
    records
}
