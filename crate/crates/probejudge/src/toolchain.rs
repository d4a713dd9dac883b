//! External compile and execute steps: the "tools" whose outputs feed the
//! agent-based judge. Commands come from config templates; each file gets a
//! fresh working directory; streams are captured with a truncation cap and
//! timeouts kill the whole process group.

use std::fs;
use std::io::Read;
use std::os::unix::fs::PermissionsExt;
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::TestCase;
use crate::error::{Error, Result};

/// Return code recorded when a step is killed on timeout (same convention as
/// coreutils `timeout`).
pub const TIMEOUT_RETURN_CODE: i32 = 124;

pub const TRUNCATION_MARKER: &str = "\n[truncated]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToolStep {
    Compile,
    Execute,
}

/// Captured result of one compile or execute invocation. Signal deaths are
/// encoded as 128 + signal number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolOutcome {
    pub step: ToolStep,
    pub return_code: i32,
    pub stdout: String,
    pub stderr: String,
    pub duration_ms: u64,
    pub timed_out: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolchainConfig {
    /// Command template with `{input}` and `{output}`, split on whitespace.
    pub compile_template: String,
    /// Command template with `{binary}`, split on whitespace.
    pub run_template: String,
    pub compile_timeout_secs: u64,
    pub run_timeout_secs: u64,
    /// Per-stream capture cap in bytes; overflow is cut and marked.
    pub truncate_bytes: usize,
    /// Where per-file working directories are created; system temp if unset.
    pub scratch_root: Option<PathBuf>,
    #[serde(default)]
    pub compile_env: Vec<(String, String)>,
    #[serde(default)]
    pub run_env: Vec<(String, String)>,
}

impl Default for ToolchainConfig {
    fn default() -> Self {
        ToolchainConfig {
            compile_template: "cc {input} -o {output}".into(),
            run_template: "{binary}".into(),
            compile_timeout_secs: 60,
            run_timeout_secs: 10,
            truncate_bytes: 16 * 1024,
            scratch_root: None,
            compile_env: Vec::new(),
            run_env: Vec::new(),
        }
    }
}

fn count_placeholder(template: &str, placeholder: &str) -> usize {
    template.matches(placeholder).count()
}

impl ToolchainConfig {
    /// Validate at load time, before any process runs.
    pub fn validate(&self) -> Result<()> {
        for (template, name, required) in [
            (&self.compile_template, "compile_template", vec!["{input}", "{output}"]),
            (&self.run_template, "run_template", vec!["{binary}"]),
        ] {
            for ph in required {
                match count_placeholder(template, ph) {
                    1 => {}
                    0 => {
                        return Err(Error::Config(format!("{name} is missing placeholder {ph}")))
                    }
                    n => {
                        return Err(Error::Config(format!(
                            "{name} contains placeholder {ph} {n} times, expected once"
                        )))
                    }
                }
            }
        }
        if self.truncate_bytes == 0 {
            return Err(Error::Config("truncate_bytes must be positive".into()));
        }
        Ok(())
    }
}

/// Compile outcome plus the produced binary (present on return code 0). The
/// working directory guard keeps the binary alive until dropped.
#[derive(Debug)]
pub struct CompileResult {
    pub outcome: ToolOutcome,
    pub binary: Option<PathBuf>,
    pub workdir: tempfile::TempDir,
}

/// Materialize the case into a fresh working directory and run the
/// substituted compile command.
pub fn compile(case: &TestCase, cfg: &ToolchainConfig) -> Result<CompileResult> {
    let mut builder = tempfile::Builder::new();
    builder.prefix("probejudge-");
    let workdir = match &cfg.scratch_root {
        Some(root) => {
            fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
            builder.tempdir_in(root)
        }
        None => builder.tempdir(),
    }
    .map_err(|e| Error::io("<scratch>", e))?;

    let ext = Path::new(&case.id)
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("c");
    let input = workdir.path().join(format!("input.{ext}"));
    fs::write(&input, &case.source).map_err(|e| Error::io(&input, e))?;
    let output = workdir.path().join("test.bin");

    let argv: Vec<String> = cfg
        .compile_template
        .split_whitespace()
        .map(|tok| {
            tok.replace("{input}", &input.to_string_lossy())
                .replace("{output}", &output.to_string_lossy())
        })
        .collect();
    let outcome = run_command(
        &argv,
        ToolStep::Compile,
        Duration::from_secs(cfg.compile_timeout_secs),
        cfg.truncate_bytes,
        workdir.path(),
        &cfg.compile_env,
    )?;
    let binary = (outcome.return_code == 0 && output.is_file()).then_some(output);
    Ok(CompileResult {
        outcome,
        binary,
        workdir,
    })
}

/// Run a compiled binary under the configured timeout.
pub fn execute(binary: &Path, cfg: &ToolchainConfig) -> Result<ToolOutcome> {
    let meta = fs::metadata(binary)
        .map_err(|_| Error::Environment(format!("binary {} does not exist", binary.display())))?;
    if meta.permissions().mode() & 0o111 == 0 {
        return Err(Error::Environment(format!(
            "binary {} is not executable",
            binary.display()
        )));
    }
    let argv: Vec<String> = cfg
        .run_template
        .split_whitespace()
        .map(|tok| tok.replace("{binary}", &binary.to_string_lossy()))
        .collect();
    let cwd = binary.parent().unwrap_or_else(|| Path::new("."));
    run_command(
        &argv,
        ToolStep::Execute,
        Duration::from_secs(cfg.run_timeout_secs),
        cfg.truncate_bytes,
        cwd,
        &cfg.run_env,
    )
}

fn truncate_stream(mut bytes: Vec<u8>, cap: usize) -> String {
    if bytes.len() > cap {
        bytes.truncate(cap);
        let mut s = String::from_utf8_lossy(&bytes).into_owned();
        s.push_str(TRUNCATION_MARKER);
        s
    } else {
        String::from_utf8_lossy(&bytes).into_owned()
    }
}

fn run_command(
    argv: &[String],
    step: ToolStep,
    timeout: Duration,
    cap: usize,
    cwd: &Path,
    env: &[(String, String)],
) -> Result<ToolOutcome> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| Error::Config("empty command template".into()))?;
    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let start = Instant::now();
    let mut child = cmd.spawn().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Environment(format!("executable `{program}` not found"))
        } else {
            Error::Environment(format!("failed to spawn `{program}`: {e}"))
        }
    })?;

    let mut stdout_pipe = child.stdout.take().expect("piped stdout");
    let mut stderr_pipe = child.stderr.take().expect("piped stderr");
    let out_thread = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout_pipe.read_to_end(&mut buf);
        buf
    });
    let err_thread = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stderr_pipe.read_to_end(&mut buf);
        buf
    });

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| Error::io(program, e))? {
            break Some(status);
        }
        if start.elapsed() >= timeout {
            timed_out = true;
            // kill the whole group; offload runtimes may have forked
            unsafe {
                libc::killpg(child.id() as i32, libc::SIGKILL);
            }
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(10));
    };

    let stdout = truncate_stream(out_thread.join().unwrap_or_default(), cap);
    let stderr = truncate_stream(err_thread.join().unwrap_or_default(), cap);
    let duration_ms = start.elapsed().as_millis() as u64;
    let return_code = match (timed_out, status) {
        (true, _) => TIMEOUT_RETURN_CODE,
        (false, Some(status)) => status
            .code()
            .or_else(|| status.signal().map(|s| 128 + s))
            .unwrap_or(-1),
        (false, None) => -1,
    };
    Ok(ToolOutcome {
        step,
        return_code,
        stdout,
        stderr,
        duration_ms,
        timed_out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{IssueKind, Language, ProgrammingModel};

    fn c_case(source: &str) -> TestCase {
        TestCase {
            id: "t.c".into(),
            language: Language::C,
            model: ProgrammingModel::OpenAcc,
            source: source.into(),
            issue: IssueKind::NoIssue,
            origin: "t.c".into(),
        }
    }

    #[test]
    fn template_validation_catches_missing_placeholder() {
        let cfg = ToolchainConfig {
            compile_template: "cc -o {output}".into(),
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ToolchainConfig {
            run_template: "{binary} {binary}".into(),
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(ToolchainConfig::default().validate().is_ok());
    }

    #[test]
    fn compile_and_execute_smoke() {
        let cfg = ToolchainConfig::default();
        let case = c_case("#include <stdio.h>\nint main(void){printf(\"PASS\\n\");return 0;}\n");
        let result = compile(&case, &cfg).unwrap();
        assert_eq!(result.outcome.return_code, 0);
        let binary = result.binary.as_ref().expect("binary produced");
        assert!(binary.is_file());
        let run = execute(binary, &cfg).unwrap();
        assert_eq!(run.return_code, 0);
        assert!(run.stdout.contains("PASS"));
    }

    #[test]
    fn broken_source_fails_with_stderr() {
        let cfg = ToolchainConfig::default();
        let case = c_case("int main(void)return 0;}\n");
        let result = compile(&case, &cfg).unwrap();
        assert_ne!(result.outcome.return_code, 0);
        assert!(!result.outcome.stderr.is_empty());
        assert!(result.binary.is_none());
    }

    #[test]
    fn missing_compiler_is_environment_error() {
        let cfg = ToolchainConfig {
            compile_template: "definitely-no-such-compiler-zz {input} -o {output}".into(),
            ..Default::default()
        };
        let err = compile(&c_case("int main(){return 0;}\n"), &cfg).unwrap_err();
        assert!(matches!(err, Error::Environment(_)));
    }

    #[test]
    fn nonzero_exit_recorded_verbatim() {
        let cfg = ToolchainConfig::default();
        let case = c_case("int main(void){return 1;}\n");
        let result = compile(&case, &cfg).unwrap();
        let run = execute(result.binary.as_ref().unwrap(), &cfg).unwrap();
        assert_eq!(run.return_code, 1);
        assert!(!run.timed_out);
    }

    #[test]
    fn infinite_loop_times_out() {
        let cfg = ToolchainConfig {
            run_timeout_secs: 1,
            ..Default::default()
        };
        let case = c_case("int main(void){for(;;){}return 0;}\n");
        let result = compile(&case, &cfg).unwrap();
        let run = execute(result.binary.as_ref().unwrap(), &cfg).unwrap();
        assert!(run.timed_out);
        assert_eq!(run.return_code, TIMEOUT_RETURN_CODE);
        assert!(run.duration_ms >= 1000);
    }

    #[test]
    fn streams_are_truncated_with_marker() {
        let cfg = ToolchainConfig {
            truncate_bytes: 64,
            ..Default::default()
        };
        let case = c_case(
            "#include <stdio.h>\nint main(void){for(int i=0;i<200;i++)printf(\"0123456789\");return 0;}\n",
        );
        let result = compile(&case, &cfg).unwrap();
        let run = execute(result.binary.as_ref().unwrap(), &cfg).unwrap();
        assert!(run.stdout.ends_with(TRUNCATION_MARKER));
        assert_eq!(run.stdout.len(), 64 + TRUNCATION_MARKER.len());
    }
}
