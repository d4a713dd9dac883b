//! The LLM-as-a-judge client: three prompt styles, a chat-completion HTTP
//! client with retry and a concurrency cap, and the FINAL JUDGEMENT protocol
//! parser.

use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::TestCase;
use crate::error::{Error, Result};
use crate::toolchain::ToolOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptVariant {
    /// Ask for a direct review of the code; no tool outputs. Verdict markers
    /// use the correct/incorrect vocabulary.
    DirectPlain,
    /// Direct review augmented with compile and run outputs; valid/invalid.
    DirectAgent,
    /// Describe-then-judge with compile and run outputs; valid/invalid.
    IndirectAgent,
}

impl PromptVariant {
    pub fn needs_tool_outputs(&self) -> bool {
        !matches!(self, PromptVariant::DirectPlain)
    }

    /// (valid marker, invalid marker) for this style's response protocol.
    pub fn marker_pair(&self) -> (&'static str, &'static str) {
        match self {
            PromptVariant::DirectPlain => {
                ("FINAL JUDGEMENT: correct", "FINAL JUDGEMENT: incorrect")
            }
            _ => ("FINAL JUDGEMENT: valid", "FINAL JUDGEMENT: invalid"),
        }
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct-plain" | "direct" => Ok(PromptVariant::DirectPlain),
            "direct-agent" | "agent" => Ok(PromptVariant::DirectAgent),
            "indirect-agent" | "indirect" => Ok(PromptVariant::IndirectAgent),
            other => Err(Error::Input(format!("unknown prompt style `{other}`"))),
        }
    }
}

/// Review criteria block shared by every template; `{model_flavor}` is
/// substituted with "OpenACC" or "OpenMP".
pub const CRITERIA_TEMPLATE: &str = "\
Syntax: Ensure all {model_flavor} directives and pragmas are syntactically correct.
Directive Appropriateness: Check if the right directives are used for the intended parallel computations.
Clause Correctness: Verify that all clauses within the directives are correctly used according to {model_flavor} specifications.
Memory Management: Assess the accuracy of data movement between CPU and GPU.
Compliance: Ensure the code adheres to the latest {model_flavor} specifications and best practices.
Logic: Verify that the logic of the test (e.g. performing the same computation in serial and parallel and comparing) is correct.";

const DIRECT_PLAIN_TEMPLATE: &str = "\
Review the following {model_flavor} code and evaluate it based on the following criteria:

{criteria}
Based on these criteria, evaluate the code in a brief summary, then respond with precisely \"FINAL JUDGEMENT: correct\" (or incorrect).
You MUST include the exact phrase \"FINAL JUDGEMENT: correct\" in your evaluation if you believe the code is correct. Otherwise, you must include the phrase \"FINAL JUDGEMENT: incorrect\" in your evalutation.
Here is the code:
{code}";

const DIRECT_AGENT_TEMPLATE: &str = "\
{criteria}
Based on these criteria, evaluate the code and determine if it is a valid or invalid test. Think step by step.
You MUST include the exact phrase, \"FINAL JUDGEMENT: valid\" in your response if you deem the test to be valid.
If you deem the test to be invalid, include the exact phrase \"FINAL JUDGEMENT: invalid\" in your response instead.
Here is some information about the code to help you.
When compiled with a compliant {model_flavor} compiler, the below code causes the following outputs:
Compiler return code: {compile_rc}
Compiler STDERR: {compile_stderr}
Compiler STDOUT: {compile_stdout}
When the compiled code is run, it gives the following results:
Return code: {run_rc}
STDERR: {run_stderr}
STDOUT: {run_stdout}
Here is the code:
{code}";

const INDIRECT_AGENT_TEMPLATE: &str = "\
Describe what the below {model_flavor} program will do when run. Think step by step.
Here is some information about the code to help you; you do not have to compile or run the code yourself.
When the below code is compiled with a {model_flavor}-compliant compiler, the compiler gives the following outputs:
 Compiler return code: {compile_rc}
 Compiler STDERR: {compile_stderr}
 Compiler STDOUT: {compile_stdout}
When the compiled code is run, it gives the following results:
 Return code: {run_rc}
 STDOUT: {run_stdout}
 STDERR: {run_stderr}
Using this information, describe in full detail how the below code works, what the below code will do when run, and suggest why the below code might have been written this way.
Then, based on that description, determine whether the described program would be a valid or invalid compiler test for {model_flavor} compilers.
You MUST include the exact phrase \"FINAL JUDGEMENT: valid\" in your final response if you beleive that your description of the below code describes a valid compiler test; otherwise, your final response MUST include the exact phrase \"FINAL JUDGEMENT: invalid\".
Here is the code for you to analyze:
{code}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptStyle {
    pub variant: PromptVariant,
    pub template_text: String,
}

impl PromptStyle {
    pub fn builtin(variant: PromptVariant) -> Self {
        let template_text = match variant {
            PromptVariant::DirectPlain => DIRECT_PLAIN_TEMPLATE,
            PromptVariant::DirectAgent => DIRECT_AGENT_TEMPLATE,
            PromptVariant::IndirectAgent => INDIRECT_AGENT_TEMPLATE,
        }
        .to_string();
        PromptStyle {
            variant,
            template_text,
        }
    }

    /// Load a custom template; the variant still decides tool-output
    /// requirements and the verdict vocabulary.
    pub fn from_file(variant: PromptVariant, path: &Path) -> Result<Self> {
        let template_text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if !template_text.contains("{code}") {
            return Err(Error::Config(format!(
                "template {} is missing the {{code}} placeholder",
                path.display()
            )));
        }
        Ok(PromptStyle {
            variant,
            template_text,
        })
    }
}

/// Fill the style's template. Agent styles require both tool outcomes; the
/// code section is spliced in byte-for-byte as the last step.
pub fn render_prompt(
    style: &PromptStyle,
    case: &TestCase,
    compile_out: Option<&ToolOutcome>,
    run_out: Option<&ToolOutcome>,
) -> Result<String> {
    if style.variant.needs_tool_outputs() && (compile_out.is_none() || run_out.is_none()) {
        return Err(Error::PromptContract(format!(
            "style {:?} requires both compile and run outcomes",
            style.variant
        )));
    }
    let flavor = case.model.flavor();
    let criteria = CRITERIA_TEMPLATE.replace("{model_flavor}", flavor);
    let mut text = style
        .template_text
        .replace("{criteria}", &criteria)
        .replace("{model_flavor}", flavor);
    if let Some(c) = compile_out {
        text = text
            .replace("{compile_rc}", &c.return_code.to_string())
            .replace("{compile_stdout}", &c.stdout)
            .replace("{compile_stderr}", &c.stderr);
    }
    if let Some(r) = run_out {
        text = text
            .replace("{run_rc}", &r.return_code.to_string())
            .replace("{run_stdout}", &r.stdout)
            .replace("{run_stderr}", &r.stderr);
    }
    // splice the code last so nothing inside it gets substituted
    match text.find("{code}") {
        Some(pos) => {
            let mut out = String::with_capacity(text.len() + case.source.len());
            out.push_str(&text[..pos]);
            out.push_str(&case.source);
            out.push_str(&text[pos + "{code}".len()..]);
            Ok(out)
        }
        None => Err(Error::Config("template is missing the {code} placeholder".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictValue {
    Valid,
    Invalid,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    /// The exact marker phrase that decided the verdict, if any.
    pub marker_found: Option<String>,
    pub raw_response: String,
}

/// Scan the response case-insensitively for the style's marker pair. The last
/// occurrence wins when both appear; full-phrase matching means "FINAL
/// JUDGEMENT: invalid" can never be misread as the valid marker. No
/// recognized marker yields Indeterminate.
pub fn parse_verdict(response: &str, style: &PromptStyle) -> Verdict {
    let (valid_marker, invalid_marker) = style.variant.marker_pair();
    let haystack = response.to_ascii_lowercase();
    // full-phrase search: "FINAL JUDGEMENT: valid" is not a substring of
    // "FINAL JUDGEMENT: invalid" (the "in" sits between colon and word), so
    // the valid/invalid substring hazard cannot trigger here
    let last_valid = haystack.rfind(&valid_marker.to_ascii_lowercase());
    let last_invalid = haystack.rfind(&invalid_marker.to_ascii_lowercase());
    let (value, marker) = match (last_valid, last_invalid) {
        (Some(v), Some(i)) => {
            if v > i {
                (VerdictValue::Valid, Some(valid_marker))
            } else {
                (VerdictValue::Invalid, Some(invalid_marker))
            }
        }
        (Some(_), None) => (VerdictValue::Valid, Some(valid_marker)),
        (None, Some(_)) => (VerdictValue::Invalid, Some(invalid_marker)),
        (None, None) => (VerdictValue::Indeterminate, None),
    };
    Verdict {
        value,
        marker_found: marker.map(str::to_string),
        raw_response: response.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retries: u32,
    pub concurrency: usize,
    /// Environment variable holding the bearer token, if any.
    #[serde(default = "default_token_env")]
    pub api_token_env: String,
}

fn default_token_env() -> String {
    "PROBEJUDGE_API_TOKEN".to_string()
}

impl Default for JudgeConfig {
    fn default() -> Self {
        JudgeConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "deepseek-coder-33b-instruct".into(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 300,
            retries: 2,
            concurrency: 1,
            api_token_env: default_token_env(),
        }
    }
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be >= 1".into()));
        }
        Ok(())
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    cond: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Semaphore {
            permits: Mutex::new(permits),
            cond: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cond.wait(permits).unwrap();
        }
        *permits -= 1;
    }

    fn release(&self) {
        *self.permits.lock().unwrap() += 1;
        self.cond.notify_one();
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    content: String,
}

/// Blocking chat-completion client; concurrent `query` calls are admitted up
/// to the configured limit.
pub struct JudgeClient {
    cfg: JudgeConfig,
    http: reqwest::blocking::Client,
    semaphore: Semaphore,
}

impl JudgeClient {
    pub fn new(cfg: JudgeConfig) -> Result<Self> {
        cfg.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Environment(format!("http client: {e}")))?;
        let semaphore = Semaphore::new(cfg.concurrency);
        Ok(JudgeClient {
            cfg,
            http,
            semaphore,
        })
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.cfg
    }

    /// One chat-completion round trip. Transport errors and 5xx responses are
    /// retried with exponential backoff up to `retries` extra attempts; other
    /// HTTP failures surface immediately as API errors.
    pub fn query(&self, prompt: &str) -> Result<String> {
        self.semaphore.acquire();
        let result = self.query_inner(prompt);
        self.semaphore.release();
        result
    }

    fn query_inner(&self, prompt: &str) -> Result<String> {
        let body = ChatRequest {
            model: &self.cfg.model,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: self.cfg.temperature,
            max_tokens: self.cfg.max_tokens,
        };
        let token = std::env::var(&self.cfg.api_token_env).ok();
        let attempts = self.cfg.retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(100 * (1 << attempt.min(6))));
            }
            let mut req = self.http.post(&self.cfg.endpoint).json(&body);
            if let Some(token) = &token {
                req = req.bearer_auth(token);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        let parsed: ChatResponse = resp.json().map_err(|e| Error::Api {
                            status: status.as_u16(),
                            body_excerpt: format!("unparseable response body: {e}"),
                        })?;
                        return parsed
                            .choices
                            .into_iter()
                            .next()
                            .map(|c| c.message.content)
                            .ok_or(Error::Api {
                                status: status.as_u16(),
                                body_excerpt: "response has no choices".into(),
                            });
                    }
                    let body = resp.text().unwrap_or_default();
                    let excerpt: String = body.chars().take(256).collect();
                    if status.is_server_error() {
                        last_error = format!("status {status}: {excerpt}");
                        continue;
                    }
                    return Err(Error::Api {
                        status: status.as_u16(),
                        body_excerpt: excerpt,
                    });
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(Error::Transport {
            attempts,
            message: last_error,
        })
    }
}

/// One-shot variant of [`JudgeClient::query`].
pub fn query(prompt: &str, cfg: &JudgeConfig) -> Result<String> {
    JudgeClient::new(cfg.clone())?.query(prompt)
}
