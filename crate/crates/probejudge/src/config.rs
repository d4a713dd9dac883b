//! Run configuration: a TOML file with `[toolchain]`, `[pipeline]`, and
//! `[[judges]]` sections. Everything is validated at load time, before any
//! external process or network call.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::judge::{JudgeConfig, PromptStyle, PromptVariant};
use crate::pipeline::{JudgeLabelConfig, PipelineConfig, PipelineMode};
use crate::toolchain::ToolchainConfig;

#[derive(Debug, Deserialize)]
struct FileConfig {
    #[serde(default)]
    toolchain: ToolchainConfig,
    #[serde(default)]
    pipeline: PipelineSection,
    #[serde(default)]
    judges: Vec<JudgeSection>,
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct PipelineSection {
    mode: String,
    compile_workers: usize,
    execute_workers: usize,
    judge_workers: usize,
    record_log: PathBuf,
}

impl Default for PipelineSection {
    fn default() -> Self {
        PipelineSection {
            mode: "early-exit".into(),
            compile_workers: 1,
            execute_workers: 1,
            judge_workers: 1,
            record_log: PathBuf::from("records.jsonl"),
        }
    }
}

#[derive(Debug, Deserialize)]
struct JudgeSection {
    label: String,
    style: String,
    /// Optional custom template, resolved relative to the config file.
    template_file: Option<PathBuf>,
    #[serde(flatten)]
    judge: JudgeConfig,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub toolchain: ToolchainConfig,
    pub pipeline: PipelineConfig,
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: FileConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    file.toolchain.validate()?;

    let mode = PipelineMode::from_str(&file.pipeline.mode)
        .map_err(|_| Error::Config(format!("unknown pipeline mode `{}`", file.pipeline.mode)))?;
    let mut judges = Vec::new();
    for section in file.judges {
        let variant = PromptVariant::from_str(&section.style)
            .map_err(|_| Error::Config(format!("unknown prompt style `{}`", section.style)))?;
        let style = match &section.template_file {
            Some(rel) => {
                let resolved = if rel.is_absolute() {
                    rel.clone()
                } else {
                    base.join(rel)
                };
                PromptStyle::from_file(variant, &resolved)?
            }
            None => PromptStyle::builtin(variant),
        };
        section.judge.validate()?;
        judges.push(JudgeLabelConfig {
            label: section.label,
            style,
            config: section.judge,
        });
    }
    let record_log = if file.pipeline.record_log.is_absolute() {
        file.pipeline.record_log.clone()
    } else {
        base.join(&file.pipeline.record_log)
    };
    let pipeline = PipelineConfig {
        mode,
        compile_workers: file.pipeline.compile_workers,
        execute_workers: file.pipeline.execute_workers,
        judge_workers: file.pipeline.judge_workers,
        judges,
        record_log,
    };
    pipeline.validate()?;
    Ok(RunConfig {
        toolchain: file.toolchain,
        pipeline,
    })
}
