//! Negative-probing benchmark construction and staged validation for
//! directive-based compiler tests (OpenACC / OpenMP).
//!
//! The library is organized around three phases:
//!
//! 1. [`corpus`] + [`mutator`]: scan a tree of manually written test files,
//!    split it in half reproducibly, and inject one of five known error
//!    classes (issue IDs 0-4) into the mutated half; issue ID 5 marks an
//!    unchanged, valid file.
//! 2. [`toolchain`] + [`judge`] + [`pipeline`]: run every candidate through
//!    compile -> execute -> LLM-judge stages, either with early exit on
//!    failure or in full-trace mode for retroactive analysis.
//! 3. [`metrics`]: score any judge configuration against the issue-derived
//!    ground truth: per-issue accuracy, overall accuracy, and signed bias.

pub mod config;
pub mod corpus;
pub mod error;
pub mod judge;
pub mod metrics;
pub mod mutator;
pub mod pipeline;
pub mod probe;
pub mod seed;
pub mod toolchain;

pub use corpus::{IssueKind, Language, ProgrammingModel, SuiteManifest, TestCase};
pub use config::RunConfig;
pub use error::Error;
pub use judge::{JudgeConfig, PromptStyle, Verdict, VerdictValue};
pub use metrics::{ground_truth, score, MetricsReport, Validity, VerdictSource};
pub use mutator::MutationOutcome;
pub use pipeline::{EvaluationRecord, PipelineConfig, PipelineMode};
pub use toolchain::{ToolOutcome, ToolchainConfig};
