use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};

use probejudge::corpus::{self, ProgrammingModel};
use probejudge::error::Error;
use probejudge::metrics::{self, VerdictSource};
use probejudge::pipeline::{self, PipelineMode};
use probejudge::{config, probe};

/// Build labeled valid/invalid benchmark suites from directive-based compiler
/// tests, run them through a compile/execute/judge pipeline, and score any
/// judge configuration.
#[derive(Parser)]
#[command(name = "probejudge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a corpus, mutate a random half, and write the labeled suite.
    Probe {
        /// Corpus root containing .c/.cpp/.f90 test files
        #[arg(long)]
        corpus: PathBuf,
        /// Programming model: openacc or openmp
        #[arg(long)]
        model: String,
        /// Master seed; one number reproduces the whole suite
        #[arg(long)]
        seed: u64,
        /// Output directory (suite/ tree plus manifest.jsonl)
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the compile -> execute -> judge pipeline over a suite.
    Run {
        /// Suite manifest written by `probe`
        #[arg(long, conflicts_with = "suite_dir")]
        manifest: Option<PathBuf>,
        /// Corpus root the manifest's origins resolve against
        #[arg(long, requires = "manifest")]
        corpus: Option<PathBuf>,
        /// Alternatively: a directory of candidate tests (no ground truth)
        #[arg(long)]
        suite_dir: Option<PathBuf>,
        /// Programming model for --suite-dir scans
        #[arg(long)]
        model: Option<String>,
        /// TOML config with [toolchain], [pipeline], [[judges]]
        #[arg(long)]
        config: PathBuf,
        /// Override the config's pipeline mode: early-exit or full-trace
        #[arg(long)]
        mode: Option<String>,
        /// Override the config's record log path
        #[arg(long)]
        log: Option<PathBuf>,
        /// Continue an interrupted run; completed files are skipped
        #[arg(long)]
        resume: bool,
    },
    /// Score a record log: per-issue accuracy, overall accuracy, bias.
    Score {
        /// Record log produced by `run`
        #[arg(long)]
        log: PathBuf,
        /// Judge configuration labels to score (default: all in the log)
        #[arg(long)]
        label: Vec<String>,
        /// judge (the judge's own verdict) or pipeline (gated verdict)
        #[arg(long, default_value = "judge")]
        verdict_source: String,
        /// table or json
        #[arg(long, default_value = "table")]
        format: String,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut cause = std::error::Error::source(&err);
            while let Some(c) = cause {
                eprintln!("  caused by: {c}");
                cause = c.source();
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Probe {
            corpus,
            model,
            seed,
            out,
        } => cmd_probe(&corpus, &model, seed, &out),
        Command::Run {
            manifest,
            corpus,
            suite_dir,
            model,
            config,
            mode,
            log,
            resume,
        } => cmd_run(manifest, corpus, suite_dir, model, config, mode, log, resume),
        Command::Score {
            log,
            label,
            verdict_source,
            format,
            out,
        } => cmd_score(&log, label, &verdict_source, &format, out),
    }
}

fn cmd_probe(corpus: &PathBuf, model: &str, seed: u64, out: &PathBuf) -> Result<(), Error> {
    let model = ProgrammingModel::from_str(model)?;
    let result = probe::build_suite(corpus, model, seed)?;
    probe::materialize(&result.suite, seed, out)?;
    let mutated: usize = result
        .class_counts
        .iter()
        .filter(|(code, _)| **code != 5)
        .map(|(_, n)| n)
        .sum();
    let unchanged = result.class_counts.get(&5).copied().unwrap_or(0);
    println!(
        "suite: {} files ({} mutated, {} unchanged), {} skipped during scan",
        result.suite.len(),
        mutated,
        unchanged,
        result.skipped
    );
    for (code, count) in &result.class_counts {
        let kind = corpus::IssueKind::from_code(*code).expect("valid code");
        println!("  issue {code} ({}): {count}", kind.description());
    }
    println!("manifest: {}", out.join("manifest.jsonl").display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    manifest: Option<PathBuf>,
    corpus_root: Option<PathBuf>,
    suite_dir: Option<PathBuf>,
    model: Option<String>,
    config_path: PathBuf,
    mode: Option<String>,
    log: Option<PathBuf>,
    resume: bool,
) -> Result<(), Error> {
    let mut cfg = config::load(&config_path)?;
    if let Some(mode) = mode {
        cfg.pipeline.mode = PipelineMode::from_str(&mode)?;
    }
    if let Some(log) = log {
        cfg.pipeline.record_log = log;
    }
    let suite = match (&manifest, &suite_dir) {
        (Some(manifest), None) => {
            let root = corpus_root
                .ok_or_else(|| Error::Input("--manifest requires --corpus".into()))?;
            corpus::load_manifest(manifest, &root)?
        }
        (None, Some(dir)) => {
            let model = model
                .ok_or_else(|| Error::Input("--suite-dir requires --model".into()))?;
            let model = ProgrammingModel::from_str(&model)?;
            corpus::scan_corpus(dir, model)?.cases
        }
        _ => {
            return Err(Error::Input(
                "exactly one of --manifest or --suite-dir is required".into(),
            ))
        }
    };
    let records = if resume {
        pipeline::resume(&cfg.pipeline.record_log.clone(), &suite, &cfg.toolchain, &cfg.pipeline)?
    } else {
        pipeline::run_pipeline(&suite, &cfg.toolchain, &cfg.pipeline)?
    };
    println!(
        "processed {} files; record log: {}",
        records.len(),
        cfg.pipeline.record_log.display()
    );
    Ok(())
}

fn cmd_score(
    log: &PathBuf,
    labels: Vec<String>,
    verdict_source: &str,
    format: &str,
    out: Option<PathBuf>,
) -> Result<(), Error> {
    let source = VerdictSource::from_str(verdict_source)?;
    let (_, log_labels, records) = pipeline::read_log(log)?;
    if records.is_empty() {
        return Err(Error::Input(format!("record log {} has no records", log.display())));
    }
    let labels = if labels.is_empty() { log_labels.clone() } else { labels };
    for label in &labels {
        if !log_labels.contains(label) {
            return Err(Error::Input(format!(
                "unknown label `{label}`; available: {log_labels:?}"
            )));
        }
    }
    let reports: Vec<metrics::MetricsReport> = labels
        .iter()
        .map(|label| metrics::score(&records, label, source))
        .collect::<Result<_, _>>()?;
    let rendered = match format {
        "table" => {
            if reports.len() > 1 {
                metrics::render_comparative(&reports)
            } else {
                metrics::render_table(&reports[0])
            }
        }
        "json" => {
            let values: Vec<serde_json::Value> =
                reports.iter().map(metrics::to_structured).collect();
            serde_json::to_string_pretty(&values).expect("reports serialize")
        }
        other => return Err(Error::Input(format!("unknown format `{other}`"))),
    };
    match out {
        Some(path) => std::fs::write(&path, rendered).map_err(|e| Error::io(&path, e))?,
        None => print!("{rendered}"),
    }
    Ok(())
}
