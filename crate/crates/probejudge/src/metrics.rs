//! Scoring: per-issue accuracy, overall accuracy, and signed bias for any
//! judge configuration, against the issue-ID ground truth. Positive bias
//! means mistakes skew permissive (passing invalid files), negative means
//! restrictive (failing valid files).

use serde::{Deserialize, Serialize};

use crate::corpus::IssueKind;
use crate::error::{Error, Result};
use crate::judge::VerdictValue;
use crate::pipeline::EvaluationRecord;

pub const METRICS_SCHEMA: &str = "probejudge-metrics-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Validity {
    Valid,
    Invalid,
}

/// Issue IDs 0-4 are invalid by construction; issue ID 5 is valid.
pub fn ground_truth(issue: IssueKind) -> Validity {
    if issue == IssueKind::NoIssue {
        Validity::Valid
    } else {
        Validity::Invalid
    }
}

/// Which verdict column of the records to score: the judge's own verdict, or
/// the gated pipeline verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictSource {
    JudgeOnly,
    Pipeline,
}

impl std::str::FromStr for VerdictSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "judge" | "judgeonly" | "judge-only" => Ok(VerdictSource::JudgeOnly),
            "pipeline" => Ok(VerdictSource::Pipeline),
            other => Err(Error::Input(format!("unknown verdict source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssueRow {
    pub issue: IssueKind,
    pub description: String,
    pub count: usize,
    pub correct: usize,
    pub incorrect: usize,
    /// correct / count; 0 when the row is empty.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub label: String,
    pub verdict_source: VerdictSource,
    pub rows: Vec<IssueRow>,
    pub total_count: usize,
    pub total_mistakes: usize,
    pub overall_accuracy: f64,
    /// (passed_invalid - failed_valid) / mistakes; 0 with `bias_undefined`
    /// set when there are no mistakes.
    pub bias: f64,
    pub bias_undefined: bool,
    pub passed_invalid: usize,
    pub failed_valid: usize,
}

fn chosen_validity(
    record: &EvaluationRecord,
    label: &str,
    source: VerdictSource,
) -> Result<Validity> {
    match source {
        VerdictSource::Pipeline => {
            record
                .pipeline_verdict
                .get(label)
                .copied()
                .ok_or_else(|| Error::MissingVerdict {
                    label: label.to_string(),
                    id: record.id.clone(),
                })
        }
        VerdictSource::JudgeOnly => {
            let verdict = record.verdicts.get(label).ok_or_else(|| Error::MissingVerdict {
                label: label.to_string(),
                id: record.id.clone(),
            })?;
            Ok(match verdict.value {
                VerdictValue::Valid => Validity::Valid,
                VerdictValue::Invalid => Validity::Invalid,
                // a judge that fails the protocol has failed the judgment:
                // score it as the wrong answer for this file
                VerdictValue::Indeterminate => match record.ground_truth {
                    Validity::Valid => Validity::Invalid,
                    Validity::Invalid => Validity::Valid,
                },
            })
        }
    }
}

pub fn score(
    records: &[EvaluationRecord],
    label: &str,
    source: VerdictSource,
) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut counts = [(0usize, 0usize); 6]; // (count, correct) per issue code
    let mut passed_invalid = 0usize;
    let mut failed_valid = 0usize;
    for record in records {
        let predicted = chosen_validity(record, label, source)?;
        let truth = ground_truth(record.issue);
        let slot = &mut counts[record.issue.code() as usize];
        slot.0 += 1;
        if predicted == truth {
            slot.1 += 1;
        } else {
            match truth {
                Validity::Invalid => passed_invalid += 1,
                Validity::Valid => failed_valid += 1,
            }
        }
    }
    let rows: Vec<IssueRow> = IssueKind::ALL
        .iter()
        .map(|issue| {
            let (count, correct) = counts[issue.code() as usize];
            IssueRow {
                issue: *issue,
                description: issue.description().to_string(),
                count,
                correct,
                incorrect: count - correct,
                accuracy: if count > 0 {
                    correct as f64 / count as f64
                } else {
                    0.0
                },
            }
        })
        .collect();
    let total_count = records.len();
    let total_correct: usize = rows.iter().map(|r| r.correct).sum();
    let total_mistakes = total_count - total_correct;
    let bias_undefined = total_mistakes == 0;
    let bias = if bias_undefined {
        0.0
    } else {
        (passed_invalid as f64 - failed_valid as f64) / total_mistakes as f64
    };
    Ok(MetricsReport {
        schema: METRICS_SCHEMA.to_string(),
        label: label.to_string(),
        verdict_source: source,
        rows,
        total_count,
        total_mistakes,
        overall_accuracy: total_correct as f64 / total_count as f64,
        bias,
        bias_undefined,
        passed_invalid,
        failed_valid,
    })
}

/// Table-shaped text: one row per issue, then the overall block. Per-issue
/// accuracy is rendered as a whole percent, overall accuracy with two
/// decimals, bias with three, matching the published precision.
pub fn render_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Configuration: {} ({})\n",
        report.label,
        match report.verdict_source {
            VerdictSource::JudgeOnly => "judge verdicts",
            VerdictSource::Pipeline => "pipeline verdicts",
        }
    ));
    out.push_str(&format!(
        "{:<55} {:>6} {:>8} {:>10} {:>9}\n",
        "Issue Type", "Count", "Correct", "Incorrect", "Accuracy"
    ));
    for row in &report.rows {
        out.push_str(&format!(
            "{:<55} {:>6} {:>8} {:>10} {:>8.0}%\n",
            row.description,
            row.count,
            row.correct,
            row.incorrect,
            row.accuracy * 100.0
        ));
    }
    out.push_str(&format!("Total Count       {}\n", report.total_count));
    out.push_str(&format!("Total Mistakes    {}\n", report.total_mistakes));
    out.push_str(&format!(
        "Overall Accuracy  {:.2}%\n",
        report.overall_accuracy * 100.0
    ));
    if report.bias_undefined {
        out.push_str("Bias              undefined (no mistakes)\n");
    } else {
        out.push_str(&format!("Bias              {:.3}\n", report.bias));
    }
    out
}

/// Side-by-side accuracy columns for several configurations over the same
/// record set.
pub fn render_comparative(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<55} {:>6}", "Issue Type", "Count"));
    for report in reports {
        out.push_str(&format!(" {:>14}", format!("{} Acc.", report.label)));
    }
    out.push('\n');
    if let Some(first) = reports.first() {
        for (i, row) in first.rows.iter().enumerate() {
            out.push_str(&format!("{:<55} {:>6}", row.description, row.count));
            for report in reports {
                out.push_str(&format!(" {:>13.0}%", report.rows[i].accuracy * 100.0));
            }
            out.push('\n');
        }
    }
    for (name, get) in [
        ("Total Mistakes", 0usize),
        ("Overall Accuracy", 1),
        ("Bias", 2),
    ] {
        out.push_str(&format!("{name:<62}"));
        for report in reports {
            match get {
                0 => out.push_str(&format!(" {:>14}", report.total_mistakes)),
                1 => out.push_str(&format!(" {:>13.2}%", report.overall_accuracy * 100.0)),
                _ => {
                    if report.bias_undefined {
                        out.push_str(&format!(" {:>14}", "undefined"));
                    } else {
                        out.push_str(&format!(" {:>14.3}", report.bias));
                    }
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Machine-readable report: same fields plus the per-issue accuracy vector in
/// row order, ready for radar plotting.
pub fn to_structured(report: &MetricsReport) -> serde_json::Value {
    let mut value = serde_json::to_value(report).expect("report serializes");
    let radar: Vec<f64> = report.rows.iter().map(|r| r.accuracy).collect();
    value["radar_accuracy"] = serde_json::json!(radar);
    value
}
