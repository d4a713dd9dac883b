//! Suite construction: split a scanned corpus, assign one mutation per file
//! in the mutate group by seeded uniform draw over issue IDs 0-4, apply the
//! operators, and materialize the labeled suite plus its manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::corpus::{self, IssueKind, ProgrammingModel, SuiteManifest, TestCase};
use crate::error::{Error, Result};
use crate::mutator;
use crate::seed;

pub struct ProbeResult {
    pub suite: Vec<TestCase>,
    pub skipped: usize,
    /// files per issue code, 0-5
    pub class_counts: BTreeMap<u8, usize>,
}

/// Scan, split, and mutate: the complete negative-probing construction. The
/// returned suite is sorted by id and contains ceil(n/2) mutated files.
pub fn build_suite(root: &Path, model: ProgrammingModel, seed_value: u64) -> Result<ProbeResult> {
    let scan = corpus::scan_corpus(root, model)?;
    let (mutate_group, keep_group) = corpus::split_suite(&scan.cases, seed_value);
    let mut suite = Vec::with_capacity(scan.cases.len());
    for mut case in mutate_group {
        let sub = seed::derive_seed(seed_value, &case.id);
        let draw = seed::rng_for_case(seed_value, &case.id).gen_range(0..IssueKind::MUTATIONS.len());
        let outcome = mutator::apply(IssueKind::MUTATIONS[draw], &case, sub);
        case.source = outcome.mutated_source;
        case.issue = outcome.issue;
        suite.push(case);
    }
    suite.extend(keep_group);
    suite.sort_by(|a, b| a.id.cmp(&b.id));
    let mut class_counts = BTreeMap::new();
    for case in &suite {
        *class_counts.entry(case.issue.code()).or_insert(0) += 1;
    }
    Ok(ProbeResult {
        suite,
        skipped: scan.skipped,
        class_counts,
    })
}

/// Write the suite under `out/suite/<id>` and its manifest at
/// `out/manifest.jsonl`.
pub fn materialize(suite: &[TestCase], seed_value: u64, out: &Path) -> Result<SuiteManifest> {
    let suite_dir = out.join("suite");
    for case in suite {
        let path = suite_dir.join(&case.id);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, &case.source).map_err(|e| Error::io(&path, e))?;
    }
    corpus::write_manifest(suite, seed_value, &out.join("manifest.jsonl"))
}
