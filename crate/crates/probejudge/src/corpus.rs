//! Corpus ingestion: scan a directory tree of directive-based test files,
//! split it reproducibly into a to-be-mutated group and an unchanged group,
//! and persist/replay the suite through a line-oriented manifest.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Cpp,
    Fortran,
}

impl Language {
    pub fn from_extension(ext: &str) -> Option<Language> {
        match ext {
            "c" => Some(Language::C),
            "cpp" | "cc" | "cxx" => Some(Language::Cpp),
            "f90" | "F90" | "f" | "F" => Some(Language::Fortran),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProgrammingModel {
    #[serde(rename = "openacc")]
    OpenAcc,
    #[serde(rename = "openmp")]
    OpenMp,
}

impl ProgrammingModel {
    /// Human wording used in prompts ("OpenACC" / "OpenMP").
    pub fn flavor(&self) -> &'static str {
        match self {
            ProgrammingModel::OpenAcc => "OpenACC",
            ProgrammingModel::OpenMp => "OpenMP",
        }
    }

    /// Pragma keyword after `#pragma` (also the Fortran sentinel suffix).
    pub fn directive_word(&self) -> &'static str {
        match self {
            ProgrammingModel::OpenAcc => "acc",
            ProgrammingModel::OpenMp => "omp",
        }
    }

    /// Runtime API identifier prefix (`acc_` / `omp_`).
    pub fn api_prefix(&self) -> &'static str {
        match self {
            ProgrammingModel::OpenAcc => "acc_",
            ProgrammingModel::OpenMp => "omp_",
        }
    }
}

impl std::str::FromStr for ProgrammingModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "openacc" | "acc" => Ok(ProgrammingModel::OpenAcc),
            "openmp" | "omp" => Ok(ProgrammingModel::OpenMp),
            other => Err(Error::Input(format!("unknown programming model `{other}`"))),
        }
    }
}

/// The six-way mutation taxonomy. Codes 0-4 label invalid files, 5 labels an
/// unchanged valid file; ground-truth validity is a pure function of the code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IssueKind {
    /// 0: removed a memory allocation, or swapped a directive for a
    /// syntactically incorrect one.
    RemovedAllocationOrSwappedDirective,
    /// 1: removed an opening bracket.
    RemovedOpeningBracket,
    /// 2: added use of an undeclared variable.
    UndeclaredVariable,
    /// 3: replaced the file with randomly generated non-directive code.
    ReplacedWithGeneratedCode,
    /// 4: removed the last bracketed section of code.
    RemovedLastBracketedSection,
    /// 5: no changes to code.
    NoIssue,
}

impl IssueKind {
    pub const ALL: [IssueKind; 6] = [
        IssueKind::RemovedAllocationOrSwappedDirective,
        IssueKind::RemovedOpeningBracket,
        IssueKind::UndeclaredVariable,
        IssueKind::ReplacedWithGeneratedCode,
        IssueKind::RemovedLastBracketedSection,
        IssueKind::NoIssue,
    ];

    /// Invalid mutation codes only (0-4).
    pub const MUTATIONS: [IssueKind; 5] = [
        IssueKind::RemovedAllocationOrSwappedDirective,
        IssueKind::RemovedOpeningBracket,
        IssueKind::UndeclaredVariable,
        IssueKind::ReplacedWithGeneratedCode,
        IssueKind::RemovedLastBracketedSection,
    ];

    pub fn code(&self) -> u8 {
        match self {
            IssueKind::RemovedAllocationOrSwappedDirective => 0,
            IssueKind::RemovedOpeningBracket => 1,
            IssueKind::UndeclaredVariable => 2,
            IssueKind::ReplacedWithGeneratedCode => 3,
            IssueKind::RemovedLastBracketedSection => 4,
            IssueKind::NoIssue => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<IssueKind> {
        IssueKind::ALL.get(code as usize).copied()
    }

    pub fn description(&self) -> &'static str {
        match self {
            IssueKind::RemovedAllocationOrSwappedDirective => {
                "Removed memory allocation / swapped directive"
            }
            IssueKind::RemovedOpeningBracket => "Removed an opening bracket",
            IssueKind::UndeclaredVariable => "Added use of undeclared variable",
            IssueKind::ReplacedWithGeneratedCode => {
                "Replaced file with randomly-generated non-directive code"
            }
            IssueKind::RemovedLastBracketedSection => "Removed last bracketed section of code",
            IssueKind::NoIssue => "No issue",
        }
    }
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl Serialize for IssueKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for IssueKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let code = u8::deserialize(d)?;
        IssueKind::from_code(code)
            .ok_or_else(|| serde::de::Error::custom(format!("issue code {code} out of range 0-5")))
    }
}

/// One candidate source file with its ground-truth label and provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    /// Path relative to the corpus root; unique within a suite.
    pub id: String,
    pub language: Language,
    pub model: ProgrammingModel,
    pub source: String,
    pub issue: IssueKind,
    /// Path (relative to the corpus root) of the unmutated parent file.
    pub origin: String,
}

#[derive(Debug)]
pub struct ScanResult {
    pub cases: Vec<TestCase>,
    pub skipped: usize,
}

/// Walk `root` and return one `TestCase` per file with a recognized extension
/// (.c .cpp .cc .cxx .f90 .F90 .f .F), issue = NoIssue, sorted by id. Files
/// with other extensions are skipped and counted.
pub fn scan_corpus(root: &Path, model: ProgrammingModel) -> Result<ScanResult> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus root is not a directory"),
        ));
    }
    let mut cases = Vec::new();
    let mut skipped = 0usize;
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            Error::io(root, e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk error")))
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let lang = path
            .extension()
            .and_then(|e| e.to_str())
            .and_then(Language::from_extension);
        let Some(language) = lang else {
            skipped += 1;
            continue;
        };
        let rel = path
            .strip_prefix(root)
            .expect("walked path under root")
            .to_string_lossy()
            .replace('\\', "/");
        let source = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        cases.push(TestCase {
            id: rel.clone(),
            language,
            model,
            source,
            issue: IssueKind::NoIssue,
            origin: rel,
        });
    }
    if cases.is_empty() {
        return Err(Error::EmptyCorpus(root.to_path_buf()));
    }
    cases.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(ScanResult { cases, skipped })
}

/// Split the corpus in half randomly: a disjoint partition that is a pure
/// function of (sorted ids, seed). The mutate group gets ceil(n/2) files so
/// the invalid class is never the smaller one.
pub fn split_suite(corpus: &[TestCase], seed: u64) -> (Vec<TestCase>, Vec<TestCase>) {
    let mut sorted: Vec<&TestCase> = corpus.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut indices: Vec<usize> = (0..sorted.len()).collect();
    let mut rng = seed::rng_from_seed(seed);
    indices.shuffle(&mut rng);
    let cut = sorted.len().div_ceil(2);
    let mutate_set: BTreeSet<usize> = indices[..cut].iter().copied().collect();
    let mut mutate = Vec::with_capacity(cut);
    let mut keep = Vec::with_capacity(sorted.len() - cut);
    for (i, case) in sorted.into_iter().enumerate() {
        if mutate_set.contains(&i) {
            mutate.push(case.clone());
        } else {
            keep.push(case.clone());
        }
    }
    (mutate, keep)
}

pub const MANIFEST_SCHEMA: &str = "probejudge-manifest-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestHeader {
    schema: String,
    seed: u64,
    model: ProgrammingModel,
    created: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub issue: IssueKind,
    pub origin: String,
}

/// Replayable description of a suite: seed, model, and one (id, issue, origin)
/// entry per case. Written as one JSON record per line, header first.
#[derive(Debug, Clone)]
pub struct SuiteManifest {
    pub seed: u64,
    pub model: ProgrammingModel,
    pub created: DateTime<Utc>,
    pub entries: Vec<ManifestEntry>,
}

pub fn write_manifest(suite: &[TestCase], seed: u64, path: &Path) -> Result<SuiteManifest> {
    let manifest = SuiteManifest {
        seed,
        model: suite.first().map(|c| c.model).unwrap_or(ProgrammingModel::OpenAcc),
        created: Utc::now(),
        entries: suite
            .iter()
            .map(|c| ManifestEntry {
                id: c.id.clone(),
                issue: c.issue,
                origin: c.origin.clone(),
            })
            .collect(),
    };
    let mut out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let header = ManifestHeader {
        schema: MANIFEST_SCHEMA.to_string(),
        seed: manifest.seed,
        model: manifest.model,
        created: manifest.created,
    };
    let mut buf = serde_json::to_string(&header).expect("header serializes");
    buf.push('\n');
    for entry in &manifest.entries {
        buf.push_str(&serde_json::to_string(entry).expect("entry serializes"));
        buf.push('\n');
    }
    out.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<SuiteManifest> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let (_, first) = lines.next().ok_or(Error::ManifestParse {
        line: 1,
        message: "empty manifest".into(),
    })?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: ManifestHeader = serde_json::from_str(&first).map_err(|e| Error::ManifestParse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.schema != MANIFEST_SCHEMA {
        return Err(Error::ManifestParse {
            line: 1,
            message: format!("unknown schema `{}`", header.schema),
        });
    }
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(&line).map_err(|e| Error::ManifestParse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(SuiteManifest {
        seed: header.seed,
        model: header.model,
        created: header.created,
        entries,
    })
}

/// Rebuild the suite from a manifest by re-reading each origin under `root`
/// and replaying the recorded mutation with the manifest's seed. Mutations are
/// deterministic, so this reproduces the suite byte-for-byte.
pub fn load_manifest(path: &Path, root: &Path) -> Result<Vec<TestCase>> {
    let manifest = read_manifest(path)?;
    let mut cases = Vec::with_capacity(manifest.entries.len());
    for entry in &manifest.entries {
        let origin_path = root.join(&entry.origin);
        if !origin_path.is_file() {
            return Err(Error::ManifestIntegrity {
                id: entry.id.clone(),
                origin: origin_path,
            });
        }
        let language = origin_path
            .extension()
            .and_then(|e| e.to_str())
            .and_then(Language::from_extension)
            .ok_or_else(|| Error::ManifestParse {
                line: 0,
                message: format!("origin `{}` has an unrecognized extension", entry.origin),
            })?;
        let source = fs::read_to_string(&origin_path).map_err(|e| Error::io(&origin_path, e))?;
        let parent = TestCase {
            id: entry.id.clone(),
            language,
            model: manifest.model,
            source,
            issue: IssueKind::NoIssue,
            origin: entry.origin.clone(),
        };
        let case = if entry.issue == IssueKind::NoIssue {
            parent
        } else {
            let sub = seed::derive_seed(manifest.seed, &entry.id);
            let outcome = crate::mutator::apply(entry.issue, &parent, sub);
            TestCase {
                source: outcome.mutated_source,
                issue: outcome.issue,
                ..parent
            }
        };
        cases.push(case);
    }
    Ok(cases)
}
