//! Negative-probing operators: the five ways (issue IDs 0-4) a valid
//! directive-based test is turned into a labeled invalid variant. Issue 5 is
//! the identity. Every operator is a pure function of (source, issue, seed).

mod codegen;
mod lexer;

use std::ops::Range;

use rand::Rng;

use crate::corpus::{IssueKind, Language, ProgrammingModel, TestCase};
use crate::seed::rng_from_seed;

pub use lexer::code_mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectiveKind {
    PragmaLine,
    FortranSentinel,
    ApiCall,
}

/// One directive occurrence: a `#pragma acc`/`#pragma omp` line, a Fortran
/// `!$acc`/`!$omp` sentinel line, or a runtime API identifier (`acc_*`/`omp_*`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveToken {
    pub span: Range<usize>,
    pub model: ProgrammingModel,
    pub text: String,
    pub kind: DirectiveKind,
}

/// A single replacement of the byte range `start..end` with `replacement`.
/// Deletions have an empty replacement; insertions have `start == end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationOutcome {
    /// The issue that was asked for.
    pub requested: IssueKind,
    /// The issue actually applied (differs from `requested` only when the
    /// dispatcher fell back to another operator).
    pub issue: IssueKind,
    pub mutated_source: String,
    pub edits: Vec<Edit>,
    pub applicable: bool,
}

impl MutationOutcome {
    fn inapplicable(requested: IssueKind, source: &str) -> Self {
        MutationOutcome {
            requested,
            issue: requested,
            mutated_source: source.to_string(),
            edits: Vec::new(),
            applicable: false,
        }
    }

    fn from_edits(requested: IssueKind, source: &str, edits: Vec<Edit>) -> Self {
        MutationOutcome {
            requested,
            issue: requested,
            mutated_source: apply_edits(source, &edits),
            edits,
            applicable: true,
        }
    }
}

/// Replay a recorded edit list against the original text.
pub fn apply_edits(source: &str, edits: &[Edit]) -> String {
    let mut sorted: Vec<&Edit> = edits.iter().collect();
    sorted.sort_by_key(|e| e.start);
    let mut out = String::with_capacity(source.len());
    let mut cursor = 0usize;
    for edit in sorted {
        debug_assert!(edit.start >= cursor, "overlapping edits");
        out.push_str(&source[cursor..edit.start]);
        out.push_str(&edit.replacement);
        cursor = edit.end;
    }
    out.push_str(&source[cursor..]);
    out
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Every directive occurrence in the file, ordered by position.
pub fn find_directives(
    source: &str,
    language: Language,
    model: ProgrammingModel,
) -> Vec<DirectiveToken> {
    let mut tokens = Vec::new();
    let word = model.directive_word();
    let sentinel = format!("!${word}");
    let mut offset = 0usize;
    for line in source.split_inclusive('\n') {
        let content = line.strip_suffix('\n').unwrap_or(line);
        let trimmed = content.trim_start();
        let lead = content.len() - trimmed.len();
        match language {
            Language::C | Language::Cpp => {
                if let Some(rest) = trimmed.strip_prefix("#pragma") {
                    let rest_trimmed = rest.trim_start();
                    let first = rest_trimmed.split_whitespace().next().unwrap_or("");
                    if first == word {
                        tokens.push(DirectiveToken {
                            span: offset + lead..offset + content.len(),
                            model,
                            text: trimmed.to_string(),
                            kind: DirectiveKind::PragmaLine,
                        });
                    }
                }
            }
            Language::Fortran => {
                let lower = trimmed.to_ascii_lowercase();
                if lower.starts_with(&sentinel) {
                    let after = lower.as_bytes().get(sentinel.len()).copied();
                    if after.is_none() || !after.map(is_ident_byte).unwrap_or(false) {
                        tokens.push(DirectiveToken {
                            span: offset + lead..offset + content.len(),
                            model,
                            text: trimmed.to_string(),
                            kind: DirectiveKind::FortranSentinel,
                        });
                    }
                }
            }
        }
        offset += line.len();
    }
    // Runtime API identifiers (acc_* / omp_*), outside comments and literals.
    let prefix = model.api_prefix().as_bytes();
    let bytes = source.as_bytes();
    let mask = match language {
        Language::C | Language::Cpp => lexer::code_mask(source),
        Language::Fortran => fortran_code_mask(source),
    };
    let mut i = 0usize;
    while i + prefix.len() <= bytes.len() {
        if mask[i]
            && bytes[i..].starts_with(prefix)
            && (i == 0 || !is_ident_byte(bytes[i - 1]))
        {
            let mut end = i + prefix.len();
            while end < bytes.len() && is_ident_byte(bytes[end]) {
                end += 1;
            }
            tokens.push(DirectiveToken {
                span: i..end,
                model,
                text: source[i..end].to_string(),
                kind: DirectiveKind::ApiCall,
            });
            i = end;
            continue;
        }
        i += 1;
    }
    tokens.sort_by_key(|t| t.span.start);
    tokens
}

/// Crude Fortran mask: bytes after a `!` comment start (sentinel lines
/// excluded) or inside quoted strings are not code.
fn fortran_code_mask(source: &str) -> Vec<bool> {
    let mut mask = vec![true; source.len()];
    let mut offset = 0usize;
    for line in source.split_inclusive('\n') {
        let bytes = line.as_bytes();
        let mut quote: Option<u8> = None;
        let mut i = 0usize;
        while i < bytes.len() {
            let b = bytes[i];
            match quote {
                Some(q) => {
                    mask[offset + i] = false;
                    if b == q {
                        quote = None;
                    }
                }
                None => match b {
                    b'\'' | b'"' => {
                        quote = Some(b);
                        mask[offset + i] = false;
                    }
                    b'!' => {
                        // Directive sentinels stay visible; plain comments do not.
                        let rest = &line[i..];
                        let lower = rest.to_ascii_lowercase();
                        if !(lower.starts_with("!$acc") || lower.starts_with("!$omp")) {
                            for j in i..bytes.len() {
                                if bytes[j] != b'\n' {
                                    mask[offset + j] = false;
                                }
                            }
                            break;
                        }
                    }
                    _ => {}
                },
            }
            i += 1;
        }
        offset += line.len();
    }
    mask
}

/// C/C++ statements (span up to and including the `;`) containing `malloc`,
/// `calloc`, or an array `new`; Fortran `allocate(` lines.
fn find_allocations(source: &str, language: Language) -> Vec<Range<usize>> {
    match language {
        Language::C | Language::Cpp => {
            let mask = lexer::code_mask(source);
            let bytes = source.as_bytes();
            let mut spans: Vec<Range<usize>> = Vec::new();
            for keyword in ["malloc", "calloc", "new"] {
                let kw = keyword.as_bytes();
                let mut i = 0usize;
                while i + kw.len() <= bytes.len() {
                    if mask[i]
                        && bytes[i..].starts_with(kw)
                        && (i == 0 || !is_ident_byte(bytes[i - 1]))
                        && !bytes.get(i + kw.len()).copied().map(is_ident_byte).unwrap_or(false)
                    {
                        let span = statement_span(source, &mask, i);
                        let is_alloc = if keyword == "new" {
                            // array new: a `[` later in the same statement
                            source[i..span.end].contains('[')
                        } else {
                            true
                        };
                        if is_alloc && !spans.contains(&span) {
                            spans.push(span);
                        }
                    }
                    i += 1;
                }
            }
            spans.sort_by_key(|s| s.start);
            spans
        }
        Language::Fortran => {
            let mut spans = Vec::new();
            let mut offset = 0usize;
            for line in source.split_inclusive('\n') {
                let lower = line.trim_start().to_ascii_lowercase();
                let rest = lower.strip_prefix("allocate").map(|r| r.trim_start());
                if matches!(rest, Some(r) if r.starts_with('(')) {
                    spans.push(offset..offset + line.len());
                }
                offset += line.len();
            }
            spans
        }
    }
}

/// Span from the first non-blank byte of the statement containing `pos`
/// through its terminating `;` (inclusive).
fn statement_span(source: &str, mask: &[bool], pos: usize) -> Range<usize> {
    let bytes = source.as_bytes();
    let mut start = pos;
    while start > 0 {
        let b = bytes[start - 1];
        if mask[start - 1] && (b == b';' || b == b'{' || b == b'}') {
            break;
        }
        start -= 1;
    }
    while start < bytes.len() && bytes[start].is_ascii_whitespace() {
        start += 1;
    }
    let mut end = pos;
    while end < bytes.len() {
        if mask[end] && bytes[end] == b';' {
            end += 1;
            break;
        }
        end += 1;
    }
    start..end
}

/// Misspell a directive keyword by doubling its final letter.
fn misspell(word: &str) -> String {
    match word.chars().last() {
        Some(c) => format!("{word}{c}"),
        None => word.to_string(),
    }
}

/// Issue 0: delete one allocation statement (seeded draw), or misspell the
/// keyword of one directive when the file allocates nothing.
pub fn mutate_issue0(
    source: &str,
    language: Language,
    model: ProgrammingModel,
    seed: u64,
) -> MutationOutcome {
    let requested = IssueKind::RemovedAllocationOrSwappedDirective;
    let mut rng = rng_from_seed(seed);
    let allocs = find_allocations(source, language);
    if !allocs.is_empty() {
        let idx = rng.gen_range(0..allocs.len());
        let span = allocs[idx].clone();
        let edit = Edit {
            start: span.start,
            end: span.end,
            replacement: String::new(),
        };
        return MutationOutcome::from_edits(requested, source, vec![edit]);
    }
    let directives: Vec<DirectiveToken> = find_directives(source, language, model)
        .into_iter()
        .filter(|t| t.kind != DirectiveKind::ApiCall)
        .collect();
    if directives.is_empty() {
        return MutationOutcome::inapplicable(requested, source);
    }
    let token = &directives[rng.gen_range(0..directives.len())];
    let line = &source[token.span.clone()];
    // keyword = first word after the `#pragma acc` / `!$acc` lead-in
    let skip = match token.kind {
        DirectiveKind::PragmaLine => 2, // "#pragma" "acc"
        _ => 1,                         // "!$acc"
    };
    let target = line
        .split_whitespace()
        .nth(skip)
        .map(|w| {
            let ident_len = w.bytes().take_while(|&b| is_ident_byte(b)).count();
            if ident_len > 0 { &w[..ident_len] } else { w }
        })
        .filter(|w| !w.is_empty());
    let edit = match target {
        Some(kw) => {
            let rel = line.find(kw).expect("keyword came from the line");
            Edit {
                start: token.span.start + rel,
                end: token.span.start + rel + kw.len(),
                replacement: misspell(kw),
            }
        }
        None => {
            // bare directive line: misspell the model word itself
            let rel = line.find(model.directive_word()).unwrap_or(0);
            let word = model.directive_word();
            Edit {
                start: token.span.start + rel,
                end: token.span.start + rel + word.len(),
                replacement: misspell(word),
            }
        }
    };
    MutationOutcome::from_edits(requested, source, vec![edit])
}

/// Issue 1: delete one `{` (seeded draw over braces outside literals and
/// comments). C/C++ only.
pub fn mutate_issue1(source: &str, language: Language, seed: u64) -> MutationOutcome {
    let requested = IssueKind::RemovedOpeningBracket;
    if language == Language::Fortran {
        return MutationOutcome::inapplicable(requested, source);
    }
    let braces = lexer::masked_positions(source, b'{');
    if braces.is_empty() {
        return MutationOutcome::inapplicable(requested, source);
    }
    let mut rng = rng_from_seed(seed);
    let pos = braces[rng.gen_range(0..braces.len())];
    let edit = Edit {
        start: pos,
        end: pos + 1,
        replacement: String::new(),
    };
    MutationOutcome::from_edits(requested, source, vec![edit])
}

const FRESH_BASE: &str = "llm4vv_undeclared_var";

fn fresh_identifier(source: &str) -> String {
    if !source.contains(FRESH_BASE) {
        return FRESH_BASE.to_string();
    }
    let mut n = 2u32;
    loop {
        let candidate = format!("{FRESH_BASE}_{n}");
        if !source.contains(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

/// Issue 2: insert an assignment to a fresh, undeclared identifier right
/// after the opening brace of the first function body. For Fortran the
/// assignment goes after an `implicit none` line inside a program unit.
pub fn mutate_issue2(source: &str, language: Language, _seed: u64) -> MutationOutcome {
    let requested = IssueKind::UndeclaredVariable;
    match language {
        Language::C | Language::Cpp => {
            let mask = lexer::code_mask(source);
            let bytes = source.as_bytes();
            let mut insert_at = None;
            for pos in lexer::masked_positions(source, b'{') {
                // a function body opens with `)` as the previous code byte
                let mut j = pos;
                let mut prev = None;
                while j > 0 {
                    j -= 1;
                    if mask[j] && !bytes[j].is_ascii_whitespace() {
                        prev = Some(bytes[j]);
                        break;
                    }
                }
                if prev == Some(b')') {
                    insert_at = Some(pos + 1);
                    break;
                }
            }
            let Some(at) = insert_at else {
                return MutationOutcome::inapplicable(requested, source);
            };
            let name = fresh_identifier(source);
            let edit = Edit {
                start: at,
                end: at,
                replacement: format!("{name} = 1;"),
            };
            MutationOutcome::from_edits(requested, source, vec![edit])
        }
        Language::Fortran => {
            let lower = source.to_ascii_lowercase();
            let has_unit = lower.lines().any(|l| {
                let t = l.trim_start();
                t.starts_with("program ")
                    || t.starts_with("subroutine ")
                    || t.starts_with("function ")
                    || t.contains(" function ")
            });
            if !has_unit {
                return MutationOutcome::inapplicable(requested, source);
            }
            let mut offset = 0usize;
            for line in source.split_inclusive('\n') {
                let trimmed = line.trim_start().to_ascii_lowercase();
                if trimmed.starts_with("implicit none") {
                    let indent_len = line.len() - line.trim_start().len();
                    let indent = &line[..indent_len];
                    let at = offset + line.len();
                    let name = fresh_identifier(source);
                    let needs_newline = !line.ends_with('\n');
                    let replacement = if needs_newline {
                        format!("\n{indent}{name} = 1")
                    } else {
                        format!("{indent}{name} = 1\n")
                    };
                    let edit = Edit {
                        start: at,
                        end: at,
                        replacement,
                    };
                    return MutationOutcome::from_edits(requested, source, vec![edit]);
                }
                offset += line.len();
            }
            // without `implicit none` the assignment would be implicitly typed
            // and legal, so the probe cannot guarantee invalidity
            MutationOutcome::inapplicable(requested, source)
        }
    }
}

/// Issue 3: replace the whole file with a seeded, self-contained program that
/// contains no directives or runtime API calls. Always applicable.
pub fn mutate_issue3(
    source: &str,
    language: Language,
    _model: ProgrammingModel,
    seed: u64,
) -> MutationOutcome {
    let requested = IssueKind::ReplacedWithGeneratedCode;
    let mut rng = rng_from_seed(seed);
    let generated = codegen::generate(language, &mut rng);
    let edit = Edit {
        start: 0,
        end: source.len(),
        replacement: generated,
    };
    MutationOutcome::from_edits(requested, source, vec![edit])
}

/// Issue 4: delete the last balanced `{...}` block strictly inside a function
/// body (braces included); if only outermost blocks exist, empty the last one
/// but keep its braces. C/C++ only.
pub fn mutate_issue4(source: &str, language: Language, _seed: u64) -> MutationOutcome {
    let requested = IssueKind::RemovedLastBracketedSection;
    if language == Language::Fortran {
        return MutationOutcome::inapplicable(requested, source);
    }
    let mask = lexer::code_mask(source);
    let bytes = source.as_bytes();
    let mut stack: Vec<usize> = Vec::new();
    // (open, close, depth); depth 1 = outermost
    let mut blocks: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &b) in bytes.iter().enumerate() {
        if !mask[i] {
            continue;
        }
        match b {
            b'{' => stack.push(i),
            b'}' => {
                if let Some(open) = stack.pop() {
                    blocks.push((open, i, stack.len() + 1));
                }
            }
            _ => {}
        }
    }
    if blocks.is_empty() {
        return MutationOutcome::inapplicable(requested, source);
    }
    let inner = blocks.iter().filter(|b| b.2 >= 2).max_by_key(|b| b.1);
    let edit = match inner {
        Some(&(open, close, _)) => Edit {
            start: open,
            end: close + 1,
            replacement: String::new(),
        },
        None => {
            let &(open, close, _) = blocks
                .iter()
                .filter(|b| b.2 == 1)
                .max_by_key(|b| b.1)
                .expect("non-empty blocks include depth 1");
            if open + 1 == close {
                // already empty; nothing to remove
                return MutationOutcome::inapplicable(requested, source);
            }
            Edit {
                start: open + 1,
                end: close,
                replacement: String::new(),
            }
        }
    };
    MutationOutcome::from_edits(requested, source, vec![edit])
}

/// Dispatch one issue against a case. Issue 5 is the identity. When the
/// requested operator does not apply, falls back through 0 -> 2 -> 3 (issue 3
/// always applies); the outcome's `issue` field records what actually ran.
pub fn apply(issue: IssueKind, case: &TestCase, seed: u64) -> MutationOutcome {
    if issue == IssueKind::NoIssue {
        return MutationOutcome {
            requested: issue,
            issue,
            mutated_source: case.source.clone(),
            edits: Vec::new(),
            applicable: true,
        };
    }
    let run = |kind: IssueKind| -> MutationOutcome {
        match kind {
            IssueKind::RemovedAllocationOrSwappedDirective => {
                mutate_issue0(&case.source, case.language, case.model, seed)
            }
            IssueKind::RemovedOpeningBracket => mutate_issue1(&case.source, case.language, seed),
            IssueKind::UndeclaredVariable => mutate_issue2(&case.source, case.language, seed),
            IssueKind::ReplacedWithGeneratedCode => {
                mutate_issue3(&case.source, case.language, case.model, seed)
            }
            IssueKind::RemovedLastBracketedSection => {
                mutate_issue4(&case.source, case.language, seed)
            }
            IssueKind::NoIssue => unreachable!("identity handled above"),
        }
    };
    let first = run(issue);
    if first.applicable {
        return first;
    }
    for fallback in [
        IssueKind::RemovedAllocationOrSwappedDirective,
        IssueKind::UndeclaredVariable,
        IssueKind::ReplacedWithGeneratedCode,
    ] {
        if fallback == issue {
            continue;
        }
        let outcome = run(fallback);
        if outcome.applicable {
            return MutationOutcome {
                requested: issue,
                ..outcome
            };
        }
    }
    first
}
