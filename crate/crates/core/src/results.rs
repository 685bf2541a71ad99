//! Match sets, result files and set operations.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};
use crate::physical::Corpus;

/// A sorted, duplicate-free set of inclusive corpus intervals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatchSet {
    corpus: String,
    intervals: Vec<(usize, usize)>,
}

impl MatchSet {
    /// Sorts and deduplicates; rejects intervals with start > end.
    pub fn new(corpus: impl Into<String>, mut intervals: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(s, e)) = intervals.iter().find(|(s, e)| s > e) {
            return Err(Error::ResultFormat(format!("interval [{s},{e}] has start after end")));
        }
        intervals.sort_unstable();
        intervals.dedup();
        Ok(MatchSet {
            corpus: corpus.into(),
            intervals,
        })
    }

    pub fn empty(corpus: impl Into<String>) -> Self {
        MatchSet {
            corpus: corpus.into(),
            intervals: Vec::new(),
        }
    }

    pub(crate) fn from_sorted(corpus: &str, intervals: Vec<(usize, usize)>) -> Self {
        debug_assert!(intervals.windows(2).all(|w| w[0] < w[1]));
        MatchSet {
            corpus: corpus.to_owned(),
            intervals,
        }
    }

    pub fn corpus(&self) -> &str {
        &self.corpus
    }

    pub fn intervals(&self) -> &[(usize, usize)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, interval: (usize, usize)) -> bool {
        self.intervals.binary_search(&interval).is_ok()
    }

    pub fn ensure_corpus(&self, id: &str) -> Result<()> {
        if self.corpus == id {
            Ok(())
        } else {
            Err(Error::CorpusMismatch {
                expected: id.to_owned(),
                found: self.corpus.clone(),
            })
        }
    }

    /// Checks that the set belongs to `corpus` and lies within its bounds.
    pub fn check_against(&self, corpus: &Corpus) -> Result<()> {
        self.ensure_corpus(corpus.id())?;
        match self.intervals.last() {
            Some(&(_, end)) if end >= corpus.size() => Err(Error::PositionOutOfRange {
                pos: end,
                size: corpus.size(),
            }),
            _ => Ok(()),
        }
    }

    /// True if `interval` lies inside one of this set's intervals.
    pub fn covers(&self, (start, end): (usize, usize)) -> bool {
        let k = self.intervals.partition_point(|&(s, _)| s <= start);
        self.intervals[..k].iter().any(|&(_, e)| e >= end)
    }
}

/// A match set with its provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedResult {
    pub name: String,
    pub matchset: MatchSet,
    pub query: Option<String>,
    pub created_at: DateTime<Utc>,
}

impl NamedResult {
    pub fn new(name: impl Into<String>, matchset: MatchSet, query: Option<String>) -> Self {
        NamedResult {
            name: name.into(),
            matchset,
            query,
            created_at: Utc::now(),
        }
    }
}

const HEADER: &str = "cqk-result 1";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str, line: usize) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('t') => out.push('\t'),
            other => {
                return Err(Error::ResultFormat(format!(
                    "line {line}: bad escape `\\{}`",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

/// Text form of a result file.
pub fn format_result(result: &NamedResult) -> String {
    let mut out = format!("{HEADER}\ncorpus {}\n", result.matchset.corpus);
    if let Some(q) = &result.query {
        let _ = writeln!(out, "query {}", escape(q));
    }
    for (s, e) in &result.matchset.intervals {
        let _ = writeln!(out, "{s}\t{e}");
    }
    out
}

/// Parses the text form of a result file.
pub fn parse_result(name: &str, text: &str) -> Result<NamedResult> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, HEADER)) => {}
        _ => return Err(Error::ResultFormat(format!("missing `{HEADER}` header"))),
    }
    let corpus = match lines.next() {
        Some((_, l)) if l.starts_with("corpus ") && l.len() > 7 => l[7..].to_owned(),
        _ => return Err(Error::ResultFormat("line 2: expected `corpus <id>`".into())),
    };
    let mut query = None;
    let mut intervals = Vec::new();
    for (n, line) in lines {
        if n == 3 {
            if let Some(q) = line.strip_prefix("query ") {
                query = Some(unescape(q, n)?);
                continue;
            }
        }
        let parsed = line
            .split_once('\t')
            .and_then(|(s, e)| Some((s.parse().ok()?, e.parse().ok()?)));
        match parsed {
            Some(iv) => intervals.push(iv),
            None => {
                return Err(Error::ResultFormat(format!(
                    "line {n}: expected `start<TAB>end`"
                )))
            }
        }
    }
    if intervals.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ResultFormat("intervals are not sorted".into()));
    }
    Ok(NamedResult {
        name: name.to_owned(),
        matchset: MatchSet::new(corpus, intervals)?,
        query,
        created_at: Utc::now(),
    })
}

pub fn save_result(result: &NamedResult, path: &Path) -> Result<()> {
    fs::write(path, format_result(result))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Loads a result file; the result is named after the file stem.
pub fn load_result(path: &Path) -> Result<NamedResult> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_result(&name, &text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
}

impl std::str::FromStr for SetOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(SetOp::Union),
            "intersection" | "intersect" => Ok(SetOp::Intersection),
            "difference" | "diff" => Ok(SetOp::Difference),
            other => Err(Error::Type(format!("unknown set operation `{other}`"))),
        }
    }
}

/// Set operation on exact intervals; overlapping intervals are not merged.
pub fn set_op(kind: SetOp, a: &MatchSet, b: &MatchSet) -> Result<MatchSet> {
    b.ensure_corpus(&a.corpus)?;
    let (x, y): (BTreeSet<_>, BTreeSet<_>) = (
        a.intervals.iter().copied().collect(),
        b.intervals.iter().copied().collect(),
    );
    let intervals = match kind {
        SetOp::Union => x.union(&y).copied().collect(),
        SetOp::Intersection => x.intersection(&y).copied().collect(),
        SetOp::Difference => x.difference(&y).copied().collect(),
    };
    Ok(MatchSet::from_sorted(&a.corpus, intervals))
}

/// Turns a result into a subcorpus. With `expand`, every interval becomes
/// the hull of the regions of that structure it overlaps; intervals
/// overlapping no region are dropped.
pub fn as_subcorpus(result: &MatchSet, expand: Option<&str>, corpus: &Corpus) -> Result<MatchSet> {
    result.check_against(corpus)?;
    let Some(name) = expand else {
        return Ok(result.clone());
    };
    let structure = corpus.structure(name)?;
    let mut out = Vec::with_capacity(result.len());
    for &(s, e) in &result.intervals {
        let range = structure.overlapping(s, e);
        if range.is_empty() {
            continue;
        }
        let regions = structure.regions();
        out.push((regions[range.start].0 as usize, regions[range.end - 1].1 as usize));
    }
    MatchSet::new(&result.corpus, out)
}
