//! Key-word-in-context concordance lines and aligned display.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::physical::Corpus;
use crate::results::MatchSet;

/// One corpus position with the values of the displayed attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub pos: usize,
    pub values: Vec<String>,
}

impl Token {
    /// Attribute values joined by `/`, e.g. `cat/NN`.
    pub fn text(&self) -> String {
        self.values.join("/")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KwicLine {
    pub interval: (usize, usize),
    pub left: Vec<Token>,
    pub matched: Vec<Token>,
    pub right: Vec<Token>,
    /// Region of the context structure containing the match start.
    pub region: Option<usize>,
}

fn join(tokens: &[Token]) -> String {
    tokens.iter().map(Token::text).collect::<Vec<_>>().join(" ")
}

impl KwicLine {
    pub fn left_text(&self) -> String {
        join(&self.left)
    }

    pub fn match_text(&self) -> String {
        join(&self.matched)
    }

    pub fn right_text(&self) -> String {
        join(&self.right)
    }

    /// `left <match> right`, omitting empty context zones.
    pub fn render(&self) -> String {
        let mut parts = Vec::with_capacity(3);
        if !self.left.is_empty() {
            parts.push(self.left_text());
        }
        parts.push(format!("<{}>", self.match_text()));
        if !self.right.is_empty() {
            parts.push(self.right_text());
        }
        parts.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Context {
    /// Up to this many tokens on each side.
    Tokens(usize),
    /// The rest of the region(s) of this structure around the match.
    Region(String),
}

impl std::str::FromStr for Context {
    type Err = std::convert::Infallible;

    /// A number means a token count, anything else a structure name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse() {
            Ok(n) => Context::Tokens(n),
            Err(_) => Context::Region(s.to_owned()),
        })
    }
}

fn tokens(corpus: &Corpus, attrs: &[usize], range: std::ops::Range<usize>) -> Result<Vec<Token>> {
    range
        .map(|pos| {
            let values = attrs
                .iter()
                .map(|&a| Ok(corpus.positional()[a].value_at(pos)?.into_owned()))
                .collect::<Result<_>>()?;
            Ok(Token { pos, values })
        })
        .collect()
}

/// Builds one line per interval, in result order.
pub fn kwic_lines(
    result: &MatchSet,
    corpus: &Corpus,
    context: &Context,
    attrs: &[&str],
) -> Result<Vec<KwicLine>> {
    result.check_against(corpus)?;
    let attrs = attrs
        .iter()
        .map(|a| corpus.attribute_index(a))
        .collect::<Result<Vec<_>>>()?;
    let structure = match context {
        Context::Region(name) => Some(corpus.structure(name)?),
        Context::Tokens(_) => None,
    };
    let size = corpus.size();
    result
        .intervals()
        .iter()
        .map(|&(start, end)| {
            let (from, to, region) = match (context, structure) {
                (Context::Tokens(n), _) => {
                    (start.saturating_sub(*n), end.saturating_add(*n).min(size - 1), None)
                }
                (_, Some(s)) => {
                    let first = s.region_containing(start);
                    let from = first.map_or(start, |r| s.regions()[r].0 as usize);
                    let to = s
                        .region_containing(end)
                        .map_or(end, |r| s.regions()[r].1 as usize);
                    (from, to, first)
                }
                (Context::Region(_), None) => unreachable!(),
            };
            Ok(KwicLine {
                interval: (start, end),
                left: tokens(corpus, &attrs, from..start)?,
                matched: tokens(corpus, &attrs, start..end + 1)?,
                right: tokens(corpus, &attrs, end + 1..to + 1)?,
                region,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortKey {
    Match,
    LeftContext,
    RightContext,
    Position,
}

impl std::str::FromStr for SortKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "match" => Ok(SortKey::Match),
            "left" | "left-context" => Ok(SortKey::LeftContext),
            "right" | "right-context" => Ok(SortKey::RightContext),
            "position" | "pos" => Ok(SortKey::Position),
            other => Err(Error::Type(format!("unknown sort key `{other}`"))),
        }
    }
}

/// Order in which to show `lines`: a permutation of their indices. Left
/// context compares tokens outward from the match; ties keep corpus order.
pub fn sort_lines(lines: &[KwicLine], key: SortKey) -> Vec<usize> {
    let keys: Vec<Vec<String>> = lines
        .iter()
        .map(|l| match key {
            SortKey::Match => l.matched.iter().map(Token::text).collect(),
            SortKey::LeftContext => l.left.iter().rev().map(Token::text).collect(),
            SortKey::RightContext => l.right.iter().map(Token::text).collect(),
            SortKey::Position => Vec::new(),
        })
        .collect();
    let mut order: Vec<usize> = (0..lines.len()).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .cmp(&keys[b])
            .then(lines[a].interval.cmp(&lines[b].interval))
    });
    order
}

/// Removes the intervals at `indices` (positions in result order).
pub fn delete_lines(result: &MatchSet, indices: &[usize]) -> Result<MatchSet> {
    let len = result.len();
    let mut drop = vec![false; len];
    for &index in indices {
        if index >= len {
            return Err(Error::LineIndex { index, len });
        }
        drop[index] = true;
    }
    let kept = result
        .intervals()
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(&iv, _)| iv)
        .collect();
    MatchSet::new(result.corpus(), kept)
}

/// One rendered line per KWIC line, newline-terminated.
pub fn render_lines<'a>(lines: impl IntoIterator<Item = &'a KwicLine>) -> String {
    lines.into_iter().map(|l| l.render() + "\n").collect()
}

pub fn export_text(lines: &[KwicLine], path: &Path) -> Result<()> {
    fs::write(path, render_lines(lines))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// A match shown in its source region(s) next to the aligned target text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedLine {
    pub interval: (usize, usize),
    /// Source region text with the match in angle brackets.
    pub source: String,
    /// `None` when no source region around the match is aligned.
    pub target: Option<String>,
}

fn words(corpus: &Corpus, attr: usize, from: usize, to: usize) -> Result<Vec<String>> {
    (from..=to)
        .map(|p| Ok(corpus.positional()[attr].value_at(p)?.into_owned()))
        .collect()
}

/// Aligned display for each interval; `target` is the corpus named by the
/// source's alignment.
pub fn aligned_lines(result: &MatchSet, source: &Corpus, target: &Corpus) -> Result<Vec<AlignedLine>> {
    result.check_against(source)?;
    let alignment = source
        .alignment()
        .ok_or_else(|| Error::NotAligned(source.id().to_owned()))?;
    if alignment.target != target.id() {
        return Err(Error::CorpusMismatch {
            expected: alignment.target.clone(),
            found: target.id().to_owned(),
        });
    }
    let structure = source.structure(&alignment.structure)?;
    let word = source.attribute_index("word")?;
    let target_word = target.attribute_index("word")?;
    result
        .intervals()
        .iter()
        .map(|&(start, end)| {
            let range = structure.overlapping(start, end);
            let (from, to) = if range.is_empty() {
                (start, end)
            } else {
                let r = structure.regions();
                (
                    (r[range.start].0 as usize).min(start),
                    (r[range.end - 1].1 as usize).max(end),
                )
            };
            let mut toks = words(source, word, from, to)?;
            toks[start - from].insert(0, '<');
            toks[end - from].push('>');
            let target_text = match source.aligned_range(start, end)? {
                Some((ts, te)) => Some(words(target, target_word, ts, te)?.join(" ")),
                None => None,
            };
            Ok(AlignedLine {
                interval: (start, end),
                source: toks.join(" "),
                target: target_text,
            })
        })
        .collect()
}

/// Two lines per match, `id: text`, separated by blank lines.
pub fn render_aligned(lines: &[AlignedLine], source_id: &str, target_id: &str) -> String {
    lines
        .iter()
        .map(|l| {
            format!(
                "{source_id}: {}\n{target_id}: {}\n",
                l.source,
                l.target.as_deref().unwrap_or("(unaligned)")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}
