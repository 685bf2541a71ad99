//! Encoding of one-token-per-line ("vertical") text into index files.
//!
//! Token lines carry TAB-separated values, one column per positional
//! attribute. Lines of the form `<name>` and `</name>` open and close a
//! region of structural attribute `name` and do not consume a position.
//! Blank lines are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::binfmt::{self, FileKind};
use crate::error::{Error, Result};
use crate::physical::{BigramTable, Corpus, PositionalAttribute, StructuralRegions};

/// Parsed vertical text: a token matrix plus regions per structural name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerticalDocument {
    pub positional: Vec<String>,
    pub structural: Vec<String>,
    /// One row per position, one value per positional attribute.
    pub tokens: Vec<Vec<String>>,
    /// Parallel to `structural`.
    pub regions: Vec<Vec<(u32, u32)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeSummary {
    pub size: usize,
    pub positional: usize,
    pub structural: usize,
}

impl std::fmt::Display for EncodeSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} tokens, {} positional, {} structural",
            self.size, self.positional, self.structural
        )
    }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Recognizes `<name>` / `</name>`; returns (name, is_close).
fn marker(line: &str) -> Option<(&str, bool)> {
    if line.contains('\t') {
        return None;
    }
    let inner = line.strip_prefix('<')?.strip_suffix('>')?;
    let (name, close) = match inner.strip_prefix('/') {
        Some(n) => (n, true),
        None => (inner, false),
    };
    is_name(name).then_some((name, close))
}

impl VerticalDocument {
    pub fn parse_bytes(input: &[u8], positional: &[&str], structural: &[&str]) -> Result<Self> {
        let text = std::str::from_utf8(input).map_err(|_| Error::InvalidUtf8)?;
        Self::parse(text, positional, structural)
    }

    pub fn parse(text: &str, positional: &[&str], structural: &[&str]) -> Result<Self> {
        if !positional.contains(&"word") {
            return Err(Error::InvalidCorpus(
                "positional attributes must include `word`".into(),
            ));
        }
        let mut tokens: Vec<Vec<String>> = Vec::new();
        let mut regions: Vec<Vec<(u32, u32)>> = vec![Vec::new(); structural.len()];
        let mut open: Vec<Option<(u32, usize)>> = vec![None; structural.len()];

        for (idx, raw) in text.split('\n').enumerate() {
            let line_no = idx + 1;
            let line: String = raw.chars().filter(|&c| c != '\r').collect();
            if line.is_empty() {
                continue;
            }
            if let Some((name, close)) = marker(&line) {
                let bad = |message: String| Error::BadMarkup {
                    line: line_no,
                    message,
                };
                let s = structural
                    .iter()
                    .position(|&n| n == name)
                    .ok_or_else(|| bad(format!("undeclared structural attribute `{name}`")))?;
                let here = tokens.len() as u32;
                if close {
                    let (start, _) = open[s]
                        .take()
                        .ok_or_else(|| bad(format!("`</{name}>` without matching `<{name}>`")))?;
                    if here == start {
                        return Err(bad(format!("empty `{name}` region")));
                    }
                    regions[s].push((start, here - 1));
                } else {
                    if let Some((_, opened)) = open[s] {
                        return Err(bad(format!(
                            "nested `<{name}>` (previous opened on line {opened})"
                        )));
                    }
                    open[s] = Some((here, line_no));
                }
                continue;
            }
            let row: Vec<String> = line.split('\t').map(str::to_owned).collect();
            if row.len() != positional.len() {
                return Err(Error::RaggedLine {
                    line: line_no,
                    expected: positional.len(),
                    found: row.len(),
                });
            }
            tokens.push(row);
        }
        if let Some((s, (_, line))) = open
            .iter()
            .enumerate()
            .find_map(|(s, o)| o.map(|o| (s, o)))
        {
            return Err(Error::BadMarkup {
                line,
                message: format!("`<{}>` is never closed", structural[s]),
            });
        }
        Ok(VerticalDocument {
            positional: positional.iter().map(|s| s.to_string()).collect(),
            structural: structural.iter().map(|s| s.to_string()).collect(),
            tokens,
            regions,
        })
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn column(&self, index: usize) -> Vec<&str> {
        self.tokens.iter().map(|row| row[index].as_str()).collect()
    }

    /// Renders the document back to vertical text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (pos, row) in self.tokens.iter().enumerate() {
            let pos = pos as u32;
            for (name, regions) in self.structural.iter().zip(&self.regions) {
                if regions.iter().any(|&(s, _)| s == pos) {
                    let _ = writeln!(out, "<{name}>");
                }
            }
            out.push_str(&row.join("\t"));
            out.push('\n');
            for (name, regions) in self.structural.iter().zip(&self.regions).rev() {
                if regions.iter().any(|&(_, e)| e == pos) {
                    let _ = writeln!(out, "</{name}>");
                }
            }
        }
        out
    }

    /// Builds an in-memory corpus without touching the file system.
    pub fn to_corpus(&self, id: &str) -> Result<Corpus> {
        let positional = self
            .positional
            .iter()
            .enumerate()
            .map(|(i, name)| PositionalAttribute::from_values(name.clone(), &self.column(i)))
            .collect();
        let structural = self
            .structural
            .iter()
            .zip(&self.regions)
            .map(|(name, r)| StructuralRegions::new(name.clone(), r.clone()))
            .collect::<Result<_>>()?;
        Corpus::new(id, positional, structural, Vec::new())
    }
}

fn ensure_dir(home: &Path) -> Result<()> {
    fs::create_dir_all(home).map_err(|e| Error::io(format!("creating {}", home.display()), e))
}

fn write_positional(home: &Path, name: &str, values: &[&str]) -> Result<()> {
    let attr = PositionalAttribute::from_values(name, values);
    binfmt::write_lexicon(home, name, &attr.lexicon()?)?;
    binfmt::write_u32s(
        &binfmt::tok_path(home, name),
        FileKind::Tokens,
        &attr.ids(0, attr.size())?,
    )
}

/// Writes `.lex/.lexidx/.tok` per positional attribute and `.rng` per
/// structural attribute.
pub fn encode(doc: &VerticalDocument, home: &Path) -> Result<EncodeSummary> {
    ensure_dir(home)?;
    for (i, name) in doc.positional.iter().enumerate() {
        write_positional(home, name, &doc.column(i))?;
    }
    for (name, regions) in doc.structural.iter().zip(&doc.regions) {
        binfmt::write_pairs(&binfmt::rng_path(home, name), FileKind::Regions, regions)?;
    }
    Ok(EncodeSummary {
        size: doc.size(),
        positional: doc.positional.len(),
        structural: doc.structural.len(),
    })
}

/// Writes `.inv/.invidx` for an encoded attribute.
pub fn build_inverted_index(home: &Path, attr: &str) -> Result<()> {
    let lexicon = binfmt::read_lexicon(home, attr)?;
    let stream = binfmt::read_u32s(&binfmt::tok_path(home, attr), FileKind::Tokens)?;
    if stream.iter().any(|&id| id as usize >= lexicon.len()) {
        return Err(Error::Format {
            path: binfmt::tok_path(home, attr),
            message: "value id exceeds lexicon size".into(),
        });
    }
    let (inverted, index) = crate::physical::invert(&stream, lexicon.len());
    binfmt::write_u32s(&binfmt::inv_path(home, attr), FileKind::Inverted, &inverted)?;
    binfmt::write_pairs(&binfmt::invidx_path(home, attr), FileKind::InvertedIndex, &index)
}

/// Writes `<attr>.w<window>.bgr`.
pub fn build_bigram_table(home: &Path, attr: &str, window: u32) -> Result<BigramTable> {
    if window < 1 {
        return Err(Error::BadWindow);
    }
    let stream = binfmt::read_u32s(&binfmt::tok_path(home, attr), FileKind::Tokens)?;
    let table = BigramTable::build(attr, &stream, window)?;
    table.write(home)?;
    Ok(table)
}

/// Corpus size as recorded by `word.tok`.
pub fn encoded_size(home: &Path) -> Result<usize> {
    let path = binfmt::tok_path(home, "word");
    let meta = fs::metadata(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.clone()),
        _ => Error::io(format!("reading {}", path.display()), e),
    })?;
    let len = meta.len() as usize;
    if len < binfmt::HEADER_LEN || !(len - binfmt::HEADER_LEN).is_multiple_of(4) {
        return Err(Error::Format {
            path,
            message: "bad token file length".into(),
        });
    }
    Ok((len - binfmt::HEADER_LEN) / 4)
}

/// Adds a positional attribute to an encoded corpus. Only files belonging
/// to the new attribute are written.
pub fn add_positional_attribute<S: AsRef<str>>(home: &Path, attr: &str, column: &[S]) -> Result<()> {
    let size = encoded_size(home)?;
    if column.len() != size {
        return Err(Error::LengthMismatch {
            expected: size,
            got: column.len(),
        });
    }
    if binfmt::tok_path(home, attr).exists() || binfmt::lex_path(home, attr).exists() {
        return Err(Error::AttributeExists(attr.to_owned()));
    }
    let values: Vec<&str> = column.iter().map(|s| s.as_ref()).collect();
    write_positional(home, attr, &values)?;
    build_inverted_index(home, attr)
}

/// Reconstructs the token matrix and regions of a corpus.
pub fn decode(corpus: &Corpus) -> Result<VerticalDocument> {
    let size = corpus.size();
    let mut tokens = vec![Vec::with_capacity(corpus.positional().len()); size];
    for attr in corpus.positional() {
        let lexicon = attr.lexicon()?;
        for (pos, &id) in attr.ids(0, size)?.iter().enumerate() {
            tokens[pos].push(lexicon[id as usize].clone());
        }
    }
    Ok(VerticalDocument {
        positional: corpus.positional().iter().map(|a| a.name().to_owned()).collect(),
        structural: corpus.structural().iter().map(|s| s.name().to_owned()).collect(),
        tokens,
        regions: corpus.structural().iter().map(|s| s.regions().to_vec()).collect(),
    })
}
