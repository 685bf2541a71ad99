//! On-disk index files.
//!
//! Every file starts with the magic `CQK1` followed by one type byte. The
//! remainder is a sequence of little-endian `u32` values, except for `.lex`
//! files which hold NUL-terminated UTF-8 strings. Offsets stored in `.lexidx`
//! are relative to the first byte after the header.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CQK1";
pub const HEADER_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FileKind {
    Lexicon = 0x01,
    LexiconIndex = 0x02,
    Tokens = 0x03,
    Inverted = 0x04,
    InvertedIndex = 0x05,
    Regions = 0x06,
    Bigrams = 0x07,
    Alignment = 0x08,
}

pub fn lex_path(home: &Path, attr: &str) -> PathBuf {
    home.join(format!("{attr}.lex"))
}
pub fn lexidx_path(home: &Path, attr: &str) -> PathBuf {
    home.join(format!("{attr}.lexidx"))
}
pub fn tok_path(home: &Path, attr: &str) -> PathBuf {
    home.join(format!("{attr}.tok"))
}
pub fn inv_path(home: &Path, attr: &str) -> PathBuf {
    home.join(format!("{attr}.inv"))
}
pub fn invidx_path(home: &Path, attr: &str) -> PathBuf {
    home.join(format!("{attr}.invidx"))
}
pub fn rng_path(home: &Path, structure: &str) -> PathBuf {
    home.join(format!("{structure}.rng"))
}
pub fn bgr_path(home: &Path, attr: &str, window: u32) -> PathBuf {
    home.join(format!("{attr}.w{window}.bgr"))
}
pub fn alg_path(home: &Path, target: &str) -> PathBuf {
    home.join(format!("{target}.alg"))
}

fn header(kind: FileKind) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    buf.extend_from_slice(MAGIC);
    buf.push(kind as u8);
    buf
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_file(path: &Path, kind: FileKind) -> Result<Vec<u8>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingFile(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(format!("reading {}", path.display()), e)),
    };
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(format_err(path, "bad magic"));
    }
    if bytes[4] != kind as u8 {
        return Err(format_err(
            path,
            format!("expected file type {:#04x}, found {:#04x}", kind as u8, bytes[4]),
        ));
    }
    Ok(bytes)
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn encode_u32s(kind: FileKind, values: &[u32]) -> Vec<u8> {
    let mut buf = header(kind);
    buf.reserve(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn write_u32s(path: &Path, kind: FileKind, values: &[u32]) -> Result<()> {
    write_file(path, &encode_u32s(kind, values))
}

pub fn read_u32s(path: &Path, kind: FileKind) -> Result<Vec<u32>> {
    let bytes = read_file(path, kind)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() % 4 != 0 {
        return Err(format_err(path, "truncated u32 payload"));
    }
    Ok(body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Reads a file of `u32` pairs.
pub fn read_pairs(path: &Path, kind: FileKind) -> Result<Vec<(u32, u32)>> {
    let flat = read_u32s(path, kind)?;
    if flat.len() % 2 != 0 {
        return Err(format_err(path, "odd number of values in pair file"));
    }
    Ok(flat.chunks_exact(2).map(|c| (c[0], c[1])).collect())
}

pub fn write_pairs(path: &Path, kind: FileKind, pairs: &[(u32, u32)]) -> Result<()> {
    let flat: Vec<u32> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    write_u32s(path, kind, &flat)
}

/// Writes `<attr>.lex` and `<attr>.lexidx`.
pub fn write_lexicon(home: &Path, attr: &str, lexicon: &[String]) -> Result<()> {
    let mut lex = header(FileKind::Lexicon);
    let mut offsets = Vec::with_capacity(lexicon.len());
    for entry in lexicon {
        offsets.push((lex.len() - HEADER_LEN) as u32);
        lex.extend_from_slice(entry.as_bytes());
        lex.push(0);
    }
    write_file(&lex_path(home, attr), &lex)?;
    write_u32s(&lexidx_path(home, attr), FileKind::LexiconIndex, &offsets)
}

pub fn read_lexicon(home: &Path, attr: &str) -> Result<Vec<String>> {
    let path = lex_path(home, attr);
    let bytes = read_file(&path, FileKind::Lexicon)?;
    let body = &bytes[HEADER_LEN..];
    let offsets = read_u32s(&lexidx_path(home, attr), FileKind::LexiconIndex)?;
    let mut lexicon = Vec::with_capacity(offsets.len());
    for &off in &offsets {
        let start = off as usize;
        let len = body
            .get(start..)
            .and_then(|rest| rest.iter().position(|&b| b == 0))
            .ok_or_else(|| format_err(&path, format!("bad lexicon offset {off}")))?;
        let s = std::str::from_utf8(&body[start..start + len])
            .map_err(|_| format_err(&path, "lexicon entry is not UTF-8"))?;
        lexicon.push(s.to_owned());
    }
    Ok(lexicon)
}
