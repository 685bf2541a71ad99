use std::borrow::Cow;
use std::collections::HashMap;
use std::path::Path;

use crate::binfmt::{self, FileKind};
use crate::error::{Error, Result};
use crate::remote::RemoteAttribute;

/// A positional attribute: one string value per corpus position, stored as a
/// lexicon of distinct values, an id stream and an inverted index.
///
/// Whether the data lives in local files or behind a remote server is not
/// visible through this type's methods.
#[derive(Debug)]
pub struct PositionalAttribute {
    name: String,
    store: Store,
}

#[derive(Debug)]
enum Store {
    Local(LocalStore),
    Remote(RemoteAttribute),
}

#[derive(Debug, Clone)]
pub(crate) struct LocalStore {
    lexicon: Vec<String>,
    lookup: HashMap<String, u32>,
    stream: Vec<u32>,
    inverted: Vec<u32>,
    /// Per value id: (offset into `inverted`, count).
    inv_index: Vec<(u32, u32)>,
}

impl LocalStore {
    fn new(lexicon: Vec<String>, stream: Vec<u32>) -> Self {
        let lookup = lexicon
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let (inverted, inv_index) = invert(&stream, lexicon.len());
        LocalStore {
            lexicon,
            lookup,
            stream,
            inverted,
            inv_index,
        }
    }
}

/// Builds the inverted index for an id stream: concatenated ascending
/// position lists plus (offset, count) per id.
pub fn invert(stream: &[u32], lexicon_len: usize) -> (Vec<u32>, Vec<(u32, u32)>) {
    let mut counts = vec![0u32; lexicon_len];
    for &id in stream {
        counts[id as usize] += 1;
    }
    let mut index = Vec::with_capacity(lexicon_len);
    let mut offset = 0u32;
    for &c in &counts {
        index.push((offset, c));
        offset += c;
    }
    let mut fill: Vec<u32> = index.iter().map(|&(o, _)| o).collect();
    let mut inverted = vec![0u32; stream.len()];
    for (pos, &id) in stream.iter().enumerate() {
        let slot = &mut fill[id as usize];
        inverted[*slot as usize] = pos as u32;
        *slot += 1;
    }
    (inverted, index)
}

impl PositionalAttribute {
    /// Builds an in-memory attribute from one value per position. Value ids
    /// are assigned in order of first occurrence.
    pub fn from_values<S: AsRef<str>>(name: impl Into<String>, values: &[S]) -> Self {
        let mut lexicon: Vec<String> = Vec::new();
        let mut lookup: HashMap<&str, u32> = HashMap::new();
        let mut stream = Vec::with_capacity(values.len());
        for v in values {
            let v = v.as_ref();
            let id = *lookup.entry(v).or_insert_with(|| {
                lexicon.push(v.to_owned());
                (lexicon.len() - 1) as u32
            });
            stream.push(id);
        }
        PositionalAttribute {
            name: name.into(),
            store: Store::Local(LocalStore::new(lexicon, stream)),
        }
    }

    /// Loads an attribute from `home`. The inverted index is read from
    /// `.inv/.invidx` when present and rebuilt in memory otherwise.
    pub fn load(home: &Path, name: &str) -> Result<Self> {
        let lexicon = binfmt::read_lexicon(home, name)?;
        let tok_path = binfmt::tok_path(home, name);
        let stream = binfmt::read_u32s(&tok_path, FileKind::Tokens)?;
        if let Some(bad) = stream.iter().find(|&&id| id as usize >= lexicon.len()) {
            return Err(Error::Format {
                path: tok_path,
                message: format!("value id {bad} exceeds lexicon size {}", lexicon.len()),
            });
        }
        let inv_path = binfmt::inv_path(home, name);
        let store = if inv_path.exists() {
            let inverted = binfmt::read_u32s(&inv_path, FileKind::Inverted)?;
            let idx_path = binfmt::invidx_path(home, name);
            let inv_index = binfmt::read_pairs(&idx_path, FileKind::InvertedIndex)?;
            let consistent = inverted.len() == stream.len()
                && inv_index.len() == lexicon.len()
                && inv_index
                    .iter()
                    .all(|&(o, c)| (o as usize + c as usize) <= inverted.len());
            if !consistent {
                return Err(Error::Format {
                    path: idx_path,
                    message: "inverted index does not match token stream".into(),
                });
            }
            let lookup = lexicon
                .iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i as u32))
                .collect();
            LocalStore {
                lexicon,
                lookup,
                stream,
                inverted,
                inv_index,
            }
        } else {
            LocalStore::new(lexicon, stream)
        };
        Ok(PositionalAttribute {
            name: name.to_owned(),
            store: Store::Local(store),
        })
    }

    pub(crate) fn remote(name: impl Into<String>, remote: RemoteAttribute) -> Self {
        PositionalAttribute {
            name: name.into(),
            store: Store::Remote(remote),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_remote(&self) -> bool {
        matches!(self.store, Store::Remote(_))
    }

    /// Number of corpus positions covered by this attribute.
    pub fn size(&self) -> usize {
        match &self.store {
            Store::Local(s) => s.stream.len(),
            Store::Remote(r) => r.size(),
        }
    }

    pub fn lexicon_len(&self) -> Result<usize> {
        match &self.store {
            Store::Local(s) => Ok(s.lexicon.len()),
            Store::Remote(r) => Ok(r.lexicon_len()),
        }
    }

    fn check_pos(&self, pos: usize) -> Result<()> {
        let size = self.size();
        if pos >= size {
            return Err(Error::PositionOutOfRange { pos, size });
        }
        Ok(())
    }

    fn check_id(&self, id: u32) -> Result<()> {
        let len = self.lexicon_len()?;
        if id as usize >= len {
            return Err(Error::IdOutOfRange {
                attr: self.name.clone(),
                id,
                len,
            });
        }
        Ok(())
    }

    pub fn id_at(&self, pos: usize) -> Result<u32> {
        self.check_pos(pos)?;
        match &self.store {
            Store::Local(s) => Ok(s.stream[pos]),
            Store::Remote(r) => r.id_at(pos),
        }
    }

    /// Ids for positions `start..start + count`.
    pub fn ids(&self, start: usize, count: usize) -> Result<Cow<'_, [u32]>> {
        let size = self.size();
        let end = start.checked_add(count).filter(|&e| e <= size).ok_or(
            Error::PositionOutOfRange {
                pos: start.saturating_add(count).saturating_sub(1),
                size,
            },
        )?;
        match &self.store {
            Store::Local(s) => Ok(Cow::Borrowed(&s.stream[start..end])),
            Store::Remote(r) => r.ids(start, count).map(Cow::Owned),
        }
    }

    pub fn id_to_str(&self, id: u32) -> Result<Cow<'_, str>> {
        self.check_id(id)?;
        match &self.store {
            Store::Local(s) => Ok(Cow::Borrowed(&s.lexicon[id as usize])),
            Store::Remote(r) => r.id_to_str(id).map(Cow::Owned),
        }
    }

    pub fn str_to_id(&self, value: &str) -> Result<Option<u32>> {
        match &self.store {
            Store::Local(s) => Ok(s.lookup.get(value).copied()),
            Store::Remote(r) => r.str_to_id(value),
        }
    }

    pub fn value_at(&self, pos: usize) -> Result<Cow<'_, str>> {
        let id = self.id_at(pos)?;
        self.id_to_str(id)
    }

    /// Ascending positions carrying value `id`.
    pub fn positions(&self, id: u32) -> Result<Cow<'_, [u32]>> {
        self.check_id(id)?;
        match &self.store {
            Store::Local(s) => {
                let (off, count) = s.inv_index[id as usize];
                Ok(Cow::Borrowed(
                    &s.inverted[off as usize..(off + count) as usize],
                ))
            }
            Store::Remote(r) => r.positions(id).map(Cow::Owned),
        }
    }

    pub fn freq(&self, id: u32) -> Result<usize> {
        self.check_id(id)?;
        match &self.store {
            Store::Local(s) => Ok(s.inv_index[id as usize].1 as usize),
            Store::Remote(r) => r.positions(id).map(|p| p.len()),
        }
    }

    /// Full lexicon in id order.
    pub fn lexicon(&self) -> Result<Cow<'_, [String]>> {
        match &self.store {
            Store::Local(s) => Ok(Cow::Borrowed(&s.lexicon)),
            Store::Remote(r) => r.lexicon().map(Cow::Owned),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word() -> PositionalAttribute {
        PositionalAttribute::from_values("word", &["the", "cat", "sat", "the", "dogs", "sat"])
    }

    #[test]
    fn first_occurrence_ids() {
        let w = word();
        assert_eq!(w.lexicon().unwrap().as_ref(), ["the", "cat", "sat", "dogs"]);
        assert_eq!(w.ids(0, 6).unwrap().as_ref(), [0, 1, 2, 0, 3, 2]);
        assert_eq!(w.str_to_id("the").unwrap(), Some(0));
        assert_eq!(w.str_to_id("zebra").unwrap(), None);
    }

    #[test]
    fn inverted_lists() {
        let w = word();
        assert_eq!(w.positions(0).unwrap().as_ref(), [0, 3]);
        assert_eq!(w.positions(1).unwrap().as_ref(), [1]);
        assert_eq!(w.positions(2).unwrap().as_ref(), [2, 5]);
        assert_eq!(w.freq(3).unwrap(), 1);
        assert!(matches!(w.positions(4), Err(Error::IdOutOfRange { .. })));
    }

    #[test]
    fn empty_attribute_rejects_every_id() {
        let w = PositionalAttribute::from_values::<&str>("word", &[]);
        assert_eq!(w.size(), 0);
        assert!(matches!(w.positions(0), Err(Error::IdOutOfRange { .. })));
        assert!(matches!(w.value_at(0), Err(Error::PositionOutOfRange { .. })));
    }

    #[test]
    fn out_of_range_ids_slice() {
        let w = word();
        assert!(w.ids(4, 3).is_err());
        assert_eq!(w.ids(4, 2).unwrap().as_ref(), [3, 2]);
        assert!(w.ids(usize::MAX, 2).is_err());
    }
}
