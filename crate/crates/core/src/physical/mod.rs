//! Physical layer: uniform access to positional, structural, bigram,
//! alignment and dynamic attributes of one corpus.

mod attribute;
mod bigram;
mod dynamic;
mod structure;

use std::borrow::Cow;
use std::collections::HashSet;
use std::path::Path;

pub use attribute::{invert, PositionalAttribute};
pub use bigram::BigramTable;
pub use dynamic::{eval_dynamic, DynamicAttributeDecl, Value, ValueType};
pub use structure::StructuralRegions;

use crate::binfmt::{self, FileKind};
use crate::error::{Error, Result};

/// Region-to-region correspondence with a parallel corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentMap {
    pub target: String,
    /// Structural attribute whose regions are aligned, on both sides.
    pub structure: String,
    /// (source region, target region), sorted by source, each source once.
    pub pairs: Vec<(u32, u32)>,
    /// Bounds of the target corpus' regions.
    pub target_regions: Vec<(u32, u32)>,
}

impl AlignmentMap {
    pub fn new(
        target: impl Into<String>,
        structure: impl Into<String>,
        pairs: Vec<(u32, u32)>,
        target_regions: Vec<(u32, u32)>,
    ) -> Result<Self> {
        if pairs.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidCorpus(
                "alignment pairs must be sorted by source region with no repeats".into(),
            ));
        }
        if let Some(&(_, t)) = pairs.iter().find(|&&(_, t)| t as usize >= target_regions.len()) {
            return Err(Error::InvalidCorpus(format!(
                "alignment refers to target region {t}, target has {}",
                target_regions.len()
            )));
        }
        Ok(AlignmentMap {
            target: target.into(),
            structure: structure.into(),
            pairs,
            target_regions,
        })
    }

    pub fn target_of(&self, source_region: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&(source_region as u32), |&(s, _)| s)
            .ok()
            .map(|i| self.pairs[i].1 as usize)
    }

    pub fn write(&self, home: &Path) -> Result<()> {
        binfmt::write_pairs(
            &binfmt::alg_path(home, &self.target),
            FileKind::Alignment,
            &self.pairs,
        )
    }

    pub fn read_pairs(home: &Path, target: &str) -> Result<Vec<(u32, u32)>> {
        binfmt::read_pairs(&binfmt::alg_path(home, target), FileKind::Alignment)
    }
}

/// An encoded corpus. Immutable once built; all accessors take `&self`.
#[derive(Debug)]
pub struct Corpus {
    id: String,
    size: usize,
    positional: Vec<PositionalAttribute>,
    structural: Vec<StructuralRegions>,
    dynamic: Vec<DynamicAttributeDecl>,
    bigrams: Vec<BigramTable>,
    alignment: Option<AlignmentMap>,
}

impl Corpus {
    pub fn new(
        id: impl Into<String>,
        positional: Vec<PositionalAttribute>,
        structural: Vec<StructuralRegions>,
        dynamic: Vec<DynamicAttributeDecl>,
    ) -> Result<Self> {
        let id = id.into();
        let word = positional
            .iter()
            .find(|a| a.name() == "word")
            .ok_or_else(|| {
                Error::InvalidCorpus(format!("corpus `{id}` has no `word` attribute"))
            })?;
        let size = word.size();
        let mut names = HashSet::new();
        for name in positional
            .iter()
            .map(|a| a.name())
            .chain(structural.iter().map(|s| s.name()))
            .chain(dynamic.iter().map(|d| d.name.as_str()))
        {
            if !names.insert(name) {
                return Err(Error::InvalidCorpus(format!(
                    "attribute name `{name}` declared twice"
                )));
            }
        }
        if let Some(a) = positional.iter().find(|a| a.size() != size) {
            return Err(Error::InvalidCorpus(format!(
                "attribute `{}` has {} positions, `word` has {size}",
                a.name(),
                a.size()
            )));
        }
        for s in &structural {
            if let Some(&(_, end)) = s.regions().last() {
                if end as usize >= size {
                    return Err(Error::InvalidCorpus(format!(
                        "region of `{}` ends at {end}, beyond corpus size {size}",
                        s.name()
                    )));
                }
            }
        }
        Ok(Corpus {
            id,
            size,
            positional,
            structural,
            dynamic,
            bigrams: Vec::new(),
            alignment: None,
        })
    }

    pub fn with_bigrams(mut self, tables: Vec<BigramTable>) -> Result<Self> {
        for t in &tables {
            self.attribute(t.attribute())?;
        }
        self.bigrams = tables;
        Ok(self)
    }

    pub fn with_alignment(mut self, alignment: AlignmentMap) -> Result<Self> {
        let source = self.structure(&alignment.structure)?;
        if let Some(&(s, _)) = alignment.pairs.iter().find(|&&(s, _)| s as usize >= source.len()) {
            return Err(Error::InvalidCorpus(format!(
                "alignment refers to source region {s}, corpus has {}",
                source.len()
            )));
        }
        self.alignment = Some(alignment);
        Ok(self)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn positional(&self) -> &[PositionalAttribute] {
        &self.positional
    }

    pub fn structural(&self) -> &[StructuralRegions] {
        &self.structural
    }

    pub fn dynamic(&self) -> &[DynamicAttributeDecl] {
        &self.dynamic
    }

    pub fn bigram_tables(&self) -> &[BigramTable] {
        &self.bigrams
    }

    pub fn alignment(&self) -> Option<&AlignmentMap> {
        self.alignment.as_ref()
    }

    pub fn attribute(&self, name: &str) -> Result<&PositionalAttribute> {
        self.attribute_index(name).map(|i| &self.positional[i])
    }

    pub fn attribute_index(&self, name: &str) -> Result<usize> {
        self.positional
            .iter()
            .position(|a| a.name() == name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_owned()))
    }

    pub fn structure(&self, name: &str) -> Result<&StructuralRegions> {
        self.structure_index(name).map(|i| &self.structural[i])
    }

    pub fn structure_index(&self, name: &str) -> Result<usize> {
        self.structural
            .iter()
            .position(|s| s.name() == name)
            .ok_or_else(|| Error::UnknownStructure(name.to_owned()))
    }

    pub fn dynamic_index(&self, name: &str) -> Result<usize> {
        self.dynamic
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::UnknownDynamic(name.to_owned()))
    }

    pub fn value_at(&self, attr: &str, pos: usize) -> Result<Cow<'_, str>> {
        self.attribute(attr)?.value_at(pos)
    }

    pub fn str_to_id(&self, attr: &str, value: &str) -> Result<Option<u32>> {
        self.attribute(attr)?.str_to_id(value)
    }

    pub fn positions_of(&self, attr: &str, id: u32) -> Result<Cow<'_, [u32]>> {
        self.attribute(attr)?.positions(id)
    }

    pub fn freq(&self, attr: &str, id: u32) -> Result<usize> {
        self.attribute(attr)?.freq(id)
    }

    pub fn region_containing(&self, structure: &str, pos: usize) -> Result<Option<usize>> {
        let s = self.structure(structure)?;
        if pos >= self.size {
            return Err(Error::PositionOutOfRange {
                pos,
                size: self.size,
            });
        }
        Ok(s.region_containing(pos))
    }

    pub fn bigram_table(&self, attr: &str, window: u32) -> Result<&BigramTable> {
        self.bigrams
            .iter()
            .find(|t| t.attribute() == attr && t.window() == window)
            .ok_or_else(|| Error::NoBigramTable {
                attr: attr.to_owned(),
                window,
            })
    }

    pub fn bigram_count(&self, attr: &str, window: u32, id1: u32, id2: u32) -> Result<u32> {
        let table = self.bigram_table(attr, window)?;
        let a = self.attribute(attr)?;
        let len = a.lexicon_len()?;
        for id in [id1, id2] {
            if id as usize >= len {
                return Err(Error::IdOutOfRange {
                    attr: attr.to_owned(),
                    id,
                    len,
                });
            }
        }
        Ok(table.count(id1, id2))
    }

    /// Target-corpus interval aligned with `start..=end`: the hull of the
    /// targets of all aligned source regions overlapping the interval.
    pub fn aligned_range(&self, start: usize, end: usize) -> Result<Option<(usize, usize)>> {
        let alignment = self
            .alignment
            .as_ref()
            .ok_or_else(|| Error::NotAligned(self.id.clone()))?;
        let source = self.structure(&alignment.structure)?;
        let mut hull: Option<(usize, usize)> = None;
        for region in source.overlapping(start, end) {
            if let Some(t) = alignment.target_of(region) {
                let (ts, te) = alignment.target_regions[t];
                let (ts, te) = (ts as usize, te as usize);
                hull = Some(match hull {
                    None => (ts, te),
                    Some((a, b)) => (a.min(ts), b.max(te)),
                });
            }
        }
        Ok(hull)
    }
}
