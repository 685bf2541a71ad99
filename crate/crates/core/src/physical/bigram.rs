use std::collections::BTreeMap;
use std::path::Path;

use crate::binfmt::{self, FileKind};
use crate::error::{Error, Result};

/// Co-occurrence counts of value pairs of one positional attribute, for all
/// position pairs at distance `1..=window`. Structural boundaries are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigramTable {
    attribute: String,
    window: u32,
    /// (id1, id2, count), sorted by (id1, id2); counts are >= 1.
    entries: Vec<(u32, u32, u32)>,
}

impl BigramTable {
    pub fn build(attribute: impl Into<String>, stream: &[u32], window: u32) -> Result<Self> {
        if window < 1 {
            return Err(Error::BadWindow);
        }
        let mut counts: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        for (p, &a) in stream.iter().enumerate() {
            for &b in stream.iter().skip(p + 1).take(window as usize) {
                *counts.entry((a, b)).or_insert(0) += 1;
            }
        }
        Ok(BigramTable {
            attribute: attribute.into(),
            window,
            entries: counts.into_iter().map(|((a, b), c)| (a, b, c)).collect(),
        })
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn entries(&self) -> &[(u32, u32, u32)] {
        &self.entries
    }

    pub fn count(&self, id1: u32, id2: u32) -> u32 {
        self.entries
            .binary_search_by_key(&(id1, id2), |&(a, b, _)| (a, b))
            .map(|i| self.entries[i].2)
            .unwrap_or(0)
    }

    pub fn write(&self, home: &Path) -> Result<()> {
        let mut flat = Vec::with_capacity(1 + self.entries.len() * 3);
        flat.push(self.window);
        for &(a, b, c) in &self.entries {
            flat.extend_from_slice(&[a, b, c]);
        }
        binfmt::write_u32s(
            &binfmt::bgr_path(home, &self.attribute, self.window),
            FileKind::Bigrams,
            &flat,
        )
    }

    pub fn load(home: &Path, attribute: &str, window: u32) -> Result<Self> {
        let path = binfmt::bgr_path(home, attribute, window);
        let flat = binfmt::read_u32s(&path, FileKind::Bigrams)?;
        let bad = |message: &str| Error::Format {
            path: path.clone(),
            message: message.into(),
        };
        let (&stored_window, rest) = flat.split_first().ok_or_else(|| bad("missing header"))?;
        if stored_window != window {
            return Err(bad("window in header does not match file name"));
        }
        if rest.len() % 3 != 0 {
            return Err(bad("truncated triple"));
        }
        let entries: Vec<_> = rest.chunks_exact(3).map(|c| (c[0], c[1], c[2])).collect();
        if entries.windows(2).any(|w| (w[0].0, w[0].1) >= (w[1].0, w[1].1)) {
            return Err(bad("triples not sorted"));
        }
        Ok(BigramTable {
            attribute: attribute.to_owned(),
            window,
            entries,
        })
    }

    /// Finds `<attr>.w<n>.bgr` files in `home` and returns (attr, window)
    /// pairs for the given attribute names.
    pub fn discover(home: &Path, attributes: &[&str]) -> Result<Vec<(String, u32)>> {
        let mut found = Vec::new();
        let dir = match std::fs::read_dir(home) {
            Ok(d) => d,
            Err(e) => return Err(Error::io(format!("listing {}", home.display()), e)),
        };
        for entry in dir {
            let entry = entry.map_err(|e| Error::io(format!("listing {}", home.display()), e))?;
            let file_name = entry.file_name();
            let Some(name) = file_name.to_str() else { continue };
            let Some(stem) = name.strip_suffix(".bgr") else { continue };
            let Some((attr, w)) = stem.rsplit_once(".w") else { continue };
            if let (true, Ok(window)) = (attributes.contains(&attr), w.parse::<u32>()) {
                found.push((attr.to_owned(), window));
            }
        }
        found.sort();
        Ok(found)
    }
}
