use crate::error::{Error, Result};

/// Sorted, non-overlapping, non-nested token intervals with inclusive bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralRegions {
    name: String,
    regions: Vec<(u32, u32)>,
}

impl StructuralRegions {
    pub fn new(name: impl Into<String>, regions: Vec<(u32, u32)>) -> Result<Self> {
        let name = name.into();
        for (i, &(start, end)) in regions.iter().enumerate() {
            if start > end {
                return Err(Error::InvalidCorpus(format!(
                    "region {i} of `{name}` has start {start} > end {end}"
                )));
            }
            if i > 0 && regions[i - 1].1 >= start {
                return Err(Error::InvalidCorpus(format!(
                    "regions {} and {i} of `{name}` overlap or are out of order",
                    i - 1
                )));
            }
        }
        Ok(StructuralRegions { name, regions })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn regions(&self) -> &[(u32, u32)] {
        &self.regions
    }

    pub fn bounds(&self, index: usize) -> Option<(usize, usize)> {
        self.regions
            .get(index)
            .map(|&(s, e)| (s as usize, e as usize))
    }

    /// Index of the region containing `pos`, if any.
    pub fn region_containing(&self, pos: usize) -> Option<usize> {
        // first region whose end >= pos
        let i = self.regions.partition_point(|&(_, end)| (end as usize) < pos);
        match self.regions.get(i) {
            Some(&(start, _)) if start as usize <= pos => Some(i),
            _ => None,
        }
    }

    /// Whether some region starts exactly at `pos`.
    pub fn starts_at(&self, pos: usize) -> bool {
        self.regions
            .binary_search_by_key(&pos, |&(s, _)| s as usize)
            .is_ok()
    }

    /// Whether some region ends exactly at `pos`.
    pub fn ends_at(&self, pos: usize) -> bool {
        self.regions
            .binary_search_by_key(&pos, |&(_, e)| e as usize)
            .is_ok()
    }

    /// Indices of all regions overlapping `start..=end`, as a range.
    pub fn overlapping(&self, start: usize, end: usize) -> std::ops::Range<usize> {
        let lo = self.regions.partition_point(|&(_, e)| (e as usize) < start);
        let hi = self.regions.partition_point(|&(s, _)| (s as usize) <= end);
        lo..hi.max(lo)
    }
}
