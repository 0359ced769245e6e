use std::collections::HashMap;

use crate::error::{Error, Result};

/// Dense index assigned to any id the vocabulary has not seen.
pub const OOV_INDEX: usize = 0;

/// Maps raw investment ids to dense embedding rows `1..len()`.
/// Row 0 is reserved for unseen ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    ids: Vec<i64>,
    index: HashMap<i64, usize>,
}

impl Vocab {
    /// Builds from observed ids. Dense indices follow ascending raw id.
    pub fn build(raw: impl IntoIterator<Item = i64>) -> Self {
        let mut ids: Vec<i64> = raw.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        Self::from_sorted_unique(ids)
    }

    /// Uses `ids` as given: `ids[k]` gets dense index `k + 1`.
    pub fn from_ordered(ids: Vec<i64>) -> Result<Self> {
        let v = Self::from_sorted_unique(ids);
        if v.index.len() != v.ids.len() {
            return Err(Error::Argument("vocabulary contains duplicate ids".into()));
        }
        Ok(v)
    }

    fn from_sorted_unique(ids: Vec<i64>) -> Self {
        let index = ids.iter().enumerate().map(|(k, &id)| (id, k + 1)).collect();
        Self { ids, index }
    }

    /// Number of embedding rows, including the out-of-vocabulary row.
    pub fn len(&self) -> usize {
        self.ids.len() + 1
    }

    /// Number of real ids.
    pub fn id_count(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn lookup(&self, raw: i64) -> usize {
        self.index.get(&raw).copied().unwrap_or(OOV_INDEX)
    }

    pub fn contains(&self, raw: i64) -> bool {
        self.index.contains_key(&raw)
    }

    /// Raw ids in dense-index order (index 1 first).
    pub fn raw_ids(&self) -> &[i64] {
        &self.ids
    }
}
