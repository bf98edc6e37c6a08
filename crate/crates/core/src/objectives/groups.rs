use crate::error::{Error, Result};

/// Partition of dataset rows into contiguous per-query document lists.
///
/// Stored as boundaries `0 = o₀ < o₁ < … < o_q = N`; group `g` spans
/// rows `o_g..o_{g+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryGroups {
    offsets: Vec<usize>,
}

impl QueryGroups {
    pub fn from_offsets(offsets: Vec<usize>) -> Result<Self> {
        if offsets.len() < 2 {
            return Err(Error::InvalidGroups("need at least one group".into()));
        }
        if offsets[0] != 0 {
            return Err(Error::InvalidGroups(format!(
                "first boundary must be 0, got {}",
                offsets[0]
            )));
        }
        if let Some(w) = offsets.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGroups(format!(
                "boundaries must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { offsets })
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        offsets.push(0);
        for &s in sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        Self::from_offsets(offsets)
    }

    /// One group per run of equal consecutive keys.
    pub fn from_keys<K: PartialEq>(keys: &[K]) -> Result<Self> {
        let mut offsets = vec![0];
        for i in 1..keys.len() {
            if keys[i] != keys[i - 1] {
                offsets.push(i);
            }
        }
        offsets.push(keys.len());
        Self::from_offsets(offsets)
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.offsets.windows(2).map(|w| w[0]..w[1])
    }

    pub(crate) fn check_rows(&self, n: usize) -> Result<()> {
        if self.num_rows() != n {
            return Err(Error::InvalidGroups(format!(
                "groups cover {} rows, data has {n}",
                self.num_rows()
            )));
        }
        Ok(())
    }
}
