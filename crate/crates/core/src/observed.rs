//! Labels, per-class counts, and the growing set of queried points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 1-based class label. Class 1 is the abundant negative class; labels
/// greater than 1 are target classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelId(u32);

impl LabelId {
    pub const NEGATIVE: LabelId = LabelId(1);

    /// Constructs a label, requiring `1 <= value <= num_classes`.
    pub fn new(value: u32, num_classes: usize) -> Result<Self> {
        if value == 0 || value as usize > num_classes {
            return Err(Error::InvalidInstance(format!(
                "label {value} outside [1, {num_classes}]"
            )));
        }
        Ok(LabelId(value))
    }

    /// 1-based label value.
    pub fn value(self) -> u32 {
        self.0
    }

    /// 0-based index into per-class arrays.
    #[inline]
    pub fn index0(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn is_target(self) -> bool {
        self.0 > 1
    }
}

/// Number of observed points per class; `counts[c-1] = m_c`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    counts: Vec<u32>,
}

impl ClassCounts {
    pub fn zeros(num_classes: usize) -> Self {
        Self {
            counts: vec![0; num_classes],
        }
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Self { counts }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    #[inline]
    pub fn count_at(&self, idx0: usize) -> u32 {
        self.counts[idx0]
    }

    pub fn count_of(&self, label: LabelId) -> u32 {
        self.counts[label.index0()]
    }

    #[inline]
    pub fn increment(&mut self, idx0: usize) {
        self.counts[idx0] += 1;
    }

    pub fn decrement(&mut self, idx0: usize) {
        debug_assert!(self.counts[idx0] > 0);
        self.counts[idx0] -= 1;
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.counts
    }

    /// Counts promoted to reals, for reward evaluation at fractional offsets.
    pub fn to_real(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// The ordered labeled data set `D` collected during a search.
///
/// Keeps the query order, per-class counts, and a membership mask mutually
/// consistent; a point may be inserted at most once.
#[derive(Clone, Debug)]
pub struct ObservedSet {
    entries: Vec<(usize, LabelId)>,
    counts: ClassCounts,
    membership: Vec<bool>,
}

impl ObservedSet {
    pub fn new(num_points: usize, num_classes: usize) -> Self {
        Self {
            entries: Vec::new(),
            counts: ClassCounts::zeros(num_classes),
            membership: vec![false; num_points],
        }
    }

    pub fn insert(&mut self, point: usize, label: LabelId) -> Result<()> {
        if self.membership[point] {
            return Err(Error::DuplicateObservation(point));
        }
        self.membership[point] = true;
        self.counts.increment(label.index0());
        self.entries.push((point, label));
        Ok(())
    }

    pub fn contains(&self, point: usize) -> bool {
        self.membership[point]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn counts(&self) -> &ClassCounts {
        &self.counts
    }

    pub fn entries(&self) -> &[(usize, LabelId)] {
        &self.entries
    }

    pub fn num_points(&self) -> usize {
        self.membership.len()
    }

    /// Unlabeled point indices in ascending order.
    pub fn unlabeled(&self) -> impl Iterator<Item = usize> + '_ {
        self.membership
            .iter()
            .enumerate()
            .filter(|(_, &m)| !m)
            .map(|(i, _)| i)
    }

    pub fn num_unlabeled(&self) -> usize {
        self.membership.len() - self.entries.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_tracks_counts_and_membership() {
        let mut d = ObservedSet::new(5, 3);
        d.insert(2, LabelId::new(2, 3).unwrap()).unwrap();
        d.insert(0, LabelId::new(1, 3).unwrap()).unwrap();
        assert_eq!(d.len(), 2);
        assert!(d.contains(2));
        assert!(!d.contains(1));
        assert_eq!(d.counts().as_slice(), &[1, 1, 0]);
        assert_eq!(d.counts().total() as usize, d.len());
        assert_eq!(d.unlabeled().collect::<Vec<_>>(), vec![1, 3, 4]);
    }

    #[test]
    fn duplicate_insert_rejected() {
        let mut d = ObservedSet::new(3, 2);
        d.insert(1, LabelId::NEGATIVE).unwrap();
        assert!(matches!(
            d.insert(1, LabelId::NEGATIVE),
            Err(Error::DuplicateObservation(1))
        ));
    }

    #[test]
    fn label_bounds() {
        assert!(LabelId::new(0, 3).is_err());
        assert!(LabelId::new(4, 3).is_err());
        let l = LabelId::new(3, 3).unwrap();
        assert_eq!(l.index0(), 2);
        assert!(l.is_target());
        assert!(!LabelId::NEGATIVE.is_target());
    }
}
