use std::fmt;

use fixedbitset::FixedBitSet;

/// A subset of a frame's states, as a bitset sized to the frame.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct StateSet(FixedBitSet);

impl StateSet {
    pub fn empty(n: usize) -> Self {
        StateSet(FixedBitSet::with_capacity(n))
    }

    pub fn full(n: usize) -> Self {
        let mut b = FixedBitSet::with_capacity(n);
        b.insert_range(..);
        StateSet(b)
    }

    pub fn from_iter_in(n: usize, states: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(n);
        for i in states {
            s.insert(i);
        }
        s
    }

    /// Number of states of the frame this set was created against.
    pub fn universe(&self) -> usize {
        self.0.len()
    }

    pub fn insert(&mut self, s: usize) {
        self.0.insert(s)
    }

    pub fn remove(&mut self, s: usize) {
        self.0.set(s, false)
    }

    pub fn contains(&self, s: usize) -> bool {
        self.0.contains(s)
    }

    pub fn count(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn union_with(&mut self, other: &StateSet) {
        self.0.union_with(&other.0)
    }

    pub fn intersect_with(&mut self, other: &StateSet) {
        self.0.intersect_with(&other.0)
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn intersection(&self, other: &StateSet) -> StateSet {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    /// Complement relative to the frame.
    pub fn complement(&self) -> StateSet {
        let mut b = self.0.clone();
        b.toggle_range(..);
        StateSet(b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }
}

impl fmt::Debug for StateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_ops() {
        let a = StateSet::from_iter_in(5, [0, 2]);
        let b = StateSet::from_iter_in(5, [2, 3]);
        assert_eq!(a.union(&b).iter().collect::<Vec<_>>(), [0, 2, 3]);
        assert_eq!(a.intersection(&b).iter().collect::<Vec<_>>(), [2]);
        assert_eq!(a.complement().iter().collect::<Vec<_>>(), [1, 3, 4]);
        assert!(StateSet::empty(5).is_subset(&a));
        assert_eq!(StateSet::full(5).count(), 5);
        assert!(StateSet::empty(0).is_empty());
    }
}
