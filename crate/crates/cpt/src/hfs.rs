//! Hereditarily finite sets over a fixed universe of atoms.
//!
//! Sets are hash-consed: two sets with the same members always share a
//! handle, so equality of handles is extensional equality.

use crate::{Error, Result};
use std::collections::{BTreeSet, HashMap};

/// Either an atom of the base structure or an interned set.
///
/// The derived order puts all atoms before all sets; within each kind the
/// interning order decides. Every canonical ordering in the crate (universe
/// slices, set members) uses this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SetHandle {
    Atom(u32),
    Set(u32),
}

impl SetHandle {
    pub fn is_atom(self) -> bool {
        matches!(self, SetHandle::Atom(_))
    }
}

#[derive(Debug, Default, Clone)]
pub struct UniverseStore {
    atom_names: Vec<String>,
    atom_index: HashMap<String, u32>,
    set_members: Vec<Vec<SetHandle>>,
    set_rank: Vec<u32>,
    set_index: HashMap<Vec<SetHandle>, u32>,
}

impl UniverseStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a new atom. Atom names must be pairwise distinct.
    pub fn intern_atom(&mut self, name: &str) -> Result<SetHandle> {
        if self.atom_index.contains_key(name) {
            return Err(Error::invalid(format!("duplicate atom name `{name}`")));
        }
        let id = self.atom_names.len() as u32;
        self.atom_names.push(name.to_string());
        self.atom_index.insert(name.to_string(), id);
        Ok(SetHandle::Atom(id))
    }

    pub fn atom(&self, name: &str) -> Option<SetHandle> {
        self.atom_index.get(name).copied().map(SetHandle::Atom)
    }

    pub fn atom_name(&self, h: SetHandle) -> &str {
        match h {
            SetHandle::Atom(i) => &self.atom_names[i as usize],
            SetHandle::Set(_) => panic!("atom_name on a set handle"),
        }
    }

    pub fn num_atoms(&self) -> usize {
        self.atom_names.len()
    }

    pub fn num_sets(&self) -> usize {
        self.set_members.len()
    }

    /// Interns the set with the given members (order and multiplicity do not
    /// matter). Returns the canonical handle.
    pub fn intern_set(&mut self, members: impl IntoIterator<Item = SetHandle>) -> SetHandle {
        let mut ms: Vec<SetHandle> = members.into_iter().collect();
        ms.sort_unstable();
        ms.dedup();
        if let Some(&id) = self.set_index.get(&ms) {
            return SetHandle::Set(id);
        }
        let rank = ms
            .iter()
            .map(|&m| self.rank(m) + 1)
            .max()
            .unwrap_or(0);
        let id = self.set_members.len() as u32;
        self.set_index.insert(ms.clone(), id);
        self.set_members.push(ms);
        self.set_rank.push(rank);
        SetHandle::Set(id)
    }

    pub fn empty_set(&mut self) -> SetHandle {
        self.intern_set([])
    }

    /// Members of a set; atoms have none.
    pub fn members(&self, h: SetHandle) -> &[SetHandle] {
        match h {
            SetHandle::Atom(_) => &[],
            SetHandle::Set(i) => &self.set_members[i as usize],
        }
    }

    pub fn contains(&self, set: SetHandle, x: SetHandle) -> bool {
        self.members(set).binary_search(&x).is_ok()
    }

    /// Atoms have rank 0, a set's rank is one more than its highest member.
    pub fn rank(&self, h: SetHandle) -> u32 {
        match h {
            SetHandle::Atom(_) => 0,
            SetHandle::Set(i) => self.set_rank[i as usize],
        }
    }

    /// Everything reachable from `h` by membership chains, excluding `h`.
    pub fn transitive_closure(&self, h: SetHandle) -> BTreeSet<SetHandle> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<SetHandle> = self.members(h).to_vec();
        while let Some(x) = stack.pop() {
            if out.insert(x) {
                stack.extend_from_slice(self.members(x));
            }
        }
        out
    }

    /// The atoms occurring hereditarily in `h` (the support of `h`).
    pub fn atom_support(&self, h: SetHandle) -> BTreeSet<SetHandle> {
        if h.is_atom() {
            return BTreeSet::from([h]);
        }
        self.transitive_closure(h)
            .into_iter()
            .filter(|x| x.is_atom())
            .collect()
    }

    /// Von Neumann numeral: 0 is the empty set, n+1 adds n as a member.
    pub fn von_neumann(&mut self, n: u64) -> SetHandle {
        let mut cur = self.empty_set();
        for _ in 0..n {
            let mut ms = self.members(cur).to_vec();
            ms.push(cur);
            cur = self.intern_set(ms);
        }
        cur
    }

    pub fn display(&self, h: SetHandle) -> String {
        match h {
            SetHandle::Atom(i) => self.atom_names[i as usize].clone(),
            SetHandle::Set(_) => {
                let inner: Vec<String> =
                    self.members(h).iter().map(|&m| self.display(m)).collect();
                format!("{{{}}}", inner.join(","))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abc(store: &mut UniverseStore) -> (SetHandle, SetHandle, SetHandle) {
        (
            store.intern_atom("a").unwrap(),
            store.intern_atom("b").unwrap(),
            store.intern_atom("c").unwrap(),
        )
    }

    #[test]
    fn extensional_identity() {
        let mut s = UniverseStore::new();
        let (a, b, _) = abc(&mut s);
        let x = s.intern_set([a, b]);
        let y = s.intern_set([b, a, b]);
        assert_eq!(x, y);
        assert_eq!(s.num_sets(), 1);
    }

    #[test]
    fn duplicate_atom_rejected() {
        let mut s = UniverseStore::new();
        s.intern_atom("a").unwrap();
        assert!(s.intern_atom("a").is_err());
    }

    #[test]
    fn ranks() {
        let mut s = UniverseStore::new();
        let (a, b, _) = abc(&mut s);
        let e = s.empty_set();
        assert_eq!(s.rank(a), 0);
        assert_eq!(s.rank(e), 0);
        let ab = s.intern_set([a, b]);
        assert_eq!(s.rank(ab), 1);
        let nested = s.intern_set([ab, a]);
        assert_eq!(s.rank(nested), 2);
    }

    #[test]
    fn von_neumann_numerals() {
        let mut s = UniverseStore::new();
        let three = s.von_neumann(3);
        assert_eq!(s.rank(three), 3);
        assert_eq!(s.members(three).len(), 3);
        let threeb = s.von_neumann(3);
        assert_eq!(three, threeb);
        let two = s.von_neumann(2);
        assert_eq!(s.display(two), "{{},{{}}}");
    }

    #[test]
    fn closure_and_support() {
        let mut s = UniverseStore::new();
        let (a, b, c) = abc(&mut s);
        let ab = s.intern_set([a, b]);
        let top = s.intern_set([ab, c]);
        let tc = s.transitive_closure(top);
        assert!(tc.contains(&a) && tc.contains(&b) && tc.contains(&c) && tc.contains(&ab));
        assert!(!tc.contains(&top));
        let sup = s.atom_support(top);
        assert_eq!(sup, BTreeSet::from([a, b, c]));
        assert_eq!(s.atom_support(a), BTreeSet::from([a]));
    }

    #[test]
    fn membership_and_display() {
        let mut s = UniverseStore::new();
        let (a, b, _) = abc(&mut s);
        let ab = s.intern_set([a, b]);
        let x = s.intern_set([a, ab]);
        assert!(s.contains(x, ab));
        assert!(s.contains(x, a));
        assert!(!s.contains(x, b));
        assert_eq!(s.display(x), "{a,{a,b}}");
    }
}
