//! Partial-automorphism machinery: support families, map families,
//! k-systems, liftings, witnesses, and the support logic with its game.

pub mod ksystem;
pub mod lifting;
pub mod support_logic;
pub mod witness;

use crate::logic::Structure;
use crate::scheme::TimingFunction;
use crate::{Error, Result};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type ElemSet = BTreeSet<usize>;

#[derive(Debug, Clone, Serialize)]
pub struct ReportItem {
    pub clause: String,
    pub pass: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub items: Vec<ReportItem>,
}

impl Report {
    pub fn push(&mut self, clause: impl Into<String>, pass: bool, witness: Option<String>) {
        self.items.push(ReportItem {
            clause: clause.into(),
            pass,
            witness,
        });
    }

    pub fn ok(&mut self, clause: impl Into<String>) {
        self.push(clause, true, None);
    }

    pub fn note(&mut self, clause: impl Into<String>, witness: impl Into<String>) {
        self.push(clause, true, Some(witness.into()));
    }

    pub fn fail(&mut self, clause: impl Into<String>, witness: impl Into<String>) {
        self.push(clause, false, Some(witness.into()));
    }

    pub fn pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn first_failure(&self) -> Option<&ReportItem> {
        self.items.iter().find(|i| !i.pass)
    }

    pub fn json_lines(&self) -> String {
        self.items
            .iter()
            .map(|i| serde_json::to_string(i).expect("report items serialize"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn merge(&mut self, prefix: &str, other: Report) {
        for mut item in other.items {
            item.clause = format!("{prefix}{}", item.clause);
            self.items.push(item);
        }
    }
}

/// A partial injection on element ids, stored as a sorted pair list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct PartialInj {
    pairs: Vec<(u16, u16)>,
}

impl PartialInj {
    pub fn empty() -> PartialInj {
        PartialInj::default()
    }

    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<PartialInj> {
        let mut pairs: Vec<(u16, u16)> = pairs
            .into_iter()
            .map(|(a, b)| (a as u16, b as u16))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        let mut seen_dom = BTreeSet::new();
        let mut seen_rng = BTreeSet::new();
        for &(a, b) in &pairs {
            if !seen_dom.insert(a) {
                return Err(Error::invalid(format!("map sends element {a} to two values")));
            }
            if !seen_rng.insert(b) {
                return Err(Error::invalid(format!("map is not injective at image {b}")));
            }
        }
        Ok(PartialInj { pairs })
    }

    fn from_sorted(pairs: Vec<(u16, u16)>) -> PartialInj {
        debug_assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0));
        PartialInj { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|&(a, b)| (a as usize, b as usize))
    }

    pub fn get(&self, x: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&(x as u16), |&(a, _)| a)
            .ok()
            .map(|i| self.pairs[i].1 as usize)
    }

    pub fn dom(&self) -> ElemSet {
        self.pairs.iter().map(|&(a, _)| a as usize).collect()
    }

    pub fn rng(&self) -> ElemSet {
        self.pairs.iter().map(|&(_, b)| b as usize).collect()
    }

    pub(crate) fn dom_key(&self) -> Vec<u16> {
        self.pairs.iter().map(|&(a, _)| a).collect()
    }

    pub fn inverse(&self) -> PartialInj {
        let mut pairs: Vec<(u16, u16)> = self.pairs.iter().map(|&(a, b)| (b, a)).collect();
        pairs.sort_unstable();
        PartialInj::from_sorted(pairs)
    }

    /// `outer` after `self`: x -> outer(self(x)).
    pub fn then(&self, outer: &PartialInj) -> PartialInj {
        let pairs = self
            .pairs
            .iter()
            .filter_map(|&(a, b)| outer.get(b as usize).map(|c| (a, c as u16)))
            .collect();
        PartialInj::from_sorted(pairs)
    }

    pub fn restrict(&self, to: &ElemSet) -> PartialInj {
        let pairs = self
            .pairs
            .iter()
            .copied()
            .filter(|&(a, _)| to.contains(&(a as usize)))
            .collect();
        PartialInj::from_sorted(pairs)
    }

    pub fn extends(&self, other: &PartialInj) -> bool {
        other
            .pairs
            .iter()
            .all(|&(a, b)| self.get(a as usize) == Some(b as usize))
    }

    /// Pointwise image of `a`, defined only when `a` is inside the domain.
    pub fn image(&self, a: &ElemSet) -> Option<ElemSet> {
        a.iter().map(|&x| self.get(x)).collect()
    }

    pub fn fixes(&self, a: &ElemSet) -> bool {
        a.iter().all(|&x| self.get(x) == Some(x))
    }

    pub fn describe(&self, m1: &Structure, m2: &Structure) -> String {
        if self.pairs.is_empty() {
            return "{}".to_string();
        }
        let parts: Vec<String> = self
            .pairs()
            .map(|(a, b)| format!("{}->{}", m1.elements[a], m2.elements[b]))
            .collect();
        format!("{{{}}}", parts.join(" "))
    }
}

impl fmt::Display for PartialInj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pairs.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> = self.pairs().map(|(a, b)| format!("{a}->{b}")).collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}

/// Is `f` still a partial embedding when `a -> b` is added?  Only checks
/// atomic constraints that mention `a`; the rest is assumed to hold for `f`.
fn embedding_compatible(m1: &Structure, m2: &Structure, f: &PartialInj, a: usize, b: usize) -> bool {
    let mut dom: Vec<usize> = f.pairs().map(|(x, _)| x).collect();
    dom.push(a);
    let get = |x: usize| if x == a { Some(b) } else { f.get(x) };
    let inv = |y: usize| {
        if y == b {
            Some(a)
        } else {
            f.pairs().find(|&(_, v)| v == y).map(|(u, _)| u)
        }
    };
    for (name, tuples1) in &m1.rels {
        let arity = m1.vocab.rels[name];
        let tuples2 = &m2.rels[name];
        let mut tuple = vec![0usize; arity];
        if !rel_tuples_ok(tuples1, tuples2, &dom, &mut tuple, 0, a, &get) {
            return false;
        }
    }
    for (name, map1) in &m1.funs {
        let map2 = &m2.funs[name];
        for &x in &dom {
            if x != a && map1.get(&x) != Some(&a) && map2.get(&get(x).unwrap()) != Some(&b) {
                continue;
            }
            let bx = get(x).unwrap();
            if let Some(&y) = map1.get(&x) {
                if let Some(by) = get(y) {
                    if map2.get(&bx) != Some(&by) {
                        return false;
                    }
                }
            }
            if let Some(&bz) = map2.get(&bx) {
                if let Some(z) = inv(bz) {
                    if map1.get(&x) != Some(&z) {
                        return false;
                    }
                }
            }
        }
    }
    for (name, &c1) in &m1.cons {
        let c2 = m2.cons[name];
        if c1 == a && b != c2 {
            return false;
        }
        if c2 == b && c1 != a {
            return false;
        }
    }
    true
}

fn rel_tuples_ok(
    tuples1: &BTreeSet<Vec<usize>>,
    tuples2: &BTreeSet<Vec<usize>>,
    dom: &[usize],
    tuple: &mut Vec<usize>,
    pos: usize,
    a: usize,
    get: &impl Fn(usize) -> Option<usize>,
) -> bool {
    if pos == tuple.len() {
        if !tuple.contains(&a) {
            return true;
        }
        let image: Vec<usize> = tuple.iter().map(|&x| get(x).unwrap()).collect();
        return tuples1.contains(tuple) == tuples2.contains(&image);
    }
    for &x in dom {
        tuple[pos] = x;
        if !rel_tuples_ok(tuples1, tuples2, dom, tuple, pos + 1, a, get) {
            return false;
        }
    }
    true
}

/// Full check that `f` is a partial embedding from `m1` into `m2`.
pub fn is_partial_embedding(m1: &Structure, m2: &Structure, f: &PartialInj) -> bool {
    for (a, b) in f.pairs() {
        if a >= m1.n() || b >= m2.n() {
            return false;
        }
        let rest = {
            let mut d = f.dom();
            d.remove(&a);
            f.restrict(&d)
        };
        if !embedding_compatible(m1, m2, &rest, a, b) {
            return false;
        }
    }
    true
}

pub fn is_partial_auto(m: &Structure, f: &PartialInj) -> bool {
    is_partial_embedding(m, m, f)
}

/// A family of supports: a set of subsets of the element ids of one structure.
#[derive(Debug, Clone)]
pub struct SupportFamily {
    n: usize,
    sets: BTreeSet<ElemSet>,
}

impl SupportFamily {
    /// All subsets of size at most `q`, the canonical choice.
    pub fn size_at_most(n: usize, q: usize) -> SupportFamily {
        let mut sets = BTreeSet::new();
        let mut cur = ElemSet::new();
        fn rec(start: usize, n: usize, left: usize, cur: &mut ElemSet, out: &mut BTreeSet<ElemSet>) {
            out.insert(cur.clone());
            if left == 0 {
                return;
            }
            for x in start..n {
                cur.insert(x);
                rec(x + 1, n, left - 1, cur, out);
                cur.remove(&x);
            }
        }
        rec(0, n, q, &mut cur, &mut sets);
        SupportFamily { n, sets }
    }

    /// Takes the listed sets literally, without closing them.
    pub fn explicit(n: usize, sets: impl IntoIterator<Item = ElemSet>) -> Result<SupportFamily> {
        let sets: BTreeSet<ElemSet> = sets.into_iter().collect();
        for s in &sets {
            if let Some(&x) = s.iter().next_back() {
                if x >= n {
                    return Err(Error::invalid(format!(
                        "support mentions element {x} outside a universe of size {n}"
                    )));
                }
            }
        }
        Ok(SupportFamily { n, sets })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ElemSet> {
        self.sets.iter()
    }

    pub fn contains(&self, a: &ElemSet) -> bool {
        self.sets.contains(a)
    }

    pub fn max_member_size(&self) -> usize {
        self.sets.iter().map(|s| s.len()).max().unwrap_or(0)
    }

    /// Violation of the shape clauses, if any: closure under subsets and
    /// membership of every singleton.
    pub fn shape_violation(&self, m: &Structure) -> Option<String> {
        for x in 0..m.n() {
            let single: ElemSet = [x].into_iter().collect();
            if !self.sets.contains(&single) {
                return Some(format!("missing singleton {{{}}}", m.elements[x]));
            }
        }
        for s in &self.sets {
            for &x in s {
                let mut smaller = s.clone();
                smaller.remove(&x);
                if !self.sets.contains(&smaller) {
                    return Some(format!(
                        "not closed under subsets: dropping {} from {} leaves the family",
                        m.elements[x],
                        describe_set(m, s)
                    ));
                }
            }
        }
        None
    }

    /// Is `a` a union of at most `m` members?
    pub fn in_union(&self, a: &ElemSet, m: usize) -> bool {
        if a.is_empty() {
            return true;
        }
        if m == 0 {
            return false;
        }
        if self.sets.contains(a) {
            return true;
        }
        let first = *a.iter().next().unwrap();
        for s in &self.sets {
            if s.contains(&first) && s.is_subset(a) {
                let rest: ElemSet = a.difference(s).copied().collect();
                if self.in_union(&rest, m - 1) {
                    return true;
                }
            }
        }
        false
    }

    /// Every union of at most `m` members, deduplicated.
    pub fn unions(&self, m: usize) -> BTreeSet<ElemSet> {
        let mut out: BTreeSet<ElemSet> = self.sets.clone();
        for _ in 1..m {
            let mut next = out.clone();
            for u in &out {
                for s in &self.sets {
                    let mut v = u.clone();
                    v.extend(s.iter().copied());
                    next.insert(v);
                }
            }
            if next.len() == out.len() {
                break;
            }
            out = next;
        }
        out
    }
}

pub fn describe_set(m: &Structure, a: &ElemSet) -> String {
    let parts: Vec<&str> = a.iter().map(|&x| m.elements[x].as_str()).collect();
    format!("{{{}}}", parts.join(" "))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Explicit,
    AllPartialAutos { max_dom: usize },
    AllPartialEmbeddings { max_dom: usize },
}

/// Families above this size are rejected outright.
pub const FAMILY_CAP: usize = 2_000_000;

/// Pairwise checks over families whose pair count exceeds this are sampled.
pub const PAIR_BUDGET: u64 = 10_000_000;

/// A finite family of partial injections with a domain index.
#[derive(Debug, Clone)]
pub struct MapFamily {
    pub kind: FamilyKind,
    maps: Vec<PartialInj>,
    by_dom: BTreeMap<Vec<u16>, Vec<u32>>,
}

impl MapFamily {
    pub fn from_maps(kind: FamilyKind, mut maps: Vec<PartialInj>) -> Result<MapFamily> {
        maps.sort_unstable();
        maps.dedup();
        if maps.len() > FAMILY_CAP {
            return Err(Error::invalid(format!(
                "map family has {} members, over the cap of {FAMILY_CAP}",
                maps.len()
            )));
        }
        let mut by_dom: BTreeMap<Vec<u16>, Vec<u32>> = BTreeMap::new();
        for (i, f) in maps.iter().enumerate() {
            by_dom.entry(f.dom_key()).or_default().push(i as u32);
        }
        Ok(MapFamily { kind, maps, by_dom })
    }

    pub fn all_partial_autos(m: &Structure, max_dom: usize) -> Result<MapFamily> {
        let maps = enumerate_embeddings(m, m, max_dom)?;
        MapFamily::from_maps(FamilyKind::AllPartialAutos { max_dom }, maps)
    }

    pub fn all_partial_embeddings(m1: &Structure, m2: &Structure, max_dom: usize) -> Result<MapFamily> {
        let maps = enumerate_embeddings(m1, m2, max_dom)?;
        MapFamily::from_maps(FamilyKind::AllPartialEmbeddings { max_dom }, maps)
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PartialInj> {
        self.maps.iter()
    }

    pub fn get(&self, i: usize) -> &PartialInj {
        &self.maps[i]
    }

    pub fn contains(&self, f: &PartialInj) -> bool {
        self.maps.binary_search(f).is_ok()
    }

    pub fn domains(&self) -> impl Iterator<Item = (&Vec<u16>, &Vec<u32>)> {
        self.by_dom.iter()
    }

    /// Maps whose domain is exactly `d`.
    pub fn with_exact_dom(&self, d: &ElemSet) -> impl Iterator<Item = &PartialInj> {
        let key: Vec<u16> = d.iter().map(|&x| x as u16).collect();
        self.by_dom
            .get(&key)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(|&i| &self.maps[i as usize])
    }

    /// Maps whose domain contains `d`.
    pub fn with_dom_superset<'a>(&'a self, d: &'a ElemSet) -> impl Iterator<Item = &'a PartialInj> {
        self.by_dom
            .iter()
            .filter(move |(dom, _)| d.iter().all(|&x| dom.binary_search(&(x as u16)).is_ok()))
            .flat_map(move |(_, v)| v.iter().map(move |&i| &self.maps[i as usize]))
    }

    /// Some member extending `base` whose domain covers `cover`.
    pub fn find_extension(&self, base: &PartialInj, cover: &ElemSet) -> Option<&PartialInj> {
        let mut need = base.dom();
        need.extend(cover.iter().copied());
        self.by_dom
            .iter()
            .filter(|(dom, _)| need.iter().all(|&x| dom.binary_search(&(x as u16)).is_ok()))
            .flat_map(|(_, v)| v.iter().map(|&i| &self.maps[i as usize]))
            .find(|g| g.extends(base))
    }
}

fn enumerate_embeddings(m1: &Structure, m2: &Structure, max_dom: usize) -> Result<Vec<PartialInj>> {
    let mut out = vec![PartialInj::empty()];
    let mut frontier = vec![PartialInj::empty()];
    for _ in 0..max_dom {
        let mut next = Vec::new();
        for f in &frontier {
            let start = f.pairs.last().map(|&(a, _)| a as usize + 1).unwrap_or(0);
            for a in start..m1.n() {
                let rng = f.rng();
                for b in 0..m2.n() {
                    if rng.contains(&b) {
                        continue;
                    }
                    if embedding_compatible(m1, m2, f, a, b) {
                        let mut pairs = f.pairs.clone();
                        pairs.push((a as u16, b as u16));
                        next.push(PartialInj::from_sorted(pairs));
                    }
                }
            }
            if out.len() + next.len() > FAMILY_CAP {
                return Err(Error::invalid(format!(
                    "partial embedding family exceeds the cap of {FAMILY_CAP}"
                )));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(out)
}

/// Extension search that understands generated kinds: for the generated
/// families it constructs the extension directly instead of scanning.
pub fn find_extension_in(
    m1: &Structure,
    m2: &Structure,
    family: &MapFamily,
    base: &PartialInj,
    cover: &ElemSet,
) -> Option<PartialInj> {
    let max_dom = match family.kind {
        FamilyKind::Explicit => {
            return family.find_extension(base, cover).cloned();
        }
        FamilyKind::AllPartialAutos { max_dom } | FamilyKind::AllPartialEmbeddings { max_dom } => max_dom,
    };
    let missing: Vec<usize> = cover.iter().copied().filter(|x| base.get(*x).is_none()).collect();
    if base.len() + missing.len() > max_dom {
        return None;
    }
    fn rec(
        m1: &Structure,
        m2: &Structure,
        f: &PartialInj,
        missing: &[usize],
    ) -> Option<PartialInj> {
        let Some((&a, rest)) = missing.split_first() else {
            return Some(f.clone());
        };
        let rng = f.rng();
        for b in 0..m2.n() {
            if rng.contains(&b) {
                continue;
            }
            if embedding_compatible(m1, m2, f, a, b) {
                let mut pairs: Vec<(u16, u16)> = f.pairs.clone();
                pairs.push((a as u16, b as u16));
                pairs.sort_unstable();
                let g = PartialInj::from_sorted(pairs);
                if let Some(done) = rec(m1, m2, &g, rest) {
                    return Some(done);
                }
            }
        }
        None
    }
    rec(m1, m2, base, &missing)
}

/// A k-system: structure, support family, map family and the two constants.
#[derive(Debug, Clone)]
pub struct KSystem {
    pub name: String,
    pub m: Structure,
    pub i: SupportFamily,
    pub f: MapFamily,
    pub k: usize,
    pub s: usize,
    pub t_fun: TimingFunction,
}

impl KSystem {
    pub fn threshold(&self) -> crate::Bound {
        self.t_fun.value(self.m.n() as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn partial_inj_algebra() {
        let f = PartialInj::new([(0, 1), (2, 3)]).unwrap();
        assert_eq!(f.get(0), Some(1));
        assert_eq!(f.get(1), None);
        let g = f.inverse();
        assert_eq!(g.get(1), Some(0));
        let h = f.then(&g);
        assert!(h.fixes(&f.dom()));
        assert!(PartialInj::new([(0, 1), (0, 2)]).is_err());
        assert!(PartialInj::new([(0, 1), (2, 1)]).is_err());
    }

    #[test]
    fn five_cycle_family_count() {
        let m = models::cycle_graph(5);
        let f = MapFamily::all_partial_autos(&m, 3).unwrap();
        assert_eq!(f.len(), 226);
    }

    #[test]
    fn support_family_shapes() {
        let m = models::cycle_graph(5);
        let i = SupportFamily::size_at_most(5, 1);
        assert_eq!(i.len(), 6);
        assert!(i.shape_violation(&m).is_none());
        let a: ElemSet = [0, 2].into_iter().collect();
        assert!(i.in_union(&a, 2));
        assert!(!i.in_union(&a, 1));
        assert_eq!(i.unions(2).len(), 6 + 10);
    }

    #[test]
    fn embeddings_respect_relations() {
        let m = models::cycle_graph(5);
        // 0-1 is an edge, 0-2 is not, so 0,1 cannot map to 0,2
        let bad = PartialInj::new([(0, 0), (1, 2)]).unwrap();
        assert!(!is_partial_auto(&m, &bad));
        let good = PartialInj::new([(0, 0), (1, 4)]).unwrap();
        assert!(is_partial_auto(&m, &good));
    }

    #[test]
    fn extension_search_agrees_with_scan() {
        let m = models::cycle_graph(5);
        let fam = MapFamily::all_partial_autos(&m, 3).unwrap();
        let base = PartialInj::new([(0, 1)]).unwrap();
        let cover: ElemSet = [1].into_iter().collect();
        let direct = find_extension_in(&m, &m, &fam, &base, &cover);
        let scanned = fam.find_extension(&base, &cover).cloned();
        assert!(direct.is_some());
        assert!(scanned.is_some());
        let g = direct.unwrap();
        assert!(g.extends(&base));
        assert!(g.get(1).is_some());
        assert!(fam.contains(&g));
    }
}
