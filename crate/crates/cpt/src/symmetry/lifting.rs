//! Liftings: candidate stages carrying an action of the map family and a
//! support relation, the zero lifting, goodness of sets, the lifted action
//! on good sets, successor construction, and formula preservation.

use super::{describe_set, ElemSet, KSystem, PartialInj, Report};
use crate::hfs::{SetHandle, UniverseStore};
use crate::logic::eval::{evaluate, EvalCtx};
use crate::logic::Formula;
use crate::scheme::{successor, Candidate, InductiveScheme};
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};

const GOOD_BLOCK_CAP: usize = 16;

/// A stage together with the lifted family action and the support relation.
#[derive(Debug, Clone)]
pub struct Lifting {
    pub universe: Vec<SetHandle>,
    pub constants: Vec<Option<SetHandle>>,
    pub g: BTreeMap<PartialInj, BTreeMap<SetHandle, SetHandle>>,
    pub r: BTreeSet<(ElemSet, SetHandle)>,
}

impl Lifting {
    pub fn g_of(&self, f: &PartialInj) -> Option<&BTreeMap<SetHandle, SetHandle>> {
        self.g.get(f)
    }

    pub fn in_universe(&self, h: SetHandle) -> bool {
        self.universe.binary_search(&h).is_ok()
    }

    pub fn supports_of(&self, y: SetHandle) -> impl Iterator<Item = &ElemSet> {
        self.r.iter().filter(move |(_, z)| *z == y).map(|(a, _)| a)
    }
}

/// The identity lifting on the atoms: G(f) = f, supports A R y iff y is a
/// member of A, every dynamic constant undefined.
pub fn zero_lifting(y: &KSystem, store: &UniverseStore, m1: usize) -> Lifting {
    let atoms: Vec<SetHandle> = (0..y.m.n())
        .map(|i| store.atom(&y.m.elements[i]).expect("atoms interned"))
        .collect();
    let mut g = BTreeMap::new();
    for f in y.f.iter() {
        let action: BTreeMap<SetHandle, SetHandle> =
            f.pairs().map(|(a, b)| (atoms[a], atoms[b])).collect();
        g.insert(f.clone(), action);
    }
    let mut r = BTreeSet::new();
    for a in y.i.iter() {
        for &x in a {
            r.insert((a.clone(), atoms[x]));
        }
    }
    let mut universe = atoms;
    universe.sort_unstable();
    Lifting {
        universe,
        constants: vec![None; m1],
        g,
        r,
    }
}

fn atom_handles(y: &KSystem, store: &UniverseStore) -> Vec<SetHandle> {
    (0..y.m.n())
        .map(|i| store.atom(&y.m.elements[i]).expect("atoms interned"))
        .collect()
}

/// Checks the lifting clauses (a)-(k).
pub fn check_lifting(y: &KSystem, store: &UniverseStore, z: &Lifting) -> Report {
    let mut rep = Report::default();
    let m = &y.m;
    let atoms = atom_handles(y, store);
    let in_universe = |h: SetHandle| z.in_universe(h);

    // (a) the universe is a transitive candidate over the atoms
    let mut cand_witness = None;
    for &a in &atoms {
        if !in_universe(a) {
            cand_witness = Some(format!("atom {} missing", store.display(a)));
            break;
        }
    }
    if cand_witness.is_none() {
        'trans: for &h in &z.universe {
            for &mem in store.members(h) {
                if !in_universe(mem) {
                    cand_witness = Some(format!(
                        "member {} of {} missing",
                        store.display(mem),
                        store.display(h)
                    ));
                    break 'trans;
                }
            }
        }
    }
    match cand_witness {
        None => rep.ok("(a) universe is a transitive candidate"),
        Some(w) => rep.fail("(a) universe is a transitive candidate", w),
    }

    // (b) G is a function with domain F
    let mut dom_witness = None;
    for f in y.f.iter() {
        if !z.g.contains_key(f) {
            dom_witness = Some(format!("no action for {}", f.describe(m, m)));
            break;
        }
    }
    if dom_witness.is_none() && z.g.len() != y.f.len() {
        dom_witness = Some(format!(
            "action defined on {} maps, family has {}",
            z.g.len(),
            y.f.len()
        ));
    }
    match dom_witness {
        None => rep.ok("(b) action defined exactly on the family"),
        Some(w) => rep.fail("(b) action defined exactly on the family", w),
    }

    // (c) f is contained in G(f), and G(f) is a partial automorphism of N
    let mut c_witness = None;
    'c: for (f, gf) in &z.g {
        for (a, b) in f.pairs() {
            if gf.get(&atoms[a]) != Some(&atoms[b]) {
                c_witness = Some(format!(
                    "action of {} does not extend it on atom {}",
                    f.describe(m, m),
                    m.elements[a]
                ));
                break 'c;
            }
        }
        let mut seen = BTreeSet::new();
        for (&x, &gx) in gf {
            if !in_universe(x) || !in_universe(gx) {
                c_witness = Some(format!(
                    "action of {} moves {} outside the universe",
                    f.describe(m, m),
                    store.display(x)
                ));
                break 'c;
            }
            if !seen.insert(gx) {
                c_witness = Some(format!("action of {} is not injective", f.describe(m, m)));
                break 'c;
            }
        }
        for (&x, &gx) in gf {
            for (&w, &gw) in gf {
                if store.contains(w, x) != store.contains(gw, gx) {
                    c_witness = Some(format!(
                        "action of {} breaks membership between {} and {}",
                        f.describe(m, m),
                        store.display(x),
                        store.display(w)
                    ));
                    break 'c;
                }
            }
        }
        let gf_atoms: Vec<(usize, usize)> = gf
            .iter()
            .filter_map(|(&x, &gx)| match (x, gx) {
                (SetHandle::Atom(_), SetHandle::Atom(_)) => {
                    let a = atoms.iter().position(|&h| h == x).unwrap();
                    let b = atoms.iter().position(|&h| h == gx).unwrap();
                    Some((a, b))
                }
                _ => None,
            })
            .collect();
        match PartialInj::new(gf_atoms) {
            Ok(p) => {
                if !super::is_partial_auto(m, &p) {
                    c_witness = Some(format!(
                        "atom part of the action of {} breaks a relation",
                        f.describe(m, m)
                    ));
                    break 'c;
                }
            }
            Err(_) => {
                c_witness = Some(format!("atom part of the action of {} is not injective", f.describe(m, m)));
                break 'c;
            }
        }
    }
    match c_witness {
        None => rep.ok("(c) actions extend the maps as partial automorphisms"),
        Some(w) => rep.fail("(c) actions extend the maps as partial automorphisms", w),
    }

    // (d) monotone in the map
    let mut d_witness = None;
    'd: for (f, gf) in &z.g {
        for (g, gg) in &z.g {
            if g.extends(f) {
                for (x, gx) in gf {
                    if gg.get(x) != Some(gx) {
                        d_witness = Some(format!(
                            "{} extends {} but the actions disagree at {}",
                            g.describe(m, m),
                            f.describe(m, m),
                            store.display(*x)
                        ));
                        break 'd;
                    }
                }
            }
        }
    }
    match d_witness {
        None => rep.ok("(d) extension of maps extends actions"),
        Some(w) => rep.fail("(d) extension of maps extends actions", w),
    }

    // (e) the support relation lives on I x N
    let mut e_witness = None;
    for (a, y_h) in &z.r {
        if !y.i.contains(a) {
            e_witness = Some(format!("{} is not a support", describe_set(m, a)));
            break;
        }
        if !in_universe(*y_h) {
            e_witness = Some(format!("supported element {} outside universe", store.display(*y_h)));
            break;
        }
    }
    match e_witness {
        None => rep.ok("(e) support relation lives on supports and the universe"),
        Some(w) => rep.fail("(e) support relation lives on supports and the universe", w),
    }

    // (f) support inside the domain puts the element inside the action
    let mut f_witness = None;
    'f: for (a, y_h) in &z.r {
        for f in y.f.iter() {
            let dom = f.dom();
            if !a.is_subset(&dom) {
                continue;
            }
            let gf = match z.g.get(f) {
                Some(gf) => gf,
                None => continue,
            };
            match gf.get(y_h) {
                None => {
                    f_witness = Some(format!(
                        "{} supports {} and sits inside {}, which has no action on it",
                        describe_set(m, a),
                        store.display(*y_h),
                        f.describe(m, m)
                    ));
                    break 'f;
                }
                Some(&gy) => {
                    if f.fixes(a) && gy != *y_h {
                        f_witness = Some(format!(
                            "{} fixes the support {} but moves {}",
                            f.describe(m, m),
                            describe_set(m, a),
                            store.display(*y_h)
                        ));
                        break 'f;
                    }
                }
            }
        }
    }
    match f_witness {
        None => rep.ok("(f) supported elements are acted on, identically under pointwise fixers"),
        Some(w) => rep.fail(
            "(f) supported elements are acted on, identically under pointwise fixers",
            w,
        ),
    }

    // (g) everything has a support
    let supported: BTreeSet<SetHandle> = z.r.iter().map(|(_, y_h)| *y_h).collect();
    let mut g_witness = None;
    for &h in &z.universe {
        if !supported.contains(&h) {
            g_witness = Some(format!("{} has no support", store.display(h)));
            break;
        }
    }
    match g_witness {
        None => rep.ok("(g) every element of the universe has a support"),
        Some(w) => rep.fail("(g) every element of the universe has a support", w),
    }

    // (h) the support relation is equivariant
    let mut h_witness = None;
    'h: for f in y.f.iter() {
        let gf = match z.g.get(f) {
            Some(gf) => gf,
            None => continue,
        };
        let dom = f.dom();
        for a in y.i.iter() {
            if !a.is_subset(&dom) {
                continue;
            }
            let img = f.image(a).expect("support in domain");
            for (&x, &gx) in gf {
                let before = z.r.contains(&(a.clone(), x));
                let after = z.r.contains(&(img.clone(), gx));
                if before != after {
                    h_witness = Some(format!(
                        "support {} of {} does not transport along {}",
                        describe_set(m, a),
                        store.display(x),
                        f.describe(m, m)
                    ));
                    break 'h;
                }
            }
        }
    }
    match h_witness {
        None => rep.ok("(h) support relation transports along the family"),
        Some(w) => rep.fail("(h) support relation transports along the family", w),
    }

    // (i) inverses
    let mut i_witness = None;
    for (f, gf) in &z.g {
        let finv = f.inverse();
        let expected: BTreeMap<SetHandle, SetHandle> = gf.iter().map(|(&x, &gx)| (gx, x)).collect();
        if z.g.get(&finv) != Some(&expected) {
            i_witness = Some(format!(
                "action of the inverse of {} is not the inverse action",
                f.describe(m, m)
            ));
            break;
        }
    }
    match i_witness {
        None => rep.ok("(i) action of an inverse is the inverse action"),
        Some(w) => rep.fail("(i) action of an inverse is the inverse action", w),
    }

    // (j) compositions
    let mut j_witness = None;
    'j: for (f1, _) in &z.g {
        for (f2, gf2) in &z.g {
            let comp = f1.then(f2);
            let Some(gcomp) = z.g.get(&comp) else { continue };
            let gf1 = &z.g[f1];
            for (x, gx) in gcomp {
                let via = gf1.get(x).and_then(|mid| gf2.get(mid));
                if via != Some(gx) {
                    j_witness = Some(format!(
                        "action of {} then {} disagrees with the composite at {}",
                        f1.describe(m, m),
                        f2.describe(m, m),
                        store.display(*x)
                    ));
                    break 'j;
                }
            }
        }
    }
    match j_witness {
        None => rep.ok("(j) action of a composite refines the composed actions"),
        Some(w) => rep.fail("(j) action of a composite refines the composed actions", w),
    }

    // (k) dynamic constants are fixed wherever they are acted on
    let mut k_witness = None;
    'k: for (l, c) in z.constants.iter().enumerate() {
        let Some(c) = c else { continue };
        for (f, gf) in &z.g {
            if let Some(&gc) = gf.get(c) {
                if gc != *c {
                    k_witness = Some(format!(
                        "constant {l} ({}) moved by {}",
                        store.display(*c),
                        f.describe(m, m)
                    ));
                    break 'k;
                }
            }
        }
    }
    match k_witness {
        None => rep.ok("(k) dynamic constants are fixed by every action"),
        Some(w) => rep.fail("(k) dynamic constants are fixed by every action", w),
    }

    rep
}

/// A good set candidate: its members and every support witnessing goodness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodSet {
    pub members: BTreeSet<SetHandle>,
    pub supports: Vec<ElemSet>,
}

/// The supports A for which X respects every A-fixing move, or an empty
/// list when there are none.  X must be a subset of the universe.
pub fn supports_of_set(
    y: &KSystem,
    z: &Lifting,
    members: &BTreeSet<SetHandle>,
) -> Vec<ElemSet> {
    let mut out = Vec::new();
    'support: for a in y.i.iter() {
        for f in y.f.iter() {
            let dom = f.dom();
            if !a.is_subset(&dom) || !f.fixes(a) {
                continue;
            }
            let gf = &z.g[f];
            for (b, y_h) in &z.r {
                if !b.is_subset(&dom) {
                    continue;
                }
                let Some(&gy) = gf.get(y_h) else { continue };
                if members.contains(y_h) != members.contains(&gy) {
                    continue 'support;
                }
            }
        }
        out.push(a.clone());
    }
    out
}

/// Enumerates every good set over the lifting: subsets of the universe,
/// closed under all support-fixing moves for some support, not already
/// members of the universe.
pub fn good_sets(y: &KSystem, store: &UniverseStore, z: &Lifting) -> Result<Vec<GoodSet>> {
    let n = z.universe.len();
    let index: BTreeMap<SetHandle, usize> = z.universe.iter().copied().zip(0..).collect();
    let mut found: BTreeMap<BTreeSet<SetHandle>, Vec<ElemSet>> = BTreeMap::new();
    for a in y.i.iter() {
        // components of the A-fixing move graph
        let mut uf: Vec<usize> = (0..n).collect();
        fn find(uf: &mut Vec<usize>, x: usize) -> usize {
            if uf[x] != x {
                let r = find(uf, uf[x]);
                uf[x] = r;
            }
            uf[x]
        }
        for f in y.f.iter() {
            let dom = f.dom();
            if !a.is_subset(&dom) || !f.fixes(a) {
                continue;
            }
            let gf = &z.g[f];
            for (b, y_h) in &z.r {
                if !b.is_subset(&dom) {
                    continue;
                }
                let Some(&gy) = gf.get(y_h) else { continue };
                let (i, j) = (index[y_h], index[&gy]);
                let (ri, rj) = (find(&mut uf, i), find(&mut uf, j));
                if ri != rj {
                    uf[ri] = rj;
                }
            }
        }
        let mut blocks: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = find(&mut uf, i);
            blocks.entry(r).or_default().push(i);
        }
        let blocks: Vec<Vec<usize>> = blocks.into_values().collect();
        if blocks.len() > GOOD_BLOCK_CAP {
            return Err(Error::invalid(format!(
                "{} move blocks for support {}, over the enumeration cap of {GOOD_BLOCK_CAP}",
                blocks.len(),
                describe_set(&y.m, a)
            )));
        }
        for mask in 0..(1u32 << blocks.len()) {
            let mut members = BTreeSet::new();
            for (bi, block) in blocks.iter().enumerate() {
                if mask >> bi & 1 == 1 {
                    members.extend(block.iter().map(|&i| z.universe[i]));
                }
            }
            found.entry(members).or_default().push(a.clone());
        }
    }
    let interned: BTreeSet<BTreeSet<SetHandle>> = z
        .universe
        .iter()
        .filter(|h| !h.is_atom())
        .map(|&h| store.members(h).iter().copied().collect())
        .collect();
    Ok(found
        .into_iter()
        .filter(|(members, _)| !interned.contains(members))
        .map(|(members, mut supports)| {
            supports.sort();
            supports.dedup();
            GoodSet { members, supports }
        })
        .collect())
}

/// The lifted image of X along f against the support A: all elements some
/// family extension of f|A sends a member of X to.
pub fn lift_map(
    y: &KSystem,
    z: &Lifting,
    f: &PartialInj,
    members: &BTreeSet<SetHandle>,
    a: &ElemSet,
) -> Result<BTreeSet<SetHandle>> {
    if !a.is_subset(&f.dom()) {
        return Err(Error::invalid(format!(
            "support {} is not inside the domain of {}",
            describe_set(&y.m, a),
            f.describe(&y.m, &y.m)
        )));
    }
    let base = f.restrict(a);
    let mut out = BTreeSet::new();
    for g in y.f.iter() {
        if !g.extends(&base) {
            continue;
        }
        let gg = &z.g[g];
        for x in members {
            if let Some(&gx) = gg.get(x) {
                out.insert(gx);
            }
        }
    }
    Ok(out)
}

/// Are X1 and X2 related by the lifted action of some family map?
pub fn good_equiv(
    y: &KSystem,
    z: &Lifting,
    x1: &GoodSet,
    x2: &BTreeSet<SetHandle>,
) -> Result<bool> {
    for a in &x1.supports {
        for r in y.f.with_exact_dom(a) {
            if lift_map(y, z, r, &x1.members, a)? == *x2 {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// The orbit of a good set under the lifted action, as member sets.
fn orbit_of_good(
    y: &KSystem,
    z: &Lifting,
    start: &GoodSet,
) -> Result<BTreeSet<BTreeSet<SetHandle>>> {
    let mut seen: BTreeSet<BTreeSet<SetHandle>> = BTreeSet::new();
    let mut queue = vec![start.members.clone()];
    let mut supports: BTreeMap<BTreeSet<SetHandle>, Vec<ElemSet>> = BTreeMap::new();
    supports.insert(start.members.clone(), start.supports.clone());
    while let Some(cur) = queue.pop() {
        if !seen.insert(cur.clone()) {
            continue;
        }
        let sups = match supports.get(&cur) {
            Some(s) => s.clone(),
            None => supports_of_set(y, z, &cur),
        };
        for a in &sups {
            for r in y.f.with_exact_dom(a) {
                let img = lift_map(y, z, r, &cur, a)?;
                if !seen.contains(&img) {
                    queue.push(img);
                }
            }
        }
    }
    Ok(seen)
}

fn build_successor(
    y: &KSystem,
    store: &mut UniverseStore,
    z: &Lifting,
    new_sets: &[GoodSet],
    universe: Vec<SetHandle>,
    constants: Vec<Option<SetHandle>>,
) -> Result<Lifting> {
    let mut handle_of: BTreeMap<BTreeSet<SetHandle>, SetHandle> = BTreeMap::new();
    for gs in new_sets {
        let h = store.intern_set(gs.members.iter().copied());
        handle_of.insert(gs.members.clone(), h);
    }
    let mut r = z.r.clone();
    for gs in new_sets {
        let h = handle_of[&gs.members];
        for a in &gs.supports {
            r.insert((a.clone(), h));
        }
    }
    let mut g = z.g.clone();
    let mut lift_cache: BTreeMap<(PartialInj, BTreeSet<SetHandle>), BTreeSet<SetHandle>> =
        BTreeMap::new();
    for f in y.f.iter() {
        let dom = f.dom();
        let action = g.get_mut(f).expect("zero stage covers the family");
        for gs in new_sets {
            let Some(a) = gs.supports.iter().find(|a| a.is_subset(&dom)) else {
                continue;
            };
            let base = f.restrict(a);
            let key = (base.clone(), gs.members.clone());
            let img = match lift_cache.get(&key) {
                Some(img) => img.clone(),
                None => {
                    let img = lift_map(y, z, f, &gs.members, a)?;
                    lift_cache.insert(key, img.clone());
                    img
                }
            };
            let img_h = match handle_of.get(&img) {
                Some(&h) => h,
                None => {
                    let h = store.intern_set(img.iter().copied());
                    if universe.binary_search(&h).is_err() {
                        return Err(Error::invalid(format!(
                            "lifted image of a stage set under {} left the stage",
                            f.describe(&y.m, &y.m)
                        )));
                    }
                    h
                }
            };
            action.insert(handle_of[&gs.members], img_h);
        }
    }
    Ok(Lifting {
        universe,
        constants,
        g,
        r,
    })
}

/// The full successor: adjoin every good set whose orbit under the lifted
/// action has at most t_fun(||M||) members.
pub fn full_successor(y: &KSystem, store: &mut UniverseStore, z: &Lifting) -> Result<Lifting> {
    let goods = good_sets(y, store, z)?;
    let bound = y.threshold();
    // partition the good sets into orbits
    let index: BTreeMap<&BTreeSet<SetHandle>, usize> =
        goods.iter().map(|g| &g.members).zip(0..).collect();
    let mut class_of: Vec<Option<usize>> = vec![None; goods.len()];
    let mut next_class = 0usize;
    let mut class_sizes: Vec<u64> = Vec::new();
    for i in 0..goods.len() {
        if class_of[i].is_some() {
            continue;
        }
        let orbit = orbit_of_good(y, z, &goods[i])?;
        let mut size = 0u64;
        for members in &orbit {
            if let Some(&j) = index.get(members) {
                class_of[j] = Some(next_class);
                size += 1;
            }
        }
        class_sizes.push(size);
        next_class += 1;
    }
    let kept: Vec<GoodSet> = goods
        .iter()
        .enumerate()
        .filter(|&(i, _)| {
            let c = class_of[i].expect("orbits cover the family");
            !bound.exceeded_by(class_sizes[c])
        })
        .map(|(_, g)| g.clone())
        .collect();
    let mut universe = z.universe.clone();
    for gs in &kept {
        universe.push(store.intern_set(gs.members.iter().copied()));
    }
    universe.sort_unstable();
    universe.dedup();
    build_successor(y, store, z, &kept, universe, z.constants.clone())
}

fn scheme_bounds_ok(y: &KSystem, u: &InductiveScheme) -> Result<()> {
    if y.k < 3 {
        return Err(Error::invalid(format!("successor construction needs k >= 3, got {}", y.k)));
    }
    let (_, m_fv) = u.metrics();
    if m_fv > y.s {
        return Err(Error::invalid(format!(
            "scheme takes parameter tuples of length {m_fv}, over the system bound s = {}",
            y.s
        )));
    }
    let msfv = u
        .psi
        .iter()
        .map(|r| r.body.max_subformula_free_vars())
        .chain(u.phi.iter().map(|r| r.body.max_subformula_free_vars()))
        .max()
        .unwrap_or(0);
    if msfv > y.k {
        return Err(Error::invalid(format!(
            "scheme has a subformula with {msfv} free variables, over the system bound k = {}",
            y.k
        )));
    }
    Ok(())
}

/// One inductive step of the scheme on top of the lifting: computes the
/// scheme successor, asserts every new stage set is good and class-closed,
/// and extends the action and supports.
pub fn true_successor(
    y: &KSystem,
    store: &mut UniverseStore,
    z: &Lifting,
    u: &InductiveScheme,
) -> Result<Lifting> {
    scheme_bounds_ok(y, u)?;
    let cand = Candidate {
        universe: z.universe.clone(),
        constants: z.constants.clone(),
        history: None,
    };
    let (next, _stats) = successor(store, &y.m, u, &y.t_fun, &cand)?;
    let old: BTreeSet<SetHandle> = z.universe.iter().copied().collect();
    let mut new_sets = Vec::new();
    for &h in &next.universe {
        if old.contains(&h) {
            continue;
        }
        let members: BTreeSet<SetHandle> = store.members(h).iter().copied().collect();
        let supports = supports_of_set(y, z, &members);
        if supports.is_empty() {
            return Err(Error::invalid(format!(
                "stage set {} is not good: no support fixes it",
                store.display(h)
            )));
        }
        new_sets.push(GoodSet { members, supports });
    }
    let next_universe: BTreeSet<SetHandle> = next.universe.iter().copied().collect();
    for gs in &new_sets {
        for members in orbit_of_good(y, z, gs)? {
            let h = store.intern_set(members.iter().copied());
            if !next_universe.contains(&h) {
                return Err(Error::invalid(
                    "stage is not closed under the lifted action: an orbit leaves it".to_string(),
                ));
            }
        }
    }
    build_successor(y, store, z, &new_sets, next.universe, next.constants)
}

/// Preservation of a formula along every lifted action, under one of the
/// two bound profiles: (a) every subformula has at most `m_qf` free
/// variables and the arguments are supported inside the domain; (b) the
/// quantifier depth is at most `m_qd`, the formula has at most
/// `m_qf + m_qd - depth` free variables, and the arguments range over the
/// whole action.
pub fn preservation_check(
    y: &KSystem,
    store: &UniverseStore,
    z: &Lifting,
    phi: &Formula,
    m_qf: usize,
    m_qd: usize,
) -> Result<Report> {
    let mut rep = Report::default();
    let free: Vec<String> = phi.free_vars().into_iter().collect();
    let depth = phi.quantifier_depth();
    let mode_a = phi.max_subformula_free_vars() <= m_qf;
    let mode_b = depth <= m_qd && free.len() <= m_qf + m_qd - depth.min(m_qd);
    if !mode_a && !mode_b {
        return Err(Error::invalid(format!(
            "formula fits neither bound profile: subformulas up to {} free variables, depth {depth}, {} free variables against (m_qf, m_qd) = ({m_qf}, {m_qd})",
            phi.max_subformula_free_vars(),
            free.len()
        )));
    }

    let ctx = EvalCtx {
        store,
        structure: &y.m,
        universe: &z.universe,
        dynamics: &z.constants,
        threshold: y.threshold(),
    };
    let n = z.universe.len();
    let v = free.len();
    let mut table = vec![false; n.pow(v as u32)];
    let mut idx_tuple = vec![0usize; v];
    for flat in 0..table.len() {
        let mut rest = flat;
        for slot in (0..v).rev() {
            idx_tuple[slot] = rest % n;
            rest /= n;
        }
        let mut env: Vec<(String, SetHandle)> = free
            .iter()
            .cloned()
            .zip(idx_tuple.iter().map(|&i| z.universe[i]))
            .collect();
        table[flat] = evaluate(&ctx, phi, &mut env)?;
    }
    let pos_of: BTreeMap<SetHandle, usize> = z.universe.iter().copied().zip(0..).collect();

    let mode_label = if mode_a { "profile (a)" } else { "profile (b)" };
    let mut checked = 0u64;
    let mut witness = None;
    'outer: for f in y.f.iter() {
        let gf = &z.g[f];
        let dom = f.dom();
        let candidates: Vec<SetHandle> = if mode_a {
            let mut supported = BTreeSet::new();
            for (a, y_h) in &z.r {
                if a.is_subset(&dom) {
                    supported.insert(*y_h);
                }
            }
            supported.into_iter().collect()
        } else {
            gf.keys().copied().collect()
        };
        let c = candidates.len();
        if v > 0 && c == 0 {
            continue;
        }
        let mut pick = vec![0usize; v];
        loop {
            let mut flat1 = 0usize;
            let mut flat2 = 0usize;
            let mut ok = true;
            for slot in 0..v {
                let x = candidates[pick[slot]];
                let Some(&gx) = gf.get(&x) else {
                    ok = false;
                    break;
                };
                flat1 = flat1 * n + pos_of[&x];
                flat2 = flat2 * n + pos_of[&gx];
            }
            if ok {
                checked += 1;
                if table[flat1] != table[flat2] {
                    let args: Vec<String> = pick
                        .iter()
                        .map(|&i| store.display(candidates[i]))
                        .collect();
                    witness = Some(format!(
                        "{} breaks `{phi}` at ({})",
                        f.describe(&y.m, &y.m),
                        args.join(", ")
                    ));
                    break 'outer;
                }
            }
            // advance the odometer
            let mut slot = v;
            loop {
                if slot == 0 {
                    break;
                }
                slot -= 1;
                pick[slot] += 1;
                if pick[slot] < c {
                    break;
                }
                pick[slot] = 0;
                if slot == 0 {
                    slot = usize::MAX;
                    break;
                }
            }
            if v == 0 || slot == usize::MAX {
                break;
            }
        }
    }
    match witness {
        None => rep.note(
            mode_label,
            format!("{} maps, {checked} argument tuples", y.f.len()),
        ),
        Some(w) => rep.fail(mode_label, w),
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_formula;
    use crate::logic::Dialect;
    use crate::models;
    use crate::scheme::TimingFunction;
    use crate::symmetry::{MapFamily, SupportFamily};

    fn c5() -> (KSystem, UniverseStore) {
        let m = models::cycle_graph(5);
        let store = m.store();
        let i = SupportFamily::size_at_most(5, 1);
        let f = MapFamily::all_partial_autos(&m, 3).unwrap();
        (
            KSystem {
                name: "c5".into(),
                m,
                i,
                f,
                k: 3,
                s: 1,
                t_fun: TimingFunction::Poly { num: 1, den: 1 },
            },
            store,
        )
    }

    #[test]
    fn zero_lifting_passes() {
        let (y, store) = c5();
        let z = zero_lifting(&y, &store, 0);
        let rep = check_lifting(&y, &store, &z);
        assert!(rep.pass(), "{}", rep.json_lines());
    }

    #[test]
    fn stage_zero_good_sets_are_all_subsets() {
        let (y, store) = c5();
        let z = zero_lifting(&y, &store, 0);
        let goods = good_sets(&y, &store, &z).unwrap();
        assert_eq!(goods.len(), 32);
    }

    #[test]
    fn full_successor_has_37_elements_and_passes() {
        let (y, mut store) = c5();
        let z = zero_lifting(&y, &store, 0);
        let z1 = full_successor(&y, &mut store, &z).unwrap();
        assert_eq!(z1.universe.len(), 37);
        let rep = check_lifting(&y, &store, &z1);
        assert!(rep.pass(), "{}", rep.json_lines());
    }

    #[test]
    fn lift_map_needs_support_in_domain() {
        let (y, store) = c5();
        let z = zero_lifting(&y, &store, 0);
        let goods = good_sets(&y, &store, &z).unwrap();
        let x = goods.iter().find(|g| !g.members.is_empty()).unwrap();
        let f = PartialInj::new([(0, 0)]).unwrap();
        let a: ElemSet = [1].into_iter().collect();
        assert!(lift_map(&y, &z, &f, &x.members, &a).is_err());
    }

    #[test]
    fn preservation_on_zero_lifting() {
        let (y, store) = c5();
        let z = zero_lifting(&y, &store, 0);
        let phi = parse_formula("R(x, y) & !(x = y)", &y.m.vocab, Dialect::Fo).unwrap();
        let rep = preservation_check(&y, &store, &z, &phi, 3, 1).unwrap();
        assert!(rep.pass(), "{}", rep.json_lines());
    }
}
