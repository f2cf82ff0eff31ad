//! k-system clause checks: the family axioms (A)-(D), the dichotomy clause
//! (E) in exhaustive and definable modes, and the super strengthening (E)+
//! with its class-count transport.

use super::{
    describe_set, find_extension_in, is_partial_auto, ElemSet, KSystem, PartialInj, Report,
    PAIR_BUDGET,
};
use crate::logic::eval::{evaluate, EvalCtx};
use crate::logic::Formula;
use crate::{Bound, Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

const COMPOSITION_SAMPLE: usize = 100_000;
const EXHAUSTIVE_H_CAP: usize = 8;
const COMPONENT_CAP: usize = 12;
const H_LENGTH_CAP: usize = 4;

pub fn check_k_system(y: &KSystem) -> Report {
    let mut rep = Report::default();
    let m = &y.m;

    match y.i.shape_violation(m) {
        None => rep.ok("(A) supports closed under subsets with all singletons"),
        Some(w) => rep.fail("(A) supports closed under subsets with all singletons", w),
    }

    let mut bad_auto = None;
    for f in y.f.iter() {
        if !is_partial_auto(m, f) {
            bad_auto = Some(f.describe(m, m));
            break;
        }
    }
    match bad_auto {
        None => rep.ok("(B) members are partial automorphisms"),
        Some(w) => rep.fail("(B) members are partial automorphisms", w),
    }

    let mut bad_image = None;
    'image: for f in y.f.iter() {
        let dom = f.dom();
        for a in y.i.iter() {
            if a.is_subset(&dom) {
                let img = f.image(a).expect("support inside domain");
                if !y.i.contains(&img) {
                    bad_image = Some(format!(
                        "image of {} under {} is {}, not a support",
                        describe_set(m, a),
                        f.describe(m, m),
                        describe_set(m, &img)
                    ));
                    break 'image;
                }
            }
        }
    }
    match bad_image {
        None => rep.ok("(B) images of supports are supports"),
        Some(w) => rep.fail("(B) images of supports are supports", w),
    }

    let mut bad_inv = None;
    for f in y.f.iter() {
        if !y.f.contains(&f.inverse()) {
            bad_inv = Some(format!("inverse of {} missing", f.describe(m, m)));
            break;
        }
    }
    match bad_inv {
        None => rep.ok("(B) closed under inverse"),
        Some(w) => rep.fail("(B) closed under inverse", w),
    }

    let n_maps = y.f.len();
    let total_pairs = (n_maps as u64).saturating_mul(n_maps as u64);
    let mut bad_comp = None;
    let mut sampled = None;
    if total_pairs <= PAIR_BUDGET {
        'comp: for f1 in y.f.iter() {
            for f2 in y.f.iter() {
                if !y.f.contains(&f1.then(f2)) {
                    bad_comp = Some(format!(
                        "{} then {} leaves the family",
                        f1.describe(m, m),
                        f2.describe(m, m)
                    ));
                    break 'comp;
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        sampled = Some(COMPOSITION_SAMPLE);
        for _ in 0..COMPOSITION_SAMPLE {
            let f1 = y.f.get(rng.gen_range(0..n_maps));
            let f2 = y.f.get(rng.gen_range(0..n_maps));
            if !y.f.contains(&f1.then(f2)) {
                bad_comp = Some(format!(
                    "{} then {} leaves the family",
                    f1.describe(m, m),
                    f2.describe(m, m)
                ));
                break;
            }
        }
    }
    let comp_clause = "(B) closed under composition";
    match (bad_comp, sampled) {
        (Some(w), _) => rep.fail(comp_clause, w),
        (None, Some(k)) => rep.note(
            comp_clause,
            format!("sampled {k} of {total_pairs} pairs (seed 0)"),
        ),
        (None, None) => rep.ok(comp_clause),
    }

    let mut bad_restr = None;
    'restr: for f in y.f.iter() {
        let dom: Vec<usize> = f.dom().into_iter().collect();
        for mask in 0..(1u32 << dom.len()) {
            let sub: ElemSet = dom
                .iter()
                .enumerate()
                .filter(|&(i, _)| mask >> i & 1 == 1)
                .map(|(_, &x)| x)
                .collect();
            if !y.f.contains(&f.restrict(&sub)) {
                bad_restr = Some(format!(
                    "restriction of {} to {} missing",
                    f.describe(m, m),
                    describe_set(m, &sub)
                ));
                break 'restr;
            }
        }
    }
    match bad_restr {
        None => rep.ok("(B) closed under restriction"),
        Some(w) => rep.fail("(B) closed under restriction", w),
    }

    let mut bad_dom = None;
    for f in y.f.iter() {
        if !y.i.in_union(&f.dom(), y.k) {
            bad_dom = Some(format!(
                "domain of {} is not a union of {} supports",
                f.describe(m, m),
                y.k
            ));
            break;
        }
    }
    match bad_dom {
        None => rep.ok("(C) domains are unions of at most k supports"),
        Some(w) => rep.fail("(C) domains are unions of at most k supports", w),
    }

    let mut bad_ext = None;
    let mut ext_checked = 0u64;
    'ext: for r in y.f.iter() {
        if !y.i.in_union(&r.dom(), y.k.saturating_sub(1)) {
            continue;
        }
        for a in y.i.iter() {
            ext_checked += 1;
            if find_extension_in(m, m, &y.f, r, a).is_none() {
                bad_ext = Some(format!(
                    "no extension of {} covering {}",
                    r.describe(m, m),
                    describe_set(m, a)
                ));
                break 'ext;
            }
        }
    }
    let ext_clause = "(D) extensions over one more support";
    match bad_ext {
        None => rep.note(
            ext_clause,
            format!("checked {ext_checked} restriction-support pairs"),
        ),
        Some(w) => rep.fail(ext_clause, w),
    }

    rep
}

#[derive(Debug, Clone)]
pub enum DichotomyMode<'a> {
    Exhaustive,
    Definable(&'a [Formula]),
}

/// One admissible pair (h, E) together with which side of the dichotomy it
/// landed on.
#[derive(Debug, Clone)]
pub struct DichotomyOutcome {
    pub m: usize,
    pub h: Vec<usize>,
    pub label: String,
    pub beta1: bool,
    pub beta2: bool,
    pub classes: usize,
}

struct Uf(Vec<usize>);

impl Uf {
    fn new(n: usize) -> Uf {
        Uf((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

fn apply_tuple(f: &PartialInj, t: &[u16]) -> Option<Vec<u16>> {
    t.iter()
        .map(|&x| f.get(x as usize).map(|y| y as u16))
        .collect()
}

fn tuple_set(t: &[u16]) -> ElemSet {
    t.iter().map(|&x| x as usize).collect()
}

/// Injective tuples of length `len` drawn from `pool`.
pub(crate) fn injective_tuples_over(pool: &[usize], len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(pool: &[usize], len: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for &x in pool {
            if !cur.contains(&x) {
                cur.push(x);
                rec(pool, len, cur, out);
                cur.pop();
            }
        }
    }
    rec(pool, len, &mut cur, &mut out);
    out
}

fn injective_tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    let pool: Vec<usize> = (0..n).collect();
    injective_tuples_over(&pool, len)
}

/// The orbit `{f . h : f in F, Rang(h) in Dom(f), f fixes `fixed`}` as a
/// sorted list of image tuples.
fn orbit_tuples(y: &KSystem, h: &[usize], fixed: &ElemSet) -> Vec<Vec<u16>> {
    let mut need: ElemSet = h.iter().copied().collect();
    need.extend(fixed.iter().copied());
    let mut out: BTreeSet<Vec<u16>> = BTreeSet::new();
    for f in y.f.with_dom_superset(&need) {
        if !f.fixes(fixed) {
            continue;
        }
        let t: Vec<u16> = h.iter().map(|&x| f.get(x).unwrap() as u16).collect();
        out.insert(t);
    }
    out.into_iter().collect()
}

/// Components of the move relation on ordered pairs of orbit tuples:
/// (t1,t2) ~ (r.t1, r.t2) for r in F with exact domain covering both
/// tuples (and `fixed`), fixing `fixed` pointwise.
fn pair_components(y: &KSystem, tuples: &[Vec<u16>], fixed: &ElemSet) -> Vec<usize> {
    let idx: BTreeMap<&[u16], usize> = tuples.iter().map(|t| t.as_slice()).zip(0..).collect();
    let n = tuples.len();
    let mut uf = Uf::new(n * n);
    for (i1, t1) in tuples.iter().enumerate() {
        for (i2, t2) in tuples.iter().enumerate() {
            let mut union = tuple_set(t1);
            union.extend(tuple_set(t2));
            union.extend(fixed.iter().copied());
            for r in y.f.with_exact_dom(&union) {
                if !r.fixes(fixed) {
                    continue;
                }
                let u1 = apply_tuple(r, t1).unwrap();
                let u2 = apply_tuple(r, t2).unwrap();
                if let (Some(&j1), Some(&j2)) = (idx.get(u1.as_slice()), idx.get(u2.as_slice())) {
                    uf.union(i1 * n + i2, j1 * n + j2);
                }
            }
        }
    }
    (0..n * n).map(|p| uf.find(p)).collect()
}

/// Is the partition (as class ids per tuple) constant on every move
/// component?
fn respects_components(class_of: &[usize], comp_of: &[usize]) -> bool {
    let n = class_of.len();
    let mut seen: BTreeMap<usize, bool> = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            let bit = class_of[i] == class_of[j];
            match seen.entry(comp_of[i * n + j]) {
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(bit);
                }
                std::collections::btree_map::Entry::Occupied(e) => {
                    if *e.get() != bit {
                        return false;
                    }
                }
            }
        }
    }
    true
}

fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, next: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..=next {
            cur[i] = c;
            rec(i + 1, next.max(c + 1), cur, out);
        }
    }
    rec(0, 0, &mut cur, &mut out);
    out
}

fn class_count(class_of: &[usize]) -> usize {
    class_of.iter().collect::<BTreeSet<_>>().len()
}

fn h_var_names(m: usize) -> (Vec<String>, Vec<String>) {
    if m == 1 {
        (vec!["x".to_string()], vec!["y".to_string()])
    } else {
        (
            (1..=m).map(|i| format!("x{i}")).collect(),
            (1..=m).map(|i| format!("y{i}")).collect(),
        )
    }
}

/// Equivalences on the orbit induced by the given quantifier-free formulas,
/// as (label, class vector) pairs; formulas that do not define an
/// equivalence on this orbit are dropped.
fn definable_partitions(
    y: &KSystem,
    tuples: &[Vec<u16>],
    m_len: usize,
    formulas: &[Formula],
) -> Result<Vec<(String, Vec<usize>)>> {
    let store = y.m.store();
    let atoms: Vec<_> = (0..y.m.n()).map(|i| y.m.atom(i)).collect();
    let ctx = EvalCtx {
        store: &store,
        structure: &y.m,
        universe: &atoms,
        dynamics: &[],
        threshold: Bound::Infinite,
    };
    let (xs, ys) = h_var_names(m_len);
    let expected: BTreeSet<String> = xs.iter().chain(ys.iter()).cloned().collect();
    let n = tuples.len();
    let mut out = Vec::new();
    for phi in formulas {
        if phi.quantifier_depth() > 0 {
            return Err(Error::invalid(format!(
                "definable mode expects quantifier-free formulas, got `{phi}`"
            )));
        }
        if !phi.free_vars().is_subset(&expected) {
            continue;
        }
        let mut rel = vec![false; n * n];
        for (i, t1) in tuples.iter().enumerate() {
            for (j, t2) in tuples.iter().enumerate() {
                let mut env: Vec<(String, crate::hfs::SetHandle)> = Vec::new();
                for (v, &e) in xs.iter().zip(t1.iter()) {
                    env.push((v.clone(), atoms[e as usize]));
                }
                for (v, &e) in ys.iter().zip(t2.iter()) {
                    env.push((v.clone(), atoms[e as usize]));
                }
                rel[i * n + j] = evaluate(&ctx, phi, &mut env)?;
            }
        }
        if let Some(class_of) = relation_to_partition(&rel, n) {
            out.push((phi.to_string(), class_of));
        }
    }
    Ok(out)
}

/// Turns a relation bit-matrix into a partition if it is an equivalence.
fn relation_to_partition(rel: &[bool], n: usize) -> Option<Vec<usize>> {
    for i in 0..n {
        if !rel[i * n + i] {
            return None;
        }
        for j in 0..n {
            if rel[i * n + j] != rel[j * n + i] {
                return None;
            }
            for l in 0..n {
                if rel[i * n + j] && rel[j * n + l] && !rel[i * n + l] {
                    return None;
                }
            }
        }
    }
    let mut class_of = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if class_of[i] == usize::MAX {
            for j in 0..n {
                if rel[i * n + j] {
                    class_of[j] = next;
                }
            }
            next += 1;
        }
    }
    Some(class_of)
}

pub(crate) fn h_length_bound(y: &KSystem, per_union: usize) -> Result<usize> {
    let cap = per_union * y.i.max_member_size();
    let cap = cap.min(y.m.n());
    if cap > H_LENGTH_CAP {
        return Err(Error::invalid(format!(
            "tuple enumeration would need length {cap}, over the cap of {H_LENGTH_CAP}"
        )));
    }
    Ok(cap)
}

/// Checks the dichotomy clause (E): every admissible pair (h, E) either has
/// a determining sub-tuple with a small support or more classes than the
/// time bound.
pub fn check_dichotomy(
    y: &KSystem,
    mode: &DichotomyMode,
) -> Result<(Report, Vec<DichotomyOutcome>)> {
    let mut rep = Report::default();
    let mut outcomes = Vec::new();
    let t = y.threshold();
    let m_cap = h_length_bound(y, y.s)?;
    for m_len in 1..=m_cap {
        let mut h_count = 0usize;
        let mut e_count = 0usize;
        let mut failure: Option<String> = None;
        for h in injective_tuples(y.m.n(), m_len) {
            let rang: ElemSet = h.iter().copied().collect();
            if !y.i.in_union(&rang, y.s) {
                continue;
            }
            h_count += 1;
            let tuples = orbit_tuples(y, &h, &ElemSet::new());
            if tuples.is_empty() {
                continue;
            }
            let comp_of = pair_components(y, &tuples, &ElemSet::new());
            let mut candidates: Vec<(String, Vec<usize>)> = Vec::new();
            match mode {
                DichotomyMode::Exhaustive => {
                    if tuples.len() > EXHAUSTIVE_H_CAP {
                        return Err(Error::invalid(format!(
                            "exhaustive mode is limited to orbits of size {EXHAUSTIVE_H_CAP}, got {}",
                            tuples.len()
                        )));
                    }
                    for (i, p) in set_partitions(tuples.len()).into_iter().enumerate() {
                        candidates.push((format!("partition #{i}"), p));
                    }
                }
                DichotomyMode::Definable(formulas) => {
                    candidates = definable_partitions(y, &tuples, m_len, formulas)?;
                }
            }
            for (label, class_of) in candidates {
                if !respects_components(&class_of, &comp_of) {
                    continue;
                }
                e_count += 1;
                let classes = class_count(&class_of);
                let beta1 = (0..(1u32 << m_len)).any(|mask| {
                    let u: Vec<usize> = (0..m_len).filter(|&i| mask >> i & 1 == 1).collect();
                    let rang_u: ElemSet = u.iter().map(|&i| h[i]).collect();
                    if !y.i.contains(&rang_u) {
                        return false;
                    }
                    for (i, t1) in tuples.iter().enumerate() {
                        for (j, t2) in tuples.iter().enumerate() {
                            if u.iter().all(|&p| t1[p] == t2[p]) && class_of[i] != class_of[j] {
                                return false;
                            }
                        }
                    }
                    true
                });
                let beta2 = t.exceeded_by(classes as u64);
                if !(beta1 || beta2) && failure.is_none() {
                    failure = Some(format!(
                        "h = {:?} with E = {label}: {classes} classes, no determining sub-tuple",
                        h.iter().map(|&x| y.m.elements[x].clone()).collect::<Vec<_>>()
                    ));
                }
                outcomes.push(DichotomyOutcome {
                    m: m_len,
                    h: h.clone(),
                    label,
                    beta1,
                    beta2,
                    classes,
                });
            }
        }
        let clause = format!("(E) dichotomy at tuple length {m_len}");
        match failure {
            None => rep.note(clause, format!("{h_count} tuples, {e_count} admissible pairs")),
            Some(w) => rep.fail(clause, w),
        }
    }
    Ok((rep, outcomes))
}

/// An equivalence on one orbit, as class ids per tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitEquiv {
    pub class_of: Vec<usize>,
    pub classes: usize,
}

/// All admissible equivalences for the key (A, h): partitions of the orbit
/// of h under maps fixing A, constant on every move component.  When there
/// are too many components only the finest and coarsest admissible ones are
/// produced, with a truncation marker.
fn admissible_equivs(y: &KSystem, tuples: &[Vec<u16>], fixed: &ElemSet) -> (Vec<OrbitEquiv>, bool) {
    let n = tuples.len();
    let comp_of = pair_components(y, tuples, fixed);
    let comps: BTreeSet<usize> = comp_of.iter().copied().collect();
    if n <= EXHAUSTIVE_H_CAP {
        let list = set_partitions(n)
            .into_iter()
            .filter(|p| respects_components(p, &comp_of))
            .map(|p| OrbitEquiv {
                classes: class_count(&p),
                class_of: p,
            })
            .collect();
        return (list, false);
    }
    if comps.len() > COMPONENT_CAP {
        let mut out = Vec::new();
        out.push(finest_admissible(&comp_of, n));
        out.push(OrbitEquiv {
            class_of: vec![0; n],
            classes: 1,
        });
        out.dedup();
        return (out, true);
    }
    // unions of components: force the components met by the diagonal,
    // toggle the rest, keep the ones that are equivalences
    let comp_list: Vec<usize> = comps.into_iter().collect();
    let mut forced: BTreeSet<usize> = BTreeSet::new();
    for i in 0..n {
        forced.insert(comp_of[i * n + i]);
    }
    let free: Vec<usize> = comp_list.iter().copied().filter(|c| !forced.contains(c)).collect();
    let mut out = Vec::new();
    for mask in 0..(1u64 << free.len()) {
        let mut chosen = forced.clone();
        for (b, &c) in free.iter().enumerate() {
            if mask >> b & 1 == 1 {
                chosen.insert(c);
            }
        }
        let rel: Vec<bool> = (0..n * n).map(|p| chosen.contains(&comp_of[p])).collect();
        if let Some(class_of) = relation_to_partition(&rel, n) {
            out.push(OrbitEquiv {
                classes: class_count(&class_of),
                class_of,
            });
        }
    }
    (out, false)
}

/// The finest admissible equivalence: saturate the diagonal under
/// symmetry, transitivity and component closure.
fn finest_admissible(comp_of: &[usize], n: usize) -> OrbitEquiv {
    let mut rel = vec![false; n * n];
    for i in 0..n {
        rel[i * n + i] = true;
    }
    loop {
        let mut changed = false;
        let on: BTreeSet<usize> = (0..n * n).filter(|&p| rel[p]).map(|p| comp_of[p]).collect();
        for p in 0..n * n {
            if !rel[p] && on.contains(&comp_of[p]) {
                rel[p] = true;
                changed = true;
            }
        }
        for i in 0..n {
            for j in 0..n {
                if rel[i * n + j] && !rel[j * n + i] {
                    rel[j * n + i] = true;
                    changed = true;
                }
                for l in 0..n {
                    if rel[i * n + j] && rel[j * n + l] && !rel[i * n + l] {
                        rel[i * n + l] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let class_of = relation_to_partition(&rel, n).expect("saturation yields an equivalence");
    OrbitEquiv {
        classes: class_count(&class_of),
        class_of,
    }
}

/// Sorted class-count multiset over the admissible equivalences for the
/// key (A, h), with a truncation marker.
pub(crate) fn key_class_counts(y: &KSystem, h: &[usize], a: &ElemSet) -> (Vec<usize>, bool) {
    let tuples = orbit_tuples(y, h, a);
    if tuples.is_empty() {
        return (Vec::new(), false);
    }
    let (equivs, truncated) = admissible_equivs(y, &tuples, a);
    let mut counts: Vec<usize> = equivs.iter().map(|e| e.classes).collect();
    counts.sort_unstable();
    (counts, truncated)
}

type SuperKey = (Vec<usize>, Vec<usize>);

struct SuperEntry {
    tuples: Vec<Vec<u16>>,
    equivs: Vec<OrbitEquiv>,
    truncated: bool,
}

/// Is E1 on entry 1 compatible with E2 on entry 2 under the partial action
/// of f?  Checks both directions over pairs whose tuples f can move.
fn compatible_under(
    f: &PartialInj,
    e1: &SuperEntry,
    eq1: &OrbitEquiv,
    e2: &SuperEntry,
    eq2: &OrbitEquiv,
) -> bool {
    let idx2: BTreeMap<&[u16], usize> = e2.tuples.iter().map(|t| t.as_slice()).zip(0..).collect();
    for (i, t1) in e1.tuples.iter().enumerate() {
        let Some(u1) = apply_tuple(f, t1) else { continue };
        let Some(&j1) = idx2.get(u1.as_slice()) else { continue };
        for (i2, t2) in e1.tuples.iter().enumerate() {
            let Some(u2) = apply_tuple(f, t2) else { continue };
            let Some(&j2) = idx2.get(u2.as_slice()) else { continue };
            let b1 = eq1.class_of[i] == eq1.class_of[i2];
            let b2 = eq2.class_of[j1] == eq2.class_of[j2];
            if b1 != b2 {
                return false;
            }
        }
    }
    let inv = f.inverse();
    let idx1: BTreeMap<&[u16], usize> = e1.tuples.iter().map(|t| t.as_slice()).zip(0..).collect();
    for (j, t1) in e2.tuples.iter().enumerate() {
        let Some(u1) = apply_tuple(&inv, t1) else { continue };
        let Some(&i1) = idx1.get(u1.as_slice()) else { continue };
        for (j2, t2) in e2.tuples.iter().enumerate() {
            let Some(u2) = apply_tuple(&inv, t2) else { continue };
            let Some(&i2) = idx1.get(u2.as_slice()) else { continue };
            let b2 = eq2.class_of[j] == eq2.class_of[j2];
            let b1 = eq1.class_of[i1] == eq1.class_of[i2];
            if b1 != b2 {
                return false;
            }
        }
    }
    true
}

/// Checks the super clause (E)+: translating a key (A, h) along any family
/// map carries admissible equivalences to admissible equivalences with the
/// same number of classes, bijectively.
pub fn check_super(y: &KSystem) -> Result<Report> {
    let mut rep = check_k_system(y);
    let m_cap = h_length_bound(y, 1)?;

    let mut entries: BTreeMap<SuperKey, SuperEntry> = BTreeMap::new();
    for m_len in 1..=m_cap {
        for h in injective_tuples(y.m.n(), m_len) {
            let rang: ElemSet = h.iter().copied().collect();
            if !y.i.contains(&rang) {
                continue;
            }
            for mask in 0..(1u32 << m_len) {
                let a: ElemSet = (0..m_len)
                    .filter(|&i| mask >> i & 1 == 1)
                    .map(|i| h[i])
                    .collect();
                if !y.i.in_union(&a, y.s) {
                    continue;
                }
                let key: SuperKey = (a.iter().copied().collect(), h.clone());
                if entries.contains_key(&key) {
                    continue;
                }
                let tuples = orbit_tuples(y, &h, &a);
                if tuples.is_empty() {
                    continue;
                }
                let (equivs, truncated) = admissible_equivs(y, &tuples, &a);
                entries.insert(
                    key,
                    SuperEntry {
                        tuples,
                        equivs,
                        truncated,
                    },
                );
            }
        }
    }

    let truncated_keys = entries.values().filter(|e| e.truncated).count();
    let mut count_failure: Option<String> = None;
    let mut onto_failure: Option<String> = None;
    let mut translations = 0u64;
    for (key1, e1) in &entries {
        let mut need: ElemSet = key1.0.iter().copied().collect();
        need.extend(key1.1.iter().copied());
        for f in y.f.with_dom_superset(&need) {
            let a2: Vec<usize> = key1.0.iter().map(|&x| f.get(x).unwrap()).collect();
            let h2: Vec<usize> = key1.1.iter().map(|&x| f.get(x).unwrap()).collect();
            let a2_sorted: Vec<usize> = a2.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            let key2: SuperKey = (a2_sorted, h2);
            let Some(e2) = entries.get(&key2) else {
                if onto_failure.is_none() {
                    onto_failure = Some(format!(
                        "translated key ({:?}, {:?}) of ({:?}, {:?}) has no entry",
                        key2.0, key2.1, key1.0, key1.1
                    ));
                }
                continue;
            };
            translations += 1;
            if e1.equivs.len() != e2.equivs.len() && onto_failure.is_none() {
                onto_failure = Some(format!(
                    "key ({:?}, {:?}) has {} admissible equivalences, its image has {}",
                    key1.0,
                    key1.1,
                    e1.equivs.len(),
                    e2.equivs.len()
                ));
            }
            for eq1 in &e1.equivs {
                let ok = e2
                    .equivs
                    .iter()
                    .any(|eq2| eq2.classes == eq1.classes && compatible_under(f, e1, eq1, e2, eq2));
                if !ok && count_failure.is_none() {
                    count_failure = Some(format!(
                        "no compatible equal-count image for a {}-class equivalence on key ({:?}, {:?}) under {}",
                        eq1.classes,
                        key1.0,
                        key1.1,
                        f.describe(&y.m, &y.m)
                    ));
                }
            }
            for eq2 in &e2.equivs {
                let ok = e1
                    .equivs
                    .iter()
                    .any(|eq1| eq1.classes == eq2.classes && compatible_under(f, e1, eq1, e2, eq2));
                if !ok && count_failure.is_none() {
                    count_failure = Some(format!(
                        "no compatible equal-count preimage for a {}-class equivalence on key ({:?}, {:?})",
                        eq2.classes, key2.0, key2.1
                    ));
                }
            }
        }
    }

    let counts_clause = "(E)+ class counts preserved";
    match &count_failure {
        None => rep.note(counts_clause, format!("{translations} key translations")),
        Some(w) => rep.fail(counts_clause, w.clone()),
    }
    let onto_clause = "(E)+ admissible families correspond bijectively";
    match &onto_failure {
        None => {
            if truncated_keys > 0 {
                rep.note(
                    onto_clause,
                    format!("{truncated_keys} keys truncated to finest and coarsest equivalences"),
                );
            } else {
                rep.ok(onto_clause);
            }
        }
        Some(w) => rep.fail(onto_clause, w.clone()),
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::scheme::TimingFunction;
    use crate::symmetry::{MapFamily, SupportFamily};

    fn c5_system() -> KSystem {
        let m = models::cycle_graph(5);
        let i = SupportFamily::size_at_most(5, 1);
        let f = MapFamily::all_partial_autos(&m, 3).unwrap();
        KSystem {
            name: "c5".into(),
            m,
            i,
            f,
            k: 3,
            s: 1,
            t_fun: TimingFunction::Poly { num: 1, den: 1 },
        }
    }

    #[test]
    fn five_cycle_passes_all_clauses() {
        let y = c5_system();
        let rep = check_k_system(&y);
        assert!(rep.pass(), "{}", rep.json_lines());
    }

    #[test]
    fn broken_family_fails_composition() {
        let mut y = c5_system();
        let maps: Vec<_> = y
            .f
            .iter()
            .filter(|f| f.len() < 2 || !f.fixes(&[0].into_iter().collect()))
            .cloned()
            .collect();
        y.f = MapFamily::from_maps(crate::symmetry::FamilyKind::Explicit, maps).unwrap();
        let rep = check_k_system(&y);
        assert!(!rep.pass());
    }

    #[test]
    fn five_cycle_dichotomy_exhaustive() {
        let y = c5_system();
        let (rep, outcomes) = check_dichotomy(&y, &DichotomyMode::Exhaustive).unwrap();
        assert!(rep.pass(), "{}", rep.json_lines());
        // every admissible pair at length 1 is settled by the full sub-tuple
        assert!(outcomes.iter().all(|o| o.beta1));
    }

    #[test]
    fn five_cycle_super() {
        let y = c5_system();
        let rep = check_super(&y).unwrap();
        assert!(rep.pass(), "{}", rep.json_lines());
    }
}
