//! Concrete structures, structure generators, randomness and homogeneity
//! tests, canonical systems, and the desk experiments.

use crate::logic::eval::{evaluate, EvalCtx};
use crate::logic::parse::parse_formula;
use crate::logic::{Formula, Structure, Term, Vocabulary};
use crate::scheme::{run, InductiveScheme, StopVariant, TimingFunction, TruthValue, Verdict};
use crate::symmetry::ksystem::{check_dichotomy, check_k_system, check_super, DichotomyMode};
use crate::symmetry::witness::{check_witness, Strength, WitnessFamily};
use crate::symmetry::{
    describe_set, is_partial_auto, ElemSet, KSystem, MapFamily, PartialInj, Report, SupportFamily,
};
use crate::{Bound, Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

pub fn graph_vocab() -> Vocabulary {
    let mut rels = BTreeMap::new();
    rels.insert("R".to_string(), 2);
    Vocabulary {
        rels,
        funs: BTreeMap::new(),
        cons: BTreeSet::new(),
    }
}

fn graph_structure(name: &str, n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Structure {
    let mut tuples = BTreeSet::new();
    for (i, j) in edges {
        tuples.insert(vec![i, j]);
    }
    let mut rels = BTreeMap::new();
    rels.insert("R".to_string(), tuples);
    Structure {
        name: name.to_string(),
        vocab: graph_vocab(),
        elements: (0..n).map(|i| format!("v{i}")).collect(),
        rels,
        funs: BTreeMap::new(),
        cons: BTreeMap::new(),
    }
}

/// An undirected graph from a list of unordered edges.
pub fn graph_from_edges(name: &str, n: usize, edges: &[(usize, usize)]) -> Structure {
    graph_structure(name, n, edges.iter().flat_map(|&(i, j)| [(i, j), (j, i)]))
}

/// Undirected cycle on `n` vertices, stored as a symmetric relation.
pub fn cycle_graph(n: usize) -> Structure {
    let edges = (0..n).flat_map(|i| {
        let j = (i + 1) % n;
        [(i, j), (j, i)]
    });
    graph_structure(&format!("cycle{n}"), n, edges)
}

pub fn complete_graph(n: usize) -> Structure {
    let edges = (0..n).flat_map(move |i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)));
    graph_structure(&format!("complete{n}"), n, edges)
}

/// The Paley graph on GF(p): i ~ j iff i - j is a nonzero square.
pub fn paley_graph(p: usize) -> Result<Structure> {
    if p % 4 != 1 {
        return Err(Error::invalid(format!(
            "paley graph needs a prime p = 1 mod 4, got {p}"
        )));
    }
    let squares: BTreeSet<usize> = (1..p).map(|x| x * x % p).collect();
    let edges = (0..p).flat_map(|i| (0..p).map(move |j| (i, j)));
    let edges = edges.filter(|&(i, j)| i != j && squares.contains(&((p + i - j) % p)));
    Ok(graph_structure(&format!("paley{p}"), p, edges))
}

/// A pure set [n] with one unary predicate holding on the first `p` elements.
pub fn unary_structure(n: usize, p: usize) -> Result<Structure> {
    if p > n {
        return Err(Error::invalid(format!("predicate size {p} exceeds universe {n}")));
    }
    let mut rels_voc = BTreeMap::new();
    rels_voc.insert("P".to_string(), 1);
    let tuples: BTreeSet<Vec<usize>> = (0..p).map(|i| vec![i]).collect();
    let mut rels = BTreeMap::new();
    rels.insert("P".to_string(), tuples);
    Ok(Structure {
        name: format!("unary{n}_{p}"),
        vocab: Vocabulary {
            rels: rels_voc,
            funs: BTreeMap::new(),
            cons: BTreeSet::new(),
        },
        elements: (0..n).map(|i| format!("u{i}")).collect(),
        rels,
        funs: BTreeMap::new(),
        cons: BTreeMap::new(),
    })
}

/// An isomorphic copy of `m` with the element ids permuted by a seeded shuffle.
pub fn relabel(m: &Structure, seed: u64) -> Structure {
    let n = m.n();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut rels = BTreeMap::new();
    for (name, tuples) in &m.rels {
        let mapped: BTreeSet<Vec<usize>> = tuples
            .iter()
            .map(|t| t.iter().map(|&x| perm[x]).collect())
            .collect();
        rels.insert(name.clone(), mapped);
    }
    let mut funs = BTreeMap::new();
    for (name, map) in &m.funs {
        let mapped: BTreeMap<usize, usize> = map.iter().map(|(&x, &y)| (perm[x], perm[y])).collect();
        funs.insert(name.clone(), mapped);
    }
    let cons = m.cons.iter().map(|(name, &c)| (name.clone(), perm[c])).collect();
    Structure {
        name: format!("{}_relabel{seed}", m.name),
        vocab: m.vocab.clone(),
        elements: m.elements.clone(),
        rels,
        funs,
        cons,
    }
}

/// A random structure over a predicate-only vocabulary: every tuple of every
/// relation is included independently with that relation's probability.
pub fn gen_random(
    n: usize,
    vocab: &Vocabulary,
    probs: &BTreeMap<String, f64>,
    seed: u64,
) -> Result<Structure> {
    if !vocab.funs.is_empty() {
        return Err(Error::invalid(
            "random generation needs a predicate-only vocabulary".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rels = BTreeMap::new();
    for (name, &arity) in &vocab.rels {
        let p = *probs
            .get(name)
            .ok_or_else(|| Error::invalid(format!("no probability for predicate {name}")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("probability {p} for {name} outside [0,1]")));
        }
        let mut tuples = BTreeSet::new();
        let mut t = vec![0usize; arity];
        loop {
            if rng.gen_bool(p) {
                tuples.insert(t.clone());
            }
            let mut i = arity;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                t[i] += 1;
                if t[i] < n {
                    break;
                }
                t[i] = 0;
            }
            if t.iter().all(|&x| x == 0) {
                break;
            }
        }
        if arity == 0 {
            tuples.clear();
        }
        rels.insert(name.clone(), tuples);
    }
    Ok(Structure {
        name: format!("random{n}_s{seed}"),
        vocab: vocab.clone(),
        elements: (0..n).map(|i| format!("v{i}")).collect(),
        rels,
        funs: BTreeMap::new(),
        cons: BTreeMap::new(),
    })
}

/// A sample of the classic G(n, p): undirected, loop-free, symmetric pairs.
pub fn gen_random_graph(n: usize, prob: f64, seed: u64) -> Result<Structure> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::invalid(format!("edge probability {prob} outside [0,1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(prob) {
                edges.push((i, j));
                edges.push((j, i));
            }
        }
    }
    Ok(graph_structure(&format!("gnp{n}_s{seed}"), n, edges))
}

/// One atom template over the parameter set: a relation name plus an
/// argument pattern where `None` marks the new variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct AtomPat {
    rel: String,
    args: Vec<Option<usize>>,
}

impl AtomPat {
    fn holds(&self, m: &Structure, x: usize) -> bool {
        let t: Vec<usize> = self.args.iter().map(|a| a.unwrap_or(x)).collect();
        m.rels[&self.rel].contains(&t)
    }

    fn describe(&self, m: &Structure) -> String {
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| match a {
                None => "x".to_string(),
                Some(i) => m.elements[*i].clone(),
            })
            .collect();
        format!("{}({})", self.rel, args.join(","))
    }
}

fn rel_is_symmetric(m: &Structure, rel: &str) -> bool {
    m.rels[rel].iter().all(|t| m.rels[rel].contains(&vec![t[1], t[0]]))
}

fn rel_diag_constant(m: &Structure, rel: &str) -> bool {
    let loops = (0..m.n()).filter(|&u| m.rels[rel].contains(&vec![u, u])).count();
    loops == 0 || loops == m.n()
}

/// Atom templates for 1-types over `a`, merged and pruned by the laws the
/// structure itself satisfies: a symmetric relation contributes one atom per
/// parameter instead of two, and a constant diagonal contributes none.
fn type_atoms(m: &Structure, a: &ElemSet) -> Vec<AtomPat> {
    let mut out = Vec::new();
    for (rel, &arity) in &m.vocab.rels {
        match arity {
            1 => out.push(AtomPat {
                rel: rel.clone(),
                args: vec![None],
            }),
            2 => {
                let sym = rel_is_symmetric(m, rel);
                if !rel_diag_constant(m, rel) {
                    out.push(AtomPat {
                        rel: rel.clone(),
                        args: vec![None, None],
                    });
                }
                for &p in a {
                    out.push(AtomPat {
                        rel: rel.clone(),
                        args: vec![None, Some(p)],
                    });
                    if !sym {
                        out.push(AtomPat {
                            rel: rel.clone(),
                            args: vec![Some(p), None],
                        });
                    }
                }
            }
            _ => {
                let slots = a.len() + 1;
                let opts: Vec<Option<usize>> =
                    std::iter::once(None).chain(a.iter().map(|&p| Some(p))).collect();
                let mut idx = vec![0usize; arity];
                loop {
                    if idx.iter().any(|&i| i == 0) {
                        out.push(AtomPat {
                            rel: rel.clone(),
                            args: idx.iter().map(|&i| opts[i]).collect(),
                        });
                    }
                    let mut c = arity;
                    loop {
                        if c == 0 {
                            break;
                        }
                        c -= 1;
                        idx[c] += 1;
                        if idx[c] < slots {
                            break;
                        }
                        idx[c] = 0;
                    }
                    if idx.iter().all(|&i| i == 0) {
                        break;
                    }
                }
            }
        }
    }
    out
}

fn subsets_below(n: usize, k: usize) -> Vec<ElemSet> {
    let mut out = vec![ElemSet::new()];
    let mut frontier = vec![ElemSet::new()];
    for _ in 1..k {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.iter().next_back().map(|&x| x + 1).unwrap_or(0);
            for x in start..n {
                let mut t = s.clone();
                t.insert(x);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

const TYPE_ATOM_CAP: usize = 20;

/// Def of (s,k)-randomness: every quantifier-free 1-type over fewer than k
/// parameters (not explicitly inconsistent) has at least s_fun(n) realizers.
pub fn check_random(m: &Structure, k: usize, s_fun: &TimingFunction) -> Report {
    let mut rep = Report::default();
    let n = m.n();
    let need = match s_fun.value(n as u64) {
        Bound::Finite(v) => v,
        Bound::Infinite => {
            rep.fail(
                "(random) realizer demand",
                "an infinite demand cannot be met by a finite structure".to_string(),
            );
            return rep;
        }
    };
    let mut worst: Option<(ElemSet, String, usize)> = None;
    let mut cells = 0usize;
    for a in subsets_below(n, k) {
        let atoms = type_atoms(m, &a);
        if atoms.len() > TYPE_ATOM_CAP {
            rep.fail(
                "(random) type enumeration",
                format!(
                    "{} atoms over {}, past the cap of {TYPE_ATOM_CAP}",
                    atoms.len(),
                    describe_set(m, &a)
                ),
            );
            return rep;
        }
        for mask in 0..(1u64 << atoms.len()) {
            cells += 1;
            let count = (0..n)
                .filter(|x| !a.contains(x))
                .filter(|&x| {
                    atoms
                        .iter()
                        .enumerate()
                        .all(|(i, at)| at.holds(m, x) == (mask >> i & 1 == 1))
                })
                .count();
            if worst.as_ref().map_or(true, |w| count < w.2) {
                let label: Vec<String> = atoms
                    .iter()
                    .enumerate()
                    .map(|(i, at)| {
                        let s = at.describe(m);
                        if mask >> i & 1 == 1 {
                            s
                        } else {
                            format!("!{s}")
                        }
                    })
                    .collect();
                let label = if label.is_empty() {
                    "empty type".to_string()
                } else {
                    label.join(" & ")
                };
                worst = Some((a.clone(), label, count));
            }
        }
    }
    let (wa, wt, wc) = worst.expect("the empty parameter set always contributes");
    let clause = "(random) every type has enough realizers";
    let detail = format!(
        "worst cell: A = {}, type {}, {} realizers, demand {} ({} cells)",
        describe_set(m, &wa),
        wt,
        wc,
        need,
        cells
    );
    if (wc as u64) < need {
        rep.fail(clause, detail);
    } else {
        rep.note(clause, detail);
    }
    rep
}

/// Unpruned atom templates: both argument orders and the diagonal, used
/// where two sides of a map must be compared cell by cell.
fn full_type_atoms(m: &Structure, a: &[usize]) -> Vec<AtomPat> {
    let mut out = Vec::new();
    for (rel, &arity) in &m.vocab.rels {
        let opts: Vec<Option<usize>> =
            std::iter::once(None).chain(a.iter().map(|&p| Some(p))).collect();
        let mut idx = vec![0usize; arity];
        loop {
            if idx.iter().any(|&i| i == 0) {
                out.push(AtomPat {
                    rel: rel.clone(),
                    args: idx.iter().map(|&i| opts[i]).collect(),
                });
            }
            let mut c = arity;
            loop {
                if c == 0 {
                    break;
                }
                c -= 1;
                idx[c] += 1;
                if idx[c] < opts.len() {
                    break;
                }
                idx[c] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    out
}

/// k-elimination of quantifiers: every partial isomorphism between sets of
/// fewer than k elements extends over any one more point; with counting,
/// matching extension types must also have matching realizer counts.
pub fn check_qe(m: &Structure, k: usize, with_counting: bool) -> Report {
    let mut rep = Report::default();
    let n = m.n();
    if k == 0 {
        rep.note("(qe) extension", "k = 0 leaves nothing to check".to_string());
        return rep;
    }
    let small = match MapFamily::all_partial_autos(m, k - 1) {
        Ok(f) => f,
        Err(e) => {
            rep.fail("(qe) map enumeration", e.to_string());
            return rep;
        }
    };
    let mut ext_failure: Option<String> = None;
    let mut count_failure: Option<String> = None;
    let mut checked = 0u64;
    for f in small.iter() {
        let dom = f.dom();
        let rng = f.rng();
        for a0 in 0..n {
            if dom.contains(&a0) {
                continue;
            }
            checked += 1;
            let hit = (0..n).filter(|b| !rng.contains(b)).any(|a1| {
                PartialInj::new(f.pairs().chain(std::iter::once((a0, a1))))
                    .map(|g| is_partial_auto(m, &g))
                    .unwrap_or(false)
            });
            if !hit && ext_failure.is_none() {
                ext_failure = Some(format!(
                    "{} has no extension to {}",
                    f.describe(m, m),
                    m.elements[a0]
                ));
            }
        }
        if with_counting {
            let dom_params: Vec<usize> = dom.iter().copied().collect();
            let rng_params: Vec<usize> = dom_params.iter().map(|&x| f.get(x).unwrap()).collect();
            let atoms0 = full_type_atoms(m, &dom_params);
            let atoms1 = full_type_atoms(m, &rng_params);
            let mut c0: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
            for x in (0..n).filter(|x| !dom.contains(x)) {
                let sig: Vec<bool> = atoms0.iter().map(|at| at.holds(m, x)).collect();
                *c0.entry(sig).or_default() += 1;
            }
            let mut c1: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
            for y in (0..n).filter(|y| !rng.contains(y)) {
                let sig: Vec<bool> = atoms1.iter().map(|at| at.holds(m, y)).collect();
                *c1.entry(sig).or_default() += 1;
            }
            if c0 != c1 && count_failure.is_none() {
                count_failure = Some(format!(
                    "extension types of {} have mismatched realizer counts",
                    f.describe(m, m)
                ));
            }
        }
    }
    let clause = "(qe) every map extends over one more point";
    match ext_failure {
        None => rep.note(clause, format!("{checked} extension problems solved")),
        Some(w) => rep.fail(clause, w),
    }
    if with_counting {
        let clause = "(qe) extension types have equal counts";
        match count_failure {
            None => rep.ok(clause),
            Some(w) => rep.fail(clause, w),
        }
    }
    rep
}

const CELL_CAP: usize = 12;

/// All equivalence relations on the universe definable by a quantifier-free
/// formula in two variables, one representative formula each.  Works on the
/// semantic quotient: atom cells over pairs, then every union of cells that
/// happens to be reflexive, symmetric and transitive.
pub fn qf_pair_formulas(m: &Structure) -> Result<Vec<Formula>> {
    let n = m.n();
    let x = || Term::Var("x".to_string());
    let y = || Term::Var("y".to_string());
    let mut atoms: Vec<(Formula, Box<dyn Fn(usize, usize) -> bool + '_>)> = Vec::new();
    atoms.push((Formula::Eq(x(), y()), Box::new(|a, b| a == b)));
    for (rel, &arity) in &m.vocab.rels {
        let r = rel.clone();
        match arity {
            1 => {
                atoms.push((
                    Formula::Pred(r.clone(), vec![x()]),
                    Box::new(move |a, _| m.rels[&r].contains(&vec![a])),
                ));
                let r2 = rel.clone();
                atoms.push((
                    Formula::Pred(r2.clone(), vec![y()]),
                    Box::new(move |_, b| m.rels[&r2].contains(&vec![b])),
                ));
            }
            2 => {
                for (t1, t2, pick) in [
                    (x(), y(), 0),
                    (y(), x(), 1),
                    (x(), x(), 2),
                    (y(), y(), 3),
                ] {
                    let rr = rel.clone();
                    let f: Box<dyn Fn(usize, usize) -> bool + '_> = match pick {
                        0 => Box::new(move |a, b| m.rels[&rr].contains(&vec![a, b])),
                        1 => Box::new(move |a, b| m.rels[&rr].contains(&vec![b, a])),
                        2 => Box::new(move |a, _| m.rels[&rr].contains(&vec![a, a])),
                        _ => Box::new(move |_, b| m.rels[&rr].contains(&vec![b, b])),
                    };
                    atoms.push((Formula::Pred(rel.clone(), vec![t1, t2]), f));
                }
            }
            _ => {
                return Err(Error::invalid(format!(
                    "two-variable cells need arity at most 2, {rel} has {arity}"
                )))
            }
        }
    }
    let mut cell_of = vec![0usize; n * n];
    let mut cells: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    for a in 0..n {
        for b in 0..n {
            let sig: Vec<bool> = atoms.iter().map(|(_, f)| f(a, b)).collect();
            let next = cells.len();
            let id = *cells.entry(sig).or_insert(next);
            cell_of[a * n + b] = id;
        }
    }
    if cells.len() > CELL_CAP {
        return Err(Error::invalid(format!(
            "{} realized atom cells, past the cap of {CELL_CAP}",
            cells.len()
        )));
    }
    let signatures: Vec<Vec<bool>> = {
        let mut v = vec![Vec::new(); cells.len()];
        for (sig, &id) in &cells {
            v[id] = sig.clone();
        }
        v
    };
    let mut out = Vec::new();
    for mask in 0..(1u32 << cells.len()) {
        let rel = |a: usize, b: usize| mask >> cell_of[a * n + b] & 1 == 1;
        let reflexive = (0..n).all(|a| rel(a, a));
        if !reflexive {
            continue;
        }
        let symmetric = (0..n).all(|a| (0..n).all(|b| rel(a, b) == rel(b, a)));
        if !symmetric {
            continue;
        }
        let transitive = (0..n)
            .all(|a| (0..n).all(|b| (0..n).all(|c| !(rel(a, b) && rel(b, c)) || rel(a, c))));
        if !transitive {
            continue;
        }
        let mut parts = Vec::new();
        for (id, sig) in signatures.iter().enumerate() {
            if mask >> id & 1 == 0 {
                continue;
            }
            let cell = sig
                .iter()
                .enumerate()
                .map(|(i, &on)| {
                    let at = atoms[i].0.clone();
                    if on {
                        at
                    } else {
                        at.not()
                    }
                })
                .reduce(Formula::and)
                .unwrap_or(Formula::True);
            parts.push(cell);
        }
        out.push(parts.into_iter().reduce(Formula::or).unwrap_or(Formula::False));
    }
    Ok(out)
}

/// The triple from the proof of the canonical claim: supports of size at
/// most q, all partial automorphisms with domains of size at most qk, and
/// s = max(1, floor(k/3)).  The construction is certified by the k-system
/// checker; q = 0 is lifted to q = 1, since singletons are supports anyway.
pub fn canonical_system(m: &Structure, q: usize, k: usize, t_fun: &TimingFunction) -> Result<KSystem> {
    if k == 0 {
        return Err(Error::invalid("a 0-system has no extension clause".to_string()));
    }
    let qeff = q.max(1);
    let i = SupportFamily::size_at_most(m.n(), qeff);
    let f = MapFamily::all_partial_autos(m, qeff * k)?;
    let y = KSystem {
        name: format!("canonical_{}_q{q}k{k}", m.name),
        m: m.clone(),
        i,
        f,
        k,
        s: (k / 3).max(1),
        t_fun: t_fun.clone(),
    };
    let rep = check_k_system(&y);
    if !rep.pass() {
        let diag = check_random(m, k, &TimingFunction::Const(1));
        let cell = diag
            .items
            .iter()
            .map(|it| it.witness.clone().unwrap_or_default())
            .next_back()
            .unwrap_or_default();
        let broke = rep
            .first_failure()
            .map(|it| it.clause.clone())
            .unwrap_or_else(|| "unknown clause".to_string());
        return Err(Error::invalid(format!(
            "randomness precondition failure: {broke}; {cell}"
        )));
    }
    Ok(y)
}

/// The partial-embedding family between two structures that already carry
/// canonical systems; the caller owns the witness check.
pub fn canonical_witness(
    m1: &Structure,
    m2: &Structure,
    q: usize,
    k: usize,
    t_fun: &TimingFunction,
) -> Result<(WitnessFamily, KSystem, KSystem)> {
    if m1.vocab != m2.vocab {
        return Err(Error::invalid("witness endpoints have different vocabularies".to_string()));
    }
    let y1 = canonical_system(m1, q, k, t_fun)?;
    let y2 = canonical_system(m2, q, k, t_fun)?;
    let h = MapFamily::all_partial_embeddings(m1, m2, q.max(1) * k)?;
    let w = WitnessFamily {
        name: format!("canonical_{}_{}", m1.name, m2.name),
        h,
        strength: Strength::K,
    };
    Ok((w, y1, y2))
}

/// A battery entry: a scheme with a sentence to evaluate at the stop stage.
#[derive(Debug, Clone)]
pub struct BatteryEntry {
    pub name: String,
    pub scheme: InductiveScheme,
    pub chi: Formula,
}

const BATTERY_SOURCES: &[(&str, &str, &str)] = &[
    (
        "singleton",
        include_str!("../fixtures/battery/singleton.scheme"),
        "exists x (exists y (x in y))",
    ),
    (
        "pair",
        include_str!("../fixtures/battery/pair.scheme"),
        "exists x (exists y (x in y))",
    ),
    (
        "clock",
        include_str!("../fixtures/battery/clock.scheme"),
        "exists x (DP0(x))",
    ),
    (
        "cascade",
        include_str!("../fixtures/battery/cascade.scheme"),
        "exists x (exists y (x in y))",
    ),
    (
        "card_probe",
        include_str!("../fixtures/battery/card_probe.scheme"),
        "Qt x (x = x)",
    ),
];

const COMPLEMENT_SOURCE: &str = include_str!("../fixtures/schemes/complement.scheme");

fn battery_entry(name: &str, text: &str, chi: &str, vocab: &Vocabulary) -> Result<BatteryEntry> {
    let scheme = crate::fileio::parse_scheme(text, vocab)?;
    let chi = parse_formula(chi, vocab, scheme.dialect)?;
    Ok(BatteryEntry {
        name: name.to_string(),
        scheme,
        chi,
    })
}

/// The five shipped battery schemes, parsed against the given vocabulary.
/// Each body mentions only equality, membership and dynamic predicates, so
/// the battery runs over any vocabulary.
pub fn battery(vocab: &Vocabulary) -> Result<Vec<BatteryEntry>> {
    BATTERY_SOURCES
        .iter()
        .map(|(name, text, chi)| battery_entry(name, text, chi, vocab))
        .collect()
}

/// A five-entry battery with every scheme taking at most one parameter, so
/// each entry fits the (k,s) transfer bounds with s = 1: the pair builder
/// is swapped for the complement builder.
pub fn transfer_battery(vocab: &Vocabulary) -> Result<Vec<BatteryEntry>> {
    let mut out = Vec::new();
    for (name, text, chi) in BATTERY_SOURCES {
        if *name == "pair" {
            out.push(battery_entry(
                "complement",
                COMPLEMENT_SOURCE,
                "exists x (exists y (x in y))",
                vocab,
            )?);
        } else {
            out.push(battery_entry(name, text, chi, vocab)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct BatteryOutcome {
    pub scheme: String,
    pub verdict1: Verdict,
    pub verdict2: Verdict,
    pub agreed: bool,
    pub exception: bool,
    pub in_bounds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub model1: String,
    pub model2: String,
    pub timing: String,
    pub system_pass: bool,
    pub dichotomy_pass: bool,
    pub super_pass: bool,
    pub witness_pass: bool,
    pub outcomes: Vec<BatteryOutcome>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl ExperimentReport {
    pub fn json_lines(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            out.push_str(&serde_json::to_string(o).expect("outcome serializes"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(self).expect("report serializes"));
        out.push('\n');
        out
    }
}

fn run_battery(
    m1: &Structure,
    m2: &Structure,
    entries: &[BatteryEntry],
    t_fun: &TimingFunction,
    bounds: (usize, usize),
    jobs: usize,
) -> Result<Vec<BatteryOutcome>> {
    let jobs = jobs.max(1).min(entries.len().max(1));
    if jobs == 1 {
        return entries
            .iter()
            .map(|e| compare_runs(m1, m2, e, t_fun, bounds))
            .collect();
    }
    let chunk = entries.len().div_ceil(jobs);
    let mut slots: Vec<Option<Result<BatteryOutcome>>> = entries.iter().map(|_| None).collect();
    std::thread::scope(|scope| {
        for (ents, outs) in entries.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (e, o) in ents.iter().zip(outs.iter_mut()) {
                    *o = Some(compare_runs(m1, m2, e, t_fun, bounds));
                }
            });
        }
    });
    slots.into_iter().map(|o| o.expect("every slot filled")).collect()
}

fn compare_runs(
    m1: &Structure,
    m2: &Structure,
    entry: &BatteryEntry,
    t_fun: &TimingFunction,
    bounds: (usize, usize),
) -> Result<BatteryOutcome> {
    let mut store1 = m1.store();
    let (verdict1, _) = run(&mut store1, m1, &entry.scheme, t_fun, StopVariant::CostBudget, &entry.chi)?;
    let mut store2 = m2.store();
    let (verdict2, _) = run(&mut store2, m2, &entry.scheme, t_fun, StopVariant::CostBudget, &entry.chi)?;
    let agreed = verdict1.value == verdict2.value;
    let undef_first = |undef: &Verdict, defined: &Verdict| {
        undef.value == TruthValue::Undefined
            && defined.value != TruthValue::Undefined
            && undef.stop_time.map_or(u64::MAX, |t| t) < defined.stop_time.map_or(u64::MAX, |t| t)
    };
    let exception = !agreed && (undef_first(&verdict1, &verdict2) || undef_first(&verdict2, &verdict1));
    let (s, k) = bounds;
    let (_, m_fv) = entry.scheme.metrics();
    let msfv = entry
        .scheme
        .psi
        .iter()
        .map(|r| r.body.max_subformula_free_vars())
        .chain(entry.scheme.phi.iter().map(|r| r.body.max_subformula_free_vars()))
        .chain(std::iter::once(entry.chi.max_subformula_free_vars()))
        .max()
        .unwrap_or(0);
    Ok(BatteryOutcome {
        scheme: entry.name.clone(),
        verdict1,
        verdict2,
        agreed,
        exception,
        in_bounds: m_fv <= s && msfv <= k,
    })
}

/// Builds canonical systems and the canonical witness for the two models,
/// checks them, and compares every battery scheme's verdicts across the two
/// sides under the cost-budget stopping rule.
pub fn experiment_transfer(
    m1: &Structure,
    m2: &Structure,
    q: usize,
    k: usize,
    t_fun: &TimingFunction,
    entries: &[BatteryEntry],
    jobs: usize,
) -> Result<ExperimentReport> {
    let (w, y1, y2) = canonical_witness(m1, m2, q, k, t_fun)?;
    let system_pass = true;
    let f1 = qf_pair_formulas(m1)?;
    let f2 = qf_pair_formulas(m2)?;
    let (d1, _) = check_dichotomy(&y1, &DichotomyMode::Definable(&f1))?;
    let (d2, _) = check_dichotomy(&y2, &DichotomyMode::Definable(&f2))?;
    let dichotomy_pass = d1.pass() && d2.pass();
    let s1 = check_super(&y1)?;
    let s2 = check_super(&y2)?;
    let super_pass = s1.pass() && s2.pass();
    let wrep = check_witness(&w, &y1, &y2, &[])?;
    let witness_pass = wrep.pass();
    let outcomes = run_battery(m1, m2, entries, t_fun, (y1.s, y1.k), jobs)?;
    let mut notes = Vec::new();
    if let Some(it) = wrep.first_failure() {
        notes.push(format!("witness: {}", it.clause));
    }
    if let Some(it) = s1.first_failure().or_else(|| s2.first_failure()) {
        notes.push(format!("super: {}", it.clause));
    }
    notes.push(claim_constants_note(m1, y1.s, y1.k, t_fun));
    let consistent = outcomes.iter().all(|o| o.agreed || o.exception);
    let pass = system_pass && dichotomy_pass && witness_pass && consistent;
    Ok(ExperimentReport {
        name: "transfer".to_string(),
        model1: m1.name.clone(),
        model2: m2.name.clone(),
        timing: t_fun.to_string(),
        system_pass,
        dichotomy_pass,
        super_pass,
        witness_pass,
        outcomes,
        notes,
        pass,
    })
}

/// The claim constants, flagged but not fatal: desk instances routinely
/// break them while every runnable check still passes.
fn claim_constants_note(m: &Structure, s: usize, k: usize, t_fun: &TimingFunction) -> String {
    let b = if 3 * s <= k { "holds" } else { "fails" };
    let tau = m.vocab.rels.len() as u32;
    let exponent = (1u64 << s.min(16)) as u32 * tau;
    let c = match (1u64.checked_shl(exponent), t_fun.value(m.n() as u64)) {
        (_, Bound::Infinite) => "holds".to_string(),
        (Some(v), Bound::Finite(t)) if v < t => format!("holds ({v} < {t})"),
        (Some(v), Bound::Finite(t)) => format!("fails ({v} >= {t})"),
        (None, _) => "fails (overflow)".to_string(),
    };
    format!("claim constants: 3s <= k {b}; 2^((2^s)*tau) < t(n) {c}")
}

fn log_threshold_ok(n: usize, sides: &[usize], t_fun: &TimingFunction) -> Result<()> {
    let t = match t_fun.value(n as u64) {
        Bound::Finite(v) => v.max(1),
        Bound::Infinite => {
            return Err(Error::invalid(
                "threshold violation: an infinite bound admits no predicate sizes".to_string(),
            ))
        }
    };
    let needed = 2.0 * (t as f64).log2();
    for &side in sides {
        if (side as f64) < needed {
            return Err(Error::invalid(format!(
                "threshold violation: predicate side {side} is under 2*log2({t}) = {needed:.2}"
            )));
        }
    }
    Ok(())
}

/// Two unary structures ([n], P1) and ([n], P2) with the log-threshold
/// precondition, compared across the whole battery.
pub fn experiment_unary(
    n: usize,
    p1: usize,
    p2: usize,
    t_fun: &TimingFunction,
    entries: &[BatteryEntry],
    jobs: usize,
) -> Result<ExperimentReport> {
    let m1 = unary_structure(n, p1)?;
    let m2 = unary_structure(n, p2)?;
    log_threshold_ok(n, &[p1, n - p1, p2, n - p2], t_fun)?;
    let mut rep = experiment_transfer(&m1, &m2, 1, 3, t_fun, entries, jobs)?;
    rep.name = "unary".to_string();
    Ok(rep)
}

/// The majority pair: |P1| = n/2 against |P2| = n/2 - 1.  The majority
/// answers differ, and the report records whether any battery scheme
/// noticed.
pub fn experiment_majority(
    n: usize,
    t_fun: &TimingFunction,
    entries: &[BatteryEntry],
    jobs: usize,
) -> Result<ExperimentReport> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::invalid(format!("majority needs an even universe, got {n}")));
    }
    let p1 = n / 2;
    let p2 = n / 2 - 1;
    let m1 = unary_structure(n, p1)?;
    let m2 = unary_structure(n, p2)?;
    log_threshold_ok(n, &[p1, n - p1, p2, n - p2], t_fun)?;
    let mut rep = experiment_transfer(&m1, &m2, 1, 3, t_fun, entries, jobs)?;
    rep.name = "majority".to_string();
    rep.notes.push(format!(
        "majority answers differ: {} of {n} against {} of {n}",
        p1, p2
    ));
    Ok(rep)
}

/// One truth-table row of `formula` on `m`, for tests that need a plain
/// evaluation entry point without a scheme run.
pub fn eval_on_atoms(m: &Structure, formula: &Formula, env: &[(&str, usize)]) -> Result<bool> {
    let store = m.store();
    let ctx = EvalCtx {
        store: &store,
        structure: m,
        universe: &(0..m.n()).map(|i| m.atom(i)).collect::<Vec<_>>(),
        dynamics: &[],
        threshold: Bound::Infinite,
    };
    let mut e: Vec<(String, crate::hfs::SetHandle)> = env
        .iter()
        .map(|&(v, i)| (v.to_string(), m.atom(i)))
        .collect();
    evaluate(&ctx, formula, &mut e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paley_17_is_symmetric_and_regular() {
        let m = paley_graph(17).unwrap();
        let edges = &m.rels["R"];
        assert!(edges.iter().all(|t| edges.contains(&vec![t[1], t[0]])));
        for i in 0..17 {
            let deg = edges.iter().filter(|t| t[0] == i).count();
            assert_eq!(deg, 8);
        }
        assert!(paley_graph(7).is_err());
    }

    #[test]
    fn relabel_preserves_edge_count() {
        let m = paley_graph(17).unwrap();
        let r = relabel(&m, 9);
        assert_eq!(m.rels["R"].len(), r.rels["R"].len());
        assert_ne!(m.rels["R"], r.rels["R"]);
    }

    #[test]
    fn gen_random_is_deterministic() {
        let a = gen_random_graph(6, 0.5, 3).unwrap();
        let b = gen_random_graph(6, 0.5, 3).unwrap();
        assert_eq!(a.rels, b.rels);
        let c = gen_random_graph(6, 0.5, 4).unwrap();
        assert_ne!(a.rels, c.rels);
        let probs = BTreeMap::from([("R".to_string(), 1.0)]);
        let full = gen_random(3, &graph_vocab(), &probs, 0).unwrap();
        assert_eq!(full.rels["R"].len(), 9);
    }

    #[test]
    fn randomness_examples() {
        let k5 = complete_graph(5);
        assert!(!check_random(&k5, 2, &TimingFunction::Const(1)).pass());
        let c5 = cycle_graph(5);
        assert!(check_random(&c5, 2, &TimingFunction::Const(2)).pass());
        assert!(!check_random(&c5, 2, &TimingFunction::Const(3)).pass());
        assert!(!check_random(&c5, 3, &TimingFunction::Const(1)).pass());
        assert!(check_random(&c5, 1, &TimingFunction::Const(5)).pass());
        let paley = paley_graph(17).unwrap();
        assert!(check_random(&paley, 3, &TimingFunction::Const(3)).pass());
        assert!(!check_random(&paley, 3, &TimingFunction::Const(4)).pass());
    }

    #[test]
    fn qe_examples() {
        let c5 = cycle_graph(5);
        assert!(check_qe(&c5, 2, false).pass());
        assert!(check_qe(&c5, 2, true).pass());
        assert!(check_qe(&c5, 1, true).pass());
        let star = graph_structure("star", 4, [(0, 1), (1, 0), (0, 2), (2, 0), (0, 3), (3, 0)]);
        assert!(!check_qe(&star, 2, false).pass());
        let u = unary_structure(6, 3).unwrap();
        assert!(check_qe(&u, 3, true).pass());
        let v = unary_structure(6, 2).unwrap();
        assert!(check_qe(&v, 3, false).pass());
    }

    #[test]
    fn pair_formulas_are_equivalences() {
        let c5 = cycle_graph(5);
        let forms = qf_pair_formulas(&c5).unwrap();
        assert!(forms.len() >= 2);
        for f in &forms {
            for a in 0..5 {
                assert!(eval_on_atoms(&c5, f, &[("x", a), ("y", a)]).unwrap());
                for b in 0..5 {
                    let ab = eval_on_atoms(&c5, f, &[("x", a), ("y", b)]).unwrap();
                    let ba = eval_on_atoms(&c5, f, &[("x", b), ("y", a)]).unwrap();
                    assert_eq!(ab, ba);
                }
            }
        }
    }

    #[test]
    fn canonical_five_cycle_system() {
        let c5 = cycle_graph(5);
        let y = canonical_system(&c5, 1, 3, &TimingFunction::parse("poly 1").unwrap()).unwrap();
        assert_eq!(y.f.len(), 226);
        assert_eq!(y.s, 1);
        let forms = qf_pair_formulas(&c5).unwrap();
        let (rep, _) = check_dichotomy(&y, &DichotomyMode::Definable(&forms)).unwrap();
        assert!(rep.pass());
        let q0 = canonical_system(&c5, 0, 3, &TimingFunction::parse("poly 1").unwrap()).unwrap();
        assert_eq!(q0.i.len(), 6);
    }

    #[test]
    fn two_element_system_is_the_full_symmetric_fragment() {
        let m = unary_structure(2, 0).unwrap();
        let y = canonical_system(&m, 1, 2, &TimingFunction::parse("poly 1").unwrap()).unwrap();
        assert_eq!(y.f.len(), 7);
    }

    #[test]
    fn battery_parses_everywhere() {
        let c5 = cycle_graph(5);
        let u = unary_structure(8, 3).unwrap();
        assert_eq!(battery(&c5.vocab).unwrap().len(), 5);
        assert_eq!(battery(&u.vocab).unwrap().len(), 5);
        let t = transfer_battery(&u.vocab).unwrap();
        assert_eq!(t.len(), 5);
        for e in &t {
            let (_, m_fv) = e.scheme.metrics();
            assert!(m_fv <= 1, "{} takes {m_fv} parameters", e.name);
        }
    }

    #[test]
    #[ignore]
    fn paley_canonical_timing() {
        let m = paley_graph(17).unwrap();
        let t0 = std::time::Instant::now();
        let y = canonical_system(&m, 1, 3, &TimingFunction::parse("poly 1").unwrap()).unwrap();
        eprintln!("canonical: {:?}, |F| = {}", t0.elapsed(), y.f.len());
        let t0 = std::time::Instant::now();
        let forms = qf_pair_formulas(&m).unwrap();
        let (rep, _) = check_dichotomy(&y, &DichotomyMode::Definable(&forms)).unwrap();
        eprintln!("dichotomy: {:?}, pass = {}", t0.elapsed(), rep.pass());
        assert!(rep.pass());
        let t0 = std::time::Instant::now();
        let rep = check_super(&y).unwrap();
        eprintln!("super: {:?}, pass = {}", t0.elapsed(), rep.pass());
        assert!(rep.pass());
        let t0 = std::time::Instant::now();
        let m2 = relabel(&m, 7);
        let (w, y1, y2) = canonical_witness(&m, &m2, 1, 3, &TimingFunction::parse("poly 1").unwrap()).unwrap();
        eprintln!("witness build: {:?}, |H| = {}", t0.elapsed(), w.h.len());
        let t0 = std::time::Instant::now();
        let rep = check_witness(&w, &y1, &y2, &[]).unwrap();
        eprintln!("witness check: {:?}, pass = {}", t0.elapsed(), rep.pass());
        assert!(rep.pass());
    }

    #[test]
    fn unary_experiment_agrees() {
        let u = unary_structure(8, 3).unwrap();
        let entries = battery(&u.vocab).unwrap();
        let rep = experiment_unary(8, 3, 4, &TimingFunction::Const(2), &entries, 2).unwrap();
        assert!(rep.pass, "{:?}", rep.notes);
        assert!(rep.witness_pass);
        assert!(experiment_unary(8, 1, 4, &TimingFunction::Const(2), &entries, 1).is_err());
    }

    #[test]
    fn majority_experiment_never_separates() {
        let u = unary_structure(8, 4).unwrap();
        let entries = battery(&u.vocab).unwrap();
        let rep = experiment_majority(8, &TimingFunction::Const(2), &entries, 1).unwrap();
        assert!(rep.pass, "{:?}", rep.notes);
        assert!(rep.outcomes.iter().all(|o| o.agreed || o.exception));
        assert!(experiment_majority(2, &TimingFunction::Const(2), &entries, 1).is_err());
        assert!(experiment_majority(7, &TimingFunction::Const(2), &entries, 1).is_err());
    }
}
