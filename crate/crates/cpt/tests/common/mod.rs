//! Shared generators and independent oracles for the integration tests.

#![allow(dead_code)]

use cpt::hfs::{SetHandle, UniverseStore};
use cpt::logic::eval::{evaluate, EvalCtx};
use cpt::logic::{Dialect, Formula, Structure, Term, Vocabulary};
use cpt::models::{gen_random_graph, graph_from_edges, unary_structure};
use cpt::scheme::{Candidate, ConstantRule, InductiveScheme, StageRule, TimingFunction};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

pub fn all_graphs(n: usize) -> Vec<Structure> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    (0..1u32 << pairs.len())
        .map(|mask| {
            let edges: Vec<(usize, usize)> = pairs
                .iter()
                .enumerate()
                .filter(|&(b, _)| mask >> b & 1 == 1)
                .map(|(_, &p)| p)
                .collect();
            graph_from_edges(&format!("g{n}_{mask}"), n, &edges)
        })
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for p in out {
            for x in 0..n {
                if !p.contains(&x) {
                    let mut q = p.clone();
                    q.push(x);
                    next.push(q);
                }
            }
        }
        out = next;
    }
    out
}

/// The lexicographically least upper-triangle adjacency string over all
/// vertex orderings: equal codes exactly for isomorphic graphs.
pub fn canonical_code(m: &Structure) -> (usize, Vec<bool>) {
    let n = m.n();
    let edges = &m.rels["R"];
    let mut best: Option<Vec<bool>> = None;
    for perm in permutations(n) {
        let code: Vec<bool> = (0..n)
            .flat_map(|i| {
                let edges = &edges;
                let perm = &perm;
                (i + 1..n).map(move |j| edges.contains(&vec![perm[i], perm[j]]))
            })
            .collect();
        if best.as_ref().map_or(true, |b| code < *b) {
            best = Some(code);
        }
    }
    (n, best.unwrap_or_default())
}

pub fn nonisomorphic_graphs(max_n: usize) -> Vec<Structure> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for n in 1..=max_n {
        for g in all_graphs(n) {
            if seen.insert(canonical_code(&g)) {
                out.push(g);
            }
        }
    }
    out
}

/// Criterion-2 oracle: the successor universe rebuilt by enumerating every
/// subset of the current universe and keeping those some rule defines,
/// with per-element membership tests instead of set construction.
pub fn brute_next_universe(
    store: &mut UniverseStore,
    m: &Structure,
    u: &InductiveScheme,
    t_fun: &TimingFunction,
    cand: &Candidate,
) -> Vec<SetHandle> {
    let bound = t_fun.value(m.n() as u64);
    let universe = &cand.universe;
    assert!(universe.len() < 60, "oracle subset enumeration cap");
    let mut surviving_families: Vec<BTreeSet<Vec<bool>>> = Vec::new();
    {
        let ctx = EvalCtx {
            store,
            structure: m,
            universe,
            dynamics: &cand.constants,
            threshold: bound,
        };
        for rule in &u.psi {
            let mut family: BTreeSet<Vec<bool>> = BTreeSet::new();
            let mut tuple = vec![0usize; rule.params.len()];
            loop {
                let mask: Vec<bool> = universe
                    .iter()
                    .map(|&x| {
                        let mut env: Vec<(String, SetHandle)> = rule
                            .params
                            .iter()
                            .zip(&tuple)
                            .map(|(p, &i)| (p.clone(), universe[i]))
                            .collect();
                        env.push((rule.head.clone(), x));
                        evaluate(&ctx, &rule.body, &mut env).expect("oracle evaluation")
                    })
                    .collect();
                family.insert(mask);
                let mut slot = 0;
                loop {
                    if slot == tuple.len() {
                        tuple.clear();
                        break;
                    }
                    tuple[slot] += 1;
                    if tuple[slot] < universe.len() {
                        break;
                    }
                    tuple[slot] = 0;
                    slot += 1;
                }
                if tuple.is_empty() {
                    break;
                }
            }
            if !bound.exceeded_by(family.len() as u64) {
                surviving_families.push(family);
            }
        }
    }
    let mut keep: BTreeSet<SetHandle> = universe.iter().copied().collect();
    for submask in 0..1u64 << universe.len() {
        let bits: Vec<bool> = (0..universe.len()).map(|i| submask >> i & 1 == 1).collect();
        if surviving_families.iter().any(|f| f.contains(&bits)) {
            let members = universe
                .iter()
                .zip(&bits)
                .filter(|&(_, &b)| b)
                .map(|(&x, _)| x);
            keep.insert(store.intern_set(members));
        }
    }
    keep.into_iter().collect()
}

pub fn random_structure(rng: &mut ChaCha8Rng) -> Structure {
    let n = rng.gen_range(1..=5);
    if rng.gen_bool(0.5) {
        gen_random_graph(n, 0.5, rng.gen()).expect("probability in range")
    } else {
        unary_structure(n, rng.gen_range(0..=n)).expect("size in range")
    }
}

fn random_formula(
    rng: &mut ChaCha8Rng,
    scope: &mut Vec<String>,
    depth: usize,
    m1: usize,
    rels: &[(String, usize)],
) -> Formula {
    if depth == 0 || rng.gen_bool(0.4) {
        if scope.is_empty() {
            return if rng.gen_bool(0.5) {
                Formula::True
            } else {
                Formula::False
            };
        }
        let pick = |rng: &mut ChaCha8Rng| Term::Var(scope[rng.gen_range(0..scope.len())].clone());
        return match rng.gen_range(0..5) {
            0 => Formula::Eq(pick(rng), pick(rng)),
            1 | 2 => Formula::Mem(pick(rng), pick(rng)),
            3 if !rels.is_empty() => {
                let (name, arity) = &rels[rng.gen_range(0..rels.len())];
                Formula::Pred(name.clone(), (0..*arity).map(|_| pick(rng)).collect())
            }
            _ if m1 > 0 => Formula::Dyn(rng.gen_range(0..m1), pick(rng)),
            _ => Formula::Mem(pick(rng), pick(rng)),
        };
    }
    let sub = |rng: &mut ChaCha8Rng, scope: &mut Vec<String>| {
        random_formula(rng, scope, depth - 1, m1, rels)
    };
    match rng.gen_range(0..6) {
        0 => sub(rng, scope).not(),
        1 => {
            let a = sub(rng, scope);
            a.and(sub(rng, scope))
        }
        2 => {
            let a = sub(rng, scope);
            a.or(sub(rng, scope))
        }
        3 => {
            let a = sub(rng, scope);
            Formula::Implies(Box::new(a), Box::new(sub(rng, scope)))
        }
        _ => {
            let v = format!("q{}", scope.len());
            scope.push(v.clone());
            let body = sub(rng, scope);
            scope.pop();
            if rng.gen_bool(0.7) {
                Formula::Exists(v, Box::new(body))
            } else {
                Formula::Forall(v, Box::new(body))
            }
        }
    }
}

/// A random scheme over =, membership, the structure's predicates and
/// dynamic constants, with one or two stage rules and up to two constants.
pub fn random_scheme(rng: &mut ChaCha8Rng, vocab: &Vocabulary) -> InductiveScheme {
    let rels: Vec<(String, usize)> = vocab
        .rels
        .iter()
        .filter(|&(_, &a)| a >= 1 && a <= 2)
        .map(|(r, &a)| (r.clone(), a))
        .collect();
    loop {
        let m1 = [0, 0, 1, 2][rng.gen_range(0..4)];
        let psi = (0..rng.gen_range(1..=2))
            .map(|_| {
                let params: Vec<String> =
                    (0..rng.gen_range(0..=2)).map(|j| format!("p{j}")).collect();
                let mut scope = vec!["x".to_string()];
                scope.extend(params.iter().cloned());
                StageRule {
                    head: "x".to_string(),
                    params,
                    body: random_formula(rng, &mut scope, 3, m1, &rels),
                }
            })
            .collect();
        let phi = (0..m1)
            .map(|_| ConstantRule {
                head: "x".to_string(),
                body: random_formula(rng, &mut vec!["x".to_string()], 2, m1, &rels),
            })
            .collect();
        let u = InductiveScheme {
            name: "random".to_string(),
            dialect: Dialect::Fo,
            standard: false,
            psi,
            phi,
        };
        if u.validate(vocab).is_ok() {
            return u;
        }
    }
}

/// Two-variable equivalence by joint partition refinement on the pair
/// spaces G^2 and H^2: cells start at atomic signatures and split on
/// per-cell projections along either coordinate until stable.  Every final
/// cell is definable by a two-variable formula, so the graphs agree on all
/// two-variable sentences exactly when they realize the same final cells.
pub fn two_var_equiv(g: &Structure, h: &Structure) -> bool {
    let sides = [g, h];
    let mut points: Vec<(usize, usize, usize)> = Vec::new();
    for (s, m) in sides.iter().enumerate() {
        for a0 in 0..m.n() {
            for a1 in 0..m.n() {
                points.push((s, a0, a1));
            }
        }
    }
    let edge = |s: usize, a: usize, b: usize| sides[s].rels["R"].contains(&vec![a, b]);
    let atom_sig = |&(s, a0, a1): &(usize, usize, usize)| {
        vec![edge(s, a0, a1), edge(s, a1, a0), edge(s, a0, a0), edge(s, a1, a1), a0 == a1]
    };
    let mut class_of: Vec<usize> = {
        let mut ids: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
        points
            .iter()
            .map(|p| {
                let next = ids.len();
                *ids.entry(atom_sig(p)).or_insert(next)
            })
            .collect()
    };
    let index: BTreeMap<(usize, usize, usize), usize> =
        points.iter().copied().zip(0..).collect();
    loop {
        let cells = class_of.iter().copied().max().unwrap_or(0) + 1;
        let mut ids: BTreeMap<(usize, Vec<bool>), usize> = BTreeMap::new();
        let next_classes: Vec<usize> = points
            .iter()
            .enumerate()
            .map(|(pi, &(s, a0, a1))| {
                let mut sig = Vec::with_capacity(2 * cells);
                for c in 0..cells {
                    sig.push((0..sides[s].n()).any(|b| class_of[index[&(s, b, a1)]] == c));
                    sig.push((0..sides[s].n()).any(|b| class_of[index[&(s, a0, b)]] == c));
                }
                let next = ids.len();
                *ids.entry((class_of[pi], sig)).or_insert(next)
            })
            .collect();
        let stable = ids.len() == cells;
        class_of = next_classes;
        if stable {
            break;
        }
    }
    let realized = |side: usize| -> BTreeSet<usize> {
        points
            .iter()
            .enumerate()
            .filter(|&(_, &(s, _, _))| s == side)
            .map(|(pi, _)| class_of[pi])
            .collect()
    };
    realized(0) == realized(1)
}

/// Criterion-8 generator: atoms over three variables, their negations,
/// pairwise conjunctions and disjunctions, and every one-quantifier closure
/// of those bodies.
pub fn qf_and_depth1_formulas(vocab: &Vocabulary) -> Vec<Formula> {
    let vars = ["x", "y", "z"];
    let term = |v: &str| Term::Var(v.to_string());
    let mut atoms = Vec::new();
    for (r, &arity) in &vocab.rels {
        match arity {
            1 => {
                for v in vars {
                    atoms.push(Formula::Pred(r.clone(), vec![term(v)]));
                }
            }
            2 => {
                for v in vars {
                    for w in vars {
                        atoms.push(Formula::Pred(r.clone(), vec![term(v), term(w)]));
                    }
                }
            }
            _ => {}
        }
    }
    for i in 0..vars.len() {
        for j in i + 1..vars.len() {
            atoms.push(Formula::Eq(term(vars[i]), term(vars[j])));
        }
    }
    let mut bodies = atoms.clone();
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            bodies.push(atoms[i].clone().and(atoms[j].clone()));
            bodies.push(atoms[i].clone().or(atoms[j].clone()));
        }
    }
    let mut out = bodies.clone();
    out.extend(atoms.iter().map(|a| a.clone().not()));
    for v in vars {
        for b in &bodies {
            out.push(Formula::Exists(v.to_string(), Box::new(b.clone())));
            out.push(Formula::Forall(v.to_string(), Box::new(b.clone())));
        }
    }
    out
}
