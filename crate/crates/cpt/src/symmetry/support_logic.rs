//! The support logic: block quantifiers ranging over sequences whose value
//! set is a support, satisfaction, the support game, and distinguisher
//! construction.

use super::{ElemSet, PartialInj, SupportFamily};
use crate::hfs::SetHandle;
use crate::logic::eval::{evaluate, EvalCtx};
use crate::logic::{Formula, Structure, Term};
use crate::{Bound, Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SFormula {
    Atom(Formula),
    Not(Box<SFormula>),
    And(Vec<SFormula>),
    Or(Vec<SFormula>),
    /// `exists-seq (v...) body`: some sequence of elements whose value set
    /// is a support satisfies the body.
    ExistsBlock(Vec<String>, Box<SFormula>),
}

impl SFormula {
    pub fn not(self) -> SFormula {
        SFormula::Not(Box::new(self))
    }

    pub fn block_depth(&self) -> usize {
        match self {
            SFormula::Atom(_) => 0,
            SFormula::Not(a) => a.block_depth(),
            SFormula::And(parts) | SFormula::Or(parts) => {
                parts.iter().map(|p| p.block_depth()).max().unwrap_or(0)
            }
            SFormula::ExistsBlock(_, body) => 1 + body.block_depth(),
        }
    }

    /// The largest number of distinct bound variable names active along any
    /// path; a rebound name is counted once.
    pub fn max_active_vars(&self) -> usize {
        fn rec(f: &SFormula, active: &BTreeSet<String>) -> usize {
            match f {
                SFormula::Atom(_) => active.len(),
                SFormula::Not(a) => rec(a, active),
                SFormula::And(parts) | SFormula::Or(parts) => parts
                    .iter()
                    .map(|p| rec(p, active))
                    .max()
                    .unwrap_or(active.len()),
                SFormula::ExistsBlock(vars, body) => {
                    let mut inner = active.clone();
                    inner.extend(vars.iter().cloned());
                    rec(body, &inner)
                }
            }
        }
        rec(self, &BTreeSet::new())
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            SFormula::Atom(f) => f.free_vars(),
            SFormula::Not(a) => a.free_vars(),
            SFormula::And(parts) | SFormula::Or(parts) => {
                parts.iter().flat_map(|p| p.free_vars()).collect()
            }
            SFormula::ExistsBlock(vars, body) => {
                let mut out = body.free_vars();
                for v in vars {
                    out.remove(v);
                }
                out
            }
        }
    }
}

impl fmt::Display for SFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SFormula::Atom(a) => write!(f, "{a}"),
            SFormula::Not(a) => write!(f, "!({a})"),
            SFormula::And(parts) => {
                if parts.is_empty() {
                    return f.write_str("true");
                }
                let texts: Vec<String> = parts.iter().map(|p| format!("({p})")).collect();
                f.write_str(&texts.join(" & "))
            }
            SFormula::Or(parts) => {
                if parts.is_empty() {
                    return f.write_str("false");
                }
                let texts: Vec<String> = parts.iter().map(|p| format!("({p})")).collect();
                f.write_str(&texts.join(" | "))
            }
            SFormula::ExistsBlock(vars, body) => {
                write!(f, "exists-seq ({}) ({body})", vars.join(" "))
            }
        }
    }
}

/// The block discipline: every block binds at most one support's worth of
/// variables and no path holds more than k supports' worth at once.
pub fn check_discipline(phi: &SFormula, k: usize, i: &SupportFamily) -> Result<()> {
    let per_block = i.max_member_size();
    fn blocks_ok(f: &SFormula, cap: usize) -> Result<()> {
        match f {
            SFormula::Atom(_) => Ok(()),
            SFormula::Not(a) => blocks_ok(a, cap),
            SFormula::And(parts) | SFormula::Or(parts) => {
                parts.iter().try_for_each(|p| blocks_ok(p, cap))
            }
            SFormula::ExistsBlock(vars, body) => {
                if vars.is_empty() {
                    return Err(Error::invalid("empty quantifier block".to_string()));
                }
                let distinct: BTreeSet<&String> = vars.iter().collect();
                if distinct.len() != vars.len() {
                    return Err(Error::invalid("repeated variable inside a block".to_string()));
                }
                if vars.len() > cap {
                    return Err(Error::invalid(format!(
                        "block binds {} variables, supports hold at most {cap}",
                        vars.len()
                    )));
                }
                blocks_ok(body, cap)
            }
        }
    }
    blocks_ok(phi, per_block)?;
    let active = phi.max_active_vars();
    if active > k * per_block {
        return Err(Error::invalid(format!(
            "{active} variables active on one path, the {k}-block discipline allows {}",
            k * per_block
        )));
    }
    Ok(())
}

fn sat(
    m: &Structure,
    i: &SupportFamily,
    ctx: &EvalCtx,
    universe: &[SetHandle],
    phi: &SFormula,
    env: &mut Vec<(String, usize)>,
) -> Result<bool> {
    match phi {
        SFormula::Atom(f) => {
            let mut handle_env: Vec<(String, SetHandle)> = env
                .iter()
                .map(|(v, e)| (v.clone(), universe[*e]))
                .collect();
            evaluate(ctx, f, &mut handle_env)
        }
        SFormula::Not(a) => Ok(!sat(m, i, ctx, universe, a, env)?),
        SFormula::And(parts) => {
            for p in parts {
                if !sat(m, i, ctx, universe, p, env)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        SFormula::Or(parts) => {
            for p in parts {
                if sat(m, i, ctx, universe, p, env)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        SFormula::ExistsBlock(vars, body) => {
            let len = vars.len();
            let mut values = vec![0usize; len];
            loop {
                let range: ElemSet = values.iter().copied().collect();
                if i.contains(&range) {
                    let depth = env.len();
                    for (v, &e) in vars.iter().zip(values.iter()) {
                        env.push((v.clone(), e));
                    }
                    let hit = sat(m, i, ctx, universe, body, env)?;
                    env.truncate(depth);
                    if hit {
                        return Ok(true);
                    }
                }
                let mut slot = len;
                loop {
                    if slot == 0 {
                        return Ok(false);
                    }
                    slot -= 1;
                    values[slot] += 1;
                    if values[slot] < m.n() {
                        break;
                    }
                    values[slot] = 0;
                }
            }
        }
    }
}

/// Satisfaction of a closed support-logic formula over the structure.
pub fn support_logic_sat(m: &Structure, i: &SupportFamily, phi: &SFormula) -> Result<bool> {
    if let Some(v) = phi.free_vars().into_iter().next() {
        return Err(Error::invalid(format!("free variable `{v}` in a sentence")));
    }
    let store = m.store();
    let universe: Vec<SetHandle> = (0..m.n())
        .map(|e| store.atom(&m.elements[e]).expect("atoms interned"))
        .collect();
    let ctx = EvalCtx {
        store: &store,
        structure: m,
        universe: &universe,
        dynamics: &[],
        threshold: Bound::Infinite,
    };
    let mut env: Vec<(String, usize)> = Vec::new();
    sat(m, i, &ctx, &universe, phi, &mut env)
}

#[derive(Debug, Clone)]
pub struct GameResult {
    pub equivalent: bool,
    pub rounds: usize,
    pub positions: usize,
    pub survivors: usize,
    pub distinguisher: Option<SFormula>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Forward,
    Backward,
}

struct Death {
    round: usize,
    keep: Vec<usize>,
    side: Side,
    challenge: ElemSet,
}

/// Restrictions of the position to sub-domains staying within k-1 support
/// unions on both sides, as kept pair index lists.
fn restrictions(
    g: &PartialInj,
    i1: &SupportFamily,
    i2: &SupportFamily,
    k: usize,
) -> Vec<Vec<usize>> {
    let pairs: Vec<(usize, usize)> = g.pairs().collect();
    let mut out = Vec::new();
    for mask in 0..(1u32 << pairs.len()) {
        let keep: Vec<usize> = (0..pairs.len()).filter(|&i| mask >> i & 1 == 1).collect();
        let dom: ElemSet = keep.iter().map(|&i| pairs[i].0).collect();
        let rng: ElemSet = keep.iter().map(|&i| pairs[i].1).collect();
        if i1.in_union(&dom, k - 1) && i2.in_union(&rng, k - 1) {
            out.push(keep);
        }
    }
    out
}

fn subinj(g: &PartialInj, keep: &[usize]) -> PartialInj {
    let pairs: Vec<(usize, usize)> = g.pairs().collect();
    PartialInj::new(keep.iter().map(|&i| pairs[i])).expect("sub-map of an injection")
}

/// The support game: prune the family of small partial isomorphisms until
/// every survivor answers every one-support challenge on either side with a
/// surviving extension.  The structures are equivalent when the empty map
/// survives.  On inequivalence over relational structures with singleton
/// support families a distinguishing sentence is built.
pub fn support_game_equiv(
    m1: &Structure,
    i1: &SupportFamily,
    m2: &Structure,
    i2: &SupportFamily,
    k: usize,
) -> Result<GameResult> {
    if m1.vocab != m2.vocab {
        return Err(Error::invalid("game structures must share a vocabulary".to_string()));
    }
    if k == 0 {
        return Err(Error::invalid("the game needs k >= 1".to_string()));
    }
    if let Some(w) = i1.shape_violation(m1) {
        return Err(Error::invalid(format!("left support family: {w}")));
    }
    if let Some(w) = i2.shape_violation(m2) {
        return Err(Error::invalid(format!("right support family: {w}")));
    }
    let cap = (k * i1.max_member_size()).min(k * i2.max_member_size());
    let all = super::MapFamily::all_partial_embeddings(m1, m2, cap)?;
    let w: Vec<PartialInj> = all
        .iter()
        .filter(|g| i1.in_union(&g.dom(), k) && i2.in_union(&g.rng(), k))
        .cloned()
        .collect();
    let index: BTreeMap<&PartialInj, usize> = w.iter().zip(0..).collect();
    let positions = w.len();

    let mut deaths: Vec<Option<Death>> = (0..positions).map(|_| None).collect();
    let mut round = 0usize;
    loop {
        round += 1;
        let alive: Vec<bool> = deaths.iter().map(|d| d.is_none()).collect();
        let mut new_deaths = Vec::new();
        for (gi, g) in w.iter().enumerate() {
            if !alive[gi] {
                continue;
            }
            let mut death = None;
            'search: for keep in restrictions(g, i1, i2, k) {
                let r = subinj(g, &keep);
                for a in i1.iter() {
                    if a.is_subset(&r.dom()) {
                        continue;
                    }
                    let answered = w
                        .iter()
                        .enumerate()
                        .any(|(hi, h)| alive[hi] && h.extends(&r) && a.is_subset(&h.dom()));
                    if !answered {
                        death = Some(Death {
                            round,
                            keep: keep.clone(),
                            side: Side::Forward,
                            challenge: a.clone(),
                        });
                        break 'search;
                    }
                }
                for b in i2.iter() {
                    if b.is_subset(&r.rng()) {
                        continue;
                    }
                    let answered = w
                        .iter()
                        .enumerate()
                        .any(|(hi, h)| alive[hi] && h.extends(&r) && b.is_subset(&h.rng()));
                    if !answered {
                        death = Some(Death {
                            round,
                            keep,
                            side: Side::Backward,
                            challenge: b.clone(),
                        });
                        break 'search;
                    }
                }
            }
            if let Some(d) = death {
                new_deaths.push((gi, d));
            }
        }
        if new_deaths.is_empty() {
            round -= 1;
            break;
        }
        for (gi, d) in new_deaths {
            deaths[gi] = Some(d);
        }
    }

    let empty_idx = index[&PartialInj::empty()];
    let survivors = deaths.iter().filter(|d| d.is_none()).count();
    let equivalent = deaths[empty_idx].is_none();
    let singleton = i1.max_member_size() == 1 && i2.max_member_size() == 1;
    let relational = m1.vocab.funs.is_empty();
    let distinguisher = if equivalent || !singleton || !relational {
        None
    } else {
        Some(build_distinguisher(m1, m2, &w, &index, &deaths, empty_idx, k))
    };
    Ok(GameResult {
        equivalent,
        rounds: round,
        positions,
        survivors,
        distinguisher,
    })
}

fn var(slot: usize) -> String {
    format!("v{slot}")
}

/// The complete quantifier-free type of the slotted elements on one side.
fn qf_type(m: &Structure, elems: &BTreeMap<usize, usize>) -> SFormula {
    let mut parts = Vec::new();
    let slots: Vec<usize> = elems.keys().copied().collect();
    for (i, &s1) in slots.iter().enumerate() {
        for &s2 in &slots[i + 1..] {
            let atom = Formula::Eq(Term::Var(var(s1)), Term::Var(var(s2)));
            parts.push(SFormula::Atom(if elems[&s1] == elems[&s2] {
                atom
            } else {
                atom.not()
            }));
        }
    }
    for (name, &e) in &m.cons {
        for &s in &slots {
            let atom = Formula::Eq(Term::Var(var(s)), Term::Const(name.clone()));
            parts.push(SFormula::Atom(if elems[&s] == e { atom } else { atom.not() }));
        }
    }
    for (name, tuples) in &m.rels {
        let arity = m.vocab.rels[name];
        let mut pick = vec![0usize; arity];
        loop {
            let args: Vec<Term> = pick.iter().map(|&i| Term::Var(var(slots[i]))).collect();
            let tuple: Vec<usize> = pick.iter().map(|&i| elems[&slots[i]]).collect();
            let atom = Formula::Pred(name.clone(), args);
            parts.push(SFormula::Atom(if tuples.contains(&tuple) {
                atom
            } else {
                atom.not()
            }));
            let mut pos = arity;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                pick[pos] += 1;
                if pick[pos] < slots.len() {
                    break;
                }
                pick[pos] = 0;
                if pos == 0 {
                    pos = usize::MAX;
                    break;
                }
            }
            if arity == 0 || pos == usize::MAX {
                break;
            }
        }
    }
    if parts.is_empty() {
        SFormula::Atom(Formula::True)
    } else {
        SFormula::And(parts)
    }
}

/// A sentence true on the left structure and false on the right one,
/// extracted from the death certificates of the pruned game.
fn build_distinguisher(
    m1: &Structure,
    m2: &Structure,
    w: &[PartialInj],
    index: &BTreeMap<&PartialInj, usize>,
    deaths: &[Option<Death>],
    start: usize,
    k: usize,
) -> SFormula {
    fn rec(
        m1: &Structure,
        m2: &Structure,
        w: &[PartialInj],
        index: &BTreeMap<&PartialInj, usize>,
        deaths: &[Option<Death>],
        gi: usize,
        slots: &BTreeMap<usize, (usize, usize)>,
        k: usize,
    ) -> SFormula {
        let g = &w[gi];
        let d = deaths[gi].as_ref().expect("distinguisher of a dead position");
        let pairs: Vec<(usize, usize)> = g.pairs().collect();
        let kept: Vec<(usize, usize)> = d.keep.iter().map(|&i| pairs[i]).collect();
        let kept_slots: BTreeMap<usize, (usize, usize)> = slots
            .iter()
            .filter(|(_, p)| kept.contains(p))
            .map(|(&s, &p)| (s, p))
            .collect();
        let free_slot = (0..k)
            .find(|s| !kept_slots.contains_key(s))
            .expect("restriction leaves a free slot");
        let &x = d.challenge.iter().next().expect("singleton challenge");
        let forward = d.side == Side::Forward;
        let mut elems: BTreeMap<usize, usize> = kept_slots
            .iter()
            .map(|(&s, &(a, b))| (s, if forward { a } else { b }))
            .collect();
        elems.insert(free_slot, x);
        let mut parts = vec![qf_type(if forward { m1 } else { m2 }, &elems)];
        let n_other = if forward { m2.n() } else { m1.n() };
        for y in 0..n_other {
            let mut cand: Vec<(usize, usize)> = kept.clone();
            cand.push(if forward { (x, y) } else { (y, x) });
            let Ok(h) = PartialInj::new(cand) else { continue };
            let Some(&hi) = index.get(&h) else { continue };
            let Some(dh) = deaths[hi].as_ref() else { continue };
            if dh.round >= d.round {
                continue;
            }
            let mut sub_slots = kept_slots.clone();
            sub_slots.insert(free_slot, if forward { (x, y) } else { (y, x) });
            let sub = rec(m1, m2, w, index, deaths, hi, &sub_slots, k);
            parts.push(if forward { sub } else { sub.not() });
        }
        let block = SFormula::ExistsBlock(vec![var(free_slot)], Box::new(SFormula::And(parts)));
        if forward {
            block
        } else {
            block.not()
        }
    }
    rec(m1, m2, w, index, deaths, start, &BTreeMap::new(), k)
}
