//! Witness families between two k-systems and verdict transfer.

use super::ksystem::{check_dichotomy, check_k_system, h_length_bound, key_class_counts, DichotomyMode};
use super::{
    describe_set, embedding_compatible, find_extension_in, is_partial_embedding, ElemSet,
    FamilyKind, KSystem, MapFamily, PartialInj, Report, PAIR_BUDGET,
};
use crate::logic::Formula;
use crate::scheme::{run, InductiveScheme, StopVariant, TruthValue, Verdict};
use crate::{Error, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

const WITNESS_SAMPLE: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strength {
    K,
    Ks,
    Super,
}

impl Strength {
    pub fn parse(text: &str) -> Result<Strength> {
        match text {
            "k" => Ok(Strength::K),
            "ks" => Ok(Strength::Ks),
            "super" => Ok(Strength::Super),
            other => Err(Error::invalid(format!(
                "strength must be k, ks or super, got `{other}`"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strength::K => "k",
            Strength::Ks => "ks",
            Strength::Super => "super",
        }
    }
}

#[derive(Debug, Clone)]
pub struct WitnessFamily {
    pub name: String,
    pub h: MapFamily,
    pub strength: Strength,
}

/// Extension search that covers a prescribed part of the range: some family
/// map extending `base` whose range includes `cover`.
fn find_range_extension(
    m1: &crate::logic::Structure,
    m2: &crate::logic::Structure,
    family: &MapFamily,
    base: &PartialInj,
    cover: &ElemSet,
) -> Option<PartialInj> {
    let max_dom = match family.kind {
        FamilyKind::Explicit => {
            return family
                .iter()
                .find(|g| g.extends(base) && cover.is_subset(&g.rng()))
                .cloned();
        }
        FamilyKind::AllPartialAutos { max_dom } | FamilyKind::AllPartialEmbeddings { max_dom } => {
            max_dom
        }
    };
    let missing: Vec<usize> = cover
        .iter()
        .copied()
        .filter(|y| !base.rng().contains(y))
        .collect();
    if base.len() + missing.len() > max_dom {
        return None;
    }
    fn rec(
        m1: &crate::logic::Structure,
        m2: &crate::logic::Structure,
        f: &PartialInj,
        missing: &[usize],
    ) -> Option<PartialInj> {
        let Some((&b, rest)) = missing.split_first() else {
            return Some(f.clone());
        };
        let dom = f.dom();
        for a in 0..m1.n() {
            if dom.contains(&a) {
                continue;
            }
            if embedding_compatible(m1, m2, f, a, b) {
                let mut pairs: Vec<(usize, usize)> = f.pairs().collect();
                pairs.push((a, b));
                let g = PartialInj::new(pairs).expect("fresh point");
                if let Some(done) = rec(m1, m2, &g, rest) {
                    return Some(done);
                }
            }
        }
        None
    }
    rec(m1, m2, base, &missing)
}

/// Checks the witness clauses (a)-(g) and the declared strength.  The
/// formula list feeds the definable dichotomy comparison at strength ks and
/// is ignored otherwise.
pub fn check_witness(
    w: &WitnessFamily,
    y1: &KSystem,
    y2: &KSystem,
    formulas: &[Formula],
) -> Result<Report> {
    if y1.m.vocab != y2.m.vocab {
        return Err(Error::invalid(
            "witness systems must share a vocabulary".to_string(),
        ));
    }
    if y1.k != y2.k || y1.s != y2.s {
        return Err(Error::invalid(format!(
            "witness systems must share k and s, got ({}, {}) and ({}, {})",
            y1.k, y1.s, y2.k, y2.s
        )));
    }
    let mut rep = Report::default();
    let m1 = &y1.m;
    let m2 = &y2.m;

    let side1 = check_k_system(y1);
    let side2 = check_k_system(y2);
    let a_clause = "(a) both sides are k-systems";
    match (side1.first_failure(), side2.first_failure()) {
        (None, None) => rep.ok(a_clause),
        (Some(item), _) => rep.fail(a_clause, format!("side 1, {}: {}", item.clause, item.witness.clone().unwrap_or_default())),
        (_, Some(item)) => rep.fail(a_clause, format!("side 2, {}: {}", item.clause, item.witness.clone().unwrap_or_default())),
    }

    let mut bad_iso = None;
    for g in w.h.iter() {
        if g.dom().iter().any(|&x| x >= m1.n()) || g.rng().iter().any(|&y| y >= m2.n()) {
            bad_iso = Some(format!("{} falls outside the structures", g));
            break;
        }
        if !is_partial_embedding(m1, m2, g) {
            bad_iso = Some(format!("{} is not a partial isomorphism", g.describe(m1, m2)));
            break;
        }
    }
    match bad_iso {
        None => rep.ok("(b) members are partial isomorphisms"),
        Some(wit) => rep.fail("(b) members are partial isomorphisms", wit),
    }

    let mut bad_span = None;
    for g in w.h.iter() {
        if !y1.i.in_union(&g.dom(), y1.k) {
            bad_span = Some(format!(
                "domain of {} is not a union of {} supports",
                g.describe(m1, m2),
                y1.k
            ));
            break;
        }
        if !y2.i.in_union(&g.rng(), y2.k) {
            bad_span = Some(format!(
                "range of {} is not a union of {} supports",
                g.describe(m1, m2),
                y2.k
            ));
            break;
        }
    }
    match bad_span {
        None => rep.ok("(c) domains and ranges are unions of at most k supports"),
        Some(wit) => rep.fail("(c) domains and ranges are unions of at most k supports", wit),
    }

    let comp_budget = |other: usize| (w.h.len() as u64).saturating_mul(other as u64);
    for (clause, family, left) in [
        ("(d) closed under composition with the first family", &y1.f, true),
        ("(e) closed under composition with the second family", &y2.f, false),
    ] {
        let total = comp_budget(family.len());
        let mut bad = None;
        let mut sampled = None;
        let compose = |g: &PartialInj, f: &PartialInj| if left { f.then(g) } else { g.then(f) };
        if total <= PAIR_BUDGET {
            'comp: for g in w.h.iter() {
                for f in family.iter() {
                    if !w.h.contains(&compose(g, f)) {
                        bad = Some(format!(
                            "composite of {} with {} leaves the family",
                            g.describe(m1, m2),
                            f
                        ));
                        break 'comp;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            sampled = Some(WITNESS_SAMPLE);
            for _ in 0..WITNESS_SAMPLE {
                let g = w.h.get(rng.gen_range(0..w.h.len()));
                let f = family.get(rng.gen_range(0..family.len()));
                if !w.h.contains(&compose(g, f)) {
                    bad = Some(format!(
                        "composite of {} with {} leaves the family",
                        g.describe(m1, m2),
                        f
                    ));
                    break;
                }
            }
        }
        match (bad, sampled) {
            (Some(wit), _) => rep.fail(clause, wit),
            (None, Some(k)) => rep.note(clause, format!("sampled {k} of {total} pairs (seed 0)")),
            (None, None) => rep.ok(clause),
        }
    }

    let mut bad_ext = None;
    let mut ext_checked = 0u64;
    'ext: for r in w.h.iter() {
        if !y1.i.in_union(&r.dom(), y1.k.saturating_sub(1)) {
            continue;
        }
        for a in y1.i.iter() {
            ext_checked += 1;
            if find_extension_in(m1, m2, &w.h, r, a).is_none() {
                bad_ext = Some(format!(
                    "no extension of {} covering {}",
                    r.describe(m1, m2),
                    describe_set(m1, a)
                ));
                break 'ext;
            }
        }
    }
    let f_clause = "(f) extensions over one more support on the domain side";
    match bad_ext {
        None => rep.note(f_clause, format!("checked {ext_checked} restriction-support pairs")),
        Some(wit) => rep.fail(f_clause, wit),
    }

    let mut bad_rext = None;
    let mut rext_checked = 0u64;
    'rext: for r in w.h.iter() {
        if !y2.i.in_union(&r.rng(), y2.k.saturating_sub(1)) {
            continue;
        }
        for b in y2.i.iter() {
            rext_checked += 1;
            if find_range_extension(m1, m2, &w.h, r, b).is_none() {
                bad_rext = Some(format!(
                    "no extension of {} whose range covers {}",
                    r.describe(m1, m2),
                    describe_set(m2, b)
                ));
                break 'rext;
            }
        }
    }
    let g_clause = "(g) extensions over one more support on the range side";
    match bad_rext {
        None => rep.note(g_clause, format!("checked {rext_checked} restriction-support pairs")),
        Some(wit) => rep.fail(g_clause, wit),
    }

    match w.strength {
        Strength::K => {}
        Strength::Ks => rep.merge("strength ks", check_ks_strength(w, y1, y2, formulas)?),
        Strength::Super => rep.merge("strength super", check_super_strength(w, y1, y2)?),
    }

    Ok(rep)
}

/// The ks strength clause: the two sides take the same dichotomy branch on
/// every definable pair a witness map can translate.
fn check_ks_strength(
    w: &WitnessFamily,
    y1: &KSystem,
    y2: &KSystem,
    formulas: &[Formula],
) -> Result<Report> {
    let mut rep = Report::default();
    if formulas.is_empty() {
        rep.note("dichotomy branches transfer", "no formulas supplied");
        return Ok(rep);
    }
    let (_, out1) = check_dichotomy(y1, &DichotomyMode::Definable(formulas))?;
    let (_, out2) = check_dichotomy(y2, &DichotomyMode::Definable(formulas))?;
    let table2: BTreeMap<(usize, Vec<usize>, &str), (bool, bool)> = out2
        .iter()
        .map(|o| ((o.m, o.h.clone(), o.label.as_str()), (o.beta1, o.beta2)))
        .collect();
    let mut bad = None;
    let mut matched = 0u64;
    'outer: for o in &out1 {
        let need: ElemSet = o.h.iter().copied().collect();
        for g in w.h.with_dom_superset(&need) {
            let h2: Vec<usize> = o.h.iter().map(|&x| g.get(x).unwrap()).collect();
            match table2.get(&(o.m, h2.clone(), o.label.as_str())) {
                None => {
                    bad = Some(format!(
                        "pair ({:?}, {}) translates along {} to a pair missing on side 2",
                        o.h,
                        o.label,
                        g.describe(&y1.m, &y2.m)
                    ));
                    break 'outer;
                }
                Some(&(b1, b2)) => {
                    if (b1, b2) != (o.beta1, o.beta2) {
                        bad = Some(format!(
                            "pair ({:?}, {}) lands on branch ({}, {}) on side 1 but ({b1}, {b2}) on side 2",
                            o.h, o.label, o.beta1, o.beta2
                        ));
                        break 'outer;
                    }
                    matched += 1;
                }
            }
        }
    }
    let clause = "dichotomy branches transfer";
    match bad {
        None => rep.note(clause, format!("{matched} translated pairs")),
        Some(wit) => rep.fail(clause, wit),
    }
    Ok(rep)
}

/// The super strength clause: translating a key along a witness map
/// preserves the multiset of admissible class counts.
fn check_super_strength(w: &WitnessFamily, y1: &KSystem, y2: &KSystem) -> Result<Report> {
    let mut rep = Report::default();
    let m_cap = h_length_bound(y1, 1)?;
    let mut bad = None;
    let mut translated = 0u64;
    let mut truncations = 0u64;
    'outer: for m_len in 1..=m_cap {
        for g in w.h.iter() {
            let dom: Vec<usize> = g.dom().into_iter().collect();
            if dom.len() < m_len {
                continue;
            }
            for h in super::ksystem::injective_tuples_over(&dom, m_len) {
                let rang: ElemSet = h.iter().copied().collect();
                if !y1.i.contains(&rang) {
                    continue;
                }
                for mask in 0..(1u32 << m_len) {
                    let a: ElemSet = (0..m_len)
                        .filter(|&i| mask >> i & 1 == 1)
                        .map(|i| h[i])
                        .collect();
                    if !y1.i.in_union(&a, y1.s) {
                        continue;
                    }
                    let h2: Vec<usize> = h.iter().map(|&x| g.get(x).unwrap()).collect();
                    let a2: ElemSet = a.iter().map(|&x| g.get(x).unwrap()).collect();
                    let (c1, t1) = key_class_counts(y1, &h, &a);
                    let (c2, t2) = key_class_counts(y2, &h2, &a2);
                    if t1 || t2 {
                        truncations += 1;
                    }
                    if c1 != c2 {
                        bad = Some(format!(
                            "key ({:?}, {:?}) has class counts {:?}, its image along {} has {:?}",
                            a,
                            h,
                            c1,
                            g.describe(&y1.m, &y2.m),
                            c2
                        ));
                        break 'outer;
                    }
                    translated += 1;
                }
            }
        }
    }
    let clause = "admissible class counts transfer";
    match bad {
        None => {
            if truncations > 0 {
                rep.note(
                    clause,
                    format!("{translated} translated keys, {truncations} truncated"),
                );
            } else {
                rep.note(clause, format!("{translated} translated keys"));
            }
        }
        Some(wit) => rep.fail(clause, wit),
    }
    Ok(rep)
}

#[derive(Debug, Clone)]
pub struct TransferResult {
    pub verdict1: Verdict,
    pub verdict2: Verdict,
    pub agreed: bool,
    pub exception: Option<String>,
}

impl TransferResult {
    /// Agreement, or a mismatch the one-sided undefinedness rule excuses.
    pub fn consistent(&self) -> bool {
        self.agreed || self.exception.is_some()
    }
}

/// Runs the scheme against the sentence on both sides and compares the
/// verdicts.  A mismatch is excused only when exactly one side is undefined
/// and it stopped strictly earlier than the defined side.
pub fn transfer_verdict(
    y1: &KSystem,
    y2: &KSystem,
    u: &InductiveScheme,
    chi: &Formula,
    variant: StopVariant,
) -> Result<TransferResult> {
    let (_, m_fv) = u.metrics();
    if m_fv > y1.s {
        return Err(Error::invalid(format!(
            "scheme takes parameter tuples of length {m_fv}, over the system bound s = {}",
            y1.s
        )));
    }
    let msfv = u
        .psi
        .iter()
        .map(|r| r.body.max_subformula_free_vars())
        .chain(u.phi.iter().map(|r| r.body.max_subformula_free_vars()))
        .chain(std::iter::once(chi.max_subformula_free_vars()))
        .max()
        .unwrap_or(0);
    if msfv > y1.k {
        return Err(Error::invalid(format!(
            "a subformula has {msfv} free variables, over the system bound k = {}",
            y1.k
        )));
    }
    let mut store1 = y1.m.store();
    let (verdict1, _) = run(&mut store1, &y1.m, u, &y1.t_fun, variant, chi)?;
    let mut store2 = y2.m.store();
    let (verdict2, _) = run(&mut store2, &y2.m, u, &y2.t_fun, variant, chi)?;
    let agreed = verdict1.value == verdict2.value;
    let exception = if agreed {
        None
    } else {
        let undef_first = |undef: &Verdict, defined: &Verdict| {
            undef.value == TruthValue::Undefined
                && defined.value != TruthValue::Undefined
                && undef.stop_time.map_or(u64::MAX, |t| t)
                    < defined.stop_time.map_or(u64::MAX, |t| t)
        };
        if undef_first(&verdict1, &verdict2) {
            Some("side 1 became undefined before side 2 stopped".to_string())
        } else if undef_first(&verdict2, &verdict1) {
            Some("side 2 became undefined before side 1 stopped".to_string())
        } else {
            None
        }
    };
    Ok(TransferResult {
        verdict1,
        verdict2,
        agreed,
        exception,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_formula;
    use crate::logic::Dialect;
    use crate::models;
    use crate::scheme::TimingFunction;
    use crate::symmetry::SupportFamily;

    fn sides() -> (KSystem, KSystem) {
        let m1 = models::cycle_graph(5);
        let m2 = models::relabel(&m1, 7);
        let mk = |m: crate::logic::Structure, name: &str| KSystem {
            name: name.into(),
            i: SupportFamily::size_at_most(5, 1),
            f: MapFamily::all_partial_autos(&m, 3).unwrap(),
            m,
            k: 3,
            s: 1,
            t_fun: TimingFunction::Poly { num: 1, den: 1 },
        };
        (mk(m1, "c5"), mk(m2, "c5r"))
    }

    #[test]
    fn relabeled_cycle_witness_passes() {
        let (y1, y2) = sides();
        let h = MapFamily::all_partial_embeddings(&y1.m, &y2.m, 3).unwrap();
        let w = WitnessFamily {
            name: "c5-pair".into(),
            h,
            strength: Strength::Ks,
        };
        let phi = parse_formula("x = y", &y1.m.vocab, Dialect::Fo).unwrap();
        let rep = check_witness(&w, &y1, &y2, &[phi]).unwrap();
        assert!(rep.pass(), "{}", rep.json_lines());
    }

    #[test]
    fn empty_family_fails_extension() {
        let (y1, y2) = sides();
        let h = MapFamily::from_maps(FamilyKind::Explicit, vec![PartialInj::empty()]).unwrap();
        let w = WitnessFamily {
            name: "too-small".into(),
            h,
            strength: Strength::K,
        };
        let rep = check_witness(&w, &y1, &y2, &[]).unwrap();
        assert!(!rep.pass());
        let first = rep.first_failure().unwrap();
        assert!(first.clause.starts_with("(f)"), "{}", first.clause);
    }

    #[test]
    fn transfer_agrees_on_relabeled_cycle() {
        let (y1, y2) = sides();
        let u = crate::fileio::parse_scheme("scheme pair\npsi(x; y0) := x = y0\n", &y1.m.vocab)
            .unwrap();
        let chi = parse_formula("exists x (exists y (x in y))", &y1.m.vocab, Dialect::Fo).unwrap();
        let res = transfer_verdict(&y1, &y2, &u, &chi, StopVariant::CostBudget).unwrap();
        assert!(res.agreed, "{} vs {}", res.verdict1, res.verdict2);
    }
}
