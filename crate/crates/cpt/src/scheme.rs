//! Inductive schemes and their stage semantics: the successor step, the
//! four stopping-time variants, and three-valued verdicts.

use crate::hfs::{SetHandle, UniverseStore};
use crate::logic::eval::{defined_subset, eval_sentence, EvalCtx};
use crate::logic::{Dialect, Formula, Structure, Vocabulary};
use crate::{Bound, Error, Result};
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt;

/// Resource bound as a function of the structure size: `poly q` is
/// n to the ceiling of n^q (q a positive rational), `const c` is the
/// constant c, `infinity` never bounds anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingFunction {
    Poly { num: u32, den: u32 },
    Const(u64),
    Infinity,
}

impl TimingFunction {
    pub fn parse(text: &str) -> Result<TimingFunction> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let bad = || Error::invalid(format!("bad timing function `{text}`"));
        match parts.as_slice() {
            ["infinity"] => Ok(TimingFunction::Infinity),
            ["const", c] => Ok(TimingFunction::Const(c.parse().map_err(|_| bad())?)),
            ["poly", q] => {
                let (num, den) = match q.split_once('/') {
                    Some((n, d)) => (
                        n.parse().map_err(|_| bad())?,
                        d.parse().map_err(|_| bad())?,
                    ),
                    None => (q.parse().map_err(|_| bad())?, 1),
                };
                if num == 0 || den == 0 {
                    return Err(bad());
                }
                Ok(TimingFunction::Poly { num, den })
            }
            _ => Err(bad()),
        }
    }

    pub fn value(&self, n: u64) -> Bound {
        match *self {
            TimingFunction::Infinity => Bound::Infinite,
            TimingFunction::Const(c) => Bound::Finite(c),
            TimingFunction::Poly { num, den } => {
                let Some(p) = (n as u128).checked_pow(num) else {
                    return Bound::Finite(u64::MAX);
                };
                Bound::Finite(ceil_root(p, den))
            }
        }
    }
}

impl fmt::Display for TimingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TimingFunction::Infinity => f.write_str("infinity"),
            TimingFunction::Const(c) => write!(f, "const {c}"),
            TimingFunction::Poly { num, den: 1 } => write!(f, "poly {num}"),
            TimingFunction::Poly { num, den } => write!(f, "poly {num}/{den}"),
        }
    }
}

/// Smallest m with m^den >= p.
fn ceil_root(p: u128, den: u32) -> u64 {
    let ge = |m: u128| m.checked_pow(den).map_or(true, |v| v >= p);
    let mut hi = 1u128;
    while !ge(hi) {
        hi *= 2;
    }
    let mut lo = 0u128;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if ge(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    u64::try_from(lo).unwrap_or(u64::MAX)
}

/// A stage-building rule `psi(x; y1,...,ym) := body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRule {
    pub head: String,
    pub params: Vec<String>,
    pub body: Formula,
}

/// A constant rule `phi(x) := body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantRule {
    pub head: String,
    pub body: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InductiveScheme {
    pub name: String,
    pub dialect: Dialect,
    pub standard: bool,
    pub psi: Vec<StageRule>,
    pub phi: Vec<ConstantRule>,
}

impl InductiveScheme {
    pub fn m0(&self) -> usize {
        self.psi.len()
    }

    pub fn m1(&self) -> usize {
        self.phi.len()
    }

    /// Pure schemes have no dynamic constants.
    pub fn is_pure(&self) -> bool {
        self.m1() == 0
    }

    /// `(m_qd, m_fv)`: maximum quantifier depth over all rule bodies, and
    /// maximum parameter count over the stage rules.
    pub fn metrics(&self) -> (usize, usize) {
        let m_qd = self
            .psi
            .iter()
            .map(|r| r.body.quantifier_depth())
            .chain(self.phi.iter().map(|r| r.body.quantifier_depth()))
            .max()
            .unwrap_or(0);
        let m_fv = self.psi.iter().map(|r| r.params.len()).max().unwrap_or(0);
        (m_qd, m_fv)
    }

    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        vocab.validate()?;
        if self.dialect == Dialect::Card && !self.standard {
            return Err(Error::invalid(
                "dialect card requires the standard flag".to_string(),
            ));
        }
        let m1 = self.m1();
        let check_rule = |head: &str, params: &[String], body: &Formula| -> Result<()> {
            let mut declared = BTreeSet::from([head.to_string()]);
            for p in params {
                if !declared.insert(p.clone()) {
                    return Err(Error::invalid(format!(
                        "rule for `{}` repeats variable `{p}`",
                        self.name
                    )));
                }
            }
            for v in body.free_vars() {
                if !declared.contains(&v) {
                    return Err(Error::invalid(format!(
                        "free variable `{v}` not declared in rule head"
                    )));
                }
            }
            body.check_dialect(self.dialect)?;
            if let Some(ix) = body.max_dyn_index() {
                if ix >= m1 {
                    return Err(Error::invalid(format!(
                        "DP{ix} used but the scheme has only {m1} constants"
                    )));
                }
            }
            Ok(())
        };
        for r in &self.psi {
            check_rule(&r.head, &r.params, &r.body)?;
        }
        for r in &self.phi {
            check_rule(&r.head, &[], &r.body)?;
        }
        Ok(())
    }
}

/// One evaluation stage: the universe built so far plus the dynamic
/// constants, with the previous constants kept for the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub universe: Vec<SetHandle>,
    pub constants: Vec<Option<SetHandle>>,
    pub history: Option<Vec<Option<SetHandle>>>,
}

impl Candidate {
    pub fn size(&self) -> usize {
        self.universe.len()
    }
}

/// Universe = the structure's atoms, every constant undefined.
pub fn initial_candidate(m: &Structure, u: &InductiveScheme) -> Candidate {
    Candidate {
        universe: m.atoms(),
        constants: vec![None; u.m1()],
        history: None,
    }
}

/// Per-rule bookkeeping for one successor step. `family_sizes` counts the
/// distinct defined subsets before the overflow rule is applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepStats {
    pub family_sizes: Vec<u64>,
    pub family_dropped: Vec<bool>,
    pub new_sets: Vec<u64>,
}

/// The unique successor stage: each rule contributes the family of subsets
/// it defines over all parameter tuples (emptied if it has more than
/// t_fun(||M||) distinct members), and each constant rule recomputes its
/// constant over the old universe.
pub fn successor(
    store: &mut UniverseStore,
    m: &Structure,
    u: &InductiveScheme,
    t_fun: &TimingFunction,
    cand: &Candidate,
) -> Result<(Candidate, StepStats)> {
    let bound = t_fun.value(m.n() as u64);
    let old: BTreeSet<SetHandle> = cand.universe.iter().copied().collect();
    let mut stats = StepStats {
        family_sizes: Vec::with_capacity(u.m0()),
        family_dropped: Vec::with_capacity(u.m0()),
        new_sets: Vec::with_capacity(u.m0()),
    };
    let mut next: BTreeSet<SetHandle> = old.clone();
    for rule in &u.psi {
        let mut family: BTreeSet<SetHandle> = BTreeSet::new();
        let mut tuple = vec![0usize; rule.params.len()];
        loop {
            let params: Vec<(String, SetHandle)> = rule
                .params
                .iter()
                .zip(&tuple)
                .map(|(p, &i)| (p.clone(), cand.universe[i]))
                .collect();
            family.insert(defined_subset(
                store,
                m,
                &cand.universe,
                &cand.constants,
                bound,
                &rule.body,
                &rule.head,
                &params,
            )?);
            if !advance(&mut tuple, cand.universe.len()) {
                break;
            }
        }
        let size = family.len() as u64;
        let dropped = bound.exceeded_by(size);
        stats.family_sizes.push(size);
        stats.family_dropped.push(dropped);
        if dropped {
            stats.new_sets.push(0);
        } else {
            stats
                .new_sets
                .push(family.iter().filter(|h| !old.contains(h)).count() as u64);
            next.extend(family);
        }
    }
    let mut constants = Vec::with_capacity(u.m1());
    for rule in &u.phi {
        constants.push(Some(defined_subset(
            store,
            m,
            &cand.universe,
            &cand.constants,
            bound,
            &rule.body,
            &rule.head,
            &[],
        )?));
    }
    Ok((
        Candidate {
            universe: next.into_iter().collect(),
            constants,
            history: Some(cand.constants.clone()),
        },
        stats,
    ))
}

/// Odometer over parameter tuples; returns false once all tuples are done.
fn advance(tuple: &mut [usize], base: usize) -> bool {
    for slot in tuple.iter_mut() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthValue {
    True,
    False,
    Undefined,
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TruthValue::True => "true",
            TruthValue::False => "false",
            TruthValue::Undefined => "undefined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Halted,
    Budget,
    Never,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Halted => "halted",
            StopReason::Budget => "budget",
            StopReason::Never => "never",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub value: TruthValue,
    pub stop_time: Option<u64>,
    pub reason: StopReason,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stop_t=", self.value)?;
        match self.stop_time {
            Some(t) => write!(f, "{t}")?,
            None => f.write_str("inf")?,
        }
        write!(f, " reason={}", self.reason)
    }
}

/// The four stopping-time semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopVariant {
    /// iota=1: stop only when the constants halt (c0 = c1, from t=2 on).
    CHalt,
    /// iota=2: additionally stop when ||N_{t+1}|| + (t+1) exceeds the bound.
    CostBudget,
    /// iota=3: stop when ||N_{t+1}|| exceeds the bound.
    SizeBudget,
    /// iota=4: stop when some rule's family would exceed the bound.
    FamilyBudget,
}

impl StopVariant {
    pub fn from_index(i: u8) -> Result<StopVariant> {
        match i {
            1 => Ok(StopVariant::CHalt),
            2 => Ok(StopVariant::CostBudget),
            3 => Ok(StopVariant::SizeBudget),
            4 => Ok(StopVariant::FamilyBudget),
            _ => Err(Error::invalid(format!("stopping variant must be 1..4, got {i}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            StopVariant::CHalt => 1,
            StopVariant::CostBudget => 2,
            StopVariant::SizeBudget => 3,
            StopVariant::FamilyBudget => 4,
        }
    }

    fn uses_c_halt(self) -> bool {
        matches!(self, StopVariant::CHalt | StopVariant::CostBudget)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceStage {
    pub t: u64,
    pub universe_size: usize,
    pub new_sets: Vec<u64>,
    pub c: Vec<String>,
    pub cost: u64,
}

pub const STAGE_CAP: u64 = 1 << 16;

/// Whether this state satisfies the constant-halting condition, ignoring
/// the t >= 2 floor: vacuous with no constants, impossible with one,
/// otherwise c0 = c1.
fn constants_halt(cand: &Candidate) -> bool {
    match cand.constants.len() {
        0 => true,
        1 => false,
        _ => cand.constants[0] == cand.constants[1],
    }
}

fn stage_record(store: &UniverseStore, cand: &Candidate, t: u64, new_sets: Vec<u64>) -> TraceStage {
    TraceStage {
        t,
        universe_size: cand.size(),
        new_sets,
        c: cand
            .constants
            .iter()
            .map(|c| match c {
                Some(h) => store.display(*h),
                None => "undefined".to_string(),
            })
            .collect(),
        cost: cand.size() as u64 + t,
    }
}

/// Runs the scheme on `m` to a verdict: iterate successor stages until the
/// variant's stopping rule fires, then evaluate the sentence `chi` on the
/// frozen stage (halting stop) or report undefined (budget stop). A run
/// that can never stop is cut off at [`STAGE_CAP`] stages with reason
/// `never` and stopping time infinity.
pub fn run(
    store: &mut UniverseStore,
    m: &Structure,
    u: &InductiveScheme,
    t_fun: &TimingFunction,
    variant: StopVariant,
    chi: &Formula,
) -> Result<(Verdict, Vec<TraceStage>)> {
    if matches!(variant, StopVariant::SizeBudget | StopVariant::FamilyBudget) && !u.standard {
        return Err(Error::invalid(format!(
            "stopping variant {} requires a standard scheme",
            variant.index()
        )));
    }
    if !chi.free_vars().is_empty() {
        return Err(Error::invalid("chi must be a sentence".to_string()));
    }
    chi.check_dialect(u.dialect)?;
    let bound = t_fun.value(m.n() as u64);
    let mut cand = initial_candidate(m, u);
    let mut trace = vec![stage_record(store, &cand, 0, vec![0; u.m0()])];
    let mut t = 0u64;
    loop {
        if variant.uses_c_halt() && t >= 2 && constants_halt(&cand) {
            let ctx = EvalCtx {
                store,
                structure: m,
                universe: &cand.universe,
                dynamics: &cand.constants,
                threshold: bound,
            };
            let value = if eval_sentence(&ctx, chi)? {
                TruthValue::True
            } else {
                TruthValue::False
            };
            return Ok((
                Verdict {
                    value,
                    stop_time: Some(t),
                    reason: StopReason::Halted,
                },
                trace,
            ));
        }
        if t == STAGE_CAP {
            break;
        }
        let (next, stats) = successor(store, m, u, t_fun, &cand)?;
        let overflow = match variant {
            StopVariant::CHalt => false,
            StopVariant::CostBudget => bound.exceeded_by(next.size() as u64 + t + 1),
            StopVariant::SizeBudget => bound.exceeded_by(next.size() as u64),
            StopVariant::FamilyBudget => stats
                .family_sizes
                .iter()
                .any(|&s| bound.exceeded_by(s)),
        };
        if overflow {
            trace.push(stage_record(store, &next, t + 1, stats.new_sets));
            return Ok((
                Verdict {
                    value: TruthValue::Undefined,
                    stop_time: Some(t),
                    reason: StopReason::Budget,
                },
                trace,
            ));
        }
        let fixpoint = next.universe == cand.universe && next.constants == cand.constants;
        if fixpoint && !(variant.uses_c_halt() && constants_halt(&next)) {
            break;
        }
        trace.push(stage_record(store, &next, t + 1, stats.new_sets));
        cand = next;
        t += 1;
    }
    Ok((
        Verdict {
            value: TruthValue::Undefined,
            stop_time: None,
            reason: StopReason::Never,
        },
        trace,
    ))
}

/// Runs `t_max` unbounded successor steps and verifies the standardness
/// guarantee: stage t contains the von Neumann numerals 0..t.
pub fn check_standard(
    store: &mut UniverseStore,
    m: &Structure,
    u: &InductiveScheme,
    t_max: u64,
) -> Result<bool> {
    let mut cand = initial_candidate(m, u);
    let mut numerals: Vec<SetHandle> = Vec::new();
    for t in 1..=t_max {
        let (next, _) = successor(store, m, u, &TimingFunction::Infinity, &cand)?;
        cand = next;
        numerals.push(store.von_neumann(t - 1));
        let have: BTreeSet<SetHandle> = cand.universe.iter().copied().collect();
        if !numerals.iter().all(|n| have.contains(n)) {
            return Ok(false);
        }
    }
    Ok(true)
}
