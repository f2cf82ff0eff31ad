//! Vocabularies, finite structures, and the formula language: first order
//! logic with membership, dynamic predicates `DP0, DP1, ...`, cardinality
//! atoms, and the bounded counting quantifier `Qt`.

pub mod eval;
pub mod parse;

use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dialect {
    Fo,
    Card,
    CardT,
}

impl Dialect {
    pub fn parse(s: &str) -> Result<Dialect> {
        match s {
            "fo" => Ok(Dialect::Fo),
            "card" => Ok(Dialect::Card),
            "card_T" => Ok(Dialect::CardT),
            _ => Err(Error::invalid(format!("unknown dialect `{s}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dialect::Fo => "fo",
            Dialect::Card => "card",
            Dialect::CardT => "card_T",
        }
    }

    pub fn allows_card(self) -> bool {
        matches!(self, Dialect::Card | Dialect::CardT)
    }

    pub fn allows_count_quantifier(self) -> bool {
        matches!(self, Dialect::CardT)
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub rels: BTreeMap<String, usize>,
    pub funs: BTreeMap<String, usize>,
    pub cons: BTreeSet<String>,
}

pub(crate) const KEYWORDS: &[&str] = &["forall", "exists", "in", "card", "true", "false", "Qt"];

pub(crate) fn is_dp_name(name: &str) -> bool {
    name.strip_prefix("DP")
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

impl Vocabulary {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for name in self
            .rels
            .keys()
            .chain(self.funs.keys())
            .chain(self.cons.iter())
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("symbol `{name}` declared twice")));
            }
            if KEYWORDS.contains(&name.as_str()) || name == "DP" || is_dp_name(name) {
                return Err(Error::invalid(format!("symbol name `{name}` is reserved")));
            }
        }
        for (f, ar) in &self.funs {
            if *ar != 1 {
                return Err(Error::invalid(format!(
                    "function `{f}` has arity {ar}; only unary functions are supported"
                )));
            }
        }
        Ok(())
    }
}

/// A finite relational structure. Element ids are indices into `elements`,
/// and the evaluation convention is that element `i` is interned as the
/// store's atom number `i` (see [`Structure::store`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Structure {
    pub name: String,
    pub vocab: Vocabulary,
    pub elements: Vec<String>,
    pub rels: BTreeMap<String, BTreeSet<Vec<usize>>>,
    pub funs: BTreeMap<String, BTreeMap<usize, usize>>,
    pub cons: BTreeMap<String, usize>,
}

impl Structure {
    pub fn n(&self) -> usize {
        self.elements.len()
    }

    /// Fresh store holding exactly this structure's elements, atom `i`
    /// carrying element `i`'s name.
    pub fn store(&self) -> UniverseStore {
        let mut store = UniverseStore::new();
        for name in &self.elements {
            store.intern_atom(name).expect("element names are distinct");
        }
        store
    }

    pub fn atom(&self, i: usize) -> SetHandle {
        debug_assert!(i < self.n());
        SetHandle::Atom(i as u32)
    }

    pub fn atoms(&self) -> Vec<SetHandle> {
        (0..self.n()).map(|i| self.atom(i)).collect()
    }

    pub fn elem_id(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e == name)
    }

    pub fn holds(&self, rel: &str, tuple: &[usize]) -> bool {
        self.rels.get(rel).is_some_and(|ts| ts.contains(tuple))
    }

    pub fn validate(&self) -> Result<()> {
        self.vocab.validate()?;
        let n = self.n();
        let mut names = BTreeSet::new();
        for e in &self.elements {
            if !names.insert(e.as_str()) {
                return Err(Error::invalid(format!("duplicate element `{e}`")));
            }
        }
        for (r, tuples) in &self.rels {
            let ar = *self
                .vocab
                .rels
                .get(r)
                .ok_or_else(|| Error::invalid(format!("relation `{r}` not in vocabulary")))?;
            for t in tuples {
                if t.len() != ar || t.iter().any(|&i| i >= n) {
                    return Err(Error::invalid(format!("bad tuple for relation `{r}`")));
                }
            }
        }
        for (f, graph) in &self.funs {
            if !self.vocab.funs.contains_key(f) {
                return Err(Error::invalid(format!("function `{f}` not in vocabulary")));
            }
            if graph.keys().chain(graph.values()).any(|&i| i >= n) {
                return Err(Error::invalid(format!("bad pair for function `{f}`")));
            }
        }
        for (c, &i) in &self.cons {
            if !self.vocab.cons.contains(c) {
                return Err(Error::invalid(format!("constant `{c}` not in vocabulary")));
            }
            if i >= n {
                return Err(Error::invalid(format!("bad value for constant `{c}`")));
            }
        }
        Ok(())
    }
}

use crate::hfs::{SetHandle, UniverseStore};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
    App(String, Box<Term>),
}

impl Term {
    fn vars_into(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) => {}
            Term::App(_, t) => t.vars_into(out),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => f.write_str(c),
            Term::App(g, t) => write!(f, "{g}({t})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Pred(String, Vec<Term>),
    Dyn(usize, Term),
    Eq(Term, Term),
    Mem(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(String, Box<Formula>),
    Exists(String, Box<Formula>),
    /// `Qt x (phi)`: more than t_fun(atom count) elements satisfy phi.
    CountAbove(String, Box<Formula>),
    /// `card{x : phi} = k`, exact count.
    Card(String, Box<Formula>, u64),
}

impl Formula {
    pub fn not(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Formula {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Formula {
        Formula::Or(Box::new(self), Box::new(other))
    }

    pub fn quantifier_depth(&self) -> usize {
        match self {
            Formula::True
            | Formula::False
            | Formula::Pred(..)
            | Formula::Dyn(..)
            | Formula::Eq(..)
            | Formula::Mem(..) => 0,
            Formula::Not(a) => a.quantifier_depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.quantifier_depth().max(b.quantifier_depth())
            }
            Formula::Forall(_, a)
            | Formula::Exists(_, a)
            | Formula::CountAbove(_, a)
            | Formula::Card(_, a, _) => 1 + a.quantifier_depth(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Formula::True | Formula::False => BTreeSet::new(),
            Formula::Pred(_, args) => {
                let mut out = BTreeSet::new();
                for t in args {
                    t.vars_into(&mut out);
                }
                out
            }
            Formula::Dyn(_, t) => {
                let mut out = BTreeSet::new();
                t.vars_into(&mut out);
                out
            }
            Formula::Eq(a, b) | Formula::Mem(a, b) => {
                let mut out = BTreeSet::new();
                a.vars_into(&mut out);
                b.vars_into(&mut out);
                out
            }
            Formula::Not(a) => a.free_vars(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                let mut out = a.free_vars();
                out.extend(b.free_vars());
                out
            }
            Formula::Forall(x, a)
            | Formula::Exists(x, a)
            | Formula::CountAbove(x, a)
            | Formula::Card(x, a, _) => {
                let mut out = a.free_vars();
                out.remove(x);
                out
            }
        }
    }

    pub fn max_subformula_free_vars(&self) -> usize {
        let own = self.free_vars().len();
        let inner = match self {
            Formula::True
            | Formula::False
            | Formula::Pred(..)
            | Formula::Dyn(..)
            | Formula::Eq(..)
            | Formula::Mem(..) => 0,
            Formula::Not(a) => a.max_subformula_free_vars(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => a
                .max_subformula_free_vars()
                .max(b.max_subformula_free_vars()),
            Formula::Forall(_, a)
            | Formula::Exists(_, a)
            | Formula::CountAbove(_, a)
            | Formula::Card(_, a, _) => a.max_subformula_free_vars(),
        };
        own.max(inner)
    }

    pub fn has_card_atom(&self) -> bool {
        match self {
            Formula::Card(..) => true,
            Formula::True
            | Formula::False
            | Formula::Pred(..)
            | Formula::Dyn(..)
            | Formula::Eq(..)
            | Formula::Mem(..) => false,
            Formula::Not(a) => a.has_card_atom(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.has_card_atom() || b.has_card_atom()
            }
            Formula::Forall(_, a) | Formula::Exists(_, a) | Formula::CountAbove(_, a) => {
                a.has_card_atom()
            }
        }
    }

    pub fn has_count_quantifier(&self) -> bool {
        match self {
            Formula::CountAbove(..) => true,
            Formula::True
            | Formula::False
            | Formula::Pred(..)
            | Formula::Dyn(..)
            | Formula::Eq(..)
            | Formula::Mem(..) => false,
            Formula::Not(a) => a.has_count_quantifier(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.has_count_quantifier() || b.has_count_quantifier()
            }
            Formula::Forall(_, a) | Formula::Exists(_, a) | Formula::Card(_, a, _) => {
                a.has_count_quantifier()
            }
        }
    }

    /// Largest dynamic predicate index used, if any.
    pub fn max_dyn_index(&self) -> Option<usize> {
        match self {
            Formula::Dyn(i, _) => Some(*i),
            Formula::True
            | Formula::False
            | Formula::Pred(..)
            | Formula::Eq(..)
            | Formula::Mem(..) => None,
            Formula::Not(a) => a.max_dyn_index(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                match (a.max_dyn_index(), b.max_dyn_index()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Formula::Forall(_, a)
            | Formula::Exists(_, a)
            | Formula::CountAbove(_, a)
            | Formula::Card(_, a, _) => a.max_dyn_index(),
        }
    }

    pub fn check_dialect(&self, dialect: Dialect) -> Result<()> {
        if self.has_card_atom() && !dialect.allows_card() {
            return Err(Error::invalid(format!(
                "cardinality atom not allowed in dialect {dialect}"
            )));
        }
        if self.has_count_quantifier() && !dialect.allows_count_quantifier() {
            return Err(Error::invalid(format!(
                "counting quantifier not allowed in dialect {dialect}"
            )));
        }
        Ok(())
    }
}

fn fmt_binary(
    f: &mut fmt::Formatter<'_>,
    a: &Formula,
    op: &str,
    b: &Formula,
) -> fmt::Result {
    write!(f, "({a} {op} {b})")
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Pred(r, args) => {
                let parts: Vec<String> = args.iter().map(|t| t.to_string()).collect();
                write!(f, "{r}({})", parts.join(","))
            }
            Formula::Dyn(i, t) => write!(f, "DP{i}({t})"),
            Formula::Eq(a, b) => write!(f, "{a} = {b}"),
            Formula::Mem(a, b) => write!(f, "{a} in {b}"),
            Formula::Not(a) => match a.as_ref() {
                Formula::True
                | Formula::False
                | Formula::Pred(..)
                | Formula::Dyn(..)
                | Formula::Not(_) => write!(f, "!{a}"),
                _ => write!(f, "!({a})"),
            },
            Formula::And(a, b) => fmt_binary(f, a, "&", b),
            Formula::Or(a, b) => fmt_binary(f, a, "|", b),
            Formula::Implies(a, b) => fmt_binary(f, a, "->", b),
            Formula::Forall(x, a) => write!(f, "forall {x} ({a})"),
            Formula::Exists(x, a) => write!(f, "exists {x} ({a})"),
            Formula::CountAbove(x, a) => write!(f, "Qt {x} ({a})"),
            Formula::Card(x, a, k) => write!(f, "card{{{x} : {a}}} = {k}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(v: &str) -> Term {
        Term::Var(v.to_string())
    }

    #[test]
    fn depth_and_free_vars() {
        let f = Formula::Exists(
            "y".into(),
            Box::new(Formula::Mem(var("x"), var("y"))),
        );
        assert_eq!(f.quantifier_depth(), 1);
        assert_eq!(f.free_vars(), BTreeSet::from(["x".to_string()]));
        assert_eq!(f.max_subformula_free_vars(), 2);

        let qt = Formula::CountAbove("x".into(), Box::new(f.clone()));
        assert_eq!(qt.quantifier_depth(), 2);
    }

    #[test]
    fn msfv_examples() {
        let atomic = Formula::Pred("R".into(), vec![var("x"), var("y")]);
        assert_eq!(atomic.max_subformula_free_vars(), 2);
        let deep = Formula::Eq(var("x"), var("x")).and(Formula::Exists(
            "y".into(),
            Box::new(Formula::Exists(
                "z".into(),
                Box::new(Formula::Exists(
                    "w".into(),
                    Box::new(Formula::Pred("S".into(), vec![var("y"), var("z"), var("w")])),
                )),
            )),
        ));
        assert_eq!(deep.max_subformula_free_vars(), 3);
    }

    #[test]
    fn dialect_gates() {
        let card = Formula::Card("x".into(), Box::new(Formula::True), 2);
        assert!(card.check_dialect(Dialect::Fo).is_err());
        assert!(card.check_dialect(Dialect::Card).is_ok());
        let qt = Formula::CountAbove("x".into(), Box::new(Formula::True));
        assert!(qt.check_dialect(Dialect::Card).is_err());
        assert!(qt.check_dialect(Dialect::CardT).is_ok());
    }

    #[test]
    fn reserved_names() {
        let mut v = Vocabulary::default();
        v.rels.insert("DP3".into(), 1);
        assert!(v.validate().is_err());
        let mut v = Vocabulary::default();
        v.rels.insert("card".into(), 1);
        assert!(v.validate().is_err());
    }
}
