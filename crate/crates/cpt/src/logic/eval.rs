//! Formula evaluation over one stage: a frozen universe of handles plus the
//! current dynamic constants.

use super::{Formula, Structure, Term};
use crate::hfs::{SetHandle, UniverseStore};
use crate::{Bound, Error, Result};

/// Everything a formula sees at one stage. Quantifiers range over
/// `universe`; `DPl(t)` holds iff the term denotes `dynamics[l]`; the
/// `Qt` threshold is `threshold` (pass `Bound::Infinite` when no timing
/// function applies, making `Qt` uniformly false).
#[derive(Clone, Copy)]
pub struct EvalCtx<'a> {
    pub store: &'a UniverseStore,
    pub structure: &'a Structure,
    pub universe: &'a [SetHandle],
    pub dynamics: &'a [Option<SetHandle>],
    pub threshold: Bound,
}

type Env = Vec<(String, SetHandle)>;

fn lookup(env: &Env, v: &str) -> Option<SetHandle> {
    env.iter().rev().find(|(name, _)| name == v).map(|&(_, h)| h)
}

fn eval_term(ctx: &EvalCtx, env: &Env, t: &Term) -> Result<Option<SetHandle>> {
    match t {
        Term::Var(v) => lookup(env, v)
            .map(Some)
            .ok_or_else(|| Error::invalid(format!("unbound variable `{v}`"))),
        Term::Const(c) => {
            let &i = ctx
                .structure
                .cons
                .get(c)
                .ok_or_else(|| Error::invalid(format!("uninterpreted constant `{c}`")))?;
            Ok(Some(ctx.structure.atom(i)))
        }
        Term::App(f, inner) => {
            let graph = ctx
                .structure
                .funs
                .get(f)
                .ok_or_else(|| Error::invalid(format!("uninterpreted function `{f}`")))?;
            match eval_term(ctx, env, inner)? {
                Some(SetHandle::Atom(i)) => {
                    Ok(graph.get(&(i as usize)).map(|&j| ctx.structure.atom(j)))
                }
                _ => Ok(None),
            }
        }
    }
}

pub fn evaluate(ctx: &EvalCtx, f: &Formula, env: &mut Env) -> Result<bool> {
    match f {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Pred(r, args) => {
            let tuples = ctx
                .structure
                .rels
                .get(r)
                .ok_or_else(|| Error::invalid(format!("uninterpreted relation `{r}`")))?;
            let mut ids = Vec::with_capacity(args.len());
            for a in args {
                match eval_term(ctx, env, a)? {
                    Some(SetHandle::Atom(i)) => ids.push(i as usize),
                    _ => return Ok(false),
                }
            }
            Ok(tuples.contains(&ids))
        }
        Formula::Dyn(ix, t) => {
            if *ix >= ctx.dynamics.len() {
                return Err(Error::invalid(format!(
                    "unknown dynamic predicate DP{ix} (scheme has {})",
                    ctx.dynamics.len()
                )));
            }
            match eval_term(ctx, env, t)? {
                Some(h) => Ok(ctx.dynamics[*ix] == Some(h)),
                None => Ok(false),
            }
        }
        Formula::Eq(a, b) => {
            let (va, vb) = (eval_term(ctx, env, a)?, eval_term(ctx, env, b)?);
            Ok(va.is_some() && va == vb)
        }
        Formula::Mem(a, b) => match (eval_term(ctx, env, a)?, eval_term(ctx, env, b)?) {
            (Some(x), Some(s)) => Ok(ctx.store.contains(s, x)),
            _ => Ok(false),
        },
        Formula::Not(a) => Ok(!evaluate(ctx, a, env)?),
        Formula::And(a, b) => Ok(evaluate(ctx, a, env)? && evaluate(ctx, b, env)?),
        Formula::Or(a, b) => Ok(evaluate(ctx, a, env)? || evaluate(ctx, b, env)?),
        Formula::Implies(a, b) => Ok(!evaluate(ctx, a, env)? || evaluate(ctx, b, env)?),
        Formula::Forall(x, a) => {
            for &h in ctx.universe {
                env.push((x.clone(), h));
                let ok = evaluate(ctx, a, env)?;
                env.pop();
                if !ok {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::Exists(x, a) => {
            for &h in ctx.universe {
                env.push((x.clone(), h));
                let ok = evaluate(ctx, a, env)?;
                env.pop();
                if ok {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::CountAbove(x, a) => {
            let c = count(ctx, x, a, env)?;
            Ok(ctx.threshold.exceeded_by(c))
        }
        Formula::Card(x, a, k) => Ok(count(ctx, x, a, env)? == *k),
    }
}

fn count(ctx: &EvalCtx, x: &str, a: &Formula, env: &mut Env) -> Result<u64> {
    let mut c = 0;
    for &h in ctx.universe {
        env.push((x.to_string(), h));
        let ok = evaluate(ctx, a, env)?;
        env.pop();
        if ok {
            c += 1;
        }
    }
    Ok(c)
}

/// Evaluates a sentence (no free variables).
pub fn eval_sentence(ctx: &EvalCtx, f: &Formula) -> Result<bool> {
    evaluate(ctx, f, &mut Vec::new())
}

/// Interns `{a in universe : psi(a, params)}`, the subset psi defines with
/// head variable `head` under the given parameter assignment.
#[allow(clippy::too_many_arguments)]
pub fn defined_subset(
    store: &mut UniverseStore,
    structure: &Structure,
    universe: &[SetHandle],
    dynamics: &[Option<SetHandle>],
    threshold: Bound,
    psi: &Formula,
    head: &str,
    params: &[(String, SetHandle)],
) -> Result<SetHandle> {
    let mut sat = Vec::new();
    {
        let ctx = EvalCtx {
            store,
            structure,
            universe,
            dynamics,
            threshold,
        };
        let mut env: Env = params.to_vec();
        for &h in universe {
            env.push((head.to_string(), h));
            let ok = evaluate(&ctx, psi, &mut env)?;
            env.pop();
            if ok {
                sat.push(h);
            }
        }
    }
    Ok(store.intern_set(sat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse::parse_formula;
    use crate::logic::{Dialect, Vocabulary};
    use std::collections::{BTreeMap, BTreeSet};

    fn small() -> (Structure, UniverseStore) {
        let mut vocab = Vocabulary::default();
        vocab.rels.insert("P".into(), 1);
        vocab.funs.insert("f".into(), 1);
        vocab.cons.insert("c".into());
        let s = Structure {
            name: "m".into(),
            vocab,
            elements: vec!["a".into(), "b".into(), "d".into()],
            rels: BTreeMap::from([(
                "P".into(),
                BTreeSet::from([vec![0usize], vec![1usize]]),
            )]),
            funs: BTreeMap::from([("f".into(), BTreeMap::from([(0usize, 1usize)]))]),
            cons: BTreeMap::from([("c".into(), 2usize)]),
        };
        s.validate().unwrap();
        let store = s.store();
        (s, store)
    }

    fn check(text: &str, threshold: Bound, expect: bool) {
        let (s, store) = small();
        let f = parse_formula(text, &s.vocab, Dialect::CardT).unwrap();
        let universe = s.atoms();
        let ctx = EvalCtx {
            store: &store,
            structure: &s,
            universe: &universe,
            dynamics: &[],
            threshold,
        };
        assert_eq!(eval_sentence(&ctx, &f).unwrap(), expect, "{text}");
    }

    #[test]
    fn atoms_over_structure() {
        check("exists x (P(x))", Bound::Infinite, true);
        check("forall x (P(x))", Bound::Infinite, false);
        check("exists x (f(x) = x)", Bound::Infinite, false);
        check("exists x (f(f(x)) = x)", Bound::Infinite, false);
        check("P(c)", Bound::Infinite, false);
        check("exists x (x in c)", Bound::Infinite, false);
    }

    #[test]
    fn counting() {
        check("card{x : x = x} = 3", Bound::Infinite, true);
        check("card{x : P(x)} = 2", Bound::Infinite, true);
        check("card{x : P(x)} >= 3", Bound::Infinite, false);
        check("Qt x (P(x))", Bound::Finite(3), false);
        check("Qt x (P(x))", Bound::Finite(1), true);
        check("Qt x (P(x))", Bound::Infinite, false);
    }

    #[test]
    fn membership_and_dynamics() {
        let (s, mut store) = small();
        let a = store.atom("a").unwrap();
        let b = store.atom("b").unwrap();
        let ab = store.intern_set([a, b]);
        let mut universe = s.atoms();
        universe.push(ab);
        universe.sort();
        let dynamics = [Some(ab), None];
        let ctx = EvalCtx {
            store: &store,
            structure: &s,
            universe: &universe,
            dynamics: &dynamics,
            threshold: Bound::Infinite,
        };
        let ev = |text: &str| {
            let f = parse_formula(text, &s.vocab, Dialect::Fo).unwrap();
            eval_sentence(&ctx, &f).unwrap()
        };
        assert!(ev("exists y (exists x (x in y))"));
        assert!(ev("exists y (DP0(y) & c != y)"));
        assert!(!ev("exists y (DP1(y))"));
        assert!(ev("forall x (DP0(x) -> exists y (y in x))"));
        let bad = parse_formula("DP2(c)", &s.vocab, Dialect::Fo).unwrap();
        assert!(eval_sentence(&ctx, &bad).is_err());
    }

    #[test]
    fn defined_subsets() {
        let (s, mut store) = small();
        let universe = s.atoms();
        let ds = |store: &mut UniverseStore, text: &str, params: &[(String, SetHandle)]| {
            let f = parse_formula(text, &s.vocab, Dialect::Fo).unwrap();
            defined_subset(
                store,
                &s,
                &universe,
                &[],
                Bound::Infinite,
                &f,
                "x",
                params,
            )
            .unwrap()
        };
        let empty = ds(&mut store, "false", &[]);
        assert_eq!(empty, store.empty_set());
        let p = ds(&mut store, "P(x)", &[]);
        let a = store.atom("a").unwrap();
        let b = store.atom("b").unwrap();
        assert_eq!(store.members(p), &[a, b]);
        let single = ds(&mut store, "x = y0", &[("y0".into(), b)]);
        assert_eq!(store.members(single), &[b]);
    }
}
