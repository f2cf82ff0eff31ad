mod common;

use common::{all_graphs, two_var_equiv};
use cpt::logic::eval::{eval_sentence, EvalCtx};
use cpt::logic::parse::parse_formula;
use cpt::logic::{Dialect, Structure};
use cpt::models::{complete_graph, cycle_graph, relabel, unary_structure};
use cpt::scheme::TimingFunction;
use cpt::Bound;

fn holds(m: &Structure, text: &str, dialect: Dialect, threshold: Bound) -> bool {
    let f = parse_formula(text, &m.vocab, dialect).unwrap();
    let store = m.store();
    let ctx = EvalCtx {
        store: &store,
        structure: m,
        universe: &m.atoms(),
        dynamics: &[],
        threshold,
    };
    eval_sentence(&ctx, &f).unwrap()
}

#[test]
fn parsed_sentences_match_direct_graph_facts() {
    for g in (1..=3).flat_map(all_graphs) {
        let edges = &g.rels["R"];
        let has_edge = !edges.is_empty();
        let isolated = (0..g.n()).any(|v| !edges.iter().any(|e| e[0] == v));
        let fo = |text: &str| holds(&g, text, Dialect::Fo, Bound::Infinite);
        assert_eq!(fo("exists x (exists y (R(x, y)))"), has_edge);
        assert_eq!(fo("exists x (!(exists y (R(x, y))))"), isolated);
        assert!(fo("forall x (forall y (R(x, y) -> R(y, x)))"));
        assert!(fo("forall x (!R(x, x))"));
        assert_eq!(fo("forall x (exists y (R(x, y)))"), !isolated);
    }
}

#[test]
fn counting_atoms_match_direct_counts() {
    for n in 1..=6 {
        for p in 0..=n {
            let m = unary_structure(n, p).unwrap();
            for t in 0..=3u64 {
                let bound = TimingFunction::Const(t).value(n as u64);
                assert_eq!(
                    holds(&m, "Qt x (P(x))", Dialect::CardT, bound),
                    p as u64 > t,
                    "Qt on |P| = {p} against {t}"
                );
            }
            assert_eq!(
                holds(&m, &format!("card{{x : P(x)}} = {p}"), Dialect::Card, Bound::Infinite),
                true
            );
            assert_eq!(
                holds(&m, &format!("card{{x : P(x)}} = {}", p + 1), Dialect::Card, Bound::Infinite),
                false
            );
        }
    }
}

#[test]
fn two_variable_oracle_spot_checks() {
    assert!(two_var_equiv(&cycle_graph(4), &cycle_graph(5)));
    assert!(!two_var_equiv(&complete_graph(3), &cycle_graph(4)));
    // two pebbles cannot count a clique
    assert!(two_var_equiv(&complete_graph(3), &complete_graph(4)));
    let c5 = cycle_graph(5);
    assert!(two_var_equiv(&c5, &relabel(&c5, 12)));
}
