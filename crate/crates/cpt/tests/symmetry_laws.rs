mod common;

use common::{nonisomorphic_graphs, qf_and_depth1_formulas, two_var_equiv};
use cpt::models::{battery, canonical_system, canonical_witness, cycle_graph, graph_vocab, relabel};
use cpt::scheme::{StopVariant, TimingFunction};
use cpt::symmetry::ksystem::check_super;
use cpt::symmetry::lifting::{check_lifting, full_successor, preservation_check, true_successor, zero_lifting};
use cpt::symmetry::support_logic::{check_discipline, support_game_equiv, support_logic_sat};
use cpt::symmetry::witness::{check_witness, transfer_verdict};
use cpt::symmetry::SupportFamily;

#[test]
fn game_matches_refinement_on_small_graphs() {
    let classes = nonisomorphic_graphs(4);
    assert_eq!(classes.len(), 18);
    for g in &classes {
        for h in &classes {
            let ig = SupportFamily::size_at_most(g.n(), 1);
            let ih = SupportFamily::size_at_most(h.n(), 1);
            let res = support_game_equiv(g, &ig, h, &ih, 2).unwrap();
            let oracle = two_var_equiv(g, h);
            assert_eq!(
                res.equivalent, oracle,
                "game and refinement split on {} against {}",
                g.name, h.name
            );
            if let Some(d) = &res.distinguisher {
                assert!(!res.equivalent);
                check_discipline(d, 2, &ig).unwrap();
                let on_g = support_logic_sat(g, &ig, d).unwrap();
                let on_h = support_logic_sat(h, &ih, d).unwrap();
                assert_ne!(on_g, on_h, "distinguisher `{d}` fails to separate");
            }
        }
    }
}

#[test]
fn game_is_relabel_invariant() {
    for g in [cycle_graph(5), cpt::models::complete_graph(4)] {
        for seed in [2, 9] {
            let h = relabel(&g, seed);
            let i = SupportFamily::size_at_most(g.n(), 1);
            let res = support_game_equiv(&g, &i, &h, &i, 2).unwrap();
            assert!(res.equivalent, "{} against its relabeling", g.name);
            assert!(two_var_equiv(&g, &h));
        }
    }
}

#[test]
fn lifting_round_trip_on_five_cycle() {
    let m = cycle_graph(5);
    let t_fun = TimingFunction::parse("poly 1").unwrap();
    let y = canonical_system(&m, 1, 3, &t_fun).unwrap();
    let mut store = m.store();
    let z0 = zero_lifting(&y, &store, 0);
    let rep = check_lifting(&y, &store, &z0);
    assert!(rep.pass(), "zero lifting: {:?}", rep.first_failure());

    let z1 = full_successor(&y, &mut store, &z0).unwrap();
    let rep = check_lifting(&y, &store, &z1);
    assert!(rep.pass(), "full successor: {:?}", rep.first_failure());
    assert!(z1.universe.len() > z0.universe.len());

    let entries = battery(&graph_vocab()).unwrap();
    let singleton = &entries.iter().find(|e| e.name == "singleton").unwrap().scheme;
    let z1t = true_successor(&y, &mut store, &z0, singleton).unwrap();
    let rep = check_lifting(&y, &store, &z1t);
    assert!(rep.pass(), "true successor: {:?}", rep.first_failure());

    let formulas = qf_and_depth1_formulas(&m.vocab);
    for phi in formulas.iter().step_by(40) {
        let rep = preservation_check(&y, &store, &z1, phi, 3, 1).unwrap();
        assert!(rep.pass(), "`{phi}`: {:?}", rep.first_failure());
    }
}

#[test]
fn five_cycle_witness_transfers_verdicts() {
    let m1 = cycle_graph(5);
    let m2 = relabel(&m1, 3);
    let t_fun = TimingFunction::parse("poly 1").unwrap();
    let (w, y1, y2) = canonical_witness(&m1, &m2, 1, 3, &t_fun).unwrap();
    let rep = check_witness(&w, &y1, &y2, &[]).unwrap();
    assert!(rep.pass(), "witness: {:?}", rep.first_failure());

    let rep = check_super(&y1).unwrap();
    assert!(rep.pass(), "super: {:?}", rep.first_failure());

    let entries = cpt::models::transfer_battery(&graph_vocab()).unwrap();
    for entry in &entries {
        let res =
            transfer_verdict(&y1, &y2, &entry.scheme, &entry.chi, StopVariant::CostBudget).unwrap();
        assert!(res.consistent(), "{}: {res:?}", entry.name);
    }
    let wide = battery(&graph_vocab()).unwrap();
    let pair = wide.iter().find(|e| e.name == "pair").unwrap();
    assert!(transfer_verdict(&y1, &y2, &pair.scheme, &pair.chi, StopVariant::CostBudget).is_err());
}
