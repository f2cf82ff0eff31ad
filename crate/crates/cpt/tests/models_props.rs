mod common;

use common::canonical_code;
use cpt::models::{
    canonical_system, canonical_witness, check_qe, check_random, gen_random_graph, relabel,
    unary_structure,
};
use cpt::scheme::TimingFunction;
use cpt::symmetry::witness::check_witness;
use proptest::prelude::*;

proptest! {
    /// Raising the realizer demand can only lose witnesses.
    #[test]
    fn randomness_is_monotone_in_demand(n in 5usize..=8, seed in 0u64..500, c in 1u64..=3) {
        let m = gen_random_graph(n, 0.5, seed).unwrap();
        if check_random(&m, 2, &TimingFunction::Const(c + 1)).pass() {
            prop_assert!(check_random(&m, 2, &TimingFunction::Const(c)).pass());
        }
    }

    /// One realizer per small type already gives one-point extensions.
    #[test]
    fn randomness_gives_quantifier_elimination(n in 5usize..=8, seed in 0u64..500) {
        let m = gen_random_graph(n, 0.5, seed).unwrap();
        prop_assume!(check_random(&m, 2, &TimingFunction::Const(1)).pass());
        let rep = check_qe(&m, 2, false);
        prop_assert!(rep.pass(), "{:?}", rep.first_failure());
    }

    #[test]
    fn unary_counting_elimination_always_holds(n in 1usize..=8, p_frac in 0usize..=8, k in 1usize..=3) {
        let m = unary_structure(n, p_frac.min(n)).unwrap();
        let rep = check_qe(&m, k, true);
        prop_assert!(rep.pass(), "{:?}", rep.first_failure());
    }

    #[test]
    fn generation_is_deterministic_and_relabel_preserves_isomorphism(
        n in 2usize..=5, p in 0.2f64..0.8, seed in 0u64..300, relabel_seed in 0u64..50,
    ) {
        let a = gen_random_graph(n, p, seed).unwrap();
        let b = gen_random_graph(n, p, seed).unwrap();
        prop_assert_eq!(&a.rels, &b.rels);
        let c = relabel(&a, relabel_seed);
        prop_assert_eq!(canonical_code(&a), canonical_code(&c));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Canonical constructions come out passing their own checkers whenever
    /// the randomness precondition holds.
    #[test]
    fn canonical_outputs_validate(n in 5usize..=7, seed in 0u64..200, relabel_seed in 0u64..50) {
        let m = gen_random_graph(n, 0.5, seed).unwrap();
        prop_assume!(check_random(&m, 2, &TimingFunction::Const(1)).pass());
        let t_fun = TimingFunction::parse("poly 1").unwrap();
        prop_assert!(canonical_system(&m, 1, 2, &t_fun).is_ok());
        let m2 = relabel(&m, relabel_seed);
        let (w, y1, y2) = canonical_witness(&m, &m2, 1, 2, &t_fun).unwrap();
        let rep = check_witness(&w, &y1, &y2, &[]).unwrap();
        prop_assert!(rep.pass(), "{:?}", rep.first_failure());
    }
}
