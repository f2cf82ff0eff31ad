//! The ten acceptance criteria, one printed line each.  Run with
//! `cargo test --test acceptance -- --nocapture` to watch the lines.

mod common;

use common::{
    all_graphs, brute_next_universe, nonisomorphic_graphs, qf_and_depth1_formulas, random_scheme,
    random_structure, two_var_equiv,
};
use cpt::logic::{Dialect, Formula, Structure, Term};
use cpt::models::{
    battery, canonical_system, check_random, cycle_graph, experiment_majority, experiment_transfer,
    experiment_unary, gen_random_graph, graph_vocab, paley_graph, qf_pair_formulas, relabel,
    transfer_battery, unary_structure, ExperimentReport,
};
use cpt::scheme::{
    initial_candidate, run, successor, StopReason, StopVariant, TimingFunction, TruthValue,
};
use cpt::symmetry::ksystem::{check_dichotomy, check_k_system, check_super, DichotomyMode};
use cpt::symmetry::lifting::{check_lifting, full_successor, preservation_check, true_successor, zero_lifting};
use cpt::symmetry::support_logic::{check_discipline, support_game_equiv, support_logic_sat, SFormula};
use cpt::symmetry::{KSystem, SupportFamily};
use cpt::Bound;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

struct Bench {
    failures: Vec<usize>,
}

impl Bench {
    fn criterion(
        &mut self,
        n: usize,
        budget: Option<Duration>,
        body: impl FnOnce() -> Result<String, String>,
    ) {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(body));
        let elapsed = t0.elapsed();
        let (mut pass, mut detail) = match outcome {
            Ok(Ok(d)) => (true, d),
            Ok(Err(d)) => (false, d),
            Err(p) => {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".to_string());
                (false, msg.replace('\n', " "))
            }
        };
        if pass {
            if let Some(b) = budget {
                if elapsed > b {
                    pass = false;
                    detail = format!("over budget: {elapsed:.1?} against {b:?}; {detail}");
                }
            }
        }
        if !pass {
            self.failures.push(n);
        }
        println!(
            "criterion {n}: {} ({:.1?}; {detail})",
            if pass { "pass" } else { "FAIL" },
            elapsed
        );
    }
}

fn trace_fingerprint(
    m: &Structure,
    u: &cpt::scheme::InductiveScheme,
    t_fun: &TimingFunction,
    variant: StopVariant,
    chi: &Formula,
) -> String {
    let mut store = m.store();
    let (verdict, trace) = run(&mut store, m, u, t_fun, variant, chi).expect("run completes");
    format!("{verdict}|{}", serde_json::to_string(&trace).expect("trace serializes"))
}

fn sentence_battery() -> Vec<SFormula> {
    let x = || Term::Var("x".to_string());
    let y = || Term::Var("y".to_string());
    let r = |a: Term, b: Term| Formula::Pred("R".to_string(), vec![a, b]);
    let atom = |f: Formula| SFormula::Atom(f);
    let ex = |v: &str, body: SFormula| SFormula::ExistsBlock(vec![v.to_string()], Box::new(body));
    let all = |v: &str, body: SFormula| ex(v, body.not()).not();
    vec![
        ex("x", atom(r(x(), x()))),
        ex("x", ex("y", atom(r(x(), y())))),
        all("x", ex("y", atom(r(x(), y())))),
        ex("x", all("y", atom(r(x(), y())).not())),
        ex("x", ex("y", atom(Formula::Eq(x(), y()).not()))),
        ex("x", ex("y", SFormula::And(vec![
            atom(Formula::Eq(x(), y()).not()),
            atom(r(x(), y())).not(),
        ]))),
        all("x", all("y", SFormula::Or(vec![atom(Formula::Eq(x(), y())), atom(r(x(), y()))]))),
        ex("y", all("x", SFormula::Or(vec![atom(Formula::Eq(x(), y())), atom(r(x(), y()))]))),
        ex("y", SFormula::And(vec![
            ex("x", atom(r(x(), y()))),
            ex("x", SFormula::And(vec![
                atom(r(x(), y())).not(),
                atom(Formula::Eq(x(), y()).not()),
            ])),
        ])),
        all("y", ex("x", SFormula::And(vec![
            atom(r(x(), y())).not(),
            atom(Formula::Eq(x(), y()).not()),
        ]))),
    ]
}

#[test]
fn acceptance() {
    let mut bench = Bench { failures: Vec::new() };
    let poly1 = TimingFunction::parse("poly 1").unwrap();
    let mut sample: Option<Structure> = None;
    let mut y4: Option<KSystem> = None;
    let mut rep5: Option<ExperimentReport> = None;
    let mut rep6: Option<ExperimentReport> = None;
    let mut rep7: Option<ExperimentReport> = None;

    // 1. successor determinism on randomized (M, U) pairs
    bench.criterion(1, Some(Duration::from_secs(10)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA1CE);
        for i in 0..100 {
            let m = random_structure(&mut rng);
            let u = random_scheme(&mut rng, &m.vocab);
            let t_fun = TimingFunction::Const(rng.gen_range(2..6));
            let variant = if u.is_pure() && i % 3 == 0 {
                StopVariant::CHalt
            } else {
                StopVariant::CostBudget
            };
            let chi = cpt::logic::parse::parse_formula("exists x (x = x)", &m.vocab, Dialect::Fo)
                .expect("chi parses");
            let a = trace_fingerprint(&m, &u, &t_fun, variant, &chi);
            let b = trace_fingerprint(&m, &u, &t_fun, variant, &chi);
            if a != b {
                return Err(format!("pair {i} diverged on {}", m.name));
            }
        }
        Ok("100 randomized pairs, bit-identical traces".to_string())
    });

    // 2. successor against the brute-force subset oracle
    bench.criterion(2, Some(Duration::from_secs(60)), || {
        let mut structures: Vec<Structure> = (1..=4).flat_map(all_graphs).collect();
        for n in 1..=4 {
            for p in 0..=n {
                structures.push(unary_structure(n, p).expect("legal sizes"));
            }
        }
        let timings = [TimingFunction::Infinity, TimingFunction::Const(2)];
        let mut transitions = 0usize;
        for m in &structures {
            let entries = transfer_battery(&m.vocab).expect("battery parses");
            for entry in &entries {
                if entry.scheme.metrics().1 > 1 {
                    return Err(format!("{} takes parameter tuples wider than 1", entry.name));
                }
                for t_fun in &timings {
                    let mut store = m.store();
                    let mut cand = initial_candidate(m, &entry.scheme);
                    for _ in 0..2 {
                        let expected =
                            brute_next_universe(&mut store, m, &entry.scheme, t_fun, &cand);
                        let (next, _) = successor(&mut store, m, &entry.scheme, t_fun, &cand)
                            .expect("successor");
                        if next.universe != expected {
                            return Err(format!(
                                "universe mismatch: {} on {} under {t_fun}",
                                entry.name, m.name
                            ));
                        }
                        transitions += 1;
                        cand = next;
                    }
                }
            }
        }
        Ok(format!(
            "{} structures, 5 schemes, {transitions} transitions equal the subset oracle",
            structures.len()
        ))
    });

    // 3. budget exactness of the size-budget variant on the cascade
    bench.criterion(3, None, || {
        let m = cycle_graph(4);
        let entries = transfer_battery(&graph_vocab()).expect("battery parses");
        let cascade = entries.iter().find(|e| e.name == "cascade").expect("cascade entry");
        let mut store = m.store();
        let (verdict, trace) = run(
            &mut store,
            &m,
            &cascade.scheme,
            &poly1,
            StopVariant::SizeBudget,
            &cascade.chi,
        )
        .expect("run");
        if verdict.value != TruthValue::Undefined
            || verdict.stop_time != Some(0)
            || verdict.reason != StopReason::Budget
        {
            return Err(format!("variant 3 under poly 1 gave {verdict}"));
        }
        if trace.len() != 2 || trace[0].universe_size != 4 || trace[1].universe_size != 8 {
            return Err("trace does not show the 4 to 8 overflow".to_string());
        }
        let (verdict, _) = run(
            &mut store,
            &m,
            &cascade.scheme,
            &TimingFunction::Infinity,
            StopVariant::CostBudget,
            &cascade.chi,
        )
        .expect("run");
        if verdict.value == TruthValue::Undefined || verdict.reason != StopReason::Halted {
            return Err(format!("the infinite bound still gave {verdict}"));
        }
        let mut cand = initial_candidate(&m, &cascade.scheme);
        for t in 0..5 {
            let (next, _) =
                successor(&mut store, &m, &cascade.scheme, &TimingFunction::Infinity, &cand)
                    .expect("successor");
            if next.universe.len() != 4 * (t + 2) {
                return Err(format!("stage {} has size {}", t + 1, next.universe.len()));
            }
            if Bound::Infinite.exceeded_by(next.universe.len() as u64) {
                return Err("the infinite bound reported an overflow".to_string());
            }
            cand = next;
        }
        Ok("overflow at stage 1 under poly 1, never under the infinite bound".to_string())
    });

    // 4. canonical system on a (3, const 3)-random 17-vertex sample
    bench.criterion(4, Some(Duration::from_secs(300)), || {
        let demand = TimingFunction::Const(3);
        let found = (0..64)
            .map(|seed| gen_random_graph(17, 0.5, seed).expect("probability in range"))
            .find(|g| check_random(g, 3, &demand).pass());
        let (m, provenance) = match found {
            Some(g) => {
                let name = g.name.clone();
                (g, format!("sample {name}"))
            }
            None => {
                let p = paley_graph(17).expect("17 = 1 mod 4");
                if !check_random(&p, 3, &demand).pass() {
                    return Err("the Paley graph is not (3, const 3)-random".to_string());
                }
                (p, "no G(17,1/2) seed in 0..64 qualifies; Paley(17) does and stands in".to_string())
            }
        };
        let y = canonical_system(&m, 1, 3, &poly1).map_err(|e| e.to_string())?;
        let rep = check_k_system(&y);
        if !rep.pass() {
            return Err(format!("k-system: {:?}", rep.first_failure()));
        }
        let formulas = qf_pair_formulas(&m).map_err(|e| e.to_string())?;
        let (rep, _) = check_dichotomy(&y, &DichotomyMode::Definable(&formulas))
            .map_err(|e| e.to_string())?;
        if !rep.pass() {
            return Err(format!("dichotomy: {:?}", rep.first_failure()));
        }
        let detail = format!("{provenance}; |F| = {}, all clauses and the dichotomy pass", y.f.len());
        sample = Some(m);
        y4 = Some(y);
        Ok(detail)
    });

    // 5. witness validity and verdict transfer between two relabeled samples
    bench.criterion(5, None, || {
        let m = sample.as_ref().ok_or("needs the criterion 4 sample")?;
        let m1 = relabel(m, 1);
        let m2 = relabel(m, 2);
        let entries = transfer_battery(&m1.vocab).map_err(|e| e.to_string())?;
        let rep = experiment_transfer(&m1, &m2, 1, 3, &poly1, &entries, 2)
            .map_err(|e| e.to_string())?;
        if !rep.witness_pass {
            return Err(format!("witness failed: {:?}", rep.notes));
        }
        let hard = rep
            .outcomes
            .iter()
            .filter(|o| !(o.agreed || o.exception) || !o.in_bounds)
            .count();
        if hard > 0 || !rep.pass {
            return Err(format!("{hard} hard mismatches: {:?}", rep.notes));
        }
        let detail = format!(
            "witness holds, {} battery schemes agree or stop one-sided",
            rep.outcomes.len()
        );
        rep5 = Some(rep);
        Ok(detail)
    });

    // 6. unary desk instance with thresholds met
    bench.criterion(6, None, || {
        let vocab = unary_structure(8, 3).expect("legal sizes").vocab;
        let entries = battery(&vocab).map_err(|e| e.to_string())?;
        let rep = experiment_unary(8, 3, 4, &TimingFunction::Const(2), &entries, 2)
            .map_err(|e| e.to_string())?;
        if !rep.pass {
            return Err(format!("{:?}", rep.notes));
        }
        let detail = format!("sizes 3 and 4 in 8: full agreement over {} schemes", rep.outcomes.len());
        rep6 = Some(rep);
        Ok(detail)
    });

    // 7. majority desk instance: answers differ, no scheme separates
    bench.criterion(7, None, || {
        let vocab = unary_structure(8, 4).expect("legal sizes").vocab;
        let entries = battery(&vocab).map_err(|e| e.to_string())?;
        let rep = experiment_majority(8, &TimingFunction::Const(2), &entries, 2)
            .map_err(|e| e.to_string())?;
        if !rep.pass {
            return Err(format!("{:?}", rep.notes));
        }
        if !rep.notes.iter().any(|n| n.contains("majority answers differ")) {
            return Err("missing the differing-majority note".to_string());
        }
        let detail = format!("majorities 4 against 3, {} schemes all agree", rep.outcomes.len());
        rep7 = Some(rep);
        Ok(detail)
    });

    // 8. lifting laws on the 5-cycle system
    bench.criterion(8, Some(Duration::from_secs(120)), || {
        let m = cycle_graph(5);
        let y = canonical_system(&m, 1, 3, &poly1).map_err(|e| e.to_string())?;
        let mut store = m.store();
        let z0 = zero_lifting(&y, &store, 0);
        let rep = check_lifting(&y, &store, &z0);
        if !rep.pass() {
            return Err(format!("zero lifting: {:?}", rep.first_failure()));
        }
        let z1 = full_successor(&y, &mut store, &z0).map_err(|e| e.to_string())?;
        let rep = check_lifting(&y, &store, &z1);
        if !rep.pass() {
            return Err(format!("full successor: {:?}", rep.first_failure()));
        }
        let entries = battery(&graph_vocab()).map_err(|e| e.to_string())?;
        let singleton = &entries.iter().find(|e| e.name == "singleton").expect("singleton").scheme;
        let z1t = true_successor(&y, &mut store, &z0, singleton).map_err(|e| e.to_string())?;
        let rep = check_lifting(&y, &store, &z1t);
        if !rep.pass() {
            return Err(format!("true successor: {:?}", rep.first_failure()));
        }
        let formulas = qf_and_depth1_formulas(&m.vocab);
        for phi in &formulas {
            let rep = preservation_check(&y, &store, &z1, phi, 3, 1).map_err(|e| e.to_string())?;
            if !rep.pass() {
                return Err(format!("`{phi}`: {:?}", rep.first_failure()));
            }
        }
        Ok(format!(
            "zero, full and true successors check out; {} formulas preserved across {} maps",
            formulas.len(),
            y.f.len()
        ))
    });

    // 9. the counting variant of criteria 4 through 7
    bench.criterion(9, None, || {
        let y = y4.as_ref().ok_or("needs the criterion 4 system")?;
        let rep = check_super(y).map_err(|e| e.to_string())?;
        if !rep.pass() {
            return Err(format!("super on the sample system: {:?}", rep.first_failure()));
        }
        for (name, rep) in [("transfer", &rep5), ("unary", &rep6), ("majority", &rep7)] {
            let rep = rep.as_ref().ok_or(format!("needs the {name} report"))?;
            if !rep.super_pass {
                return Err(format!("super failed inside the {name} experiment"));
            }
            let probe = rep
                .outcomes
                .iter()
                .find(|o| o.scheme == "card_probe")
                .ok_or(format!("no counting scheme in the {name} battery"))?;
            if !(probe.agreed || probe.exception) {
                return Err(format!("card_probe disagreed in the {name} experiment"));
            }
        }
        let entries = battery(&graph_vocab()).map_err(|e| e.to_string())?;
        let card = entries.iter().find(|e| e.name == "card_probe").expect("card_probe");
        if !card.scheme.dialect.allows_card() {
            return Err("card_probe does not use a counting dialect".to_string());
        }
        Ok("super holds on the sample and inside all three experiments; card_probe agrees".to_string())
    });

    // 10. support game soundness against the two-variable oracle
    bench.criterion(10, Some(Duration::from_secs(300)), || {
        let classes = nonisomorphic_graphs(5);
        if classes.len() != 52 {
            return Err(format!("{} isomorphism classes instead of 52", classes.len()));
        }
        let sentences = sentence_battery();
        let mut pairs = 0usize;
        let mut distinguishers = 0usize;
        for (gi, g) in classes.iter().enumerate() {
            let ig = SupportFamily::size_at_most(g.n(), 1);
            for s in &sentences {
                check_discipline(s, 2, &ig).map_err(|e| e.to_string())?;
            }
            for h in &classes[gi..] {
                let ih = SupportFamily::size_at_most(h.n(), 1);
                let res = support_game_equiv(g, &ig, h, &ih, 2).map_err(|e| e.to_string())?;
                let oracle = two_var_equiv(g, h);
                if res.equivalent != oracle {
                    return Err(format!(
                        "game says {}, the oracle says {oracle}, on {} against {}",
                        res.equivalent, g.name, h.name
                    ));
                }
                pairs += 1;
                if oracle {
                    for s in &sentences {
                        let on_g = support_logic_sat(g, &ig, s).map_err(|e| e.to_string())?;
                        let on_h = support_logic_sat(h, &ih, s).map_err(|e| e.to_string())?;
                        if on_g != on_h {
                            return Err(format!(
                                "`{s}` separates the equivalent pair {} and {}",
                                g.name, h.name
                            ));
                        }
                    }
                }
                if let Some(d) = &res.distinguisher {
                    check_discipline(d, 2, &ig).map_err(|e| e.to_string())?;
                    let on_g = support_logic_sat(g, &ig, d).map_err(|e| e.to_string())?;
                    let on_h = support_logic_sat(h, &ih, d).map_err(|e| e.to_string())?;
                    if on_g == on_h {
                        return Err(format!("distinguisher `{d}` separates nothing"));
                    }
                    distinguishers += 1;
                }
            }
            for seed in [3, 8] {
                let h = relabel(g, seed);
                let res = support_game_equiv(g, &ig, &h, &ig, 2).map_err(|e| e.to_string())?;
                if !res.equivalent || !two_var_equiv(g, &h) {
                    return Err(format!("{} differs from its own relabeling", g.name));
                }
            }
        }
        Ok(format!(
            "52 classes, {pairs} pairs match the oracle, {distinguishers} distinguishers verified, {} sentences swept",
            sentences.len()
        ))
    });

    assert!(
        bench.failures.is_empty(),
        "criteria {:?} failed",
        bench.failures
    );
}
