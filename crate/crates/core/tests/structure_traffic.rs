mod common;

use std::collections::HashMap;

use common::{fixture, random_net, random_rate, random_wr_free_choice, random_wr_gsm};
use petriform::net::{Bag, Kinetics, Marking, PetriNet, Transition};
use petriform::oracle::rng_for;
use petriform::product_form::InvariantMeasure;
use petriform::rational::{int, to_f64, Rational, RationalMatrix};
use petriform::structure;
use petriform::traffic::{self, NlteOutcome, DEFAULT_TOLERANCE};
use proptest::prelude::*;
use rand::Rng;

/// A state machine with random arcs; not necessarily weakly reversible.
fn random_sm(seed: u64) -> PetriNet {
    let mut rng = rng_for(seed, 9);
    let places = rng.random_range(2..=5);
    let transitions = (0..rng.random_range(1..=7))
        .map(|i| Transition {
            id: format!("t{i}"),
            input: Bag::unit(places, rng.random_range(0..places)),
            output: Bag::unit(places, rng.random_range(0..places)),
            rate: random_rate(&mut rng),
        })
        .collect();
    let names = (0..places).map(|i| format!("s{i}")).collect();
    PetriNet::new(names, transitions, Marking::zeros(places), Kinetics::Constant).unwrap()
}

fn solved(net: &PetriNet) -> traffic::Solved {
    match traffic::solve_nlte(net, DEFAULT_TOLERANCE).unwrap() {
        NlteOutcome::Solved(s) => *s,
        NlteOutcome::NoSolution(w) => panic!("no solution: {w:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn ranks_and_kernels(seed in any::<u64>()) {
        let net = random_net(&mut rng_for(seed, 10));
        let r = structure::analyze(&net);
        prop_assert!(r.rank_n <= r.rank_a);
        prop_assert_eq!(r.rank_a, r.complex_count - r.linkage_classes);
        prop_assert!(r.complex_count <= 2 * r.transitions);
        let n = structure::incidence_matrix(&net);
        for x in structure::node_arc_matrix(&net).kernel_basis() {
            prop_assert!(n.mul_vec(&x).iter().all(|v| *v == int(0)));
        }
    }

    #[test]
    fn lte_positive_iff_weakly_reversible(seed in any::<u64>()) {
        let net = random_net(&mut rng_for(seed, 11));
        let lte = traffic::solve_lte(&net);
        prop_assert_eq!(lte.is_ok(), structure::is_weakly_reversible(&net));
        if let Ok(lte) = lte {
            prop_assert!(traffic::verify_lte(&net, &lte.v));
            prop_assert!(lte.v.iter().all(|v| *v > int(0)));
        }
    }

    #[test]
    fn b_matrix_exists_iff_deficiency_zero(seed in any::<u64>()) {
        let net = random_net(&mut rng_for(seed, 12));
        let b = traffic::solve_b_matrix(&net);
        prop_assert_eq!(b.is_some(), structure::deficiency(&net) == 0);
        if let Some(b) = b {
            prop_assert!(&b.matrix * &structure::incidence_matrix(&net) == structure::node_arc_matrix(&net));
        }
    }

    #[test]
    fn deficiency_zero_reversible_nets_solve_the_nlte(seed in any::<u64>()) {
        let net = random_net(&mut rng_for(seed, 13));
        let r = structure::analyze(&net);
        prop_assume!(r.weakly_reversible && r.deficiency == 0);
        let s = solved(&net);
        let residual = traffic::verify_nlte(&net, &s.nlte.u).unwrap();
        prop_assert!(residual < 1e-9, "residual {}", residual);

        // v_C = Π_p u_p^{C_p} solves the linear equations.
        let g = structure::reaction_graph(&net);
        let v: Vec<f64> = g
            .complexes
            .iter()
            .map(|c| c.as_slice().iter().zip(&s.nlte.u).map(|(&k, u)| u.powi(k as i32)).product())
            .collect();
        let mut out = vec![0.0; v.len()];
        let mut inn = vec![0.0; v.len()];
        for a in &g.arcs {
            let k = to_f64(&net.transition(a.transition).rate);
            out[a.source] += k * v[a.source];
            inn[a.target] += k * v[a.source];
        }
        for (o, i) in out.iter().zip(&inn) {
            prop_assert!((o - i).abs() <= 1e-9 * o.max(*i));
        }
    }

    #[test]
    fn rescaling_the_lte_changes_the_measure_by_one_constant(seed in any::<u64>()) {
        let mut rng = rng_for(seed, 14);
        let net = random_net(&mut rng);
        let r = structure::analyze(&net);
        prop_assume!(r.weakly_reversible && r.deficiency == 0);
        let g = structure::reaction_graph(&net);
        let has_empty: Vec<bool> = (0..g.linkage_classes)
            .map(|l| g.complexes.iter().enumerate().any(|(c, x)| g.component[c] == l && x.is_empty()))
            .collect();
        let factors: Vec<Rational> = has_empty
            .iter()
            .map(|&e| if e { int(1) } else { random_rate(&mut rng) })
            .collect();
        let s = solved(&net);
        let other = traffic::nlte_from_lte(&net, &s.lte.rescaled(&g, &factors), &s.b, DEFAULT_TOLERANCE).unwrap();
        let a = InvariantMeasure::new(&s.nlte.u, Kinetics::Constant).unwrap();
        let b = InvariantMeasure::new(&other.u, Kinetics::Constant).unwrap();
        let reach = net.reachability(300);
        let logs: Vec<f64> = reach.nodes().iter().map(|m| a.log_value(m) - b.log_value(m)).collect();
        let spread = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - logs.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(spread < 1e-9, "spread {}", spread);
    }

    #[test]
    fn state_machines_have_a_equal_to_n(seed in any::<u64>()) {
        let net = random_sm(seed);
        prop_assert!(structure::classify(&net).state_machine);
        let g = structure::reaction_graph(&net);
        let a = structure::node_arc_matrix(&net);
        let n = structure::incidence_matrix(&net);
        // Complex `c` is the single place it contains.
        let place: Vec<usize> = g.complexes.iter().map(|c| c.support().next().unwrap()).collect();
        let permuted = RationalMatrix::from_fn(g.complexes.len(), net.transition_count(), |c, t| n[(place[c], t)].clone());
        prop_assert!(permuted == a);
        prop_assert_eq!(structure::deficiency(&net), 0);
    }

    #[test]
    fn generalized_state_machines_have_deficiency_zero(seed in any::<u64>(), open in any::<bool>()) {
        let net = random_wr_gsm(&mut rng_for(seed, 15), open);
        prop_assert!(structure::classify(&net).generalized_state_machine);
        prop_assert_eq!(structure::deficiency(&net), 0);

        // The linear and non-linear solutions coincide with y_∅ = 1.
        let s = solved(&net);
        let log_v = s.lte.log_v();
        let empty = s.lte.complexes.iter().position(|c| c.is_empty());
        let offset = empty.map_or(0.0, |e| log_v[e]);
        for (c, complex) in s.lte.complexes.iter().enumerate() {
            if let Some(p) = complex.support().next() {
                prop_assert!((s.nlte.log_u[p] - (log_v[c] - offset)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reversible_free_choice_complexes_are_the_clusters(seed in any::<u64>()) {
        let net = random_wr_free_choice(&mut rng_for(seed, 16));
        let r = structure::analyze(&net);
        prop_assert!(r.class.free_choice && r.weakly_reversible);
        prop_assert_eq!(r.deficiency, 0);
        // Places in clusters with transitions, grouped by cluster, equal the
        // supports of the non-empty complexes.
        let mut from_clusters: Vec<Vec<usize>> = structure::clusters(&net)
            .unwrap()
            .into_iter()
            .filter(|c| !c.transitions.is_empty())
            .map(|c| c.places)
            .collect();
        let mut from_complexes: Vec<Vec<usize>> = structure::complexes(&net)
            .into_iter()
            .filter(|c| !c.is_empty())
            .map(|c| c.support().collect())
            .collect();
        from_clusters.sort();
        from_complexes.sort();
        prop_assert_eq!(from_clusters, from_complexes);
    }
}

#[test]
fn cycle_structure_and_solution() {
    let net = fixture("three_complex_cycle.net");
    let s = solved(&net);
    let k = [1.0f64, 2.0, 3.0];
    let closed = [(k[1] / k[0]).sqrt(), 1.0, (k[0] * k[1]).sqrt() / k[2]];
    // u is fixed up to exp(w) with w ⟂ the stoichiometric space; compare ratios
    // along the directions the net can move in.
    let n = structure::incidence_matrix(&net);
    for t in 0..3 {
        let along = |u: &[f64]| (0..3).map(|p| to_f64(&n[(p, t)]) * u[p].ln()).sum::<f64>();
        assert!((along(&s.nlte.u) - along(&closed)).abs() < 1e-12);
    }
    assert!(s.b.aligned);
}

#[test]
fn fixtures_quadrants() {
    let cases = [
        ("dining_philosophers.net", true, 0),
        ("non_wr_zero_deficiency.net", false, 0),
        ("two_pair_exchange.net", true, 1),
        ("non_wr_positive_deficiency.net", false, 1),
        ("non_wr_product_form.net", false, 1),
    ];
    for (name, wr, delta) in cases {
        let r = structure::analyze(&fixture(name));
        assert_eq!((r.weakly_reversible, r.deficiency), (wr, delta), "{name}");
    }
    let r = structure::analyze(&fixture("two_pair_exchange.net"));
    assert_eq!((r.rank_a, r.rank_n), (3, 2));
}

#[test]
fn classes_of_the_small_fixtures() {
    let class = |n: &str| structure::classify(&fixture(n));
    assert!(class("state_machine.net").state_machine);
    let gsm = class("source_sink_gsm.net");
    assert!(gsm.generalized_state_machine && !gsm.state_machine);
    assert!(class("source_sink_gsm_associated_sm.net").state_machine);
    assert!(class("free_choice.net").free_choice);
    assert!(!class("non_free_choice.net").free_choice);
    let weighted = structure::classify(&fixture("three_complex_cycle.net"));
    assert!(weighted.weighted && !weighted.free_choice);
}

#[test]
fn no_solution_verdicts() {
    let verdict = |name: &str| match traffic::solve_nlte(&fixture(name), DEFAULT_TOLERANCE).unwrap() {
        NlteOutcome::NoSolution(w) => Some((w.reason, w.existence)),
        NlteOutcome::Solved(_) => None,
    };
    use traffic::{Existence, NoSolutionReason};
    assert_eq!(
        verdict("two_pair_exchange.net"),
        Some((NoSolutionReason::DeficiencyPositive, Existence::Unknown))
    );
    assert_eq!(
        verdict("non_wr_zero_deficiency.net"),
        Some((NoSolutionReason::NotWeaklyReversible, Existence::Impossible))
    );
    assert_eq!(verdict("dining_philosophers.net"), None);
}

#[test]
fn component_references_pin_one_complex_each() {
    let net = fixture("dining_philosophers.net");
    let lte = traffic::solve_lte(&net).unwrap();
    let g = structure::reaction_graph(&net);
    assert_eq!(lte.reference.len(), g.linkage_classes);
    let mut seen = HashMap::new();
    for &c in &lte.reference {
        assert_eq!(lte.v[c], int(1));
        assert!(seen.insert(g.component[c], c).is_none());
    }
}
