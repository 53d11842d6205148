//! Random nets shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use petriform::net::{parse_net, Bag, Kinetics, Marking, PetriNet, Transition};
use petriform::rational::{ratio, Rational};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture(name: &str) -> PetriNet {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    parse_net(&text).unwrap().net
}

/// `k/10` for `k` in `1..=100`.
pub fn random_rate(rng: &mut impl Rng) -> Rational {
    ratio(rng.random_range(1..=100), 10)
}

fn bag(rng: &mut impl Rng, places: usize, max_weight: u64, density: f64) -> Bag {
    Bag::new(
        (0..places)
            .map(|_| if rng.random_bool(density) { rng.random_range(1..=max_weight) } else { 0 })
            .collect(),
    )
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn build(places: usize, bags: Vec<(Bag, Bag)>, rng: &mut impl Rng, initial: Marking) -> PetriNet {
    let transitions = bags
        .into_iter()
        .enumerate()
        .map(|(i, (input, output))| Transition {
            id: format!("t{}", i + 1),
            input,
            output,
            rate: random_rate(rng),
        })
        .collect();
    PetriNet::new(names("p", places), transitions, initial, Kinetics::Constant).unwrap()
}

/// Up to 6 places and 8 transitions, arc weights up to 2, initial tokens
/// up to 2 per place. Half of the nets pair every transition with its
/// reverse, so that weakly reversible nets are well represented.
pub fn random_net(rng: &mut impl Rng) -> PetriNet {
    let places = rng.random_range(1..=6);
    let reversible = rng.random_bool(0.5);
    let count = if reversible { rng.random_range(1..=4) } else { rng.random_range(1..=8) };
    let density = rng.random_range(0.15..0.5);
    let mut bags: Vec<(Bag, Bag)> = (0..count)
        .map(|_| (bag(rng, places, 2, density), bag(rng, places, 2, density)))
        .collect();
    if reversible {
        let back: Vec<_> = bags.iter().map(|(i, o)| (o.clone(), i.clone())).collect();
        bags.extend(back);
    }
    let initial = Marking::new((0..places).map(|_| rng.random_range(0..=2)).collect());
    build(places, bags, rng, initial)
}

/// Union of random cycles over `nodes`; every arc lies on a cycle.
fn random_cycles(rng: &mut impl Rng, nodes: usize, cycles: usize) -> Vec<(usize, usize)> {
    let mut arcs = Vec::new();
    let all: Vec<usize> = (0..nodes).collect();
    for _ in 0..cycles {
        let len = rng.random_range(2..=nodes);
        let mut pick = all.clone();
        pick.shuffle(rng);
        pick.truncate(len);
        for i in 0..len {
            arcs.push((pick[i], pick[(i + 1) % len]));
        }
    }
    arcs
}

/// Weakly reversible generalized state machine. With `open`, the empty
/// complex takes part in the cycles; otherwise the net is closed and its
/// reachability set finite.
pub fn random_wr_gsm(rng: &mut impl Rng, open: bool) -> PetriNet {
    let places = rng.random_range(2..=5);
    let nodes = places + usize::from(open);
    let cycles = rng.random_range(1..=3);
    let unit = |n: usize| if n == places { Bag::empty(places) } else { Bag::unit(places, n) };
    let bags = random_cycles(rng, nodes, cycles).into_iter().map(|(a, b)| (unit(a), unit(b))).collect();
    let initial = Marking::new((0..places).map(|_| rng.random_range(0..=2)).collect());
    build(places, bags, rng, initial)
}

/// Weakly reversible free-choice net whose complexes are disjoint blocks of
/// places joined by random cycles.
pub fn random_wr_free_choice(rng: &mut impl Rng) -> PetriNet {
    let blocks = rng.random_range(2..=4);
    let sizes: Vec<usize> = (0..blocks).map(|_| rng.random_range(1..=2)).collect();
    let places: usize = sizes.iter().sum();
    let mut start = 0;
    let complexes: Vec<Bag> = sizes
        .iter()
        .map(|&s| {
            let mut w = vec![0; places];
            w[start..start + s].iter_mut().for_each(|x| *x = 1);
            start += s;
            Bag::new(w)
        })
        .collect();
    let cycles = rng.random_range(1..=3);
    let bags = random_cycles(rng, blocks, cycles)
        .into_iter()
        .map(|(a, b)| (complexes[a].clone(), complexes[b].clone()))
        .collect();
    let initial = Marking::new((0..places).map(|_| rng.random_range(0..=2)).collect());
    build(places, bags, rng, initial)
}
