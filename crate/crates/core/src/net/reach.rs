use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use super::{Marking, PetriNet};
use crate::graph;

/// Default bound on the number of explored markings.
pub const DEFAULT_REACHABILITY_CAP: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MarkingArc {
    pub source: usize,
    pub transition: usize,
    pub target: usize,
}

/// The reachable part of the marking graph explored so far. Node 0 is the
/// initial marking. When `truncated` is false the node set is exactly the
/// reachability set; otherwise it holds the first `cap` markings in
/// breadth-first order and the arcs among them.
#[derive(Clone, Debug)]
pub struct MarkingGraph {
    nodes: Vec<Marking>,
    arcs: Vec<MarkingArc>,
    index: HashMap<Marking, usize>,
    truncated: bool,
}

impl MarkingGraph {
    pub fn nodes(&self) -> &[Marking] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[MarkingArc] {
        &self.arcs
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn origin(&self) -> &Marking {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, m: &Marking) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Successor lists with duplicate targets collapsed.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for a in &self.arcs {
            adj[a.source].push(a.target);
        }
        for succ in &mut adj {
            succ.sort_unstable();
            succ.dedup();
        }
        adj
    }

    pub fn is_strongly_connected(&self) -> bool {
        graph::is_strongly_connected(&self.adjacency())
    }
}

/// BFS over markings. Successors of a node are visited in increasing
/// lexicographic order of the target marking (ties by transition order), so
/// node and arc order are deterministic and the node set for a smaller cap
/// is always a prefix of the node set for a larger one.
pub(super) fn explore(net: &PetriNet, cap: usize) -> MarkingGraph {
    let cap = cap.max(1);
    let origin = net.initial_marking().clone();
    let mut nodes = vec![origin.clone()];
    let mut index = HashMap::from([(origin, 0)]);
    let mut arcs = Vec::new();
    let mut truncated = false;
    let mut queue = VecDeque::from([0usize]);

    while let Some(source) = queue.pop_front() {
        let m = nodes[source].clone();
        let mut successors: Vec<(Marking, usize)> = net
            .enabled(&m)
            .into_iter()
            .map(|t| (net.fire(&m, t).expect("enabled transition fires"), t))
            .collect();
        successors.sort();
        for (next, transition) in successors {
            let target = match index.get(&next) {
                Some(&k) => k,
                None if nodes.len() < cap => {
                    let k = nodes.len();
                    index.insert(next.clone(), k);
                    nodes.push(next);
                    queue.push_back(k);
                    k
                }
                None => {
                    truncated = true;
                    continue;
                }
            };
            arcs.push(MarkingArc {
                source,
                transition,
                target,
            });
        }
    }

    MarkingGraph {
        nodes,
        arcs,
        index,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_net;

    const CYCLE: &str = "places: p q r\ninit: p=2\n\
        t1: 2p -> p + q + r @ 1\nt2: 2q -> 2p @ 1\nt3: p + q + r -> 2q @ 1\n";

    #[test]
    fn bounded_cycle_has_three_markings() {
        let net = parse_net(CYCLE).unwrap().net;
        let g = net.reachability(DEFAULT_REACHABILITY_CAP);
        assert!(!g.truncated());
        let expected: Vec<Marking> = [[2, 0, 0], [1, 1, 1], [0, 2, 0]]
            .iter()
            .map(|m| Marking::new(m.to_vec()))
            .collect();
        assert_eq!(g.nodes(), expected.as_slice());
        assert_eq!(g.arcs().len(), 3);
        assert!(g.is_strongly_connected());
    }

    #[test]
    fn unbounded_variant_is_truncated() {
        let net = parse_net(&CYCLE.replace("init: p=2", "init: p=3")).unwrap().net;
        let g = net.reachability(50);
        assert!(g.truncated());
        assert_eq!(g.len(), 50);
    }

    #[test]
    fn non_weakly_reversible_example_has_nine_states() {
        let net = parse_net(
            "places: p1 p2 p3 p4\ninit: p1=1 p2=1 p3=1 p4=1\n\
             t1: p1 -> p2 + p4 @ 1\nt2: p2 -> p3 @ 1\nt3: p3 + p4 -> p1 @ 1\n",
        )
        .unwrap()
        .net;
        let g = net.reachability(1000);
        assert!(!g.truncated());
        assert_eq!(g.len(), 9);
    }

    #[test]
    fn arcs_respect_the_firing_rule() {
        let net = parse_net(&CYCLE.replace("init: p=2", "init: p=3")).unwrap().net;
        let g = net.reachability(200);
        for a in g.arcs() {
            let m = &g.nodes()[a.source];
            let effect = net.effect(a.transition);
            let next: Vec<i64> = m
                .as_slice()
                .iter()
                .zip(&effect)
                .map(|(&x, d)| x as i64 + d)
                .collect();
            let target: Vec<i64> = g.nodes()[a.target].as_slice().iter().map(|&x| x as i64).collect();
            assert_eq!(next, target);
        }
    }
}
