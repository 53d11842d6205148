//! Complexes, the reaction graph, the incidence matrices `N` and `A`,
//! deficiency, weak reversibility, clusters and net classes.

use std::cmp::Reverse;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{self, Components};
use crate::net::{Complex, PetriNet};
use crate::rational::{int, RationalMatrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("clusters are only defined for non-weighted nets")]
    WeightedNet,
}

/// All complexes of `net`, in decreasing lexicographic order of their weight
/// vectors (so the empty complex, if present, comes last).
pub fn complexes(net: &PetriNet) -> Vec<Complex> {
    let mut out: Vec<Complex> = net
        .transitions()
        .iter()
        .flat_map(|t| [t.input.clone(), t.output.clone()])
        .collect();
    out.sort_by_key(|c| Reverse(c.clone()));
    out.dedup();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ReactionArc {
    pub source: usize,
    pub transition: usize,
    pub target: usize,
}

/// Graph on complexes with one arc `I(t) -> O(t)` per transition.
#[derive(Clone, Debug)]
pub struct ReactionGraph {
    pub complexes: Vec<Complex>,
    pub arcs: Vec<ReactionArc>,
    /// Weakly connected component of each complex.
    pub component: Vec<usize>,
    /// Number of weakly connected components, `ℓ`.
    pub linkage_classes: usize,
    index: HashMap<Complex, usize>,
}

impl ReactionGraph {
    pub fn index_of(&self, c: &Complex) -> Option<usize> {
        self.index.get(c).copied()
    }

    /// Complex index of the input bag of each transition.
    pub fn source_of(&self, t: usize) -> usize {
        self.arcs[t].source
    }

    pub fn target_of(&self, t: usize) -> usize {
        self.arcs[t].target
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.complexes.len()];
        for a in &self.arcs {
            adj[a.source].push(a.target);
        }
        adj
    }

    pub fn strong_components(&self) -> Components {
        graph::strongly_connected(&self.adjacency())
    }

    /// Complex indices of each weak component.
    pub fn component_members(&self) -> Vec<Vec<usize>> {
        Components {
            component: self.component.clone(),
            count: self.linkage_classes,
        }
        .members()
    }

    /// Every weak component is strongly connected, i.e. no arc leaves its
    /// strongly connected component.
    pub fn is_weakly_reversible(&self) -> bool {
        let scc = self.strong_components();
        self.arcs.iter().all(|a| scc.component[a.source] == scc.component[a.target])
    }
}

pub fn reaction_graph(net: &PetriNet) -> ReactionGraph {
    let complexes = complexes(net);
    let index: HashMap<Complex, usize> = complexes.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    let arcs: Vec<ReactionArc> = net
        .transitions()
        .iter()
        .enumerate()
        .map(|(t, tr)| ReactionArc {
            source: index[&tr.input],
            transition: t,
            target: index[&tr.output],
        })
        .collect();
    let weak = graph::weakly_connected(complexes.len(), arcs.iter().map(|a| (a.source, a.target)));
    ReactionGraph {
        complexes,
        arcs,
        component: weak.component,
        linkage_classes: weak.count,
        index,
    }
}

/// `N[p][t] = O(t)_p - I(t)_p`.
pub fn incidence_matrix(net: &PetriNet) -> RationalMatrix {
    RationalMatrix::from_fn(net.place_count(), net.transition_count(), |p, t| {
        let tr = net.transition(t);
        int(tr.output.get(p) as i64 - tr.input.get(p) as i64)
    })
}

/// `A[C][t] = -[I(t) = C] + [O(t) = C]`, rows in [`complexes`] order.
pub fn node_arc_matrix(net: &PetriNet) -> RationalMatrix {
    node_arc_of(&reaction_graph(net))
}

fn node_arc_of(g: &ReactionGraph) -> RationalMatrix {
    let mut a = RationalMatrix::zeros(g.complexes.len(), g.arcs.len());
    for arc in &g.arcs {
        a[(arc.source, arc.transition)] -= int(1);
        a[(arc.target, arc.transition)] += int(1);
    }
    a
}

pub fn deficiency(net: &PetriNet) -> usize {
    analyze(net).deficiency
}

pub fn is_weakly_reversible(net: &PetriNet) -> bool {
    reaction_graph(net).is_weakly_reversible()
}

/// Some arc weight exceeds one.
pub fn is_weighted(net: &PetriNet) -> bool {
    net.transitions()
        .iter()
        .any(|t| t.input.max_weight() > 1 || t.output.max_weight() > 1)
}

/// A cluster: the least set of nodes closed under `t ↦ •t` and `p ↦ p•`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cluster {
    pub places: Vec<usize>,
    pub transitions: Vec<usize>,
}

/// Partition of places and transitions into clusters. Clusters are exactly
/// the connected pieces of the graph formed by input arcs alone; they are
/// listed by smallest member, places before transitions.
pub fn clusters(net: &PetriNet) -> Result<Vec<Cluster>, StructureError> {
    if is_weighted(net) {
        return Err(StructureError::WeightedNet);
    }
    let np = net.place_count();
    let edges = net
        .transitions()
        .iter()
        .enumerate()
        .flat_map(|(t, tr)| tr.input.support().map(move |p| (p, np + t)));
    let weak = graph::weakly_connected(np + net.transition_count(), edges);
    Ok(weak
        .members()
        .into_iter()
        .map(|nodes| {
            let (places, transitions): (Vec<usize>, Vec<usize>) = nodes.into_iter().partition(|&v| v < np);
            Cluster {
                places,
                transitions: transitions.into_iter().map(|v| v - np).collect(),
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetClass {
    pub weighted: bool,
    pub free_choice: bool,
    pub state_machine: bool,
    pub generalized_state_machine: bool,
}

/// Class flags. Weighted nets get every class flag false.
pub fn classify(net: &PetriNet) -> NetClass {
    if is_weighted(net) {
        return NetClass {
            weighted: true,
            ..NetClass::default()
        };
    }
    let ts = net.transitions();
    let size = |b: &Complex| b.support_size();
    let state_machine = ts.iter().all(|t| size(&t.input) == 1 && size(&t.output) == 1);
    let generalized_state_machine = ts.iter().all(|t| size(&t.input) <= 1 && size(&t.output) <= 1);
    let free_choice = ts.iter().enumerate().all(|(i, a)| {
        ts[i + 1..].iter().all(|b| {
            a.input == b.input || a.input.support().all(|p| b.input.get(p) == 0)
        })
    });
    NetClass {
        weighted: false,
        free_choice,
        state_machine,
        generalized_state_machine,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub places: Vec<String>,
    pub transitions: Vec<String>,
}

/// Everything the structural analysis knows about a net.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    pub places: usize,
    pub transitions: usize,
    pub complexes: Vec<String>,
    pub complex_count: usize,
    pub linkage_classes: usize,
    pub rank_n: usize,
    pub rank_a: usize,
    pub deficiency: usize,
    pub weakly_reversible: bool,
    #[serde(flatten)]
    pub class: NetClass,
    /// `None` for weighted nets.
    pub clusters: Option<Vec<ClusterReport>>,
}

pub fn analyze(net: &PetriNet) -> StructureReport {
    let g = reaction_graph(net);
    let rank_n = incidence_matrix(net).rank();
    let rank_a = node_arc_of(&g).rank();
    let c = g.complexes.len();
    assert!(c <= 2 * net.transition_count(), "more complexes than transition endpoints");
    assert_eq!(rank_a, c - g.linkage_classes, "rank(A) must equal |C| - ℓ");
    assert!(rank_n <= rank_a, "rank(N) cannot exceed rank(A)");
    let deficiency = c - g.linkage_classes - rank_n;
    debug_assert_eq!(deficiency, rank_a - rank_n);

    let clusters = clusters(net).ok().map(|cs| {
        cs.into_iter()
            .map(|cl| ClusterReport {
                places: cl.places.iter().map(|&p| net.places()[p].clone()).collect(),
                transitions: cl.transitions.iter().map(|&t| net.transition(t).id.clone()).collect(),
            })
            .collect()
    });

    StructureReport {
        places: net.place_count(),
        transitions: net.transition_count(),
        complexes: g.complexes.iter().map(|c| net.bag_label(c)).collect(),
        complex_count: c,
        linkage_classes: g.linkage_classes,
        rank_n,
        rank_a,
        deficiency,
        weakly_reversible: g.is_weakly_reversible(),
        class: classify(net),
        clusters,
    }
}
