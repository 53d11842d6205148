//! JSON views of nets and marking graphs, and Graphviz DOT output.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::net::{Bag, Kinetics, MarkingGraph, PetriNet};
use crate::rational::format_rational;
use crate::structure;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionJson {
    pub id: String,
    /// Place name to arc weight; zero weights omitted.
    pub input: BTreeMap<String, u64>,
    pub output: BTreeMap<String, u64>,
    /// Exact rate constant, `a` or `a/b`.
    pub rate: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetJson {
    pub places: Vec<String>,
    pub kinetics: Kinetics,
    pub initial_marking: Vec<u64>,
    pub transitions: Vec<TransitionJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcJson {
    pub source: usize,
    pub transition: String,
    pub target: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkingGraphJson {
    pub places: Vec<String>,
    /// Index of the initial marking in `nodes` (always 0).
    pub origin: usize,
    pub truncated: bool,
    pub nodes: Vec<Vec<u64>>,
    pub arcs: Vec<ArcJson>,
}

fn bag_map(net: &PetriNet, bag: &Bag) -> BTreeMap<String, u64> {
    bag.support().map(|p| (net.places()[p].clone(), bag.get(p))).collect()
}

pub fn net_json(net: &PetriNet) -> NetJson {
    NetJson {
        places: net.places().to_vec(),
        kinetics: net.kinetics(),
        initial_marking: net.initial_marking().as_slice().to_vec(),
        transitions: net
            .transitions()
            .iter()
            .map(|t| TransitionJson {
                id: t.id.clone(),
                input: bag_map(net, &t.input),
                output: bag_map(net, &t.output),
                rate: format_rational(&t.rate),
            })
            .collect(),
    }
}

pub fn marking_graph_json(net: &PetriNet, graph: &MarkingGraph) -> MarkingGraphJson {
    MarkingGraphJson {
        places: net.places().to_vec(),
        origin: 0,
        truncated: graph.truncated(),
        nodes: graph.nodes().iter().map(|m| m.as_slice().to_vec()).collect(),
        arcs: graph
            .arcs()
            .iter()
            .map(|a| ArcJson {
                source: a.source,
                transition: net.transition(a.transition).id.clone(),
                target: a.target,
            })
            .collect(),
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Reaction graph: one node per complex (`2p+q` notation), one edge per
/// transition labelled with its id and rate constant.
pub fn reaction_graph_dot(net: &PetriNet) -> String {
    let g = structure::reaction_graph(net);
    let mut out = String::from("digraph reaction {\n  rankdir=LR;\n");
    for (i, c) in g.complexes.iter().enumerate() {
        writeln!(out, "  c{i} [label={}];", quote(&net.bag_label(c))).unwrap();
    }
    for a in &g.arcs {
        let t = net.transition(a.transition);
        let label = format!("{} ({})", t.id, format_rational(&t.rate));
        writeln!(out, "  c{} -> c{} [label={}];", a.source, a.target, quote(&label)).unwrap();
    }
    out.push_str("}\n");
    out
}

/// Marking graph: nodes labelled by their markings, the initial marking
/// drawn with a double border.
pub fn marking_graph_dot(net: &PetriNet, graph: &MarkingGraph) -> String {
    let mut out = String::from("digraph marking {\n");
    if graph.truncated() {
        out.push_str("  label=\"truncated\";\n");
    }
    for (i, m) in graph.nodes().iter().enumerate() {
        let shape = if i == 0 { ", peripheries=2" } else { "" };
        writeln!(out, "  m{i} [label={}{shape}];", quote(&m.to_string())).unwrap();
    }
    for a in graph.arcs() {
        writeln!(
            out,
            "  m{} -> m{} [label={}];",
            a.source,
            a.target,
            quote(&net.transition(a.transition).id)
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::parse_net;

    const CYCLE: &str = "places: p q r\ninit: p=2\n\
        t1: 2p -> p + q + r @ 1\nt2: 2q -> 2p @ 1/2\nt3: p + q + r -> 2q @ 1\n";

    #[test]
    fn net_json_has_stable_fields() {
        let n = parse_net(CYCLE).unwrap().net;
        let v = serde_json::to_value(net_json(&n)).unwrap();
        assert_eq!(v["kinetics"], "constant");
        assert_eq!(v["transitions"][1]["rate"], "1/2");
        assert_eq!(v["transitions"][0]["input"]["p"], 2);
        let back: NetJson = serde_json::from_value(v).unwrap();
        assert_eq!(back, net_json(&n));
    }

    #[test]
    fn marking_graph_json_and_dot() {
        let n = parse_net(CYCLE).unwrap().net;
        let g = n.reachability(10);
        let j = marking_graph_json(&n, &g);
        assert_eq!(j.nodes, vec![vec![2, 0, 0], vec![1, 1, 1], vec![0, 2, 0]]);
        assert_eq!(j.arcs.len(), 3);
        let dot = marking_graph_dot(&n, &g);
        assert!(dot.contains("m0 [label=\"(2,0,0)\", peripheries=2];"));
        assert!(dot.contains("m0 -> m1 [label=\"t1\"];"));
    }

    #[test]
    fn reaction_dot_uses_chemical_labels() {
        let n = parse_net("0 -> p @ 1\np -> 0 @ 2\n").unwrap().net;
        let dot = reaction_graph_dot(&n);
        assert!(dot.contains("c0 [label=\"p\"];"));
        assert!(dot.contains("c1 [label=\"∅\"];"));
        assert!(dot.contains("c1 -> c0 [label=\"t1 (1)\"];"));
    }
}
