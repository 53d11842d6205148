//! Directed-graph helpers shared by the reaction graph and the marking graph.

/// Component labelling of a graph: `component[v]` is the id of the
/// component holding `v`, ids are dense in `0..count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    pub component: Vec<usize>,
    pub count: usize,
}

impl Components {
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (v, &c) in self.component.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

/// Strongly connected components (Tarjan), iterative to survive deep graphs.
/// Component ids come out in reverse topological order of the condensation.
pub fn strongly_connected(adjacency: &[Vec<usize>]) -> Components {
    const UNSEEN: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut component = vec![UNSEEN; n];
    let mut count = 0;
    let mut next_index = 0;
    // (node, position in its adjacency list)
    let mut call = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adjacency[v].get(*pos) {
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    component[w] = count;
                    if w == v {
                        break;
                    }
                }
                count += 1;
            }
        }
    }
    Components { component, count }
}

/// Weakly connected components: arcs are taken without orientation.
pub fn weakly_connected(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Components {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    // Relabel roots densely in order of first appearance.
    let mut label = vec![usize::MAX; n];
    let mut component = vec![0; n];
    let mut count = 0;
    for v in 0..n {
        let r = find(&mut parent, v);
        if label[r] == usize::MAX {
            label[r] = count;
            count += 1;
        }
        component[v] = label[r];
    }
    Components { component, count }
}

pub fn is_strongly_connected(adjacency: &[Vec<usize>]) -> bool {
    adjacency.is_empty() || strongly_connected(adjacency).count == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_is_one_component() {
        let adj = vec![vec![1], vec![2], vec![0]];
        assert!(is_strongly_connected(&adj));
    }

    #[test]
    fn path_splits_into_singletons() {
        let adj = vec![vec![1], vec![2], vec![]];
        let scc = strongly_connected(&adj);
        assert_eq!(scc.count, 3);
        // sink first
        assert_eq!(scc.component[2], 0);
        assert_eq!(weakly_connected(3, [(0, 1), (1, 2)]).count, 1);
    }

    #[test]
    fn deep_chain_does_not_overflow_the_stack() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|v| vec![(v + 1) % n]).collect();
        assert!(is_strongly_connected(&adj));
    }

    #[test]
    fn weak_components_are_labelled_in_order() {
        let c = weakly_connected(5, [(3, 4), (0, 2)]);
        assert_eq!(c.component, vec![0, 1, 0, 2, 2]);
        assert_eq!(c.members(), vec![vec![0, 2], vec![1], vec![3, 4]]);
    }
}
