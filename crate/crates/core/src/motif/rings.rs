use std::collections::BTreeSet;

use crate::molio::AtomGraph;

/// Bridge edges of the bond graph, found with an iterative low-link DFS.
pub fn find_bridges(g: &AtomGraph) -> BTreeSet<usize> {
    let n = g.atoms.len();
    let adj = g.adjacency();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut bridges = BTreeSet::new();
    let mut timer = 0;

    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, bond used to enter it, next neighbour cursor)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(top) = stack.last_mut() {
            let (v, via) = (top.0, top.1);
            if let Some(&(w, bond)) = adj[v].get(top.2) {
                top.2 += 1;
                if bond == via {
                    continue;
                }
                if disc[w] == usize::MAX {
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, bond, 0));
                } else {
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > disc[parent] {
                        bridges.insert(via);
                    }
                }
            }
        }
    }
    bridges
}

/// Bonds lying on at least one cycle: the complement of the bridge set.
pub fn find_ring_bonds(g: &AtomGraph) -> BTreeSet<usize> {
    let bridges = find_bridges(g);
    (0..g.bonds.len()).filter(|b| !bridges.contains(b)).collect()
}
