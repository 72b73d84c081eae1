//! Maximum-cardinality matching with Edmonds' blossom algorithm.

use std::collections::{BTreeSet, VecDeque};

use super::{Edge, Graph, VertexId};

const NONE: usize = usize::MAX;

/// Dense index view of a [`Graph`] used by the blossom search.
struct Blossom {
    adj: Vec<Vec<usize>>,
    mate: Vec<usize>,
    parent: Vec<usize>,
    base: Vec<usize>,
    used: Vec<bool>,
    in_blossom: Vec<bool>,
}

impl Blossom {
    fn new(adj: Vec<Vec<usize>>) -> Self {
        let n = adj.len();
        Blossom {
            adj,
            mate: vec![NONE; n],
            parent: vec![NONE; n],
            base: (0..n).collect(),
            used: vec![false; n],
            in_blossom: vec![false; n],
        }
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        let mut seen = vec![false; self.adj.len()];
        loop {
            a = self.base[a];
            seen[a] = true;
            if self.mate[a] == NONE {
                break;
            }
            a = self.parent[self.mate[a]];
        }
        loop {
            b = self.base[b];
            if seen[b] {
                return b;
            }
            b = self.parent[self.mate[b]];
        }
    }

    fn mark_path(&mut self, mut v: usize, b: usize, mut child: usize) {
        while self.base[v] != b {
            self.in_blossom[self.base[v]] = true;
            self.in_blossom[self.base[self.mate[v]]] = true;
            self.parent[v] = child;
            child = self.mate[v];
            v = self.parent[self.mate[v]];
        }
    }

    /// BFS for an augmenting path from `root`; returns the free endpoint reached.
    fn find_path(&mut self, root: usize) -> Option<usize> {
        let n = self.adj.len();
        self.used.iter_mut().for_each(|x| *x = false);
        self.parent.iter_mut().for_each(|x| *x = NONE);
        for (i, b) in self.base.iter_mut().enumerate() {
            *b = i;
        }
        self.used[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for k in 0..self.adj[v].len() {
                let to = self.adj[v][k];
                if self.base[v] == self.base[to] || self.mate[v] == to {
                    continue;
                }
                if to == root || (self.mate[to] != NONE && self.parent[self.mate[to]] != NONE) {
                    let cur = self.lca(v, to);
                    self.in_blossom = vec![false; n];
                    self.mark_path(v, cur, to);
                    self.mark_path(to, cur, v);
                    for i in 0..n {
                        if self.in_blossom[self.base[i]] {
                            self.base[i] = cur;
                            if !self.used[i] {
                                self.used[i] = true;
                                queue.push_back(i);
                            }
                        }
                    }
                } else if self.parent[to] == NONE {
                    self.parent[to] = v;
                    if self.mate[to] == NONE {
                        return Some(to);
                    }
                    self.used[self.mate[to]] = true;
                    queue.push_back(self.mate[to]);
                }
            }
        }
        None
    }

    fn solve(&mut self) -> usize {
        let n = self.adj.len();
        // greedy warm start
        for v in 0..n {
            if self.mate[v] == NONE {
                if let Some(&w) = self.adj[v].iter().find(|&&w| self.mate[w] == NONE) {
                    self.mate[v] = w;
                    self.mate[w] = v;
                }
            }
        }
        for root in 0..n {
            if self.mate[root] != NONE {
                continue;
            }
            if let Some(mut v) = self.find_path(root) {
                while v != NONE {
                    let pv = self.parent[v];
                    let ppv = self.mate[pv];
                    self.mate[v] = pv;
                    self.mate[pv] = v;
                    v = ppv;
                }
            }
        }
        self.mate.iter().filter(|&&m| m != NONE).count() / 2
    }
}

fn index_view(g: &Graph, removed: &BTreeSet<VertexId>) -> (Vec<VertexId>, Vec<Vec<usize>>) {
    let ids: Vec<VertexId> = g.vertices().filter(|v| !removed.contains(v)).collect();
    let index = |v: VertexId| ids.binary_search(&v).ok();
    let adj = ids.iter().map(|&v| g.neighbors(v).unwrap().iter().filter_map(|&w| index(w)).collect()).collect();
    (ids, adj)
}

/// Size of a maximum matching of `g` with the vertices in `removed` ignored.
pub fn matching_size(g: &Graph, removed: &BTreeSet<VertexId>) -> usize {
    let (_, adj) = index_view(g, removed);
    Blossom::new(adj).solve()
}

/// A maximum-cardinality matching of `g`.
///
/// Among all maximum matchings the one whose sorted edge list is
/// lexicographically smallest is returned, so the result depends only on
/// the graph and not on search order.
pub fn maximum_matching(g: &Graph) -> BTreeSet<Edge> {
    let mut remaining = matching_size(g, &BTreeSet::new());
    let mut covered = BTreeSet::new();
    let mut out = BTreeSet::new();
    for (u, v) in g.edges() {
        if remaining == 0 {
            break;
        }
        if covered.contains(&u) || covered.contains(&v) {
            continue;
        }
        covered.insert(u);
        covered.insert(v);
        if matching_size(g, &covered) + 1 == remaining {
            out.insert((u, v));
            remaining -= 1;
        } else {
            covered.remove(&u);
            covered.remove(&v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(g: &Graph) -> usize {
        let edges: Vec<Edge> = g.edges().collect();
        fn go(edges: &[Edge], used: &mut BTreeSet<VertexId>) -> usize {
            match edges.split_first() {
                None => 0,
                Some((&(u, v), rest)) => {
                    let skip = go(rest, used);
                    if used.contains(&u) || used.contains(&v) {
                        return skip;
                    }
                    used.insert(u);
                    used.insert(v);
                    let take = 1 + go(rest, used);
                    used.remove(&u);
                    used.remove(&v);
                    skip.max(take)
                }
            }
        }
        go(&edges, &mut BTreeSet::new())
    }

    fn is_matching(g: &Graph, m: &BTreeSet<Edge>) -> bool {
        let mut seen = BTreeSet::new();
        m.iter().all(|&(u, v)| g.has_edge(u, v) && seen.insert(u) && seen.insert(v))
    }

    #[test]
    fn small_cases() {
        assert_eq!(maximum_matching(&Graph::path(4)).len(), 2);
        assert_eq!(maximum_matching(&Graph::complete(3)).len(), 1);
        let k4 = Graph::complete(4);
        assert_eq!(maximum_matching(&k4).len(), brute_force(&k4));
        assert_eq!(brute_force(&k4), 2);
        assert!(maximum_matching(&Graph::new()).is_empty());
    }

    #[test]
    fn lexicographic_tie_break() {
        let m = maximum_matching(&Graph::path(4));
        assert_eq!(m.into_iter().collect::<Vec<_>>(), vec![(VertexId(0), VertexId(1)), (VertexId(2), VertexId(3))]);
        let k4 = maximum_matching(&Graph::complete(4));
        assert_eq!(k4.into_iter().collect::<Vec<_>>(), vec![(VertexId(0), VertexId(1)), (VertexId(2), VertexId(3))]);
    }

    #[test]
    fn odd_cycle_blossom() {
        // 5-cycle with a pendant on each of two vertices forces blossom contraction
        let g = Graph::from_edges([(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 5), (2, 6)]).unwrap();
        let m = maximum_matching(&g);
        assert!(is_matching(&g, &m));
        assert_eq!(m.len(), brute_force(&g));
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn agrees_with_brute_force_on_all_graphs_up_to_six_vertices() {
        for n in 1..=6u32 {
            let pairs: Vec<(u32, u32)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            for mask in 0u32..(1 << pairs.len()) {
                let mut g = Graph::with_vertex_count(n);
                for (i, &(u, v)) in pairs.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        g.add_edge(VertexId(u), VertexId(v)).unwrap();
                    }
                }
                let m = maximum_matching(&g);
                assert!(is_matching(&g, &m));
                assert_eq!(m.len(), brute_force(&g), "graph {:?}", g.to_data());
            }
        }
    }
}
