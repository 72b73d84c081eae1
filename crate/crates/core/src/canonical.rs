//! Canonical numbering of fusion-network states.
//!
//! Two states get the same key iff they differ only by a renaming of qubit
//! ids. Colour refinement separates most qubits (labels and fusion indices
//! pin them down quickly); the remaining ties are broken by
//! individualisation, keeping the lexicographically smallest serialisation.

use std::collections::BTreeMap;

use crate::fusion::FusionNetwork;
use crate::graph::{normalize, Graph, VertexId};

/// Dense view of a state used during the search.
struct View {
    adj: Vec<Vec<usize>>,
    fusions: Vec<(usize, usize)>,
    // per vertex: (label + 1 or 0, pool flag)
    attrs: Vec<(u32, u32)>,
}

fn rank(sigs: &[Vec<u32>]) -> (Vec<u32>, usize) {
    let mut sorted: Vec<&Vec<u32>> = sigs.iter().collect();
    sorted.sort();
    sorted.dedup();
    let colors = sigs.iter().map(|s| sorted.binary_search(&s).unwrap() as u32).collect();
    (colors, sorted.len())
}

impl View {
    fn new(net: &FusionNetwork, ids: &[VertexId]) -> Self {
        let index = |v: VertexId| ids.binary_search(&v).expect("vertex in state");
        let g = &net.physical;
        let adj = ids.iter().map(|&v| g.neighbors(v).unwrap().iter().map(|&w| index(w)).collect()).collect();
        let fusions = net.fusions.iter().map(|&(a, b)| (index(a), index(b))).collect();
        let attrs = ids
            .iter()
            .map(|v| (net.labels.get(v).map_or(0, |t| t.0 + 1), net.unused_pool.contains(v) as u32))
            .collect();
        View { adj, fusions, attrs }
    }

    fn initial_colors(&self) -> Vec<u32> {
        let mut sigs: Vec<Vec<u32>> =
            (0..self.adj.len()).map(|i| vec![self.attrs[i].0, self.attrs[i].1, self.adj[i].len() as u32]).collect();
        for (k, &(a, b)) in self.fusions.iter().enumerate() {
            sigs[a].push(k as u32);
            sigs[b].push(k as u32);
        }
        let (colors, _) = rank(&sigs);
        self.refine(colors)
    }

    fn refine(&self, mut colors: Vec<u32>) -> Vec<u32> {
        let n = self.adj.len();
        let mut classes = {
            let mut c = colors.clone();
            c.sort();
            c.dedup();
            c.len()
        };
        loop {
            if classes == n {
                return colors;
            }
            let mut sigs: Vec<Vec<u32>> = (0..n)
                .map(|i| {
                    let mut s = vec![colors[i]];
                    let mut ns: Vec<u32> = self.adj[i].iter().map(|&j| colors[j]).collect();
                    ns.sort();
                    s.extend(ns);
                    s.push(u32::MAX);
                    s
                })
                .collect();
            for (k, &(a, b)) in self.fusions.iter().enumerate() {
                sigs[a].extend([k as u32, colors[b]]);
                sigs[b].extend([k as u32, colors[a]]);
            }
            let (next, count) = rank(&sigs);
            colors = next;
            if count == classes {
                return colors;
            }
            classes = count;
        }
    }

    fn serialize(&self, pos: &[usize]) -> Vec<u32> {
        let n = self.adj.len();
        let mut inv = vec![0usize; n];
        for (v, &p) in pos.iter().enumerate() {
            inv[p] = v;
        }
        let mut out = Vec::with_capacity(3 + 2 * n + 4 * self.fusions.len());
        out.push(n as u32);
        for &v in &inv {
            out.extend([self.attrs[v].0, self.attrs[v].1]);
        }
        let mut edges: Vec<(u32, u32)> = Vec::new();
        for (v, ns) in self.adj.iter().enumerate() {
            for &w in ns {
                let (a, b) = (pos[v] as u32, pos[w] as u32);
                if a < b {
                    edges.push((a, b));
                }
            }
        }
        edges.sort();
        out.push(edges.len() as u32);
        for (a, b) in edges {
            out.extend([a, b]);
        }
        out.push(self.fusions.len() as u32);
        for &(a, b) in &self.fusions {
            let (a, b) = (pos[a] as u32, pos[b] as u32);
            out.extend([a.min(b), a.max(b)]);
        }
        out
    }

    fn twins(&self, a: usize, b: usize) -> bool {
        let strip = |v: usize, other: usize| -> Vec<usize> {
            let mut s: Vec<usize> = self.adj[v].iter().copied().filter(|&w| w != other).collect();
            s.sort();
            s
        };
        let partners = |v: usize, other: usize| -> Vec<usize> {
            let mut s: Vec<usize> = self
                .fusions
                .iter()
                .filter_map(|&(x, y)| match (x == v, y == v) {
                    (true, _) => Some(y),
                    (_, true) => Some(x),
                    _ => None,
                })
                .filter(|&w| w != other)
                .collect();
            s.sort();
            s
        };
        strip(a, b) == strip(b, a) && partners(a, b) == partners(b, a)
    }

    fn search(&self, colors: Vec<u32>, best: &mut Option<(Vec<u32>, Vec<usize>)>) {
        let n = self.adj.len();
        let mut cells: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (v, &c) in colors.iter().enumerate() {
            cells.entry(c).or_default().push(v);
        }
        let Some(cell) = cells.into_values().find(|c| c.len() > 1) else {
            let pos: Vec<usize> = colors.iter().map(|&c| c as usize).collect();
            let key = self.serialize(&pos);
            if best.as_ref().is_none_or(|(b, _)| key < *b) {
                *best = Some((key, pos));
            }
            return;
        };
        let mut reps: Vec<usize> = Vec::new();
        for &v in &cell {
            if !reps.iter().any(|&r| self.twins(r, v)) {
                reps.push(v);
            }
        }
        for v in reps {
            let sigs: Vec<Vec<u32>> = (0..n)
                .map(|i| {
                    let demoted = colors[i] == colors[v] && i != v;
                    vec![colors[i], demoted as u32]
                })
                .collect();
            let (split, _) = rank(&sigs);
            self.search(self.refine(split), best);
        }
    }
}

/// Canonical key of `net` and the qubit ids listed in canonical position order.
pub(crate) fn canonical_order(net: &FusionNetwork) -> (Vec<u32>, Vec<VertexId>) {
    let ids: Vec<VertexId> = net.physical.vertices().collect();
    let view = View::new(net, &ids);
    let mut best = None;
    view.search(view.initial_colors(), &mut best);
    let (key, pos) = best.expect("search reaches at least one leaf");
    let mut order = vec![VertexId(0); ids.len()];
    for (i, &p) in pos.iter().enumerate() {
        order[p] = ids[i];
    }
    (key, order)
}

/// Renumbers `net` so qubit ids follow canonical order, returning the key.
pub(crate) fn canonicalize_network(net: &FusionNetwork) -> (Vec<u32>, FusionNetwork) {
    let (key, order) = canonical_order(net);
    let map: BTreeMap<VertexId, VertexId> = order.iter().enumerate().map(|(p, &v)| (v, VertexId(p as u32))).collect();
    let mut physical = Graph::new();
    for p in 0..order.len() as u32 {
        physical.add_vertex(VertexId(p));
    }
    for (a, b) in net.physical.edges() {
        physical.add_edge(map[&a], map[&b]).unwrap();
    }
    let renamed = FusionNetwork {
        ftype: net.ftype,
        physical,
        fusions: net.fusions.iter().map(|&(a, b)| normalize(map[&a], map[&b])).collect(),
        labels: net.labels.iter().map(|(q, &t)| (map[q], t)).collect(),
        unused_pool: net.unused_pool.iter().map(|q| map[q]).collect(),
        next_id: order.len() as u32,
    };
    (key, renamed)
}
