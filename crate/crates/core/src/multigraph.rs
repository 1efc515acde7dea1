//! Weighted multigraphs with per-edge back-pointers to originating
//! hyperedges: the clique expansion (associated graph) and the star
//! expansion, which is a 2-spanner of the clique expansion.

use crate::hypergraph::{EdgeId, Hypergraph, OrdF64};

/// A multigraph edge. `origin` references the hyperedge whose expansion
/// produced this edge; `id` is unique within one `MultiGraph`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MEdge {
    pub id: u64,
    pub u: u32,
    pub v: u32,
    pub weight: f64,
    pub origin: EdgeId,
}

/// A weighted multigraph on vertices `0..n`; parallel edges permitted.
#[derive(Debug, Clone, Default)]
pub struct MultiGraph {
    pub n: usize,
    pub edges: Vec<MEdge>,
}

/// Expansion-edge ids pack the origin hyperedge id and a slot index so that
/// edges stay identifiable across structures built from the same hypergraph.
pub fn expansion_edge_id(origin: EdgeId, slot: u32) -> u64 {
    origin.0 << 16 | slot as u64
}

impl MultiGraph {
    pub fn new(n: usize) -> Self {
        MultiGraph { n, edges: Vec::new() }
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Remove every edge originating from `origin`.
    pub fn remove_origin(&mut self, origin: EdgeId) {
        self.edges.retain(|e| e.origin != origin);
    }

    /// All-pairs single-source shortest path distances from `u` with edge
    /// length `1/w`.
    pub fn dijkstra(&self, u: u32) -> Vec<f64> {
        let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.u as usize].push((e.v, 1.0 / e.weight));
            adj[e.v as usize].push((e.u, 1.0 / e.weight));
        }
        let mut dist = vec![f64::INFINITY; self.n];
        dist[u as usize] = 0.0;
        let mut heap = std::collections::BinaryHeap::new();
        heap.push((std::cmp::Reverse(OrdF64(0.0)), u));
        while let Some((std::cmp::Reverse(d), at)) = heap.pop() {
            if d.0 > dist[at as usize] {
                continue;
            }
            for &(to, len) in &adj[at as usize] {
                let nd = d.0 + len;
                if nd < dist[to as usize] {
                    dist[to as usize] = nd;
                    heap.push((std::cmp::Reverse(OrdF64(nd)), to));
                }
            }
        }
        dist
    }
}

/// Clique expansion `G_H`: for each hyperedge `e`, all `|e|(|e|-1)/2` pairs
/// with weight `w_e` and origin `e`.
pub fn build_associated_graph(h: &Hypergraph) -> MultiGraph {
    let mut g = MultiGraph::new(h.n());
    for (id, e) in h.edges() {
        let mut slot = 0u32;
        for i in 0..e.verts.len() {
            for j in i + 1..e.verts.len() {
                g.edges.push(MEdge {
                    id: expansion_edge_id(id, slot),
                    u: e.verts[i],
                    v: e.verts[j],
                    weight: e.weight,
                    origin: id,
                });
                slot += 1;
            }
        }
    }
    g
}

/// Star center selection rule.
#[derive(Debug, Clone, Copy, Default)]
pub enum CenterRule {
    /// Minimum vertex id of the hyperedge.
    #[default]
    MinVertex,
}

/// Star expansion `S_H`: for each hyperedge `e`, `|e|-1` edges from the
/// chosen center to the remaining vertices, weight `w_e`, origin `e`.
pub fn build_star_graph(h: &Hypergraph, rule: CenterRule) -> MultiGraph {
    let mut g = MultiGraph::new(h.n());
    for (id, e) in h.edges() {
        for (slot, (c, v)) in star_edges(&e.verts, rule).into_iter().enumerate() {
            g.edges.push(MEdge {
                id: expansion_edge_id(id, slot as u32),
                u: c,
                v,
                weight: e.weight,
                origin: id,
            });
        }
    }
    g
}

/// Star edges `(center, leaf)` of one hyperedge under `rule`.
pub fn star_edges(verts: &[u32], rule: CenterRule) -> Vec<(u32, u32)> {
    let center = match rule {
        CenterRule::MinVertex => *verts.iter().min().expect("empty hyperedge"),
    };
    verts.iter().filter(|&&v| v != center).map(|&v| (center, v)).collect()
}
