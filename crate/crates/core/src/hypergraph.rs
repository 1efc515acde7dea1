//! Weighted hypergraphs with stable hyperedge ids, energy evaluation, and
//! hyperpath distances.
//!
//! The energy of a hypergraph on a potential vector `x` is
//! `Q_H(x) = sum_e w_e * max_{u,v in e} (x_u - x_v)^2`, and a reweighted
//! sub-hypergraph `Hs` is a `(1 +- eps)`-spectral sparsifier of `H` when
//! `(1 - eps) Q_Hs(x) <= Q_H(x) <= (1 + eps) Q_Hs(x)` for all `x`.

use std::collections::BTreeMap;

use thiserror::Error;

/// Stable identifier of a hyperedge. Ids are assigned by a monotonically
/// increasing counter and are never reused after deletion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct EdgeId(pub u64);

impl std::fmt::Display for EdgeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum HypergraphError {
    #[error("hyperedge has duplicate vertex {0}")]
    DuplicateVertex(u32),
    #[error("vertex {0} out of range (n = {1})")]
    VertexOutOfRange(u32, usize),
    #[error("hyperedge cardinality {got} outside [2, {max}]")]
    BadCardinality { got: usize, max: usize },
    #[error("non-positive weight {0}")]
    NonPositiveWeight(f64),
    #[error("unknown edge id {0}")]
    UnknownEdge(EdgeId),
    #[error("potential vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// A single weighted hyperedge.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperedge {
    pub verts: Vec<u32>,
    pub weight: f64,
}

impl Hyperedge {
    pub fn arity(&self) -> usize {
        self.verts.len()
    }
}

/// An undirected weighted hypergraph `H = (V, E, w)` on vertices `0..n`.
///
/// Duplicate hyperedges (same vertex set) are allowed as distinct edges.
#[derive(Debug, Clone)]
pub struct Hypergraph {
    n: usize,
    rank: usize,
    edges: BTreeMap<EdgeId, Hyperedge>,
    next_id: u64,
}

/// A real potential value per vertex.
pub type PotentialVector = [f64];

impl Hypergraph {
    /// An empty hypergraph on `n` vertices with rank bound `rank`.
    pub fn new(n: usize, rank: usize) -> Self {
        assert!(rank >= 2, "rank bound must be at least 2");
        Hypergraph { n, rank, edges: BTreeMap::new(), next_id: 0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of currently present hyperedges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Declared rank bound (maximum allowed hyperedge cardinality).
    pub fn rank_bound(&self) -> usize {
        self.rank
    }

    /// Maximum cardinality over present hyperedges, 0 if empty.
    pub fn rank(&self) -> usize {
        self.edges.values().map(|e| e.arity()).max().unwrap_or(0)
    }

    /// Weight ratio `W = max w / min w` over present edges, 1.0 if empty.
    pub fn weight_ratio(&self) -> f64 {
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        for e in self.edges.values() {
            min = min.min(e.weight);
            max = max.max(e.weight);
        }
        if self.edges.is_empty() {
            1.0
        } else {
            max / min
        }
    }

    pub fn contains(&self, id: EdgeId) -> bool {
        self.edges.contains_key(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Hyperedge> {
        self.edges.get(&id)
    }

    /// Iterate edges in increasing id order.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Hyperedge)> {
        self.edges.iter().map(|(id, e)| (*id, e))
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.keys().copied()
    }

    fn check_edge(&self, verts: &[u32], w: f64) -> Result<(), HypergraphError> {
        if verts.len() < 2 || verts.len() > self.rank {
            return Err(HypergraphError::BadCardinality { got: verts.len(), max: self.rank });
        }
        let mut seen = std::collections::HashSet::new();
        for &v in verts {
            if v as usize >= self.n {
                return Err(HypergraphError::VertexOutOfRange(v, self.n));
            }
            if !seen.insert(v) {
                return Err(HypergraphError::DuplicateVertex(v));
            }
        }
        if w.is_nan() || w <= 0.0 {
            return Err(HypergraphError::NonPositiveWeight(w));
        }
        Ok(())
    }

    /// Insert a hyperedge and return its fresh id.
    pub fn insert_hyperedge(&mut self, verts: &[u32], w: f64) -> Result<EdgeId, HypergraphError> {
        self.check_edge(verts, w)?;
        let id = EdgeId(self.next_id);
        self.next_id += 1;
        self.edges.insert(id, Hyperedge { verts: verts.to_vec(), weight: w });
        Ok(id)
    }

    /// Insert a hyperedge under a caller-chosen id. The id must be fresh and
    /// keeps the id counter ahead of it. Used when mirroring edges between
    /// structures that share the host hypergraph's ids.
    pub fn insert_with_id(&mut self, id: EdgeId, verts: &[u32], w: f64) -> Result<(), HypergraphError> {
        self.check_edge(verts, w)?;
        assert!(!self.edges.contains_key(&id), "id {id} already present");
        self.next_id = self.next_id.max(id.0 + 1);
        self.edges.insert(id, Hyperedge { verts: verts.to_vec(), weight: w });
        Ok(())
    }

    pub fn delete_hyperedge(&mut self, id: EdgeId) -> Result<(), HypergraphError> {
        self.edges.remove(&id).map(|_| ()).ok_or(HypergraphError::UnknownEdge(id))
    }

    /// Energy `Q_H(x)`; 0 for empty edge sets or constant `x`.
    pub fn energy(&self, x: &PotentialVector) -> Result<f64, HypergraphError> {
        if x.len() != self.n {
            return Err(HypergraphError::LengthMismatch { got: x.len(), expected: self.n });
        }
        let mut q = 0.0;
        for e in self.edges.values() {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in &e.verts {
                let xv = x[v as usize];
                lo = lo.min(xv);
                hi = hi.max(xv);
            }
            let gap = hi - lo;
            q += e.weight * gap * gap;
        }
        Ok(q)
    }

    /// Shortest hyperpath length between `u` and `v` with hyperedge length
    /// `1/w_e`; infinity when disconnected, 0 when `u == v`.
    pub fn hyperpath_distance(&self, u: u32, v: u32) -> f64 {
        assert!((u as usize) < self.n && (v as usize) < self.n);
        if u == v {
            return 0.0;
        }
        // Dijkstra over vertices, relaxing through incident hyperedges.
        let mut incident: Vec<Vec<EdgeId>> = vec![Vec::new(); self.n];
        for (id, e) in &self.edges {
            for &w in &e.verts {
                incident[w as usize].push(*id);
            }
        }
        let mut dist = vec![f64::INFINITY; self.n];
        dist[u as usize] = 0.0;
        let mut heap = std::collections::BinaryHeap::new();
        heap.push((std::cmp::Reverse(ordered(0.0)), u));
        while let Some((std::cmp::Reverse(d), at)) = heap.pop() {
            let d = d.0;
            if d > dist[at as usize] {
                continue;
            }
            if at == v {
                return d;
            }
            for id in &incident[at as usize] {
                let e = &self.edges[id];
                let nd = d + 1.0 / e.weight;
                for &w in &e.verts {
                    if nd < dist[w as usize] {
                        dist[w as usize] = nd;
                        heap.push((std::cmp::Reverse(ordered(nd)), w));
                    }
                }
            }
        }
        f64::INFINITY
    }
}

fn ordered(x: f64) -> OrdF64 {
    OrdF64(x)
}

/// Total order on non-NaN floats for use in heaps.
#[derive(PartialEq, PartialOrd)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}
#[allow(clippy::derive_ord_xor_partial_ord)]
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).expect("NaN in ordered float")
    }
}

/// Report of a spectral-sparsifier probe check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SpectralReport {
    pub ok: bool,
    /// max over probes of |Q_H / Q_Hs - 1|, over probes with Q_Hs > 0.
    pub worst_ratio: f64,
    pub probes: usize,
}

/// Standard-normal probe vectors for energy comparisons.
pub fn gaussian_probes(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect())
        .collect()
}

/// Check `(1 - eps) Q_Hs(x) <= Q_H(x) <= (1 + eps) Q_Hs(x)` over the probe
/// vectors. A probe with `Q_Hs = 0 < Q_H` fails the check.
pub fn is_spectral_sparsifier(
    h: &Hypergraph,
    hs: &Hypergraph,
    eps: f64,
    probes: &[Vec<f64>],
) -> SpectralReport {
    assert!(eps > 0.0 && eps <= 1.0, "eps must be in (0, 1]");
    let mut ok = true;
    let mut worst = 0.0f64;
    for x in probes {
        let qh = h.energy(x).expect("probe length mismatch");
        let qs = hs.energy(x).expect("probe length mismatch");
        if qs == 0.0 {
            if qh > 0.0 {
                ok = false;
                worst = f64::INFINITY;
            }
            continue;
        }
        let ratio = qh / qs;
        worst = worst.max((ratio - 1.0).abs());
        if ratio < 1.0 - eps || ratio > 1.0 + eps {
            ok = false;
        }
    }
    SpectralReport { ok, worst_ratio: worst, probes: probes.len() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_assigns_fresh_ids() {
        let mut h = Hypergraph::new(4, 4);
        let id = h.insert_hyperedge(&[0, 1], 1.0).unwrap();
        assert_eq!(id, EdgeId(0));
        assert_eq!(h.m(), 1);
    }

    #[test]
    fn insert_rejects_bad_edges() {
        let mut h = Hypergraph::new(4, 4);
        assert_eq!(h.insert_hyperedge(&[0, 0, 1], 1.0), Err(HypergraphError::DuplicateVertex(0)));
        assert_eq!(h.insert_hyperedge(&[0, 1, 2], 0.0), Err(HypergraphError::NonPositiveWeight(0.0)));
        assert_eq!(h.insert_hyperedge(&[0, 9], 1.0), Err(HypergraphError::VertexOutOfRange(9, 4)));
        assert!(matches!(h.insert_hyperedge(&[0], 1.0), Err(HypergraphError::BadCardinality { .. })));
    }

    #[test]
    fn delete_roundtrip_and_errors() {
        let mut h = Hypergraph::new(4, 4);
        let id = h.insert_hyperedge(&[0, 1], 1.0).unwrap();
        h.delete_hyperedge(id).unwrap();
        assert_eq!(h.m(), 0);
        assert_eq!(h.delete_hyperedge(id), Err(HypergraphError::UnknownEdge(id)));
        assert_eq!(h.delete_hyperedge(EdgeId(99)), Err(HypergraphError::UnknownEdge(EdgeId(99))));
        // ids are never reused
        let id2 = h.insert_hyperedge(&[0, 1], 1.0).unwrap();
        assert!(id2.0 > id.0);
    }

    #[test]
    fn energy_single_edge() {
        let mut h = Hypergraph::new(4, 4);
        h.insert_hyperedge(&[1, 2, 3], 2.0).unwrap();
        let q = h.energy(&[0.0, 0.0, 1.0, 5.0]).unwrap();
        assert_eq!(q, 50.0);
    }

    #[test]
    fn energy_constant_vector_is_zero() {
        let mut h = Hypergraph::new(3, 3);
        h.insert_hyperedge(&[0, 1, 2], 3.0).unwrap();
        assert_eq!(h.energy(&[7.0, 7.0, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn energy_length_mismatch() {
        let h = Hypergraph::new(3, 3);
        assert!(h.energy(&[0.0]).is_err());
    }

    #[test]
    fn hyperpath_two_unit_edges() {
        let mut h = Hypergraph::new(3, 3);
        h.insert_hyperedge(&[0, 1], 1.0).unwrap();
        h.insert_hyperedge(&[1, 2], 1.0).unwrap();
        assert_eq!(h.hyperpath_distance(0, 2), 2.0);
        assert_eq!(h.hyperpath_distance(1, 1), 0.0);
    }

    #[test]
    fn hyperpath_disconnected() {
        let mut h = Hypergraph::new(4, 2);
        h.insert_hyperedge(&[0, 1], 1.0).unwrap();
        assert_eq!(h.hyperpath_distance(0, 3), f64::INFINITY);
    }

    #[test]
    fn identity_sparsifier_passes() {
        let mut h = Hypergraph::new(3, 3);
        h.insert_hyperedge(&[0, 1, 2], 2.0).unwrap();
        let probes = vec![vec![1.0, 0.0, -1.0], vec![0.5, 2.0, 0.0]];
        let rep = is_spectral_sparsifier(&h, &h.clone(), 0.1, &probes);
        assert!(rep.ok);
        assert_eq!(rep.worst_ratio, 0.0);
    }

    #[test]
    fn doubled_weights_fail_small_eps() {
        let mut h = Hypergraph::new(2, 2);
        h.insert_hyperedge(&[0, 1], 1.0).unwrap();
        let mut hs = Hypergraph::new(2, 2);
        hs.insert_hyperedge(&[0, 1], 2.0).unwrap();
        let rep = is_spectral_sparsifier(&h, &hs, 0.1, &[vec![1.0, 0.0]]);
        assert!(!rep.ok);
        assert!((rep.worst_ratio - 0.5).abs() < 1e-12);
    }

    #[test]
    fn energy_monotone_under_insertion() {
        let mut h = Hypergraph::new(5, 3);
        let x = vec![0.3, -1.0, 2.0, 0.0, 1.5];
        h.insert_hyperedge(&[0, 1], 1.0).unwrap();
        let q0 = h.energy(&x).unwrap();
        h.insert_hyperedge(&[2, 3, 4], 0.5).unwrap();
        assert!(h.energy(&x).unwrap() >= q0);
    }
}
