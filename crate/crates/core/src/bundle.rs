//! Decremental monotone t-bundle hyperspanner.
//!
//! A bundle is a union `B = T_1 ∪ ... ∪ T_t` of hyperedge sets where each
//! `T_i` is an alpha-hyperspanner of `H` minus the earlier layers. Each
//! layer is realized as a weighted decremental spanner over the star
//! expansion of its underlying hypergraph; star-graph spanner edges pull
//! back to hyperedges through the origin map. Hyperedges leave a layer only
//! when deleted from `H`; residual hyperedges can be promoted into the layer
//! whose spanner first claims one of their star edges.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::hypergraph::{EdgeId, Hypergraph};
use crate::multigraph::{build_associated_graph, build_star_graph, expansion_edge_id, CenterRule};
use crate::oracle::{effective_resistance, OracleError};
use crate::spanner::{SpannerError, WeightedSpannerSet};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("t must be at least 1")]
    BadT,
    #[error("unknown hyperedge {0}")]
    UnknownEdge(EdgeId),
    #[error("spanner: {0}")]
    Spanner(#[from] SpannerError),
    #[error("hypergraph: {0}")]
    Hypergraph(#[from] crate::hypergraph::HypergraphError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
}

/// Which component of the bundle partition owns a hyperedge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Home {
    /// 0-based layer index: member of `T_{i+1}`.
    Layer(usize),
    Residual,
}

/// Outcome of one hyperedge deletion.
#[derive(Debug, Clone)]
pub struct BundleReport {
    pub removed_from: Home,
    /// Hyperedges promoted residual -> layer, with the 0-based layer index.
    pub promotions: Vec<(EdgeId, usize)>,
}

/// Residual leverage certificate: the observed maximum and the bound it
/// must stay under.
#[derive(Debug, Clone, Copy)]
pub struct LeverageCertificate {
    pub max_leverage: f64,
    pub bound: f64,
}

struct Layer {
    spanner: WeightedSpannerSet,
}

pub struct BundleState {
    h: Hypergraph,
    t: usize,
    k: usize,
    layers: Vec<Layer>,
    homes: BTreeMap<EdgeId, Home>,
    residual: BTreeSet<EdgeId>,
}

impl BundleState {
    /// Build layers iteratively: star graph of the running residual, spanner,
    /// pull spanner edges back to hyperedges, peel them off, repeat. Layer
    /// construction stops early once the residual is exhausted; the remaining
    /// layers are empty and stay empty under deletions.
    pub fn init(h: &Hypergraph, t: usize, k: usize, seed: u64) -> Result<Self, BundleError> {
        if t < 1 {
            return Err(BundleError::BadT);
        }
        let mut b = BundleState {
            h: h.clone(),
            t,
            k,
            layers: Vec::new(),
            homes: BTreeMap::new(),
            residual: h.edge_ids().collect(),
        };
        for li in 0..t {
            if b.residual.is_empty() {
                break;
            }
            let mut underlying = Hypergraph::new(h.n(), h.rank_bound());
            for &id in &b.residual {
                let e = b.h.edge(id).expect("residual edge is live");
                underlying.insert_with_id(id, &e.verts, e.weight)?;
            }
            let star = build_star_graph(&underlying, CenterRule::MinVertex);
            let spanner = WeightedSpannerSet::init(&star, k, seed.wrapping_add(li as u64))?;
            let picked: BTreeSet<EdgeId> =
                spanner.f_edges().iter().map(|&e| EdgeId(e >> 16)).collect();
            for id in picked {
                b.residual.remove(&id);
                b.homes.insert(id, Home::Layer(li));
            }
            b.layers.push(Layer { spanner });
        }
        for &id in &b.residual {
            b.homes.insert(id, Home::Residual);
        }
        Ok(b)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn built_layers(&self) -> usize {
        self.layers.len()
    }

    /// Stretch factor this bundle certifies: star-expansion factor 2 times
    /// weighted-batching factor 2 times the (2k-1) spanner stretch.
    pub fn alpha(&self) -> f64 {
        (2 * 2 * (2 * self.k - 1)) as f64
    }

    pub fn home(&self, id: EdgeId) -> Option<Home> {
        self.homes.get(&id).copied()
    }

    /// Hyperedges homed in layer `li` (0-based).
    pub fn layer_members(&self, li: usize) -> Vec<EdgeId> {
        self.homes
            .iter()
            .filter(|&(_, &h)| h == Home::Layer(li))
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn residual_members(&self) -> Vec<EdgeId> {
        self.residual.iter().copied().collect()
    }

    /// All hyperedges homed in some layer, i.e. `B`.
    pub fn bundle_members(&self) -> Vec<EdgeId> {
        self.homes
            .iter()
            .filter(|&(_, &h)| h != Home::Residual)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn live_hypergraph(&self) -> &Hypergraph {
        &self.h
    }

    fn view(&self, ids: impl IntoIterator<Item = EdgeId>) -> Hypergraph {
        let mut out = Hypergraph::new(self.h.n(), self.h.rank_bound());
        for id in ids {
            let e = self.h.edge(id).expect("live edge");
            out.insert_with_id(id, &e.verts, e.weight).expect("valid edge");
        }
        out
    }

    /// `T_{li+1}` as a hypergraph (homed members only).
    pub fn layer_hypergraph(&self, li: usize) -> Hypergraph {
        self.view(self.layer_members(li))
    }

    /// The pullback `f(F_i)` of layer `li`'s current spanner edge set. This
    /// is always an alpha-hyperspanner of the layer's underlying hypergraph;
    /// it can exceed the homed set when the spanner claims star edges of
    /// hyperedges homed in deeper layers.
    pub fn pullback_hypergraph(&self, li: usize) -> Hypergraph {
        let origins: BTreeSet<EdgeId> =
            self.layers[li].spanner.f_edges().iter().map(|&e| EdgeId(e >> 16)).collect();
        self.view(origins)
    }

    /// Underlying hypergraph of layer `li`: everything not homed earlier.
    pub fn underlying_hypergraph(&self, li: usize) -> Hypergraph {
        let ids: Vec<EdgeId> = self
            .homes
            .iter()
            .filter(|&(_, &h)| match h {
                Home::Residual => true,
                Home::Layer(j) => j >= li,
            })
            .map(|(&id, _)| id)
            .collect();
        self.view(ids)
    }

    /// Layers a hyperedge is a member of (its star edges live in those
    /// spanner structures): everything up to and including its home layer,
    /// or every built layer for residual edges.
    fn member_layers(&self, home: Home) -> std::ops::Range<usize> {
        match home {
            Home::Residual => 0..self.layers.len(),
            Home::Layer(li) => 0..(li + 1).min(self.layers.len()),
        }
    }

    fn star_ids(&self, id: EdgeId) -> Vec<u64> {
        let arity = self.h.edge(id).expect("live edge").arity();
        (0..arity as u32 - 1).map(|s| expansion_edge_id(id, s)).collect()
    }

    /// Delete a hyperedge. The deletion is routed to every layer structure
    /// the edge participates in; spanner repairs pull new star edges into
    /// the layer edge sets, promoting residual origins. Promotions cascade
    /// as removals into deeper layers only, so layer membership stays
    /// monotone.
    pub fn delete_hyperedge(&mut self, id: EdgeId) -> Result<BundleReport, BundleError> {
        let home = *self.homes.get(&id).ok_or(BundleError::UnknownEdge(id))?;
        let mut pending: Vec<BTreeSet<EdgeId>> = vec![BTreeSet::new(); self.layers.len()];
        for li in self.member_layers(home) {
            pending[li].insert(id);
        }
        let star_of_deleted = self.star_ids(id);
        self.homes.remove(&id);
        self.residual.remove(&id);

        let mut promotions = Vec::new();
        let mut star_cache: BTreeMap<EdgeId, Vec<u64>> = BTreeMap::new();
        star_cache.insert(id, star_of_deleted);

        for li in 0..self.layers.len() {
            let mut work: VecDeque<EdgeId> = std::mem::take(&mut pending[li]).into_iter().collect();
            while let Some(origin) = work.pop_front() {
                let stars = star_cache
                    .entry(origin)
                    .or_insert_with(|| {
                        let arity = self.h.edge(origin).expect("live origin").arity();
                        (0..arity as u32 - 1).map(|s| expansion_edge_id(origin, s)).collect()
                    })
                    .clone();
                for sid in stars {
                    if !self.layers[li].spanner.contains_edge(sid) {
                        continue;
                    }
                    let added = self.layers[li].spanner.delete_edge(sid)?;
                    for aid in added {
                        let ao = EdgeId(aid >> 16);
                        if self.residual.contains(&ao) {
                            self.residual.remove(&ao);
                            self.homes.insert(ao, Home::Layer(li));
                            promotions.push((ao, li));
                            // strip the promoted edge from deeper layers
                            for lj in li + 1..self.layers.len() {
                                pending[lj].insert(ao);
                            }
                        }
                    }
                }
            }
        }

        self.h.delete_hyperedge(id)?;
        Ok(BundleReport { removed_from: home, promotions })
    }

    /// Max over residual hyperedges `e` and pairs `u,v` in `e` of
    /// `w_e * R_{G_H}(u, v)`, against the bound `4*alpha / (r_low * t)`
    /// with `r_low = r/2`.
    pub fn resistance_certificate(&self) -> Result<LeverageCertificate, BundleError> {
        let g = build_associated_graph(&self.h);
        let mut max_leverage = 0.0f64;
        for &id in &self.residual {
            let e = self.h.edge(id).expect("live edge");
            for i in 0..e.verts.len() {
                for j in i + 1..e.verts.len() {
                    let r = effective_resistance(&g, e.verts[i], e.verts[j])?;
                    max_leverage = max_leverage.max(e.weight * r);
                }
            }
        }
        let r_low = self.h.rank_bound() as f64 / 2.0;
        let bound = 4.0 * self.alpha() / (r_low * self.t as f64);
        Ok(LeverageCertificate { max_leverage, bound })
    }

    /// Partition check: homes plus residual cover the live edge set exactly,
    /// residual and layers are disjoint by construction of `homes`.
    pub fn validate_partition(&self) -> Result<(), String> {
        let live: BTreeSet<EdgeId> = self.h.edge_ids().collect();
        let homed: BTreeSet<EdgeId> = self.homes.keys().copied().collect();
        if live != homed {
            return Err(format!("home map covers {} edges, {} live", homed.len(), live.len()));
        }
        for &id in &self.residual {
            if self.homes.get(&id) != Some(&Home::Residual) {
                return Err(format!("residual edge {id:?} not homed as residual"));
            }
        }
        let residual_count = self.homes.values().filter(|&&h| h == Home::Residual).count();
        if residual_count != self.residual.len() {
            return Err("residual set and home map disagree".into());
        }
        Ok(())
    }

    /// Run the independent clustering validator on every layer spanner.
    pub fn validate_spanners(&self) -> Result<(), String> {
        for (li, layer) in self.layers.iter().enumerate() {
            layer.spanner.validate_clusters().map_err(|e| format!("layer {li}: {e}"))?;
        }
        Ok(())
    }

    pub fn op_count(&self) -> u64 {
        self.layers.iter().map(|l| l.spanner.op_count()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::disjoint_hyperpath_certificate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hypergraph(n: usize, m: usize, r: usize, rng: &mut ChaCha8Rng) -> Hypergraph {
        let mut h = Hypergraph::new(n, r);
        while h.m() < m {
            let arity = rng.gen_range(2..=r);
            let mut verts: Vec<u32> = Vec::new();
            while verts.len() < arity {
                let v = rng.gen_range(0..n as u32);
                if !verts.contains(&v) {
                    verts.push(v);
                }
            }
            let w = 2f64.powi(rng.gen_range(0..4));
            h.insert_hyperedge(&verts, w).unwrap();
        }
        h
    }

    #[test]
    fn single_hyperedge_fills_first_layer() {
        let mut h = Hypergraph::new(4, 3);
        let id = h.insert_hyperedge(&[0, 1, 2], 1.0).unwrap();
        let b = BundleState::init(&h, 1, 2, 0).unwrap();
        assert_eq!(b.layer_members(0), vec![id]);
        assert!(b.residual_members().is_empty());
        b.validate_partition().unwrap();
    }

    #[test]
    fn small_instance_absorbed_entirely() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hypergraph(8, 10, 3, &mut rng);
        let b = BundleState::init(&h, 10, 2, 3).unwrap();
        assert!(b.residual_members().is_empty());
        assert!(b.built_layers() <= 10);
        b.validate_partition().unwrap();
    }

    #[test]
    fn layers_partition_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_hypergraph(12, 40, 4, &mut rng);
        let b = BundleState::init(&h, 2, 2, 4).unwrap();
        b.validate_partition().unwrap();
        let mut count = b.residual_members().len();
        for li in 0..b.built_layers() {
            count += b.layer_members(li).len();
        }
        assert_eq!(count, h.m());
    }

    #[test]
    fn residual_pairs_have_disjoint_hyperpaths() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // dense unit-weight instance so three spanner layers cannot absorb it
        let mut h = Hypergraph::new(16, 4);
        while h.m() < 400 {
            let arity = rng.gen_range(2..=4);
            let mut verts: Vec<u32> = Vec::new();
            while verts.len() < arity {
                let v = rng.gen_range(0..16u32);
                if !verts.contains(&v) {
                    verts.push(v);
                }
            }
            h.insert_hyperedge(&verts, 1.0).unwrap();
        }
        let t = 3;
        let b = BundleState::init(&h, t, 2, 11).unwrap();
        assert!(!b.residual_members().is_empty(), "instance too small to leave a residual");
        let layers: Vec<Hypergraph> = (0..b.built_layers()).map(|li| b.layer_hypergraph(li)).collect();
        assert_eq!(layers.len(), t);
        for id in b.residual_members() {
            let e = b.live_hypergraph().edge(id).unwrap().clone();
            let budget = b.alpha() / e.weight;
            for i in 0..e.verts.len() {
                for j in i + 1..e.verts.len() {
                    let paths = disjoint_hyperpath_certificate(&layers, e.verts[i], e.verts[j], budget);
                    assert!(
                        paths >= t,
                        "edge {id:?} pair ({},{}) has only {paths} of {t} disjoint hyperpaths",
                        e.verts[i],
                        e.verts[j]
                    );
                }
            }
        }
    }

    #[test]
    fn pullbacks_are_hyperspanners_of_underlying() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let h = random_hypergraph(10, 25, 3, &mut rng);
        let mut b = BundleState::init(&h, 2, 2, 5).unwrap();
        let alpha = b.alpha();
        let mut ids: Vec<EdgeId> = h.edge_ids().collect();
        // check at init and after each of several deletions
        for step in 0..8.min(ids.len()) {
            for li in 0..b.built_layers() {
                let under = b.underlying_hypergraph(li);
                let pull = b.pullback_hypergraph(li);
                for u in 0..10u32 {
                    for v in u + 1..10 {
                        let du = under.hyperpath_distance(u, v);
                        if du.is_finite() {
                            let dp = pull.hyperpath_distance(u, v);
                            assert!(
                                dp <= alpha * du + 1e-9,
                                "layer {li} pair ({u},{v}): {dp} > {alpha}*{du}"
                            );
                        }
                    }
                }
            }
            b.delete_hyperedge(ids[step]).unwrap();
            b.validate_partition().unwrap();
        }
        let _ = &mut ids;
    }

    #[test]
    fn residual_deletion_reports_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_hypergraph(14, 80, 4, &mut rng);
        let mut b = BundleState::init(&h, 1, 2, 9).unwrap();
        let res = b.residual_members();
        assert!(!res.is_empty());
        let report = b.delete_hyperedge(res[0]).unwrap();
        assert_eq!(report.removed_from, Home::Residual);
        b.validate_partition().unwrap();
    }

    #[test]
    fn layer_deletion_reports_layer_and_stays_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_hypergraph(14, 80, 4, &mut rng);
        let mut b = BundleState::init(&h, 2, 2, 13).unwrap();
        let t1 = b.layer_members(0);
        assert!(!t1.is_empty());
        let before: Vec<BTreeSet<EdgeId>> =
            (0..b.built_layers()).map(|li| b.layer_members(li).into_iter().collect()).collect();
        let victim = t1[0];
        let report = b.delete_hyperedge(victim).unwrap();
        assert_eq!(report.removed_from, Home::Layer(0));
        // each layer's membership changed only by the deletion or promotions
        for li in 0..b.built_layers() {
            let after: BTreeSet<EdgeId> = b.layer_members(li).into_iter().collect();
            for id in &before[li] {
                assert!(after.contains(id) || *id == victim, "layer {li} dropped live edge {id:?}");
            }
            for id in &after {
                assert!(
                    before[li].contains(id) || report.promotions.contains(&(*id, li)),
                    "layer {li} gained {id:?} without a promotion record"
                );
            }
        }
        b.validate_partition().unwrap();
    }

    #[test]
    fn full_deletion_run_keeps_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let h = random_hypergraph(12, 50, 3, &mut rng);
        let mut b = BundleState::init(&h, 2, 2, 21).unwrap();
        let mut ids: Vec<EdgeId> = h.edge_ids().collect();
        use rand::seq::SliceRandom;
        ids.shuffle(&mut rng);
        let mut residual_sizes = vec![b.residual_members().len()];
        for id in ids {
            let report = b.delete_hyperedge(id).unwrap();
            b.validate_partition().unwrap();
            // residual never gains members
            let r = b.residual_members().len();
            assert!(r <= *residual_sizes.last().unwrap(), "residual grew");
            residual_sizes.push(r);
            // every promotion started in the residual
            for (pid, _) in &report.promotions {
                assert_ne!(*pid, id);
            }
        }
        assert_eq!(b.live_hypergraph().m(), 0);
    }

    #[test]
    fn empty_residual_certificate_is_zero() {
        let mut h = Hypergraph::new(4, 3);
        h.insert_hyperedge(&[0, 1, 2], 1.0).unwrap();
        let b = BundleState::init(&h, 1, 2, 0).unwrap();
        let cert = b.resistance_certificate().unwrap();
        assert_eq!(cert.max_leverage, 0.0);
        assert!(cert.bound > 0.0);
    }

    #[test]
    fn certificate_matches_direct_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let h = random_hypergraph(12, 60, 3, &mut rng);
        let b = BundleState::init(&h, 1, 2, 2).unwrap();
        let cert = b.resistance_certificate().unwrap();
        let g = build_associated_graph(b.live_hypergraph());
        let mut direct = 0.0f64;
        for id in b.residual_members() {
            let e = b.live_hypergraph().edge(id).unwrap();
            for i in 0..e.verts.len() {
                for j in i + 1..e.verts.len() {
                    direct = direct
                        .max(e.weight * effective_resistance(&g, e.verts[i], e.verts[j]).unwrap());
                }
            }
        }
        assert!((cert.max_leverage - direct).abs() < 1e-6);
    }

    #[test]
    fn unknown_id_rejected() {
        let mut h = Hypergraph::new(3, 3);
        h.insert_hyperedge(&[0, 1], 1.0).unwrap();
        let mut b = BundleState::init(&h, 1, 2, 0).unwrap();
        assert!(matches!(b.delete_hyperedge(EdgeId(99)), Err(BundleError::UnknownEdge(_))));
    }
}
