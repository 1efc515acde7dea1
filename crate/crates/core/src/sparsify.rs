//! Spectral hypergraph sparsification by bundle peeling and uniform
//! 1/4-sampling: a single peel-and-sample pass (slight sparsify), the
//! iterated chain that reduces the edge count to roughly m/rho, and
//! size-class partitioning for unbounded-rank inputs. All sampling
//! decisions are drawn once per hyperedge when a level is created and are
//! never redrawn, so the chain stays valid under an oblivious deletion
//! sequence.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bundle::{BundleError, BundleState, Home};
use crate::hypergraph::{EdgeId, Hypergraph, HypergraphError};

#[derive(Debug, Error)]
pub enum SparsifyError {
    #[error("epsilon must be in (0, 1], got {0}")]
    BadEps(f64),
    #[error("gamma must be at least 1, got {0}")]
    BadGamma(f64),
    #[error("c_gamma must be positive and supplied explicitly in theory mode")]
    BadCGamma,
    #[error("c must be positive, got {0}")]
    BadC(f64),
    #[error("rho must satisfy 1 <= rho <= m, got {0}")]
    BadRho(f64),
    #[error("m_star must be at least n")]
    BadMStar,
    #[error("hyperedge {0} has size {1}, outside ({2}, {3}]")]
    SizeClass(EdgeId, usize, usize, usize),
    #[error("unknown hyperedge {0}")]
    UnknownEdge(EdgeId),
    #[error("bundle: {0}")]
    Bundle(#[from] BundleError),
    #[error("hypergraph: {0}")]
    Hypergraph(#[from] HypergraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Mode {
    /// Use the full bundle size; `c_gamma` must be supplied.
    Theory,
    /// Divide the bundle size by `scale` (floor 1); recorded in reports.
    Practical { scale: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SparsifyParams {
    pub eps: f64,
    pub gamma: f64,
    /// Sampling constant; required in theory mode, defaults to 1 in
    /// practical mode (with a caveat in the stats output).
    pub c_gamma: Option<f64>,
    /// Size-threshold constant of the chain's stopping guard.
    pub c: f64,
    pub rho: f64,
    pub m_star: usize,
    pub mode: Mode,
    /// Override the computed stretch factor in the bundle-size formula
    /// (testing hook; the bundle itself always uses its computed stretch).
    pub alpha_override: Option<f64>,
    /// Spanner hierarchy depth; defaults to ceil(log2 n).
    pub spanner_k: Option<usize>,
}

impl SparsifyParams {
    pub fn practical(eps: f64, rho: f64, m_star: usize) -> Self {
        SparsifyParams {
            eps,
            gamma: 1.0,
            c_gamma: None,
            c: 1.0,
            rho,
            m_star,
            mode: Mode::Practical { scale: 1.0 },
            alpha_override: None,
            spanner_k: None,
        }
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<(), SparsifyError> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(SparsifyError::BadEps(self.eps));
        }
        if self.gamma < 1.0 {
            return Err(SparsifyError::BadGamma(self.gamma));
        }
        match (self.mode, self.c_gamma) {
            (Mode::Theory, None) => return Err(SparsifyError::BadCGamma),
            (_, Some(cg)) if cg <= 0.0 => return Err(SparsifyError::BadCGamma),
            _ => {}
        }
        if self.c <= 0.0 {
            return Err(SparsifyError::BadC(self.c));
        }
        if self.rho < 1.0 || self.rho > m.max(1) as f64 {
            return Err(SparsifyError::BadRho(self.rho));
        }
        if self.m_star < n {
            return Err(SparsifyError::BadMStar);
        }
        Ok(())
    }

    pub fn c_gamma_effective(&self) -> f64 {
        self.c_gamma.unwrap_or(1.0)
    }

    pub fn spanner_k_for(&self, n: usize) -> usize {
        self.spanner_k.unwrap_or_else(|| ((n.max(2) as f64).log2().ceil() as usize).max(2))
    }

    /// Bundle size: ceil(16 * alpha * c_gamma * r^3 * eps^-2 * log2 n),
    /// divided by the practical-mode scale (floor 1).
    pub fn bundle_size(&self, n: usize, r: usize, eps_level: f64, alpha: f64) -> usize {
        let alpha = self.alpha_override.unwrap_or(alpha);
        let t = 16.0 * alpha * self.c_gamma_effective() * (r as f64).powi(3)
            / (eps_level * eps_level)
            * (n.max(2) as f64).log2();
        let t = t.ceil();
        match self.mode {
            Mode::Theory => t as usize,
            Mode::Practical { scale } => ((t / scale).ceil() as usize).max(1),
        }
    }
}

/// Numeric form of the per-level budget: (1 + eps/(2k))^k <= 1 + eps and
/// (1 - eps/(2k))^k >= 1 - eps.
pub fn eps_budget_ok(eps: f64, k: usize) -> bool {
    if k == 0 {
        return true;
    }
    let e = eps / (2.0 * k as f64);
    (1.0 + e).powi(k as i32) <= 1.0 + eps + 1e-12
        && (1.0 - e).powi(k as i32) >= 1.0 - eps - 1e-12
}

fn check_size_class(h: &Hypergraph) -> Result<(), SparsifyError> {
    let r = h.rank_bound();
    for (id, e) in h.edges() {
        if e.arity() <= r / 2 || e.arity() > r {
            return Err(SparsifyError::SizeClass(id, e.arity(), r / 2, r));
        }
    }
    Ok(())
}

/// Draw the per-edge 1/4 coins for a fixed id set, in id order.
pub fn draw_coins(ids: &[EdgeId], seed: u64) -> BTreeMap<EdgeId, bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    sorted.into_iter().map(|id| (id, rng.gen::<f64>() < 0.25)).collect()
}

/// One peel-and-sample pass: a t-bundle plus the surviving residual edges
/// at quadrupled weight.
pub struct SlightSparsifier {
    pub bundle: BundleState,
    /// Immutable per-edge sampling decisions for the residual at creation.
    coins: BTreeMap<EdgeId, bool>,
    pub t: usize,
    pub eps_level: f64,
}

impl SlightSparsifier {
    pub fn build(
        h: &Hypergraph,
        p: &SparsifyParams,
        eps_level: f64,
        seed: u64,
    ) -> Result<Self, SparsifyError> {
        check_size_class(h)?;
        let k = p.spanner_k_for(h.n());
        let r = h.rank_bound();
        let alpha = (2 * 2 * (2 * k - 1)) as f64;
        let t = p.bundle_size(h.n(), r, eps_level, alpha);
        let bundle = BundleState::init(h, t, k, seed)?;
        let coins = draw_coins(&bundle.residual_members(), seed ^ 0x5eed_c01f);
        Ok(SlightSparsifier { bundle, coins, t, eps_level })
    }

    pub fn coin(&self, id: EdgeId) -> bool {
        self.coins.get(&id).copied().unwrap_or(false)
    }

    /// Residual edges that survived sampling, at current liveness.
    pub fn sampled_residual(&self) -> Vec<EdgeId> {
        self.bundle.residual_members().into_iter().filter(|&id| self.coin(id)).collect()
    }

    /// The pass output: bundle edges at original weight plus sampled
    /// residual at 4x weight.
    pub fn sparsifier(&self) -> Hypergraph {
        let h = self.bundle.live_hypergraph();
        let mut out = Hypergraph::new(h.n(), h.rank_bound());
        for id in self.bundle.bundle_members() {
            let e = h.edge(id).expect("bundle member is live");
            out.insert_with_id(id, &e.verts, e.weight).expect("valid edge");
        }
        for id in self.sampled_residual() {
            let e = h.edge(id).expect("residual member is live");
            out.insert_with_id(id, &e.verts, 4.0 * e.weight).expect("valid edge");
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelStats {
    pub t: usize,
    pub bundle_size: usize,
    pub residual_size: usize,
    pub sampled_size: usize,
    pub eps_level: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainStats {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub i_last: usize,
    pub eps: f64,
    pub mode: Mode,
    pub sparsifier_size: usize,
    pub levels: Vec<LevelStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caveat: Option<String>,
}

/// Edges that entered, left, or changed weight in the maintained output.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DeltaReport {
    pub removed: Vec<EdgeId>,
    pub added: Vec<EdgeId>,
    pub reweighted: Vec<EdgeId>,
}

/// The iterated sparsifier: levels of peel-and-sample passes, each built on
/// the previous level's sampled residual at quadrupled weight.
pub struct SparsifierChain {
    params: SparsifyParams,
    base: Hypergraph,
    levels: Vec<SlightSparsifier>,
    k: usize,
    pub eps_level: f64,
    seed: u64,
}

impl SparsifierChain {
    pub fn build(h: &Hypergraph, p: &SparsifyParams, seed: u64) -> Result<Self, SparsifyError> {
        p.validate(h.n(), h.m())?;
        check_size_class(h)?;
        let k = if p.rho <= 1.0 { 0 } else { p.rho.log2().ceil() as usize };
        assert!(eps_budget_ok(p.eps, k), "per-level budget violated for eps={}, k={k}", p.eps);
        let eps_level = if k == 0 { p.eps } else { p.eps / (2.0 * k as f64) };

        let mut chain = SparsifierChain {
            params: p.clone(),
            base: h.clone(),
            levels: Vec::new(),
            k,
            eps_level,
            seed,
        };
        let mut current = h.clone();
        let mut i = 0usize;
        // the size-halving argument behind the iteration ceiling is
        // probabilistic, so enforce the ceiling as a hard cap: an unlucky
        // sample then costs output size, never an extra level
        let cap = chain.iteration_bound(h.m());
        while i < cap && current.m() as f64 >= p.c * p.m_star as f64 {
            let level = SlightSparsifier::build(&current, p, eps_level, seed.wrapping_add(i as u64 + 1))?;
            // next input: sampled residual at 4x weight
            let mut next = Hypergraph::new(current.n(), current.rank_bound());
            for id in level.sampled_residual() {
                let e = current.edge(id).expect("sampled edge is live");
                next.insert_with_id(id, &e.verts, 4.0 * e.weight)?;
            }
            chain.levels.push(level);
            current = next;
            i += 1;
        }
        Ok(chain)
    }

    pub fn i_last(&self) -> usize {
        self.levels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn live_hypergraph(&self) -> &Hypergraph {
        &self.base
    }

    pub fn levels(&self) -> &[SlightSparsifier] {
        &self.levels
    }

    /// Iteration ceiling for this instance.
    pub fn iteration_bound(&self, m0: usize) -> usize {
        let by_size = if m0 <= self.params.m_star {
            0
        } else {
            (m0 as f64 / self.params.m_star as f64).log2().ceil() as usize
        };
        self.k.min(by_size)
    }

    /// The output edge set: union of the level bundles plus the last
    /// level's sampled residual (or the input itself when no level ran).
    pub fn sparsifier(&self) -> Hypergraph {
        if self.levels.is_empty() {
            return self.base.clone();
        }
        let mut out = Hypergraph::new(self.base.n(), self.base.rank_bound());
        for level in &self.levels {
            let live = level.bundle.live_hypergraph();
            for id in level.bundle.bundle_members() {
                let e = live.edge(id).expect("bundle member live");
                out.insert_with_id(id, &e.verts, e.weight).expect("valid edge");
            }
        }
        let last = self.levels.last().unwrap();
        let live = last.bundle.live_hypergraph();
        for id in last.sampled_residual() {
            let e = live.edge(id).expect("residual member live");
            out.insert_with_id(id, &e.verts, 4.0 * e.weight).expect("valid edge");
        }
        out
    }

    /// Route a deletion down the chain. Each level's bundle absorbs the
    /// deletions aimed at it; residual promotions there become deletions in
    /// the next level's input. No coin is ever redrawn.
    pub fn maintain_delete(&mut self, id: EdgeId) -> Result<DeltaReport, SparsifyError> {
        if !self.base.contains(id) {
            return Err(SparsifyError::UnknownEdge(id));
        }
        let before = self.sparsifier();
        self.base.delete_hyperedge(id)?;

        let mut del: BTreeSet<EdgeId> = BTreeSet::from([id]);
        for level in &mut self.levels {
            let mut next: BTreeSet<EdgeId> = BTreeSet::new();
            for e in del {
                if level.bundle.home(e).is_none() {
                    continue;
                }
                let report = level.bundle.delete_hyperedge(e)?;
                if report.removed_from == Home::Residual && level.coin(e) {
                    next.insert(e);
                }
                for (pid, _) in report.promotions {
                    // promoted out of the residual: if it had been sampled
                    // it lives in deeper levels and must be withdrawn there
                    if level.coin(pid) {
                        next.insert(pid);
                    }
                }
            }
            del = next;
        }

        let after = self.sparsifier();
        let mut report = DeltaReport::default();
        for (eid, e) in before.edges() {
            match after.edge(eid) {
                None => report.removed.push(eid),
                Some(ne) if ne.weight != e.weight => report.reweighted.push(eid),
                _ => {}
            }
        }
        for (eid, _) in after.edges() {
            if !before.contains(eid) {
                report.added.push(eid);
            }
        }
        Ok(report)
    }

    pub fn stats(&self) -> ChainStats {
        let caveat = match (self.params.mode, self.params.c_gamma) {
            (Mode::Practical { .. }, None) => {
                Some("c_gamma defaulted to 1; approximation quality must be verified, not assumed".into())
            }
            _ => None,
        };
        ChainStats {
            n: self.base.n(),
            m: self.base.m(),
            k: self.k,
            i_last: self.levels.len(),
            eps: self.params.eps,
            mode: self.params.mode,
            sparsifier_size: self.sparsifier().m(),
            levels: self
                .levels
                .iter()
                .map(|l| LevelStats {
                    t: l.t,
                    bundle_size: l.bundle.bundle_members().len(),
                    residual_size: l.bundle.residual_members().len(),
                    sampled_size: l.sampled_residual().len(),
                    eps_level: l.eps_level,
                })
                .collect(),
            caveat,
        }
    }

    pub fn op_count(&self) -> u64 {
        self.levels.iter().map(|l| l.bundle.op_count()).sum()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Size-class partition: class i holds hyperedges of size in
/// (2^{i-1}, 2^i], each class sparsified with rank bound r_i = 2^i.
pub struct RankPartitioned {
    classes: BTreeMap<usize, SparsifierChain>,
    class_of: BTreeMap<EdgeId, usize>,
    n: usize,
    rank_bound: usize,
}

/// Bucketing rule: smallest i with |e| <= 2^i.
pub fn size_class(arity: usize) -> usize {
    ((arity as f64).log2().ceil() as usize).max(1)
}

impl RankPartitioned {
    pub fn build(h: &Hypergraph, p: &SparsifyParams, seed: u64) -> Result<Self, SparsifyError> {
        let mut buckets: BTreeMap<usize, Vec<EdgeId>> = BTreeMap::new();
        let mut class_of = BTreeMap::new();
        for (id, e) in h.edges() {
            let i = size_class(e.arity());
            buckets.entry(i).or_default().push(id);
            class_of.insert(id, i);
        }
        let mut classes = BTreeMap::new();
        for (i, ids) in buckets {
            let mut sub = Hypergraph::new(h.n(), 1 << i);
            for id in ids {
                let e = h.edge(id).unwrap();
                sub.insert_with_id(id, &e.verts, e.weight)?;
            }
            let mut p_i = p.clone();
            p_i.rho = p.rho.min(sub.m().max(1) as f64);
            classes.insert(i, SparsifierChain::build(&sub, &p_i, seed.wrapping_add(i as u64))?);
        }
        Ok(RankPartitioned { classes, class_of, n: h.n(), rank_bound: h.rank_bound() })
    }

    pub fn classes(&self) -> impl Iterator<Item = (usize, &SparsifierChain)> {
        self.classes.iter().map(|(&i, c)| (i, c))
    }

    pub fn class_of(&self, id: EdgeId) -> Option<usize> {
        self.class_of.get(&id).copied()
    }

    pub fn maintain_delete(&mut self, id: EdgeId) -> Result<DeltaReport, SparsifyError> {
        let i = self.class_of.remove(&id).ok_or(SparsifyError::UnknownEdge(id))?;
        self.classes.get_mut(&i).expect("class exists").maintain_delete(id)
    }

    /// Disjoint union of the class sparsifiers.
    pub fn sparsifier(&self) -> Hypergraph {
        let mut out = Hypergraph::new(self.n, self.rank_bound.max(2));
        for chain in self.classes.values() {
            for (id, e) in chain.sparsifier().edges() {
                out.insert_with_id(id, &e.verts, e.weight).expect("classes are disjoint");
            }
        }
        out
    }

    pub fn op_count(&self) -> u64 {
        self.classes.values().map(|c| c.op_count()).sum()
    }
}
