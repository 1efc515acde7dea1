//! Fully dynamic wrapper over the decremental sparsifier chains.
//!
//! Insertions are bucketed with a binary counter: inserting the tau-th edge
//! picks the largest bucket index j with 2^{j-1} dividing tau, merges all
//! lower buckets plus the new edge into bucket j, and rebuilds bucket j's
//! decremental sparsifier from scratch. Each bucket therefore holds at most
//! 2^{j-1} edges and is rebuilt at most total/2^{j-1} times. Deletions are
//! routed to the owning bucket's chain; the global sparsifier is the
//! disjoint union of the bucket sparsifiers.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::hypergraph::{EdgeId, Hypergraph, HypergraphError};
use crate::sparsify::{DeltaReport, RankPartitioned, SparsifyError, SparsifyParams};

#[derive(Debug, Error)]
pub enum FulldynError {
    #[error("insertion capacity {0} exceeded")]
    CapacityExceeded(u64),
    #[error("deletion budget {0} exhausted")]
    DeletionBudget(u64),
    #[error("unknown hyperedge {0}")]
    UnknownEdge(EdgeId),
    #[error("sparsify: {0}")]
    Sparsify(#[from] SparsifyError),
    #[error("hypergraph: {0}")]
    Hypergraph(#[from] HypergraphError),
}

/// Largest 1-based bucket index j <= k with 2^{j-1} dividing tau.
pub fn bucket_index(tau: u64, k: usize) -> usize {
    debug_assert!(tau >= 1);
    let j = tau.trailing_zeros() as usize + 1;
    j.min(k)
}

struct Bucket {
    edges: BTreeMap<EdgeId, (Vec<u32>, f64)>,
    chain: Option<RankPartitioned>,
}

pub struct BucketArray {
    n: usize,
    rank_bound: usize,
    m_cap: u64,
    k: usize,
    params: SparsifyParams,
    master_seed: u64,
    tau: u64,
    deletion_cap: u64,
    deletions_used: u64,
    buckets: Vec<Bucket>,
    owner: BTreeMap<EdgeId, usize>,
    next_id: u64,
    /// State resets per bucket: bumped whenever a bucket is rebuilt or torn
    /// down by a merge.
    rebuilds: Vec<u64>,
    retired_ops: u64,
}

impl BucketArray {
    /// `m_cap` bounds total insertions; `deletion_cap` is the configured
    /// deletion budget (the analysis assumes it is O(n^gamma)).
    pub fn new(
        n: usize,
        rank_bound: usize,
        m_cap: u64,
        deletion_cap: u64,
        params: SparsifyParams,
        seed: u64,
    ) -> Self {
        // bucket i holds at most 2^{i-1} edges, so k buckets cover 2^k - 1;
        // round up so exactly m_cap insertions fit
        let k = ((m_cap.max(2) + 1) as f64).log2().ceil() as usize;
        BucketArray {
            n,
            rank_bound,
            m_cap,
            k,
            params,
            master_seed: seed,
            tau: 0,
            deletion_cap,
            deletions_used: 0,
            buckets: (0..k).map(|_| Bucket { edges: BTreeMap::new(), chain: None }).collect(),
            owner: BTreeMap::new(),
            next_id: 0,
            rebuilds: vec![0; k],
            retired_ops: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn m(&self) -> usize {
        self.owner.len()
    }

    /// State resets of 1-based bucket `i` so far.
    pub fn rebuild_count(&self, i: usize) -> u64 {
        self.rebuilds[i - 1]
    }

    pub fn bucket_size(&self, i: usize) -> usize {
        self.buckets[i - 1].edges.len()
    }

    fn rebuild_seed(&self, j: usize) -> u64 {
        self.master_seed
            ^ (j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
            ^ self.rebuilds[j - 1].wrapping_mul(0xd1b5_4a32_d192_ed03)
    }

    pub fn insert(&mut self, verts: &[u32], w: f64) -> Result<EdgeId, FulldynError> {
        if self.tau >= self.m_cap {
            return Err(FulldynError::CapacityExceeded(self.m_cap));
        }
        // validate before committing any state
        let mut probe = Hypergraph::new(self.n, self.rank_bound);
        probe.insert_hyperedge(verts, w)?;

        self.tau += 1;
        let j = bucket_index(self.tau, self.k);
        let id = EdgeId(self.next_id);
        self.next_id += 1;

        // merge buckets 1..j and the new edge into bucket j
        let mut merged: BTreeMap<EdgeId, (Vec<u32>, f64)> = BTreeMap::new();
        for i in 1..=j {
            if let Some(chain) = self.buckets[i - 1].chain.take() {
                self.retired_ops += chain.op_count();
            }
            merged.append(&mut self.buckets[i - 1].edges);
            self.rebuilds[i - 1] += 1;
        }
        merged.insert(id, (verts.to_vec(), w));
        for &eid in merged.keys() {
            self.owner.insert(eid, j);
        }

        let mut h = Hypergraph::new(self.n, self.rank_bound);
        for (&eid, (vs, wt)) in &merged {
            h.insert_with_id(eid, vs, *wt)?;
        }
        let mut p = self.params.clone();
        p.rho = p.rho.min(h.m().max(1) as f64);
        let chain = RankPartitioned::build(&h, &p, self.rebuild_seed(j))?;
        self.buckets[j - 1] = Bucket { edges: merged, chain: Some(chain) };
        Ok(id)
    }

    pub fn delete(&mut self, id: EdgeId) -> Result<DeltaReport, FulldynError> {
        let j = *self.owner.get(&id).ok_or(FulldynError::UnknownEdge(id))?;
        if self.deletions_used >= self.deletion_cap {
            return Err(FulldynError::DeletionBudget(self.deletion_cap));
        }
        self.deletions_used += 1;
        self.owner.remove(&id);
        let bucket = &mut self.buckets[j - 1];
        bucket.edges.remove(&id);
        let report = bucket.chain.as_mut().expect("owned bucket has a chain").maintain_delete(id)?;
        Ok(report)
    }

    /// The live hypergraph (disjoint union of bucket edge sets).
    pub fn live_hypergraph(&self) -> Hypergraph {
        let mut h = Hypergraph::new(self.n, self.rank_bound);
        for b in &self.buckets {
            for (&id, (vs, w)) in &b.edges {
                h.insert_with_id(id, vs, *w).expect("buckets are disjoint");
            }
        }
        h
    }

    /// Union of the bucket sparsifiers.
    pub fn current_sparsifier(&self) -> Hypergraph {
        let mut out = Hypergraph::new(self.n, self.rank_bound);
        for b in &self.buckets {
            if let Some(chain) = &b.chain {
                for (id, e) in chain.sparsifier().edges() {
                    out.insert_with_id(id, &e.verts, e.weight).expect("buckets are disjoint");
                }
            }
        }
        out
    }

    /// Bucket cardinality invariant: |E_i| <= 2^{i-1}, disjoint, covering.
    pub fn validate_buckets(&self) -> Result<(), String> {
        let mut seen = 0usize;
        for i in 1..=self.k {
            let sz = self.buckets[i - 1].edges.len();
            if sz as u64 > 1u64 << (i - 1) {
                return Err(format!("bucket {i} holds {sz} > 2^{}", i - 1));
            }
            for id in self.buckets[i - 1].edges.keys() {
                if self.owner.get(id) != Some(&i) {
                    return Err(format!("edge {id:?} owner mismatch"));
                }
                seen += 1;
            }
        }
        if seen != self.owner.len() {
            return Err("bucket union does not cover the live edge set".into());
        }
        Ok(())
    }

    /// Live per-bucket chains (1-based bucket index).
    pub fn chains(&self) -> impl Iterator<Item = (usize, &RankPartitioned)> {
        self.buckets
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.chain.as_ref().map(|c| (i + 1, c)))
    }

    pub fn op_count(&self) -> u64 {
        self.retired_ops
            + self
                .buckets
                .iter()
                .filter_map(|b| b.chain.as_ref())
                .map(|c| c.op_count())
                .sum::<u64>()
    }
}
