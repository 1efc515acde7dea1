//! Brute-force verification oracles: dense Laplacians, effective
//! resistances via pseudoinverse and via a grounded linear solve,
//! series/parallel reductions, the importance-sampling reference
//! sparsifier, and the Chernoff tail bound used to size statistical tests.
//!
//! Everything here is deliberately naive and capacity-capped; it exists to
//! certify the maintained structures, not to be fast.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::hypergraph::{EdgeId, Hypergraph};
use crate::multigraph::{build_associated_graph, MultiGraph};

/// Largest graph the dense oracle accepts.
pub const ORACLE_CAPACITY: usize = 50;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle capacity exceeded: n = {0} > {ORACLE_CAPACITY}")]
    CapacityExceeded(usize),
    #[error("non-positive resistance {0}")]
    NonPositiveResistance(f64),
    #[error("empty resistance list")]
    EmptyList,
}

/// Dense Laplacian of a multigraph: off-diagonal `uv` is minus the summed
/// parallel weight, diagonal `uu` is the weighted degree.
pub struct DenseLaplacian {
    pub matrix: DMatrix<f64>,
}

impl DenseLaplacian {
    pub fn from_multigraph(g: &MultiGraph) -> Result<Self, OracleError> {
        if g.n > ORACLE_CAPACITY {
            return Err(OracleError::CapacityExceeded(g.n));
        }
        let mut m = DMatrix::zeros(g.n, g.n);
        for e in &g.edges {
            let (u, v) = (e.u as usize, e.v as usize);
            m[(u, v)] -= e.weight;
            m[(v, u)] -= e.weight;
            m[(u, u)] += e.weight;
            m[(v, v)] += e.weight;
        }
        Ok(DenseLaplacian { matrix: m })
    }

    /// Quadratic form `x^T L x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        (xv.transpose() * &self.matrix * xv)[(0, 0)]
    }

    /// Moore-Penrose pseudoinverse via symmetric eigendecomposition with
    /// eigenvalue cutoff `1e-10 * lambda_max`.
    pub fn pseudoinverse(&self) -> DMatrix<f64> {
        let eig = self.matrix.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let cutoff = 1e-10 * lmax.max(1.0);
        let n = self.matrix.nrows();
        let mut inv = DMatrix::zeros(n, n);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l > cutoff {
                let u = eig.eigenvectors.column(i);
                inv += u * u.transpose() / l;
            }
        }
        inv
    }

    /// Sanity checks: symmetric, zero row sums, PSD.
    pub fn validate(&self) -> bool {
        let m = &self.matrix;
        let sym = (m - m.transpose()).amax() < 1e-9;
        let rows = (0..m.nrows()).all(|i| m.row(i).sum().abs() < 1e-9);
        let psd = m.clone().symmetric_eigen().eigenvalues.iter().all(|&l| l >= -1e-9);
        sym && rows && psd
    }
}

fn components(g: &MultiGraph) -> Vec<u32> {
    let mut comp = vec![u32::MAX; g.n];
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); g.n];
    for e in &g.edges {
        adj[e.u as usize].push(e.v);
        adj[e.v as usize].push(e.u);
    }
    let mut c = 0;
    for s in 0..g.n {
        if comp[s] != u32::MAX {
            continue;
        }
        let mut stack = vec![s as u32];
        comp[s] = c;
        while let Some(v) = stack.pop() {
            for &w in &adj[v as usize] {
                if comp[w as usize] == u32::MAX {
                    comp[w as usize] = c;
                    stack.push(w);
                }
            }
        }
        c += 1;
    }
    comp
}

/// Effective resistance `R_G(u, v) = (e_u - e_v)^T L^+ (e_u - e_v)`;
/// infinity for a disconnected pair.
pub fn effective_resistance(g: &MultiGraph, u: u32, v: u32) -> Result<f64, OracleError> {
    if u == v {
        return Ok(0.0);
    }
    let comp = components(g);
    if comp[u as usize] != comp[v as usize] {
        return Ok(f64::INFINITY);
    }
    let lap = DenseLaplacian::from_multigraph(g)?;
    let pinv = lap.pseudoinverse();
    let (u, v) = (u as usize, v as usize);
    Ok(pinv[(u, u)] + pinv[(v, v)] - 2.0 * pinv[(u, v)])
}

/// Second, independent route: ground `u`, solve the reduced system
/// `L x = e_u - e_v`, and read off the potential difference.
pub fn effective_resistance_solve(g: &MultiGraph, u: u32, v: u32) -> Result<f64, OracleError> {
    if u == v {
        return Ok(0.0);
    }
    let comp = components(g);
    if comp[u as usize] != comp[v as usize] {
        return Ok(f64::INFINITY);
    }
    let lap = DenseLaplacian::from_multigraph(g)?;
    let n = g.n;
    // Delete the row/column of u (potential fixed to 0) and solve.
    let keep: Vec<usize> = (0..n).filter(|&i| i != u as usize).collect();
    let mut reduced = DMatrix::zeros(n - 1, n - 1);
    for (i, &ri) in keep.iter().enumerate() {
        for (j, &rj) in keep.iter().enumerate() {
            reduced[(i, j)] = lap.matrix[(ri, rj)];
        }
    }
    let mut rhs = DVector::zeros(n - 1);
    let vi = keep.iter().position(|&i| i == v as usize).unwrap();
    rhs[vi] = -1.0; // unit current out of v, into the grounded u
    // Vertices in other components make `reduced` singular; regularize by
    // restricting to u's component.
    let cu = comp[u as usize];
    for (i, &ri) in keep.iter().enumerate() {
        if comp[ri] != cu {
            reduced[(i, i)] += 1.0;
        }
    }
    let sol = reduced.lu().solve(&rhs).expect("grounded Laplacian is nonsingular");
    Ok(-sol[vi])
}

/// Equivalent resistance of resistors in series.
pub fn series_reduce(resistances: &[f64]) -> Result<f64, OracleError> {
    check_resistances(resistances)?;
    Ok(resistances.iter().sum())
}

/// Equivalent resistance of resistors in parallel.
pub fn parallel_reduce(resistances: &[f64]) -> Result<f64, OracleError> {
    check_resistances(resistances)?;
    Ok(1.0 / resistances.iter().map(|r| 1.0 / r).sum::<f64>())
}

fn check_resistances(rs: &[f64]) -> Result<(), OracleError> {
    if rs.is_empty() {
        return Err(OracleError::EmptyList);
    }
    for &r in rs {
        if r.is_nan() || r <= 0.0 {
            return Err(OracleError::NonPositiveResistance(r));
        }
    }
    Ok(())
}

/// Multiplicative Chernoff tail: `P[X >= (1 + delta) mu] <= exp(-delta^2 mu / (2 + delta))`.
pub fn chernoff_bound(mu: f64, delta: f64) -> f64 {
    assert!(mu >= 0.0 && delta >= 0.0);
    (-delta * delta * mu / (2.0 + delta)).exp()
}

/// Importance-sampled reference sparsifier: each hyperedge kept with
/// probability `min{1, c_gamma r^4 eps^-2 log2(n) * w_e max_{u,v in e} R_{G_H}(u,v)}`
/// and reweighted to `w_e / p_e`.
pub fn proposition1_reference_sampler(
    h: &Hypergraph,
    eps: f64,
    c_gamma: f64,
    seed: u64,
) -> Result<Hypergraph, OracleError> {
    use rand::{Rng, SeedableRng};
    if h.n() > ORACLE_CAPACITY {
        return Err(OracleError::CapacityExceeded(h.n()));
    }
    let g = build_associated_graph(h);
    let r = h.rank().max(2) as f64;
    let logn = (h.n().max(2) as f64).log2();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Hypergraph::new(h.n(), h.rank_bound());
    for (id, e) in h.edges() {
        let mut rmax = 0.0f64;
        for i in 0..e.verts.len() {
            for j in i + 1..e.verts.len() {
                rmax = rmax.max(effective_resistance(&g, e.verts[i], e.verts[j])?);
            }
        }
        let p = (c_gamma * r.powi(4) * eps.powi(-2) * logn * e.weight * rmax).min(1.0);
        if rng.gen::<f64>() < p {
            out.insert_with_id(id, &e.verts, e.weight / p).expect("valid edge");
        }
    }
    Ok(out)
}

/// Sampling probability the reference sampler assigns to one hyperedge.
pub fn reference_sampling_probability(
    h: &Hypergraph,
    g: &MultiGraph,
    id: EdgeId,
    eps: f64,
    c_gamma: f64,
) -> Result<f64, OracleError> {
    let e = h.edge(id).expect("live edge");
    let r = h.rank().max(2) as f64;
    let logn = (h.n().max(2) as f64).log2();
    let mut rmax = 0.0f64;
    for i in 0..e.verts.len() {
        for j in i + 1..e.verts.len() {
            rmax = rmax.max(effective_resistance(g, e.verts[i], e.verts[j])?);
        }
    }
    Ok((c_gamma * r.powi(4) * eps.powi(-2) * logn * e.weight * rmax).min(1.0))
}

/// Count how many of the given disjoint hyperedge layers contain a
/// `(u, v)`-hyperpath of length at most `budget`.
pub fn disjoint_hyperpath_certificate(layers: &[Hypergraph], u: u32, v: u32, budget: f64) -> usize {
    layers
        .iter()
        .filter(|layer| layer.hyperpath_distance(u, v) <= budget + 1e-12)
        .count()
}
