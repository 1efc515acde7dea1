//! Dynamic spectral hypergraph sparsification.
//!
//! Maintains a (1±eps)-spectral sparsifier of a weighted hypergraph under
//! hyperedge insertions and deletions, built from decremental spanner
//! bundles over the star expansion, with dense brute-force oracles for
//! verification on small instances.

pub mod bundle;
pub mod fulldyn;
pub mod hypergraph;
pub mod multigraph;
pub mod oracle;
pub mod spanner;
pub mod sparsify;
pub mod stream;

pub use hypergraph::{EdgeId, Hyperedge, Hypergraph, HypergraphError};
pub use multigraph::{build_associated_graph, build_star_graph, CenterRule, MultiGraph};
pub use stream::{parse_stream, UpdateEvent};
